use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::CellKind;

/// The seven single and joint variants, in the order they are usually reported.
pub const NAMED_VARIANTS: [&str; 7] = [
    "lstm",
    "gru",
    "bilstm",
    "gru+lstm",
    "lstm+bilstm",
    "gru+bilstm",
    "gru+bilstm+lstm",
];

/// Ordered stack of one to three recurrent cells, written `a+b+c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CellStack(Vec<CellKind>);

impl CellStack {
    pub fn new(cells: Vec<CellKind>) -> Result<Self> {
        if cells.is_empty() || cells.len() > 3 {
            return Err(Error::Argument(format!(
                "a model stacks 1 to 3 recurrent cells, got {}",
                cells.len()
            )));
        }
        if cells.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument(
                "adjacent cells in a joint model must be of different types".into(),
            ));
        }
        Ok(CellStack(cells))
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.0
    }
}

impl FromStr for CellStack {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || {
            Error::Argument(format!(
                "unknown architecture {s:?}; expected one of: {}",
                NAMED_VARIANTS.join(", ")
            ))
        };
        let cells = s
            .split('+')
            .map(|c| c.parse::<CellKind>().map_err(|_| unknown()))
            .collect::<Result<Vec<_>>>()?;
        CellStack::new(cells).map_err(|e| match e {
            Error::Argument(m) => Error::Argument(format!(
                "{m}; expected one of: {}",
                NAMED_VARIANTS.join(", ")
            )),
            other => other,
        })
    }
}

impl fmt::Display for CellStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|c| c.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl TryFrom<String> for CellStack {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CellStack> for String {
    fn from(s: CellStack) -> String {
        s.to_string()
    }
}

/// Declarative description of a classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub cells: CellStack,
    pub embed_dim: usize,
    /// Hidden size of every recurrent cell (per direction for BiLSTM).
    pub hidden: usize,
    /// Width of the ReLU layer between the last cell and the softmax head.
    pub dense_hidden: usize,
    pub num_classes: usize,
    pub max_len: usize,
    /// Retained vocabulary terms, excluding PAD and OOV.
    pub vocab_size: usize,
}

impl ArchSpec {
    pub const DEFAULT_EMBED_DIM: usize = 100;
    pub const DEFAULT_HIDDEN: usize = 64;
    pub const DEFAULT_DENSE: usize = 64;

    pub fn new(cells: &str, vocab_size: usize, num_classes: usize, max_len: usize) -> Result<Self> {
        let spec = ArchSpec {
            cells: cells.parse()?,
            embed_dim: Self::DEFAULT_EMBED_DIM,
            hidden: Self::DEFAULT_HIDDEN,
            dense_hidden: Self::DEFAULT_DENSE,
            num_classes,
            max_len,
            vocab_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        CellStack::new(self.cells.0.clone())?;
        for (name, value) in [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("dense_hidden", self.dense_hidden),
            ("num_classes", self.num_classes),
            ("max_len", self.max_len),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Rows of the embedding table, `V + 2`.
    pub fn num_ids(&self) -> usize {
        self.vocab_size + 2
    }

    /// Input width seen by each cell, in stack order.
    pub fn cell_inputs(&self) -> Vec<usize> {
        let mut width = self.embed_dim;
        self.cells
            .cells()
            .iter()
            .map(|kind| {
                let input = width;
                width = kind.output_width(self.hidden);
                input
            })
            .collect()
    }

    /// Width of the vector handed from the last cell to the dense layer.
    pub fn feature_width(&self) -> usize {
        let last = *self.cells.cells().last().expect("non-empty stack");
        last.output_width(self.hidden)
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let cells: usize = self
            .cells
            .cells()
            .iter()
            .zip(self.cell_inputs())
            .map(|(kind, input)| kind.param_count(input, self.hidden))
            .sum();
        self.num_ids() * self.embed_dim
            + cells
            + self.feature_width() * self.dense_hidden
            + self.dense_hidden
            + self.dense_hidden * self.num_classes
            + self.num_classes
    }
}

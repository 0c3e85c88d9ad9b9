//! Embedding lookup and recurrent layers with exact backpropagation through time.
//!
//! Gate packing is fixed: LSTM blocks are `i, f, g, o` and GRU blocks are
//! `z, r, h̃`. Initial hidden and cell states are zero unless given.
//! Padding steps are processed like any other step.

mod bilstm;
mod embedding;
mod gru;
mod lstm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bilstm::{bilstm_backward, bilstm_forward, BiLstmCache, BiLstmGrads, BiLstmParams};
pub use embedding::{embed_backward, embed_backward_into, embed_forward, EmbeddingParams};
pub use gru::{gru_backward, gru_forward, GruCache, GruGrads, GruParams};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads, LstmParams};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

pub const LSTM_GATE_ORDER: &str = "i,f,g,o";
pub const GRU_GATE_ORDER: &str = "z,r,h";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
    #[serde(rename = "bilstm")]
    BiLstm,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
            CellKind::BiLstm => "bilstm",
        }
    }

    /// Width of the emitted hidden sequence.
    pub fn output_width(self, hidden: usize) -> usize {
        match self {
            CellKind::BiLstm => 2 * hidden,
            _ => hidden,
        }
    }

    /// Number of scalar parameters for a layer with the given input width.
    pub fn param_count(self, input: usize, hidden: usize) -> usize {
        let block = hidden * (input + hidden + 1);
        match self {
            CellKind::Lstm => 4 * block,
            CellKind::Gru => 3 * block,
            CellKind::BiLstm => 2 * 4 * block,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            "bilstm" => Ok(CellKind::BiLstm),
            other => Err(Error::Argument(format!("unknown cell {other:?}"))),
        }
    }
}

/// Parameters of one recurrent layer. Also used to hold its gradients.
#[derive(Clone, Debug, PartialEq)]
pub enum CellParams {
    Lstm(LstmParams),
    Gru(GruParams),
    BiLstm(BiLstmParams),
}

pub enum CellCache {
    Lstm(LstmCache),
    Gru(GruCache),
    BiLstm(BiLstmCache),
}

impl CellParams {
    pub fn new(kind: CellKind, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        match kind {
            CellKind::Lstm => CellParams::Lstm(LstmParams::new(input, hidden, rng)),
            CellKind::Gru => CellParams::Gru(GruParams::new(input, hidden, rng)),
            CellKind::BiLstm => CellParams::BiLstm(BiLstmParams::new(input, hidden, rng)),
        }
    }

    pub fn zeros(kind: CellKind, input: usize, hidden: usize) -> Self {
        match kind {
            CellKind::Lstm => CellParams::Lstm(LstmParams::zeros(input, hidden)),
            CellKind::Gru => CellParams::Gru(GruParams::zeros(input, hidden)),
            CellKind::BiLstm => CellParams::BiLstm(BiLstmParams::zeros(input, hidden)),
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Gru(_) => CellKind::Gru,
            CellParams::BiLstm(_) => CellKind::BiLstm,
        }
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        match self {
            CellParams::Lstm(p) => vec![("W", &p.w), ("U", &p.u), ("b", &p.b)],
            CellParams::Gru(p) => vec![("W", &p.w), ("U", &p.u), ("b", &p.b)],
            CellParams::BiLstm(p) => vec![
                ("fwd.W", &p.fwd.w),
                ("fwd.U", &p.fwd.u),
                ("fwd.b", &p.fwd.b),
                ("bwd.W", &p.bwd.w),
                ("bwd.U", &p.bwd.u),
                ("bwd.b", &p.bwd.b),
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            CellParams::Lstm(p) => vec![&mut p.w, &mut p.u, &mut p.b],
            CellParams::Gru(p) => vec![&mut p.w, &mut p.u, &mut p.b],
            CellParams::BiLstm(p) => vec![
                &mut p.fwd.w,
                &mut p.fwd.u,
                &mut p.fwd.b,
                &mut p.bwd.w,
                &mut p.bwd.u,
                &mut p.bwd.b,
            ],
        }
    }

    /// Runs the layer over the whole sequence from zero initial state.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, CellCache)> {
        match self {
            CellParams::Lstm(p) => {
                let zeros = vec![0.0; p.hidden()];
                let (h, c) = lstm_forward(x, p, &zeros, &zeros)?;
                Ok((h, CellCache::Lstm(c)))
            }
            CellParams::Gru(p) => {
                let (h, c) = gru_forward(x, p, &vec![0.0; p.hidden()])?;
                Ok((h, CellCache::Gru(c)))
            }
            CellParams::BiLstm(p) => {
                let (h, c) = bilstm_forward(x, p)?;
                Ok((h, CellCache::BiLstm(c)))
            }
        }
    }

    /// Input gradient and parameter gradients for upstream gradient `dh`.
    pub fn backward(&self, cache: &CellCache, dh: &Matrix) -> Result<(Matrix, CellParams)> {
        match (self, cache) {
            (CellParams::Lstm(p), CellCache::Lstm(c)) => {
                let g = lstm_backward(p, c, dh)?;
                Ok((g.dx, CellParams::Lstm(g.params)))
            }
            (CellParams::Gru(p), CellCache::Gru(c)) => {
                let g = gru_backward(p, c, dh)?;
                Ok((g.dx, CellParams::Gru(g.params)))
            }
            (CellParams::BiLstm(p), CellCache::BiLstm(c)) => {
                let g = bilstm_backward(p, c, dh)?;
                Ok((g.dx, CellParams::BiLstm(g.params)))
            }
            _ => Err(Error::Shape(
                "cell cache does not match the layer type".into(),
            )),
        }
    }
}

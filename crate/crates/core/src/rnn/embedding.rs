use crate::error::{Error, Result};
use crate::tensor::{init_params, Init, Matrix, Rng};

/// Lookup table with one row per id, PAD and OOV included.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub table: Matrix,
}

impl EmbeddingParams {
    /// U(−0.05, 0.05) with the PAD row zeroed.
    pub fn new(num_ids: usize, dim: usize, rng: &mut Rng) -> Self {
        let mut table = init_params(num_ids, dim, Init::SmallUniform, rng);
        if num_ids > 0 {
            table.row_mut(0).fill(0.0);
        }
        EmbeddingParams { table }
    }

    pub fn num_ids(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }
}

pub fn embed_forward(ids: &[u32], params: &EmbeddingParams) -> Result<Matrix> {
    let dim = params.dim();
    let mut out = Matrix::zeros(ids.len(), dim);
    for (t, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= params.num_ids() {
            return Err(Error::Index(format!(
                "token id {id} at position {t} outside table of {} rows",
                params.num_ids()
            )));
        }
        out.row_mut(t).copy_from_slice(params.table.row(id));
    }
    Ok(out)
}

/// Scatter-adds `dx` rows into `grad` at the rows named by `ids`.
pub fn embed_backward_into(ids: &[u32], dx: &Matrix, grad: &mut Matrix) -> Result<()> {
    if dx.rows() != ids.len() || dx.cols() != grad.cols() {
        return Err(Error::Shape(format!(
            "embedding backward: {} ids with gradient {}x{} into table {}x{}",
            ids.len(),
            dx.rows(),
            dx.cols(),
            grad.rows(),
            grad.cols()
        )));
    }
    for (t, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= grad.rows() {
            return Err(Error::Index(format!("token id {id} outside table")));
        }
        for (g, d) in grad.row_mut(id).iter_mut().zip(dx.row(t)) {
            *g += d;
        }
    }
    Ok(())
}

pub fn embed_backward(ids: &[u32], dx: &Matrix, num_ids: usize) -> Result<Matrix> {
    let mut grad = Matrix::zeros(num_ids, dx.cols());
    embed_backward_into(ids, dx, &mut grad)?;
    Ok(grad)
}

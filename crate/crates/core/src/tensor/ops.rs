use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// `x·W + b`, broadcasting `b` over rows.
pub fn affine(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    if x.cols() != w.rows() || b.len() != w.cols() {
        return Err(Error::Shape(format!(
            "affine: x is {}x{}, W is {}x{}, b has {}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            b.len()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), w.cols());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(b);
    }
    crate::tensor::gemm_acc(
        x.as_slice(),
        x.rows(),
        x.cols(),
        w.as_slice(),
        w.cols(),
        out.as_mut_slice(),
    );
    Ok(out)
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient of `relu` at `x`; the subgradient at 0 is 0.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Result<Matrix> {
    dy.expect_shape(x.shape(), "relu_backward")?;
    let data = x
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::new(x.rows(), x.cols(), data)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax of one row.
pub fn softmax_row(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r).copy_from_slice(&softmax_row(logits.row(r)));
    }
    out
}

/// Mean cross-entropy and its gradient with respect to the pre-softmax logits.
pub fn cross_entropy(probs: &Matrix, onehot: &Matrix) -> Result<(f64, Matrix)> {
    onehot.expect_shape(probs.shape(), "cross_entropy")?;
    let batch = probs.rows();
    if batch == 0 {
        return Ok((0.0, Matrix::zeros(0, probs.cols())));
    }
    let scale = 1.0 / batch as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(batch, probs.cols());
    for r in 0..batch {
        let (p, y) = (probs.row(r), onehot.row(r));
        for (j, (&pj, &yj)) in p.iter().zip(y).enumerate() {
            if yj != 0.0 {
                loss -= yj * pj.max(1e-12).ln();
            }
            grad.set(r, j, (pj - yj) * scale);
        }
    }
    Ok((loss * scale, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))) with fan_in = rows, fan_out = cols.
    Glorot,
    /// U(−0.05, 0.05).
    SmallUniform,
    Zeros,
    Ones,
}

pub fn init_params(rows: usize, cols: usize, scheme: Init, rng: &mut Rng) -> Matrix {
    match scheme {
        Init::Zeros => Matrix::zeros(rows, cols),
        Init::Ones => Matrix::filled(rows, cols, 1.0),
        Init::Glorot | Init::SmallUniform => {
            let limit = match scheme {
                Init::Glorot => (6.0 / (rows + cols).max(1) as f64).sqrt(),
                _ => 0.05,
            };
            let data = (0..rows * cols)
                .map(|_| rng.uniform(-limit, limit))
                .collect();
            Matrix::new(rows, cols, data).expect("length matches shape")
        }
    }
}

use crate::error::{Error, Result};
use crate::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, init_params, sigmoid, Init, Matrix, Rng};

/// Packed LSTM weights; gate blocks are ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `d × 4h`
    pub w: Matrix,
    /// `h × 4h`
    pub u: Matrix,
    /// `1 × 4h`
    pub b: Matrix,
}

impl LstmParams {
    /// Glorot weights, zero bias except the forget block at 1.0.
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = init_params(input, 4 * hidden, Init::Glorot, rng);
        let u = init_params(hidden, 4 * hidden, Init::Glorot, rng);
        let mut b = Matrix::zeros(1, 4 * hidden);
        b.as_mut_slice()[hidden..2 * hidden].fill(1.0);
        LstmParams { w, u, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(input, 4 * hidden),
            u: Matrix::zeros(hidden, 4 * hidden),
            b: Matrix::zeros(1, 4 * hidden),
        }
    }

    pub fn input(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        self.u.expect_shape((h, 4 * h), "lstm U")?;
        self.w.expect_shape((self.input(), 4 * h), "lstm W")?;
        self.b.expect_shape((1, 4 * h), "lstm b")
    }
}

/// Everything the backward pass needs from a forward run.
#[derive(Clone, Debug)]
pub struct LstmCache {
    x: Matrix,
    h0: Vec<f64>,
    c0: Vec<f64>,
    /// Activated gates per step, `T × 4h`.
    gates: Matrix,
    c: Matrix,
    tanh_c: Matrix,
    h: Matrix,
}

impl LstmCache {
    /// Activated gate values, `T × 4h` in i, f, g, o order.
    pub fn gates(&self) -> &Matrix {
        &self.gates
    }

    pub fn cell_states(&self) -> &Matrix {
        &self.c
    }
}

#[derive(Clone, Debug)]
pub struct LstmGrads {
    pub dx: Matrix,
    pub params: LstmParams,
    pub dh0: Vec<f64>,
    pub dc0: Vec<f64>,
}

pub fn lstm_forward(
    x: &Matrix,
    p: &LstmParams,
    h0: &[f64],
    c0: &[f64],
) -> Result<(Matrix, LstmCache)> {
    p.check()?;
    let (steps, hid) = (x.rows(), p.hidden());
    if x.cols() != p.input() || h0.len() != hid || c0.len() != hid {
        return Err(Error::Shape(format!(
            "lstm forward: input {}x{}, initial states {}/{}, layer expects width {} and hidden {}",
            x.rows(),
            x.cols(),
            h0.len(),
            c0.len(),
            p.input(),
            hid
        )));
    }
    let four = 4 * hid;

    let mut gates = Matrix::zeros(steps, four);
    for t in 0..steps {
        gates.row_mut(t).copy_from_slice(p.b.as_slice());
    }
    gemm_acc(
        x.as_slice(),
        steps,
        x.cols(),
        p.w.as_slice(),
        four,
        gates.as_mut_slice(),
    );

    let mut c = Matrix::zeros(steps, hid);
    let mut tanh_c = Matrix::zeros(steps, hid);
    let mut h = Matrix::zeros(steps, hid);
    let mut h_prev = h0.to_vec();
    let mut c_prev = c0.to_vec();
    for t in 0..steps {
        let a = gates.row_mut(t);
        gemm_acc(&h_prev, 1, hid, p.u.as_slice(), four, a);
        for j in 0..hid {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[hid + j]);
            let g = a[2 * hid + j].tanh();
            let o = sigmoid(a[3 * hid + j]);
            a[j] = i;
            a[hid + j] = f;
            a[2 * hid + j] = g;
            a[3 * hid + j] = o;
            let ct = f * c_prev[j] + i * g;
            let tc = ct.tanh();
            c_prev[j] = ct;
            h_prev[j] = o * tc;
            tanh_c.set(t, j, tc);
        }
        c.row_mut(t).copy_from_slice(&c_prev);
        h.row_mut(t).copy_from_slice(&h_prev);
    }

    let cache = LstmCache {
        x: x.clone(),
        h0: h0.to_vec(),
        c0: c0.to_vec(),
        gates,
        c,
        tanh_c,
        h: h.clone(),
    };
    Ok((h, cache))
}

/// Exact gradients of `Σ_t ⟨dh[t], h_t⟩`.
pub fn lstm_backward(p: &LstmParams, cache: &LstmCache, dh: &Matrix) -> Result<LstmGrads> {
    let (steps, hid) = cache.h.shape();
    if p.hidden() != hid || p.input() != cache.x.cols() {
        return Err(Error::Shape(
            "lstm backward: cache does not match parameters".into(),
        ));
    }
    dh.expect_shape((steps, hid), "lstm backward dH")?;
    let four = 4 * hid;
    let input = cache.x.cols();

    let u_t = p.u.transpose();
    let mut dpre = Matrix::zeros(steps, four);
    let mut dh_next = vec![0.0; hid];
    let mut dc_next = vec![0.0; hid];
    for t in (0..steps).rev() {
        let c_prev = if t > 0 { cache.c.row(t - 1) } else { &cache.c0 };
        let gates = cache.gates.row(t);
        let tanh_c = cache.tanh_c.row(t);
        let dh_t = dh.row(t);
        let da = dpre.row_mut(t);
        for j in 0..hid {
            let (i, f, g, o) = (
                gates[j],
                gates[hid + j],
                gates[2 * hid + j],
                gates[3 * hid + j],
            );
            let dhj = dh_t[j] + dh_next[j];
            let dc = dc_next[j] + dhj * o * (1.0 - tanh_c[j] * tanh_c[j]);
            da[j] = dc * g * i * (1.0 - i);
            da[hid + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * hid + j] = dc * i * (1.0 - g * g);
            da[3 * hid + j] = dhj * tanh_c[j] * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        dh_next.fill(0.0);
        gemm_acc(da, 1, four, u_t.as_slice(), hid, &mut dh_next);
    }

    let mut grads = LstmParams::zeros(input, hid);
    gemm_tn_acc(
        cache.x.as_slice(),
        steps,
        input,
        dpre.as_slice(),
        four,
        grads.w.as_mut_slice(),
    );
    let mut h_prev = Matrix::zeros(steps, hid);
    if steps > 0 {
        h_prev.row_mut(0).copy_from_slice(&cache.h0);
        for t in 1..steps {
            h_prev.row_mut(t).copy_from_slice(cache.h.row(t - 1));
        }
    }
    gemm_tn_acc(
        h_prev.as_slice(),
        steps,
        hid,
        dpre.as_slice(),
        four,
        grads.u.as_mut_slice(),
    );
    let db = grads.b.as_mut_slice();
    for t in 0..steps {
        for (b, d) in db.iter_mut().zip(dpre.row(t)) {
            *b += d;
        }
    }
    let mut dx = Matrix::zeros(steps, input);
    gemm_nt_acc(
        dpre.as_slice(),
        steps,
        four,
        p.w.as_slice(),
        input,
        dx.as_mut_slice(),
    );

    Ok(LstmGrads {
        dx,
        params: grads,
        dh0: dh_next,
        dc0: dc_next,
    })
}

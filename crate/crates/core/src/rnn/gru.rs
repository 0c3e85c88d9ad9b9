use crate::error::{Error, Result};
use crate::tensor::{
    gemm_acc, gemm_into, gemm_nt_acc, gemm_tn_acc, init_params, sigmoid, Init, Lhs, Matrix, Rhs,
    Rng,
};

/// Packed GRU weights; gate blocks are ordered update, reset, candidate.
///
/// The reset gate multiplies the previous state before the candidate's
/// recurrent product: `h̃ = tanh(W_h x + U_h (r ⊙ h_prev) + b_h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    /// `d × 3h`
    pub w: Matrix,
    /// `h × 3h`
    pub u: Matrix,
    /// `1 × 3h`
    pub b: Matrix,
}

impl GruParams {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        GruParams {
            w: init_params(input, 3 * hidden, Init::Glorot, rng),
            u: init_params(hidden, 3 * hidden, Init::Glorot, rng),
            b: Matrix::zeros(1, 3 * hidden),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w: Matrix::zeros(input, 3 * hidden),
            u: Matrix::zeros(hidden, 3 * hidden),
            b: Matrix::zeros(1, 3 * hidden),
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
        self.u.expect_shape((h, 3 * h), "gru U")?;
        self.w.expect_shape((self.input(), 3 * h), "gru W")?;
        self.b.expect_shape((1, 3 * h), "gru b")
    }
}

#[derive(Clone, Debug)]
pub struct GruCache {
    x: Matrix,
    h0: Vec<f64>,
    /// Activated z, r, h̃ per step, `T × 3h`.
    gates: Matrix,
    /// `r ⊙ h_prev` per step.
    reset_state: Matrix,
    h: Matrix,
}

impl GruCache {
    pub fn gates(&self) -> &Matrix {
        &self.gates
    }
}

#[derive(Clone, Debug)]
pub struct GruGrads {
    pub dx: Matrix,
    pub params: GruParams,
    pub dh0: Vec<f64>,
}

pub fn gru_forward(x: &Matrix, p: &GruParams, h0: &[f64]) -> Result<(Matrix, GruCache)> {
    p.check()?;
    let (steps, hid) = (x.rows(), p.hidden());
    if x.cols() != p.input() || h0.len() != hid {
        return Err(Error::Shape(format!(
            "gru forward: input {}x{}, initial state {}, layer expects width {} and hidden {}",
            x.rows(),
            x.cols(),
            h0.len(),
            p.input(),
            hid
        )));
    }
    let three = 3 * hid;

    let mut gates = Matrix::zeros(steps, three);
    for t in 0..steps {
        gates.row_mut(t).copy_from_slice(p.b.as_slice());
    }
    gemm_acc(
        x.as_slice(),
        steps,
        x.cols(),
        p.w.as_slice(),
        three,
        gates.as_mut_slice(),
    );

    let mut reset_state = Matrix::zeros(steps, hid);
    let mut h = Matrix::zeros(steps, hid);
    let mut h_prev = h0.to_vec();
    for t in 0..steps {
        let a = gates.row_mut(t);
        gemm_into(
            Lhs::row_major(&h_prev, 1, hid),
            Rhs {
                data: p.u.as_slice(),
                cols: 2 * hid,
                row_stride: three,
            },
            &mut a[..2 * hid],
            2 * hid,
        );
        for v in &mut a[..2 * hid] {
            *v = sigmoid(*v);
        }
        let rh = reset_state.row_mut(t);
        for j in 0..hid {
            rh[j] = a[hid + j] * h_prev[j];
        }
        gemm_into(
            Lhs::row_major(rh, 1, hid),
            Rhs {
                data: &p.u.as_slice()[2 * hid..],
                cols: hid,
                row_stride: three,
            },
            &mut a[2 * hid..],
            hid,
        );
        for j in 0..hid {
            let n = a[2 * hid + j].tanh();
            a[2 * hid + j] = n;
            let z = a[j];
            h_prev[j] = (1.0 - z) * h_prev[j] + z * n;
        }
        h.row_mut(t).copy_from_slice(&h_prev);
    }

    let cache = GruCache {
        x: x.clone(),
        h0: h0.to_vec(),
        gates,
        reset_state,
        h: h.clone(),
    };
    Ok((h, cache))
}

pub fn gru_backward(p: &GruParams, cache: &GruCache, dh: &Matrix) -> Result<GruGrads> {
    let (steps, hid) = cache.h.shape();
    if p.hidden() != hid || p.input() != cache.x.cols() {
        return Err(Error::Shape(
            "gru backward: cache does not match parameters".into(),
        ));
    }
    dh.expect_shape((steps, hid), "gru backward dH")?;
    let three = 3 * hid;
    let input = cache.x.cols();

    let u_t = p.u.transpose();
    let mut grads = GruParams::zeros(input, hid);
    let mut dpre = Matrix::zeros(steps, three);
    let mut dh_next = vec![0.0; hid];
    let mut d_rh = vec![0.0; hid];
    for t in (0..steps).rev() {
        let h_prev = if t > 0 { cache.h.row(t - 1) } else { &cache.h0 };
        let gates = cache.gates.row(t);
        let dh_t = dh.row(t);
        let da = dpre.row_mut(t);

        let mut dh_prev = vec![0.0; hid];
        for j in 0..hid {
            let (z, n) = (gates[j], gates[2 * hid + j]);
            let dhj = dh_t[j] + dh_next[j];
            da[j] = dhj * (n - h_prev[j]) * z * (1.0 - z);
            da[2 * hid + j] = dhj * z * (1.0 - n * n);
            dh_prev[j] = dhj * (1.0 - z);
        }

        // candidate path through r ⊙ h_prev
        d_rh.fill(0.0);
        gemm_into(
            Lhs::row_major(&da[2 * hid..], 1, hid),
            Rhs::row_major(&u_t.as_slice()[2 * hid * hid..], hid),
            &mut d_rh,
            hid,
        );
        for j in 0..hid {
            let r = gates[hid + j];
            da[hid + j] = d_rh[j] * h_prev[j] * r * (1.0 - r);
            dh_prev[j] += d_rh[j] * r;
        }
        gemm_into(
            Lhs::row_major(&da[..2 * hid], 1, 2 * hid),
            Rhs::row_major(&u_t.as_slice()[..2 * hid * hid], hid),
            &mut dh_prev,
            hid,
        );
        dh_next = dh_prev;
    }

    gemm_tn_acc(
        cache.x.as_slice(),
        steps,
        input,
        dpre.as_slice(),
        three,
        grads.w.as_mut_slice(),
    );
    let mut h_prev = Matrix::zeros(steps, hid);
    if steps > 0 {
        h_prev.row_mut(0).copy_from_slice(&cache.h0);
        for t in 1..steps {
            h_prev.row_mut(t).copy_from_slice(cache.h.row(t - 1));
        }
    }
    gemm_into(
        Lhs::transposed(h_prev.as_slice(), steps, hid),
        Rhs {
            data: dpre.as_slice(),
            cols: 2 * hid,
            row_stride: three,
        },
        grads.u.as_mut_slice(),
        three,
    );
    gemm_into(
        Lhs::transposed(cache.reset_state.as_slice(), steps, hid),
        Rhs {
            data: &dpre.as_slice()[2 * hid..],
            cols: hid,
            row_stride: three,
        },
        &mut grads.u.as_mut_slice()[2 * hid..],
        three,
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
        three,
        p.w.as_slice(),
        input,
        dx.as_mut_slice(),
    );

    Ok(GruGrads {
        dx,
        params: grads,
        dh0: dh_next,
    })
}

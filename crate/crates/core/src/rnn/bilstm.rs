use crate::error::Result;
use crate::rnn::lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
use crate::tensor::{Matrix, Rng};

/// Two independent LSTMs, one reading the sequence forwards and one backwards.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let fwd = LstmParams::new(input, hidden, rng);
        let bwd = LstmParams::new(input, hidden, rng);
        BiLstmParams { fwd, bwd }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstmParams {
            fwd: LstmParams::zeros(input, hidden),
            bwd: LstmParams::zeros(input, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    pub fwd: LstmCache,
    /// Cache of the backward LSTM, in reversed time order.
    pub bwd: LstmCache,
}

#[derive(Clone, Debug)]
pub struct BiLstmGrads {
    pub dx: Matrix,
    pub params: BiLstmParams,
}

/// Output row `t` is `[h_fwd(t), h_bwd(t)]`, width `2h`. Both directions start from zero state.
pub fn bilstm_forward(x: &Matrix, p: &BiLstmParams) -> Result<(Matrix, BiLstmCache)> {
    let hid = p.hidden();
    let zeros = vec![0.0; hid];
    let (hf, fwd) = lstm_forward(x, &p.fwd, &zeros, &zeros)?;
    let zeros_b = vec![0.0; p.bwd.hidden()];
    let (hb_rev, bwd) = lstm_forward(&x.reversed_rows(), &p.bwd, &zeros_b, &zeros_b)?;

    let steps = x.rows();
    let width = hid + p.bwd.hidden();
    let mut out = Matrix::zeros(steps, width);
    for t in 0..steps {
        let row = out.row_mut(t);
        row[..hid].copy_from_slice(hf.row(t));
        row[hid..].copy_from_slice(hb_rev.row(steps - 1 - t));
    }
    Ok((out, BiLstmCache { fwd, bwd }))
}

pub fn bilstm_backward(p: &BiLstmParams, cache: &BiLstmCache, dh: &Matrix) -> Result<BiLstmGrads> {
    let hid = p.fwd.hidden();
    let width = hid + p.bwd.hidden();
    dh.expect_shape((dh.rows(), width), "bilstm backward dH")?;
    let steps = dh.rows();
    let mut dh_fwd = Matrix::zeros(steps, hid);
    let mut dh_bwd_rev = Matrix::zeros(steps, width - hid);
    for t in 0..steps {
        dh_fwd.row_mut(t).copy_from_slice(&dh.row(t)[..hid]);
        dh_bwd_rev
            .row_mut(steps - 1 - t)
            .copy_from_slice(&dh.row(t)[hid..]);
    }
    let gf = lstm_backward(&p.fwd, &cache.fwd, &dh_fwd)?;
    let gb = lstm_backward(&p.bwd, &cache.bwd, &dh_bwd_rev)?;
    let mut dx = gf.dx;
    dx.add_assign(&gb.dx.reversed_rows())?;
    Ok(BiLstmGrads {
        dx,
        params: BiLstmParams {
            fwd: gf.params,
            bwd: gb.params,
        },
    })
}

//! Single and joint recurrent classifiers: embedding, one to three stacked
//! cells, a ReLU dense layer and a softmax head.
//!
//! Intermediate cells hand their full hidden sequence to the next cell; only
//! the last timestep of the final cell reaches the dense layer.

mod arch;
mod checkpoint;

pub use arch::{ArchSpec, CellStack, NAMED_VARIANTS};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, MAGIC, VERSION,
};

use crate::error::{Error, Result};
use crate::rnn::{embed_backward_into, embed_forward, CellCache, CellParams, EmbeddingParams};
use crate::tensor::{
    affine, cross_entropy, finite_diff_grad, gemm_nt_acc, gemm_tn_acc, init_params,
    max_relative_error, relu, relu_backward, softmax_row, Init, Matrix, Rng, DEFAULT_STEP,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embedding: EmbeddingParams,
    pub cells: Vec<CellParams>,
    pub dense_w: Matrix,
    pub dense_b: Matrix,
    pub out_w: Matrix,
    pub out_b: Matrix,
}

impl ModelParams {
    /// All-zero parameters shaped for `spec`; also the gradient container.
    pub fn zeros(spec: &ArchSpec) -> Self {
        ModelParams {
            embedding: EmbeddingParams {
                table: Matrix::zeros(spec.num_ids(), spec.embed_dim),
            },
            cells: spec
                .cells
                .cells()
                .iter()
                .zip(spec.cell_inputs())
                .map(|(&kind, input)| CellParams::zeros(kind, input, spec.hidden))
                .collect(),
            dense_w: Matrix::zeros(spec.feature_width(), spec.dense_hidden),
            dense_b: Matrix::zeros(1, spec.dense_hidden),
            out_w: Matrix::zeros(spec.dense_hidden, spec.num_classes),
            out_b: Matrix::zeros(1, spec.num_classes),
        }
    }

    /// Named tensors in storage order. The order is the checkpoint layout.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("embedding".to_owned(), &self.embedding.table)];
        for (i, cell) in self.cells.iter().enumerate() {
            for (name, m) in cell.tensors() {
                out.push((format!("cell{i}.{}.{name}", cell.kind()), m));
            }
        }
        out.push(("dense.W".into(), &self.dense_w));
        out.push(("dense.b".into(), &self.dense_b));
        out.push(("out.W".into(), &self.out_w));
        out.push(("out.b".into(), &self.out_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.embedding.table];
        for cell in &mut self.cells {
            out.extend(cell.tensors_mut());
        }
        out.extend([
            &mut self.dense_w,
            &mut self.dense_b,
            &mut self.out_w,
            &mut self.out_b,
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Concatenation of every tensor in storage order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for (_, m) in self.tensors() {
            flat.extend_from_slice(m.as_slice());
        }
        flat
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat parameter vector of {} for a model of {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for m in self.tensors_mut() {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Checks every tensor against the shapes implied by `spec`.
    pub fn check_shapes(&self, spec: &ArchSpec) -> Result<()> {
        let expected = ModelParams::zeros(spec);
        let ours = self.tensors();
        let theirs = expected.tensors();
        if ours.len() != theirs.len() {
            return Err(Error::Shape(format!(
                "model has {} tensors, architecture implies {}",
                ours.len(),
                theirs.len()
            )));
        }
        for ((name, m), (exp_name, e)) in ours.iter().zip(&theirs) {
            if name != exp_name || m.shape() != e.shape() {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, architecture implies {exp_name} {}x{}",
                    m.rows(),
                    m.cols(),
                    e.rows(),
                    e.cols()
                )));
            }
        }
        Ok(())
    }
}

/// Initializes a model: Glorot weights, zero biases (LSTM forget blocks at 1),
/// embedding U(−0.05, 0.05) with a zero PAD row.
pub fn build(spec: &ArchSpec, rng: &mut Rng) -> Result<ModelParams> {
    spec.validate()?;
    let embedding = EmbeddingParams::new(spec.num_ids(), spec.embed_dim, rng);
    let cells = spec
        .cells
        .cells()
        .iter()
        .zip(spec.cell_inputs())
        .map(|(&kind, input)| CellParams::new(kind, input, spec.hidden, rng))
        .collect();
    let dense_w = init_params(spec.feature_width(), spec.dense_hidden, Init::Glorot, rng);
    let out_w = init_params(spec.dense_hidden, spec.num_classes, Init::Glorot, rng);
    Ok(ModelParams {
        embedding,
        cells,
        dense_w,
        dense_b: Matrix::zeros(1, spec.dense_hidden),
        out_w,
        out_b: Matrix::zeros(1, spec.num_classes),
    })
}

/// Intermediate values of one forward pass.
pub struct ForwardCache {
    ids: Vec<u32>,
    cells: Vec<CellCache>,
    features: Matrix,
    dense_pre: Matrix,
    dense_act: Matrix,
    pub logits: Vec<f64>,
}

/// Class probabilities for one encoded sequence of length `spec.max_len`.
pub fn forward(
    params: &ModelParams,
    spec: &ArchSpec,
    ids: &[u32],
) -> Result<(Vec<f64>, ForwardCache)> {
    if ids.len() != spec.max_len {
        return Err(Error::Shape(format!(
            "sequence of length {} for a model with max_len {}",
            ids.len(),
            spec.max_len
        )));
    }
    let mut x = embed_forward(ids, &params.embedding)?;
    let mut caches = Vec::with_capacity(params.cells.len());
    for cell in &params.cells {
        let (h, cache) = cell.forward(&x)?;
        caches.push(cache);
        x = h;
    }
    let features = Matrix::row_vector(x.row(x.rows() - 1));
    let dense_pre = affine(&features, &params.dense_w, params.dense_b.as_slice())?;
    let dense_act = relu(&dense_pre);
    let logits = affine(&dense_act, &params.out_w, params.out_b.as_slice())?.into_vec();
    let probs = softmax_row(&logits);
    Ok((
        probs,
        ForwardCache {
            ids: ids.to_vec(),
            cells: caches,
            features,
            dense_pre,
            dense_act,
            logits,
        },
    ))
}

/// Gradients of one example. The embedding gradient is kept sparse as the
/// per-position input gradient plus the ids it scatters into.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub ids: Vec<u32>,
    pub embedding_dx: Matrix,
    pub cells: Vec<CellParams>,
    pub dense_w: Matrix,
    pub dense_b: Matrix,
    pub out_w: Matrix,
    pub out_b: Matrix,
}

impl Gradients {
    /// `acc += scale · self`, with the embedding part scattered into its rows.
    pub fn accumulate_into(&self, acc: &mut ModelParams, scale: f64) -> Result<()> {
        let mut dx = self.embedding_dx.clone();
        dx.scale(scale);
        embed_backward_into(&self.ids, &dx, &mut acc.embedding.table)?;
        let mut src: Vec<&Matrix> = Vec::new();
        for cell in &self.cells {
            src.extend(cell.tensors().into_iter().map(|(_, m)| m));
        }
        src.extend([&self.dense_w, &self.dense_b, &self.out_w, &self.out_b]);
        let dst = acc.tensors_mut().into_iter().skip(1);
        let mut count = 0;
        for (d, s) in dst.zip(src.iter()) {
            d.expect_shape(s.shape(), "gradient accumulation")?;
            for (a, b) in d.as_mut_slice().iter_mut().zip(s.as_slice()) {
                *a += scale * b;
            }
            count += 1;
        }
        if count != src.len() {
            return Err(Error::Shape("gradient does not match model layout".into()));
        }
        Ok(())
    }

    /// Dense gradient shaped like the model.
    pub fn to_params(&self, spec: &ArchSpec) -> Result<ModelParams> {
        let mut acc = ModelParams::zeros(spec);
        self.accumulate_into(&mut acc, 1.0)?;
        Ok(acc)
    }
}

/// Exact gradient of the cross-entropy of `probs` against `onehot`.
pub fn backward(
    params: &ModelParams,
    spec: &ArchSpec,
    cache: &ForwardCache,
    probs: &[f64],
    onehot: &[f64],
) -> Result<Gradients> {
    if probs.len() != spec.num_classes || onehot.len() != spec.num_classes {
        return Err(Error::Shape(format!(
            "{} probabilities and {} targets for {} classes",
            probs.len(),
            onehot.len(),
            spec.num_classes
        )));
    }
    if cache.cells.len() != params.cells.len() {
        return Err(Error::Shape(
            "forward cache does not match the model".into(),
        ));
    }
    let classes = spec.num_classes;
    let dense = spec.dense_hidden;
    let dlogits: Vec<f64> = probs.iter().zip(onehot).map(|(p, y)| p - y).collect();

    let mut out_w = Matrix::zeros(dense, classes);
    gemm_tn_acc(
        cache.dense_act.as_slice(),
        1,
        dense,
        &dlogits,
        classes,
        out_w.as_mut_slice(),
    );
    let out_b = Matrix::row_vector(&dlogits);

    let mut d_act = Matrix::zeros(1, dense);
    gemm_nt_acc(
        &dlogits,
        1,
        classes,
        params.out_w.as_slice(),
        dense,
        d_act.as_mut_slice(),
    );
    let d_pre = relu_backward(&cache.dense_pre, &d_act)?;

    let width = cache.features.cols();
    let mut dense_w = Matrix::zeros(width, dense);
    gemm_tn_acc(
        cache.features.as_slice(),
        1,
        width,
        d_pre.as_slice(),
        dense,
        dense_w.as_mut_slice(),
    );
    let dense_b = d_pre.clone();
    let mut d_features = vec![0.0; width];
    gemm_nt_acc(
        d_pre.as_slice(),
        1,
        dense,
        params.dense_w.as_slice(),
        width,
        &mut d_features,
    );

    let steps = cache.ids.len();
    let mut dh = Matrix::zeros(steps, width);
    dh.row_mut(steps - 1).copy_from_slice(&d_features);
    let mut cell_grads = Vec::with_capacity(params.cells.len());
    for (cell, c) in params.cells.iter().zip(&cache.cells).rev() {
        let (dx, g) = cell.backward(c, &dh)?;
        cell_grads.push(g);
        dh = dx;
    }
    cell_grads.reverse();

    Ok(Gradients {
        ids: cache.ids.clone(),
        embedding_dx: dh,
        cells: cell_grads,
        dense_w,
        dense_b,
        out_w,
        out_b,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(params: &ModelParams, spec: &ArchSpec, ids: &[u32]) -> Result<(usize, Vec<f64>)> {
    let (probs, _) = forward(params, spec, ids)?;
    Ok((argmax(&probs), probs))
}

/// Worst relative error between the analytic gradient and central finite
/// differences for one random instance of `spec`.
///
/// Parameters are redrawn from U(-1, 1) after `build`. At the small init
/// scale most gradients sit near the roundoff floor of the difference
/// quotient and the comparison measures noise rather than the backward pass.
pub fn gradient_check(spec: &ArchSpec, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut params = build(spec, &mut rng)?;
    let theta: Vec<f64> = (0..params.param_count())
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    params.assign_flat(&theta)?;
    let ids: Vec<u32> = (0..spec.max_len)
        .map(|_| rng.below(spec.num_ids()) as u32)
        .collect();
    let mut onehot = vec![0.0; spec.num_classes];
    onehot[rng.below(spec.num_classes)] = 1.0;
    let target = Matrix::row_vector(&onehot);

    let (probs, cache) = forward(&params, spec, &ids)?;
    let analytic = backward(&params, spec, &cache, &probs, &onehot)?
        .to_params(spec)?
        .flatten();
    let mut probe = params.clone();
    let numeric = finite_diff_grad(
        |theta| {
            probe.assign_flat(theta).expect("length matches");
            let (p, _) = forward(&probe, spec, &ids).expect("shape checked above");
            cross_entropy(&Matrix::row_vector(&p), &target)
                .expect("same shape")
                .0
        },
        &theta,
        DEFAULT_STEP,
    );
    Ok(max_relative_error(&analytic, &numeric))
}

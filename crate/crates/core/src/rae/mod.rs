//! The recurrent autoencoder: a (bi)GRU encoder, a linear embedding
//! projection with L2 normalization, a GRU decoder conditioned on the
//! embedding, reconstruction losses, and exact gradients for every
//! parameter.
//!
//! The decoder receives the embedding twice: once through a linear
//! projection that sets the initial hidden state of every decoder layer, and
//! again as its per-step input, so the conditioning does not decay over long
//! output sequences. There is no teacher forcing; at detection time the
//! decoder must run from the embedding alone, so it trains that way too.

mod gru;
mod params;

pub use params::{ParamLayout, TensorSpec};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::math;
use crate::rng;

use gru::DirTrace;

/// Network shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub hidden_units: usize,
    pub num_layers: usize,
    pub embedding_dim: usize,
    pub bidirectional: bool,
    /// Reconstruct targets in reversed time order during training.
    #[serde(default)]
    pub reverse_decode: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 40,
            hidden_units: 400,
            num_layers: 3,
            embedding_dim: 120,
            bidirectional: false,
            reverse_decode: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("feature_dim", self.feature_dim),
            ("hidden_units", self.hidden_units),
            ("num_layers", self.num_layers),
            ("embedding_dim", self.embedding_dim),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Width of the encoder state feeding the embedding projection.
    pub fn encoder_output_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_units
        } else {
            self.hidden_units
        }
    }
}

/// Guard for normalizing a (nearly) zero pre-embedding vector.
pub const L2_NORM_EPSILON: f64 = 1e-12;

/// An L2-normalized embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Normalize an arbitrary vector onto the unit sphere.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Self {
        let norm = math::norm2(&values);
        let denom = if norm > L2_NORM_EPSILON {
            norm
        } else {
            L2_NORM_EPSILON
        };
        for v in values.iter_mut() {
            *v /= denom;
        }
        Self { values }
    }

    /// Accept a vector that must already be unit-norm (e.g. read back from a
    /// file); tolerance 1e-6.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = math::norm2(&values);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::NonFinite(format!(
                "embedding norm {norm} is not within 1e-6 of 1"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Gradient buffer aligned with a model's parameter layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &RaeModel) -> Self {
        Self {
            data: vec![0.0; model.layout.total_params()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Named view, for tests and diagnostics.
    pub fn tensor<'a>(&'a self, model: &RaeModel, name: &str) -> Option<&'a [f64]> {
        let spec = model.layout.spec_by_name(name)?;
        Some(&self.data[spec.range()])
    }
}

/// Encoder/decoder parameters behind a flat store; see [`ParamLayout`].
#[derive(Debug, Clone)]
pub struct RaeModel {
    cfg: ModelConfig,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl RaeModel {
    /// Fresh model with parameters drawn uniformly from
    /// `[-1/sqrt(w), 1/sqrt(w)]`, where `w` is the hidden size for recurrent
    /// tensors and the fan-in for linear projections. Deterministic per
    /// seed: tensors fill in layout order from one ChaCha8 stream.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = ParamLayout::build(&cfg);
        let mut params = vec![0.0; layout.total_params()];
        let mut rng = rng::rng_from_seed(seed);
        for spec in layout.specs() {
            let bound = 1.0 / math::sqrt(spec.init_width as f64);
            for v in params[spec.range()].iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self {
            cfg,
            layout,
            params,
        })
    }

    /// Wrap an existing flat parameter vector (e.g. from a checkpoint).
    pub fn from_params(cfg: ModelConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = ParamLayout::build(&cfg);
        if params.len() != layout.total_params() {
            return Err(Error::DimensionMismatch {
                what: "model parameter vector",
                expected: layout.total_params(),
                actual: params.len(),
            });
        }
        if !params.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(Self {
            cfg,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout.total_params()
    }

    /// Named parameter tensor: `(rows, cols, values)`.
    pub fn tensor(&self, name: &str) -> Option<(usize, usize, &[f64])> {
        let spec = self.layout.spec_by_name(name)?;
        Some((spec.rows, spec.cols, &self.params[spec.range()]))
    }

    fn check_frames(&self, frames: &Mat) -> Result<()> {
        if frames.rows() == 0 {
            return Err(Error::EmptyInput("segment frames"));
        }
        if frames.cols() != self.cfg.feature_dim {
            return Err(Error::DimensionMismatch {
                what: "segment feature dimension",
                expected: self.cfg.feature_dim,
                actual: frames.cols(),
            });
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite("segment frames".into()));
        }
        Ok(())
    }

    /// Embed a segment: GRU stack, final top-layer state(s), linear
    /// projection, L2 normalization.
    pub fn encode(&self, frames: &Mat) -> Result<Embedding> {
        Ok(self.encode_traced(frames)?.1)
    }

    /// Like [`RaeModel::encode`] but keeps the forward record needed by
    /// [`RaeModel::backward_branch`].
    pub fn encode_traced(&self, frames: &Mat) -> Result<(EncodeGraph, Embedding)> {
        self.check_frames(frames)?;
        let t_len = frames.rows();
        let h = self.cfg.hidden_units;
        let dirs = if self.cfg.bidirectional { 2 } else { 1 };

        let mut layer_inputs: Vec<Mat> = Vec::with_capacity(self.cfg.num_layers);
        let mut traces: Vec<Vec<DirTrace>> = Vec::with_capacity(self.cfg.num_layers);
        let mut input = frames.clone();
        for layer in &self.layout.enc {
            let mut dir_traces = Vec::with_capacity(dirs);
            for (d, ts) in layer.iter().enumerate() {
                let reverse = d == 1;
                dir_traces.push(gru::run_gru(
                    &self.params,
                    &self.layout,
                    ts,
                    |t| input.row(t),
                    t_len,
                    None,
                    reverse,
                ));
            }
            let mut output = Mat::zeros(t_len, h * dirs);
            for t in 0..t_len {
                let row = output.row_mut(t);
                for (d, tr) in dir_traces.iter().enumerate() {
                    row[d * h..(d + 1) * h].copy_from_slice(tr.out(t));
                }
            }
            layer_inputs.push(input);
            traces.push(dir_traces);
            input = output;
        }

        let top = traces.last().expect("at least one layer");
        let mut final_concat = Vec::with_capacity(h * dirs);
        for tr in top {
            final_concat.extend_from_slice(tr.last());
        }

        let (d_emb, enc_out) = self.layout.dims(self.layout.embed_w);
        let mut v = self.layout.slice(&self.params, self.layout.embed_b).to_vec();
        math::matvec_acc(
            self.layout.slice(&self.params, self.layout.embed_w),
            d_emb,
            enc_out,
            &final_concat,
            &mut v,
        );
        let norm = math::norm2(&v);
        let norm_used = if norm > L2_NORM_EPSILON {
            norm
        } else {
            L2_NORM_EPSILON
        };
        let z: Vec<f64> = v.iter().map(|x| x / norm_used).collect();

        let graph = EncodeGraph {
            layer_inputs,
            traces,
            final_concat,
            v,
            norm_used,
            z: z.clone(),
        };
        Ok((graph, Embedding { values: z }))
    }

    /// Reconstruct `t_len` frames from an embedding.
    pub fn decode(&self, embedding: &Embedding, t_len: usize) -> Result<Mat> {
        Ok(self.decode_traced(embedding, t_len)?.1)
    }

    /// Like [`RaeModel::decode`] but keeps the forward record.
    pub fn decode_traced(&self, embedding: &Embedding, t_len: usize) -> Result<(DecodeGraph, Mat)> {
        if t_len == 0 {
            return Err(Error::EmptyInput("decode length"));
        }
        if embedding.dim() != self.cfg.embedding_dim {
            return Err(Error::DimensionMismatch {
                what: "embedding dimension",
                expected: self.cfg.embedding_dim,
                actual: embedding.dim(),
            });
        }
        let h = self.cfg.hidden_units;
        let layers = self.cfg.num_layers;
        let z = embedding.values();

        // Initial states for every decoder layer from one projection.
        let (rows, cols) = self.layout.dims(self.layout.dec_init_w);
        let mut init = self
            .layout
            .slice(&self.params, self.layout.dec_init_b)
            .to_vec();
        math::matvec_acc(
            self.layout.slice(&self.params, self.layout.dec_init_w),
            rows,
            cols,
            z,
            &mut init,
        );

        // Layer 0 consumes the embedding at every step.
        let mut input = Mat::zeros(t_len, self.cfg.embedding_dim);
        for t in 0..t_len {
            input.row_mut(t).copy_from_slice(z);
        }

        let mut layer_inputs = Vec::with_capacity(layers);
        let mut traces = Vec::with_capacity(layers);
        for (l, ts) in self.layout.dec.iter().enumerate() {
            let h0 = &init[l * h..(l + 1) * h];
            let trace = gru::run_gru(
                &self.params,
                &self.layout,
                ts,
                |t| input.row(t),
                t_len,
                Some(h0),
                false,
            );
            let mut output = Mat::zeros(t_len, h);
            for t in 0..t_len {
                output.row_mut(t).copy_from_slice(trace.out(t));
            }
            layer_inputs.push(input);
            traces.push(trace);
            input = output;
        }

        // input now holds the top layer's hidden sequence.
        let (f_dim, _) = self.layout.dims(self.layout.out_w);
        let out_w = self.layout.slice(&self.params, self.layout.out_w);
        let out_b = self.layout.slice(&self.params, self.layout.out_b);
        let mut recon = Mat::zeros(t_len, f_dim);
        for t in 0..t_len {
            let row = recon.row_mut(t);
            row.copy_from_slice(out_b);
            math::matvec_acc(out_w, f_dim, h, input.row(t), row);
        }

        let graph = DecodeGraph {
            layer_inputs,
            traces,
            top_hidden: input,
            z: z.to_vec(),
            t_len,
        };
        Ok((graph, recon))
    }

    /// Reverse-mode gradients for one branch: seeds are the gradient of the
    /// loss with respect to the reconstruction (`d_recon`, paired with the
    /// decode graph that produced it) and/or with respect to the embedding
    /// (`d_embedding`, e.g. from a Siamese distance term). Parameter
    /// gradients accumulate into `grads`, so calling this for several
    /// branches sums their contributions over the shared parameter store.
    pub fn backward_branch(
        &self,
        enc: &EncodeGraph,
        dec: Option<(&DecodeGraph, &Mat)>,
        d_embedding: Option<&[f64]>,
        grads: &mut Gradients,
    ) -> Result<()> {
        let d_emb = self.cfg.embedding_dim;
        let mut dz = vec![0.0; d_emb];
        if let Some(seed) = d_embedding {
            if seed.len() != d_emb {
                return Err(Error::DimensionMismatch {
                    what: "embedding gradient seed",
                    expected: d_emb,
                    actual: seed.len(),
                });
            }
            dz.copy_from_slice(seed);
        }
        if let Some((graph, d_recon)) = dec {
            if d_recon.rows() != graph.t_len || d_recon.cols() != self.cfg.feature_dim {
                return Err(Error::DimensionMismatch {
                    what: "reconstruction gradient shape",
                    expected: graph.t_len * self.cfg.feature_dim,
                    actual: d_recon.rows() * d_recon.cols(),
                });
            }
            self.decoder_backward(graph, d_recon, grads.as_mut_slice(), &mut dz);
        }
        self.encoder_backward(enc, &dz, grads.as_mut_slice());
        Ok(())
    }

    fn decoder_backward(&self, graph: &DecodeGraph, d_recon: &Mat, grads: &mut [f64], dz: &mut [f64]) {
        let h = self.cfg.hidden_units;
        let layers = self.cfg.num_layers;
        let t_len = graph.t_len;
        let (f_dim, _) = self.layout.dims(self.layout.out_w);
        let out_w = self.layout.slice(&self.params, self.layout.out_w);

        // Output projection.
        let mut d_top = Mat::zeros(t_len, h);
        for t in 0..t_len {
            let dr = d_recon.row(t);
            math::add_acc(self.layout.slice_mut(grads, self.layout.out_b), dr);
            math::outer_acc(
                self.layout.slice_mut(grads, self.layout.out_w),
                f_dim,
                h,
                dr,
                graph.top_hidden.row(t),
            );
            math::matvec_t_acc(out_w, f_dim, h, dr, d_top.row_mut(t));
        }

        // GRU stack, top to bottom; initial-state gradients gather for the
        // init projection.
        let mut d_init = vec![0.0; layers * h];
        let mut d_out = d_top;
        for l in (0..layers).rev() {
            let ts = &self.layout.dec[l];
            let mut d_in = Mat::zeros(t_len, ts.input);
            let dh0 = gru::gru_backward(
                &self.params,
                &self.layout,
                ts,
                &graph.traces[l],
                &graph.layer_inputs[l],
                &d_out,
                0,
                &mut d_in,
                grads,
            );
            d_init[l * h..(l + 1) * h].copy_from_slice(&dh0);
            if l > 0 {
                d_out = d_in;
            } else {
                // Layer 0 input is the embedding at every step.
                for t in 0..t_len {
                    math::add_acc(dz, d_in.row(t));
                }
            }
        }

        // Init projection.
        let (rows, cols) = self.layout.dims(self.layout.dec_init_w);
        math::add_acc(self.layout.slice_mut(grads, self.layout.dec_init_b), &d_init);
        math::outer_acc(
            self.layout.slice_mut(grads, self.layout.dec_init_w),
            rows,
            cols,
            &d_init,
            &graph.z,
        );
        math::matvec_t_acc(
            self.layout.slice(&self.params, self.layout.dec_init_w),
            rows,
            cols,
            &d_init,
            dz,
        );
    }

    fn encoder_backward(&self, graph: &EncodeGraph, dz: &[f64], grads: &mut [f64]) {
        let h = self.cfg.hidden_units;
        let dirs = if self.cfg.bidirectional { 2 } else { 1 };
        let t_len = graph.layer_inputs[0].rows();

        // L2 normalization: dv = (dz - z (z . dz)) / norm, or a plain
        // rescale when the norm was clamped.
        let mut dv = vec![0.0; dz.len()];
        if graph.norm_used > L2_NORM_EPSILON {
            let zdot = math::dot(&graph.z, dz);
            for j in 0..dz.len() {
                dv[j] = (dz[j] - graph.z[j] * zdot) / graph.norm_used;
            }
        } else {
            for j in 0..dz.len() {
                dv[j] = dz[j] / graph.norm_used;
            }
        }

        // Embedding projection.
        let (d_emb, enc_out) = self.layout.dims(self.layout.embed_w);
        math::add_acc(self.layout.slice_mut(grads, self.layout.embed_b), &dv);
        math::outer_acc(
            self.layout.slice_mut(grads, self.layout.embed_w),
            d_emb,
            enc_out,
            &dv,
            &graph.final_concat,
        );
        let mut d_final = vec![0.0; enc_out];
        math::matvec_t_acc(
            self.layout.slice(&self.params, self.layout.embed_w),
            d_emb,
            enc_out,
            &dv,
            &mut d_final,
        );

        // Final states are ordinary output positions: forward's at t = T-1,
        // backward's at t = 0.
        let mut d_out = Mat::zeros(t_len, h * dirs);
        d_out.row_mut(t_len - 1)[0..h].copy_from_slice(&d_final[0..h]);
        if dirs == 2 {
            for j in 0..h {
                d_out.row_mut(0)[h + j] += d_final[h + j];
            }
        }

        for l in (0..self.layout.enc.len()).rev() {
            let layer = &self.layout.enc[l];
            let input_dim = layer[0].input;
            let mut d_in = Mat::zeros(t_len, input_dim);
            for (d, ts) in layer.iter().enumerate() {
                gru::gru_backward(
                    &self.params,
                    &self.layout,
                    ts,
                    &graph.traces[l][d],
                    &graph.layer_inputs[l],
                    &d_out,
                    d * h,
                    &mut d_in,
                    grads,
                );
            }
            d_out = d_in; // becomes gradient wrt the lower layer's outputs
        }
    }
}

/// Forward record of [`RaeModel::encode_traced`].
#[derive(Debug, Clone)]
pub struct EncodeGraph {
    layer_inputs: Vec<Mat>,
    traces: Vec<Vec<DirTrace>>,
    final_concat: Vec<f64>,
    v: Vec<f64>,
    norm_used: f64,
    z: Vec<f64>,
}

impl EncodeGraph {
    /// Pre-normalization projection output; exposed for norm-layer tests.
    pub fn pre_norm(&self) -> &[f64] {
        &self.v
    }
}

/// Forward record of [`RaeModel::decode_traced`].
#[derive(Debug, Clone)]
pub struct DecodeGraph {
    layer_inputs: Vec<Mat>,
    traces: Vec<DirTrace>,
    top_hidden: Mat,
    z: Vec<f64>,
    t_len: usize,
}

/// Sum over frames of squared Euclidean frame error; no averaging over time.
pub fn mse_loss(target: &Mat, reconstruction: &Mat) -> Result<f64> {
    if target.rows() != reconstruction.rows() || target.cols() != reconstruction.cols() {
        return Err(Error::DimensionMismatch {
            what: "mse shapes",
            expected: target.rows() * target.cols(),
            actual: reconstruction.rows() * reconstruction.cols(),
        });
    }
    let mut acc = 0.0;
    for (a, b) in target.as_slice().iter().zip(reconstruction.as_slice()) {
        let d = b - a;
        acc += d * d;
    }
    Ok(acc)
}

/// Gradient of [`mse_loss`] with respect to the reconstruction: `2 (y - x)`.
pub fn mse_backward(target: &Mat, reconstruction: &Mat) -> Result<Mat> {
    if target.rows() != reconstruction.rows() || target.cols() != reconstruction.cols() {
        return Err(Error::DimensionMismatch {
            what: "mse shapes",
            expected: target.rows() * target.cols(),
            actual: reconstruction.rows() * reconstruction.cols(),
        });
    }
    let mut out = Mat::zeros(target.rows(), target.cols());
    for r in 0..target.rows() {
        let row = out.row_mut(r);
        for c in 0..target.cols() {
            row[c] = 2.0 * (reconstruction.at(r, c) - target.at(r, c));
        }
    }
    Ok(out)
}

/// Reverse a frame sequence in time.
pub fn reverse_rows(frames: &Mat) -> Mat {
    let mut out = Mat::zeros(frames.rows(), frames.cols());
    for t in 0..frames.rows() {
        out.row_mut(frames.rows() - 1 - t).copy_from_slice(frames.row(t));
    }
    out
}

/// Correspondence reconstruction: encode `s1`, decode `s2.rows()` steps,
/// score against `s2`. With `s1 == s2` this is the plain reconstruction
/// loss.
pub fn cor_mse_loss(model: &RaeModel, s1: &Mat, s2: &Mat) -> Result<f64> {
    reconstruction_objective(model, s1, Some(s2), None)
}

/// Reconstruction loss (optionally against a correspondence target) with
/// optional gradient accumulation. This is the loss used when training a
/// plain (non-Siamese) RAE and the reconstruction term of the combined
/// objectives.
pub fn reconstruction_objective(
    model: &RaeModel,
    input: &Mat,
    target: Option<&Mat>,
    grads: Option<&mut Gradients>,
) -> Result<f64> {
    let target = target.unwrap_or(input);
    if target.cols() != input.cols() {
        return Err(Error::DimensionMismatch {
            what: "correspondence target feature dim",
            expected: input.cols(),
            actual: target.cols(),
        });
    }
    let oriented;
    let target = if model.config().reverse_decode {
        oriented = reverse_rows(target);
        &oriented
    } else {
        target
    };
    let (enc, z) = model.encode_traced(input)?;
    let (dec, recon) = model.decode_traced(&z, target.rows())?;
    let loss = mse_loss(target, &recon)?;
    if let Some(grads) = grads {
        let d_recon = mse_backward(target, &recon)?;
        model.backward_branch(&enc, Some((&dec, &d_recon)), None, grads)?;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(bidirectional: bool) -> ModelConfig {
        ModelConfig {
            feature_dim: 3,
            hidden_units: 4,
            num_layers: 1,
            embedding_dim: 2,
            bidirectional,
            reverse_decode: false,
        }
    }

    fn random_frames(t: usize, f: usize, seed: u64) -> Mat {
        let mut rng = rng::rng_from_seed(seed);
        let mut m = Mat::zeros(t, f);
        for r in 0..t {
            for c in 0..f {
                m.set(r, c, rng::gaussian(&mut rng));
            }
        }
        m
    }

    #[test]
    fn init_is_deterministic() {
        let a = RaeModel::init(tiny_cfg(true), 5).unwrap();
        let b = RaeModel::init(tiny_cfg(true), 5).unwrap();
        assert_eq!(a.params(), b.params());
        let c = RaeModel::init(tiny_cfg(true), 6).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn projection_width_follows_directions() {
        let cfg = ModelConfig {
            feature_dim: 40,
            hidden_units: 400,
            num_layers: 3,
            embedding_dim: 120,
            bidirectional: true,
            reverse_decode: false,
        };
        let layout = ParamLayout::build(&cfg);
        let spec = layout.spec_by_name("embed.w").unwrap();
        assert_eq!((spec.rows, spec.cols), (120, 800));

        let uni = ModelConfig {
            bidirectional: false,
            ..cfg
        };
        let layout = ParamLayout::build(&uni);
        let spec = layout.spec_by_name("embed.w").unwrap();
        assert_eq!((spec.rows, spec.cols), (120, 400));
    }

    #[test]
    fn encode_returns_unit_norm() {
        for bi in [false, true] {
            let model = RaeModel::init(tiny_cfg(bi), 1).unwrap();
            for t in [1usize, 2, 7] {
                let z = model.encode(&random_frames(t, 3, t as u64)).unwrap();
                assert_eq!(z.dim(), 2);
                let norm = z.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-6, "norm {norm}");
            }
        }
    }

    #[test]
    fn encode_rejects_bad_input() {
        let model = RaeModel::init(tiny_cfg(false), 1).unwrap();
        assert!(model.encode(&Mat::zeros(0, 3)).is_err());
        assert!(model.encode(&Mat::zeros(2, 4)).is_err());
        let mut bad = Mat::zeros(2, 3);
        bad.set(0, 0, f64::NAN);
        assert!(model.encode(&bad).is_err());
    }

    #[test]
    fn decode_shape_and_determinism() {
        let model = RaeModel::init(tiny_cfg(false), 2).unwrap();
        let z = model.encode(&random_frames(4, 3, 9)).unwrap();
        let a = model.decode(&z, 5).unwrap();
        let b = model.decode(&z, 5).unwrap();
        assert_eq!(a.rows(), 5);
        assert_eq!(a.cols(), 3);
        assert_eq!(a, b);
        assert!(model.decode(&z, 0).is_err());
    }

    #[test]
    fn decode_prefix_property() {
        let model = RaeModel::init(tiny_cfg(true), 3).unwrap();
        let z = model.encode(&random_frames(6, 3, 10)).unwrap();
        let short = model.decode(&z, 1).unwrap();
        let long = model.decode(&z, 4).unwrap();
        assert_eq!(short.row(0), long.row(0));
        let mid = model.decode(&z, 3).unwrap();
        for t in 0..3 {
            assert_eq!(mid.row(t), long.row(t));
        }
    }

    #[test]
    fn mse_examples() {
        let a = Mat::from_rows(&[vec![1.0, 0.0, 0.0]]);
        let b = Mat::zeros(1, 3);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &b).unwrap(), 1.0);
        assert!(mse_loss(&a, &Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn mse_matches_scalar_loop_oracle() {
        let x = random_frames(3, 4, 20);
        let y = random_frames(3, 4, 21);
        let got = mse_loss(&x, &y).unwrap();
        let mut want = 0.0;
        for t in 0..3 {
            for j in 0..4 {
                let d = y.at(t, j) - x.at(t, j);
                want += d * d;
            }
        }
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn cor_mse_degenerate_pair_is_plain_mse() {
        let model = RaeModel::init(tiny_cfg(false), 4).unwrap();
        let s = random_frames(4, 3, 30);
        let plain = reconstruction_objective(&model, &s, None, None).unwrap();
        let cor = cor_mse_loss(&model, &s, &s).unwrap();
        assert_eq!(plain, cor);
    }

    #[test]
    fn cor_mse_uses_target_length_and_composes() {
        let model = RaeModel::init(tiny_cfg(false), 4).unwrap();
        let s1 = random_frames(5, 3, 31);
        let s2 = random_frames(3, 3, 32);
        let got = cor_mse_loss(&model, &s1, &s2).unwrap();

        // Compose by hand: encode -> decode(T2) -> mse.
        let z = model.encode(&s1).unwrap();
        let recon = model.decode(&z, 3).unwrap();
        assert_eq!(recon.rows(), 3);
        let want = mse_loss(&s2, &recon).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gives_zero_output_projection_grads() {
        // Reconstruction equal to the target zeroes d_recon, so everything
        // downstream of it must be exactly zero.
        let model = RaeModel::init(tiny_cfg(false), 6).unwrap();
        let s = random_frames(3, 3, 33);
        let (enc, z) = model.encode_traced(&s).unwrap();
        let (dec, recon) = model.decode_traced(&z, 3).unwrap();
        let d_recon = mse_backward(&recon.clone(), &recon).unwrap();
        let mut grads = Gradients::zeros_like(&model);
        model
            .backward_branch(&enc, Some((&dec, &d_recon)), None, &mut grads)
            .unwrap();
        assert!(grads.as_slice().iter().all(|&g| g == 0.0));
        let _ = s;
    }

    #[test]
    fn reverse_decode_flips_targets() {
        let mut cfg = tiny_cfg(false);
        let model_fwd = RaeModel::init(cfg.clone(), 8).unwrap();
        cfg.reverse_decode = true;
        let model_rev = RaeModel::from_params(cfg, model_fwd.params().to_vec()).unwrap();
        let s = random_frames(4, 3, 40);
        let rev = reverse_rows(&s);
        let a = reconstruction_objective(&model_rev, &s, None, None).unwrap();
        let z = model_fwd.encode(&s).unwrap();
        let recon = model_fwd.decode(&z, 4).unwrap();
        let b = mse_loss(&rev, &recon).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

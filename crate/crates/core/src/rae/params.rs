//! Flat parameter storage with a named-tensor layout.
//!
//! All model parameters live in one `Vec<f64>`; the layout maps tensor names
//! to offsets and shapes. A single flat store keeps Adam updates, gradient
//! accumulation across Siamese branches, finite-difference checks, and
//! checkpoint serialization trivial and guarantees the branches share
//! parameters by construction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use super::ModelConfig;

#[derive(Debug, Clone)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// Width used for the uniform init bound `1/sqrt(width)`: the hidden
    /// size for recurrent tensors, the fan-in for linear projections.
    pub init_width: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Tensor indices for one GRU direction-layer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GruTensors {
    pub w_z: usize,
    pub u_z: usize,
    pub b_z: usize,
    pub w_r: usize,
    pub u_r: usize,
    pub b_r: usize,
    pub w_n: usize,
    pub u_n: usize,
    pub b_n: usize,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct ParamLayout {
    specs: Vec<TensorSpec>,
    total: usize,
    /// `[layer][direction]`, direction 0 = forward, 1 = backward.
    pub(crate) enc: Vec<Vec<GruTensors>>,
    pub(crate) dec: Vec<GruTensors>,
    pub(crate) embed_w: usize,
    pub(crate) embed_b: usize,
    pub(crate) dec_init_w: usize,
    pub(crate) dec_init_b: usize,
    pub(crate) out_w: usize,
    pub(crate) out_b: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    specs: Vec<TensorSpec>,
    total: usize,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, rows: usize, cols: usize, init_width: usize) -> usize {
        let spec = TensorSpec {
            name,
            offset: self.total,
            rows,
            cols,
            init_width,
        };
        self.total += spec.len();
        self.specs.push(spec);
        self.specs.len() - 1
    }

    fn gru(&mut self, prefix: &str, input: usize, hidden: usize) -> GruTensors {
        let gate = |b: &mut Self, g: &str| {
            let w = b.push(format!("{prefix}.w_{g}"), hidden, input, hidden);
            let u = b.push(format!("{prefix}.u_{g}"), hidden, hidden, hidden);
            let bias = b.push(format!("{prefix}.b_{g}"), hidden, 1, hidden);
            (w, u, bias)
        };
        let (w_z, u_z, b_z) = gate(self, "z");
        let (w_r, u_r, b_r) = gate(self, "r");
        let (w_n, u_n, b_n) = gate(self, "n");
        GruTensors {
            w_z,
            u_z,
            b_z,
            w_r,
            u_r,
            b_r,
            w_n,
            u_n,
            b_n,
            input,
            hidden,
        }
    }
}

impl ParamLayout {
    pub fn build(cfg: &ModelConfig) -> Self {
        let mut b = LayoutBuilder::default();
        let h = cfg.hidden_units;
        let dirs = if cfg.bidirectional { 2 } else { 1 };

        let mut enc = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let input = if l == 0 { cfg.feature_dim } else { h * dirs };
            let mut layer = Vec::with_capacity(dirs);
            layer.push(b.gru(&format!("enc.l{l}.fwd"), input, h));
            if cfg.bidirectional {
                layer.push(b.gru(&format!("enc.l{l}.bwd"), input, h));
            }
            enc.push(layer);
        }

        let enc_out = h * dirs;
        let embed_w = b.push("embed.w".into(), cfg.embedding_dim, enc_out, enc_out);
        let embed_b = b.push("embed.b".into(), cfg.embedding_dim, 1, enc_out);

        let mut dec = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let input = if l == 0 { cfg.embedding_dim } else { h };
            dec.push(b.gru(&format!("dec.l{l}"), input, h));
        }

        let dec_init_w = b.push(
            "dec_init.w".into(),
            cfg.num_layers * h,
            cfg.embedding_dim,
            cfg.embedding_dim,
        );
        let dec_init_b = b.push("dec_init.b".into(), cfg.num_layers * h, 1, cfg.embedding_dim);
        let out_w = b.push("out.w".into(), cfg.feature_dim, h, h);
        let out_b = b.push("out.b".into(), cfg.feature_dim, 1, h);

        ParamLayout {
            specs: b.specs,
            total: b.total,
            enc,
            dec,
            embed_w,
            embed_b,
            dec_init_w,
            dec_init_b,
            out_w,
            out_b,
        }
    }

    pub fn total_params(&self) -> usize {
        self.total
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec_by_name(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    #[inline]
    pub(crate) fn slice<'a>(&self, buf: &'a [f64], idx: usize) -> &'a [f64] {
        let s = &self.specs[idx];
        &buf[s.offset..s.offset + s.len()]
    }

    #[inline]
    pub(crate) fn slice_mut<'a>(&self, buf: &'a mut [f64], idx: usize) -> &'a mut [f64] {
        let s = &self.specs[idx];
        &mut buf[s.offset..s.offset + s.len()]
    }

    #[inline]
    pub(crate) fn dims(&self, idx: usize) -> (usize, usize) {
        let s = &self.specs[idx];
        (s.rows, s.cols)
    }
}

//! GRU cell and sequence runner with exact reverse-mode gradients.
//!
//! Gate convention (fixed for this crate):
//!
//! ```text
//! z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)        update gate
//! r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)        reset gate
//! c_t = r_t * h_{t-1}
//! n_t = tanh(W_n x_t + U_n c_t + b_n)               candidate state
//! h_t = (1 - z_t) * n_t + z_t * h_{t-1}
//! ```
//!
//! The update gate `z` gates retention of the previous state, and the reset
//! gate is applied to `h_{t-1}` before the candidate's recurrent product.
//! Initial state is zero unless supplied (the decoder projects the embedding
//! into it).

use alloc::vec;
use alloc::vec::Vec;

use super::params::{GruTensors, ParamLayout};
use crate::mat::Mat;
use crate::math;

/// Forward pass record for one direction-layer over a full sequence.
///
/// `hs[0]` is the initial state; `hs[s + 1]` and the gate rows at index `s`
/// belong to processing step `s`. For reversed runs, step `s` consumes the
/// input at original time `T - 1 - s`.
#[derive(Debug, Clone)]
pub(crate) struct DirTrace {
    pub hs: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub reverse: bool,
}

impl DirTrace {
    pub fn steps(&self) -> usize {
        self.z.len()
    }

    /// State visible at original time `t` (the output sequence of the layer).
    pub fn out(&self, t: usize) -> &[f64] {
        let steps = self.steps();
        if self.reverse {
            &self.hs[steps - t]
        } else {
            &self.hs[t + 1]
        }
    }

    /// State after the whole sequence has been consumed.
    pub fn last(&self) -> &[f64] {
        &self.hs[self.steps()]
    }
}

/// Run one direction-layer over `t_len` steps. `x_at(t)` yields the input at
/// original time `t`; for `reverse` runs the steps consume it back to front.
pub(crate) fn run_gru<'a>(
    params: &[f64],
    layout: &ParamLayout,
    ts: &GruTensors,
    x_at: impl Fn(usize) -> &'a [f64],
    t_len: usize,
    h0: Option<&[f64]>,
    reverse: bool,
) -> DirTrace {
    let h = ts.hidden;
    let i = ts.input;
    let w_z = layout.slice(params, ts.w_z);
    let u_z = layout.slice(params, ts.u_z);
    let b_z = layout.slice(params, ts.b_z);
    let w_r = layout.slice(params, ts.w_r);
    let u_r = layout.slice(params, ts.u_r);
    let b_r = layout.slice(params, ts.b_r);
    let w_n = layout.slice(params, ts.w_n);
    let u_n = layout.slice(params, ts.u_n);
    let b_n = layout.slice(params, ts.b_n);

    let mut trace = DirTrace {
        hs: Vec::with_capacity(t_len + 1),
        z: Vec::with_capacity(t_len),
        r: Vec::with_capacity(t_len),
        n: Vec::with_capacity(t_len),
        c: Vec::with_capacity(t_len),
        reverse,
    };
    trace.hs.push(match h0 {
        Some(s) => s.to_vec(),
        None => vec![0.0; h],
    });

    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let x = x_at(t);
        debug_assert_eq!(x.len(), i);
        let h_prev = &trace.hs[step];

        let mut zg = b_z.to_vec();
        math::matvec_acc(w_z, h, i, x, &mut zg);
        math::matvec_acc(u_z, h, h, h_prev, &mut zg);
        for v in zg.iter_mut() {
            *v = math::sigmoid(*v);
        }

        let mut rg = b_r.to_vec();
        math::matvec_acc(w_r, h, i, x, &mut rg);
        math::matvec_acc(u_r, h, h, h_prev, &mut rg);
        for v in rg.iter_mut() {
            *v = math::sigmoid(*v);
        }

        let mut c = vec![0.0; h];
        for j in 0..h {
            c[j] = rg[j] * h_prev[j];
        }

        let mut ng = b_n.to_vec();
        math::matvec_acc(w_n, h, i, x, &mut ng);
        math::matvec_acc(u_n, h, h, &c, &mut ng);
        for v in ng.iter_mut() {
            *v = math::tanh(*v);
        }

        let mut h_new = vec![0.0; h];
        for j in 0..h {
            h_new[j] = (1.0 - zg[j]) * ng[j] + zg[j] * h_prev[j];
        }

        trace.z.push(zg);
        trace.r.push(rg);
        trace.n.push(ng);
        trace.c.push(c);
        trace.hs.push(h_new);
    }
    trace
}

/// Backpropagate through one direction-layer.
///
/// `d_out` holds the gradient with respect to the layer's output sequence;
/// this direction reads its block at column offset `dir_col`. Input
/// gradients accumulate into `d_in` (same time indexing as `inputs`) and
/// parameter gradients into the flat `grads` buffer. Returns the gradient
/// with respect to the initial state, which the decoder routes into its
/// init projection.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    params: &[f64],
    layout: &ParamLayout,
    ts: &GruTensors,
    trace: &DirTrace,
    inputs: &Mat,
    d_out: &Mat,
    dir_col: usize,
    d_in: &mut Mat,
    grads: &mut [f64],
) -> Vec<f64> {
    let h = ts.hidden;
    let i = ts.input;
    let steps = trace.steps();
    debug_assert_eq!(inputs.rows(), steps);
    debug_assert_eq!(d_in.rows(), steps);
    debug_assert_eq!(d_in.cols(), i);

    let w_z = layout.slice(params, ts.w_z);
    let u_z = layout.slice(params, ts.u_z);
    let w_r = layout.slice(params, ts.w_r);
    let u_r = layout.slice(params, ts.u_r);
    let w_n = layout.slice(params, ts.w_n);
    let u_n = layout.slice(params, ts.u_n);

    let mut dh = vec![0.0; h];
    let mut dn = vec![0.0; h];
    let mut dz = vec![0.0; h];
    let mut dc = vec![0.0; h];
    let mut dr = vec![0.0; h];

    for s in (0..steps).rev() {
        let t = if trace.reverse { steps - 1 - s } else { s };
        let x = inputs.row(t);
        let h_prev = &trace.hs[s];
        let z = &trace.z[s];
        let r = &trace.r[s];
        let n = &trace.n[s];
        let c = &trace.c[s];

        // Gradient arriving at the state produced in this step.
        {
            let row = d_out.row(t);
            for j in 0..h {
                dh[j] += row[dir_col + j];
            }
        }

        let mut dh_prev = vec![0.0; h];
        for j in 0..h {
            dn[j] = dh[j] * (1.0 - z[j]);
            dz[j] = dh[j] * (h_prev[j] - n[j]);
            dh_prev[j] = dh[j] * z[j];
        }

        // Candidate branch.
        for j in 0..h {
            dn[j] *= 1.0 - n[j] * n[j]; // now d(nhat)
        }
        math::add_acc(layout.slice_mut(grads, ts.b_n), &dn);
        math::outer_acc(layout.slice_mut(grads, ts.w_n), h, i, &dn, x);
        math::outer_acc(layout.slice_mut(grads, ts.u_n), h, h, &dn, c);
        dc.iter_mut().for_each(|v| *v = 0.0);
        math::matvec_t_acc(u_n, h, h, &dn, &mut dc);
        math::matvec_t_acc(w_n, h, i, &dn, d_in.row_mut(t));

        // Reset branch.
        for j in 0..h {
            dr[j] = dc[j] * h_prev[j];
            dh_prev[j] += dc[j] * r[j];
        }
        for j in 0..h {
            dr[j] *= r[j] * (1.0 - r[j]); // now d(rhat)
        }
        math::add_acc(layout.slice_mut(grads, ts.b_r), &dr);
        math::outer_acc(layout.slice_mut(grads, ts.w_r), h, i, &dr, x);
        math::outer_acc(layout.slice_mut(grads, ts.u_r), h, h, &dr, h_prev);
        math::matvec_t_acc(u_r, h, h, &dr, &mut dh_prev);
        math::matvec_t_acc(w_r, h, i, &dr, d_in.row_mut(t));

        // Update branch.
        for j in 0..h {
            dz[j] *= z[j] * (1.0 - z[j]); // now d(zhat)
        }
        math::add_acc(layout.slice_mut(grads, ts.b_z), &dz);
        math::outer_acc(layout.slice_mut(grads, ts.w_z), h, i, &dz, x);
        math::outer_acc(layout.slice_mut(grads, ts.u_z), h, h, &dz, h_prev);
        math::matvec_t_acc(u_z, h, h, &dz, &mut dh_prev);
        math::matvec_t_acc(w_z, h, i, &dz, d_in.row_mut(t));

        dh = dh_prev;
    }
    dh
}

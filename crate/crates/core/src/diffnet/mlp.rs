//! The modulated sine MLP and its derivatives.
//!
//! Hidden layer `i` computes `h_i = a_i * sin(omega (W_i h_{i-1} + b_i))`;
//! the output layer is affine. Spatial derivatives are carried forward as two
//! tangent streams (d/dx, d/dy) stacked under the values, so a layer's
//! activations form one `(3N) x width` matrix and each layer costs a single
//! matrix product. The reverse pass runs over the same stacked rows, which is
//! what differentiates losses that depend on the input Jacobian.

use super::config::{BlockRole, INPUT_DIM, OUTPUT_DIM};
use super::model::InrModel;
use crate::real::{matmul, matmul_at_acc, matmul_bt, Real};

pub(crate) struct MlpTape<T> {
    pub n: usize,
    pub rows: usize,
    /// Stacked inputs to every layer, output layer included.
    inputs: Vec<Vec<T>>,
    /// Stacked omega-scaled pre-activations of the hidden layers.
    pre: Vec<Vec<T>>,
    sin: Vec<Vec<T>>,
    cos: Vec<Vec<T>>,
    /// Stacked outputs: `u` rows, then `du/dx` rows, then `du/dy` rows.
    pub out: Vec<T>,
}

impl<T: Real> MlpTape<T> {
    pub fn u(&self, p: usize) -> [T; 2] {
        [self.out[p * 2], self.out[p * 2 + 1]]
    }

    /// `[du/dx, du/dy]` at point `p`.
    pub fn du(&self, p: usize) -> [[T; 2]; 2] {
        let n = self.n;
        let dx = &self.out[(n + p) * 2..(n + p) * 2 + 2];
        let dy = &self.out[(2 * n + p) * 2..(2 * n + p) * 2 + 2];
        [[dx[0], dx[1]], [dy[0], dy[1]]]
    }

    /// `dX'/dX = I + du/dX`, row `r` holding the derivatives of `X'_r`.
    pub fn jacobian(&self, p: usize) -> [[T; 2]; 2] {
        let [dx, dy] = self.du(p);
        [[T::ONE + dx[0], dy[0]], [dx[1], T::ONE + dy[1]]]
    }
}

/// Evaluates the MLP at `coords` (`(x, y, t)` per point).
pub(crate) fn mlp_forward<T: Real>(
    model: &InrModel<T>,
    amplitudes: &[Vec<T>],
    coords: &[[T; 3]],
    tangents: bool,
) -> MlpTape<T> {
    let cfg = model.config();
    let n = coords.len();
    let rows = if tangents { 3 * n } else { n };
    let omega = model.omega();
    let width = cfg.hidden_size;

    let mut h0 = vec![T::ZERO; rows * INPUT_DIM];
    for (p, c) in coords.iter().enumerate() {
        h0[p * INPUT_DIM..(p + 1) * INPUT_DIM].copy_from_slice(c);
        if tangents {
            h0[(n + p) * INPUT_DIM] = T::ONE;
            h0[(2 * n + p) * INPUT_DIM + 1] = T::ONE;
        }
    }

    let mut inputs = Vec::with_capacity(cfg.hidden_layers + 1);
    let mut pre_all = Vec::with_capacity(cfg.hidden_layers);
    let mut sin_all = Vec::with_capacity(cfg.hidden_layers);
    let mut cos_all = Vec::with_capacity(cfg.hidden_layers);
    inputs.push(h0);

    for i in 0..cfg.hidden_layers {
        let fan_in = cfg.mlp_in(i);
        let w = model.block(BlockRole::MlpWeight(i));
        let b = model.block(BlockRole::MlpBias(i));
        let a = &amplitudes[i];
        let mut pre = vec![T::ZERO; rows * width];
        matmul_bt(rows, fan_in, width, &inputs[i], w, T::ZERO, &mut pre);

        let mut s = vec![T::ZERO; n * width];
        let mut c = vec![T::ZERO; n * width];
        let mut h = vec![T::ZERO; rows * width];
        for p in 0..n {
            let r = p * width..(p + 1) * width;
            for (j, ((pv, sv), cv)) in pre[r.clone()]
                .iter_mut()
                .zip(&mut s[r.clone()])
                .zip(&mut c[r.clone()])
                .enumerate()
            {
                *pv = omega * (*pv + b[j]);
                *sv = pv.sin();
                *cv = pv.cos();
            }
            for j in 0..width {
                h[p * width + j] = a[j] * s[p * width + j];
            }
        }
        if tangents {
            for d in 1..3 {
                for p in 0..n {
                    let base = (d * n + p) * width;
                    for j in 0..width {
                        let pt = omega * pre[base + j];
                        pre[base + j] = pt;
                        h[base + j] = a[j] * c[p * width + j] * pt;
                    }
                }
            }
        }
        pre_all.push(pre);
        sin_all.push(s);
        cos_all.push(c);
        inputs.push(h);
    }

    let l_out = cfg.hidden_layers;
    let w = model.block(BlockRole::MlpWeight(l_out));
    let b = model.block(BlockRole::MlpBias(l_out));
    let mut out = vec![T::ZERO; rows * OUTPUT_DIM];
    matmul_bt(
        rows,
        width,
        OUTPUT_DIM,
        &inputs[l_out],
        w,
        T::ZERO,
        &mut out,
    );
    for p in 0..n {
        out[p * 2] += b[0];
        out[p * 2 + 1] += b[1];
    }

    MlpTape {
        n,
        rows,
        inputs,
        pre: pre_all,
        sin: sin_all,
        cos: cos_all,
        out,
    }
}

/// Reverse pass through the stacked MLP.
///
/// `out_grad` holds `dL/du` for the first `rows_used` stacked rows (either
/// `n`, when no loss depends on the Jacobian, or all `3n`). Returns the
/// gradient with respect to every amplitude vector.
pub(crate) fn mlp_backward<T: Real>(
    model: &InrModel<T>,
    amplitudes: &[Vec<T>],
    tape: &MlpTape<T>,
    out_grad: &[T],
    rows_used: usize,
    grads: &mut [T],
) -> Vec<Vec<T>> {
    let cfg = model.config();
    let layout = model.layout();
    let n = tape.n;
    let rows = rows_used;
    debug_assert!(rows == n || rows == tape.rows);
    debug_assert_eq!(out_grad.len(), rows * OUTPUT_DIM);
    let width = cfg.hidden_size;
    let omega = model.omega();
    let l_out = cfg.hidden_layers;

    // Output layer.
    matmul_at_acc(
        OUTPUT_DIM,
        rows,
        width,
        T::ONE,
        out_grad,
        &tape.inputs[l_out][..rows * width],
        &mut grads[layout.range(BlockRole::MlpWeight(l_out))],
    );
    {
        let gb = &mut grads[layout.range(BlockRole::MlpBias(l_out))];
        for p in 0..n {
            gb[0] += out_grad[p * 2];
            gb[1] += out_grad[p * 2 + 1];
        }
    }
    let mut h_grad = vec![T::ZERO; rows * width];
    matmul(
        rows,
        OUTPUT_DIM,
        width,
        out_grad,
        model.block(BlockRole::MlpWeight(l_out)),
        T::ZERO,
        &mut h_grad,
    );

    let mut amp_grads = vec![vec![T::ZERO; width]; cfg.hidden_layers];
    for i in (0..cfg.hidden_layers).rev() {
        let a = &amplitudes[i];
        let pre = &tape.pre[i];
        let s = &tape.sin[i];
        let c = &tape.cos[i];
        let ag = &mut amp_grads[i];

        // h_grad becomes dL/d(pre-activation before omega), in place.
        if rows > n {
            for p in 0..n {
                let v = p * width;
                let x = (n + p) * width;
                let y = (2 * n + p) * width;
                for j in 0..width {
                    let (hv, hx, hy) = (h_grad[v + j], h_grad[x + j], h_grad[y + j]);
                    let (sv, cv) = (s[v + j], c[v + j]);
                    let (px, py) = (pre[x + j], pre[y + j]);
                    let tang = hx * px + hy * py;
                    ag[j] += hv * sv + cv * tang;
                    let s_bar = hv * a[j];
                    let c_bar = a[j] * tang;
                    h_grad[v + j] = omega * (s_bar * cv - c_bar * sv);
                    let ac = a[j] * cv;
                    h_grad[x + j] = omega * hx * ac;
                    h_grad[y + j] = omega * hy * ac;
                }
            }
        } else {
            for p in 0..n {
                let v = p * width;
                for j in 0..width {
                    let hv = h_grad[v + j];
                    ag[j] += hv * s[v + j];
                    h_grad[v + j] = omega * hv * a[j] * c[v + j];
                }
            }
        }
        let z_grad = h_grad;

        let fan_in = cfg.mlp_in(i);
        matmul_at_acc(
            width,
            rows,
            fan_in,
            T::ONE,
            &z_grad,
            &tape.inputs[i][..rows * fan_in],
            &mut grads[layout.range(BlockRole::MlpWeight(i))],
        );
        {
            let gb = &mut grads[layout.range(BlockRole::MlpBias(i))];
            for p in 0..n {
                for (g, &v) in gb.iter_mut().zip(&z_grad[p * width..(p + 1) * width]) {
                    *g += v;
                }
            }
        }
        if i == 0 {
            break;
        }
        let mut prev = vec![T::ZERO; rows * fan_in];
        matmul(
            rows,
            width,
            fan_in,
            &z_grad,
            model.block(BlockRole::MlpWeight(i)),
            T::ZERO,
            &mut prev,
        );
        h_grad = prev;
    }
    amp_grads
}

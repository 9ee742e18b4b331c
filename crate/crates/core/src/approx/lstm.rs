//! Merged LSTM Q-network: a single recurrent layer read over the history
//! sequence, whose final memory-cell output is concatenated with the
//! auxiliary features and pushed through a small dense head. Gradients are
//! backpropagation-through-time, hand-rolled.

use super::dense::{relu_backward, relu_inplace, DenseLayer};
use super::encoding::EncodedState;
use super::rmsprop::{Net, ParamVec};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of the LSTM regressor head; the cell size is scenario-dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    /// Memory-cell width; 0 means "use the scenario default".
    pub d_cell: usize,
    pub merge_width: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            d_cell: 0,
            merge_width: 20,
        }
    }
}

/// Gate weights of a single LSTM layer. Each matrix has shape
/// `d_cell x (d_cell + d_in)` and acts on the concatenation
/// `[h_prev, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_o: Vec<f64>,
    pub w_c: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
    pub d_cell: usize,
    pub d_in: usize,
}

impl LstmParams {
    pub fn zeros(d_cell: usize, d_in: usize) -> Self {
        let n = d_cell * (d_cell + d_in);
        LstmParams {
            w_f: vec![0.0; n],
            w_i: vec![0.0; n],
            w_o: vec![0.0; n],
            w_c: vec![0.0; n],
            b_f: vec![0.0; d_cell],
            b_i: vec![0.0; d_cell],
            b_o: vec![0.0; d_cell],
            b_c: vec![0.0; d_cell],
            d_cell,
            d_in,
        }
    }

    pub fn glorot<R: Rng>(rng: &mut R, d_cell: usize, d_in: usize) -> Self {
        let cols = d_cell + d_in;
        let bound = (6.0 / (cols + d_cell) as f64).sqrt();
        let mut init = || {
            (0..d_cell * cols)
                .map(|_| rng.gen_range(-bound..bound))
                .collect::<Vec<f64>>()
        };
        let w_f = init();
        let w_i = init();
        let w_o = init();
        let w_c = init();
        LstmParams {
            w_f,
            w_i,
            w_o,
            w_c,
            // Slight positive forget bias keeps early memories alive.
            b_f: vec![1.0; d_cell],
            b_i: vec![0.0; d_cell],
            b_o: vec![0.0; d_cell],
            b_c: vec![0.0; d_cell],
            d_cell,
            d_in,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step:
/// `f = sig(W_f [h, x] + b_f)`, `i = sig(W_i [h, x] + b_i)`,
/// `o = sig(W_o [h, x] + b_o)`, `c~ = tanh(W_c [h, x] + b_c)`,
/// `C = f * C_prev + i * c~`, `h = o * tanh(C)` (elementwise).
pub fn lstm_cell(
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if x_t.len() != p.d_in || h_prev.len() != p.d_cell || c_prev.len() != p.d_cell {
        return Err(Error::invalid_argument(format!(
            "lstm_cell shapes (x={}, h={}, c={}) do not match params (d_in={}, d_cell={})",
            x_t.len(),
            h_prev.len(),
            c_prev.len(),
            p.d_in,
            p.d_cell
        )));
    }
    let mut step = CellStep::new(p.d_cell);
    step.forward(p, x_t, h_prev, c_prev);
    Ok((step.h, step.c))
}

/// Intermediate values of one cell step, kept for BPTT.
#[derive(Debug, Clone, Default)]
struct CellStep {
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    cbar: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl CellStep {
    fn new(d_cell: usize) -> Self {
        CellStep {
            f: vec![0.0; d_cell],
            i: vec![0.0; d_cell],
            o: vec![0.0; d_cell],
            cbar: vec![0.0; d_cell],
            c: vec![0.0; d_cell],
            tanh_c: vec![0.0; d_cell],
            h: vec![0.0; d_cell],
        }
    }

    fn forward(&mut self, p: &LstmParams, x_t: &[f64], h_prev: &[f64], c_prev: &[f64]) {
        let cols = p.d_cell + p.d_in;
        for j in 0..p.d_cell {
            let row = j * cols;
            let mut zf = p.b_f[j];
            let mut zi = p.b_i[j];
            let mut zo = p.b_o[j];
            let mut zc = p.b_c[j];
            for (k, hv) in h_prev.iter().enumerate() {
                zf += p.w_f[row + k] * hv;
                zi += p.w_i[row + k] * hv;
                zo += p.w_o[row + k] * hv;
                zc += p.w_c[row + k] * hv;
            }
            for (k, xv) in x_t.iter().enumerate() {
                let col = row + p.d_cell + k;
                zf += p.w_f[col] * xv;
                zi += p.w_i[col] * xv;
                zo += p.w_o[col] * xv;
                zc += p.w_c[col] * xv;
            }
            self.f[j] = sigmoid(zf);
            self.i[j] = sigmoid(zi);
            self.o[j] = sigmoid(zo);
            self.cbar[j] = zc.tanh();
            self.c[j] = self.f[j] * c_prev[j] + self.i[j] * self.cbar[j];
            self.tanh_c[j] = self.c[j].tanh();
            self.h[j] = self.o[j] * self.tanh_c[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct LstmNet {
    pub cell: LstmParams,
    pub head: Vec<DenseLayer>,
    pub out: DenseLayer,
    pub seq_len: usize,
}

impl LstmNet {
    pub fn init<R: Rng>(
        rng: &mut R,
        seq_len: usize,
        d_in: usize,
        aux_dim: usize,
        d_cell: usize,
        merge_width: usize,
    ) -> Self {
        let cell = LstmParams::glorot(rng, d_cell, d_in);
        let head = vec![
            DenseLayer::glorot(rng, d_cell + aux_dim, merge_width),
            DenseLayer::glorot(rng, merge_width, merge_width),
        ];
        let out = DenseLayer::glorot(rng, merge_width, 1);
        LstmNet {
            cell,
            head,
            out,
            seq_len,
        }
    }
}

pub(crate) struct LstmCache {
    steps: Vec<CellStep>,
    merge_in: Vec<f64>,
    head_acts: Vec<Vec<f64>>,
}

impl ParamVec for LstmNet {
    fn pieces(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            &self.cell.w_f,
            &self.cell.w_i,
            &self.cell.w_o,
            &self.cell.w_c,
            &self.cell.b_f,
            &self.cell.b_i,
            &self.cell.b_o,
            &self.cell.b_c,
        ];
        for l in &self.head {
            v.push(&l.w);
            v.push(&l.b);
        }
        v.push(&self.out.w);
        v.push(&self.out.b);
        v
    }

    fn pieces_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            &mut self.cell.w_f,
            &mut self.cell.w_i,
            &mut self.cell.w_o,
            &mut self.cell.w_c,
            &mut self.cell.b_f,
            &mut self.cell.b_i,
            &mut self.cell.b_o,
            &mut self.cell.b_c,
        ];
        for l in &mut self.head {
            v.push(&mut l.w);
            v.push(&mut l.b);
        }
        v.push(&mut self.out.w);
        v.push(&mut self.out.b);
        v
    }
}

impl Net for LstmNet {
    type Cache = LstmCache;

    fn new_cache(&self) -> LstmCache {
        LstmCache {
            steps: (0..self.seq_len)
                .map(|_| CellStep::new(self.cell.d_cell))
                .collect(),
            merge_in: vec![0.0; self.head[0].in_dim],
            head_acts: self.head.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }

    fn forward(&self, x: &EncodedState, cache: &mut LstmCache) -> f64 {
        let d_in = self.cell.d_in;
        let d_cell = self.cell.d_cell;
        debug_assert_eq!(x.seq.len(), self.seq_len * d_in);

        let zeros = vec![0.0; d_cell];
        for t in 0..self.seq_len {
            let x_t = &x.seq[t * d_in..(t + 1) * d_in];
            let (before, rest) = cache.steps.split_at_mut(t);
            let (h_prev, c_prev) = match before.last() {
                Some(prev) => (prev.h.as_slice(), prev.c.as_slice()),
                None => (zeros.as_slice(), zeros.as_slice()),
            };
            rest[0].forward(&self.cell, x_t, h_prev, c_prev);
        }

        let h_last = &cache.steps[self.seq_len - 1].h;
        cache.merge_in[..d_cell].copy_from_slice(h_last);
        cache.merge_in[d_cell..].copy_from_slice(&x.aux);

        let mut input: &[f64] = &cache.merge_in;
        for (layer, act) in self.head.iter().zip(cache.head_acts.iter_mut()) {
            layer.forward(input, act);
            relu_inplace(act);
            input = act;
        }
        let mut y = [0.0];
        self.out.forward(input, &mut y);
        y[0]
    }

    fn backward(&self, x: &EncodedState, cache: &LstmCache, dy: f64, grads: &mut Self) {
        let d_in = self.cell.d_in;
        let d_cell = self.cell.d_cell;
        let cols = d_cell + d_in;

        // Head backward down to the merged input.
        let last_act = cache
            .head_acts
            .last()
            .map(Vec::as_slice)
            .unwrap_or(&cache.merge_in);
        let mut d = vec![0.0; self.out.in_dim];
        self.out.backward(last_act, &[dy], &mut grads.out, Some(&mut d));
        let mut d_merge = vec![0.0; self.head[0].in_dim];
        for (idx, layer) in self.head.iter().enumerate().rev() {
            relu_backward(&cache.head_acts[idx], &mut d);
            if idx == 0 {
                layer.backward(&cache.merge_in, &d, &mut grads.head[idx], Some(&mut d_merge));
            } else {
                let mut dx = vec![0.0; layer.in_dim];
                layer.backward(
                    &cache.head_acts[idx - 1],
                    &d,
                    &mut grads.head[idx],
                    Some(&mut dx),
                );
                d = dx;
            }
        }

        // BPTT from the final hidden state backwards.
        let mut dh = d_merge[..d_cell].to_vec();
        let mut dc = vec![0.0; d_cell];
        let zeros = vec![0.0; d_cell];

        for t in (0..self.seq_len).rev() {
            let step = &cache.steps[t];
            let x_t = &x.seq[t * d_in..(t + 1) * d_in];
            let (h_prev, c_prev) = if t == 0 {
                (zeros.as_slice(), zeros.as_slice())
            } else {
                (
                    cache.steps[t - 1].h.as_slice(),
                    cache.steps[t - 1].c.as_slice(),
                )
            };

            let mut dh_prev = vec![0.0; d_cell];
            for j in 0..d_cell {
                let d_tanh = dh[j] * step.o[j];
                let dc_j = d_tanh * (1.0 - step.tanh_c[j] * step.tanh_c[j]) + dc[j];

                let do_pre = dh[j] * step.tanh_c[j] * step.o[j] * (1.0 - step.o[j]);
                let di_pre = dc_j * step.cbar[j] * step.i[j] * (1.0 - step.i[j]);
                let df_pre = dc_j * c_prev[j] * step.f[j] * (1.0 - step.f[j]);
                let dcbar_pre = dc_j * step.i[j] * (1.0 - step.cbar[j] * step.cbar[j]);

                dc[j] = dc_j * step.f[j];

                let row = j * cols;
                grads.cell.b_f[j] += df_pre;
                grads.cell.b_i[j] += di_pre;
                grads.cell.b_o[j] += do_pre;
                grads.cell.b_c[j] += dcbar_pre;
                for (k, hv) in h_prev.iter().enumerate() {
                    grads.cell.w_f[row + k] += df_pre * hv;
                    grads.cell.w_i[row + k] += di_pre * hv;
                    grads.cell.w_o[row + k] += do_pre * hv;
                    grads.cell.w_c[row + k] += dcbar_pre * hv;
                    dh_prev[k] += df_pre * self.cell.w_f[row + k]
                        + di_pre * self.cell.w_i[row + k]
                        + do_pre * self.cell.w_o[row + k]
                        + dcbar_pre * self.cell.w_c[row + k];
                }
                for (k, xv) in x_t.iter().enumerate() {
                    let col = row + d_cell + k;
                    grads.cell.w_f[col] += df_pre * xv;
                    grads.cell.w_i[col] += di_pre * xv;
                    grads.cell.w_o[col] += do_pre * xv;
                    grads.cell.w_c[col] += dcbar_pre * xv;
                }
            }
            dh = dh_prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_halve_the_gates() {
        let p = LstmParams::zeros(3, 2);
        let c_prev = vec![0.4, -0.8, 2.0];
        let (h, c) = lstm_cell(&[0.0, 0.0], &[0.0; 3], &c_prev, &p).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(c[j], 0.5 * c_prev[j], epsilon = 1e-15);
            assert_abs_diff_eq!(h[j], 0.5 * (0.5 * c_prev[j]).tanh(), epsilon = 1e-15);
        }
    }

    #[test]
    fn saturated_gates_preserve_memory() {
        // b_f = +50 saturates the forget gate at 1, b_i = -50 shuts the
        // input gate: the cell state passes through unchanged.
        let mut p = LstmParams::zeros(2, 1);
        p.b_f = vec![50.0; 2];
        p.b_i = vec![-50.0; 2];
        let c_prev = vec![0.7, -1.3];
        let (_, c) = lstm_cell(&[0.3], &[0.1, 0.2], &c_prev, &p).unwrap();
        assert_abs_diff_eq!(c[0], c_prev[0], epsilon = 1e-9);
        assert_abs_diff_eq!(c[1], c_prev[1], epsilon = 1e-9);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = LstmParams::zeros(2, 2);
        assert!(lstm_cell(&[1.0], &[0.0; 2], &[0.0; 2], &p).is_err());
        assert!(lstm_cell(&[1.0, 2.0], &[0.0; 3], &[0.0; 2], &p).is_err());
    }

    /// Scalar-by-scalar oracle written directly from the gate formulas,
    /// sharing no code with `lstm_cell`.
    fn scalar_oracle(
        x_t: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        p: &LstmParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let d_cell = p.d_cell;
        let cols = d_cell + p.d_in;
        let mut h = vec![0.0; d_cell];
        let mut c = vec![0.0; d_cell];
        for j in 0..d_cell {
            let mut acc = [p.b_f[j], p.b_i[j], p.b_o[j], p.b_c[j]];
            let z: Vec<f64> = h_prev.iter().chain(x_t.iter()).copied().collect();
            for (k, zv) in z.iter().enumerate() {
                acc[0] += p.w_f[j * cols + k] * zv;
                acc[1] += p.w_i[j * cols + k] * zv;
                acc[2] += p.w_o[j * cols + k] * zv;
                acc[3] += p.w_c[j * cols + k] * zv;
            }
            let (f, i, o, cbar) = (sig(acc[0]), sig(acc[1]), sig(acc[2]), acc[3].tanh());
            c[j] = f * c_prev[j] + i * cbar;
            h[j] = o * c[j].tanh();
        }
        (h, c)
    }

    #[test]
    fn matches_scalar_oracle_on_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = LstmParams::glorot(&mut rng, 5, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h_prev: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c_prev: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let (h, c) = lstm_cell(&x, &h_prev, &c_prev, &p).unwrap();
        let (h_ref, c_ref) = scalar_oracle(&x, &h_prev, &c_prev, &p);
        for j in 0..5 {
            assert_abs_diff_eq!(h[j], h_ref[j], epsilon = 1e-12);
            assert_abs_diff_eq!(c[j], c_ref[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn gates_stay_in_unit_interval_and_cell_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = LstmParams::glorot(&mut rng, 4, 2);
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let h_prev: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c_prev: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (_, c) = lstm_cell(&x, &h_prev, &c_prev, &p).unwrap();
            for j in 0..4 {
                assert!(c[j].abs() <= c_prev[j].abs() + 1.0 + 1e-12);
            }
        }
    }
}

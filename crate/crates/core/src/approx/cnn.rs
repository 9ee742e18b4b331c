//! Merged 1D convolutional Q-network: two convolution/ReLU/average-pool
//! stages along the time axis of the history matrix, flattened and merged
//! with a dense branch over the auxiliary features.

use super::dense::{relu_backward, relu_inplace, DenseLayer};
use super::encoding::EncodedState;
use super::rmsprop::{Net, ParamVec};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of the CNN regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub filters: usize,
    pub filter_len: usize,
    pub pool_width: usize,
    pub merge_width: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filters: 8,
            filter_len: 4,
            pool_width: 2,
            merge_width: 20,
        }
    }
}

/// 1D convolution along time with `valid` padding; kernels sum over input
/// channels. Kernel layout: `out_ch x filter_len x in_ch`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub k: Vec<f64>,
    pub b: Vec<f64>,
    pub len: usize,
    pub in_ch: usize,
    pub out_ch: usize,
}

impl ConvLayer {
    pub fn glorot<R: Rng>(rng: &mut R, len: usize, in_ch: usize, out_ch: usize) -> Self {
        let fan = len * in_ch + out_ch;
        let bound = (6.0 / fan as f64).sqrt();
        ConvLayer {
            k: (0..out_ch * len * in_ch)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            b: vec![0.0; out_ch],
            len,
            in_ch,
            out_ch,
        }
    }

    pub fn out_steps(&self, in_steps: usize) -> usize {
        in_steps + 1 - self.len
    }

    /// `input`: `in_steps x in_ch` row-major; `out`: `out_steps x out_ch`.
    pub fn forward(&self, input: &[f64], in_steps: usize, out: &mut [f64]) {
        let steps = self.out_steps(in_steps);
        debug_assert_eq!(out.len(), steps * self.out_ch);
        for t in 0..steps {
            for oc in 0..self.out_ch {
                let mut acc = self.b[oc];
                let k_base = oc * self.len * self.in_ch;
                for dt in 0..self.len {
                    let in_row = (t + dt) * self.in_ch;
                    let k_row = k_base + dt * self.in_ch;
                    for ic in 0..self.in_ch {
                        acc += self.k[k_row + ic] * input[in_row + ic];
                    }
                }
                out[t * self.out_ch + oc] = acc;
            }
        }
    }

    fn backward(
        &self,
        input: &[f64],
        in_steps: usize,
        d_out: &[f64],
        grad: &mut ConvLayer,
        d_in: Option<&mut [f64]>,
    ) {
        let steps = self.out_steps(in_steps);
        if let Some(d_in) = &d_in {
            debug_assert_eq!(d_in.len(), input.len());
        }
        let mut d_in = d_in;
        if let Some(d) = d_in.as_deref_mut() {
            d.fill(0.0);
        }
        for t in 0..steps {
            for oc in 0..self.out_ch {
                let d = d_out[t * self.out_ch + oc];
                if d == 0.0 {
                    continue;
                }
                grad.b[oc] += d;
                let k_base = oc * self.len * self.in_ch;
                for dt in 0..self.len {
                    let in_row = (t + dt) * self.in_ch;
                    let k_row = k_base + dt * self.in_ch;
                    for ic in 0..self.in_ch {
                        grad.k[k_row + ic] += d * input[in_row + ic];
                        if let Some(di) = d_in.as_deref_mut() {
                            di[in_row + ic] += d * self.k[k_row + ic];
                        }
                    }
                }
            }
        }
    }
}

fn pool_out_steps(in_steps: usize, width: usize) -> usize {
    in_steps / width
}

/// Non-overlapping average pooling along time.
fn avg_pool(input: &[f64], in_steps: usize, ch: usize, width: usize, out: &mut [f64]) {
    let steps = pool_out_steps(in_steps, width);
    for t in 0..steps {
        for c in 0..ch {
            let mut acc = 0.0;
            for w in 0..width {
                acc += input[(t * width + w) * ch + c];
            }
            out[t * ch + c] = acc / width as f64;
        }
    }
}

fn avg_pool_backward(d_out: &[f64], in_steps: usize, ch: usize, width: usize, d_in: &mut [f64]) {
    d_in.fill(0.0);
    let steps = pool_out_steps(in_steps, width);
    for t in 0..steps {
        for c in 0..ch {
            let share = d_out[t * ch + c] / width as f64;
            for w in 0..width {
                d_in[(t * width + w) * ch + c] += share;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct CnnNet {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub aux_dense: DenseLayer,
    pub merged: Vec<DenseLayer>,
    pub out: DenseLayer,
    pub seq_len: usize,
    pub pool_width: usize,
}

pub(crate) struct CnnCache {
    conv1_post: Vec<f64>,
    pool1: Vec<f64>,
    conv2_post: Vec<f64>,
    pool2: Vec<f64>,
    aux_post: Vec<f64>,
    merge_in: Vec<f64>,
    merged_acts: Vec<Vec<f64>>,
}

impl CnnNet {
    /// Validates that two conv/pool stages leave at least one time step.
    pub fn check_length(h: usize, cfg: &CnnConfig) -> Result<()> {
        let after = |steps: usize| -> Option<usize> {
            let conv = steps.checked_sub(cfg.filter_len - 1)?;
            let pooled = conv / cfg.pool_width;
            (pooled >= 1).then_some(pooled)
        };
        after(h)
            .and_then(after)
            .map(|_| ())
            .ok_or_else(|| {
                Error::invalid_argument(format!(
                    "history depth {h} too short for two conv({})/pool({}) stages",
                    cfg.filter_len, cfg.pool_width
                ))
            })
    }

    pub fn init<R: Rng>(
        rng: &mut R,
        seq_len: usize,
        n_series: usize,
        aux_dim: usize,
        cfg: &CnnConfig,
    ) -> Result<Self> {
        Self::check_length(seq_len, cfg)?;
        let conv1 = ConvLayer::glorot(rng, cfg.filter_len, n_series, cfg.filters);
        let conv2 = ConvLayer::glorot(rng, cfg.filter_len, cfg.filters, cfg.filters);
        let p1 = pool_out_steps(conv1.out_steps(seq_len), cfg.pool_width);
        let p2 = pool_out_steps(conv2.out_steps(p1), cfg.pool_width);
        let conv_features = p2 * cfg.filters;

        let aux_dense = DenseLayer::glorot(rng, aux_dim, cfg.merge_width);
        let merged = vec![
            DenseLayer::glorot(rng, conv_features + cfg.merge_width, cfg.merge_width),
            DenseLayer::glorot(rng, cfg.merge_width, cfg.merge_width),
        ];
        let out = DenseLayer::glorot(rng, cfg.merge_width, 1);
        Ok(CnnNet {
            conv1,
            conv2,
            aux_dense,
            merged,
            out,
            seq_len,
            pool_width: cfg.pool_width,
        })
    }

    fn stage_dims(&self) -> (usize, usize, usize, usize) {
        let c1 = self.conv1.out_steps(self.seq_len);
        let p1 = pool_out_steps(c1, self.pool_width);
        let c2 = self.conv2.out_steps(p1);
        let p2 = pool_out_steps(c2, self.pool_width);
        (c1, p1, c2, p2)
    }
}

impl ParamVec for CnnNet {
    fn pieces(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            &self.conv1.k,
            &self.conv1.b,
            &self.conv2.k,
            &self.conv2.b,
            &self.aux_dense.w,
            &self.aux_dense.b,
        ];
        for l in &self.merged {
            v.push(&l.w);
            v.push(&l.b);
        }
        v.push(&self.out.w);
        v.push(&self.out.b);
        v
    }

    fn pieces_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            &mut self.conv1.k,
            &mut self.conv1.b,
            &mut self.conv2.k,
            &mut self.conv2.b,
            &mut self.aux_dense.w,
            &mut self.aux_dense.b,
        ];
        for l in &mut self.merged {
            v.push(&mut l.w);
            v.push(&mut l.b);
        }
        v.push(&mut self.out.w);
        v.push(&mut self.out.b);
        v
    }
}

impl Net for CnnNet {
    type Cache = CnnCache;

    fn new_cache(&self) -> CnnCache {
        let (c1, p1, c2, p2) = self.stage_dims();
        let ch = self.conv1.out_ch;
        CnnCache {
            conv1_post: vec![0.0; c1 * ch],
            pool1: vec![0.0; p1 * ch],
            conv2_post: vec![0.0; c2 * ch],
            pool2: vec![0.0; p2 * ch],
            aux_post: vec![0.0; self.aux_dense.out_dim],
            merge_in: vec![0.0; self.merged[0].in_dim],
            merged_acts: self.merged.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }

    fn forward(&self, x: &EncodedState, cache: &mut CnnCache) -> f64 {
        let (c1, p1, c2, _p2) = self.stage_dims();
        let ch = self.conv1.out_ch;

        self.conv1.forward(&x.seq, self.seq_len, &mut cache.conv1_post);
        relu_inplace(&mut cache.conv1_post);
        avg_pool(&cache.conv1_post, c1, ch, self.pool_width, &mut cache.pool1);

        self.conv2.forward(&cache.pool1, p1, &mut cache.conv2_post);
        relu_inplace(&mut cache.conv2_post);
        avg_pool(&cache.conv2_post, c2, ch, self.pool_width, &mut cache.pool2);

        self.aux_dense.forward(&x.aux, &mut cache.aux_post);
        relu_inplace(&mut cache.aux_post);

        cache.merge_in[..cache.pool2.len()].copy_from_slice(&cache.pool2);
        cache.merge_in[cache.pool2.len()..].copy_from_slice(&cache.aux_post);

        let mut input: &[f64] = &cache.merge_in;
        for (layer, act) in self.merged.iter().zip(cache.merged_acts.iter_mut()) {
            layer.forward(input, act);
            relu_inplace(act);
            input = act;
        }
        let mut y = [0.0];
        self.out.forward(input, &mut y);
        y[0]
    }

    fn backward(&self, x: &EncodedState, cache: &CnnCache, dy: f64, grads: &mut Self) {
        let (c1, p1, c2, _p2) = self.stage_dims();
        let ch = self.conv1.out_ch;

        let last_act = cache
            .merged_acts
            .last()
            .map(Vec::as_slice)
            .unwrap_or(&cache.merge_in);
        let mut d = vec![0.0; self.out.in_dim];
        self.out.backward(last_act, &[dy], &mut grads.out, Some(&mut d));

        let mut d_merge = vec![0.0; self.merged[0].in_dim];
        for (idx, layer) in self.merged.iter().enumerate().rev() {
            relu_backward(&cache.merged_acts[idx], &mut d);
            if idx == 0 {
                layer.backward(&cache.merge_in, &d, &mut grads.merged[idx], Some(&mut d_merge));
            } else {
                let mut dx = vec![0.0; layer.in_dim];
                layer.backward(
                    &cache.merged_acts[idx - 1],
                    &d,
                    &mut grads.merged[idx],
                    Some(&mut dx),
                );
                d = dx;
            }
        }

        let conv_features = cache.pool2.len();
        let mut d_aux_post = d_merge[conv_features..].to_vec();
        relu_backward(&cache.aux_post, &mut d_aux_post);
        self.aux_dense
            .backward(&x.aux, &d_aux_post, &mut grads.aux_dense, None);

        // Conv branch backward: pool2 -> conv2 -> pool1 -> conv1.
        let mut d_conv2_post = vec![0.0; c2 * ch];
        avg_pool_backward(
            &d_merge[..conv_features],
            c2,
            ch,
            self.pool_width,
            &mut d_conv2_post,
        );
        relu_backward(&cache.conv2_post, &mut d_conv2_post);

        let mut d_pool1 = vec![0.0; p1 * ch];
        self.conv2.backward(
            &cache.pool1,
            p1,
            &d_conv2_post,
            &mut grads.conv2,
            Some(&mut d_pool1),
        );

        let mut d_conv1_post = vec![0.0; c1 * ch];
        avg_pool_backward(&d_pool1, c1, ch, self.pool_width, &mut d_conv1_post);
        relu_backward(&cache.conv1_post, &mut d_conv1_post);
        self.conv1
            .backward(&x.seq, self.seq_len, &d_conv1_post, &mut grads.conv1, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct sliding-window dot-product oracle for the convolution.
    fn conv_oracle(layer: &ConvLayer, input: &[f64], in_steps: usize) -> Vec<f64> {
        let steps = in_steps + 1 - layer.len;
        let mut out = vec![0.0; steps * layer.out_ch];
        for t in 0..steps {
            for oc in 0..layer.out_ch {
                let mut acc = layer.b[oc];
                for dt in 0..layer.len {
                    for ic in 0..layer.in_ch {
                        acc += layer.k[oc * layer.len * layer.in_ch + dt * layer.in_ch + ic]
                            * input[(t + dt) * layer.in_ch + ic];
                    }
                }
                out[t * layer.out_ch + oc] = acc;
            }
        }
        out
    }

    #[test]
    fn conv_matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = ConvLayer::glorot(&mut rng, 4, 3, 8);
        let input: Vec<f64> = (0..20 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; 17 * 8];
        layer.forward(&input, 20, &mut out);
        let oracle = conv_oracle(&layer, &input, 20);
        for (a, b) in out.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn avg_pool_halves_steps() {
        let input = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 3 steps x 2 ch
        let mut out = vec![0.0; 2];
        avg_pool(&input, 3, 2, 2, &mut out);
        assert_eq!(out, vec![2.0, 3.0]); // means of steps 0 and 1, tail dropped
    }

    #[test]
    fn length_check_rejects_short_histories() {
        let cfg = CnnConfig::default();
        assert!(CnnNet::check_length(12, &cfg).is_err());
        assert!(CnnNet::check_length(13, &cfg).is_ok());
        assert!(CnnNet::check_length(20, &cfg).is_ok());
        assert!(CnnNet::check_length(40, &cfg).is_ok());
    }
}

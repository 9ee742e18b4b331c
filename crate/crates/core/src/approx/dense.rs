//! Fully connected layer with hand-rolled forward and reverse passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// `y = W x + b`, row-major weights of shape `out_dim x in_dim`.
/// The same struct doubles as a gradient accumulator of identical shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    /// Glorot-uniform initialised weights with zero biases.
    pub fn glorot<R: Rng>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        DenseLayer {
            w: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(y.len(), self.out_dim);
        for (o, y_o) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *y_o = acc;
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and, when
    /// requested, writes the input gradient into `dx` (overwriting it).
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut DenseLayer, dx: Option<&mut [f64]>) {
        debug_assert_eq!(dy.len(), self.out_dim);
        for (o, d) in dy.iter().enumerate() {
            grad.b[o] += d;
            let row = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (g, v) in row.iter_mut().zip(x) {
                *g += d * v;
            }
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            for (o, d) in dy.iter().enumerate() {
                let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                for (dx_i, w) in dx.iter_mut().zip(row) {
                    *dx_i += d * w;
                }
            }
        }
    }
}

pub fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Masks the gradient through a ReLU given the post-activation values.
pub fn relu_backward(post: &[f64], d: &mut [f64]) {
    for (d_i, p) in d.iter_mut().zip(post) {
        if *p <= 0.0 {
            *d_i = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn forward_matches_manual_product() {
        let layer = DenseLayer {
            w: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            b: vec![0.5, -0.5],
            in_dim: 3,
            out_dim: 2,
        };
        let mut y = [0.0; 2];
        layer.forward(&[1.0, 0.0, -1.0], &mut y);
        assert_abs_diff_eq!(y[0], 1.0 - 3.0 + 0.5);
        assert_abs_diff_eq!(y[1], 4.0 - 6.0 - 0.5);
    }

    #[test]
    fn backward_accumulates_outer_product() {
        let layer = DenseLayer {
            w: vec![1.0, 2.0, 3.0, 4.0],
            b: vec![0.0, 0.0],
            in_dim: 2,
            out_dim: 2,
        };
        let mut grad = DenseLayer::zeros(2, 2);
        let mut dx = [0.0; 2];
        layer.backward(&[0.5, -1.0], &[2.0, 1.0], &mut grad, Some(&mut dx));
        assert_eq!(grad.w, vec![1.0, -2.0, 0.5, -1.0]);
        assert_eq!(grad.b, vec![2.0, 1.0]);
        // dx = W^T dy
        assert_eq!(dx, [2.0 * 1.0 + 1.0 * 3.0, 2.0 * 2.0 + 1.0 * 4.0]);
    }

    #[test]
    fn relu_masks_negatives() {
        let mut v = [1.0, -2.0, 0.0];
        relu_inplace(&mut v);
        assert_eq!(v, [1.0, 0.0, 0.0]);
        let mut d = [5.0, 5.0, 5.0];
        relu_backward(&[1.0, 0.0, 0.0], &mut d);
        assert_eq!(d, [5.0, 0.0, 0.0]);
    }
}

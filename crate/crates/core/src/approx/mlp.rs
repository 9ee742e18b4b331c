//! Multi-layer perceptron over the flat state encoding: a stack of ReLU
//! hidden layers and a linear scalar output.

use super::dense::{relu_backward, relu_inplace, DenseLayer};
use super::encoding::EncodedState;
use super::rmsprop::{Net, ParamVec};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of the MLP regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 3,
            hidden_width: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MlpNet {
    pub hidden: Vec<DenseLayer>,
    pub out: DenseLayer,
}

pub(crate) struct MlpCache {
    /// Post-activation of each hidden layer.
    acts: Vec<Vec<f64>>,
}

impl MlpNet {
    pub fn init<R: Rng>(rng: &mut R, in_dim: usize, cfg: &MlpConfig) -> Self {
        let mut hidden = Vec::with_capacity(cfg.hidden_layers);
        let mut dim = in_dim;
        for _ in 0..cfg.hidden_layers {
            hidden.push(DenseLayer::glorot(rng, dim, cfg.hidden_width));
            dim = cfg.hidden_width;
        }
        MlpNet {
            hidden,
            out: DenseLayer::glorot(rng, dim, 1),
        }
    }
}

impl ParamVec for MlpNet {
    fn pieces(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(2 * self.hidden.len() + 2);
        for l in &self.hidden {
            v.push(l.w.as_slice());
            v.push(l.b.as_slice());
        }
        v.push(self.out.w.as_slice());
        v.push(self.out.b.as_slice());
        v
    }

    fn pieces_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(2 * self.hidden.len() + 2);
        for l in &mut self.hidden {
            v.push(l.w.as_mut_slice());
            v.push(l.b.as_mut_slice());
        }
        v.push(self.out.w.as_mut_slice());
        v.push(self.out.b.as_mut_slice());
        v
    }
}

impl Net for MlpNet {
    type Cache = MlpCache;

    fn new_cache(&self) -> MlpCache {
        MlpCache {
            acts: self.hidden.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }

    fn forward(&self, x: &EncodedState, cache: &mut MlpCache) -> f64 {
        let mut input: &[f64] = &x.flat;
        for (layer, act) in self.hidden.iter().zip(cache.acts.iter_mut()) {
            layer.forward(input, act);
            relu_inplace(act);
            input = act;
        }
        let mut y = [0.0];
        self.out.forward(input, &mut y);
        y[0]
    }

    fn backward(&self, x: &EncodedState, cache: &MlpCache, dy: f64, grads: &mut Self) {
        let last = cache
            .acts
            .last()
            .map(Vec::as_slice)
            .unwrap_or(x.flat.as_slice());
        let mut d = vec![0.0; self.out.in_dim];
        self.out.backward(last, &[dy], &mut grads.out, Some(&mut d));

        for (idx, layer) in self.hidden.iter().enumerate().rev() {
            relu_backward(&cache.acts[idx], &mut d);
            if idx == 0 {
                layer.backward(&x.flat, &d, &mut grads.hidden[idx], None);
            } else {
                let mut dx = vec![0.0; layer.in_dim];
                layer.backward(&cache.acts[idx - 1], &d, &mut grads.hidden[idx], Some(&mut dx));
                d = dx;
            }
        }
    }
}

//! RMSprop parameter updates over piecewise-flattened network parameters,
//! plus the shared minibatch training loop.

use super::encoding::EncodedState;
use super::TrainConfig;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Access to a network's parameters as a fixed sequence of flat slices.
/// Gradients and optimizer state reuse the same structure, so the three can
/// be walked in lockstep.
pub(crate) trait ParamVec {
    fn pieces(&self) -> Vec<&[f64]>;
    fn pieces_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for piece in self.pieces_mut() {
            piece.fill(0.0);
        }
    }
}

/// One RMSprop step: `v <- rho v + (1 - rho) g^2`,
/// `theta <- theta - lr g / (sqrt(v) + eps)`.
pub(crate) fn rmsprop_update<P: ParamVec>(params: &mut P, grads: &P, v: &mut P, cfg: &TrainConfig) {
    let g_pieces = grads.pieces();
    let mut p_pieces = params.pieces_mut();
    let mut v_pieces = v.pieces_mut();
    debug_assert_eq!(g_pieces.len(), p_pieces.len());
    debug_assert_eq!(g_pieces.len(), v_pieces.len());

    for ((p, g), v) in p_pieces.iter_mut().zip(&g_pieces).zip(v_pieces.iter_mut()) {
        for i in 0..p.len() {
            v[i] = cfg.rho * v[i] + (1.0 - cfg.rho) * g[i] * g[i];
            p[i] -= cfg.learning_rate * g[i] / (v[i].sqrt() + cfg.epsilon);
        }
    }
}

/// Everything a network must provide to take part in the shared training
/// loop and the gradient checker.
pub(crate) trait Net: ParamVec + Clone {
    type Cache;

    fn new_cache(&self) -> Self::Cache;
    fn forward(&self, x: &EncodedState, cache: &mut Self::Cache) -> f64;
    /// Accumulates parameter gradients for upstream scalar gradient `dy`,
    /// reusing the forward `cache`.
    fn backward(&self, x: &EncodedState, cache: &Self::Cache, dy: f64, grads: &mut Self);
}

/// Minibatch MSE training with RMSprop. The minibatch order is drawn from
/// the supplied RNG, so invocations with the same RNG state are
/// reproducible. Returns the mean squared error of the final epoch.
pub(crate) fn train_network<N: Net>(
    net: &mut N,
    v: &mut N,
    inputs: &[EncodedState],
    targets: &[f64],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    debug_assert_eq!(inputs.len(), targets.len());
    let n = inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = net.clone();
    let mut cache = net.new_cache();

    let mut last_finite = f64::NAN;
    let mut epoch_loss = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut sq_sum = 0.0;
        for batch in order.chunks(cfg.minibatch.max(1)) {
            grads.zero();
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let q = net.forward(&inputs[i], &mut cache);
                let err = q - targets[i];
                sq_sum += err * err;
                net.backward(&inputs[i], &cache, scale * err, &mut grads);
            }
            rmsprop_update(net, &grads, v, cfg);
        }
        epoch_loss = sq_sum / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                last_loss: last_finite,
            });
        }
        last_finite = epoch_loss;
    }
    Ok(epoch_loss)
}

//! Validates the hand-rolled reverse-mode gradients against central finite
//! differences over every parameter.

use super::encoding::EncodedState;
use super::rmsprop::Net;
use super::{NetRef, Regressor};
use crate::mdp::{Action, AugmentedState};
use crate::{Error, Result};

const FD_STEP: f64 = 1e-5;

/// Compares the network's reverse-mode gradient of the scalar output with
/// central finite differences (step `1e-5`) over all parameters and returns
/// the maximum relative error. Tree regressors are rejected.
pub fn grad_check(reg: &Regressor, x: &AugmentedState, u: Action) -> Result<f64> {
    reg.layout().validate_state(x)?;
    let enc = reg.encode(x, u)?;
    reg.with_net(|net| match net {
        NetRef::Mlp(n) => max_rel_err(n, &enc),
        NetRef::Cnn(n) => max_rel_err(n, &enc),
        NetRef::Lstm(n) => max_rel_err(n, &enc),
    })
    .ok_or_else(|| Error::invalid_argument("gradient check applies to network regressors only"))
}

fn max_rel_err<N: Net>(net: &N, enc: &EncodedState) -> f64 {
    let mut cache = net.new_cache();
    let mut grads = net.clone();
    grads.zero();
    let _ = net.forward(enc, &mut cache);
    net.backward(enc, &cache, 1.0, &mut grads);
    let analytic: Vec<Vec<f64>> = grads.pieces().iter().map(|p| p.to_vec()).collect();

    let mut work = net.clone();
    let mut worst = 0.0f64;
    for (piece_idx, piece) in analytic.iter().enumerate() {
        for j in 0..piece.len() {
            let orig = work.pieces()[piece_idx][j];
            work.pieces_mut()[piece_idx][j] = orig + FD_STEP;
            let f_plus = work.forward(enc, &mut cache);
            work.pieces_mut()[piece_idx][j] = orig - FD_STEP;
            let f_minus = work.forward(enc, &mut cache);
            work.pieces_mut()[piece_idx][j] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * FD_STEP);
            let a = piece[j];
            let scale = a.abs().max(numeric.abs());
            // Below the float floor the quotient only measures
            // finite-difference noise; fall back to the absolute gap.
            let err = if scale < 1e-5 {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / scale
            };
            worst = worst.max(err);
        }
    }
    worst
}

//! Q-function approximators behind a uniform fit/predict interface.
//!
//! Four regressors are available: a plain MLP, a merged 1D-CNN, a merged
//! LSTM, and an ensemble of extremely randomized trees. The networks are
//! trained with RMSprop on minibatches with reverse-mode gradients
//! implemented in this module; the trees are rebuilt from scratch on every
//! fit. All of them consume the encoding defined in [`InputLayout`].

mod cnn;
mod dense;
mod encoding;
mod gradcheck;
mod lstm;
mod mlp;
mod rmsprop;
mod trees;

pub use cnn::{CnnConfig, ConvLayer};
pub use encoding::{encode_state, EncodedState, InputLayout, Scaler};
pub use gradcheck::grad_check;
pub use lstm::{lstm_cell, LstmConfig, LstmParams};
pub use mlp::MlpConfig;
pub use trees::ExtraTreesConfig;

use crate::mdp::{Action, AugmentedState, QFunction};
use crate::util::derive_seed;
use crate::{Error, Result};
use cnn::{CnnCache, CnnNet};
use lstm::{LstmCache, LstmNet};
use mlp::{MlpCache, MlpNet};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmsprop::{train_network, Net, ParamVec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use trees::{TreeDataset, TreesModel};

/// Which approximator backs a regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxKind {
    Mlp,
    Cnn,
    Lstm,
    #[serde(rename = "trees")]
    ExtraTrees,
}

impl ApproxKind {
    pub const ALL: [ApproxKind; 4] = [
        ApproxKind::Mlp,
        ApproxKind::Cnn,
        ApproxKind::Lstm,
        ApproxKind::ExtraTrees,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ApproxKind::Mlp => "mlp",
            ApproxKind::Cnn => "cnn",
            ApproxKind::Lstm => "lstm",
            ApproxKind::ExtraTrees => "trees",
        }
    }
}

impl std::fmt::Display for ApproxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ApproxKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ApproxKind::Mlp),
            "cnn" => Ok(ApproxKind::Cnn),
            "lstm" => Ok(ApproxKind::Lstm),
            "trees" => Ok(ApproxKind::ExtraTrees),
            other => Err(Error::invalid_argument(format!(
                "unknown approximator `{other}`; valid options: mlp, cnn, lstm, trees"
            ))),
        }
    }
}

/// Network training parameters (ignored by the tree ensemble).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// RMSprop decay.
    pub rho: f64,
    pub epsilon: f64,
    pub minibatch: usize,
    /// Epochs per fit call (one fitted-Q iteration).
    pub epochs: usize,
    pub seed: u64,
    /// Re-initialise weights on every fit instead of warm-starting.
    pub cold_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            minibatch: 32,
            epochs: 20,
            seed: 0,
            cold_start: false,
        }
    }
}

/// Shape parameters for all four approximators; each regressor reads only
/// its own section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ApproxConfig {
    pub mlp: MlpConfig,
    pub cnn: CnnConfig,
    pub lstm: LstmConfig,
    pub trees: ExtraTreesConfig,
}

/// Report of one fit call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    /// Mean squared error of the final epoch; `None` for trees.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Model {
    Mlp { net: MlpNet, v: MlpNet },
    Cnn { net: CnnNet, v: CnnNet },
    Lstm { net: LstmNet, v: LstmNet },
    Trees { model: Option<TreesModel> },
}

pub(crate) enum ModelCache {
    Mlp(MlpCache),
    Cnn(CnnCache),
    Lstm(LstmCache),
    Trees,
}

/// A Q-function approximator: one of the four models plus the frozen
/// feature scaling. `predict` is rejected until `fit` has run at least once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    kind: ApproxKind,
    layout: InputLayout,
    train: TrainConfig,
    trees_cfg: ExtraTreesConfig,
    model: Model,
    scaler: Option<Scaler>,
    trained: bool,
    fit_count: u64,
}

impl Regressor {
    /// Builds an untrained regressor for the given input layout.
    pub fn new(
        kind: ApproxKind,
        layout: InputLayout,
        cfg: &ApproxConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, kind as u64));
        let model = match kind {
            ApproxKind::Mlp => {
                let net = MlpNet::init(&mut rng, layout.flat_dim(), &cfg.mlp);
                let mut v = net.clone();
                v.zero();
                Model::Mlp { net, v }
            }
            ApproxKind::Cnn => {
                let net = CnnNet::init(
                    &mut rng,
                    layout.h,
                    layout.n_series(),
                    layout.aux_dim(),
                    &cfg.cnn,
                )?;
                let mut v = net.clone();
                v.zero();
                Model::Cnn { net, v }
            }
            ApproxKind::Lstm => {
                let d_cell = if cfg.lstm.d_cell == 0 { 8 } else { cfg.lstm.d_cell };
                let net = LstmNet::init(
                    &mut rng,
                    layout.h,
                    layout.n_series(),
                    layout.aux_dim(),
                    d_cell,
                    cfg.lstm.merge_width,
                );
                let mut v = net.clone();
                v.zero();
                Model::Lstm { net, v }
            }
            ApproxKind::ExtraTrees => Model::Trees { model: None },
        };
        Ok(Regressor {
            kind,
            layout,
            train,
            trees_cfg: cfg.trees,
            model,
            scaler: None,
            trained: false,
            fit_count: 0,
        })
    }

    pub fn kind(&self) -> ApproxKind {
        self.kind
    }

    pub fn layout(&self) -> InputLayout {
        self.layout
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Recomputes the min-max feature statistics from the given states and
    /// freezes them until the next refresh. Called once per fitted-Q run.
    pub fn refresh_scaler<'a>(&mut self, states: impl Iterator<Item = &'a AugmentedState>) {
        self.scaler = Some(Scaler::from_states(&self.layout, states));
    }

    fn scaler_or_identity(&self) -> Scaler {
        self.scaler
            .clone()
            .unwrap_or_else(|| Scaler::identity(&self.layout))
    }

    /// Encodes a state with the frozen scaling (identity until the first
    /// fit or scaler refresh).
    pub fn encode(&self, x: &AugmentedState, u: Action) -> Result<EncodedState> {
        self.layout.validate_state(x)?;
        let mut enc = encode_state(&self.layout, &self.scaler_or_identity(), x);
        enc.set_action(u);
        Ok(enc)
    }

    /// Fits the regressor on `(state, action) -> target` examples.
    ///
    /// Networks warm-start from their previous parameters (unless
    /// `cold_start` is set); the tree ensemble is rebuilt from scratch.
    pub fn fit(&mut self, data: &[(AugmentedState, Action, f64)]) -> Result<FitReport> {
        if data.is_empty() {
            return Err(Error::invalid_argument("fit needs a non-empty dataset"));
        }
        if let Some((_, _, bad)) = data.iter().find(|(_, _, t)| !t.is_finite()) {
            return Err(Error::invalid_argument(format!(
                "fit targets must be finite, got {bad}"
            )));
        }
        for (x, _, _) in data {
            self.layout.validate_state(x)?;
        }
        if self.scaler.is_none() {
            self.refresh_scaler(data.iter().map(|(x, _, _)| x));
        }
        let scaler = self.scaler_or_identity();
        let inputs: Vec<EncodedState> = data
            .iter()
            .map(|(x, u, _)| {
                let mut enc = encode_state(&self.layout, &scaler, x);
                enc.set_action(*u);
                enc
            })
            .collect();
        let targets: Vec<f64> = data.iter().map(|(_, _, t)| *t).collect();
        self.fit_encoded(&inputs, &targets)
    }

    /// Hot-path fit over pre-encoded inputs (used by the fitted-Q loop so
    /// encodings are computed once per run, not once per iteration).
    pub(crate) fn fit_encoded(
        &mut self,
        inputs: &[EncodedState],
        targets: &[f64],
    ) -> Result<FitReport> {
        debug_assert_eq!(inputs.len(), targets.len());
        if inputs.is_empty() {
            return Err(Error::invalid_argument("fit needs a non-empty dataset"));
        }
        let fit_idx = self.fit_count;
        let shuffle_seed = derive_seed(derive_seed(self.train.seed, inputs.len() as u64), fit_idx);
        let report = match &mut self.model {
            Model::Mlp { net, v } => {
                if self.train.cold_start {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(self.train.seed, 1000 + fit_idx));
                    *net = MlpNet::init(
                        &mut rng,
                        self.layout.flat_dim(),
                        &MlpConfig {
                            hidden_layers: net.hidden.len(),
                            hidden_width: net.hidden.first().map_or(50, |l| l.out_dim),
                        },
                    );
                    v.zero();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
                let loss = train_network(net, v, inputs, targets, &self.train, &mut rng)?;
                FitReport {
                    final_loss: Some(loss),
                }
            }
            Model::Cnn { net, v } => {
                let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
                let loss = train_network(net, v, inputs, targets, &self.train, &mut rng)?;
                FitReport {
                    final_loss: Some(loss),
                }
            }
            Model::Lstm { net, v } => {
                let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
                let loss = train_network(net, v, inputs, targets, &self.train, &mut rng)?;
                FitReport {
                    final_loss: Some(loss),
                }
            }
            Model::Trees { model } => {
                let dataset = TreeDataset {
                    rows: inputs.iter().map(|e| e.flat.as_slice()).collect(),
                    targets,
                };
                let cfg = ExtraTreesConfig {
                    seed: derive_seed(self.trees_cfg.seed, fit_idx),
                    ..self.trees_cfg
                };
                *model = Some(TreesModel::fit(&dataset, &cfg));
                FitReport { final_loss: None }
            }
        };
        self.trained = true;
        self.fit_count += 1;
        Ok(report)
    }

    pub(crate) fn new_cache(&self) -> ModelCache {
        match &self.model {
            Model::Mlp { net, .. } => ModelCache::Mlp(net.new_cache()),
            Model::Cnn { net, .. } => ModelCache::Cnn(net.new_cache()),
            Model::Lstm { net, .. } => ModelCache::Lstm(net.new_cache()),
            Model::Trees { .. } => ModelCache::Trees,
        }
    }

    /// Deterministic forward pass over a pre-encoded input.
    pub(crate) fn predict_encoded(&self, enc: &EncodedState, cache: &mut ModelCache) -> Result<f64> {
        if !self.trained {
            return Err(Error::invalid_state("regressor has not been fitted yet"));
        }
        Ok(match (&self.model, cache) {
            (Model::Mlp { net, .. }, ModelCache::Mlp(c)) => net.forward(enc, c),
            (Model::Cnn { net, .. }, ModelCache::Cnn(c)) => net.forward(enc, c),
            (Model::Lstm { net, .. }, ModelCache::Lstm(c)) => net.forward(enc, c),
            (Model::Trees { model }, ModelCache::Trees) => model
                .as_ref()
                .expect("trained tree model present")
                .predict(&enc.flat),
            _ => {
                return Err(Error::invalid_state(
                    "prediction cache does not match the model kind",
                ))
            }
        })
    }

    /// Predicts the Q-value of a state-action pair.
    pub fn predict(&self, x: &AugmentedState, u: Action) -> Result<f64> {
        let enc = self.encode(x, u)?;
        let mut cache = self.new_cache();
        self.predict_encoded(&enc, &mut cache)
    }

    /// Writes a versioned checkpoint of all parameters, the frozen scaler,
    /// and the supplied configuration hash.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_string(),
            regressor: self.clone(),
        };
        let json = serde_json::to_vec(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Loads a checkpoint, returning the regressor and the stored hash.
    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Regressor, String)> {
        let bytes = std::fs::read(path)?;
        let file: CheckpointFile = serde_json::from_slice(&bytes)?;
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::invalid_state(format!(
                "checkpoint version {} not supported (expected {CHECKPOINT_VERSION})",
                file.version
            )));
        }
        Ok((file.regressor, file.config_hash))
    }

    pub(crate) fn with_net<R>(&self, f: impl FnOnce(NetRef<'_>) -> R) -> Option<R> {
        match &self.model {
            Model::Mlp { net, .. } => Some(f(NetRef::Mlp(net))),
            Model::Cnn { net, .. } => Some(f(NetRef::Cnn(net))),
            Model::Lstm { net, .. } => Some(f(NetRef::Lstm(net))),
            Model::Trees { .. } => None,
        }
    }
}

pub(crate) enum NetRef<'a> {
    Mlp(&'a MlpNet),
    Cnn(&'a CnnNet),
    Lstm(&'a LstmNet),
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config_hash: String,
    regressor: Regressor,
}

impl QFunction for Regressor {
    fn q_value(&self, x: &AugmentedState, u: Action) -> Result<f64> {
        self.predict(x, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{HistoryWindow, TimeSlot};

    fn layout() -> InputLayout {
        InputLayout {
            h: 2,
            obs_dim: 1,
            exo_dim: 0,
        }
    }

    fn state(q: u16, obs: f64) -> AugmentedState {
        let mut hist = HistoryWindow::zeroed(2, 1, 0);
        hist.obs[0][0] = obs;
        AugmentedState {
            time: TimeSlot::new(0, q).unwrap(),
            hist,
            x_exo: vec![],
        }
    }

    fn constant_dataset(c: f64) -> Vec<(AugmentedState, Action, f64)> {
        (1..=24u16)
            .flat_map(|q| {
                [
                    (state(q, q as f64 % 5.0), Action::Off, c),
                    (state(q, q as f64 % 3.0), Action::On, c),
                ]
            })
            .collect()
    }

    #[test]
    fn predict_before_fit_is_rejected() {
        for kind in [ApproxKind::Mlp, ApproxKind::ExtraTrees] {
            let reg = Regressor::new(
                kind,
                layout(),
                &ApproxConfig::default(),
                TrainConfig::default(),
            )
            .unwrap();
            assert!(matches!(
                reg.predict(&state(1, 0.0), Action::Off),
                Err(Error::InvalidState(_))
            ));
        }
    }

    #[test]
    fn trees_fit_constant_targets_exactly() {
        let mut reg = Regressor::new(
            ApproxKind::ExtraTrees,
            layout(),
            &ApproxConfig::default(),
            TrainConfig::default(),
        )
        .unwrap();
        reg.fit(&constant_dataset(0.625)).unwrap();
        assert_eq!(reg.predict(&state(7, 1.0), Action::On).unwrap(), 0.625);
        assert_eq!(reg.predict(&state(90, 9.0), Action::Off).unwrap(), 0.625);
    }

    #[test]
    fn mlp_converges_on_constant_targets() {
        let mut reg = Regressor::new(
            ApproxKind::Mlp,
            layout(),
            &ApproxConfig {
                mlp: MlpConfig {
                    hidden_layers: 2,
                    hidden_width: 16,
                },
                ..ApproxConfig::default()
            },
            TrainConfig {
                epochs: 200,
                learning_rate: 3e-3,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let report = reg.fit(&constant_dataset(0.4)).unwrap();
        let loss = report.final_loss.unwrap();
        assert!(loss < 1e-4, "MSE after 200 epochs was {loss}");
    }

    #[test]
    fn predictions_are_deterministic() {
        let mut reg = Regressor::new(
            ApproxKind::Lstm,
            InputLayout {
                h: 4,
                obs_dim: 1,
                exo_dim: 0,
            },
            &ApproxConfig::default(),
            TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let mut hist = HistoryWindow::zeroed(4, 1, 0);
        hist.obs[1][0] = 2.0;
        let x = AugmentedState {
            time: TimeSlot::new(0, 5).unwrap(),
            hist,
            x_exo: vec![],
        };
        let data = vec![
            (x.clone(), Action::Off, 1.0),
            (x.clone(), Action::On, -1.0),
        ];
        reg.fit(&data).unwrap();
        let a = reg.predict(&x, Action::On).unwrap();
        let b = reg.predict(&x, Action::On).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_rejects_empty_and_non_finite_targets() {
        let mut reg = Regressor::new(
            ApproxKind::ExtraTrees,
            layout(),
            &ApproxConfig::default(),
            TrainConfig::default(),
        )
        .unwrap();
        assert!(reg.fit(&[]).is_err());
        assert!(reg
            .fit(&[(state(1, 0.0), Action::Off, f64::NAN)])
            .is_err());
    }

    #[test]
    fn checkpoint_round_trip_reproduces_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");

        for kind in ApproxKind::ALL {
            let l = InputLayout {
                h: 16,
                obs_dim: 1,
                exo_dim: 0,
            };
            let mut reg = Regressor::new(
                kind,
                l,
                &ApproxConfig::default(),
                TrainConfig {
                    epochs: 2,
                    ..TrainConfig::default()
                },
            )
            .unwrap();
            let data: Vec<(AugmentedState, Action, f64)> = (1..=20u16)
                .map(|q| {
                    let mut hist = HistoryWindow::zeroed(16, 1, 0);
                    hist.obs[0][0] = f64::from(q);
                    (
                        AugmentedState {
                            time: TimeSlot::new(0, q).unwrap(),
                            hist,
                            x_exo: vec![],
                        },
                        Action::from_on(q % 2 == 0),
                        f64::from(q) * 0.125,
                    )
                })
                .collect();
            reg.fit(&data).unwrap();
            reg.save_checkpoint(&path, "deadbeef").unwrap();
            let (back, hash) = Regressor::load_checkpoint(&path).unwrap();
            assert_eq!(hash, "deadbeef");

            for (x, u, _) in data.iter().take(5) {
                let a = reg.predict(x, *u).unwrap();
                let b = back.predict(x, *u).unwrap();
                assert!(
                    (a - b).abs() <= 1e-15 * a.abs().max(1.0),
                    "{kind}: {a} vs {b}"
                );
            }
        }
    }
}

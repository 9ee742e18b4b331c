//! The `selftest` subcommand: exercises the numeric oracles and gradient
//! checks and prints one PASS/FAIL line per check.

use loadshift_core::approx::{
    grad_check, lstm_cell, ApproxConfig, ApproxKind, ConvLayer, InputLayout, LstmConfig,
    LstmParams, Regressor, TrainConfig,
};
use loadshift_core::envs::{building_step, BuildingParams, BuildingState, TankParams, TankState};
use loadshift_core::envs::{tank_step, SPECIFIC_HEAT_J_PER_KG_C, WATER_KG_PER_L};
use loadshift_core::mdp::{
    exploration_prob, Action, AugmentedState, HistoryWindow, PhysicalAction, TimeSlot,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS  {name} ({detail})");
        } else {
            println!("FAIL  {name} ({detail})");
            self.failures += 1;
        }
    }
}

fn random_state(layout: &InputLayout, seed: u64) -> AugmentedState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = HistoryWindow::zeroed(layout.h, layout.obs_dim, layout.exo_dim);
    for t in 0..layout.h {
        hist.u_phys_hist[t] = rng.gen_range(0.0..1.0);
        hist.u_hist[t] = Action::from_on(rng.gen_bool(0.5));
        for v in hist.obs[t].iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in hist.exo_hist[t].iter_mut() {
            *v = rng.gen_range(-5.0..15.0);
        }
    }
    AugmentedState {
        time: TimeSlot::new(0, rng.gen_range(1..=96)).unwrap(),
        hist,
        x_exo: (0..layout.exo_dim).map(|_| rng.gen_range(-5.0..15.0)).collect(),
    }
}

/// Runs every check; returns the number of failures.
pub fn run() -> usize {
    let mut report = Report { failures: 0 };

    // LSTM cell closed forms: zero parameters halve the gates.
    {
        let p = LstmParams::zeros(3, 2);
        let c_prev = vec![0.4, -0.8, 2.0];
        let (h, c) = lstm_cell(&[0.0, 0.0], &[0.0; 3], &c_prev, &p).unwrap();
        let max_err = (0..3)
            .map(|j| {
                let ce = (c[j] - 0.5 * c_prev[j]).abs();
                let he = (h[j] - 0.5 * (0.5 * c_prev[j]).tanh()).abs();
                ce.max(he)
            })
            .fold(0.0f64, f64::max);
        report.check("lstm_cell zero-parameter closed form", max_err <= 1e-12, format!("max abs err {max_err:.2e}"));
    }

    // LSTM cell gate saturation preserves memory.
    {
        let mut p = LstmParams::zeros(2, 1);
        p.b_f = vec![50.0; 2];
        p.b_i = vec![-50.0; 2];
        let c_prev = vec![0.7, -1.3];
        let (_, c) = lstm_cell(&[0.3], &[0.1, 0.2], &c_prev, &p).unwrap();
        let err = (c[0] - c_prev[0]).abs().max((c[1] - c_prev[1]).abs());
        report.check("lstm_cell saturated-gate memory", err <= 1e-9, format!("max abs err {err:.2e}"));
    }

    // Convolution against a direct sliding-window oracle.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layer = ConvLayer::glorot(&mut rng, 4, 3, 8);
        let input: Vec<f64> = (0..20 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; layer.out_steps(20) * 8];
        layer.forward(&input, 20, &mut out);
        let mut max_err = 0.0f64;
        for t in 0..layer.out_steps(20) {
            for oc in 0..8 {
                let mut acc = layer.b[oc];
                for dt in 0..4 {
                    for ic in 0..3 {
                        acc += layer.k[oc * 12 + dt * 3 + ic] * input[(t + dt) * 3 + ic];
                    }
                }
                max_err = max_err.max((acc - out[t * 8 + oc]).abs());
            }
        }
        report.check("conv1d sliding-window oracle", max_err <= 1e-12, format!("max abs err {max_err:.2e}"));
    }

    // Gradient checks for the three networks.
    let layout = InputLayout {
        h: 20,
        obs_dim: 0,
        exo_dim: 1,
    };
    let shapes = ApproxConfig {
        lstm: LstmConfig {
            d_cell: 8,
            ..LstmConfig::default()
        },
        ..ApproxConfig::default()
    };
    for kind in [ApproxKind::Mlp, ApproxKind::Cnn, ApproxKind::Lstm] {
        let reg = Regressor::new(kind, layout, &shapes, TrainConfig::default()).unwrap();
        let x = random_state(&layout, 97);
        let err = grad_check(&reg, &x, Action::On).unwrap();
        report.check(
            &format!("{kind} gradient vs central finite differences"),
            err < 1e-4,
            format!("max rel err {err:.2e}"),
        );
    }

    // Building equilibrium fixed point.
    {
        let p = BuildingParams::default();
        let s = BuildingState::uniform(14.0);
        let next = building_step(s, PhysicalAction::OFF, 14.0, 0.0, &p);
        let err = (next.t_air_c - 14.0).abs().max((next.t_mass_c - 14.0).abs());
        report.check("building equilibrium fixed point", err <= 1e-12, format!("max abs err {err:.2e}"));
    }

    // Tank enthalpy balance over one lossless slot with a draw.
    {
        let p = TankParams {
            ua_loss_w_per_c: 0.0,
            ..TankParams::default()
        };
        let s = TankState::uniform(60.0);
        let next = tank_step(&s, PhysicalAction::OFF, 10.0, &p).unwrap();
        let removed = s.enthalpy_j(&p) - next.enthalpy_j(&p);
        let expected = 10.0 * WATER_KG_PER_L * SPECIFIC_HEAT_J_PER_KG_C * (60.0 - p.t_inlet_c);
        let rel = (removed - expected).abs() / expected;
        report.check("tank draw enthalpy balance", rel < 1e-6, format!("rel err {rel:.2e}"));
    }

    // Exploration schedule closed form.
    {
        let ok = exploration_prob(0) == 1.0
            && exploration_prob(1) == 0.75
            && exploration_prob(4) == 0.31640625;
        report.check("exploration schedule 0.75^d", ok, "d = 0, 1, 4".to_string());
    }

    if report.failures == 0 {
        println!("selftest: all checks passed");
    } else {
        println!("selftest: {} check(s) FAILED", report.failures);
    }
    report.failures
}

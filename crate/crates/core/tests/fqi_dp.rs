//! Fitted Q-iteration against an exhaustive dynamic-programming oracle on a
//! hand-built deterministic two-state, two-action MDP.
//!
//! The toy device has a hidden binary state `s` carried in the observation.
//! In `s = 1` the backup forces the physical action ON regardless of the
//! request, so costs depend on the state; requesting ON drives the system
//! to `s = 1`, requesting OFF toggles it. Prices are dyadic rationals and
//! the tree regressor memorises every distinct sample exactly, so the
//! Q-table must match value iteration bit for bit at every sweep.

use loadshift_core::approx::{
    ApproxConfig, ApproxKind, ExtraTreesConfig, InputLayout, Regressor, TrainConfig,
};
use loadshift_core::fqi::{run_fqi, run_fqi_traced, Forecast, FqiConfig};
use loadshift_core::mdp::{
    greedy_action, Action, AugmentedState, HistoryWindow, PhysicalAction, PriceProfile, TimeSlot,
    Transition,
};

const QUARTERS: usize = 96;
const HORIZON: usize = 4;

fn toy_state(q: u16, s: f64) -> AugmentedState {
    let mut hist = HistoryWindow::zeroed(1, 1, 0);
    hist.obs[0][0] = s;
    AugmentedState {
        time: TimeSlot::new(0, q).unwrap(),
        hist,
        x_exo: vec![],
    }
}

fn next_state_bit(s: usize, u: Action) -> usize {
    match u {
        Action::On => 1,
        Action::Off => 1 - s,
    }
}

fn u_phys_of(s: usize, u: Action) -> f64 {
    if s == 1 {
        1.0
    } else {
        u.as_f64()
    }
}

fn toy_batch(lambda: &[f64; QUARTERS]) -> Vec<Transition> {
    let _ = lambda; // costs are computed inside run_fqi from u_phys and prices
    let mut batch = Vec::new();
    for q in 1..=QUARTERS as u16 {
        for s in 0..2usize {
            for u in Action::BOTH {
                let x = toy_state(q, s as f64);
                let s_next = next_state_bit(s, u);
                let x_next = toy_state(x.time.next().quarter(), s_next as f64);
                // keep the day index consistent with the wrap
                let x_next = AugmentedState {
                    time: x.time.next(),
                    ..x_next
                };
                batch.push(
                    Transition::new(
                        x,
                        u,
                        x_next,
                        PhysicalAction::new(u_phys_of(s, u)).unwrap(),
                    )
                    .unwrap(),
                );
            }
        }
    }
    batch
}

/// Finite-horizon value iteration over the toy MDP; `table[q-1][s][u]`.
fn dp_tables(lambda: &[f64; QUARTERS], sweeps: usize) -> Vec<Vec<[[f64; 2]; 2]>> {
    let cost = |q: usize, s: usize, u: Action| u_phys_of(s, u) * lambda[q];
    let mut tables: Vec<Vec<[[f64; 2]; 2]>> = Vec::with_capacity(sweeps + 1);
    tables.push(vec![[[0.0; 2]; 2]; QUARTERS]);
    for n in 1..=sweeps {
        let prev = &tables[n - 1];
        let mut table = vec![[[0.0; 2]; 2]; QUARTERS];
        for q in 0..QUARTERS {
            let q_next = (q + 1) % QUARTERS;
            for s in 0..2 {
                for (ui, u) in Action::BOTH.iter().enumerate() {
                    let s_next = next_state_bit(s, *u);
                    let lookahead =
                        prev[q_next][s_next][0].min(prev[q_next][s_next][1]);
                    table[q][s][ui] = cost(q, s, *u) + lookahead;
                }
            }
        }
        tables.push(table);
    }
    tables
}

fn exact_regressor(seed: u64) -> Regressor {
    Regressor::new(
        ApproxKind::ExtraTrees,
        InputLayout {
            h: 1,
            obs_dim: 1,
            exo_dim: 0,
        },
        &ApproxConfig {
            trees: ExtraTreesConfig {
                n_trees: 32,
                n_min: 2,
                seed,
                ..ExtraTreesConfig::default()
            },
            ..ApproxConfig::default()
        },
        TrainConfig::default(),
    )
    .unwrap()
}

fn toy_fqi_config() -> FqiConfig {
    FqiConfig {
        iterations: HORIZON,
        h: 1,
        p_rated_kw: 4.0,
        dt_hours: 0.25,
    }
}

/// Dyadic price profile with both signs.
fn mixed_prices() -> [f64; QUARTERS] {
    let mut lambda = [0.0; QUARTERS];
    for (q, v) in lambda.iter_mut().enumerate() {
        *v = (((q + 1) * 3 % 8) as f64 - 2.0) / 16.0;
    }
    lambda
}

#[test]
fn fqi_reproduces_value_iteration_exactly_at_every_sweep() {
    let lambda = mixed_prices();
    let batch = toy_batch(&lambda);
    let tables = dp_tables(&lambda, HORIZON);
    let prices = PriceProfile::new(lambda.to_vec()).unwrap();

    let mut reg = exact_regressor(7);
    let mut checked = 0usize;
    run_fqi_traced(
        &batch,
        &prices,
        &Forecast::empty(),
        &toy_fqi_config(),
        &mut reg,
        |n, reg| {
            for q in 1..=QUARTERS as u16 {
                for s in 0..2usize {
                    for (ui, u) in Action::BOTH.iter().enumerate() {
                        let predicted = reg.predict(&toy_state(q, s as f64), *u).unwrap();
                        let expected = tables[n][(q - 1) as usize][s][ui];
                        assert_eq!(
                            predicted, expected,
                            "sweep {n}, quarter {q}, state {s}, action {u:?}"
                        );
                        checked += 1;
                    }
                }
            }
        },
    )
    .unwrap();
    assert_eq!(checked, HORIZON * QUARTERS * 4);
}

#[test]
fn q_values_accumulate_monotonically_for_nonnegative_costs() {
    let mut lambda = mixed_prices();
    for v in lambda.iter_mut() {
        *v = v.abs(); // non-negative dyadic prices
    }
    let batch = toy_batch(&lambda);
    let prices = PriceProfile::new(lambda.to_vec()).unwrap();

    let mut reg = exact_regressor(3);
    let mut previous = vec![[[0.0f64; 2]; 2]; QUARTERS];
    run_fqi_traced(
        &batch,
        &prices,
        &Forecast::empty(),
        &toy_fqi_config(),
        &mut reg,
        |_, reg| {
            for q in 1..=QUARTERS as u16 {
                for s in 0..2usize {
                    for (ui, u) in Action::BOTH.iter().enumerate() {
                        let value = reg.predict(&toy_state(q, s as f64), *u).unwrap();
                        assert!(value >= previous[(q - 1) as usize][s][ui]);
                        previous[(q - 1) as usize][s][ui] = value;
                    }
                }
            }
        },
    )
    .unwrap();
}

#[test]
fn zero_prices_collapse_q_to_zero_and_greedy_to_off() {
    let lambda = [0.0; QUARTERS];
    let batch = toy_batch(&lambda);
    let prices = PriceProfile::flat(0.0);

    let mut reg = exact_regressor(11);
    run_fqi(
        &batch,
        &prices,
        &Forecast::empty(),
        &toy_fqi_config(),
        &mut reg,
    )
    .unwrap();

    for q in [1u16, 17, 96] {
        for s in 0..2usize {
            let x = toy_state(q, s as f64);
            assert_eq!(reg.predict(&x, Action::Off).unwrap(), 0.0);
            assert_eq!(reg.predict(&x, Action::On).unwrap(), 0.0);
            assert_eq!(greedy_action(&reg, &x).unwrap(), Action::Off);
        }
    }
}

#[test]
fn batch_order_does_not_change_the_result() {
    let lambda = mixed_prices();
    let mut batch = toy_batch(&lambda);
    let prices = PriceProfile::new(lambda.to_vec()).unwrap();

    let mut reg_sorted = exact_regressor(5);
    run_fqi(
        &batch,
        &prices,
        &Forecast::empty(),
        &toy_fqi_config(),
        &mut reg_sorted,
    )
    .unwrap();

    // A deterministic scramble of the tuple order.
    for i in (1..batch.len()).rev() {
        batch.swap(i, (i * 7919) % (i + 1));
    }
    let mut reg_scrambled = exact_regressor(5);
    run_fqi(
        &batch,
        &prices,
        &Forecast::empty(),
        &toy_fqi_config(),
        &mut reg_scrambled,
    )
    .unwrap();

    for q in 1..=QUARTERS as u16 {
        for s in 0..2usize {
            for u in Action::BOTH {
                let a = reg_sorted.predict(&toy_state(q, s as f64), u).unwrap();
                let b = reg_scrambled.predict(&toy_state(q, s as f64), u).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}

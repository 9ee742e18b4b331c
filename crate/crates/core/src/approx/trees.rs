//! Ensemble of extremely randomized regression trees.
//!
//! Each tree is grown on the full training set. At every node one uniform
//! random cut-point is drawn per candidate feature inside the node's value
//! range; the split with the largest variance reduction wins. Nodes stop
//! splitting below `n_min` distinct samples and leaves predict the mean
//! target. Counting *distinct* samples keeps the ensemble invariant under
//! duplication of the whole training set.

use crate::util::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtraTreesConfig {
    pub n_trees: usize,
    /// Minimum number of distinct samples a node needs to be split.
    pub n_min: usize,
    /// Candidate features per split; `None` examines all of them
    /// (the usual regression setting).
    pub k_features: Option<usize>,
    pub seed: u64,
}

impl Default for ExtraTreesConfig {
    fn default() -> Self {
        ExtraTreesConfig {
            n_trees: 100,
            n_min: 5,
            k_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// A fitted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TreesModel {
    trees: Vec<Tree>,
    n_features: usize,
}

/// Borrowed training matrix: `rows[i]` is the flat feature vector of
/// sample `i`.
pub(crate) struct TreeDataset<'a> {
    pub rows: Vec<&'a [f64]>,
    pub targets: &'a [f64],
}

impl TreesModel {
    pub fn fit(data: &TreeDataset<'_>, cfg: &ExtraTreesConfig) -> Self {
        let n_features = data.rows.first().map_or(0, |r| r.len());
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
                grow_tree(data, cfg, n_features, &mut rng)
            })
            .collect();
        TreesModel { trees, n_features }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features);
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }
}

fn grow_tree(
    data: &TreeDataset<'_>,
    cfg: &ExtraTreesConfig,
    n_features: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = Vec::new();
    nodes.push(Node::Leaf { value: 0.0 });
    let all: Vec<u32> = (0..data.rows.len() as u32).collect();
    let mut stack = vec![(0usize, all)];

    while let Some((node_idx, indices)) = stack.pop() {
        let mean = mean_target(data, &indices);
        if !should_split(data, cfg, &indices) {
            nodes[node_idx] = Node::Leaf { value: mean };
            continue;
        }

        match best_split(data, cfg, n_features, &indices, rng) {
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = indices
                    .iter()
                    .copied()
                    .partition(|&i| data.rows[i as usize][feature] < threshold);
                let left = nodes.len() as u32;
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len() as u32;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[node_idx] = Node::Split {
                    feature: feature as u32,
                    threshold,
                    left,
                    right,
                };
                stack.push((left as usize, left_idx));
                stack.push((right as usize, right_idx));
            }
            None => {
                nodes[node_idx] = Node::Leaf { value: mean };
            }
        }
    }
    Tree { nodes }
}

fn mean_target(data: &TreeDataset<'_>, indices: &[u32]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    indices.iter().map(|&i| data.targets[i as usize]).sum::<f64>() / indices.len() as f64
}

/// Split when the node holds at least `n_min` distinct feature rows and the
/// targets are not all equal.
fn should_split(data: &TreeDataset<'_>, cfg: &ExtraTreesConfig, indices: &[u32]) -> bool {
    if indices.len() < cfg.n_min || indices.len() < 2 {
        return false;
    }
    let first_target = data.targets[indices[0] as usize];
    if indices
        .iter()
        .all(|&i| data.targets[i as usize] == first_target)
    {
        return false;
    }
    distinct_rows_at_least(data, indices, cfg.n_min)
}

fn distinct_rows_at_least(data: &TreeDataset<'_>, indices: &[u32], n: usize) -> bool {
    let mut seen = HashSet::with_capacity(n);
    for &i in indices {
        if seen.insert(row_hash(data.rows[i as usize])) && seen.len() >= n {
            return true;
        }
    }
    false
}

fn row_hash(row: &[f64]) -> u64 {
    // FNV-1a over the raw bit patterns; collisions only risk an early leaf.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for v in row {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Draws one uniform threshold per candidate feature and keeps the one with
/// the largest variance reduction. Returns `None` when no feature varies.
fn best_split(
    data: &TreeDataset<'_>,
    cfg: &ExtraTreesConfig,
    n_features: usize,
    indices: &[u32],
    rng: &mut ChaCha8Rng,
) -> Option<(usize, f64)> {
    let candidates: Vec<usize> = match cfg.k_features {
        Some(k) if k < n_features => {
            rand::seq::index::sample(rng, n_features, k).into_vec()
        }
        _ => (0..n_features).collect(),
    };

    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, score)
    for feature in candidates {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &i in indices {
            let v = data.rows[i as usize][feature];
            min = min.min(v);
            max = max.max(v);
        }
        if !(max > min) {
            continue;
        }
        let threshold = rng.gen_range(min..max);

        let mut n_l = 0usize;
        let mut sum_l = 0.0;
        let mut sq_l = 0.0;
        let mut sum_r = 0.0;
        let mut sq_r = 0.0;
        for &i in indices {
            let y = data.targets[i as usize];
            if data.rows[i as usize][feature] < threshold {
                n_l += 1;
                sum_l += y;
                sq_l += y * y;
            } else {
                sum_r += y;
                sq_r += y * y;
            }
        }
        let n_r = indices.len() - n_l;
        if n_l == 0 || n_r == 0 {
            continue;
        }
        let sse = |sum: f64, sq: f64, n: usize| sq - sum * sum / n as f64;
        let parent = sse(sum_l + sum_r, sq_l + sq_r, indices.len());
        let score = parent - sse(sum_l, sq_l, n_l) - sse(sum_r, sq_r, n_r);
        if best.map_or(true, |(_, _, s)| score > s) {
            best = Some((feature, threshold, score));
        }
    }
    best.map(|(f, t, _)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset<'a>(xs: &'a [Vec<f64>], ys: &'a [f64]) -> TreeDataset<'a> {
        TreeDataset {
            rows: xs.iter().map(Vec::as_slice).collect(),
            targets: ys,
        }
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let ys = vec![3.25; 20];
        let model = TreesModel::fit(&dataset(&xs, &ys), &ExtraTreesConfig::default());
        assert_eq!(model.predict(&[4.5, 1.0]), 3.25);
        assert_eq!(model.predict(&[100.0, -3.0]), 3.25);
    }

    #[test]
    fn two_distinct_points_interpolate_exactly_with_n_min_2() {
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = vec![-1.5, 2.5];
        let cfg = ExtraTreesConfig {
            n_min: 2,
            ..ExtraTreesConfig::default()
        };
        let model = TreesModel::fit(&dataset(&xs, &ys), &cfg);
        assert_eq!(model.predict(&[0.0]), -1.5);
        assert_eq!(model.predict(&[1.0]), 2.5);
    }

    #[test]
    fn predictions_stay_inside_target_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let ys: Vec<f64> = (0..60).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let model = TreesModel::fit(&dataset(&xs, &ys), &ExtraTreesConfig::default());
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..50 {
            let q = model.predict(&[rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]);
            assert!(q >= lo && q <= hi);
        }
    }

    #[test]
    fn duplicating_the_training_set_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let ys: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();

        let mut xs2 = xs.clone();
        xs2.extend(xs.iter().cloned());
        let mut ys2 = ys.clone();
        ys2.extend(ys.iter().cloned());

        let cfg = ExtraTreesConfig {
            n_trees: 25,
            ..ExtraTreesConfig::default()
        };
        let single = TreesModel::fit(&dataset(&xs, &ys), &cfg);
        let doubled = TreesModel::fit(&dataset(&xs2, &ys2), &cfg);
        // Identical tree structure; leaf means may differ by summation
        // order only.
        for probe in 0..40 {
            let x = vec![probe as f64 / 40.0, (probe * 13 % 40) as f64 / 40.0];
            let (a, b) = (single.predict(&x), doubled.predict(&x));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn fit_is_reproducible_per_seed() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin(), i as f64]).collect();
        let ys: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        let cfg = ExtraTreesConfig {
            n_trees: 10,
            seed: 5,
            ..ExtraTreesConfig::default()
        };
        let a = TreesModel::fit(&dataset(&xs, &ys), &cfg);
        let b = TreesModel::fit(&dataset(&xs, &ys), &cfg);
        assert_eq!(a, b);
    }
}

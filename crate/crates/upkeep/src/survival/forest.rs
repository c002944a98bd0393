//! Random-forest regressor predicting a component's curve parameter `beta`
//! from its features `(weibull_shape, weibull_scale, repair_cost,
//! inspect_cost)`.
//!
//! Plain bagged CART: each tree is grown on a bootstrap resample with
//! variance-reduction (MSE) splits over all four features, mean-leaf
//! predictions, and the forest prediction is the arithmetic mean over trees.
//! Tree growth is deterministic given the bootstrap seed; trees train in
//! parallel with per-tree seeds, so the model is reproducible regardless of
//! thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ComponentSpec;
use crate::seeding::derive_seed;

use super::SurvivalError;

/// Feature schema, in input order.
pub const FEATURE_NAMES: [&str; 4] = [
    "weibull_shape",
    "weibull_scale",
    "repair_cost",
    "inspect_cost",
];

/// Number of input features.
pub const N_FEATURES: usize = 4;

pub const FOREST_SCHEMA: &str = "forest/1";

/// Extracts the regressor's input vector from a component spec.
pub fn component_features(spec: &ComponentSpec) -> [f64; N_FEATURES] {
    [
        spec.weibull_shape,
        spec.weibull_scale,
        spec.repair_cost as f64,
        spec.inspect_cost as f64,
    ]
}

/// Forest hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree; nodes are stored in a flat arena, index 0 is the
/// root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A single-leaf tree; used in tests that need hand-built forests.
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, features: &[f64; N_FEATURES]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Trained forest with its schema and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema_version: String,
    pub feature_names: Vec<String>,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Hand-built forest from explicit trees; prediction schema is the
    /// standard component feature set.
    pub fn from_trees(trees: Vec<Tree>) -> Self {
        Self {
            schema_version: FOREST_SCHEMA.to_string(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            config: ForestConfig {
                n_trees: trees.len(),
                max_depth: 0,
                min_leaf: 1,
            },
            seed: 0,
            trees,
        }
    }

    /// Mean of the tree predictions, unclamped. Unanimous trees return the
    /// shared value directly so degenerate (constant-target) forests predict
    /// it exactly.
    pub fn predict_raw(&self, features: &[f64; N_FEATURES]) -> f64 {
        let first = self.trees[0].predict(features);
        let mut total = first;
        let mut unanimous = true;
        for tree in &self.trees[1..] {
            let p = tree.predict(features);
            unanimous &= p == first;
            total += p;
        }
        if unanimous {
            first
        } else {
            total / self.trees.len() as f64
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), SurvivalError> {
        std::fs::write(path, serde_json::to_string(self).map_err(json_err)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SurvivalError> {
        let model: ForestModel =
            serde_json::from_str(&std::fs::read_to_string(path)?).map_err(json_err)?;
        if model.schema_version != FOREST_SCHEMA {
            return Err(SurvivalError::Parse(format!(
                "forest schema {} (expected {FOREST_SCHEMA})",
                model.schema_version
            )));
        }
        if model.feature_names != FEATURE_NAMES {
            return Err(SurvivalError::Parse(format!(
                "forest feature schema {:?} (expected {FEATURE_NAMES:?})",
                model.feature_names
            )));
        }
        if model.trees.is_empty() {
            return Err(SurvivalError::Parse("forest has no trees".into()));
        }
        Ok(model)
    }
}

fn json_err(e: serde_json::Error) -> SurvivalError {
    SurvivalError::Parse(e.to_string())
}

/// Trains a bagged CART forest on `(features, beta)` rows. Deterministic for
/// a fixed `(dataset, cfg, seed)`.
pub fn train_forest(
    dataset: &[([f64; N_FEATURES], f64)],
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, SurvivalError> {
    if dataset.is_empty() {
        return Err(SurvivalError::NotEnoughData { needed: 1, got: 0 });
    }
    if cfg.n_trees == 0 || cfg.min_leaf == 0 {
        return Err(SurvivalError::InvalidParameter(
            "n_trees and min_leaf must be positive".into(),
        ));
    }
    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xf0e5, t as u64]));
            let indices: Vec<usize> = (0..dataset.len())
                .map(|_| rng.random_range(0..dataset.len()))
                .collect();
            grow_tree(dataset, indices, cfg)
        })
        .collect();
    Ok(ForestModel {
        schema_version: FOREST_SCHEMA.to_string(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        config: *cfg,
        seed,
        trees,
    })
}

/// Forest prediction for one component, clamped to the admissible range
/// `beta <= 0`.
pub fn predict_beta(model: &ForestModel, spec: &ComponentSpec) -> f64 {
    model.predict_raw(&component_features(spec)).min(0.0)
}

fn grow_tree(dataset: &[([f64; N_FEATURES], f64)], indices: Vec<usize>, cfg: &ForestConfig) -> Tree {
    let mut nodes = Vec::new();
    build_node(dataset, indices, cfg, 0, &mut nodes);
    Tree { nodes }
}

fn mean_target(dataset: &[([f64; N_FEATURES], f64)], indices: &[usize]) -> f64 {
    indices.iter().map(|&i| dataset[i].1).sum::<f64>() / indices.len() as f64
}

/// Recursively builds the subtree for `indices`, returning its node id.
fn build_node(
    dataset: &[([f64; N_FEATURES], f64)],
    indices: Vec<usize>,
    cfg: &ForestConfig,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let leaf = |nodes: &mut Vec<Node>, value: f64| {
        nodes.push(Node::Leaf { value });
        nodes.len() - 1
    };
    if depth >= cfg.max_depth || indices.len() < 2 * cfg.min_leaf {
        return leaf(nodes, mean_target(dataset, &indices));
    }
    let first = dataset[indices[0]].1;
    if indices.iter().all(|&i| dataset[i].1 == first) {
        return leaf(nodes, first);
    }
    let Some((feature, threshold)) = best_split(dataset, &indices, cfg.min_leaf) else {
        return leaf(nodes, mean_target(dataset, &indices));
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| dataset[i].0[feature] <= threshold);
    let id = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder, patched below
    let left = build_node(dataset, left_idx, cfg, depth + 1, nodes);
    let right = build_node(dataset, right_idx, cfg, depth + 1, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// Exhaustive variance-reduction split search over all features and all
/// distinct-value midpoints, honoring the minimum leaf size.
fn best_split(
    dataset: &[([f64; N_FEATURES], f64)],
    indices: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = indices.len();
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, score)
    let mut order: Vec<usize> = indices.to_vec();
    for feature in 0..N_FEATURES {
        order.sort_by(|&a, &b| {
            dataset[a].0[feature]
                .partial_cmp(&dataset[b].0[feature])
                .expect("finite features")
        });
        // Prefix sums over the sorted targets let every cut be scored in
        // O(1): variance reduction maximizes sumL^2/nL + sumR^2/nR.
        let mut prefix = 0.0;
        let total: f64 = order.iter().map(|&i| dataset[i].1).sum();
        for cut in 1..n {
            prefix += dataset[order[cut - 1]].1;
            if cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let lo = dataset[order[cut - 1]].0[feature];
            let hi = dataset[order[cut]].0[feature];
            if lo == hi {
                continue;
            }
            let score =
                prefix * prefix / cut as f64 + (total - prefix) * (total - prefix) / (n - cut) as f64;
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((feature, 0.5 * (lo + hi), score));
            }
        }
    }
    best.map(|(feature, threshold, _)| (feature, threshold))
}

/// Coefficient of determination of `predicted` against `actual`.
pub fn r_squared(predicted: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let ss_res: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Smooth synthetic target over the feature box, for regression checks.
    fn synthetic_row(rng: &mut ChaCha8Rng) -> ([f64; N_FEATURES], f64) {
        let shape = 0.8 + 2.2 * rng.random::<f64>();
        let scale = 30.0 + 90.0 * rng.random::<f64>();
        let repair = 50.0 + 450.0 * rng.random::<f64>();
        let inspect = 1.0 + 4.0 * rng.random::<f64>();
        // Monotone-ish "budget responsiveness": cheap repairs on short-lived
        // components respond the most.
        let beta = -(2e-3) * (60.0 / scale) * (200.0 / repair) * (1.0 + 0.1 * shape);
        ([shape, scale, repair, inspect], beta)
    }

    #[test]
    fn identical_rows_predict_the_shared_target_exactly() {
        let row = ([1.5, 60.0, 200.0, 3.0], -0.002);
        let dataset = vec![row; 40];
        let model = train_forest(&dataset, &ForestConfig::default(), 1).unwrap();
        assert_eq!(model.predict_raw(&row.0), -0.002);
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let model = ForestModel::from_trees(vec![Tree::leaf(-1.0), Tree::leaf(-3.0)]);
        assert_eq!(model.predict_raw(&[0.0; N_FEATURES]), -2.0);
    }

    #[test]
    fn predict_beta_clamps_to_nonpositive() {
        let model = ForestModel::from_trees(vec![Tree::leaf(0.001), Tree::leaf(0.001)]);
        let spec = ComponentSpec::new("f", 1.5, 60.0, 200, 3).unwrap();
        assert_eq!(predict_beta(&model, &spec), 0.0);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dataset: Vec<_> = (0..60).map(|_| synthetic_row(&mut rng)).collect();
        let cfg = ForestConfig {
            n_trees: 20,
            ..ForestConfig::default()
        };
        let a = train_forest(&dataset, &cfg, 9).unwrap();
        let b = train_forest(&dataset, &cfg, 9).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&dataset, &cfg, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fits_a_smooth_function_out_of_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let train: Vec<_> = (0..160).map(|_| synthetic_row(&mut rng)).collect();
        let test: Vec<_> = (0..40).map(|_| synthetic_row(&mut rng)).collect();
        let model = train_forest(&train, &ForestConfig::default(), 3).unwrap();
        let predicted: Vec<f64> = test.iter().map(|(f, _)| model.predict_raw(f)).collect();
        let actual: Vec<f64> = test.iter().map(|(_, t)| *t).collect();
        let r2 = r_squared(&predicted, &actual);
        assert!(r2 >= 0.8, "held-out R^2 = {r2}");
    }

    #[test]
    fn save_load_round_trip_and_schema_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dataset: Vec<_> = (0..30).map(|_| synthetic_row(&mut rng)).collect();
        let cfg = ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        };
        let model = train_forest(&dataset, &cfg, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        model.save(&path).unwrap();
        let loaded = ForestModel::load(&path).unwrap();
        assert_eq!(model, loaded);

        // Corrupting the schema version must be rejected.
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc["schema_version"] = serde_json::Value::String("forest/0".into());
        std::fs::write(&path, doc.to_string()).unwrap();
        assert!(ForestModel::load(&path).is_err());
    }

    #[test]
    fn rejects_empty_dataset() {
        assert!(matches!(
            train_forest(&[], &ForestConfig::default(), 0),
            Err(SurvivalError::NotEnoughData { .. })
        ));
    }
}

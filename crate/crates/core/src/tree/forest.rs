use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{check_data, fit_tree_on_sample, RegressionTree, SplitMode, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    RandomForest,
    ExtraTrees,
}

impl EnsembleMode {
    pub fn split_mode(self) -> SplitMode {
        match self {
            EnsembleMode::RandomForest => SplitMode::Exhaustive,
            EnsembleMode::ExtraTrees => SplitMode::RandomThreshold,
        }
    }
}

impl FromStr for EnsembleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "random_forest" | "rf" => Ok(EnsembleMode::RandomForest),
            "extra_trees" | "extratrees" => Ok(EnsembleMode::ExtraTrees),
            other => Err(Error::config(format!("unknown ensemble mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub mode: EnsembleMode,
}

impl ForestParams {
    /// Random forest with bootstrap resampling and exhaustive splits.
    pub fn random_forest(n_estimators: usize, tree: TreeParams) -> Self {
        ForestParams {
            n_estimators,
            tree,
            bootstrap: true,
            mode: EnsembleMode::RandomForest,
        }
    }

    /// Extra-trees on the full sample with one random threshold per
    /// candidate feature.
    pub fn extra_trees(n_estimators: usize, tree: TreeParams) -> Self {
        ForestParams {
            n_estimators,
            tree,
            bootstrap: false,
            mode: EnsembleMode::ExtraTrees,
        }
    }
}

/// Averaging ensemble of regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    params: ForestParams,
    tree_seeds: Vec<u64>,
    trees: Vec<RegressionTree>,
}

/// Per-tree seeds drawn from the master seed before any tree is grown, so
/// parallel fitting matches sequential fitting exactly.
pub fn tree_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| rng.next_u64()).collect()
}

pub fn fit_forest(rows: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest> {
    check_data(rows, y)?;
    params.tree.validate()?;
    if params.n_estimators == 0 {
        return Err(Error::config("n_estimators must be at least 1"));
    }
    let seeds = tree_seeds(params.tree.seed, params.n_estimators);
    let n = rows.len();
    let trees = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = TreeParams { seed, ..params.tree };
            fit_tree_on_sample(rows, y, sample, &tree_params, &mut rng, params.mode.split_mode())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        params: *params,
        tree_seeds: seeds,
        trees,
    })
}

impl Forest {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn width(&self) -> usize {
        self.trees[0].width()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: row.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// Same forest with trees in a different order.
    pub fn permuted(&self, order: &[usize]) -> Forest {
        Forest {
            params: self.params,
            tree_seeds: order.iter().map(|&i| self.tree_seeds[i]).collect(),
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::cart::{fit_tree_seeded, MaxFeatures};

    fn noisy(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(0.0..1.0)])
            .collect();
        let y = x.iter().map(|r| 3.0 * r[0] + r[1] * r[1] + rng.random_range(-1.0..1.0)).collect();
        (x, y)
    }

    #[test]
    fn single_tree_forest_equals_cart() {
        let (x, y) = noisy(60);
        let tree = TreeParams::default();
        let params = ForestParams {
            n_estimators: 1,
            tree,
            bootstrap: false,
            mode: EnsembleMode::RandomForest,
        };
        let forest = fit_forest(&x, &y, &params).unwrap();
        let cart = fit_tree_seeded(&x, &y, &tree, SplitMode::Exhaustive).unwrap();
        assert_eq!(forest.predict(&x).unwrap(), cart.predict(&x).unwrap());
        assert_eq!(forest.trees()[0].nodes(), cart.nodes());
    }

    #[test]
    fn constant_targets() {
        let (x, _) = noisy(30);
        let y = vec![7.5; 30];
        for mode in [EnsembleMode::RandomForest, EnsembleMode::ExtraTrees] {
            let params = ForestParams {
                n_estimators: 5,
                tree: TreeParams {
                    max_features: MaxFeatures::Sqrt,
                    ..TreeParams::default()
                },
                bootstrap: true,
                mode,
            };
            let f = fit_forest(&x, &y, &params).unwrap();
            assert!(f.predict(&x).unwrap().iter().all(|&p| p == 7.5));
        }
    }

    #[test]
    fn seeds_control_determinism() {
        let (x, y) = noisy(80);
        let mut params = ForestParams::random_forest(10, TreeParams {
            max_features: MaxFeatures::Sqrt,
            seed: 5,
            ..TreeParams::default()
        });
        let a = fit_forest(&x, &y, &params).unwrap();
        let b = fit_forest(&x, &y, &params).unwrap();
        assert_eq!(a, b);
        params.tree.seed = 6;
        let c = fit_forest(&x, &y, &params).unwrap();
        assert_ne!(a.trees(), c.trees());
    }

    #[test]
    fn zero_estimators_rejected() {
        let (x, y) = noisy(10);
        let params = ForestParams::extra_trees(0, TreeParams::default());
        assert!(matches!(fit_forest(&x, &y, &params), Err(Error::Config(_))));
    }
}

//! Regression trees and the ensembles built from them.

pub mod boost;
pub mod cart;
pub mod forest;

pub use boost::{fit_adaboost_r2, fit_adaboost_r2_traced, weighted_median, AdaBoost, BoostLoss, BoostParams, BoostRound, BoostTrace};
pub use cart::{fit_tree, fit_tree_on_sample, fit_tree_seeded, MaxFeatures, Node, RegressionTree, SplitMode, TreeParams};
pub use forest::{fit_forest, tree_seeds, EnsembleMode, Forest, ForestParams};

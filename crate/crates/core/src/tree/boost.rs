//! AdaBoost.R2 for regression.
//!
//! Each round fits a shallow tree on a bootstrap sample drawn according to
//! the current row weights, scores every training row with a loss
//! normalised by the largest absolute error, and shrinks the weights of
//! rows the tree already fits well. Rounds stop early once the weighted
//! average loss reaches 0.5. Predictions are the weighted median of the
//! per-round trees, weighted by `learning_rate * ln(1 / beta)`.

use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cart::{check_data, fit_tree_on_sample, RegressionTree, SplitMode, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostLoss {
    Linear,
    Square,
    Exponential,
}

impl BoostLoss {
    /// Loss of a row whose error is `ratio` of the round's maximum error.
    pub fn apply(self, ratio: f64) -> f64 {
        match self {
            BoostLoss::Linear => ratio,
            BoostLoss::Square => ratio * ratio,
            BoostLoss::Exponential => 1.0 - (-ratio).exp(),
        }
    }
}

impl FromStr for BoostLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(BoostLoss::Linear),
            "square" => Ok(BoostLoss::Square),
            "exponential" => Ok(BoostLoss::Exponential),
            other => Err(Error::config(format!("unknown boosting loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    #[serde(with = "crate::hexfloat")]
    pub learning_rate: f64,
    pub base: TreeParams,
    pub loss: BoostLoss,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 50,
            learning_rate: 1.0,
            base: TreeParams {
                max_depth: Some(3),
                ..TreeParams::default()
            },
            loss: BoostLoss::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    params: BoostParams,
    estimators: Vec<RegressionTree>,
    #[serde(with = "crate::hexfloat::vec")]
    estimator_weights: Vec<f64>,
}

/// What happened in one boosting round, for inspection and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    pub weights_before: Vec<f64>,
    pub train_predictions: Vec<f64>,
    pub average_loss: f64,
    /// `None` when the round was discarded (average loss ≥ 0.5).
    pub estimator_weight: Option<f64>,
    pub weights_after: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    pub rounds: Vec<BoostRound>,
}

pub fn fit_adaboost_r2(rows: &[Vec<f64>], y: &[f64], params: &BoostParams) -> Result<AdaBoost> {
    fit(rows, y, params, None)
}

/// Like [`fit_adaboost_r2`] but also records every round's weights.
pub fn fit_adaboost_r2_traced(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &BoostParams,
) -> Result<(AdaBoost, BoostTrace)> {
    let mut trace = BoostTrace::default();
    let model = fit(rows, y, params, Some(&mut trace))?;
    Ok((model, trace))
}

fn fit(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &BoostParams,
    mut trace: Option<&mut BoostTrace>,
) -> Result<AdaBoost> {
    check_data(rows, y)?;
    params.base.validate()?;
    if rows.len() < 2 {
        return Err(Error::precondition("AdaBoost.R2 needs at least 2 rows"));
    }
    if params.n_estimators == 0 {
        return Err(Error::config("n_estimators must be at least 1"));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::config(format!(
            "learning_rate must be positive, got {}",
            params.learning_rate
        )));
    }

    let n = rows.len();
    let lr = params.learning_rate;
    let mut master = ChaCha8Rng::seed_from_u64(params.base.seed);
    let mut weights = vec![1.0 / n as f64; n];
    let mut estimators = Vec::new();
    let mut estimator_weights = Vec::new();

    for _ in 0..params.n_estimators {
        let round_seed = master.next_u64();
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed);
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::Training(format!("invalid boosting weights: {e}")))?;
        let sample: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let tree_params = TreeParams {
            seed: round_seed,
            ..params.base
        };
        let tree = fit_tree_on_sample(rows, y, sample, &tree_params, &mut rng, SplitMode::Exhaustive)?;
        let preds: Vec<f64> = rows.iter().map(|r| tree.predict_unchecked(r)).collect();
        let errors: Vec<f64> = preds.iter().zip(y).map(|(p, t)| (p - t).abs()).collect();
        let max_error = errors.iter().cloned().fold(0.0, f64::max);

        let weights_before = trace.as_ref().map(|_| weights.clone());
        let mut record = |avg: f64, w: Option<f64>, after: &[f64]| {
            if let Some(t) = trace.as_deref_mut() {
                t.rounds.push(BoostRound {
                    weights_before: weights_before.clone().unwrap_or_default(),
                    train_predictions: preds.clone(),
                    average_loss: avg,
                    estimator_weight: w,
                    weights_after: after.to_vec(),
                });
            }
        };

        if max_error == 0.0 {
            // perfect fit: keep it with unit weight and stop
            record(0.0, Some(1.0), &weights);
            estimators.push(tree);
            estimator_weights.push(1.0);
            break;
        }

        let losses: Vec<f64> = errors.iter().map(|e| params.loss.apply(e / max_error)).collect();
        let average_loss: f64 = weights.iter().zip(&losses).map(|(w, l)| w * l).sum();

        if average_loss <= 0.0 {
            record(average_loss, Some(1.0), &weights);
            estimators.push(tree);
            estimator_weights.push(1.0);
            break;
        }
        if average_loss >= 0.5 {
            // discard unless nothing has been kept yet
            if estimators.is_empty() {
                record(average_loss, Some(1.0), &weights);
                estimators.push(tree);
                estimator_weights.push(1.0);
            } else {
                record(average_loss, None, &weights);
            }
            break;
        }

        let beta = average_loss / (1.0 - average_loss);
        let estimator_weight = lr * (1.0 / beta).ln();
        for (w, l) in weights.iter_mut().zip(&losses) {
            *w *= beta.powf((1.0 - l) * lr);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        record(average_loss, Some(estimator_weight), &weights);
        estimators.push(tree);
        estimator_weights.push(estimator_weight);
    }

    Ok(AdaBoost {
        params: *params,
        estimators,
        estimator_weights,
    })
}

/// Smallest value whose cumulative weight reaches half the total weight.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let half = 0.5 * weights.iter().sum::<f64>();
    let mut cumulative = 0.0;
    for &i in &order {
        cumulative += weights[i];
        if cumulative >= half {
            return values[i];
        }
    }
    values[*order.last().expect("weighted median of nothing")]
}

impl AdaBoost {
    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    pub fn estimators(&self) -> &[RegressionTree] {
        &self.estimators
    }

    pub fn estimator_weights(&self) -> &[f64] {
        &self.estimator_weights
    }

    pub fn width(&self) -> usize {
        self.estimators[0].width()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: row.len(),
            });
        }
        let preds: Vec<f64> = self.estimators.iter().map(|t| t.predict_unchecked(row)).collect();
        Ok(weighted_median(&preds, &self.estimator_weights))
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_basics() {
        assert_eq!(weighted_median(&[3.0], &[0.2]), 3.0);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[0.1, 0.1, 5.0]), 3.0);
        assert_eq!(weighted_median(&[5.0, 1.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn single_round_is_base_tree() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let params = BoostParams {
            n_estimators: 1,
            ..BoostParams::default()
        };
        let m = fit_adaboost_r2(&x, &y, &params).unwrap();
        assert_eq!(m.estimators().len(), 1);
        assert_eq!(m.predict(&x).unwrap(), m.estimators()[0].predict(&x).unwrap());
    }

    #[test]
    fn perfect_fit_stops_after_one_round() {
        // any bootstrap sample holding both levels yields a separating split
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 10.0 }).collect();
        let params = BoostParams {
            n_estimators: 20,
            base: TreeParams::default(),
            ..BoostParams::default()
        };
        let (m, trace) = fit_adaboost_r2_traced(&x, &y, &params).unwrap();
        assert_eq!(m.estimators().len(), 1);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(m.predict(&x).unwrap(), y);

        let c = fit_adaboost_r2(&x, &[4.0; 20], &params).unwrap();
        assert_eq!(c.estimators().len(), 1);
        assert!(c.predict(&x).unwrap().iter().all(|&p| p == 4.0));
    }

    #[test]
    fn errors() {
        let params = BoostParams::default();
        assert!(fit_adaboost_r2(&[vec![1.0]], &[1.0], &params).is_err());
        let bad = BoostParams {
            learning_rate: 0.0,
            ..params
        };
        assert!(fit_adaboost_r2(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &bad).is_err());
    }
}

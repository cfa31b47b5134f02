use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many features a node examines when searching for a split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Fraction(#[serde(with = "crate::hexfloat")] f64),
}

impl MaxFeatures {
    /// Resolved feature count for `width` columns, never below 1.
    pub fn resolve(&self, width: usize) -> Result<usize> {
        let k = match *self {
            MaxFeatures::All => width,
            MaxFeatures::Sqrt => (width as f64).sqrt().floor() as usize,
            MaxFeatures::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(format!("max_features fraction must lie in (0, 1], got {f}")));
                }
                (f * width as f64).floor() as usize
            }
        };
        Ok(k.clamp(1, width.max(1)))
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::config(format!("max_features must be all, sqrt or a fraction, got `{other}`")))
                .and_then(|f| {
                    let mf = MaxFeatures::Fraction(f);
                    mf.resolve(1).map(|_| mf)
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::config("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        self.max_features.resolve(1)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Scan every midpoint between consecutive distinct values.
    Exhaustive,
    /// Draw one uniform threshold per candidate feature.
    RandomThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        #[serde(with = "crate::hexfloat")]
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        #[serde(with = "crate::hexfloat")]
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
    },
}

/// Binary regression tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    width: usize,
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.width {
            return Err(Error::Shape {
                expected: self.width,
                got: row.len(),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

pub(crate) fn check_data(rows: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    let width = match rows.first() {
        Some(r) => r.len(),
        None => return Err(Error::precondition("cannot fit a tree on empty data")),
    };
    if rows.len() != y.len() {
        return Err(Error::precondition(format!(
            "{} rows but {} targets",
            rows.len(),
            y.len()
        )));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Shape {
            expected: width,
            got: bad.len(),
        });
    }
    if width == 0 {
        return Err(Error::precondition("rows have no features"));
    }
    Ok(width)
}

/// Fits a tree on all rows using `params.seed` for feature sampling.
pub fn fit_tree_seeded(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &TreeParams,
    mode: SplitMode,
) -> Result<RegressionTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    fit_tree(rows, y, params, &mut rng, mode)
}

pub fn fit_tree<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    y: &[f64],
    params: &TreeParams,
    rng: &mut R,
    mode: SplitMode,
) -> Result<RegressionTree> {
    let sample: Vec<usize> = (0..rows.len()).collect();
    fit_tree_on_sample(rows, y, sample, params, rng, mode)
}

/// Fits on the multiset of row indices in `sample` (duplicates allowed, as
/// produced by bootstrap resampling).
pub fn fit_tree_on_sample<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    y: &[f64],
    mut sample: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
    mode: SplitMode,
) -> Result<RegressionTree> {
    let width = check_data(rows, y)?;
    params.validate()?;
    if sample.is_empty() {
        return Err(Error::precondition("cannot fit a tree on an empty sample"));
    }
    let mut builder = Builder {
        rows,
        y,
        params,
        mode,
        n_candidates: params.max_features.resolve(width)?,
        width,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(sample.len()),
    };
    builder.grow(&mut sample, 0, rng);
    Ok(RegressionTree {
        width,
        nodes: builder.nodes,
    })
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    mode: SplitMode,
    n_candidates: usize,
    width: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Relative tolerance under which two split scores count as tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-9;

impl Builder<'_> {
    fn grow<R: Rng + ?Sized>(&mut self, sample: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let n = sample.len();
        let mean = sample.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, samples: n });

        let (lo, hi) = sample.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.y[i]), hi.max(self.y[i]))
        });
        let can_split = lo < hi
            && n >= self.params.min_samples_split
            && n >= 2 * self.params.min_samples_leaf
            && self.params.max_depth.is_none_or(|d| depth < d);
        if !can_split {
            return id;
        }

        let Some(best) = self.best_split(sample, mean, rng) else {
            return id;
        };

        // partition in place: left block first
        let mut split_at = 0;
        for k in 0..n {
            if self.rows[sample[k]][best.feature] <= best.threshold {
                sample.swap(k, split_at);
                split_at += 1;
            }
        }
        let (left_sample, right_sample) = sample.split_at_mut(split_at);
        let left = self.grow(left_sample, depth + 1, rng);
        let right = self.grow(right_sample, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples: n,
        };
        id
    }

    fn best_split<R: Rng + ?Sized>(&mut self, sample: &[usize], mean: f64, rng: &mut R) -> Option<Candidate> {
        let node_sse: f64 = sample.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let tol = TIE_TOLERANCE * node_sse;

        let mut order: Vec<usize> = (0..self.width).collect();
        if self.n_candidates < self.width {
            order.shuffle(rng);
        }

        let mut per_feature = Vec::with_capacity(self.n_candidates);
        let mut visited = 0;
        for &f in &order {
            if visited == self.n_candidates {
                break;
            }
            let (lo, hi) = sample.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.rows[i][f];
                (lo.min(v), hi.max(v))
            });
            if lo >= hi {
                continue;
            }
            visited += 1;
            let found = match self.mode {
                SplitMode::Exhaustive => self.scan_feature(sample, f, mean, tol),
                SplitMode::RandomThreshold => {
                    let threshold = rng.random_range(lo..hi);
                    self.score_threshold(sample, f, threshold, mean)
                }
            };
            per_feature.extend(found);
        }

        // lowest feature index wins among ties, independent of visit order
        per_feature.sort_by_key(|c| c.feature);
        let mut best: Option<Candidate> = None;
        for c in per_feature {
            if best.is_none_or(|b| c.score > b.score + tol) {
                best = Some(c);
            }
        }
        best
    }

    /// Best midpoint split on one feature. Scores are the reduction in
    /// squared error, computed on mean-centred targets.
    fn scan_feature(&mut self, sample: &[usize], f: usize, mean: f64, tol: f64) -> Option<Candidate> {
        let min_leaf = self.params.min_samples_leaf;
        self.scratch.clear();
        self.scratch
            .extend(sample.iter().map(|&i| (self.rows[i][f], self.y[i] - mean)));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = self.scratch.len();
        let total: f64 = self.scratch.iter().map(|p| p.1).sum();
        let mut left_sum = 0.0;
        let mut best: Option<Candidate> = None;
        for k in 1..n {
            left_sum += self.scratch[k - 1].1;
            let (prev, next) = (self.scratch[k - 1].0, self.scratch[k].0);
            if prev == next || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
            if best.is_none_or(|b| score > b.score + tol) {
                best = Some(Candidate {
                    score,
                    feature: f,
                    threshold: midpoint(prev, next),
                });
            }
        }
        best
    }

    fn score_threshold(&self, sample: &[usize], f: usize, threshold: f64, mean: f64) -> Option<Candidate> {
        let (mut nl, mut sl, mut sr) = (0usize, 0.0, 0.0);
        for &i in sample {
            let r = self.y[i] - mean;
            if self.rows[i][f] <= threshold {
                nl += 1;
                sl += r;
            } else {
                sr += r;
            }
        }
        let nr = sample.len() - nl;
        let min_leaf = self.params.min_samples_leaf;
        if nl < min_leaf || nr < min_leaf {
            return None;
        }
        Some(Candidate {
            score: sl * sl / nl as f64 + sr * sr / nr as f64,
            feature: f,
            threshold,
        })
    }
}

/// Midpoint that always separates `a < b`, even when they are adjacent
/// floats.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn constant_target_single_leaf() {
        let t = fit_tree_seeded(&col(&[1., 2., 3.]), &[4., 4., 4.], &TreeParams::default(), SplitMode::Exhaustive)
            .unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[100.0]).unwrap(), 4.0);
    }

    #[test]
    fn step_function_split_at_midpoint() {
        let x = col(&[0., 1., 2., 3.]);
        let y = [0., 0., 10., 10.];
        let t = fit_tree_seeded(&x, &y, &TreeParams::default(), SplitMode::Exhaustive).unwrap();
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 1.5);
            }
            _ => panic!("root should split"),
        }
        assert_eq!(t.predict(&x).unwrap(), y.to_vec());
        assert_eq!(t.leaf_count(), 2);
    }

    #[test]
    fn min_leaf_equal_to_n_forces_leaf() {
        let x = col(&[0., 1., 2., 3.]);
        let y = [1., 2., 3., 6.];
        let params = TreeParams {
            min_samples_leaf: 4,
            ..TreeParams::default()
        };
        let t = fit_tree_seeded(&x, &y, &params, SplitMode::Exhaustive).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_row(&[0.0]).unwrap(), 3.0);
    }

    #[test]
    fn max_depth_respected() {
        let x = col(&(0..32).map(f64::from).collect::<Vec<_>>());
        let y: Vec<f64> = (0..32).map(|i| (i * i) as f64).collect();
        let params = TreeParams {
            max_depth: Some(3),
            ..TreeParams::default()
        };
        let t = fit_tree_seeded(&x, &y, &params, SplitMode::Exhaustive).unwrap();
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn random_threshold_mode_predicts_within_range() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y: Vec<f64> = (0..50).map(|i| (i as f64).sin() * 10.0 + 20.0).collect();
        let t = fit_tree_seeded(&x, &y, &TreeParams::default(), SplitMode::RandomThreshold).unwrap();
        let (lo, hi) = (y.iter().cloned().fold(f64::MAX, f64::min), y.iter().cloned().fold(f64::MIN, f64::max));
        for p in t.predict(&x).unwrap() {
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn errors() {
        assert!(fit_tree_seeded(&[], &[], &TreeParams::default(), SplitMode::Exhaustive).is_err());
        let t = fit_tree_seeded(&col(&[1., 2.]), &[1., 2.], &TreeParams::default(), SplitMode::Exhaustive).unwrap();
        assert!(matches!(t.predict_row(&[1.0, 2.0]), Err(Error::Shape { expected: 1, got: 2 })));
        let bad = TreeParams {
            min_samples_split: 1,
            ..TreeParams::default()
        };
        assert!(fit_tree_seeded(&col(&[1., 2.]), &[1., 2.], &bad, SplitMode::Exhaustive).is_err());
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(14).unwrap(), 3);
        assert_eq!(MaxFeatures::Fraction(0.75).resolve(14).unwrap(), 10);
        assert_eq!(MaxFeatures::Fraction(0.01).resolve(14).unwrap(), 1);
        assert_eq!(MaxFeatures::All.resolve(14).unwrap(), 14);
        assert!(MaxFeatures::Fraction(1.5).resolve(3).is_err());
        assert_eq!("0.75".parse::<MaxFeatures>().unwrap(), MaxFeatures::Fraction(0.75));
    }

    #[test]
    fn midpoint_of_adjacent_floats_separates() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
    }
}

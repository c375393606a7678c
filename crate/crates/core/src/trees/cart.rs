//! CART regression trees grown by greedy variance reduction.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{validate_training_data, TrainConfig};
use crate::error::{Error, Result};

/// Supplies the candidate feature set per split.
pub trait FeatureSampler {
    fn sample(&mut self, n_features: usize) -> Vec<usize>;
}

/// Every feature is a candidate at every split.
pub struct AllFeatures;

impl FeatureSampler for AllFeatures {
    fn sample(&mut self, n_features: usize) -> Vec<usize> {
        (0..n_features).collect()
    }
}

/// `mtry` distinct features drawn uniformly per split.
pub struct UniformSubset<'a, R: rand::Rng> {
    pub mtry: usize,
    pub rng: &'a mut R,
}

impl<'a, R: rand::Rng> FeatureSampler for UniformSubset<'a, R> {
    fn sample(&mut self, n_features: usize) -> Vec<usize> {
        let m = self.mtry.min(n_features);
        rand::seq::index::sample(self.rng, n_features, m).into_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        prediction: f64,
        n_samples: usize,
    },
}

/// A fitted regression tree. Splits sit at midpoints between adjacent
/// distinct feature values; each leaf predicts the mean response of the
/// training rows routed to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Grow a tree on the full data with the given per-split feature
    /// sampler. Recursion stops at `min_leaf_size`, `max_depth`, or zero
    /// response variance.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[f64],
        config: &TrainConfig,
        sampler: &mut dyn FeatureSampler,
    ) -> Result<Self> {
        Self::fit_on_indices(x, y, (0..x.nrows()).collect(), config, sampler)
    }

    /// Grow a tree on a row multiset given by `indices` (repeats allowed, as
    /// in a bootstrap resample).
    pub(crate) fn fit_on_indices(
        x: ArrayView2<f64>,
        y: &[f64],
        indices: Vec<usize>,
        config: &TrainConfig,
        sampler: &mut dyn FeatureSampler,
    ) -> Result<Self> {
        validate_training_data(x, y)?;
        config.validate(x.ncols())?;
        if indices.is_empty() {
            return Err(Error::Validation("cannot grow a tree on zero rows".into()));
        }
        let mut grower = Grower {
            x,
            y,
            config,
            sampler,
            nodes: Vec::new(),
        };
        grower.grow(indices, 0);
        Ok(RegressionTree {
            n_features: x.ncols(),
            nodes: grower.nodes,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// The root node; `None` never happens for a fitted tree.
    pub fn root(&self) -> Option<&Node> {
        self.nodes.first()
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { prediction, .. } => return *prediction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(Array1::from_iter(
            x.rows().into_iter().map(|r| self.predict_row(r)),
        ))
    }

    /// Route the given rows and return the leaf node index for each; used by
    /// the leaf-mean checks.
    pub fn leaf_index(&self, row: ArrayView1<f64>) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    config: &'a TrainConfig,
    sampler: &'a mut dyn FeatureSampler,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    children_sse: f64,
}

impl Grower<'_> {
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let n = indices.len();
        let at_limit = depth >= self.config.max_depth || n < 2 * self.config.min_leaf_size;
        if at_limit || self.constant_response(&indices) {
            return self.push_leaf(&indices);
        }
        let mut candidates = self.sampler.sample(self.x.ncols());
        candidates.sort_unstable();
        candidates.dedup();
        let mut best: Option<SplitChoice> = None;
        for feature in candidates {
            if let Some((children_sse, threshold)) = self.best_split_on(&indices, feature) {
                let better = match &best {
                    None => true,
                    Some(b) => children_sse < b.children_sse,
                };
                if better {
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        children_sse,
                    });
                }
            }
        }
        let Some(choice) = best else {
            return self.push_leaf(&indices);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.x[[i, choice.feature]] <= choice.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            prediction: 0.0,
            n_samples: 0,
        });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        slot
    }

    fn constant_response(&self, indices: &[usize]) -> bool {
        let first = self.y[indices[0]];
        indices.iter().all(|&i| self.y[i] == first)
    }

    fn push_leaf(&mut self, indices: &[usize]) -> usize {
        let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let prediction = if self.constant_response(indices) {
            self.y[indices[0]]
        } else {
            sum / indices.len() as f64
        };
        self.nodes.push(Node::Leaf {
            prediction,
            n_samples: indices.len(),
        });
        self.nodes.len() - 1
    }

    /// Best split of `indices` on one feature: minimal summed child SSE over
    /// midpoints between adjacent distinct values, both children at least
    /// `min_leaf_size` rows. Ties keep the smaller threshold.
    fn best_split_on(&self, indices: &[usize], feature: usize) -> Option<(f64, f64)> {
        let n = indices.len();
        let min_leaf = self.config.min_leaf_size;
        let mut pairs: Vec<(f64, f64)> = indices
            .iter()
            .map(|&i| (self.x[[i, feature]], self.y[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut prefix_sum = Vec::with_capacity(n + 1);
        let mut prefix_sq = Vec::with_capacity(n + 1);
        prefix_sum.push(0.0);
        prefix_sq.push(0.0);
        for &(_, yv) in &pairs {
            prefix_sum.push(prefix_sum.last().unwrap() + yv);
            prefix_sq.push(prefix_sq.last().unwrap() + yv * yv);
        }
        let total_sum = prefix_sum[n];
        let total_sq = prefix_sq[n];

        let mut best: Option<(f64, f64)> = None;
        for s in min_leaf..=(n - min_leaf) {
            if pairs[s - 1].0 >= pairs[s].0 {
                continue;
            }
            let (nl, nr) = (s as f64, (n - s) as f64);
            let (sl, s2l) = (prefix_sum[s], prefix_sq[s]);
            let (sr, s2r) = (total_sum - sl, total_sq - s2l);
            let sse = (s2l - sl * sl / nl) + (s2r - sr * sr / nr);
            let better = match best {
                None => true,
                Some((b, _)) => sse < b,
            };
            if better {
                best = Some((sse, 0.5 * (pairs[s - 1].0 + pairs[s].0)));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};

    fn small_config() -> TrainConfig {
        TrainConfig::default().with_min_leaf_size(1).with_max_depth(8)
    }

    #[test]
    fn constant_response_is_single_leaf() {
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        let y = [4.2, 4.2, 4.2];
        let tree = RegressionTree::fit(x.view(), &y, &small_config(), &mut AllFeatures).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict_row(ndarray::arr1(&[9.0]).view()), 4.2);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let x = arr2(&[[1.0], [2.0], [3.0], [4.0]]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let tree = RegressionTree::fit(x.view(), &y, &small_config(), &mut AllFeatures).unwrap();
        match tree.root().unwrap() {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.5);
            }
            other => panic!("expected a split at the root, got {other:?}"),
        }
        assert_eq!(tree.predict_row(ndarray::arr1(&[1.5]).view()), 0.0);
        assert_eq!(tree.predict_row(ndarray::arr1(&[3.7]).view()), 10.0);
    }

    #[test]
    fn empty_data_is_validation_error() {
        let x = Array2::<f64>::zeros((0, 2));
        assert!(RegressionTree::fit(x.view(), &[], &small_config(), &mut AllFeatures).is_err());
    }

    #[test]
    fn non_finite_data_is_validation_error() {
        let x = arr2(&[[1.0], [f64::NAN]]);
        let y = [0.0, 1.0];
        assert!(RegressionTree::fit(x.view(), &y, &small_config(), &mut AllFeatures).is_err());
    }

    /// Exhaustive oracle: evaluate every (feature, midpoint) pair with naive
    /// per-child mean and SSE loops, same tie rule (first feature ascending,
    /// then smaller threshold, strict improvement).
    fn exhaustive_root_split(
        x: &Array2<f64>,
        y: &[f64],
        min_leaf: usize,
    ) -> Option<(usize, f64)> {
        let n = x.nrows();
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in 0..x.ncols() {
            let mut vals: Vec<f64> = (0..n).map(|i| x[[i, feature]]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let threshold = 0.5 * (w[0] + w[1]);
                let left: Vec<usize> = (0..n).filter(|&i| x[[i, feature]] <= threshold).collect();
                let right: Vec<usize> = (0..n).filter(|&i| x[[i, feature]] > threshold).collect();
                if left.len() < min_leaf || right.len() < min_leaf {
                    continue;
                }
                let sse = |ids: &[usize]| {
                    let mean = ids.iter().map(|&i| y[i]).sum::<f64>() / ids.len() as f64;
                    ids.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>()
                };
                let total = sse(&left) + sse(&right);
                let better = match best {
                    None => true,
                    Some((b, _, _)) => total < b,
                };
                if better {
                    best = Some((total, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    #[test]
    fn depth_one_root_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        for case in 0..50 {
            let n = rng.random_range(10..=50);
            let p = rng.random_range(1..=3);
            let mut x = Array2::<f64>::zeros((n, p));
            x.mapv_inplace(|_| rng.random::<f64>());
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let config = TrainConfig::default()
                .with_min_leaf_size(2)
                .with_max_depth(1)
                .with_mtry(p);
            let tree = RegressionTree::fit(x.view(), &y, &config, &mut AllFeatures).unwrap();
            let expected = exhaustive_root_split(&x, &y, 2);
            match (tree.root().unwrap(), expected) {
                (
                    Node::Split {
                        feature, threshold, ..
                    },
                    Some((ef, et)),
                ) => {
                    assert_eq!(*feature, ef, "case {case}");
                    assert_eq!(*threshold, et, "case {case}");
                }
                (Node::Leaf { .. }, None) => {}
                (got, want) => panic!("case {case}: got {got:?}, oracle {want:?}"),
            }
        }
    }

    #[test]
    fn leaves_predict_the_mean_of_routed_rows() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let n = 200;
        let mut x = Array2::<f64>::zeros((n, 4));
        x.mapv_inplace(|_| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let config = TrainConfig::default().with_min_leaf_size(5).with_max_depth(6);
        let tree = RegressionTree::fit(x.view(), &y, &config, &mut AllFeatures).unwrap();
        let mut by_leaf: std::collections::HashMap<usize, Vec<f64>> = Default::default();
        for i in 0..n {
            by_leaf.entry(tree.leaf_index(x.row(i))).or_default().push(y[i]);
        }
        for (leaf, members) in by_leaf {
            let Node::Leaf {
                prediction,
                n_samples,
            } = &tree.nodes()[leaf]
            else {
                panic!("routed to a non-leaf");
            };
            assert_eq!(*n_samples, members.len());
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert!((prediction - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn predictions_stay_in_response_range() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        let n = 120;
        let mut x = Array2::<f64>::zeros((n, 3));
        x.mapv_inplace(|_| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let tree =
            RegressionTree::fit(x.view(), &y, &TrainConfig::default(), &mut AllFeatures).unwrap();
        let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let mut probe = Array2::<f64>::zeros((50, 3));
        probe.mapv_inplace(|_| rng.random::<f64>() * 3.0 - 1.5);
        for v in tree.predict(probe.view()).unwrap() {
            assert!(v >= lo && v <= hi);
        }
    }
}

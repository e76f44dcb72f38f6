//! k-nearest-neighbour and Gaussian naive Bayes baselines.
//!
//! Both normalise queries with the same frozen source normalizer as the
//! neural models.

use serde::{Deserialize, Serialize};

use crate::data::{BeamSnrSample, FeatureNormalizer};
use crate::model::{Classifier, ModelKind};
use crate::{Error, Result};

fn check_training_set(features: &[&[f64]], labels: &[usize], n_classes: usize) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::Validation("feature rows of unequal length".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Validation(format!("label {l} out of range for {n_classes} classes")));
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    n_classes: usize,
    normalizer: FeatureNormalizer,
    /// Normalised training rows.
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl KnnModel {
    pub const DEFAULT_K: usize = 5;

    pub fn fit(
        features: &[&[f64]],
        labels: &[usize],
        n_classes: usize,
        k: usize,
        normalizer: FeatureNormalizer,
    ) -> Result<Self> {
        check_training_set(features, labels, n_classes)?;
        if k == 0 || k > features.len() {
            return Err(Error::Validation(format!(
                "k = {k} must be in 1..={} (training size)",
                features.len()
            )));
        }
        let points = features
            .iter()
            .map(|f| normalizer.apply(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            n_classes,
            normalizer,
            points,
            labels: labels.to_vec(),
        })
    }

    pub fn fit_samples(samples: &[&BeamSnrSample], k: usize, normalizer: FeatureNormalizer) -> Result<Self> {
        let features: Vec<&[f64]> = samples.iter().map(|s| &s.features[..]).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        Self::fit(&features, &labels, crate::N_CLASSES, k, normalizer)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Vote fractions of the k nearest training points (Euclidean, ties in
    /// distance resolved by training order).
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.normalizer.apply(x)?;
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0.0; self.n_classes];
        for &(_, i) in &dist[..self.k] {
            votes[self.labels[i]] += 1.0;
        }
        let k = self.k as f64;
        Ok(votes.into_iter().map(|v| v / k).collect())
    }
}

impl Classifier for KnnModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Knn
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.predict_scores(features)
    }
}

/// Gaussian naive Bayes over normalised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    normalizer: FeatureNormalizer,
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    var_floor: f64,
}

impl GnbModel {
    /// Relative variance floor: `floor = VAR_SMOOTHING · max_f Var(x_f)`.
    pub const VAR_SMOOTHING: f64 = 1e-9;

    pub fn fit(
        features: &[&[f64]],
        labels: &[usize],
        n_classes: usize,
        normalizer: FeatureNormalizer,
    ) -> Result<Self> {
        let dim = check_training_set(features, labels, n_classes)?;
        let rows = features
            .iter()
            .map(|f| normalizer.apply(f))
            .collect::<Result<Vec<_>>>()?;

        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; dim]; n_classes];
        for (row, &l) in rows.iter().zip(labels) {
            counts[l] += 1;
            means[l].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!("class {c} has no training samples")));
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }

        let mut variances = vec![vec![0.0; dim]; n_classes];
        for (row, &l) in rows.iter().zip(labels) {
            for ((s, v), m) in variances[l].iter_mut().zip(row).zip(&means[l]) {
                *s += (v - m) * (v - m);
            }
        }

        let n = rows.len() as f64;
        let max_var = (0..dim)
            .map(|f| {
                let mean = rows.iter().map(|r| r[f]).sum::<f64>() / n;
                rows.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n
            })
            .fold(0.0, f64::max);
        let var_floor = if max_var > 0.0 {
            Self::VAR_SMOOTHING * max_var
        } else {
            Self::VAR_SMOOTHING
        };
        for (v, &c) in variances.iter_mut().zip(&counts) {
            v.iter_mut().for_each(|s| *s = *s / c as f64 + var_floor);
        }

        let priors = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(Self {
            normalizer,
            priors,
            means,
            variances,
            var_floor,
        })
    }

    pub fn fit_samples(samples: &[&BeamSnrSample], normalizer: FeatureNormalizer) -> Result<Self> {
        let features: Vec<&[f64]> = samples.iter().map(|s| &s.features[..]).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        Self::fit(&features, &labels, crate::N_CLASSES, normalizer)
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    /// Unnormalised log posteriors log p(c) + Σ_f log N(x_f; μ_cf, σ²_cf).
    pub fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.normalizer.apply(x)?;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        Ok(self
            .priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(prior, (mean, var))| {
                prior.ln()
                    + q.iter()
                        .zip(mean.iter().zip(var))
                        .map(|(v, (m, s2))| -0.5 * (ln_2pi + s2.ln() + (v - m) * (v - m) / s2))
                        .sum::<f64>()
            })
            .collect())
    }

    /// Posterior class probabilities.
    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(crate::neural::softmax(&self.log_joint(x)?))
    }
}

impl Classifier for GnbModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Gnb
    }

    fn n_classes(&self) -> usize {
        self.priors.len()
    }

    fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.predict_scores(features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|r| &r[..]).collect()
    }

    #[test]
    fn knn_exact_match() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 5.0], vec![-3.0, 2.0]];
        let m = KnnModel::fit(&rows(&pts), &[0, 1, 2], 3, 1, FeatureNormalizer::identity(2)).unwrap();
        assert_eq!(m.predict_scores(&[5.0, 5.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(m.predict(&[-3.0, 2.0]).unwrap(), 2);
    }

    #[test]
    fn knn_majority_by_enumeration() {
        // distances from (0,0): a 1.0, b 1.41, c 2.0, d 2.24, e 3.0
        let pts = vec![
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 2.0],
            vec![2.0, 1.0],
            vec![3.0, 0.0],
        ];
        let labels = [1, 0, 1, 0, 0];
        let m = KnnModel::fit(&rows(&pts), &labels, 2, 3, FeatureNormalizer::identity(2)).unwrap();
        let s = m.predict_scores(&[0.0, 0.0]).unwrap();
        assert_eq!(s, vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn knn_tie_goes_to_smallest_class() {
        let pts = vec![vec![1.0], vec![-1.0]];
        let m = KnnModel::fit(&rows(&pts), &[1, 0], 2, 2, FeatureNormalizer::identity(1)).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn knn_duplicated_training_set_with_doubled_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let doubled: Vec<Vec<f64>> = pts.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        let doubled_labels: Vec<usize> = labels.iter().flat_map(|&l| [l, l]).collect();
        let a = KnnModel::fit(&rows(&pts), &labels, 3, 3, FeatureNormalizer::identity(2)).unwrap();
        let b = KnnModel::fit(&rows(&doubled), &doubled_labels, 3, 6, FeatureNormalizer::identity(2)).unwrap();
        for _ in 0..50 {
            let q = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            assert_eq!(a.predict(&q).unwrap(), b.predict(&q).unwrap());
        }
    }

    #[test]
    fn knn_rejects_bad_k() {
        let pts = vec![vec![0.0]];
        assert!(KnnModel::fit(&rows(&pts), &[0], 2, 2, FeatureNormalizer::identity(1)).is_err());
        assert!(KnnModel::fit(&rows(&pts), &[0], 2, 0, FeatureNormalizer::identity(1)).is_err());
    }

    #[test]
    fn gnb_symmetric_boundary_at_midpoint() {
        let pts = vec![vec![-3.0], vec![-1.0], vec![1.0], vec![3.0]];
        let m = GnbModel::fit(&rows(&pts), &[0, 0, 1, 1], 2, FeatureNormalizer::identity(1)).unwrap();
        let mid = m.predict_scores(&[0.0]).unwrap();
        assert!((mid[0] - 0.5).abs() < 1e-12);
        assert_eq!(m.predict(&[-0.01]).unwrap(), 0);
        assert_eq!(m.predict(&[0.01]).unwrap(), 1);
    }

    #[test]
    fn gnb_single_point_per_class() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![4.0, 3.0]];
        let m = GnbModel::fit(&rows(&pts), &[0, 1, 2], 3, FeatureNormalizer::identity(2)).unwrap();
        for (p, l) in pts.iter().zip(0..) {
            assert_eq!(m.predict(p).unwrap(), l);
        }
        assert!(m.variances().iter().flatten().all(|&v| v >= m.var_floor()));
    }

    #[test]
    fn gnb_missing_class() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(GnbModel::fit(&rows(&pts), &[0, 0], 2, FeatureNormalizer::identity(1)).is_err());
    }

    #[test]
    fn gnb_priors_and_posteriors_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let m = GnbModel::fit(&rows(&pts), &labels, 4, FeatureNormalizer::identity(4)).unwrap();
        assert!((m.priors().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for _ in 0..20 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = m.predict_scores(&q).unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

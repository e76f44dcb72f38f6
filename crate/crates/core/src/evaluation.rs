//! Accuracy, confusion matrices, one-vs-rest ROC curves and AUC.
//!
//! AUC is computed from the score-sorted ROC with trapezoids across tied
//! score groups. Working in integer counts, twice the area times P·N is
//! `Σ_groups fp_g·(2·tp_before + tp_g)`, which equals the pairwise count
//! `Σ 2·[s⁺ > s⁻] + [s⁺ = s⁻]` exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{split_labeled, BeamSnrSample, Dataset, Domain, SplitSize};
use crate::model::{argmax, Classifier};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at which this point is reached (`+∞` for the origin).
    pub threshold: f64,
}

/// AUC as the exact fraction `numerator / denominator`, with
/// `denominator = 2·P·N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AucFraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl AucFraction {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

fn check_scores(scores: &[f64], positive: &[bool]) -> Result<()> {
    if scores.len() != positive.len() {
        return Err(Error::Validation(format!(
            "{} scores but {} indicators",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    Ok(())
}

/// (true-positive, false-positive) counts per distinct score, descending.
fn tied_groups(scores: &[f64], positive: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (tp, fp) = if positive[i] { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += tp;
                g.2 += fp;
            }
            _ => groups.push((scores[i], tp, fp)),
        }
    }
    groups
}

/// Exact AUC of a binary scoring; `None` when either class is absent.
pub fn auc_fraction(scores: &[f64], positive: &[bool]) -> Result<Option<AucFraction>> {
    check_scores(scores, positive)?;
    let p = positive.iter().filter(|&&b| b).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    let mut tp_before = 0;
    let mut twice_area = 0;
    for (_, tp, fp) in tied_groups(scores, positive) {
        twice_area += fp * (2 * tp_before + tp);
        tp_before += tp;
    }
    Ok(Some(AucFraction {
        numerator: twice_area,
        denominator: 2 * p * n,
    }))
}

pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<Option<f64>> {
    Ok(auc_fraction(scores, positive)?.map(|f| f.value()))
}

/// ROC points from `(0, 0)` to `(1, 1)`, one per distinct score. Empty when
/// either class is absent.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<RocPoint>> {
    check_scores(scores, positive)?;
    let p = positive.iter().filter(|&&b| b).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0, 0);
    for (threshold, gtp, gfp) in tied_groups(scores, positive) {
        tp += gtp;
        fp += gfp;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// One-vs-rest ROC per class.
    pub roc: Vec<Vec<RocPoint>>,
    /// `None` for a class with no positives (or no negatives) in the set.
    pub per_class_auc: Vec<Option<f64>>,
    /// Unweighted mean of the defined per-class AUCs.
    pub macro_auc: Option<f64>,
    /// AUC of the pooled one-vs-rest (score, indicator) pairs.
    pub micro_auc: Option<f64>,
}

/// Builds a report from per-sample class scores (argmax is the prediction).
pub fn evaluate_scores(scores: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty set".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.len() != n_classes) {
        return Err(Error::Validation(format!("score row of length {} for {n_classes} classes", s.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Validation(format!("label {l} out of range")));
    }

    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (s, &l) in scores.iter().zip(labels) {
        confusion[l][argmax(s)] += 1;
    }
    let correct: u64 = (0..n_classes).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / scores.len() as f64;

    let mut roc = Vec::with_capacity(n_classes);
    let mut per_class_auc = Vec::with_capacity(n_classes);
    let mut pooled_scores = Vec::with_capacity(scores.len() * n_classes);
    let mut pooled_truth = Vec::with_capacity(scores.len() * n_classes);
    for c in 0..n_classes {
        let column: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let truth: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        roc.push(roc_curve(&column, &truth)?);
        per_class_auc.push(roc_auc(&column, &truth)?);
        pooled_scores.extend_from_slice(&column);
        pooled_truth.extend_from_slice(&truth);
    }
    let defined: Vec<f64> = per_class_auc.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let micro_auc = roc_auc(&pooled_scores, &pooled_truth)?;

    Ok(EvalReport {
        n_samples: scores.len(),
        accuracy,
        confusion,
        roc,
        per_class_auc,
        macro_auc,
        micro_auc,
    })
}

/// Scores every sample with `model` and builds the report.
pub fn evaluate<M: Classifier + ?Sized>(model: &M, samples: &[&BeamSnrSample]) -> Result<EvalReport> {
    let scores = samples
        .iter()
        .map(|s| model.class_scores(&s.features))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    evaluate_scores(&scores, &labels, model.n_classes())
}

/// Fraction of samples whose argmax matches the label.
pub fn accuracy<M: Classifier + ?Sized>(model: &M, samples: &[&BeamSnrSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty set".into()));
    }
    let mut correct = 0usize;
    for s in samples {
        if model.predict(&s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

impl EvalReport {
    pub fn confusion_csv(&self) -> String {
        let n = self.confusion.len();
        let mut out = String::from("true\\pred");
        for c in 0..n {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn roc_csv(&self, class: usize) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.roc[class] {
            let _ = writeln!(out, "{:?},{:?},{:?}", p.fpr, p.tpr, p.threshold);
        }
        out
    }

    /// Writes `confusion.csv`, `roc_class_<k>.csv` and `summary.json` into
    /// `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("confusion.csv"), &self.confusion_csv())?;
        for c in 0..self.roc.len() {
            write_file(&dir.join(format!("roc_class_{c}.csv")), &self.roc_csv(c))?;
        }
        let summary = serde_json::json!({
            "n_samples": self.n_samples,
            "accuracy": self.accuracy,
            "per_class_auc": self.per_class_auc,
            "macro_auc": self.macro_auc,
            "micro_auc": self.micro_auc,
        });
        write_file(
            &dir.join("summary.json"),
            &serde_json::to_string_pretty(&summary).expect("plain JSON values"),
        )
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_labeled: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub accuracies: Vec<f64>,
}

/// Trains a fresh model per grid point (and repeat) on a seeded stratified
/// subset of the labelled source domain and records its accuracy.
///
/// With `eval_domain = Target` the whole target domain is scored; with
/// `Source` the source samples left out of the training subset are.
/// The factory receives the training samples and a seed.
pub fn accuracy_vs_samples_curve<F, M>(
    factory: F,
    dataset: &Dataset,
    grid: &[usize],
    repeats: usize,
    eval_domain: Domain,
    seed: u64,
) -> Result<Vec<CurvePoint>>
where
    F: Fn(&[&BeamSnrSample], u64) -> Result<M>,
    M: Classifier,
{
    if repeats == 0 {
        return Err(Error::Validation("curve needs at least one repeat".into()));
    }
    let available = dataset.domain_indices(Domain::Source).len();
    for &n in grid {
        if n == 0 {
            return Err(Error::Validation("grid values must be positive".into()));
        }
        if n > available {
            return Err(Error::Validation(format!(
                "grid value {n} exceeds the {available} available source labels"
            )));
        }
    }
    let target = dataset.domain_samples(Domain::Target);
    let mut points = Vec::with_capacity(grid.len());
    for (g, &n) in grid.iter().enumerate() {
        let mut accuracies = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let run_seed = derive_seed(seed, (g * repeats + r) as u64);
            let split = split_labeled(dataset, Domain::Source, SplitSize::Count(n), run_seed)?;
            let train = dataset.select(&split.labeled);
            let model = factory(&train, run_seed)?;
            let acc = match eval_domain {
                Domain::Target => accuracy(&model, &target)?,
                Domain::Source => accuracy(&model, &dataset.select(&split.eval))?,
            };
            accuracies.push(acc);
        }
        let (mean_accuracy, std_accuracy) = mean_std(&accuracies);
        points.push(CurvePoint {
            n_labeled: n,
            mean_accuracy,
            std_accuracy,
            accuracies,
        });
    }
    Ok(points)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("n_labeled,mean_acc,std_acc\n");
    for p in points {
        let _ = writeln!(out, "{},{:?},{:?}", p.n_labeled, p.mean_accuracy, p.std_accuracy);
    }
    out
}

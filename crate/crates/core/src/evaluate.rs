//! Classification metrics, inter-annotator agreement and the paired
//! comparison of the two pipeline architectures.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::aspect::{Aspect, Sentiment};
use crate::classify::{AspectPipeline, Architecture};
use crate::error::{Error, Result};
use crate::ingest::AspectLabelSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: i32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: u64,
}

impl ClassificationReport {
    pub fn class(&self, class: i32) -> Option<&ClassMetrics> {
        self.classes.iter().find(|m| m.class == class)
    }

    pub fn macro_f1(&self) -> f64 {
        self.classes.iter().map(|m| m.f1).sum::<f64>() / self.classes.len().max(1) as f64
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall, F1 and support for `classes` (in the given
/// order), plus overall accuracy. Zero denominators yield 0.
pub fn classification_report(truth: &[i32], pred: &[i32], classes: &[i32]) -> Result<ClassificationReport> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "truth has {} labels but predictions have {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("classification report needs at least one sample"));
    }
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as u64;
    let classes = classes
        .iter()
        .map(|&c| {
            let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as u64;
            let predicted = pred.iter().filter(|&&p| p == c).count() as u64;
            let support = truth.iter().filter(|&&t| t == c).count() as u64;
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    Ok(ClassificationReport {
        classes,
        accuracy: ratio(correct, truth.len() as u64),
        total: truth.len() as u64,
    })
}

// ---------------------------------------------------------------------------
// Fleiss' kappa

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
}

/// Fleiss' kappa over an items × categories table of rating counts.
pub fn fleiss_kappa(table: &[Vec<u64>]) -> Result<Kappa> {
    let first = table.first().ok_or_else(|| Error::invalid("kappa needs at least one item"))?;
    let raters: u64 = first.iter().sum();
    let categories = first.len();
    if raters < 2 {
        return Err(Error::invalid("kappa needs at least two raters per item"));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != categories || row.iter().sum::<u64>() != raters {
            return Err(Error::invalid(format!(
                "item {i} has {} ratings; every item needs {raters}",
                row.iter().sum::<u64>()
            )));
        }
    }
    let n = raters as f64;
    let items = table.len() as f64;
    let observed = table
        .iter()
        .map(|row| row.iter().map(|&c| (c * c.saturating_sub(1)) as f64).sum::<f64>() / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let expected: f64 = (0..categories)
        .map(|j| {
            let share = table.iter().map(|row| row[j] as f64).sum::<f64>() / (items * n);
            share * share
        })
        .sum();
    let kappa = if expected == 1.0 {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(Kappa {
        observed,
        expected,
        kappa,
    })
}

/// Category index for kappa tables: negative, neutral, positive, NA.
fn kappa_category(label: Option<Sentiment>) -> usize {
    match label {
        Some(Sentiment::Negative) => 0,
        Some(Sentiment::Neutral) => 1,
        Some(Sentiment::Positive) => 2,
        None => 3,
    }
}

/// Count table for one aspect from per-rater label sets aligned by item.
pub fn kappa_table(raters: &[&[AspectLabelSet]], aspect: Aspect) -> Vec<Vec<u64>> {
    let items = raters.first().map_or(0, |r| r.len());
    (0..items)
        .map(|i| {
            let mut row = vec![0u64; 4];
            for rater in raters {
                row[kappa_category(rater[i].get(aspect))] += 1;
            }
            row
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pearson agreement

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonCell {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonMatrix {
    /// `cells[a][b]`; `None` where the correlation is undefined.
    pub cells: Vec<Vec<Option<PearsonCell>>>,
    /// Mean of the defined off-diagonal correlations (each pair once).
    pub mean: Option<f64>,
}

fn pearson_pair(a: &[Option<f64>], b: &[Option<f64>]) -> Option<PearsonCell> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    let m = pairs.len();
    if m < 3 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p = if m == 2 || r.abs() == 1.0 {
        0.0
    } else {
        let df = (m - 2) as f64;
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Some(PearsonCell { r, p, n: m })
}

/// Pairwise Pearson correlations between raters (rows of `scores`), using
/// only items both raters scored.
pub fn pearson_agreement(scores: &[Vec<Option<f64>>]) -> Result<PearsonMatrix> {
    if scores.len() < 2 {
        return Err(Error::invalid("pearson agreement needs at least two raters"));
    }
    let k = scores.len();
    let mut cells = vec![vec![None; k]; k];
    let mut defined = Vec::new();
    for a in 0..k {
        for b in a..k {
            let cell = pearson_pair(&scores[a], &scores[b]);
            if a == b {
                cells[a][a] = cell.map(|c| PearsonCell { r: 1.0, p: 0.0, n: c.n });
                continue;
            }
            if let Some(c) = &cell {
                defined.push(c.r);
            }
            cells[a][b] = cell.clone();
            cells[b][a] = cell;
        }
    }
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(PearsonMatrix { cells, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectAgreement {
    pub aspect: Aspect,
    pub kappa: Kappa,
    pub pearson: PearsonMatrix,
}

/// Kappa and Pearson agreement for every aspect. Each annotator's label
/// file must cover the same review ids; rows are aligned by id.
pub fn agreement_report(annotators: &[Vec<AspectLabelSet>]) -> Result<Vec<AspectAgreement>> {
    if annotators.len() < 2 {
        return Err(Error::invalid("agreement needs at least two annotators"));
    }
    let reference: Vec<&str> = annotators[0].iter().map(|l| l.review_id.as_str()).collect();
    let mut aligned: Vec<Vec<AspectLabelSet>> = Vec::with_capacity(annotators.len());
    for (a, labels) in annotators.iter().enumerate() {
        let by_id: HashMap<&str, &AspectLabelSet> = labels.iter().map(|l| (l.review_id.as_str(), l)).collect();
        if by_id.len() != reference.len() || reference.iter().any(|id| !by_id.contains_key(id)) {
            return Err(Error::invalid(format!(
                "annotator {} does not label the same reviews as annotator 1",
                a + 1
            )));
        }
        aligned.push(reference.iter().map(|id| by_id[id].clone()).collect());
    }
    let views: Vec<&[AspectLabelSet]> = aligned.iter().map(Vec::as_slice).collect();
    Aspect::ALL
        .iter()
        .map(|&aspect| {
            let kappa = fleiss_kappa(&kappa_table(&views, aspect))?;
            let scores: Vec<Vec<Option<f64>>> = views
                .iter()
                .map(|r| r.iter().map(|l| l.get(aspect).map(|s| f64::from(s.value()))).collect())
                .collect();
            Ok(AspectAgreement {
                aspect,
                kappa,
                pearson: pearson_agreement(&scores)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// McNemar

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// First model wrong, second right.
    pub n01: u64,
    /// First model right, second wrong.
    pub n10: u64,
    pub chi_square: f64,
    pub z: f64,
    /// P(Z >= z): small values favour the second model.
    pub one_sided_p: f64,
}

fn upper_normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn mcnemar_from_counts(n01: u64, n10: u64) -> McNemarResult {
    let discordant = n01 + n10;
    if discordant == 0 {
        return McNemarResult {
            n01,
            n10,
            chi_square: 0.0,
            z: 0.0,
            one_sided_p: 0.5,
        };
    }
    let diff = n01 as f64 - n10 as f64;
    let z = diff / (discordant as f64).sqrt();
    // Evaluate the tail on |z| so that swapping the counts gives exactly 1 - p.
    let one_sided_p = if z >= 0.0 {
        upper_normal_tail(z)
    } else {
        1.0 - upper_normal_tail(-z)
    };
    McNemarResult {
        n01,
        n10,
        chi_square: diff * diff / discordant as f64,
        z,
        one_sided_p,
    }
}

/// Paired comparison of `pred_a` against `pred_b`, testing whether `b` is
/// more often right.
pub fn mcnemar_one_sided<T: PartialEq>(truth: &[T], pred_a: &[T], pred_b: &[T]) -> Result<McNemarResult> {
    if truth.len() != pred_a.len() || truth.len() != pred_b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: truth {}, a {}, b {}",
            truth.len(),
            pred_a.len(),
            pred_b.len()
        )));
    }
    let (mut n01, mut n10) = (0, 0);
    for ((t, a), b) in truth.iter().zip(pred_a).zip(pred_b) {
        match (a == t, b == t) {
            (false, true) => n01 += 1,
            (true, false) => n10 += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(n01, n10))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectComparison {
    pub aspect: Aspect,
    pub relevant_rows: usize,
    /// `None` when no row is relevant to the aspect.
    pub result: Option<McNemarResult>,
}

/// Per aspect, restricts to rows whose ground truth marks the aspect
/// relevant and compares one-stage predictions with the two-stage
/// sentiment model's predictions.
pub fn compare_architectures(
    one_stage: &AspectPipeline,
    two_stage: &AspectPipeline,
    x: ArrayView2<'_, f64>,
    labels: &[AspectLabelSet],
) -> Result<Vec<AspectComparison>> {
    if one_stage.architecture != Architecture::OneStage || two_stage.architecture != Architecture::TwoStage {
        return Err(Error::invalid("compare needs a one-stage and a two-stage pipeline, in that order"));
    }
    if x.nrows() != labels.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    Aspect::ALL
        .iter()
        .map(|&aspect| {
            let (mut truth, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
            for (row, label) in x.outer_iter().zip(labels) {
                let Some(t) = label.get(aspect) else { continue };
                truth.push(t);
                a.push(one_stage.predict_aspect(aspect, row)?);
                b.push(two_stage.sentiment_model_prediction(aspect, row)?);
            }
            let result = if truth.is_empty() {
                None
            } else {
                Some(mcnemar_one_sided(&truth, &a, &b)?)
            };
            Ok(AspectComparison {
                aspect,
                relevant_rows: truth.len(),
                result,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pipeline evaluation

pub const SENTIMENT_CLASSES: [i32; 3] = [-1, 0, 1];
/// Relevant first, matching the published stage-1 layout.
pub const RELEVANCE_CLASSES: [i32; 2] = [1, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectEvaluation {
    pub aspect: Aspect,
    /// End-to-end predictions against labels with NA read as neutral.
    pub overall: ClassificationReport,
    /// Two-stage only: relevance classification.
    pub stage1: Option<ClassificationReport>,
    /// Two-stage only: sentiment model on ground-truth relevant rows.
    pub stage2: Option<ClassificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvaluation {
    pub architecture: Architecture,
    pub rows: usize,
    pub aspects: Vec<AspectEvaluation>,
}

pub fn evaluate_pipeline(
    pipeline: &AspectPipeline,
    x: ArrayView2<'_, f64>,
    labels: &[AspectLabelSet],
) -> Result<PipelineEvaluation> {
    if x.nrows() != labels.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    let aspects = Aspect::ALL
        .iter()
        .map(|&aspect| {
            let mut truth = Vec::new();
            let mut pred = Vec::new();
            let (mut rel_truth, mut rel_pred) = (Vec::new(), Vec::new());
            let (mut s2_truth, mut s2_pred) = (Vec::new(), Vec::new());
            for (row, label) in x.outer_iter().zip(labels) {
                let gold = label.get(aspect);
                truth.push(gold.map_or(0, Sentiment::value));
                pred.push(pipeline.predict_aspect(aspect, row)?.value());
                if let Some(relevant) = pipeline.relevance(aspect, row)? {
                    rel_truth.push(i32::from(gold.is_some()));
                    rel_pred.push(i32::from(relevant));
                    if let Some(g) = gold {
                        s2_truth.push(g.value());
                        s2_pred.push(pipeline.sentiment_model_prediction(aspect, row)?.value());
                    }
                }
            }
            let two_stage = pipeline.architecture == Architecture::TwoStage;
            Ok(AspectEvaluation {
                aspect,
                overall: classification_report(&truth, &pred, &SENTIMENT_CLASSES)?,
                stage1: if two_stage {
                    Some(classification_report(&rel_truth, &rel_pred, &RELEVANCE_CLASSES)?)
                } else {
                    None
                },
                stage2: if two_stage && !s2_truth.is_empty() {
                    Some(classification_report(&s2_truth, &s2_pred, &SENTIMENT_CLASSES)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineEvaluation {
        architecture: pipeline.architecture,
        rows: labels.len(),
        aspects,
    })
}

// ---------------------------------------------------------------------------
// Table rendering

/// Significance marker for a p-value: `***`, `**`, `*`, `.` or empty.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

fn class_name(section: &str, class: i32) -> &'static str {
    match (section, class) {
        ("stage1", 1) => "Relevant",
        ("stage1", _) => "Irrelevant",
        ("one_stage", 0) => "Neutral/Irrelevant",
        (_, -1) => "Negative",
        (_, 0) => "Neutral",
        _ => "Positive",
    }
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.4}")
}

fn metrics_rows(out: &mut String, section: &str, reports: &[Option<&ClassificationReport>]) {
    let Some(first) = reports.iter().flatten().next() else {
        return;
    };
    let cell = |r: &Option<&ClassificationReport>, f: &dyn Fn(&ClassificationReport) -> String| {
        r.map_or_else(String::new, f)
    };
    for (ci, class) in first.classes.iter().enumerate() {
        let name = class_name(section, class.class);
        #[allow(clippy::type_complexity)]
        let metrics: [(&str, &dyn Fn(&ClassMetrics) -> String); 4] = [
            ("precision", &|m| fmt_metric(m.precision)),
            ("recall", &|m| fmt_metric(m.recall)),
            ("f1", &|m| fmt_metric(m.f1)),
            ("support", &|m| m.support.to_string()),
        ];
        for (metric, get) in metrics {
            let cells: Vec<String> = reports.iter().map(|r| cell(r, &|rep| get(&rep.classes[ci]))).collect();
            let _ = writeln!(out, "{section},{name},{metric},{}", cells.join(","));
        }
    }
    let acc: Vec<String> = reports.iter().map(|r| cell(r, &|rep| fmt_metric(rep.accuracy))).collect();
    let _ = writeln!(out, "{section},all,accuracy,{}", acc.join(","));
}

/// Metric × class rows with one column per aspect, in the published
/// column order.
pub fn metrics_table_csv(eval: &PipelineEvaluation) -> String {
    let by_aspect = |a: Aspect| eval.aspects.iter().find(|e| e.aspect == a);
    let titles: Vec<&str> = Aspect::REPORT_ORDER.iter().map(|a| a.title()).collect();
    let mut out = format!("section,class,metric,{}\n", titles.join(","));
    match eval.architecture {
        Architecture::OneStage => {
            let reports: Vec<_> = Aspect::REPORT_ORDER.iter().map(|&a| by_aspect(a).map(|e| &e.overall)).collect();
            metrics_rows(&mut out, "one_stage", &reports);
        }
        Architecture::TwoStage => {
            let stage1: Vec<_> = Aspect::REPORT_ORDER
                .iter()
                .map(|&a| by_aspect(a).and_then(|e| e.stage1.as_ref()))
                .collect();
            let stage2: Vec<_> = Aspect::REPORT_ORDER
                .iter()
                .map(|&a| by_aspect(a).and_then(|e| e.stage2.as_ref()))
                .collect();
            let overall: Vec<_> = Aspect::REPORT_ORDER.iter().map(|&a| by_aspect(a).map(|e| &e.overall)).collect();
            metrics_rows(&mut out, "stage1", &stage1);
            metrics_rows(&mut out, "stage2", &stage2);
            metrics_rows(&mut out, "combined", &overall);
        }
    }
    out
}

pub fn mcnemar_table_csv(rows: &[AspectComparison]) -> String {
    let mut out = String::from("aspect,relevant_rows,n01,n10,chi_square,z,one_sided_p,stars\n");
    for &aspect in &Aspect::REPORT_ORDER {
        let Some(row) = rows.iter().find(|r| r.aspect == aspect) else { continue };
        match &row.result {
            Some(m) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.4},{:.4},{:.6e},{}",
                    aspect.title(),
                    row.relevant_rows,
                    m.n01,
                    m.n10,
                    m.chi_square,
                    m.z,
                    m.one_sided_p,
                    significance_marker(m.one_sided_p)
                );
            }
            None => {
                let _ = writeln!(out, "{},{},,,,,,", aspect.title(), row.relevant_rows);
            }
        }
    }
    out
}

pub fn kappa_table_csv(rows: &[AspectAgreement]) -> String {
    let mut out = String::from("aspect,observed,expected,kappa\n");
    for &aspect in &Aspect::REPORT_ORDER {
        if let Some(row) = rows.iter().find(|r| r.aspect == aspect) {
            let k = &row.kappa;
            let _ = writeln!(out, "{},{:.4},{:.4},{:.4}", aspect.title(), k.observed, k.expected, k.kappa);
        }
    }
    out
}

/// Long-form Pearson table: one row per rater pair plus a mean row.
pub fn pearson_table_csv(rows: &[AspectAgreement]) -> String {
    let mut out = String::from("aspect,rater_a,rater_b,n,r,p,stars\n");
    for &aspect in &Aspect::REPORT_ORDER {
        let Some(row) = rows.iter().find(|r| r.aspect == aspect) else { continue };
        let k = row.pearson.cells.len();
        for a in 0..k {
            for b in a + 1..k {
                match &row.pearson.cells[a][b] {
                    Some(c) => {
                        let _ = writeln!(
                            out,
                            "{},A{},A{},{},{:.4},{:.4e},{}",
                            aspect.title(),
                            a + 1,
                            b + 1,
                            c.n,
                            c.r,
                            c.p,
                            significance_marker(c.p)
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{},A{},A{},,,,", aspect.title(), a + 1, b + 1);
                    }
                }
            }
        }
        let mean = row.pearson.mean.map_or_else(String::new, |m| format!("{m:.4}"));
        let _ = writeln!(out, "{},mean,,,{mean},,", aspect.title());
    }
    out
}

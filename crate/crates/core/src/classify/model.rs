use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::vectorize::FeatureSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Mnb,
    Logreg,
    Linsvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Mnb, ClassifierKind::Logreg, ClassifierKind::Linsvm];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Mnb => "mnb",
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::Linsvm => "linsvm",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown classifier kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Additive smoothing for naive Bayes.
    pub alpha: f64,
    /// L2 strength for logistic regression and the SVM.
    pub lambda: f64,
    pub max_iter: usize,
    /// Gradient infinity-norm stopping threshold.
    pub tol: f64,
    pub svm_epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 1.0,
            lambda: 1e-4,
            max_iter: 1000,
            tol: 1e-6,
            svm_epochs: 100,
        }
    }
}

/// A trained linear scorer: `score_c(x) = w_c · x + b_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    /// Class labels in ascending order; argmax ties go to the earliest.
    pub classes: Vec<i32>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub feature_space: FeatureSpace,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: ClassifierKind,
    classes: Vec<i32>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    feature_space: FeatureSpace,
    hyperparams: Hyperparams,
    seed: u64,
}

impl From<ClassifierModel> for ModelFile {
    fn from(m: ClassifierModel) -> Self {
        ModelFile {
            kind: m.kind,
            classes: m.classes,
            weights: m.weights.outer_iter().map(|r| r.to_vec()).collect(),
            bias: m.bias.to_vec(),
            feature_space: m.feature_space,
            hyperparams: m.hyperparams,
            seed: m.seed,
        }
    }
}

impl TryFrom<ModelFile> for ClassifierModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let rows = f.weights.len();
        let cols = f.weights.first().map_or(0, Vec::len);
        if rows != f.classes.len() || f.bias.len() != rows || f.weights.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("classifier file: weight shape does not match classes"));
        }
        let weights = Array2::from_shape_vec((rows, cols), f.weights.concat())
            .map_err(|e| Error::invalid(format!("classifier file: {e}")))?;
        ClassifierModel::from_parts(
            f.kind,
            f.classes,
            weights,
            Array1::from(f.bias),
            f.feature_space,
            f.hyperparams,
            f.seed,
        )
    }
}

impl ClassifierModel {
    pub fn from_parts(
        kind: ClassifierKind,
        classes: Vec<i32>,
        weights: Array2<f64>,
        bias: Array1<f64>,
        feature_space: FeatureSpace,
        hyperparams: Hyperparams,
        seed: u64,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        if !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("classes must be strictly ascending"));
        }
        if weights.nrows() != classes.len() || bias.len() != classes.len() {
            return Err(Error::invalid("weight shape does not match classes"));
        }
        if !weights.iter().chain(bias.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite classifier weights"));
        }
        Ok(ClassifierModel {
            kind,
            classes,
            weights,
            bias,
            feature_space,
            hyperparams,
            seed,
        })
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features() {
            return Err(Error::invalid(format!(
                "feature width {width} does not match model width {}",
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Raw class scores, one row per sample.
    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(x.ncols())?;
        Ok(x.dot(&self.weights.t()) + &self.bias)
    }

    fn row_scores(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<i32> {
        self.check_width(x.len())?;
        Ok(self.classes[argmax(self.row_scores(x).view())])
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<i32>> {
        let scores = self.decision_function(x)?;
        Ok(scores.outer_iter().map(|r| self.classes[argmax(r)]).collect())
    }

    /// Class probabilities for models that define them (naive Bayes
    /// posteriors and logistic regression); `None` for the SVM.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Option<Array2<f64>>> {
        if self.kind == ClassifierKind::Linsvm {
            return Ok(None);
        }
        let mut scores = self.decision_function(x)?;
        for mut row in scores.outer_iter_mut() {
            let p = softmax(row.view());
            row.assign(&p);
        }
        Ok(Some(scores))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// First index of the maximum.
pub(crate) fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let e = v.mapv(|x| (x - max).exp());
    let z = e.sum();
    e / z
}

/// Distinct labels, ascending, and each sample's class index.
pub fn encode_labels(y: &[i32]) -> (Vec<i32>, Vec<usize>) {
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let idx = y
        .iter()
        .map(|v| classes.binary_search(v).expect("label present"))
        .collect();
    (classes, idx)
}

fn validate_training(x: ArrayView2<'_, f64>, y: &[i32]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} feature rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features contain NaN or infinite values"));
    }
    Ok(())
}

pub fn train_classifier(
    kind: ClassifierKind,
    x: ArrayView2<'_, f64>,
    y: &[i32],
    feature_space: FeatureSpace,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<ClassifierModel> {
    validate_training(x, y)?;
    let (classes, idx) = encode_labels(y);
    if classes.len() < 2 {
        return Err(Error::Insufficient(format!(
            "training labels contain a single class ({:?})",
            classes.first()
        )));
    }
    let (weights, bias) = match kind {
        ClassifierKind::Mnb => fit_mnb(x, &idx, classes.len(), hyperparams.alpha)?,
        ClassifierKind::Logreg => {
            let problem = LogregProblem::new(x, &idx, classes.len(), hyperparams.lambda);
            let fit = problem.fit(hyperparams.max_iter, hyperparams.tol);
            problem.unpack(&fit.theta)
        }
        ClassifierKind::Linsvm => fit_pegasos(x, &idx, classes.len(), hyperparams, seed),
    };
    ClassifierModel::from_parts(kind, classes, weights, bias, feature_space, hyperparams.clone(), seed)
}

fn fit_mnb(x: ArrayView2<'_, f64>, y: &[usize], classes: usize, alpha: f64) -> Result<(Array2<f64>, Array1<f64>)> {
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("mnb requires non-negative features"));
    }
    let f = x.ncols();
    let mut counts = Array2::<f64>::zeros((classes, f));
    let mut docs = vec![0usize; classes];
    for (row, &c) in x.outer_iter().zip(y) {
        counts.row_mut(c).scaled_add(1.0, &row);
        docs[c] += 1;
    }
    let n = y.len() as f64;
    let mut weights = Array2::zeros((classes, f));
    let mut bias = Array1::zeros(classes);
    for c in 0..classes {
        let total = counts.row(c).sum() + alpha * f as f64;
        weights
            .row_mut(c)
            .assign(&counts.row(c).mapv(|v| ((v + alpha) / total).ln()));
        bias[c] = (docs[c] as f64 / n).ln();
    }
    Ok((weights, bias))
}

/// Regularized logistic-regression objective: mean negative
/// log-likelihood plus `lambda / 2 * ||W||²` (bias unpenalized).
///
/// Parameters are packed row-major as `rows × (features + 1)` with the bias
/// last in each row. Two classes use a single binomial row; more classes use
/// one softmax row per class.
pub struct LogregProblem<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    classes: usize,
    lambda: f64,
}

#[derive(Debug, Clone)]
pub struct LogregFit {
    pub theta: Vec<f64>,
    /// Objective after each accepted step, starting with the initial value.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl<'a> LogregProblem<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: &'a [usize], classes: usize, lambda: f64) -> Self {
        LogregProblem { x, y, classes, lambda }
    }

    fn rows(&self) -> usize {
        if self.classes == 2 {
            1
        } else {
            self.classes
        }
    }

    pub fn param_len(&self) -> usize {
        self.rows() * (self.x.ncols() + 1)
    }

    pub fn objective(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (n, f) = self.x.dim();
        let params = ArrayView2::from_shape((self.rows(), f + 1), theta).expect("parameter length");
        let w = params.slice(s![.., ..f]);
        let b = params.column(f);
        let scores = self.x.dot(&w.t()) + b;
        let mut residual = Array2::<f64>::zeros(scores.dim());
        let mut nll = 0.0;

        if self.classes == 2 {
            for ((i, &s), &yi) in scores.column(0).indexed_iter().zip(self.y) {
                let t = yi as f64;
                // log(1 + e^s) - t*s, computed stably.
                nll += s.max(0.0) + (-s.abs()).exp().ln_1p() - t * s;
                residual[[i, 0]] = sigmoid(s) - t;
            }
        } else {
            for ((row, mut res), &yi) in scores.outer_iter().zip(residual.outer_iter_mut()).zip(self.y) {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.mapv(|v| (v - max).exp()).sum().ln();
                nll += lse - row[yi];
                res.assign(&row.mapv(|v| (v - lse).exp()));
                res[yi] -= 1.0;
            }
        }

        let inv_n = 1.0 / n as f64;
        let grad_w = residual.t().dot(&self.x) * inv_n + &(&w * self.lambda);
        let grad_b = residual.sum_axis(Axis(0)) * inv_n;
        let penalty = 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>();

        let mut grad = Vec::with_capacity(theta.len());
        for (gw, gb) in grad_w.outer_iter().zip(grad_b.iter()) {
            grad.extend(gw.iter());
            grad.push(*gb);
        }
        (nll * inv_n + penalty, grad)
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.objective(theta).0
    }

    /// Full-batch gradient descent with Armijo backtracking.
    pub fn fit(&self, max_iter: usize, tol: f64) -> LogregFit {
        let mut theta = vec![0.0; self.param_len()];
        let (mut loss, mut grad) = self.objective(&theta);
        let mut losses = vec![loss];
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax < tol {
                converged = true;
                break;
            }
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            let mut accepted = None;
            while step > 1e-16 {
                let candidate: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
                let cand_loss = self.loss(&candidate);
                if cand_loss <= loss - 1e-4 * step * gnorm2 {
                    accepted = Some(candidate);
                    break;
                }
                step *= 0.5;
            }
            let Some(next) = accepted else { break };
            theta = next;
            (loss, grad) = self.objective(&theta);
            losses.push(loss);
            iterations += 1;
            step = (step * 2.0).min(1e6);
        }
        LogregFit {
            theta,
            losses,
            iterations,
            converged,
        }
    }

    /// Expands packed parameters into `classes × features` weights; the
    /// binomial case becomes rows `[0, w]` so softmax reproduces the sigmoid.
    pub fn unpack(&self, theta: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let f = self.x.ncols();
        let params = ArrayView2::from_shape((self.rows(), f + 1), theta).expect("parameter length");
        if self.classes == 2 {
            let mut w = Array2::zeros((2, f));
            w.row_mut(1).assign(&params.slice(s![0, ..f]));
            (w, Array1::from(vec![0.0, params[[0, f]]]))
        } else {
            (params.slice(s![.., ..f]).to_owned(), params.column(f).to_owned())
        }
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// One-vs-rest Pegasos. The bias is an extra constant feature, so it is
/// regularized together with the weights.
fn fit_pegasos(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    classes: usize,
    hp: &Hyperparams,
    seed: u64,
) -> (Array2<f64>, Array1<f64>) {
    let (n, f) = x.dim();
    let lambda = hp.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut weights = Array2::zeros((classes, f));
    let mut bias = Array1::zeros(classes);
    for c in 0..classes {
        let mut rng = rng::stream(seed, 0x5356_4d00 + c as u64);
        let mut w = Array1::<f64>::zeros(f);
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..hp.svm_epochs {
            rng::shuffle(&mut rng, &mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let target = if y[i] == c { 1.0 } else { -1.0 };
                let row = x.row(i);
                let margin = target * (w.dot(&row) + b);
                let shrink = 1.0 - eta * lambda;
                w *= shrink;
                b *= shrink;
                if margin < 1.0 {
                    w.scaled_add(eta * target, &row);
                    b += eta * target;
                }
                let norm = (w.dot(&w) + b * b).sqrt();
                if norm > radius {
                    let scale = radius / norm;
                    w *= scale;
                    b *= scale;
                }
            }
        }
        weights.row_mut(c).assign(&w);
        bias[c] = b;
    }
    (weights, bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn hp() -> Hyperparams {
        Hyperparams::default()
    }

    #[test]
    fn mnb_hand_arithmetic() {
        // Columns: good, bad. pos = "good good", neg = "bad".
        let x = array![[2.0, 0.0], [0.0, 1.0]];
        let y = [1, -1];
        let m = train_classifier(ClassifierKind::Mnb, x.view(), &y, FeatureSpace::Tfidf, &hp(), 0).unwrap();
        // Row 0 is class -1 (neg), row 1 is class 1 (pos).
        assert_abs_diff_eq!(m.weights[[1, 0]].exp(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(m.weights[[0, 0]].exp(), 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(m.predict(array![[1.0, 0.0]].view()).unwrap(), vec![1]);
    }

    #[test]
    fn mnb_rejects_negative_features() {
        let x = array![[0.5, -0.1], [0.2, 0.3]];
        let err = train_classifier(ClassifierKind::Mnb, x.view(), &[0, 1], FeatureSpace::Embedding, &hp(), 0)
            .unwrap_err();
        assert!(err.to_string().contains("mnb requires non-negative features"));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let x = array![[f64::NAN], [1.0]];
        for kind in ClassifierKind::ALL {
            assert!(train_classifier(kind, x.view(), &[0, 1], FeatureSpace::Tfidf, &hp(), 0).is_err());
        }
    }

    #[test]
    fn zero_weights_pick_first_class() {
        let m = ClassifierModel::from_parts(
            ClassifierKind::Logreg,
            vec![3, 7],
            Array2::zeros((2, 2)),
            Array1::zeros(2),
            FeatureSpace::Tfidf,
            hp(),
            0,
        )
        .unwrap();
        assert_eq!(m.predict(array![[1.0, -4.0], [0.0, 0.0]].view()).unwrap(), vec![3, 3]);
    }

    #[test]
    fn one_feature_logistic_at_zero_is_even() {
        let m = ClassifierModel::from_parts(
            ClassifierKind::Logreg,
            vec![0, 1],
            array![[0.0], [1.0]],
            array![0.0, 0.0],
            FeatureSpace::Tfidf,
            hp(),
            0,
        )
        .unwrap();
        let p = m.predict_proba(array![[0.0]].view()).unwrap().unwrap();
        assert_abs_diff_eq!(p[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[[0, 1]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let m = train_classifier(ClassifierKind::Logreg, x.view(), &[0, 1], FeatureSpace::Tfidf, &hp(), 0).unwrap();
        assert!(m.predict(array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn separable_problems_are_fit_exactly() {
        let x = array![[0.0, 0.1], [0.2, 0.0], [0.1, 0.3], [2.0, 2.1], [2.2, 1.9], [1.8, 2.4]];
        let y = [0, 0, 0, 1, 1, 1];
        for kind in [ClassifierKind::Logreg, ClassifierKind::Linsvm] {
            let m = train_classifier(kind, x.view(), &y, FeatureSpace::Tfidf, &hp(), 3).unwrap();
            assert_eq!(m.predict(x.view()).unwrap(), y, "{kind:?}");
        }
    }

    #[test]
    fn model_json_round_trip() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let m = train_classifier(ClassifierKind::Logreg, x.view(), &[-1, 0, 1], FeatureSpace::Embedding, &hp(), 5)
            .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: ClassifierModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(json.contains("\"kind\":\"logreg\""));
    }
}

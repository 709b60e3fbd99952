//! Restaurant-level aggregation of review sentiments and OLS models of the
//! overall rating with cuisine and state fixed effects.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::aspect::Aspect;
use crate::classify::SentimentVector;
use crate::error::{Error, Result};
use crate::evaluate::significance_marker;
use crate::ingest::{CorpusRecord, Cuisine, DEFAULT_MALFORMED_TOLERANCE};

pub const REFERENCE_CUISINE: Cuisine = Cuisine::American;
pub const REFERENCE_STATE: &str = "AB";
pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestaurantAggregate {
    pub business_id: String,
    /// Mean sentiment per aspect, in storage order.
    pub means: [f64; 6],
    pub overall_rating: f64,
    pub state: String,
    pub cuisine: Cuisine,
    pub n_reviews: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AggregateDiagnostics {
    pub rows: u64,
    pub unknown_reviews: u64,
    pub businesses: u64,
}

#[derive(Default)]
struct Accumulator {
    sums: [f64; 6],
    n: u64,
}

/// Business attributes looked up by review id.
struct ReviewIndex {
    business_of: HashMap<String, usize>,
    businesses: Vec<(String, f64, String, Cuisine)>,
}

impl ReviewIndex {
    fn build<I: IntoIterator<Item = Result<CorpusRecord>>>(corpus: I) -> Result<ReviewIndex> {
        let mut slot: HashMap<String, usize> = HashMap::new();
        let mut businesses = Vec::new();
        let mut business_of = HashMap::new();
        for record in corpus {
            let r = record?;
            let idx = *slot.entry(r.business_id.clone()).or_insert_with(|| {
                businesses.push((r.business_id.clone(), r.overall_rating, r.state.clone(), r.cuisine));
                businesses.len() - 1
            });
            business_of.insert(r.review_id, idx);
        }
        Ok(ReviewIndex {
            business_of,
            businesses,
        })
    }
}

/// Averages per-review aspect values (`-1/0/1`) by business. Rows whose
/// review id is not in the corpus are tallied; more than `tolerance` of
/// them aborts.
pub fn aggregate_rows<I, C>(
    rows: I,
    corpus: C,
    tolerance: f64,
) -> Result<(Vec<RestaurantAggregate>, AggregateDiagnostics)>
where
    I: IntoIterator<Item = Result<(String, [i32; 6])>>,
    C: IntoIterator<Item = Result<CorpusRecord>>,
{
    let index = ReviewIndex::build(corpus)?;
    let mut acc: BTreeMap<usize, Accumulator> = BTreeMap::new();
    let mut diag = AggregateDiagnostics::default();
    for row in rows {
        let (review_id, values) = row?;
        diag.rows += 1;
        let Some(&b) = index.business_of.get(&review_id) else {
            diag.unknown_reviews += 1;
            continue;
        };
        let a = acc.entry(b).or_default();
        for (s, v) in a.sums.iter_mut().zip(values) {
            *s += f64::from(v);
        }
        a.n += 1;
    }
    if diag.rows > 0 && diag.unknown_reviews as f64 > tolerance * diag.rows as f64 {
        return Err(Error::invalid(format!(
            "{} of {} prediction rows reference reviews missing from the corpus (tolerance {})",
            diag.unknown_reviews, diag.rows, tolerance
        )));
    }
    let mut out: Vec<RestaurantAggregate> = acc
        .into_iter()
        .map(|(b, a)| {
            let (id, rating, state, cuisine) = &index.businesses[b];
            RestaurantAggregate {
                business_id: id.clone(),
                means: a.sums.map(|s| s / a.n as f64),
                overall_rating: *rating,
                state: state.clone(),
                cuisine: *cuisine,
                n_reviews: a.n,
            }
        })
        .collect();
    out.sort_by(|a, b| a.business_id.cmp(&b.business_id));
    diag.businesses = out.len() as u64;
    Ok((out, diag))
}

/// Aggregates a prediction file against the corpus it was produced from.
pub fn aggregate_restaurants<I, C>(predictions: I, corpus: C) -> Result<(Vec<RestaurantAggregate>, AggregateDiagnostics)>
where
    I: IntoIterator<Item = Result<SentimentVector>>,
    C: IntoIterator<Item = Result<CorpusRecord>>,
{
    let rows = predictions
        .into_iter()
        .map(|p| p.map(|p| (p.review_id, p.values.map(|s| s.value()))));
    aggregate_rows(rows, corpus, DEFAULT_MALFORMED_TOLERANCE)
}

const AGGREGATE_HEADER: [&str; 11] = [
    "business_id",
    "service",
    "food_quality",
    "ambiance",
    "wait_time",
    "price",
    "menu_variety",
    "overall_rating",
    "state",
    "cuisine",
    "n_reviews",
];

pub fn write_aggregates<W: Write>(out: W, rows: &[RestaurantAggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        let mut rec = vec![r.business_id.clone()];
        rec.extend(r.means.iter().map(|m| m.to_string()));
        rec.push(r.overall_rating.to_string());
        rec.push(r.state.clone());
        rec.push(r.cuisine.name().to_string());
        rec.push(r.n_reviews.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing aggregates: {e}")))?;
    Ok(())
}

pub fn read_aggregates<R: Read>(input: R, source: &str) -> Result<Vec<RestaurantAggregate>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != AGGREGATE_HEADER {
        return Err(Error::Parse {
            path: source.into(),
            line: 1,
            message: format!("expected header {}", AGGREGATE_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |m: String| Error::Parse {
            path: source.into(),
            line,
            message: m,
        };
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid {} value {:?}", AGGREGATE_HEADER[j], &rec[j])))
        };
        let mut means = [0.0; 6];
        for (k, m) in means.iter_mut().enumerate() {
            *m = num(k + 1)?;
            if !(-1.0..=1.0).contains(m) {
                return Err(bad(format!("aspect mean {m} outside [-1, 1]")));
            }
        }
        rows.push(RestaurantAggregate {
            business_id: rec[0].to_string(),
            means,
            overall_rating: num(7)?,
            state: rec[8].to_string(),
            cuisine: Cuisine::parse(&rec[9]).ok_or_else(|| bad(format!("unknown cuisine {:?}", &rec[9])))?,
            n_reviews: rec[10].parse().map_err(|_| bad(format!("invalid n_reviews {:?}", &rec[10])))?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Design matrix

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ModelSpec {
    Base = 1,
    Cuisine = 2,
    State = 3,
    Full = 4,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 4] = [ModelSpec::Base, ModelSpec::Cuisine, ModelSpec::State, ModelSpec::Full];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn with_cuisine(self) -> bool {
        matches!(self, ModelSpec::Cuisine | ModelSpec::Full)
    }

    pub fn with_state(self) -> bool {
        matches!(self, ModelSpec::State | ModelSpec::Full)
    }
}

impl From<ModelSpec> for u8 {
    fn from(s: ModelSpec) -> u8 {
        s.number()
    }
}

impl TryFrom<u8> for ModelSpec {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        ModelSpec::ALL
            .into_iter()
            .find(|s| s.number() == n)
            .ok_or_else(|| Error::invalid(format!("model spec must be 1-4, got {n}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub cuisine: Option<String>,
    pub state: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub terms: Vec<String>,
    pub references: References,
}

pub fn cuisine_term(c: &str) -> String {
    format!("cuisine:{c}")
}

pub fn state_term(s: &str) -> String {
    format!("state:{s}")
}

/// The preferred reference when present, otherwise the first level.
fn pick_reference(levels: &[String], preferred: &str) -> Option<String> {
    if levels.iter().any(|l| l == preferred) {
        Some(preferred.to_string())
    } else {
        levels.first().cloned()
    }
}

/// Intercept, six aspect means, then dummy columns for every observed
/// non-reference cuisine and/or state level.
pub fn encode_design_matrix(aggregates: &[RestaurantAggregate], spec: ModelSpec) -> Result<DesignMatrix> {
    if aggregates.len() < 2 {
        return Err(Error::Insufficient(format!(
            "regression needs at least 2 restaurants, got {}",
            aggregates.len()
        )));
    }
    let mut terms = vec![INTERCEPT.to_string()];
    terms.extend(Aspect::ALL.iter().map(|a| a.name().to_string()));

    let present_cuisines: BTreeSet<Cuisine> = aggregates.iter().map(|a| a.cuisine).collect();
    let cuisine_levels: Vec<String> = Cuisine::ALL
        .iter()
        .filter(|c| present_cuisines.contains(c))
        .map(|c| c.name().to_string())
        .collect();
    let state_levels: Vec<String> = aggregates
        .iter()
        .map(|a| a.state.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut references = References {
        cuisine: None,
        state: None,
    };
    let mut cuisine_cols: Vec<String> = Vec::new();
    let mut state_cols: Vec<String> = Vec::new();
    if spec.with_cuisine() {
        references.cuisine = pick_reference(&cuisine_levels, REFERENCE_CUISINE.name());
        cuisine_cols = cuisine_levels
            .iter()
            .filter(|l| Some(*l) != references.cuisine.as_ref())
            .cloned()
            .collect();
        terms.extend(cuisine_cols.iter().map(|c| cuisine_term(c)));
    }
    if spec.with_state() {
        references.state = pick_reference(&state_levels, REFERENCE_STATE);
        state_cols = state_levels
            .iter()
            .filter(|l| Some(*l) != references.state.as_ref())
            .cloned()
            .collect();
        terms.extend(state_cols.iter().map(|s| state_term(s)));
    }

    let k = terms.len();
    let mut x = Array2::zeros((aggregates.len(), k));
    for (mut row, a) in x.outer_iter_mut().zip(aggregates) {
        row[0] = 1.0;
        for (j, m) in a.means.iter().enumerate() {
            row[1 + j] = *m;
        }
        if let Some(j) = cuisine_cols.iter().position(|c| c == a.cuisine.name()) {
            row[7 + j] = 1.0;
        }
        if let Some(j) = state_cols.iter().position(|s| *s == a.state) {
            row[7 + cuisine_cols.len() + j] = 1.0;
        }
    }
    let y = aggregates.iter().map(|a| a.overall_rating).collect();
    Ok(DesignMatrix {
        x,
        y,
        terms,
        references,
    })
}

// ---------------------------------------------------------------------------
// Least squares

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub tss: f64,
    pub r_squared: f64,
    pub sigma2: f64,
    pub n: usize,
}

/// Least squares via Householder QR with column pivoting. Columns whose
/// pivot falls below a relative tolerance are reported by name.
pub fn fit_ols(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, terms: &[String]) -> Result<OlsFit> {
    let (n, k) = x.dim();
    if y.len() != n || terms.len() != k {
        return Err(Error::invalid("design matrix, response and term names disagree in size"));
    }
    if n <= k {
        return Err(Error::Insufficient(format!("{n} rows cannot identify {k} coefficients")));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix or response contains non-finite values"));
    }

    let mut a = x.to_owned();
    let mut qty = y.to_owned();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut first_pivot = 0.0;
    let tol = 1e-10;

    for j in 0..k {
        let (p, norm) = (j..k)
            .map(|c| (c, a.slice(ndarray::s![j.., c]).iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if j == 0 {
            first_pivot = norm;
        }
        if norm <= tol * first_pivot.max(f64::MIN_POSITIVE) {
            let mut dependent: Vec<String> = perm[j..].iter().map(|&c| terms[c].clone()).collect();
            dependent.sort();
            return Err(Error::RankDeficient(dependent));
        }
        if p != j {
            for r in 0..n {
                a.swap([r, j], [r, p]);
            }
            perm.swap(j, p);
        }
        // Reflector mapping a[j.., j] onto -sign(a_jj) * norm * e1.
        let alpha = if a[[j, j]] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a.slice(ndarray::s![j.., j]).to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for c in j..k {
                let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * a[[j + i, c]]).sum();
                let f = 2.0 * dot / vnorm2;
                for (i, vi) in v.iter().enumerate() {
                    a[[j + i, c]] -= f * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * qty[j + i]).sum();
            let f = 2.0 * dot / vnorm2;
            for (i, vi) in v.iter().enumerate() {
                qty[j + i] -= f * vi;
            }
        }
    }

    // Back-substitution for R z = (Q^T y)[..k], then undo the pivoting.
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|c| a[[i, c]] * z[c]).sum();
        z[i] = (qty[i] - s) / a[[i, i]];
    }
    let mut beta = vec![0.0; k];
    for (i, &c) in perm.iter().enumerate() {
        beta[c] = z[i];
    }

    // R^{-1}, upper triangular; diag((X^T X)^{-1}) for column perm[i] is the
    // squared norm of row i.
    let mut rinv = Array2::<f64>::zeros((k, k));
    for col in 0..k {
        for i in (0..=col).rev() {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=col).map(|c| a[[i, c]] * rinv[[c, col]]).sum();
            rinv[[i, col]] = (rhs - s) / a[[i, i]];
        }
    }

    let fitted = x.dot(&Array1::from(beta.clone()));
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = y.sum() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sigma2 = rss / (n - k) as f64;
    let mut se = vec![0.0; k];
    for (i, &c) in perm.iter().enumerate() {
        let d: f64 = rinv.row(i).iter().map(|v| v * v).sum();
        se[c] = (sigma2 * d).sqrt();
    }
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    Ok(OlsFit {
        beta,
        se,
        residuals,
        rss,
        tss,
        r_squared,
        sigma2,
        n,
    })
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub spec: ModelSpec,
    pub terms: Vec<TermEstimate>,
    pub r_squared: f64,
    pub n: usize,
    pub references: References,
}

impl RegressionReport {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.term == name)
    }
}

/// Two-sided normal-approximation p-value for `estimate / se`.
fn normal_p(estimate: f64, se: f64) -> f64 {
    if se == 0.0 {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    erfc((estimate / se).abs() / std::f64::consts::SQRT_2)
}

pub fn fit_model(aggregates: &[RestaurantAggregate], spec: ModelSpec) -> Result<RegressionReport> {
    let design = encode_design_matrix(aggregates, spec)?;
    let fit = fit_ols(design.x.view(), design.y.view(), &design.terms)?;
    let terms = design
        .terms
        .iter()
        .zip(fit.beta.iter().zip(&fit.se))
        .map(|(term, (&estimate, &se))| {
            let p = normal_p(estimate, se);
            TermEstimate {
                term: term.clone(),
                estimate,
                se,
                ci_lo: estimate - 1.96 * se,
                ci_hi: estimate + 1.96 * se,
                p,
                stars: significance_marker(p).to_string(),
            }
        })
        .collect();
    Ok(RegressionReport {
        spec,
        terms,
        r_squared: fit.r_squared,
        n: fit.n,
        references: design.references,
    })
}

/// Fits all four specifications.
pub fn run_model_suite(aggregates: &[RestaurantAggregate]) -> Result<Vec<RegressionReport>> {
    if aggregates.is_empty() {
        return Err(Error::Insufficient("no restaurant aggregates".into()));
    }
    ModelSpec::ALL.par_iter().map(|&s| fit_model(aggregates, s)).collect()
}

fn aspect_label(a: Aspect) -> &'static str {
    match a {
        Aspect::Service => "Service",
        Aspect::FoodQuality => "Food Quality",
        Aspect::Ambiance => "Ambiance",
        Aspect::WaitTime => "Wait Time",
        Aspect::Price => "Price",
        Aspect::MenuVariety => "Menu Variety",
    }
}

fn display_term(term: &str) -> String {
    if let Ok(a) = term.parse::<Aspect>() {
        return aspect_label(a).to_string();
    }
    term.strip_prefix("cuisine:")
        .or_else(|| term.strip_prefix("state:"))
        .unwrap_or(term)
        .to_string()
}

fn estimate_cell(t: &TermEstimate) -> String {
    format!("{:.2} ({:.2}, {:.2}){}", t.estimate, t.ci_lo, t.ci_hi, t.stars)
}

/// Side-by-side markdown table: aspects, then cuisine and state effects,
/// then R² and N.
pub fn suite_markdown(reports: &[RegressionReport]) -> String {
    let mut out = String::from("| Term |");
    for r in reports {
        let _ = write!(out, " Model {} |", r.spec.number());
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');

    let mut row = |label: String, term: &str| {
        let _ = write!(out, "| {label} |");
        for r in reports {
            let cell = r.term(term).map(estimate_cell).unwrap_or_default();
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    };
    for a in Aspect::ALL {
        row(aspect_label(a).to_string(), a.name());
    }
    let mut seen = BTreeSet::new();
    for prefix in ["cuisine:", "state:"] {
        for r in reports {
            for t in r.terms.iter().filter(|t| t.term.starts_with(prefix)) {
                if seen.insert(t.term.clone()) {
                    let group = if prefix == "cuisine:" { "Cuisine" } else { "State" };
                    row(format!("{group}: {}", display_term(&t.term)), &t.term.clone());
                }
            }
        }
    }
    row("Intercept".to_string(), INTERCEPT);

    let _ = write!(out, "| R² |");
    for r in reports {
        let _ = write!(out, " {:.3} |", r.r_squared);
    }
    let _ = write!(out, "\n| N |");
    for r in reports {
        let _ = write!(out, " {} |", r.n);
    }
    out.push('\n');
    let refs: Vec<String> = reports
        .iter()
        .flat_map(|r| [r.references.cuisine.as_ref(), r.references.state.as_ref()])
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !refs.is_empty() {
        let _ = writeln!(out, "\nReference levels: {}.", refs.join(", "));
    }
    out.push_str("Significance: *** p < 0.001, ** p < 0.01, * p < 0.05, . p < 0.1\n");
    out
}

/// One model's coefficients as CSV.
pub fn report_csv(report: &RegressionReport) -> String {
    let mut out = String::from("term,estimate,se,ci_lo,ci_hi,p,stars\n");
    for t in &report.terms {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{}",
            t.term, t.estimate, t.se, t.ci_lo, t.ci_hi, t.p, t.stars
        );
    }
    let _ = writeln!(out, "r_squared,{},,,,,", report.r_squared);
    let _ = writeln!(out, "n,{},,,,,", report.n);
    out
}

/// Plot-ready effect estimates for every non-intercept term.
pub fn effects_csv(reports: &[RegressionReport]) -> String {
    let mut out = String::from("model,group,term,estimate,ci_lo,ci_hi,stars\n");
    for r in reports {
        for t in r.terms.iter().filter(|t| t.term != INTERCEPT) {
            let group = if t.term.starts_with("cuisine:") {
                "cuisine"
            } else if t.term.starts_with("state:") {
                "state"
            } else {
                "aspect"
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.spec.number(),
                group,
                display_term(&t.term),
                t.estimate,
                t.ci_lo,
                t.ci_hi,
                t.stars
            );
        }
    }
    out
}

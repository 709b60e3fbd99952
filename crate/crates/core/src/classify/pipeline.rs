use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train_classifier, ClassifierKind, ClassifierModel, Hyperparams};
use super::rebalance::random_oversample;
use crate::aspect::{Aspect, Sentiment};
use crate::error::{Error, Result};
use crate::ingest::{AspectLabelSet, CorpusRecord, LABEL_HEADER};
use crate::rng;
use crate::textprep::TextPipeline;
use crate::vectorize::{EmbeddingModel, FeatureSpace, FeatureVector, TfidfModel};

const RELEVANT: i32 = 1;
const IRRELEVANT: i32 = 0;
const BUNDLE_FORMAT: &str = "absa-pipeline-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    OneStage,
    TwoStage,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::OneStage => "one_stage",
            Architecture::TwoStage => "two_stage",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "one_stage" => Ok(Architecture::OneStage),
            "two_stage" => Ok(Architecture::TwoStage),
            _ => Err(Error::invalid(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Train/validation row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Seeded 80/20 split shared by all aspects. Rows are shuffled, grouped by
/// their full six-aspect label pattern, and every fifth row of that order
/// goes to validation, so each pattern is spread proportionally.
pub fn split_indices(labels: &[AspectLabelSet], seed: u64) -> Split {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut rng = rng::stream(seed, 0x5350_4c54);
    rng::shuffle(&mut rng, &mut order);
    let signature = |i: usize| labels[i].labels.map(|l| l.map_or(2, |s| s.value()));
    order.sort_by_key(|&i| signature(i));
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
    };
    for (p, &i) in order.iter().enumerate() {
        if (p + 1) / 5 > p / 5 {
            split.validation.push(i);
        } else {
            split.train.push(i);
        }
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub classifier: ClassifierKind,
    pub hyperparams: Hyperparams,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            classifier: ClassifierKind::Logreg,
            hyperparams: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AspectModels {
    OneStage(ClassifierModel),
    TwoStage {
        relevance: ClassifierModel,
        sentiment: ClassifierModel,
    },
}

/// Six per-aspect model sets sharing one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectPipeline {
    pub architecture: Architecture,
    pub feature_space: FeatureSpace,
    pub models: Vec<AspectModels>,
    pub split: Split,
    pub seed: u64,
    pub options: PipelineOptions,
    /// Digest of the feature model the pipeline was trained on.
    pub feature_digest: Option<String>,
}

/// Per-review predictions in aspect storage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentVector {
    pub review_id: String,
    pub values: [Sentiment; 6],
}

fn one_stage_label(labels: &AspectLabelSet, aspect: Aspect) -> i32 {
    labels.get(aspect).map_or(0, Sentiment::value)
}

fn aspect_seed(seed: u64, aspect: Aspect) -> u64 {
    seed ^ rng::stream_for_key(aspect.name())
}

fn ensure_two_classes(y: &[i32], aspect: Aspect, what: &str) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Insufficient(format!("aspect {aspect}: no {what} training rows")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::Insufficient(format!(
            "aspect {aspect}: {what} training labels are all {}",
            y[0]
        )));
    }
    Ok(())
}

impl AspectPipeline {
    fn check_inputs(x: ArrayView2<'_, f64>, labels: &[AspectLabelSet]) -> Result<()> {
        if x.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} label rows",
                x.nrows(),
                labels.len()
            )));
        }
        Ok(())
    }

    /// One 3-class model per aspect; unlabeled (NA) aspects train as neutral.
    pub fn train_one_stage(
        x: ArrayView2<'_, f64>,
        labels: &[AspectLabelSet],
        feature_space: FeatureSpace,
        options: &PipelineOptions,
        seed: u64,
    ) -> Result<AspectPipeline> {
        Self::check_inputs(x, labels)?;
        let split = split_indices(labels, seed);
        let xt = x.select(Axis(0), &split.train);
        let models = Aspect::ALL
            .par_iter()
            .map(|&aspect| {
                let y: Vec<i32> = split.train.iter().map(|&i| one_stage_label(&labels[i], aspect)).collect();
                ensure_two_classes(&y, aspect, "sentiment")?;
                let model = train_classifier(
                    options.classifier,
                    xt.view(),
                    &y,
                    feature_space,
                    &options.hyperparams,
                    aspect_seed(seed, aspect),
                )?;
                Ok(AspectModels::OneStage(model))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AspectPipeline {
            architecture: Architecture::OneStage,
            feature_space,
            models,
            split,
            seed,
            options: options.clone(),
            feature_digest: None,
        })
    }

    /// Binary relevance model plus a 3-class model fit on the relevant,
    /// oversampled training rows.
    pub fn train_two_stage(
        x: ArrayView2<'_, f64>,
        labels: &[AspectLabelSet],
        feature_space: FeatureSpace,
        options: &PipelineOptions,
        seed: u64,
    ) -> Result<AspectPipeline> {
        Self::check_inputs(x, labels)?;
        let split = split_indices(labels, seed);
        let xt = x.select(Axis(0), &split.train);
        let models = Aspect::ALL
            .par_iter()
            .map(|&aspect| {
                let relevance_y: Vec<i32> = split
                    .train
                    .iter()
                    .map(|&i| if labels[i].is_relevant(aspect) { RELEVANT } else { IRRELEVANT })
                    .collect();
                ensure_two_classes(&relevance_y, aspect, "relevance")?;
                let seed = aspect_seed(seed, aspect);
                let relevance = train_classifier(
                    options.classifier,
                    xt.view(),
                    &relevance_y,
                    feature_space,
                    &options.hyperparams,
                    seed,
                )?;

                let relevant: Vec<usize> = split
                    .train
                    .iter()
                    .copied()
                    .filter(|&i| labels[i].is_relevant(aspect))
                    .collect();
                let y: Vec<i32> = relevant
                    .iter()
                    .map(|&i| labels[i].get(aspect).expect("relevant").value())
                    .collect();
                ensure_two_classes(&y, aspect, "relevant sentiment")?;
                let (xs, ys) = random_oversample(x.select(Axis(0), &relevant).view(), &y, seed)?;
                let sentiment = train_classifier(
                    options.classifier,
                    xs.view(),
                    &ys,
                    feature_space,
                    &options.hyperparams,
                    seed,
                )?;
                Ok(AspectModels::TwoStage { relevance, sentiment })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AspectPipeline {
            architecture: Architecture::TwoStage,
            feature_space,
            models,
            split,
            seed,
            options: options.clone(),
            feature_digest: None,
        })
    }

    pub fn train(
        architecture: Architecture,
        x: ArrayView2<'_, f64>,
        labels: &[AspectLabelSet],
        feature_space: FeatureSpace,
        options: &PipelineOptions,
        seed: u64,
    ) -> Result<AspectPipeline> {
        match architecture {
            Architecture::OneStage => Self::train_one_stage(x, labels, feature_space, options, seed),
            Architecture::TwoStage => Self::train_two_stage(x, labels, feature_space, options, seed),
        }
    }

    /// Assembles a pipeline from existing models, e.g. hand-built stubs.
    pub fn from_models(architecture: Architecture, models: Vec<AspectModels>, feature_space: FeatureSpace) -> Result<Self> {
        if models.len() != Aspect::ALL.len() {
            return Err(Error::invalid(format!("expected 6 aspect models, got {}", models.len())));
        }
        let width = first_model(&models[0]).n_features();
        for m in &models {
            let ok = match (architecture, m) {
                (Architecture::OneStage, AspectModels::OneStage(c)) => c.n_features() == width,
                (Architecture::TwoStage, AspectModels::TwoStage { relevance, sentiment }) => {
                    relevance.n_features() == width
                        && sentiment.n_features() == width
                        && relevance.classes == [IRRELEVANT, RELEVANT]
                }
                _ => false,
            };
            if !ok {
                return Err(Error::invalid("aspect models do not match the architecture or feature width"));
            }
        }
        Ok(AspectPipeline {
            architecture,
            feature_space,
            models,
            split: Split {
                train: Vec::new(),
                validation: Vec::new(),
            },
            seed: 0,
            options: PipelineOptions::default(),
            feature_digest: None,
        })
    }

    pub fn n_features(&self) -> usize {
        first_model(&self.models[0]).n_features()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features() {
            return Err(Error::invalid(format!(
                "feature width {width} does not match pipeline width {}",
                self.n_features()
            )));
        }
        Ok(())
    }

    fn to_sentiment(label: i32) -> Sentiment {
        Sentiment::from_value(label).expect("sentiment models predict -1, 0 or 1")
    }

    /// Stage-1 relevance; one-stage pipelines have none.
    pub fn relevance(&self, aspect: Aspect, x: ArrayView1<'_, f64>) -> Result<Option<bool>> {
        match &self.models[aspect.index()] {
            AspectModels::OneStage(_) => Ok(None),
            AspectModels::TwoStage { relevance, .. } => Ok(Some(relevance.predict_one(x)? == RELEVANT)),
        }
    }

    /// The 3-class model's prediction, ignoring stage 1.
    pub fn sentiment_model_prediction(&self, aspect: Aspect, x: ArrayView1<'_, f64>) -> Result<Sentiment> {
        let model = match &self.models[aspect.index()] {
            AspectModels::OneStage(m) => m,
            AspectModels::TwoStage { sentiment, .. } => sentiment,
        };
        Ok(Self::to_sentiment(model.predict_one(x)?))
    }

    pub fn predict_aspect(&self, aspect: Aspect, x: ArrayView1<'_, f64>) -> Result<Sentiment> {
        if self.relevance(aspect, x)? == Some(false) {
            return Ok(Sentiment::Neutral);
        }
        self.sentiment_model_prediction(aspect, x)
    }

    pub fn predict_sentiment_vector(&self, review_id: &str, x: ArrayView1<'_, f64>) -> Result<SentimentVector> {
        self.check_width(x.len())?;
        let mut values = [Sentiment::Neutral; 6];
        for aspect in Aspect::ALL {
            values[aspect.index()] = self.predict_aspect(aspect, x)?;
        }
        Ok(SentimentVector {
            review_id: review_id.to_string(),
            values,
        })
    }

    /// Per-aspect predictions for every row: `result[aspect][row]`.
    pub fn predict_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Vec<Sentiment>>> {
        self.check_width(x.ncols())?;
        Aspect::ALL
            .iter()
            .map(|&aspect| x.outer_iter().map(|row| self.predict_aspect(aspect, row)).collect())
            .collect()
    }

    fn model_files(&self) -> Vec<(String, &ClassifierModel)> {
        let mut files = Vec::new();
        for (aspect, m) in Aspect::ALL.iter().zip(&self.models) {
            match m {
                AspectModels::OneStage(c) => files.push((format!("{}.json", aspect.name()), c)),
                AspectModels::TwoStage { relevance, sentiment } => {
                    files.push((format!("{}.relevance.json", aspect.name()), relevance));
                    files.push((format!("{}.sentiment.json", aspect.name()), sentiment));
                }
            }
        }
        files
    }

    /// Writes the bundle directory: `manifest.json` plus one JSON file per
    /// classifier.
    pub fn save(&self, dir: &Path, config_digest: Option<&str>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = self.model_files();
        for (name, model) in &files {
            model.save(&dir.join(name))?;
        }
        let manifest = Manifest {
            format: BUNDLE_FORMAT.to_string(),
            architecture: self.architecture,
            feature_space: self.feature_space,
            feature_digest: self.feature_digest.clone(),
            config_digest: config_digest.map(str::to_string),
            seed: self.seed,
            options: self.options.clone(),
            train_indices: self.split.train.clone(),
            validation_indices: self.split.validation.clone(),
            files: files.into_iter().map(|(n, _)| n).collect(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<AspectPipeline> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(Error::invalid(format!("unsupported bundle format {:?}", manifest.format)));
        }
        let load = |name: String| ClassifierModel::load(&dir.join(name));
        let models = Aspect::ALL
            .iter()
            .map(|a| match manifest.architecture {
                Architecture::OneStage => Ok(AspectModels::OneStage(load(format!("{}.json", a.name()))?)),
                Architecture::TwoStage => Ok(AspectModels::TwoStage {
                    relevance: load(format!("{}.relevance.json", a.name()))?,
                    sentiment: load(format!("{}.sentiment.json", a.name()))?,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut pipeline = AspectPipeline::from_models(manifest.architecture, models, manifest.feature_space)?;
        pipeline.split = Split {
            train: manifest.train_indices,
            validation: manifest.validation_indices,
        };
        pipeline.seed = manifest.seed;
        pipeline.options = manifest.options;
        pipeline.feature_digest = manifest.feature_digest;
        Ok(pipeline)
    }

    /// Manifest-level metadata without loading the models.
    pub fn read_manifest(dir: &Path) -> Result<Manifest> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn first_model(m: &AspectModels) -> &ClassifierModel {
    match m {
        AspectModels::OneStage(c) => c,
        AspectModels::TwoStage { relevance, .. } => relevance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub architecture: Architecture,
    pub feature_space: FeatureSpace,
    pub feature_digest: Option<String>,
    pub config_digest: Option<String>,
    pub seed: u64,
    pub options: PipelineOptions,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub files: Vec<String>,
}

/// Maps token lists into a pipeline's feature space.
#[derive(Debug, Clone, Copy)]
pub enum Featurizer<'a> {
    Embedding(&'a EmbeddingModel),
    Tfidf(&'a TfidfModel),
}

impl Featurizer<'_> {
    pub fn space(&self) -> FeatureSpace {
        match self {
            Featurizer::Embedding(_) => FeatureSpace::Embedding,
            Featurizer::Tfidf(_) => FeatureSpace::Tfidf,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Featurizer::Embedding(m) => m.dim(),
            Featurizer::Tfidf(m) => m.dim(),
        }
    }

    pub fn featurize(&self, tokens: &[String]) -> FeatureVector {
        match self {
            Featurizer::Embedding(m) => m.embed_review(tokens),
            Featurizer::Tfidf(m) => m.transform(tokens),
        }
    }

    pub fn matrix(&self, docs: &[Vec<String>]) -> Array2<f64> {
        let rows: Vec<FeatureVector> = docs.par_iter().map(|d| self.featurize(d)).collect();
        feature_matrix(&rows, self.dim())
    }
}

/// Stacks feature rows into an `n × dim` matrix.
pub fn feature_matrix(rows: &[FeatureVector], dim: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), dim));
    for (mut out, row) in m.outer_iter_mut().zip(rows) {
        out.assign(&ArrayView1::from(&row.values[..]));
    }
    m
}

pub fn prediction_header() -> [&'static str; 7] {
    LABEL_HEADER
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PredictSummary {
    pub rows: u64,
}

const PREDICT_BATCH: usize = 4096;

/// Streams records through preprocessing, featurization and the pipeline,
/// writing one CSV row per record in input order. Batches are split across
/// `workers` threads; the output does not depend on the worker count.
pub fn predict_corpus<I, W>(
    pipeline: &AspectPipeline,
    records: I,
    featurizer: &Featurizer<'_>,
    text: &TextPipeline,
    out: W,
    workers: usize,
) -> Result<PredictSummary>
where
    I: Iterator<Item = Result<CorpusRecord>>,
    W: Write,
{
    if featurizer.space() != pipeline.feature_space {
        return Err(Error::invalid(format!(
            "pipeline expects {:?} features but the featurizer produces {:?}",
            pipeline.feature_space,
            featurizer.space()
        )));
    }
    pipeline.check_width(featurizer.dim())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;

    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(prediction_header())?;
    let mut summary = PredictSummary::default();
    let mut records = records.peekable();
    while records.peek().is_some() {
        let batch: Vec<CorpusRecord> = records.by_ref().take(PREDICT_BATCH).collect::<Result<_>>()?;
        let rows: Vec<SentimentVector> = pool.install(|| {
            batch
                .par_iter()
                .map(|r| {
                    let tokens = text.preprocess(&r.text);
                    let features = featurizer.featurize(&tokens);
                    pipeline.predict_sentiment_vector(&r.review_id, ArrayView1::from(&features.values[..]))
                })
                .collect::<Result<_>>()
        })?;
        for row in &rows {
            write_prediction(&mut writer, row)?;
        }
        summary.rows += rows.len() as u64;
    }
    writer.flush().map_err(|e| Error::invalid(format!("writing predictions: {e}")))?;
    Ok(summary)
}

fn write_prediction<W: Write>(writer: &mut csv::Writer<W>, row: &SentimentVector) -> Result<()> {
    let mut record = Vec::with_capacity(7);
    record.push(row.review_id.clone());
    record.extend(row.values.iter().map(|s| s.value().to_string()));
    writer.write_record(&record)?;
    Ok(())
}

/// Reads a prediction CSV written by [`predict_corpus`].
pub fn read_predictions<R: std::io::Read>(reader: R, source: &str) -> Result<Vec<SentimentVector>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if header != prediction_header() {
        return Err(Error::Parse {
            path: source.into(),
            line: 1,
            message: format!("expected header {}", prediction_header().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i as u64 + 2;
        let mut values = [Sentiment::Neutral; 6];
        for (slot, cell) in values.iter_mut().zip(record.iter().skip(1)) {
            *slot = cell
                .trim()
                .parse::<i32>()
                .ok()
                .and_then(Sentiment::from_value)
                .ok_or_else(|| Error::Parse {
                    path: source.into(),
                    line,
                    message: format!("invalid prediction value {cell:?}"),
                })?;
        }
        rows.push(SentimentVector {
            review_id: record.get(0).unwrap_or_default().to_string(),
            values,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn labels_with(values: [Option<i32>; 6]) -> AspectLabelSet {
        AspectLabelSet {
            review_id: "r".into(),
            labels: values.map(|v| v.and_then(Sentiment::from_value)),
        }
    }

    /// A model whose argmax is always `class` (bias-only).
    fn constant(classes: Vec<i32>, class: i32, width: usize) -> ClassifierModel {
        let mut bias = Array1::zeros(classes.len());
        bias[classes.iter().position(|&c| c == class).unwrap()] = 1.0;
        ClassifierModel::from_parts(
            ClassifierKind::Logreg,
            classes.clone(),
            Array2::zeros((classes.len(), width)),
            bias,
            FeatureSpace::Embedding,
            Hyperparams::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn split_sizes() {
        let labels: Vec<AspectLabelSet> = (0..5000)
            .map(|i| labels_with([Some(i % 3 - 1), None, Some(1), None, None, Some((i / 7) % 2)]))
            .collect();
        let split = split_indices(&labels, 9);
        assert_eq!(split.train.len(), 4000);
        assert_eq!(split.validation.len(), 1000);
        assert_eq!(split, split_indices(&labels, 9));
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..5000).collect::<Vec<_>>());
    }

    #[test]
    fn all_irrelevant_two_stage_predicts_neutral() {
        let models = (0..6)
            .map(|_| AspectModels::TwoStage {
                relevance: constant(vec![0, 1], IRRELEVANT, 3),
                sentiment: constant(vec![-1, 0, 1], 1, 3),
            })
            .collect();
        let p = AspectPipeline::from_models(Architecture::TwoStage, models, FeatureSpace::Embedding).unwrap();
        let v = p.predict_sentiment_vector("r1", ArrayView1::from(&[0.3, -0.2, 0.9])).unwrap();
        assert_eq!(v.values, [Sentiment::Neutral; 6]);
    }

    #[test]
    fn stub_pipeline_returns_stub_classes() {
        let wanted = [1, -1, 0, 1, 0, -1];
        let models = wanted
            .iter()
            .map(|&c| AspectModels::OneStage(constant(vec![-1, 0, 1], c, 2)))
            .collect();
        let p = AspectPipeline::from_models(Architecture::OneStage, models, FeatureSpace::Embedding).unwrap();
        let v = p.predict_sentiment_vector("r", ArrayView1::from(&[1.0, 2.0])).unwrap();
        assert_eq!(v.values.map(Sentiment::value), wanted);
    }

    #[test]
    fn na_trains_as_neutral() {
        assert_eq!(one_stage_label(&labels_with([None; 6]), Aspect::WaitTime), 0);
    }

    #[test]
    fn single_class_aspect_is_named() {
        let labels: Vec<AspectLabelSet> = (0..20)
            .map(|i| labels_with([Some(i % 2), Some(1), Some(i % 3 - 1), Some(0), Some(-1 + i % 2), None]))
            .collect();
        let x = Array2::from_shape_fn((20, 2), |(i, j)| (i + j) as f64);
        let err = AspectPipeline::train_one_stage(x.view(), &labels, FeatureSpace::Embedding, &PipelineOptions::default(), 1)
            .unwrap_err();
        assert!(err.to_string().contains("food_quality"), "{err}");
    }

    #[test]
    fn prediction_csv_round_trip() {
        let rows = vec![SentimentVector {
            review_id: "abc".into(),
            values: [Sentiment::Positive, Sentiment::Neutral, Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive, Sentiment::Neutral],
        }];
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(prediction_header()).unwrap();
        write_prediction(&mut w, &rows[0]).unwrap();
        let bytes = w.into_inner().unwrap();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "review_id,service,food_quality,ambiance,wait_time,price,menu_variety\nabc,1,0,-1,0,1,0\n"
        );
        assert_eq!(read_predictions(bytes.as_slice(), "mem").unwrap(), rows);
    }
}

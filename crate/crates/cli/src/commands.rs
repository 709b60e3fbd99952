use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use absa_core::aspects::{agreement_csv, aspect_agreement, emit_prompt, load_responses};
use absa_core::classify::{
    model_selection, predict_corpus, read_predictions, selection_table_csv, split_indices, Architecture,
    AspectPipeline, Featurizer, Manifest,
};
use absa_core::evaluate::{
    agreement_report, compare_architectures, evaluate_pipeline, kappa_table_csv, mcnemar_table_csv,
    metrics_table_csv, pearson_table_csv, AspectAgreement, AspectComparison, PipelineEvaluation,
};
use absa_core::ingest::{
    corpus_records, load_labels, read_corpus_file, sample_reviews, write_corpus_file, AspectLabelSet, CorpusReader,
    CorpusRecord, SampleStrategy, StatsBuilder,
};
use absa_core::lda::{fit_groups, Granularity};
use absa_core::regress::{
    aggregate_restaurants, aggregate_rows, effects_csv, fit_model, read_aggregates, report_csv, run_model_suite,
    suite_markdown, write_aggregates, ModelSpec, RegressionReport,
};
use absa_core::testkit::{generate, SynthSpec, TemplateMode};
use absa_core::textprep::{TextPipeline, TokenList};
use absa_core::vectorize::{fit_tfidf, EmbeddingModel, EmbeddingTrainer, FeatureSpace, TfidfModel};
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::context::{data_error, log, Artifact, Context, Failure};
use crate::{
    AggregateArgs, AspectsAgreeArgs, CompareArgs, EvaluateArgs, IngestArgs, LdaArgs, PredictArgs, PromptArgs,
    RegressArgs, ReportArgs, SampleArgs, SynthArgs, TrainArgs, TrainEmbeddingsArgs,
};

type Outcome = Result<(), Failure>;

const PIPELINE_DIR: &str = "pipeline";
const TFIDF_FILE: &str = "tfidf.json";

fn open_create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn flush(mut w: impl Write, path: &Path) -> Outcome {
    w.flush().map_err(|e| data_error(format!("{}: {e}", path.display())))
}

fn tokenize(text: &TextPipeline, records: &[&CorpusRecord]) -> Vec<TokenList> {
    records.par_iter().map(|r| text.preprocess(&r.text)).collect()
}

/// Corpus records for each label row, in label order.
fn labeled_records<'a>(corpus: &'a [CorpusRecord], labels: &[AspectLabelSet]) -> Result<Vec<&'a CorpusRecord>, Failure> {
    let by_id: HashMap<&str, &CorpusRecord> = corpus.iter().map(|r| (r.review_id.as_str(), r)).collect();
    let missing: Vec<&str> = labels
        .iter()
        .map(|l| l.review_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        return Err(data_error(format!(
            "{} labeled reviews are missing from the corpus (e.g. {})",
            missing.len(),
            shown.join(", ")
        )));
    }
    Ok(labels.iter().map(|l| by_id[l.review_id.as_str()]).collect())
}

enum FeatureModel {
    Embedding(EmbeddingModel),
    Tfidf(TfidfModel),
}

impl FeatureModel {
    fn featurizer(&self) -> Featurizer<'_> {
        match self {
            FeatureModel::Embedding(m) => Featurizer::Embedding(m),
            FeatureModel::Tfidf(m) => Featurizer::Tfidf(m),
        }
    }

    fn digest(&self) -> Result<String, Failure> {
        Ok(match self {
            FeatureModel::Embedding(m) => m.digest(),
            FeatureModel::Tfidf(m) => hex(&Sha256::digest(serde_json::to_vec(m)?)),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The feature model a bundle was trained with, verified by digest.
fn bundle_features(bundle: &Path, manifest: &Manifest, emb: Option<&Path>) -> Result<FeatureModel, Failure> {
    let model = match manifest.feature_space {
        FeatureSpace::Embedding => {
            let path = emb.ok_or_else(|| {
                data_error(format!("{} uses embedding features; pass --emb", bundle.display()))
            })?;
            FeatureModel::Embedding(EmbeddingModel::load(path)?)
        }
        FeatureSpace::Tfidf => FeatureModel::Tfidf(TfidfModel::load(&bundle.join(TFIDF_FILE))?),
    };
    if let Some(expected) = &manifest.feature_digest {
        if model.digest()? != *expected {
            return Err(data_error(format!(
                "feature model does not match the one {} was trained with",
                bundle.display()
            )));
        }
    }
    Ok(model)
}

fn load_bundle(dir: &Path, emb: Option<&Path>) -> Result<(AspectPipeline, FeatureModel), Failure> {
    let manifest = AspectPipeline::read_manifest(dir)?;
    let features = bundle_features(dir, &manifest, emb)?;
    Ok((AspectPipeline::load(dir)?, features))
}

fn feature_rows(features: &FeatureModel, text: &TextPipeline, records: &[&CorpusRecord]) -> Array2<f64> {
    features.featurizer().matrix(&tokenize(text, records))
}

/// Rows and labels a pipeline was validated on.
fn validation_rows(
    pipeline: &AspectPipeline,
    x: &Array2<f64>,
    labels: &[AspectLabelSet],
) -> Result<(Array2<f64>, Vec<AspectLabelSet>), Failure> {
    let split = &pipeline.split;
    if split.train.len() + split.validation.len() != labels.len() {
        return Err(data_error(format!(
            "label file has {} rows but the pipeline was trained on {}",
            labels.len(),
            split.train.len() + split.validation.len()
        )));
    }
    let rows = &split.validation;
    Ok((x.select(Axis(0), rows), rows.iter().map(|&i| labels[i].clone()).collect()))
}

pub fn ingest(ctx: &Context, a: &IngestArgs) -> Outcome {
    let mut reader = CorpusReader::open(&a.reviews, &a.business, ctx.config.ingest.tolerance)?;
    let path = ctx.output("corpus.jsonl")?;
    let mut out = open_create(&path)?;
    let mut stats = StatsBuilder::default();
    for record in reader.by_ref() {
        let record = record?;
        stats.add(&record);
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    }
    flush(out, &path)?;
    let diagnostics = reader.finish()?;
    let stats = stats.build();
    log("info", "ingest", json!({ "records": stats.reviews, "businesses": stats.businesses }));
    ctx.write_artifact("stats.json", "ingest", json!({ "stats": stats, "diagnostics": diagnostics }))?;
    ctx.finish("ingest", a)
}

pub fn sample(ctx: &Context, a: &SampleArgs) -> Outcome {
    let corpus = read_corpus_file(&a.corpus)?;
    let strategy = match (a.uniform, a.businesses, a.per) {
        (Some(n), _, _) => SampleStrategy::Uniform { n },
        (None, Some(businesses), Some(per)) => SampleStrategy::PerBusiness {
            businesses,
            per,
            state: a.state.clone(),
        },
        _ => return Err(Failure::Usage("sample needs --uniform N or --businesses K --per M".into())),
    };
    let drawn = sample_reviews(&corpus, &strategy, ctx.seed())?;
    write_corpus_file(&ctx.output("sample.jsonl")?, &drawn)?;
    log("info", "sample", json!({ "records": drawn.len() }));
    ctx.finish("sample", a)
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Outcome {
    let cfg = &ctx.config.synth;
    let mut spec = SynthSpec::new(a.businesses, a.per, ctx.seed());
    spec.weights = cfg.weights.to_array();
    spec.sigma = cfg.sigma;
    spec.relevance = cfg.relevance;
    spec.neutral_share = cfg.neutral_share;
    spec.mode = if a.overlap { TemplateMode::Overlap } else { cfg.mode };
    let corpus = generate(&spec)?;
    let dir = ctx.output("run.json")?.parent().map(Path::to_path_buf).unwrap_or_default();
    let files = corpus.write(&dir)?;
    log("info", "synth", json!({ "reviews": corpus.reviews.len(), "businesses": corpus.businesses.len(), "files": files }));
    ctx.finish("synth", a)
}

/// Keeps file names portable whatever the business id contains.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn prompt(ctx: &Context, a: &PromptArgs) -> Outcome {
    let corpus = read_corpus_file(&a.corpus)?;
    let mut by_business: BTreeMap<&str, Vec<CorpusRecord>> = BTreeMap::new();
    for r in &corpus {
        by_business.entry(&r.business_id).or_default().push(r.clone());
    }
    if by_business.is_empty() {
        return Err(data_error(format!("{} holds no reviews", a.corpus.display())));
    }
    for (id, reviews) in &by_business {
        ctx.write(&format!("prompts/{}.txt", file_stem(id)), emit_prompt(reviews)? + "\n")?;
    }
    log("info", "prompt", json!({ "businesses": by_business.len() }));
    ctx.finish("prompt", a)
}

pub fn aspects_agree(ctx: &Context, a: &AspectsAgreeArgs) -> Outcome {
    let rows = aspect_agreement(&load_responses(&a.first)?, &load_responses(&a.second)?)?;
    ctx.write("aspect_agreement.csv", agreement_csv(&rows))?;
    ctx.write_artifact("aspect_agreement.json", "aspects-agree", &rows)?;
    ctx.finish("aspects-agree", a)
}

pub fn train_embeddings(ctx: &Context, a: &TrainEmbeddingsArgs) -> Outcome {
    let corpus = read_corpus_file(&a.corpus)?;
    let text = ctx.text_pipeline()?;
    let refs: Vec<&CorpusRecord> = corpus.iter().collect();
    let docs = tokenize(&text, &refs);
    let model = EmbeddingTrainer::train(&docs, &ctx.config.embedding, ctx.seed(), ctx.workers)?;
    model.save(&ctx.output("embeddings.bin")?)?;
    let summary = json!({
        "digest": model.digest(),
        "vocab_size": model.vocab().len(),
        "dim": model.dim(),
        "sentences": docs.len(),
        "params": ctx.config.embedding,
        "seed": ctx.seed(),
    });
    log("info", "train-embeddings", json!({ "vocab_size": model.vocab().len() }));
    ctx.write_artifact("embeddings.json", "train-embeddings", summary)?;
    ctx.finish("train-embeddings", a)
}

pub fn train(ctx: &Context, a: &TrainArgs) -> Outcome {
    let architecture: Architecture = a.arch.parse()?;
    let labels = load_labels(&a.labels)?;
    let corpus = read_corpus_file(&a.corpus)?;
    let records = labeled_records(&corpus, &labels)?;
    let text = ctx.text_pipeline()?;
    let docs = tokenize(&text, &records);
    let features = match &a.emb {
        Some(path) => FeatureModel::Embedding(EmbeddingModel::load(path)?),
        None => FeatureModel::Tfidf(fit_tfidf(&docs, ctx.config.tfidf.max_features)?),
    };
    let x = features.featurizer().matrix(&docs);
    let space = features.featurizer().space();
    let mut pipeline = AspectPipeline::train(architecture, x.view(), &labels, space, &ctx.config.classifier, ctx.seed())?;
    pipeline.feature_digest = Some(features.digest()?);
    let dir = ctx.output(&format!("{PIPELINE_DIR}/manifest.json"))?;
    let dir = dir.parent().expect("bundle directory");
    pipeline.save(dir, Some(&ctx.digest))?;
    if let FeatureModel::Tfidf(m) = &features {
        m.save(&dir.join(TFIDF_FILE))?;
    }
    log(
        "info",
        "train",
        json!({
            "architecture": architecture.name(),
            "train_rows": pipeline.split.train.len(),
            "validation_rows": pipeline.split.validation.len(),
        }),
    );
    ctx.finish("train", a)
}

pub fn predict(ctx: &Context, a: &PredictArgs) -> Outcome {
    let (pipeline, features) = load_bundle(&a.pipeline, a.features.emb.as_deref())?;
    let text = ctx.text_pipeline()?;
    let path = ctx.output("predictions.csv")?;
    let out = open_create(&path)?;
    let summary = predict_corpus(&pipeline, corpus_records(&a.corpus)?, &features.featurizer(), &text, out, ctx.workers)?;
    log("info", "predict", json!({ "rows": summary.rows, "workers": ctx.workers }));
    ctx.write_artifact("predict.json", "predict", &summary)?;
    ctx.finish("predict", a)
}

pub fn evaluate(ctx: &Context, a: &EvaluateArgs) -> Outcome {
    let text = ctx.text_pipeline()?;
    if let Some(dir) = &a.pipeline {
        let (labels_path, corpus_path) = (a.labels.as_ref().expect("clap"), a.corpus.as_ref().expect("clap"));
        let (pipeline, features) = load_bundle(dir, a.features.emb.as_deref())?;
        let labels = load_labels(labels_path)?;
        let corpus = read_corpus_file(corpus_path)?;
        let x = feature_rows(&features, &text, &labeled_records(&corpus, &labels)?);
        let evaluation = if a.all_rows {
            evaluate_pipeline(&pipeline, x.view(), &labels)?
        } else {
            let (xv, lv) = validation_rows(&pipeline, &x, &labels)?;
            evaluate_pipeline(&pipeline, xv.view(), &lv)?
        };
        ctx.write("metrics.csv", metrics_table_csv(&evaluation))?;
        ctx.write_artifact("evaluation.json", "evaluate", &evaluation)?;
        log("info", "evaluate", json!({ "architecture": evaluation.architecture.name(), "rows": evaluation.rows }));
    }
    if !a.annotators.is_empty() {
        let sets = a.annotators.iter().map(|p| load_labels(p)).collect::<Result<Vec<_>, _>>()?;
        let rows = agreement_report(&sets)?;
        ctx.write("kappa.csv", kappa_table_csv(&rows))?;
        ctx.write("pearson.csv", pearson_table_csv(&rows))?;
        ctx.write_artifact("agreement.json", "evaluate", &rows)?;
    }
    if a.selection {
        let labels = load_labels(a.labels.as_ref().expect("clap"))?;
        let corpus = read_corpus_file(a.corpus.as_ref().expect("clap"))?;
        let records = labeled_records(&corpus, &labels)?;
        let docs = tokenize(&text, &records);
        let emb = EmbeddingModel::load(a.features.emb.as_ref().expect("clap"))?;
        let split = split_indices(&labels, ctx.seed());
        let train_docs: Vec<TokenList> = split.train.iter().map(|&i| docs[i].clone()).collect();
        let tfidf = fit_tfidf(&train_docs, ctx.config.tfidf.max_features)?;
        let tx = Featurizer::Tfidf(&tfidf).matrix(&docs);
        let ex = Featurizer::Embedding(&emb).matrix(&docs);
        let rows = model_selection(tx.view(), ex.view(), &labels, &split, &ctx.config.classifier.hyperparams, ctx.seed());
        ctx.write("selection.csv", selection_table_csv(&rows))?;
        ctx.write_artifact("selection.json", "evaluate", &rows)?;
    }
    ctx.finish("evaluate", a)
}

pub fn compare(ctx: &Context, a: &CompareArgs) -> Outcome {
    let (one, features) = load_bundle(&a.one_stage, a.features.emb.as_deref())?;
    let two_manifest = AspectPipeline::read_manifest(&a.two_stage)?;
    if two_manifest.feature_digest != one.feature_digest {
        return Err(data_error("the two pipelines were trained on different feature models"));
    }
    let two = AspectPipeline::load(&a.two_stage)?;
    if one.split != two.split {
        return Err(data_error("the two pipelines use different train/validation splits"));
    }
    let labels = load_labels(&a.labels)?;
    let corpus = read_corpus_file(&a.corpus)?;
    let text = ctx.text_pipeline()?;
    let x = feature_rows(&features, &text, &labeled_records(&corpus, &labels)?);
    let (xv, lv) = validation_rows(&one, &x, &labels)?;
    let rows = compare_architectures(&one, &two, xv.view(), &lv)?;
    ctx.write("mcnemar.csv", mcnemar_table_csv(&rows))?;
    ctx.write_artifact("comparison.json", "compare", &rows)?;
    ctx.finish("compare", a)
}

pub fn aggregate(ctx: &Context, a: &AggregateArgs) -> Outcome {
    let corpus = corpus_records(&a.corpus)?;
    let (aggs, diag) = match (&a.predictions, &a.labels) {
        (Some(p), _) => {
            let file = File::open(p).map_err(|e| data_error(format!("{}: {e}", p.display())))?;
            let preds = read_predictions(file, &p.display().to_string())?;
            aggregate_restaurants(preds.into_iter().map(Ok), corpus)?
        }
        (None, Some(l)) => {
            let rows = load_labels(l)?
                .into_iter()
                .map(|s| Ok((s.review_id, s.labels.map(|v| v.map_or(0, |v| v.value())))));
            aggregate_rows(rows, corpus, ctx.config.ingest.tolerance)?
        }
        (None, None) => return Err(Failure::Usage("aggregate needs --predictions or --labels".into())),
    };
    let path = ctx.output("aggregates.csv")?;
    write_aggregates(open_create(&path)?, &aggs)?;
    log("info", "aggregate", json!({ "businesses": aggs.len(), "unknown_reviews": diag.unknown_reviews }));
    ctx.write_artifact("aggregate.json", "aggregate", &diag)?;
    ctx.finish("aggregate", a)
}

pub fn regress(ctx: &Context, a: &RegressArgs) -> Outcome {
    let file = File::open(&a.aggregates).map_err(|e| data_error(format!("{}: {e}", a.aggregates.display())))?;
    let aggs = read_aggregates(file, &a.aggregates.display().to_string())?;
    let reports = match a.spec {
        Some(n) => vec![fit_model(&aggs, ModelSpec::try_from(n)?)?],
        None => run_model_suite(&aggs)?,
    };
    for r in &reports {
        ctx.write(&format!("model_{}.csv", r.spec.number()), report_csv(r))?;
    }
    ctx.write("effects.csv", effects_csv(&reports))?;
    ctx.write("regression.md", suite_markdown(&reports))?;
    ctx.write_artifact("regression.json", "regress", &reports)?;
    ctx.finish("regress", a)
}

pub fn lda(ctx: &Context, a: &LdaArgs) -> Outcome {
    let corpus = read_corpus_file(&a.corpus)?;
    let cfg = &ctx.config.lda;
    let granularity = if a.pooled { Granularity::Pooled } else { cfg.granularity };
    let text = ctx.text_pipeline()?;
    let summaries = fit_groups(&corpus, &text, granularity, cfg.params(), cfg.top_words, ctx.seed())?;
    let mut lines = String::new();
    for s in &summaries {
        lines.push_str(&serde_json::to_string(s)?);
        lines.push('\n');
    }
    ctx.write("lda_topics.jsonl", lines)?;
    log("info", "lda", json!({ "models": summaries.len() }));
    ctx.finish("lda", a)
}

fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, Failure> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    let artifact: Artifact<T> =
        serde_json::from_str(&text).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    Ok(Some(artifact.data))
}

fn csv_to_markdown(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(cells.len())));
        }
    }
    out
}

pub fn report(ctx: &Context, a: &ReportArgs) -> Outcome {
    let mut files: Vec<(String, String)> = Vec::new();
    let mut sections: Vec<String> = Vec::new();
    let mut regressions: Vec<RegressionReport> = Vec::new();
    for dir in &a.artifacts {
        if !dir.is_dir() {
            return Err(data_error(format!("artifact directory {} does not exist", dir.display())));
        }
        if let Some(eval) = read_artifact::<PipelineEvaluation>(&dir.join("evaluation.json"))? {
            let csv = metrics_table_csv(&eval);
            let name = unique_name(&files, &format!("metrics_{}", eval.architecture.name()), "csv");
            sections.push(format!("## Classification metrics ({})\n\n{}", eval.architecture.name(), csv_to_markdown(&csv)));
            files.push((name, csv));
        }
        if let Some(rows) = read_artifact::<Vec<AspectComparison>>(&dir.join("comparison.json"))? {
            let csv = mcnemar_table_csv(&rows);
            sections.push(format!("## McNemar test, two-stage vs one-stage\n\n{}", csv_to_markdown(&csv)));
            files.push((unique_name(&files, "mcnemar", "csv"), csv));
        }
        if let Some(rows) = read_artifact::<Vec<AspectAgreement>>(&dir.join("agreement.json"))? {
            let (k, p) = (kappa_table_csv(&rows), pearson_table_csv(&rows));
            sections.push(format!("## Fleiss' kappa\n\n{}", csv_to_markdown(&k)));
            sections.push(format!("## Pearson agreement\n\n{}", csv_to_markdown(&p)));
            files.push((unique_name(&files, "kappa", "csv"), k));
            files.push((unique_name(&files, "pearson", "csv"), p));
        }
        if let Some(rows) = read_artifact::<Vec<RegressionReport>>(&dir.join("regression.json"))? {
            regressions.extend(rows);
        }
    }
    if !regressions.is_empty() {
        let md = suite_markdown(&regressions);
        sections.push(format!("## Regression of overall rating\n\n{md}"));
        files.push(("regression.md".into(), md));
        files.push(("effects.csv".into(), effects_csv(&regressions)));
    }
    if sections.is_empty() {
        let dirs: Vec<String> = a.artifacts.iter().map(|d| d.display().to_string()).collect();
        return Err(data_error(format!(
            "no evaluation.json, comparison.json, agreement.json or regression.json found in {}",
            dirs.join(", ")
        )));
    }
    let mut md = String::from("# ABSA report\n\n");
    md.push_str(&sections.join("\n"));
    md.push_str(&format!("\n<!-- config_digest: {} -->\n", ctx.digest));
    files.push(("report.md".into(), md));
    for (name, contents) in &files {
        ctx.write(name, contents)?;
    }
    ctx.finish("report", a)
}

fn unique_name(files: &[(String, String)], stem: &str, ext: &str) -> String {
    let taken = |n: &str| files.iter().any(|(f, _)| f == n);
    let first = format!("{stem}.{ext}");
    if !taken(&first) {
        return first;
    }
    (2..)
        .map(|i| format!("{stem}_{i}.{ext}"))
        .find(|n| !taken(n))
        .expect("unbounded")
}


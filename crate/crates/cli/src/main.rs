//! `absa`: one subcommand per pipeline stage, file-based handoff between
//! stages. Exit status 0 on success, 1 on data errors, 2 on usage errors.

mod commands;
mod config;
mod context;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use context::{log, Context, Failure};

#[derive(Parser, Debug)]
#[command(name = "absa", version, about = "Aspect-based sentiment analysis pipeline for restaurant reviews")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config file).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads for prediction and per-aspect training.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    workers: usize,

    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "PATH", default_value = ".")]
    out: PathBuf,

    /// Config override, e.g. `--set embedding.dim=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Join Yelp-format review and business files into a restaurant corpus.
    Ingest(IngestArgs),
    /// Draw a reproducible review sample from a corpus.
    Sample(SampleArgs),
    /// Generate a synthetic corpus with known labels and rating weights.
    Synth(SynthArgs),
    /// Write aspect-discovery prompts, one per business.
    Prompt(PromptArgs),
    /// Occurrence and agreement of aspects named by two models.
    AspectsAgree(AspectsAgreeArgs),
    /// Train subword skip-gram embeddings on a corpus.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Train a one-stage or two-stage aspect pipeline on labeled reviews.
    Train(TrainArgs),
    /// Predict aspect sentiments for every review in a corpus.
    Predict(PredictArgs),
    /// Evaluate a pipeline, annotator agreement, or classifier selection.
    Evaluate(EvaluateArgs),
    /// McNemar comparison of one-stage and two-stage pipelines.
    Compare(CompareArgs),
    /// Average review-level sentiments per restaurant.
    Aggregate(AggregateArgs),
    /// Fit the rating regression models on restaurant aggregates.
    Regress(RegressArgs),
    /// LDA topics per sentiment group and restaurant.
    Lda(LdaArgs),
    /// Render report tables from earlier artifacts.
    Report(ReportArgs),
}

#[derive(Args, Debug, serde::Serialize)]
pub struct IngestArgs {
    #[arg(long, value_name = "PATH")]
    pub reviews: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub business: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(group(ArgGroup::new("strategy").required(true).args(["uniform", "businesses"])))]
pub struct SampleArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Draw N reviews uniformly without replacement.
    #[arg(long, value_name = "N")]
    pub uniform: Option<usize>,
    /// Draw K businesses, then `--per` reviews from each.
    #[arg(long, value_name = "K", requires = "per")]
    pub businesses: Option<usize>,
    #[arg(long, value_name = "M")]
    pub per: Option<usize>,
    /// Restrict per-business sampling to one state code.
    #[arg(long, value_name = "CODE")]
    pub state: Option<String>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct SynthArgs {
    #[arg(long, value_name = "N")]
    pub businesses: usize,
    /// Reviews per business.
    #[arg(long, value_name = "M")]
    pub per: usize,
    /// Use templates whose words overlap across aspects and polarities.
    #[arg(long)]
    pub overlap: bool,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct PromptArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct AspectsAgreeArgs {
    /// First model's responses (JSON array or JSON lines).
    #[arg(long, value_name = "PATH")]
    pub first: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub second: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct TrainEmbeddingsArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct FeatureArgs {
    /// Embedding model; omit to use the TF-IDF model stored in the bundle.
    #[arg(long, value_name = "PATH")]
    pub emb: Option<PathBuf>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct TrainArgs {
    #[arg(long, value_name = "ARCH", value_parser = ["one-stage", "two-stage"])]
    pub arch: String,
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// Corpus holding the labeled reviews' texts.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Embedding model for features.
    #[arg(long, value_name = "PATH", conflicts_with = "tfidf")]
    pub emb: Option<PathBuf>,
    /// Fit TF-IDF features on the labeled texts instead of embeddings.
    #[arg(long, required_unless_present = "emb")]
    pub tfidf: bool,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct PredictArgs {
    #[arg(long, value_name = "DIR")]
    pub pipeline: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(group(ArgGroup::new("mode").required(true).multiple(true).args(["pipeline", "annotators", "selection"])))]
pub struct EvaluateArgs {
    /// Pipeline bundle to score on its validation rows.
    #[arg(long, value_name = "DIR", requires_all = ["labels", "corpus"])]
    pub pipeline: Option<PathBuf>,
    /// Score every labeled row instead of the validation split.
    #[arg(long, requires = "pipeline")]
    pub all_rows: bool,
    /// Two or more annotator label files for kappa and Pearson agreement.
    #[arg(long, value_name = "PATH", num_args = 2..)]
    pub annotators: Vec<PathBuf>,
    /// Compare classifier and feature combinations (needs --emb).
    #[arg(long, requires_all = ["labels", "corpus", "emb"])]
    pub selection: bool,
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct CompareArgs {
    #[arg(long, value_name = "DIR")]
    pub one_stage: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub two_stage: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Args, Debug, serde::Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["predictions", "labels"])))]
pub struct AggregateArgs {
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
    /// Aggregate ground-truth labels instead (NA counts as 0).
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct RegressArgs {
    #[arg(long, value_name = "PATH")]
    pub aggregates: PathBuf,
    /// Fit one specification (1-4) instead of all four.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u8).range(1..=4))]
    pub spec: Option<u8>,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct LdaArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// One model per sentiment group instead of per restaurant.
    #[arg(long)]
    pub pooled: bool,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct ReportArgs {
    /// Directories holding evaluate/compare/regress outputs. Repeatable.
    #[arg(long = "artifacts", value_name = "DIR", required = true)]
    pub artifacts: Vec<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = Context::new(
        cli.global.config.as_deref(),
        &cli.global.sets,
        cli.global.seed,
        cli.global.workers,
        cli.global.out,
    )?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, &a),
        Command::Sample(a) => commands::sample(&ctx, &a),
        Command::Synth(a) => commands::synth(&ctx, &a),
        Command::Prompt(a) => commands::prompt(&ctx, &a),
        Command::AspectsAgree(a) => commands::aspects_agree(&ctx, &a),
        Command::TrainEmbeddings(a) => commands::train_embeddings(&ctx, &a),
        Command::Train(a) => commands::train(&ctx, &a),
        Command::Predict(a) => commands::predict(&ctx, &a),
        Command::Evaluate(a) => commands::evaluate(&ctx, &a),
        Command::Compare(a) => commands::compare(&ctx, &a),
        Command::Aggregate(a) => commands::aggregate(&ctx, &a),
        Command::Regress(a) => commands::regress(&ctx, &a),
        Command::Lda(a) => commands::lda(&ctx, &a),
        Command::Report(a) => commands::report(&ctx, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log("error", "failed", serde_json::json!({ "message": f.message() }));
            ExitCode::from(f.code())
        }
    }
}

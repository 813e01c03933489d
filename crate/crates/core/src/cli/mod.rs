//! Command-line front end.

mod render;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

pub use render::{render_curve, render_metrics};

use crate::corpus::{load_suite, save_domain_dir, split_dev, DomainDataset, DomainSchema, SynthSuite};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, learning_curve, zero_shot_eval, CurveOptions, MetricsReport, Weighting, DEV_FRACTION};
use crate::models::{gradient_suite, ModelKind};
use crate::text::{load_embeddings, preprocess, EmbeddingTable};
use crate::training::{train, DomainSplit, ModelCheckpoint, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "slotfill", version, about = "Zero-shot slot filling with slot-description-conditioned taggers")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the bundled synthetic domains and a matching embedding table.
    Synth(SynthArgs),
    /// Train a model on a data directory.
    Train(TrainArgs),
    /// Score a checkpoint on the test split of each domain.
    Eval(EvalArgs),
    /// Tag one utterance.
    Tag(TagArgs),
    /// Learning curves over in-domain training-set sizes.
    Curve(CurveArgs),
    /// Train a concept tagger without the target domain and score it there.
    Zeroshot(ZeroshotArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    St,
    Mt,
    Ct,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::St => ModelKind::St,
            KindArg::Mt => ModelKind::Mt,
            KindArg::Ct => ModelKind::Ct,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Support,
    Uniform,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Support => Weighting::Support,
            WeightingArg::Uniform => Weighting::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 200)]
    pub test_size: usize,
    /// Embedding width; 50 by default, 200 with --paper-scale.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub paper_scale: bool,
}

/// Optimisation settings shared by every command that trains.
#[derive(Debug, Args)]
pub struct TrainOpts {
    /// JSON training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dev_period: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Published sizes: 50000 steps, batch 100, wide layers.
    #[arg(long)]
    pub paper_scale: bool,
}

impl TrainOpts {
    fn resolve(&self, kind: ModelKind, table: &EmbeddingTable) -> Result<TrainConfig> {
        let mut cfg = match (&self.config, self.paper_scale) {
            (Some(path), _) => TrainConfig::load(path)?,
            (None, true) => TrainConfig::paper(kind),
            (None, false) => TrainConfig::desk(kind),
        };
        cfg.kind = kind;
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.optimizer.learning_rate = v;
        }
        if let Some(v) = self.dev_period {
            cfg.dev_period = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if cfg.model.embedding_dim != table.dim() {
            info!("using the embedding table's width {} for the model", table.dim());
            cfg.model.embedding_dim = table.dim();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Restrict to these domains (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub domains: Vec<String>,
    /// Leave these domains out (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct CheckpointArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Defaults to the table recorded in the checkpoint.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Accept an embedding table whose fingerprint differs from training.
    #[arg(long)]
    pub allow_embedding_mismatch: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub domains: Vec<String>,
    #[arg(long, value_enum, default_value = "support")]
    pub weighting: WeightingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[command(flatten)]
    pub model: CheckpointArgs,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub text: String,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Target domains (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub target: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,5,20,100,1000")]
    pub points: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "st,mt,ct")]
    pub kinds: Vec<KindArg>,
    #[arg(long, value_enum, default_value = "support")]
    pub weighting: WeightingArg,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct ZeroshotArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value = "ct")]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "support")]
    pub weighting: WeightingArg,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

/// Exit status for an error: 1 usage, 2 data or format, 3 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Unsupported(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn category(code: i32) -> &'static str {
    match code {
        EXIT_USAGE => "usage",
        EXIT_NUMERIC => "numeric",
        _ => "data",
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `argv`, runs the command and returns the process exit status.
/// Failures print one `error[<category>]: <message>` line to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return EXIT_USAGE;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error[{}]: {}", category(code), one_line(&e.to_string()));
            code
        }
    }
}

pub fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Tag(a) => tag_cmd(a),
        Command::Curve(a) => curve_cmd(a),
        Command::Zeroshot(a) => zeroshot_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Missing inputs are usage errors; unreadable or malformed ones are data errors.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

fn synth(a: &SynthArgs) -> Result<i32> {
    eprintln!("seed: {}", a.seed);
    let dim = a.dim.unwrap_or(if a.paper_scale { 200 } else { 50 });
    let suite = SynthSuite::bundled();
    let data = suite.generate(a.seed, a.train_size, a.test_size)?;
    for (ds, (_, grammar)) in data.iter().zip(&suite.domains) {
        let dir = a.out.join(ds.name());
        save_domain_dir(&dir, ds)?;
        write_file(&dir.join("grammar.json"), &to_json(grammar)?)?;
    }
    let table = suite.embeddings(dim, a.seed)?;
    let emb = a.out.join("embeddings.txt");
    write_file(&emb, &table.to_text())?;
    println!(
        "wrote {} domains ({} train / {} test each) and {}-d embeddings to {}; held-out domain: {}",
        data.len(),
        a.train_size,
        a.test_size,
        dim,
        a.out.display(),
        suite.held_out
    );
    Ok(EXIT_OK)
}

fn select(datasets: Vec<DomainDataset>, include: &[String], exclude: &[String]) -> Result<Vec<DomainDataset>> {
    for name in include.iter().chain(exclude) {
        if !datasets.iter().any(|d| d.name() == name) {
            return Err(Error::Config(format!("no domain named '{name}' in the data directory")));
        }
    }
    Ok(datasets
        .into_iter()
        .filter(|d| include.is_empty() || include.iter().any(|n| n == d.name()))
        .filter(|d| !exclude.iter().any(|n| n == d.name()))
        .collect())
}

fn train_cmd(a: &TrainArgs) -> Result<i32> {
    require(&a.data)?;
    require(&a.embeddings)?;
    let table = load_embeddings(&a.embeddings)?;
    let kind = ModelKind::from(a.kind);
    let cfg = a.opts.resolve(kind, &table)?;
    eprintln!("seed: {}", cfg.seed);
    let datasets = select(load_suite(&a.data)?, &a.domains, &a.exclude)?;
    if kind == ModelKind::St && datasets.len() != 1 {
        return Err(Error::Config(format!(
            "st trains on one domain; pass --domains with exactly one name ({} selected)",
            datasets.len()
        )));
    }
    let splits: Vec<DomainSplit> = datasets
        .iter()
        .map(|d| {
            let (train, dev) = split_dev(&d.train, DEV_FRACTION);
            DomainSplit::new(d.schema.clone(), train, dev)
        })
        .collect();
    let schemas: Vec<DomainSchema> = datasets.iter().map(|d| d.schema.clone()).collect();
    let trained = train(&splits, &table, &cfg)?;
    let mut ckpt = ModelCheckpoint::from_model(&trained.model, cfg.model, Some(cfg.clone()), &schemas, &table)?;
    ckpt.embedding_path = Some(a.embeddings.display().to_string());
    let model_path = a.out.join("model.json");
    write_file(&model_path, &ckpt.to_json()?)?;
    write_file(&a.out.join("train_log.json"), &to_json(&trained.log)?)?;
    let last = trained.log.losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {kind} for {} steps (final loss {last:.4}, kept step {}); checkpoint {}",
        cfg.steps,
        trained.log.best_step.map_or("final".to_string(), |s| s.to_string()),
        model_path.display()
    );
    Ok(EXIT_OK)
}

fn load_model(a: &CheckpointArgs) -> Result<(crate::models::Model, ModelCheckpoint, EmbeddingTable)> {
    require(&a.ckpt)?;
    let ckpt = ModelCheckpoint::load(&a.ckpt)?;
    let emb_path = match (&a.embeddings, &ckpt.embedding_path) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(Error::Config(
                "checkpoint records no embedding table; pass --embeddings".into(),
            ))
        }
    };
    require(&emb_path)?;
    let table = load_embeddings(&emb_path)?;
    let model = ckpt.to_model(&table, a.allow_embedding_mismatch)?;
    Ok((model, ckpt, table))
}

fn eval_cmd(a: &EvalArgs) -> Result<i32> {
    require(&a.data)?;
    let (model, _, table) = load_model(&a.model)?;
    let mut datasets = select(load_suite(&a.data)?, &a.domains, &[])?;
    if a.domains.is_empty() && model.kind() != ModelKind::Ct {
        datasets.retain(|d| model.schemas().iter().any(|s| s.domain == d.name()));
    }
    let reports = datasets
        .iter()
        .map(|d| evaluate(&model, &d.schema, &d.test, &table, a.weighting.into()))
        .collect::<Result<Vec<MetricsReport>>>()?;
    let text = render_metrics(&reports);
    print!("{text}");
    if let Some(out) = &a.out {
        write_file(&out.join("metrics.json"), &to_json(&reports)?)?;
        write_file(&out.join("metrics.txt"), &text)?;
    }
    Ok(EXIT_OK)
}

fn tag_cmd(a: &TagArgs) -> Result<i32> {
    let (model, _, table) = load_model(&a.model)?;
    require(&a.schema)?;
    let schema = DomainSchema::load(&a.schema)?;
    let tokens = preprocess(&a.text);
    if tokens.is_empty() {
        return Err(Error::EmptyInput("--text has no tokens".into()));
    }
    let frame = model.tag(&tokens, &schema, &table)?;
    for (tok, tag) in frame.tokens.iter().zip(&frame.tags) {
        println!("{tok}\t{tag}");
    }
    Ok(EXIT_OK)
}

fn curve_cmd(a: &CurveArgs) -> Result<i32> {
    require(&a.data)?;
    require(&a.embeddings)?;
    let table = load_embeddings(&a.embeddings)?;
    let cfg = a.opts.resolve(ModelKind::Ct, &table)?;
    eprintln!("seed: {}", cfg.seed);
    let datasets = load_suite(&a.data)?;
    select(datasets.clone(), &a.target, &[])?;
    let mut opts = CurveOptions::new(cfg);
    opts.points = a.points.clone();
    opts.runs = a.runs;
    opts.kinds = a.kinds.iter().map(|&k| k.into()).collect();
    opts.weighting = a.weighting.into();
    let curve = learning_curve(&a.target, &datasets, &table, &opts)?;
    let text = render_curve(&curve);
    print!("{text}");
    write_file(&a.out.join("curve.json"), &to_json(&curve)?)?;
    write_file(&a.out.join("curve.txt"), &text)?;
    Ok(EXIT_OK)
}

fn zeroshot_cmd(a: &ZeroshotArgs) -> Result<i32> {
    require(&a.data)?;
    require(&a.embeddings)?;
    let table = load_embeddings(&a.embeddings)?;
    let cfg = a.opts.resolve(a.kind.into(), &table)?;
    eprintln!("seed: {}", cfg.seed);
    let datasets = load_suite(&a.data)?;
    select(datasets.clone(), std::slice::from_ref(&a.target), &[])?;
    let (report, trained) = zero_shot_eval(&a.target, &datasets, &table, &cfg, a.weighting.into())?;
    let schemas: Vec<DomainSchema> = datasets
        .iter()
        .filter(|d| d.name() != a.target)
        .map(|d| d.schema.clone())
        .collect();
    let mut ckpt = ModelCheckpoint::from_model(&trained.model, cfg.model, Some(cfg.clone()), &schemas, &table)?;
    ckpt.embedding_path = Some(a.embeddings.display().to_string());
    let text = render_metrics(std::slice::from_ref(&report));
    print!("{text}");
    write_file(&a.out.join("metrics.json"), &to_json(&report)?)?;
    write_file(&a.out.join("metrics.txt"), &text)?;
    write_file(&a.out.join("model.json"), &ckpt.to_json()?)?;
    Ok(EXIT_OK)
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<i32> {
    eprintln!("seeds: 0..{}", a.seeds);
    let rows = gradient_suite(a.seeds, a.step)?;
    let mut ok = true;
    for r in &rows {
        let pass = r.max_relative_error < a.tolerance;
        ok &= pass;
        println!("{:<22}{:.3e}\t{}", r.name, r.max_relative_error, if pass { "ok" } else { "FAIL" });
    }
    if ok {
        Ok(EXIT_OK)
    } else {
        Err(Error::Numeric(format!("gradient check exceeded tolerance {}", a.tolerance)))
    }
}

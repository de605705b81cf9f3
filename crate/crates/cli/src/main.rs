//! `bloomq`: question-level classification experiments from the command line.
//!
//! Exit codes: 0 on success, 2 on input errors (bad flags, unreadable or
//! malformed files), 1 on internal faults. Failures print one JSON object on
//! standard error.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bloomq_core::dataset::{self, class_distribution, CorpusFormat, LabelScheme, QuestionRecord};
use bloomq_core::eval::{self, ComparisonRow};
use bloomq_core::experiment::{self, ExperimentConfig, ExperimentName, OutputFormat};
use bloomq_core::features::FeatureMode;
use bloomq_core::models::{self, ModelKind};
use bloomq_core::{datagen, Error};

#[derive(Parser)]
#[command(
    name = "bloomq",
    version,
    about = "Classify exam questions by cognitive level with classical models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-question metrics (L, FKGL, TTR, LD) and a per-level summary.
    Analyze {
        #[arg(long)]
        corpus: PathBuf,
        /// Where to write the per-question metrics CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-level summary as CSV.
        #[arg(long)]
        summary_csv: Option<PathBuf>,
    },
    /// Run one experiment preset and write its artifacts.
    Experiment(ExperimentArgs),
    /// Classify texts with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// A single question.
        #[arg(long, conflicts_with_all = ["corpus", "texts"], required_unless_present_any = ["corpus", "texts"])]
        text: Option<String>,
        /// A labeled corpus (.csv or .jsonl); labels are ignored.
        #[arg(long, conflicts_with = "texts")]
        corpus: Option<PathBuf>,
        /// A plain text file with one question per line.
        #[arg(long)]
        texts: Option<PathBuf>,
        /// Print class probabilities (logreg and naive Bayes only).
        #[arg(long)]
        proba: bool,
    },
    /// Generate a synthetic labeled corpus from verb and template banks.
    Datagen {
        #[arg(long)]
        n_per_level: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Banks file; the built-in banks are used when omitted.
        #[arg(long)]
        banks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate accuracy across saved JSON reports.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Rerun an experiment from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Markdown => OutputFormat::Markdown,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

fn parse_via<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct ExperimentArgs {
    /// exp1..exp5
    #[arg(value_parser = parse_via::<ExperimentName>)]
    name: ExperimentName,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = experiment::DEFAULT_SPLIT_FRACTION)]
    split_fraction: f64,
    #[arg(long, value_parser = parse_via::<LabelScheme>)]
    scheme: Option<LabelScheme>,
    #[arg(long, value_parser = parse_via::<FeatureMode>)]
    features: Option<FeatureMode>,
    #[arg(long, value_parser = parse_via::<ModelKind>)]
    model: Option<ModelKind>,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
    /// Downsample every class to the smallest one before splitting.
    #[arg(long, conflicts_with = "no_balance")]
    balance: bool,
    #[arg(long)]
    no_balance: bool,
    #[arg(long)]
    min_df: Option<u32>,
    #[arg(long)]
    sublinear_tf: bool,
    #[arg(long)]
    l2_lambda: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Naive Bayes additive smoothing.
    #[arg(long)]
    alpha: Option<f64>,
    /// Linear SVC passes over the training set.
    #[arg(long)]
    epochs: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(self.name, self.seed);
        cfg.split_fraction = self.split_fraction;
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(f) = self.features {
            cfg.features.mode = f;
        }
        if self.balance {
            cfg.balance = true;
        }
        if self.no_balance {
            cfg.balance = false;
        }
        if let Some(v) = self.min_df {
            cfg.features.min_df = v;
        }
        cfg.features.sublinear_tf |= self.sublinear_tf;
        if let Some(v) = self.l2_lambda {
            cfg.logreg.l2_lambda = v;
            cfg.svc.l2_lambda = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.logreg.learning_rate = v;
        }
        if let Some(v) = self.max_iters {
            cfg.logreg.max_iters = v;
        }
        if let Some(v) = self.tol {
            cfg.logreg.tol = v;
        }
        if let Some(v) = self.alpha {
            cfg.naive_bayes.alpha = v;
        }
        if let Some(v) = self.epochs {
            cfg.svc.epochs = v;
        }
        cfg
    }
}

struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            code: 2,
        }
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        let e = e.into();
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let s_text = s.to_string();
            if !message.contains(&s_text) {
                message = format!("{message}: {s_text}");
            }
            source = s.source();
        }
        CliError {
            kind: e.kind(),
            code: if e.is_input_error() { 2 } else { 1 },
            message,
        }
    }
}

type CliResult = Result<(), CliError>;

fn write_file(path: &Path, body: &str) -> CliResult {
    fs::write(path, body).map_err(|e| CliError::input("io", format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Vec<QuestionRecord>, CliError> {
    let format = CorpusFormat::from_path(path)?;
    Ok(dataset::load_corpus(path, format)?)
}

fn cmd_analyze(corpus: &Path, out: &Path, summary_csv: Option<&Path>) -> CliResult {
    let records = load(corpus)?;
    let analysis = experiment::analyze_corpus(&records)?;
    write_file(out, &experiment::render_metric_rows_csv(&analysis.rows))?;
    if let Some(p) = summary_csv {
        write_file(p, &eval::render_stats_csv(&analysis.stats))?;
    }
    print!("{}", eval::render_stats_markdown(&analysis.stats));
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> CliResult {
    let cfg = args.config();
    let run = experiment::run_to_dir(&args.corpus, &cfg, &args.out_dir, args.format.into())?;
    print!("{}", eval::render_markdown(&run.outcome.report));
    for path in &run.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::input("io", format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

fn format_proba(p: &[f64]) -> String {
    p.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
}

fn cmd_predict(
    model: &Path,
    text: Option<&str>,
    corpus: Option<&Path>,
    texts: Option<&Path>,
    proba: bool,
) -> CliResult {
    let model = models::load_model(model)?;
    if proba && model.kind() == ModelKind::LinearSvc {
        eprintln!("warning: linear_svc has no probability output; printing classes only");
    }
    if let Some(t) = text {
        let p = model.predict_text(t)?;
        match (&p.proba, proba) {
            (Some(pr), true) => println!("{}\t{}", p.class_name, format_proba(pr)),
            _ => println!("{}", p.class_name),
        }
        return Ok(());
    }

    let inputs: Vec<String> = match (corpus, texts) {
        (Some(c), _) => load(c)?.into_iter().map(|r| r.text).collect(),
        (None, Some(t)) => read_lines(t)?,
        (None, None) => unreachable!("clap requires one input"),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut header = String::from("id\tclass");
    if proba && model.kind() != ModelKind::LinearSvc {
        header.push('\t');
        header.push_str(&model.class_names().join(","));
    }
    let _ = writeln!(out, "{header}");
    let mut failed = 0;
    for (i, t) in inputs.iter().enumerate() {
        match model.predict_text(t) {
            Ok(p) => {
                let _ = match (&p.proba, proba) {
                    (Some(pr), true) => writeln!(out, "{}\t{}\t{}", i + 1, p.class_name, format_proba(pr)),
                    _ => writeln!(out, "{}\t{}", i + 1, p.class_name),
                };
            }
            Err(e) => {
                failed += 1;
                eprintln!("warning: skipping input {}: {e}", i + 1);
            }
        }
    }
    if failed > 0 && failed == inputs.len() {
        return Err(CliError::input(
            "text",
            format!("all {failed} inputs failed to classify"),
        ));
    }
    Ok(())
}

fn cmd_datagen(n_per_level: usize, seed: u64, banks: Option<&Path>, out: &Path) -> CliResult {
    let banks = match banks {
        Some(p) => datagen::Banks::load(p)?,
        None => datagen::Banks::default_banks(),
    };
    let generated = datagen::generate(n_per_level, seed, &banks)?;
    let mut buf = Vec::new();
    dataset::write_csv(&mut buf, &generated.records).map_err(|e| CliError {
        kind: "io",
        message: e.to_string(),
        code: 1,
    })?;
    fs::write(out, buf).map_err(|e| CliError::input("io", format!("cannot write {}: {e}", out.display())))?;
    if generated.duplicates > 0 {
        eprintln!(
            "warning: {} records repeat a verb/template/topic combination",
            generated.duplicates
        );
    }
    let dist = class_distribution(&generated.records);
    println!("level,count");
    for (level, n) in dist.iter() {
        println!("{level},{n}");
    }
    println!("total,{}", dist.total());
    Ok(())
}

fn cmd_compare(reports: &[PathBuf]) -> CliResult {
    let mut rows = Vec::new();
    for p in reports {
        let text =
            fs::read_to_string(p).map_err(|e| CliError::input("io", format!("cannot read {}: {e}", p.display())))?;
        let report = eval::parse_json(&text).map_err(|e| CliError::input("eval", format!("{}: {e}", p.display())))?;
        rows.push(ComparisonRow::from_report(&report));
    }
    print!("{}", eval::render_comparison(&rows));
    Ok(())
}

fn cmd_replay(manifest: &Path, out_dir: &Path) -> CliResult {
    let m = experiment::load_manifest(manifest)?;
    let run = experiment::replay(&m, out_dir)?;
    for path in &run.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze {
            corpus,
            out,
            summary_csv,
        } => cmd_analyze(&corpus, &out, summary_csv.as_deref()),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Predict {
            model,
            text,
            corpus,
            texts,
            proba,
        } => cmd_predict(&model, text.as_deref(), corpus.as_deref(), texts.as_deref(), proba),
        Command::Datagen {
            n_per_level,
            seed,
            banks,
            out,
        } => cmd_datagen(n_per_level, seed, banks.as_deref(), &out),
        Command::Compare { reports } => cmd_compare(&reports),
        Command::Replay { manifest, out_dir } => cmd_replay(&manifest, &out_dir),
    }
}

fn report(err: &CliError) -> ExitCode {
    let line = serde_json::json!({
        "error": err.kind,
        "message": err.message,
        "exit_code": err.code,
    });
    eprintln!("{line}");
    ExitCode::from(err.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return report(&CliError::input("usage", first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

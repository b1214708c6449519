//! The `fineval` command line.
//!
//! Reports go to stdout (or `--out`) as canonical JSON; diagnostics go to
//! stderr. Exit status: 0 success, 1 validation or analysis error, 2 usage.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fineval_core::analysis::{
    bias_analysis_with_mode, error_cases, pair_analysis, single_analysis, AnalysisOptions, ErrorSelector,
};
use fineval_core::bucketing::BucketAddress;
use fineval_core::combination::combined_report;
use fineval_core::ingest::{build_train_stats, load_dataset, load_system, parse_system_file, serialize_system, ConllColumns};
use fineval_core::report::to_canonical_json;
use fineval_core::{Attribute, BioMode, Dataset, EvalMode, SystemOutput, TaskKind};
use serde::Serialize;
use serde_json::json;

use crate::error::{ServiceError, ServiceResult};
use crate::registry::{Registry, SubmitMeta};
use crate::requests::bootstrap_config;

#[derive(Debug, Parser)]
#[command(name = "fineval", version, about = "Fine-grained, bucketed evaluation of NLP system outputs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a file parses for a task.
    Validate(ValidateArgs),
    /// Bucketed performance report of one system.
    Single(SingleArgs),
    /// Bucketwise performance gap between two systems.
    Pair(PairArgs),
    /// Combine systems by plurality vote and report on the result.
    Combine(CombineArgs),
    /// Attribute statistics of one or more datasets.
    Bias(BiasArgs),
    /// Calibration bins and ECE of a classifier.
    Calibrate(CalibrateArgs),
    /// List error cases by bucket, common to systems, or unique to one.
    Errors(ErrorsArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Manage a registry directory.
    #[command(subcommand)]
    Registry(RegistryCommand),
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|_| format!("unknown task {s:?} (try ner, classification or generation)"))
}

fn parse_columns(s: &str) -> Result<ConllColumns, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("columns must be three indices like 0,1,2, got {s:?}"))?;
    match parts[..] {
        [token, gold, pred] => Ok(ConllColumns { token, gold, pred }),
        _ => Err(format!("columns must be three indices like 0,1,2, got {s:?}")),
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Task kind: ner (sequence labeling), classification or generation.
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Gold dataset file.
    #[arg(long)]
    dataset: PathBuf,
    /// Dataset id used in reports; defaults to the file stem.
    #[arg(long)]
    dataset_id: Option<String>,
    /// Gold-only CoNLL training file, enabling the eFreq attribute.
    #[arg(long)]
    train: Option<PathBuf>,
    /// CoNLL column indices token,gold,pred.
    #[arg(long, value_parser = parse_columns, default_value = "0,1,2")]
    columns: ConllColumns,
    /// Reject orphan I- tags instead of repairing them.
    #[arg(long)]
    strict_bio: bool,
    /// Fail when eFreq is requested without --train.
    #[arg(long)]
    strict_attrs: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Comma-separated attributes; defaults depend on the task.
    #[arg(long, default_value = "")]
    attrs: String,
    /// Bootstrap replicates.
    #[arg(long = "bootstrap-b", default_value_t = 1000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    confidence_level: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(value_parser = parse_task)]
    task: TaskKind,
    file: PathBuf,
    /// The file holds gold annotations only.
    #[arg(long)]
    gold_only: bool,
    #[arg(long, value_parser = parse_columns, default_value = "0,1,2")]
    columns: ConllColumns,
    #[arg(long)]
    strict_bio: bool,
}

#[derive(Debug, Args)]
struct SingleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    system: PathBuf,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    system_a: PathBuf,
    #[arg(long)]
    system_b: PathBuf,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
struct CombineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Member system files, in tie-break order.
    #[arg(long = "system", required = true, num_args = 1..)]
    systems: Vec<PathBuf>,
    /// Also write the combined system output file here.
    #[arg(long)]
    write_output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
struct BiasArgs {
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Dataset files; ids are the file stems.
    #[arg(long = "dataset", required = true, num_args = 1..)]
    datasets: Vec<PathBuf>,
    #[arg(long, default_value = "")]
    attrs: String,
    #[arg(long, value_parser = parse_columns, default_value = "0,1,2")]
    columns: ConllColumns,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dataset_id: Option<String>,
    #[arg(long)]
    system: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "selector", required = true, multiple = false, args = ["bucket", "common", "unique"])]
struct ErrorsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// System files; `--unique` takes exactly two (errors of the second that the first avoids).
    #[arg(long = "system", required = true, num_args = 1..)]
    systems: Vec<PathBuf>,
    /// Bucket address such as `eLen|(3,+inf)`.
    #[arg(long)]
    bucket: Option<String>,
    #[arg(long)]
    common: bool,
    #[arg(long)]
    unique: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "FINEVAL_ROOT")]
    root: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Directory of built web UI assets to serve at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum RegistryCommand {
    /// Register a gold dataset.
    AddDataset {
        #[arg(long, env = "FINEVAL_ROOT")]
        root: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Submit a system output for a registered dataset.
    AddSystem {
        #[arg(long, env = "FINEVAL_ROOT")]
        root: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        submitter: Option<String>,
    },
    /// Print datasets and the leaderboard.
    List {
        #[arg(long, env = "FINEVAL_ROOT")]
        root: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
    },
}

fn read_file(path: &Path) -> ServiceResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

impl InputArgs {
    fn mode(&self) -> EvalMode {
        EvalMode {
            bio_mode: if self.strict_bio { BioMode::Strict } else { BioMode::Lenient },
            strict_attributes: self.strict_attrs,
        }
    }

    fn load(&self) -> ServiceResult<Dataset> {
        let id = self.dataset_id.clone().unwrap_or_else(|| stem(&self.dataset));
        let bytes = read_file(&self.dataset)?;
        let mut dataset = load_dataset(&id, self.task, &bytes, self.columns).map_err(|e| located(&self.dataset, e))?;
        if let Some(train) = &self.train {
            let stats = build_train_stats(&read_file(train)?, &train.display().to_string())
                .map_err(|e| located(train, e.into()))?;
            dataset = dataset.with_train_stats(stats);
        }
        Ok(dataset)
    }

    fn system(&self, dataset: &Dataset, path: &Path) -> ServiceResult<SystemOutput> {
        load_system(dataset, &read_file(path)?, self.columns).map_err(|e| located(path, e))
    }
}

impl ReportArgs {
    fn options(&self, mode: EvalMode) -> ServiceResult<AnalysisOptions> {
        let config = bootstrap_config(Some(self.bootstrap_b), Some(self.seed), Some(self.confidence_level))?;
        Ok(AnalysisOptions::new(config).mode(mode))
    }
}

/// Prefixes parse errors with `file:line:` for humans.
fn located(path: &Path, e: fineval_core::Error) -> ServiceError {
    match &e {
        fineval_core::Error::Ingest(inner) => match inner.line() {
            Some(line) => {
                let msg = inner.to_string();
                let msg = msg.strip_prefix(&format!("line {line}: ")).unwrap_or(&msg);
                ServiceError::BadRequest(format!("{}:{line}: {msg} [{}]", path.display(), inner.code()))
            }
            None => ServiceError::BadRequest(format!("{}: {inner} [{}]", path.display(), inner.code())),
        },
        _ => ServiceError::Core(e),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> ServiceResult<()> {
    let mut body = to_canonical_json(value).map_err(|e| ServiceError::Io(e.to_string()))?;
    body.push('\n');
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn validate(args: &ValidateArgs) -> ServiceResult<()> {
    let bytes = read_file(&args.file)?;
    let id = stem(&args.file);
    let (samples, dropped, confidences) = if args.gold_only {
        let ds = load_dataset(&id, args.task, &bytes, args.columns).map_err(|e| located(&args.file, e))?;
        (ds.len(), None, None)
    } else {
        let parsed = parse_system_file(args.task, &bytes, args.columns).map_err(|e| located(&args.file, e.into()))?;
        let ds = Dataset::new(&id, args.task, parsed.samples)?;
        let system = SystemOutput::new(&id, args.task, parsed.predictions)?;
        system.check_against(&ds)?;
        let conf = (args.task == TaskKind::TextClassification).then(|| system.has_confidences());
        (ds.len(), Some(parsed.empty_sentences_dropped), conf)
    };
    if args.strict_bio && args.task == TaskKind::SequenceLabeling {
        let parsed = parse_system_file(args.task, &bytes, args.columns).map_err(|e| located(&args.file, e.into()))?;
        let ds = Dataset::new(&id, args.task, parsed.samples)?;
        ds.gold_units(BioMode::Strict)?;
        if !args.gold_only {
            let system = SystemOutput::new(&id, args.task, parsed.predictions)?;
            fineval_core::analysis::sentence_spans(&ds, &system, EvalMode { bio_mode: BioMode::Strict, strict_attributes: false })?;
        }
    }
    let mut summary = json!({ "valid": true, "task": args.task, "samples": samples });
    if let Some(d) = dropped {
        summary["emptySentencesDropped"] = json!(d);
    }
    if let Some(c) = confidences {
        summary["hasConfidences"] = json!(c);
    }
    emit(&summary, None)
}

fn errors(args: &ErrorsArgs) -> ServiceResult<()> {
    let dataset = args.input.load()?;
    let systems = args
        .systems
        .iter()
        .map(|p| args.input.system(&dataset, p))
        .collect::<ServiceResult<Vec<_>>>()?;
    let refs: Vec<&SystemOutput> = systems.iter().collect();
    let selector = match (&args.bucket, args.common, args.unique) {
        (Some(b), _, _) => ErrorSelector::Bucket(BucketAddress::parse(b)?),
        (_, true, _) => ErrorSelector::Common,
        _ => ErrorSelector::UniqueTo,
    };
    let cases = error_cases(&refs, &dataset, &selector, args.input.mode())?;
    emit(&cases, args.out.as_deref())
}

fn registry_command(cmd: &RegistryCommand) -> ServiceResult<()> {
    match cmd {
        RegistryCommand::AddDataset { root, id, task, file, train } => {
            let registry = Registry::open(root)?;
            let train = train.as_deref().map(read_file).transpose()?;
            let meta = registry.add_dataset(id, *task, &read_file(file)?, train.as_deref())?;
            emit(&meta, None)
        }
        RegistryCommand::AddSystem { root, dataset, file, name, submitter } => {
            let registry = Registry::open(root)?;
            let meta = SubmitMeta {
                dataset_id: dataset.clone(),
                name: name.clone(),
                submitter: submitter.clone(),
            };
            let submission = registry.submit_system(&meta, &read_file(file)?)?;
            emit(&submission, None)
        }
        RegistryCommand::List { root, dataset } => {
            let registry = Registry::open(root)?;
            emit(
                &json!({
                    "datasets": registry.datasets(None),
                    "systems": registry.systems(dataset.as_deref()),
                }),
                None,
            )
        }
    }
}

fn execute(cli: Cli) -> ServiceResult<()> {
    match cli.command {
        Command::Validate(args) => validate(&args),
        Command::Single(args) => {
            let dataset = args.input.load()?;
            let system = args.input.system(&dataset, &args.system)?;
            let attrs = Attribute::parse_list(&args.report.attrs, dataset.task)?;
            let report = single_analysis(&system, &dataset, &attrs, &args.report.options(args.input.mode())?)?;
            emit(&report, args.report.out.as_deref())
        }
        Command::Pair(args) => {
            let dataset = args.input.load()?;
            let a = args.input.system(&dataset, &args.system_a)?;
            let b = args.input.system(&dataset, &args.system_b)?;
            let attrs = Attribute::parse_list(&args.report.attrs, dataset.task)?;
            let report = pair_analysis(&a, &b, &dataset, &attrs, &args.report.options(args.input.mode())?)?;
            emit(&report, args.report.out.as_deref())
        }
        Command::Combine(args) => {
            let dataset = args.input.load()?;
            let systems = args
                .systems
                .iter()
                .map(|p| args.input.system(&dataset, p))
                .collect::<ServiceResult<Vec<_>>>()?;
            let refs: Vec<&SystemOutput> = systems.iter().collect();
            let attrs = Attribute::parse_list(&args.report.attrs, dataset.task)?;
            let (combined, report) = combined_report(&refs, &dataset, &attrs, &args.report.options(args.input.mode())?)?;
            if let Some(path) = &args.write_output {
                std::fs::write(path, serialize_system(&dataset, &combined.output))
                    .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
            }
            emit(&report, args.report.out.as_deref())
        }
        Command::Bias(args) => {
            let datasets = args
                .datasets
                .iter()
                .map(|p| load_dataset(&stem(p), args.task, &read_file(p)?, args.columns).map_err(|e| located(p, e)))
                .collect::<ServiceResult<Vec<_>>>()?;
            let refs: Vec<&Dataset> = datasets.iter().collect();
            let attrs = Attribute::parse_list(&args.attrs, args.task)?;
            emit(&bias_analysis_with_mode(&refs, &attrs, EvalMode::default())?, args.out.as_deref())
        }
        Command::Calibrate(args) => {
            let id = args.dataset_id.clone().unwrap_or_else(|| stem(&args.dataset));
            let bytes = read_file(&args.dataset)?;
            let dataset = load_dataset(&id, TaskKind::TextClassification, &bytes, ConllColumns::default())
                .map_err(|e| located(&args.dataset, e))?;
            let system = load_system(&dataset, &read_file(&args.system)?, ConllColumns::default())
                .map_err(|e| located(&args.system, e))?;
            let report = fineval_core::reliability::calibration(&dataset, &system, args.bins)?;
            emit(&report, args.out.as_deref())
        }
        Command::Errors(args) => errors(&args),
        Command::Serve(args) => {
            let registry = Arc::new(Registry::open(&args.root)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Io(e.to_string()))?;
            let addr = std::net::SocketAddr::new(args.host, args.port);
            runtime
                .block_on(crate::api::serve(registry, addr, args.static_dir))
                .map_err(|e| ServiceError::Io(e.to_string()))
        }
        Command::Registry(cmd) => registry_command(&cmd),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

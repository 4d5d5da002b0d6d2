use std::fs::{self, File};
use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tempfile::NamedTempFile;

use grammargate::config::{ConfigFile, DEFAULT_PARSER_BATCH, DEFAULT_PARSER_TIMEOUT, DEFAULT_SCORER_TIMEOUT};
use grammargate::conformance;
use grammargate::eval::{self, EvalError, Platform};
use grammargate::ingest::{self, IngestError, LabeledExample, ParserAdapterConfig};
use grammargate::pipeline::{BatchItem, Pipeline, PipelineConfig, ScorerSelection};
use grammargate::scorer::{self, Scorer, ScorerEndpoint, ScorerError, TrainConfig};
use grammargate::types::ParsedSentence;
use grammargate::classify_type;

const EXIT_CONFORMANCE: u8 = 1;
const EXIT_TRANSPORT: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser)]
#[command(name = "grammargate", version, about = "Grammatical acceptability checking")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for batch validation
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate sentences and print one verdict record per sentence
    Validate(ValidateArgs),
    /// Print the detector's sentence type for each parse in a CoNLL-U file
    Classify(ClassifyArgs),
    /// Train the built-in scorer on a labelled TSV file
    Train(TrainArgs),
    /// Run the symbolic / neural / hybrid ablation on a labelled dataset
    Evaluate(EvaluateArgs),
    /// Check an external scorer against the wire protocol
    Conformance(ConformanceArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// A single sentence
    #[arg(long, conflicts_with = "stdin")]
    text: Option<String>,
    /// Read sentences from standard input, one per line
    #[arg(long)]
    stdin: bool,
    /// Parses for the input sentences, paired by position
    #[arg(long, value_name = "FILE")]
    conllu: Option<PathBuf>,
    /// External parser command (overrides the config file)
    #[arg(long, value_name = "CMD")]
    parser_cmd: Option<String>,
    /// Model file, host:port or scorer command for untyped sentences
    #[arg(long, value_name = "SPEC")]
    scorer: Option<String>,
    /// Timeout in seconds for external scorer and parser
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// Append the decision trace to each record
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Parsed sentences
    #[arg(long, value_name = "FILE")]
    conllu: PathBuf,
    /// Print the rule trace after each record
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled training data (CoLA TSV layout)
    #[arg(long, value_name = "TSV")]
    train: PathBuf,
    /// Where to write the model
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Held-out data to report accuracy on
    #[arg(long, value_name = "TSV")]
    dev: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Hash space size as a power of two
    #[arg(long, default_value_t = 20)]
    bits: u32,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Labelled test data (CoLA TSV layout)
    #[arg(long, value_name = "TSV")]
    data: PathBuf,
    /// Parses aligned with the data by sentence id
    #[arg(long, value_name = "FILE", conflicts_with = "parser_cmd", required_unless_present = "parser_cmd")]
    conllu: Option<PathBuf>,
    /// External parser command
    #[arg(long, value_name = "CMD")]
    parser_cmd: Option<String>,
    /// Model file, host:port or scorer command
    #[arg(long, value_name = "SPEC")]
    scorer: Option<String>,
    /// Timeout in seconds for external scorer and parser
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// Directory for ablation.tsv, ablation.json and per_type.tsv
    #[arg(long, value_name = "DIR", default_value = "reports")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConformanceArgs {
    /// host:port or scorer command
    #[arg(long, value_name = "SPEC")]
    endpoint: String,
    /// Seconds to wait for responses
    #[arg(long, value_name = "SECS", default_value_t = 10.0)]
    timeout: f64,
}

enum Failure {
    Usage(String),
    Data(String),
    Transport(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Transport(_) => EXIT_TRANSPORT,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Transport(m) => m,
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::ParserTimeout(_) | IngestError::ParserCrash(_) | IngestError::CountMismatch { .. } => {
                Failure::Transport(e.to_string())
            }
            IngestError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ScorerError> for Failure {
    fn from(e: ScorerError) -> Self {
        match e {
            ScorerError::DegenerateData | ScorerError::InvalidModel(_) => Failure::Data(e.to_string()),
            _ => Failure::Transport(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Data(format!("cannot open {}: {e}", path.display())))
}

fn seconds(v: Option<f64>, default: Duration) -> Result<Duration, Failure> {
    match v {
        None => Ok(default),
        Some(s) => Duration::try_from_secs_f64(s)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| usage(format!("timeout must be positive, got {s}"))),
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Data(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn base_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        None => PipelineConfig::default(),
        Some(path) => ConfigFile::load(path)
            .and_then(|f| f.into_pipeline_config(path.parent()))
            .map_err(|e| usage(e.to_string()))?,
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        cfg.jobs = j;
    }
    Ok(cfg)
}

/// A readable file starting with the model header is a model; anything
/// else is an endpoint.
fn scorer_selection(spec: &str, timeout: Duration) -> Result<ScorerSelection, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let mut head = String::new();
        let _ = open(path)?.take(64).read_to_string(&mut head);
        if head.starts_with(scorer::MODEL_HEADER) {
            return Ok(ScorerSelection::Builtin(path.to_path_buf()));
        }
    }
    Ok(ScorerSelection::Remote(ScorerEndpoint::parse(spec, timeout).map_err(|e| usage(e.to_string()))?))
}

fn build_pipeline(cfg: PipelineConfig) -> Result<Pipeline, Failure> {
    Pipeline::from_config(cfg).map_err(|e| match e.kind {
        grammargate::pipeline::PipelineErrorKind::Scorer(s) => Failure::from(s),
        other => usage(other.to_string()),
    })
}

fn read_conllu_file(path: &Path, cfg: &PipelineConfig) -> Result<Vec<ParsedSentence>, Failure> {
    Ok(ingest::read_conllu(open(path)?, &cfg.policy)?)
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs) -> Result<ExitCode, Failure> {
    let mut cfg = base_config(cli)?;
    let timeout = seconds(args.timeout, DEFAULT_SCORER_TIMEOUT)?;
    if let Some(spec) = &args.scorer {
        cfg.scorer = scorer_selection(spec, timeout)?;
        cfg.neural_enabled = true;
    }
    if let Some(cmd) = &args.parser_cmd {
        let t = seconds(args.timeout, DEFAULT_PARSER_TIMEOUT)?;
        cfg.parser = Some(ParserAdapterConfig::from_command_line(cmd, t, DEFAULT_PARSER_BATCH)?);
    }
    let parses = match &args.conllu {
        Some(p) => Some(read_conllu_file(p, &cfg)?),
        None => None,
    };

    let texts: Vec<String> = if let Some(t) = &args.text {
        vec![t.clone()]
    } else if args.stdin {
        let mut lines = Vec::new();
        for line in io::stdin().lock().lines() {
            let line = line.map_err(|e| Failure::Data(format!("cannot read standard input: {e}")))?;
            if !line.trim().is_empty() {
                lines.push(line);
            }
        }
        lines
    } else if let Some(parses) = &parses {
        parses.iter().map(|p| p.text().to_string()).collect()
    } else {
        return Err(usage("give --text, --stdin or --conllu"));
    };
    if texts.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    if parses.is_none() && cfg.parser.is_none() {
        return Err(usage("no parse source: give --conllu, --parser-cmd or a [parser] config section"));
    }
    if let Some(p) = &parses {
        if p.len() < texts.len() {
            return Err(Failure::Data(format!("{} sentences but only {} parses", texts.len(), p.len())));
        }
    }

    let items: Vec<BatchItem> = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| BatchItem {
            id: parses
                .as_ref()
                .map_or_else(|| (i + 1).to_string(), |p| p[i].id().to_string()),
            parse: parses.as_ref().map(|p| p[i].clone()),
            text,
        })
        .collect();
    let pipeline = build_pipeline(cfg)?;
    let outcome = pipeline.validate_batch(&items);

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut transport = false;
    for result in &outcome.results {
        match result {
            Ok(v) => {
                let _ = writeln!(out, "{}", v.to_record());
                if args.explain {
                    let _ = writeln!(out, "{}", v.trace_record());
                }
            }
            Err(e) => {
                transport |= e.is_transport();
                eprintln!("error: {e}");
            }
        }
    }
    let _ = out.flush();
    Ok(if transport {
        ExitCode::from(EXIT_TRANSPORT)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> Result<ExitCode, Failure> {
    let cfg = base_config(cli)?;
    let parses = read_conllu_file(&args.conllu, &cfg)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for p in &parses {
        let d = classify_type(p, &cfg.policy, &cfg.catalogue);
        let record = serde_json::json!({
            "id": p.id(),
            "type": d.sentence_type.as_str(),
            "rule": d.rule,
            "subjects": d.counts.subjects,
            "objects": d.counts.objects,
        });
        let _ = writeln!(out, "{record}");
        if args.explain {
            let _ = writeln!(out, "{}", d.render_trace());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_tsv(path: &Path) -> Result<Vec<LabeledExample>, Failure> {
    let ds = ingest::read_cola_tsv(open(path)?)?;
    if ds.skipped > 0 {
        eprintln!("{}: skipped {} malformed rows", path.display(), ds.skipped);
    }
    Ok(ds.examples)
}

fn cmd_train(_cli: &Cli, args: &TrainArgs) -> Result<ExitCode, Failure> {
    if args.epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    if args.bits == 0 || args.bits > scorer::MAX_BITS {
        return Err(usage(format!("--bits must lie in 1..={}", scorer::MAX_BITS)));
    }
    let train = read_tsv(&args.train)?;
    let cfg = TrainConfig {
        bits: args.bits,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let model = scorer::train(&train, &cfg)?;
    write_atomic(&args.out, model.to_text().as_bytes())?;
    println!("trained on {} examples; model written to {}", train.len(), args.out.display());
    if let Some(dev) = &args.dev {
        let dev = read_tsv(dev)?;
        let correct = dev
            .iter()
            .filter(|e| model.is_acceptable(model.score(&e.text)) == e.acceptable)
            .count();
        let acc = if dev.is_empty() { 0.0 } else { correct as f64 / dev.len() as f64 };
        println!("dev accuracy: {acc:.4} ({correct}/{})", dev.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<ExitCode, Failure> {
    let mut cfg = base_config(cli)?;
    let dataset = read_tsv(&args.data)?;
    let parses = match (&args.conllu, &args.parser_cmd) {
        (Some(p), _) => read_conllu_file(p, &cfg)?,
        (None, Some(cmd)) => {
            let t = seconds(args.timeout, DEFAULT_PARSER_TIMEOUT)?;
            let adapter = ParserAdapterConfig::from_command_line(cmd, t, DEFAULT_PARSER_BATCH)?;
            let texts: Vec<String> = dataset.iter().map(|e| e.text.clone()).collect();
            ingest::parse_external(&texts, &adapter, &cfg.policy)?
        }
        (None, None) => return Err(usage("give --conllu or --parser-cmd")),
    };

    let scorer: Option<Arc<dyn Scorer>> = match &args.scorer {
        None => None,
        Some(spec) => {
            cfg.scorer = scorer_selection(spec, seconds(args.timeout, DEFAULT_SCORER_TIMEOUT)?)?;
            cfg.neural_enabled = true;
            build_pipeline(cfg.clone())?.scorer().cloned()
        }
    };

    let report = eval::evaluate(&dataset, &parses, &cfg, scorer).map_err(|e| match e {
        EvalError::AlignmentError { .. } | EvalError::MalformedReport(_) => Failure::Data(e.to_string()),
        EvalError::Scorer(s) => Failure::from(s),
        EvalError::Pipeline(p) if p.is_transport() => Failure::Transport(p.to_string()),
        EvalError::Pipeline(p) => Failure::Data(p.to_string()),
    })?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let tsv = eval::render_tsv(&report.rows);
    write_atomic(&args.out_dir.join("ablation.tsv"), tsv.as_bytes())?;
    write_atomic(&args.out_dir.join("ablation.json"), eval::render_json(&report).as_bytes())?;
    if let Some(per_type) = &report.per_type_neural {
        write_atomic(&args.out_dir.join("per_type.tsv"), eval::render_per_type_tsv(per_type).as_bytes())?;
    }
    print!("{tsv}");
    if report.row(Platform::Neural).is_some_and(|r| !r.available) {
        println!("(neural rows unavailable: no --scorer given)");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_conformance(_cli: &Cli, args: &ConformanceArgs) -> Result<ExitCode, Failure> {
    let timeout = seconds(Some(args.timeout), DEFAULT_SCORER_TIMEOUT)?;
    let endpoint = ScorerEndpoint::parse(&args.endpoint, timeout).map_err(|e| usage(e.to_string()))?;
    let report = conformance::check_endpoint(&endpoint)?;
    println!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CONFORMANCE)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(&cli, a),
        Command::Classify(a) => cmd_classify(&cli, a),
        Command::Train(a) => cmd_train(&cli, a),
        Command::Evaluate(a) => cmd_evaluate(&cli, a),
        Command::Conformance(a) => cmd_conformance(&cli, a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

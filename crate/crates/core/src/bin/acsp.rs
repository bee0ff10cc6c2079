use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acsp::discovery::{MiningParams, ModelDocument};
use acsp::service::{parse_log, replay, Config, LogLine, Registry, ReplayReport, ServiceError};
use acsp::sim::{eval, generate_corpus, run_pipeline, ArchetypeSpec, Corpus, SimError};

#[derive(Parser)]
#[command(
    name = "acsp",
    version,
    about = "AC-3 tutor toolkit: synthetic data, training, evaluation, replay and serving"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus of learners from two planted archetypes.
    Gen {
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Difference between the archetypes' mean learning gain.
        #[arg(long, default_value_t = 0.3)]
        gap: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a corpus, mine rules and write the model document.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        min_support: f64,
        #[arg(long, default_value_t = 0.8)]
        min_confidence: f64,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification accuracy of a model on a labeled corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated stream prefix fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1")]
        prefixes: Vec<f64>,
    },
    /// Re-run a session log and print its digest and trace.
    Replay {
        #[command(flatten)]
        log: LogArgs,
        /// Print one trace line per action after the summary.
        #[arg(long)]
        trace: bool,
    },
    /// Explanation usage statistics of a session log.
    Stats {
        #[command(flatten)]
        log: LogArgs,
    },
    /// Serve the tutoring API over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value = "coloring")]
    problem: String,
    /// A model id known to the registry, or a path to a model document.
    #[arg(long, default_value = "demo")]
    model: String,
    #[arg(long, env = "ACSP_PROBLEMS")]
    problems: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "ACSP_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "ACSP_PROBLEMS")]
    problems: Option<PathBuf>,
    #[arg(long, env = "ACSP_MODELS")]
    models: Option<PathBuf>,
    #[arg(long, env = "ACSP_CATALOG")]
    catalog: Option<PathBuf>,
    #[arg(long, env = "ACSP_TEMPLATES")]
    templates: Option<PathBuf>,
    #[arg(long, env = "ACSP_LOG_DIR")]
    log_dir: Option<PathBuf>,
}

struct Failure {
    code: &'static str,
    message: String,
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure { code: "Io", message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure { code: "Io", message: format!("{}: {e}", path.display()) })
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| Failure { code: "MalformedCorpus", message: format!("{}: {e}", path.display()) })
}

fn load_model(path: &Path) -> Result<ModelDocument, Failure> {
    ModelDocument::from_json(&read(path)?).map_err(|e| ServiceError::from(e).into())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn replay_log(args: &LogArgs) -> Result<ReplayReport, Failure> {
    let mut registry = Registry::default();
    if let Some(dir) = &args.problems {
        registry.load_problems(dir)?;
    }
    let model_path = Path::new(&args.model);
    let model_id = if model_path.extension().is_some_and(|x| x == "json") {
        let doc = load_model(model_path)?;
        registry.models.insert("file".into(), doc.into());
        "file"
    } else {
        args.model.as_str()
    };
    let lines = parse_log(&read(&args.log)?)?;
    let id = match lines.first() {
        Some(LogLine::Action(e)) => e.session.clone(),
        Some(LogLine::Explanation(e)) => e.session.clone(),
        None => "replay".into(),
    };
    Ok(replay(registry.session(&id, &args.problem, model_id)?, &lines)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { users, seed, gap, out } => {
            let corpus = generate_corpus(&ArchetypeSpec::pair(gap), users, seed)?;
            write(&out, &serde_json::to_string(&corpus).expect("corpus serializes"))?;
            let events: usize = corpus.users.iter().map(|u| u.events.len()).sum();
            println!("{} users, {events} events -> {}", corpus.users.len(), out.display());
        }
        Command::Train { corpus, seed, min_support, min_confidence, max_len, out } => {
            let corpus = load_corpus(&corpus)?;
            let params = MiningParams { min_support, min_confidence, max_len };
            let (doc, report) = run_pipeline(&corpus, params, seed)?;
            write(&out, &doc.to_json())?;
            println!("{}", pretty(&report));
        }
        Command::Eval { model, corpus, prefixes } => {
            let doc = load_model(&model)?;
            let corpus = load_corpus(&corpus)?;
            println!("prefix  accuracy");
            for row in eval(&doc, &corpus, &prefixes)? {
                println!("{:>6.2}  {:.3}", row.prefix, row.accuracy);
            }
        }
        Command::Replay { log, trace } => {
            let report = replay_log(&log)?;
            println!("digest {}", report.digest);
            println!("lines {} actions {} hints {}", report.lines, report.trace.len(), report.final_state.hints.len());
            if trace {
                for t in &report.trace {
                    println!("{}", serde_json::to_string(t).expect("trace serializes"));
                }
            }
        }
        Command::Stats { log } => {
            let report = replay_log(&log)?;
            println!("{}", pretty(&report.final_state.stats));
        }
        Command::Serve(a) => {
            let config = Config {
                listen: a.listen,
                problems_dir: a.problems,
                models_dir: a.models,
                catalog: a.catalog,
                templates: a.templates,
                log_dir: a.log_dir,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure { code: "Io", message: e.to_string() })?;
            eprintln!("listening on {}", config.listen);
            runtime.block_on(acsp::service::serve(config))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(2)
        }
    }
}

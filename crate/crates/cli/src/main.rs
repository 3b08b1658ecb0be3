use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tessera_core::inference::{InferenceConfig, ModelSnapshot, SnapshotError};
use tessera_core::multinet::NodeKind;
use tessera_core::project::{write_atomic, Project, ProjectError};

#[derive(Parser)]
#[command(name = "tessera", version, about = "Machine-in-the-loop text analysis workbench")]
struct Cli {
    /// Project directory.
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty project.
    Init { dir: PathBuf },
    /// Load a JSON-lines corpus into the project.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        min_len: Option<usize>,
    },
    /// Fit the next snapshot on the current annotations.
    Fit(FitArgs),
    /// Serve the HTTP API on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Write the highlight table.
    Export {
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    omega: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

enum Failure {
    Data(String),
    Internal(String),
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        let msg = e.to_string();
        match e {
            ProjectError::Io(_)
            | ProjectError::Json(_)
            | ProjectError::Snapshot(SnapshotError::Io(_))
            | ProjectError::Snapshot(SnapshotError::Json(_)) => Failure::Internal(msg),
            _ => Failure::Data(msg),
        }
    }
}

fn fit_config(base: &InferenceConfig, args: &FitArgs) -> InferenceConfig {
    let mut c = base.clone();
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.restarts {
        c.restarts = v;
    }
    if let Some(v) = args.sweeps {
        c.sweeps = v;
    }
    if let Some(v) = args.levels {
        c.max_levels = v;
    }
    if let Some(v) = args.omega {
        c.omega = v;
    }
    c
}

fn print_snapshot(s: &ModelSnapshot) {
    println!("snapshot {}", s.snapshot_id);
    println!("description length {:.6}", s.objective.total);
    for (l, counts) in s.summary().block_counts.iter().enumerate() {
        println!(
            "level {l}: words {}, documents {}, codes {}, categories {}",
            counts[NodeKind::Word.index()],
            counts[NodeKind::Document.index()],
            counts[NodeKind::Code.index()],
            counts[NodeKind::Category.index()],
        );
    }
    println!("duration {:.3} s", s.duration_s);
}

fn run(cli: Cli) -> Result<(), Failure> {
    let open = |dir: &Path| Project::open(dir).map_err(Failure::from);
    match cli.command {
        Command::Init { dir } => {
            Project::init(&dir)?;
            println!("initialized {}", dir.display());
        }
        Command::Ingest {
            input,
            stopwords,
            min_len,
        } => {
            let mut project = open(&cli.project)?;
            let s = project.ingest(&input, stopwords.as_deref(), min_len)?;
            println!(
                "documents {}, words {}, text edges {}, mean length {:.6}, empty {}",
                s.n_documents, s.n_words, s.n_text_edges, s.mean_doc_length, s.n_empty_documents
            );
        }
        Command::Fit(args) => {
            let project = open(&cli.project)?;
            let config = fit_config(&project.config().inference, &args);
            config.validate().map_err(Failure::Data)?;
            let corpus = project.load_corpus()?;
            let annotations = project.load_annotations()?;
            let snapshot = project.fit(&corpus, &annotations, &config, None)?;
            print_snapshot(&snapshot);
        }
        Command::Serve { port } => {
            open(&cli.project)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
            runtime
                .block_on(tessera_service::serve(&cli.project, port))
                .map_err(|e| Failure::Data(e.to_string()))?;
        }
        Command::Export { format: Format::Csv, out } => {
            let project = open(&cli.project)?;
            let corpus = project.load_corpus()?;
            let csv = project
                .load_annotations()?
                .export_csv_string(&corpus)
                .map_err(ProjectError::from)?;
            write_atomic(&out, csv.as_bytes()).map_err(|e| Failure::Internal(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

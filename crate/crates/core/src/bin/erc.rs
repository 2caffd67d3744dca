use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use erc_kit::backend::BackendKind;
use erc_kit::fixtures::{self, BENCHMARKS};
use erc_kit::pipeline::{DatasetSource, RunConfig, SweepKind, Workspace};
use erc_kit::unify::UNIFIED_DATASET_ID;

// Results are already on disk, so a closed stdout (`erc eval | head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "erc", version, about = "Emotion recognition in conversation: data preparation and evaluation")]
struct Cli {
    /// Root that relative paths in the config resolve against.
    #[arg(long, short = 'w', default_value = ".", global = true)]
    workspace: PathBuf,
    /// Run configuration (JSON). Defaults to <workspace>/erc.json.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset id to operate on, or UIME for the unified corpus.
    #[arg(long, global = true)]
    target: Option<String>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Endpoint for the http backend.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    MockEcho,
    MockRule,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic benchmark-shaped corpora and a starter config into the workspace.
    Synth {
        /// 3/1/2 conversations per dataset instead of the full benchmark sizes.
        #[arg(long)]
        mini: bool,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
    },
    /// Validate the configured datasets and print split statistics.
    Ingest,
    /// Merge the ingested datasets into the unified label space.
    Unify,
    /// Build the retrieval domain base from the target's train split.
    BuildIndex,
    /// Render main-task prompts for the evaluation split.
    BuildPrompts,
    /// Write stage-1 and stage-2 training files.
    ExportTrain,
    /// Run the backend over the prompt file.
    Infer,
    /// Score predictions and write the report.
    Eval,
    /// Data-scaling grid over mixing strategies and fractions.
    ScaleExperiment {
        /// Also score the configured backend on the test split.
        #[arg(long)]
        evaluate: bool,
    },
    /// Hyperparameter sweep.
    Sweep {
        #[arg(value_enum)]
        kind: Sweep,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Window,
    Alpha,
    Pairing,
}

fn load_config(cli: &Cli) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let path = cli.config.clone().unwrap_or_else(|| cli.workspace.join("erc.json"));
    let mut config = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(target) = &cli.target {
        config.target = target.clone();
    }
    if let Some(w) = cli.window {
        config.window = w;
    }
    if let Some(a) = cli.alpha {
        config.alpha = a;
    }
    if let Some(b) = cli.backend {
        config.backend.kind = match b {
            Backend::MockEcho => BackendKind::MockEcho,
            Backend::MockRule => BackendKind::MockRule,
            Backend::Http => BackendKind::Http,
        };
    }
    if let Some(e) = &cli.endpoint {
        config.backend.endpoint = Some(e.clone());
    }
    config.validate()?;
    Ok(config)
}

fn synth(cli: &Cli, mini: bool, data_seed: u64) -> Result<(), Box<dyn std::error::Error>> {
    let dir = cli.workspace.join("data");
    let mut datasets = Vec::new();
    for spec in BENCHMARKS {
        let spec = if mini { fixtures::mini(&spec) } else { spec };
        fixtures::write_benchmark(&dir, &spec, data_seed)?;
        say!("wrote data/{}.jsonl", spec.dataset_id);
        datasets.push(DatasetSource {
            id: spec.dataset_id.to_string(),
            corpus: format!("data/{}.jsonl", spec.dataset_id).into(),
            manifest: format!("data/{}.manifest.json", spec.dataset_id).into(),
        });
    }
    let config_path = cli.config.clone().unwrap_or_else(|| cli.workspace.join("erc.json"));
    if config_path.exists() {
        say!("kept existing {}", config_path.display());
    } else {
        let config = RunConfig::new(cli.seed.unwrap_or(0), datasets, UNIFIED_DATASET_ID);
        std::fs::write(&config_path, config.to_json())?;
        say!("wrote {}", config_path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if let Command::Synth { mini, data_seed } = cli.command {
        synth(cli, mini, data_seed)?;
        return Ok(ExitCode::SUCCESS);
    }
    let ws = Workspace::new(&cli.workspace, load_config(cli)?)?;
    say!("config {}", ws.config_hash());
    match &cli.command {
        Command::Synth { .. } => unreachable!(),
        Command::Ingest => {
            for (stats, warnings) in ws.ingest()? {
                say_raw!("{stats}");
                for w in warnings {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::Unify => {
            let (corpus, warnings) = ws.unify()?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            say_raw!("{}", corpus.stats());
        }
        Command::BuildIndex => {
            let index = ws.build_index()?;
            say!("{} entries ({})", index.len(), index.embedder_id());
            for (label, n) in index.label_counts() {
                say!("  {label:<12} {n}");
            }
        }
        Command::BuildPrompts => {
            let samples = ws.build_prompts()?;
            say!("{} prompts", samples.len());
        }
        Command::ExportTrain => {
            let (s1, s2) = ws.export_train()?;
            say!("stage1 {s1} records, stage2 {s2} records");
        }
        Command::Infer => {
            let predictions = ws.infer()?;
            say!("{} predictions", predictions.len());
        }
        Command::Eval => {
            let report = ws.eval()?;
            say_raw!("{report}");
            let limit = ws.config().max_unparseable_fraction;
            if report.unparseable_fraction() > limit {
                eprintln!(
                    "error: {:.2}% of predictions are unparseable (limit {:.2}%)",
                    report.unparseable_fraction() * 100.0,
                    limit * 100.0
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::ScaleExperiment { evaluate } => {
            ws.scale_experiment(*evaluate)?;
            say_raw!("{}", std::fs::read_to_string(ws.path("scale/grid.txt"))?);
        }
        Command::Sweep { kind } => {
            let kind = match kind {
                Sweep::Window => SweepKind::Window,
                Sweep::Alpha => SweepKind::Alpha,
                Sweep::Pairing => SweepKind::Pairing,
            };
            ws.sweep(kind)?;
            say_raw!("{}", std::fs::read_to_string(ws.path(&format!("sweep/{}/summary.txt", kind.as_str())))?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

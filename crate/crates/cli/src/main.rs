mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{DatasetStep, FpKind, TrainArgs};
use molkit::dataset::TaskGroup;
use molkit::substruct::{functional_group_table, maccs_table};
use molkit::toymodel::{SynthConfig, TrainMode};

/// Molecular graph, preference-pair and evaluation pipelines.
#[derive(Parser, Debug)]
#[command(name = "molkit", disable_version_flag = true)]
struct Cli {
    /// Print the toolkit and key-table versions.
    #[arg(short = 'V', long)]
    version: bool,

    /// Worker threads for parallel stages (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Canonical SMILES (or SELFIES) for each input molecule.
    Canonicalize {
        /// Molecules as SMILES or SELFIES; read from --in or stdin if absent.
        molecules: Vec<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Emit SELFIES instead of SMILES.
        #[arg(long)]
        selfies: bool,
    },
    /// Hex fingerprints, one `width:hex` line per molecule.
    Fingerprint {
        molecules: Vec<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "morgan")]
        kind: FpKind,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, default_value_t = molkit::fingerprint::DEFAULT_WIDTH)]
        width: usize,
        /// Longest path, in bonds, for the path fingerprint.
        #[arg(long, default_value_t = 7)]
        max_path: usize,
    },
    /// Chosen/rejected preference pairs by key-substructure perturbation.
    MakePairs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        ratio: f64,
        #[arg(long)]
        seed: u64,
        /// Key table to use instead of the shipped one.
        #[arg(long)]
        keys: Option<PathBuf>,
    },
    /// Importance-sampled molecule indices for pre-training.
    SamplePretrain {
        /// JSONL of `{"bits": [...]}` functional-group labels.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Whitespace-separated group indices to keep instead of the
        /// frequency filter.
        #[arg(long, conflicts_with = "keep_all")]
        retained: Option<PathBuf>,
        /// Keep every group.
        #[arg(long)]
        keep_all: bool,
    },
    /// Dataset construction steps driven by a JSON config.
    BuildDataset {
        #[arg(value_enum)]
        step: DatasetStep,
        #[arg(long)]
        config: PathBuf,
        /// Config override, `key=value` (repeatable).
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Train the toy graph-conditioned scorer.
    TrainToy {
        #[arg(long)]
        mode: TrainMode,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        sets: Vec<String>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score predictions against references.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        task_group: TaskGroup,
        #[arg(long)]
        out: PathBuf,
        /// Training-set mean used to impute unparseable regression outputs.
        #[arg(long)]
        train_mean: Option<f64>,
    },
    /// Graph discrimination ratio of scored pairs (`r_w`, `r_l`).
    Gdr {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Synthetic pairs whose target depends only on the graph.
    SynthTask {
        #[arg(long, default_value_t = 400)]
        pairs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        min_atoms: usize,
        #[arg(long, default_value_t = 14)]
        max_atoms: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// SFT-only versus SFT+MolPO graph discrimination on the synthetic task.
    Ablation {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 400)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn version_line() -> String {
    format!(
        "molkit {} (keys {}, groups {})",
        env!("CARGO_PKG_VERSION"),
        maccs_table().version(),
        functional_group_table().version()
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let Some(command) = cli.command else { unreachable!("checked by caller") };
    let workers = cli.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| match command {
        Command::Canonicalize { molecules, input, selfies } => commands::canonicalize(&molecules, input.as_deref(), selfies),
        Command::Fingerprint { molecules, input, kind, radius, width, max_path } => {
            commands::fingerprint(&molecules, input.as_deref(), kind, radius, width, max_path)
        }
        Command::MakePairs { input, out, ratio, seed, keys } => commands::make_pairs(&input, &out, ratio, seed, keys.as_deref()),
        Command::SamplePretrain { labels, n, seed, out, retained, keep_all } => {
            commands::sample_pretrain(&labels, n, seed, &out, retained.as_deref(), keep_all)
        }
        Command::BuildDataset { step, config, sets } => commands::build_dataset(step, &config, &sets),
        Command::TrainToy { mode, pairs, config, sets, seed, out, trace } => commands::train_toy(TrainArgs {
            mode,
            pairs: &pairs,
            config: config.as_deref(),
            sets: &sets,
            seed,
            out: &out,
            trace: trace.as_deref(),
        }),
        Command::Eval { pred, reference, task_group, out, train_mean } => {
            commands::eval(&pred, &reference, task_group, &out, train_mean)
        }
        Command::Gdr { pairs } => commands::gdr(&pairs),
        Command::SynthTask { pairs, seed, min_atoms, max_atoms, out } => {
            commands::synth_task(SynthConfig { pairs, seed, min_atoms, max_atoms }, &out)
        }
        Command::Ablation { seed, seeds, train, test, out } => commands::ablation(seed, seeds, train, test, out.as_deref()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if cli.version {
        println!("{}", version_line());
        return ExitCode::SUCCESS;
    }
    if cli.command.is_none() {
        eprintln!("{}", <Cli as clap::CommandFactory>::command().render_help());
        return ExitCode::from(1);
    }
    if cli.quiet {
        io::set_min_level(io::Level::Warn);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let input = io::is_input_error(&e);
            io::emit(io::Level::Error, if input { "input_error" } else { "internal_error" }, serde_json::json!({ "message": format!("{e:#}") }));
            ExitCode::from(if input { 1 } else { 2 })
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bgcnn::graph::SplitMode;
use bgcnn_cli::commands;
use bgcnn_cli::convert::{cmd_convert, ConvertOptions};
use bgcnn_cli::{CliError, CliResult, ExperimentConfig, Task};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bgcnn", version, about = "Bayesian graph convolutional network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dataset (LINQS .content/.cites or CSV) into a container.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        name: Option<String>,
        /// Test nodes drawn when the input has no roles.
        #[arg(long, default_value_t = 1000)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        expect_nodes: Option<usize>,
        #[arg(long)]
        expect_edge_rows: Option<usize>,
    },
    /// Train a model over repeated runs.
    Train {
        #[arg(long, value_enum, default_value_t = Method::Gcnn)]
        method: Method,
        #[command(flatten)]
        common: Common,
    },
    /// Random attack experiment with both algorithms.
    Attack {
        /// Fixed perturbation budget per target (0 gives an unperturbed control).
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        selection_trials: Option<usize>,
        #[arg(long)]
        eval_trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Tables and boxplot data from run directories.
    Report {
        runs: Vec<PathBuf>,
        #[arg(long, short, default_value = "report")]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Gcnn,
    Bayesian,
    Mmsbm,
}

#[derive(Args)]
struct Common {
    /// JSON config; flags override its fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long, value_enum)]
    split_mode: Option<Split>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_graphs: Option<usize>,
    #[arg(long)]
    dropout_samples: Option<usize>,
    #[arg(long)]
    mmsbm_iters: Option<usize>,
    #[arg(long)]
    no_baseline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Fixed,
    Random,
}

impl Common {
    fn apply(&self, task: Task) -> CliResult<ExperimentConfig> {
        let mut cfg = commands::config_from(self.config.as_deref())?;
        cfg.task = task;
        if let Some(v) = &self.dataset {
            cfg.dataset = v.clone();
        }
        if let Some(v) = &self.output {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.per_class {
            cfg.split.per_class = v;
        }
        if let Some(v) = self.split_mode {
            cfg.split.mode = match v {
                Split::Fixed => SplitMode::Fixed,
                Split::Random => SplitMode::Random,
            };
        }
        if let Some(v) = self.split_seed {
            cfg.split.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.gcnn.epochs = v;
        }
        if let Some(v) = self.n_graphs {
            cfg.ensemble.n_graphs = v;
        }
        if let Some(v) = self.dropout_samples {
            cfg.ensemble.n_dropout_samples = v;
        }
        if let Some(v) = self.mmsbm_iters {
            cfg.ensemble.n_mmsbm_iters = v;
        }
        if self.no_baseline {
            cfg.include_baseline = false;
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert { input, output, name, n_test, seed, expect_nodes, expect_edge_rows } => {
            let opts = ConvertOptions { name, n_test, seed, expect_nodes, expect_edge_rows };
            let rep = cmd_convert(&input, &output, &opts)?;
            println!(
                "{}: {} nodes, {} edge rows ({} undirected edges, {} dropped), {} classes",
                rep.manifest.name,
                rep.manifest.n_nodes,
                rep.manifest.n_edge_rows.unwrap_or(0),
                rep.undirected_edges,
                rep.dropped_edge_rows,
                rep.classes.len()
            );
        }
        Command::Train { method, common } => {
            let task = match method {
                Method::Gcnn => Task::TrainGcnn,
                Method::Bayesian => Task::TrainBayesian,
                Method::Mmsbm => Task::MmsbmFit,
            };
            let cfg = common.apply(task)?;
            let out = commands::run(&cfg)?;
            for m in &out.summary.methods {
                println!("{}: {} = {:.4} ± {:.4} over {} runs", m.method, m.metric, m.mean, m.sd, m.values.len());
            }
        }
        Command::Attack { budget, selection_trials, eval_trials, common } => {
            let mut cfg = common.apply(Task::Attack)?;
            if budget.is_some() {
                cfg.attack.budget_override = budget;
            }
            if let Some(v) = selection_trials {
                cfg.attack.selection_trials = v;
            }
            if let Some(v) = eval_trials {
                cfg.attack.eval_trials = v;
            }
            let out = commands::run(&cfg)?;
            for m in &out.summary.methods {
                println!("{}: {} = {:.4}", m.method, m.metric, m.mean);
            }
        }
        Command::Report { runs, output } => {
            let cfg = ExperimentConfig { task: Task::Report, runs, output_dir: output.clone(), ..Default::default() };
            commands::run(&cfg)?;
            print!("{}", std::fs::read_to_string(output.join("tables.md")).unwrap_or_default());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code: CliError = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}

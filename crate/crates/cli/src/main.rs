//! `ascnet` command-line tool.

mod audit;
mod eval;
mod extract;
mod run;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use ascnet::audit::BnConvention;
use ascnet::cnn7::Variant;
use ascnet::frontend::FrontendKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ascnet", version, about = "Acoustic scene classification with compact CNNs")]
struct Cli {
    /// Only report warnings and errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute and cache spectrogram features for every manifest entry.
    Extract(ExtractArgs),
    /// Train one spectrogram branch.
    Train(TrainArgs),
    /// Evaluate trained branches on the evaluation split.
    Eval(EvalArgs),
    /// Count trainable parameters and model size.
    Audit(AuditArgs),
    /// Write the synthetic three-class corpus with a manifest and config.
    SynthDataset(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BranchArg {
    Mel,
    Gam,
    Cqt,
    All,
}

impl BranchArg {
    fn kinds(self) -> Vec<FrontendKind> {
        match self {
            BranchArg::Mel => vec![FrontendKind::Mel],
            BranchArg::Gam => vec![FrontendKind::Gam],
            BranchArg::Cqt => vec![FrontendKind::Cqt],
            BranchArg::All => FrontendKind::ALL.to_vec(),
        }
    }
}

/// Expands branch flags into a duplicate-free list in first-seen order.
fn expand_branches(args: &[BranchArg]) -> Vec<FrontendKind> {
    let mut out: Vec<FrontendKind> = Vec::new();
    for k in args.iter().flat_map(|a| a.kinds()) {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    config: PathBuf,
    /// Front end(s) to extract; repeatable.
    #[arg(long = "frontend", value_enum, default_value = "all")]
    frontends: Vec<BranchArg>,
    /// Use this manifest instead of the configured one.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write caches under this directory instead of the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    branch: BranchArg,
    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Branch(es) to evaluate; repeatable.
    #[arg(long = "branch", value_enum, required = true)]
    branches: Vec<BranchArg>,
    /// Checkpoint per branch, in branch order. Defaults to each branch's run directory.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<PathBuf>,
    /// Combine branches with the product rule.
    #[arg(long)]
    fuse: bool,
    /// Override the configured epoch count when locating default checkpoints.
    #[arg(long)]
    epochs: Option<usize>,
    /// Report directory; defaults to the configured reports path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["variant", "checkpoint"])))]
struct AuditArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of classes for `--variant`.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Size of an ensemble of identical models.
    #[arg(long, default_value_t = 1)]
    ensemble: usize,
    /// Exit nonzero when the total exceeds this many KB.
    #[arg(long)]
    assert_max_kb: Option<f64>,
    /// Whether batch-norm γ/β count toward the asserted total.
    #[arg(long, value_enum, default_value = "exclusive")]
    bn: BnArg,
    /// Print JSON instead of the text table.
    #[arg(long)]
    json: bool,
    /// Also write `audit.json` and `audit.txt` into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BnArg {
    Inclusive,
    Exclusive,
}

impl From<BnArg> for BnConvention {
    fn from(b: BnArg) -> Self {
        match b {
            BnArg::Inclusive => BnConvention::Inclusive,
            BnArg::Exclusive => BnConvention::Exclusive,
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    train_per_class: usize,
    #[arg(long, default_value_t = 3)]
    eval_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();

    let result = match cli.command {
        Command::Extract(a) => extract::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Audit(a) => audit::run(a),
        Command::SynthDataset(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(run::exit_code(&e))
        }
    }
}

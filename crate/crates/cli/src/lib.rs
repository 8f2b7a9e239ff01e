//! The `tangma` command line: `train`, `eval`, `gradcheck` and `compare`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tangma::data::SyntheticShape;
use tangma::gradsuite;
use tangma::harness::{self, DataSource, RunConfig, RunOutput};
use tangma::{ActivationKind, Architecture, Error, Model, Result};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "TANGMA_DATA_DIR";

/// MNIST file names tried inside the data directory, in order.
const MNIST_FILES: [&str; 5] = [
    "mnist_train.csv",
    "mnist_train.csv.gz",
    "mnist.csv",
    "mnist.csv.gz",
    "mnist_10k.csv.gz",
];

#[derive(Debug, Parser)]
#[command(
    name = "tangma",
    version,
    about = "Train and compare CNNs with the Tangma activation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write metrics.csv, params.csv and model.ckpt.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
    /// Train all four activations on one shared split and print a summary.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetArg {
    Mnist,
    Cifar10,
    /// Generated 28×28 grayscale blobs.
    SyntheticMnist,
    /// Generated 32×32 colour blobs.
    SyntheticCifar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Relu,
    Swish,
    Gelu,
    Tangma,
}

impl From<ActivationArg> for ActivationKind {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => ActivationKind::Relu,
            ActivationArg::Swish => ActivationKind::Swish,
            ActivationArg::Gelu => ActivationKind::Gelu,
            ActivationArg::Tangma => ActivationKind::Tangma,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_enum, default_value = "mnist")]
    dataset: DatasetArg,
    /// MNIST CSV file or CIFAR-10 directory. Defaults to a file or directory
    /// under $TANGMA_DATA_DIR.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of generated samples for the synthetic datasets.
    #[arg(long, default_value_t = 2000)]
    synthetic_samples: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fraction of samples used for training; the rest validate.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// 1-based batch indices at which alpha and gamma are recorded, e.g. 130,260.
    #[arg(long, value_delimiter = ',')]
    trace_batches: Option<Vec<usize>>,
    /// Train on a random subset of this many samples.
    #[arg(long)]
    subset: Option<usize>,
    /// One (alpha, gamma) pair per activation site instead of one shared pair.
    #[arg(long)]
    per_site: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "tangma")]
    activation: ActivationArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Activations to run, in order.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["tangma", "relu", "swish", "gelu"])]
    activations: Vec<ActivationArg>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Evaluate on a random subset of this many samples.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Random instances per op.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip the whole-model checks.
    #[arg(long)]
    ops_only: bool,
}

/// Largest error the op suite accepts.
pub const OP_TOLERANCE: f64 = 1e-5;
/// Largest error the whole-model check accepts.
pub const MODEL_TOLERANCE: f64 = 1e-4;

fn find_mnist(dir: &Path) -> Result<PathBuf> {
    MNIST_FILES
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            Error::Config(format!(
                "no MNIST CSV in {} (looked for {})",
                dir.display(),
                MNIST_FILES.join(", ")
            ))
        })
}

fn data_source(args: &DataArgs) -> Result<DataSource> {
    let path = || -> Result<PathBuf> {
        if let Some(p) = &args.data {
            return Ok(p.clone());
        }
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("pass --data or set {DATA_DIR_ENV}")))
    };
    Ok(match args.dataset {
        DatasetArg::Mnist => {
            let p = path()?;
            DataSource::MnistCsv(if p.is_dir() { find_mnist(&p)? } else { p })
        }
        DatasetArg::Cifar10 => DataSource::Cifar10Dir(path()?),
        DatasetArg::SyntheticMnist => DataSource::Synthetic {
            shape: SyntheticShape::MnistLike,
            samples: args.synthetic_samples,
        },
        DatasetArg::SyntheticCifar => DataSource::Synthetic {
            shape: SyntheticShape::CifarLike,
            samples: args.synthetic_samples,
        },
    })
}

fn run_config(args: &RunArgs, activation: ActivationKind) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(data_source(&args.data)?, activation);
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.learning_rate = args.lr;
    cfg.seed = args.seed;
    cfg.train_fraction = args.train_fraction;
    cfg.output_dir = Some(args.out.clone());
    cfg.trace_batches = args.trace_batches.clone();
    cfg.subset = args.subset;
    cfg.per_site_tangma = args.per_site;
    cfg.validate()?;
    Ok(cfg)
}

fn print_epochs(out: &mut dyn Write, run: &RunOutput) -> std::io::Result<()> {
    for e in &run.epochs {
        writeln!(
            out,
            "{:<7} epoch {:>2}  train loss {:.4}  val loss {:.4}  val acc {:.2}%  {:.1}s",
            run.activation.name(),
            e.epoch,
            e.train_loss,
            e.val_loss,
            e.val_accuracy,
            e.epoch_time
        )?;
    }
    for t in &run.traces {
        writeln!(
            out,
            "        epoch {:>2} batch {:>4}  alpha {:.4}  gamma {:.4}",
            t.epoch, t.batch, t.alpha, t.gamma
        )?;
    }
    Ok(())
}

fn train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = run_config(&args.run, args.activation.into())?;
    let run = harness::train_run(&cfg)?;
    print_epochs(out, &run).map_err(|e| Error::io("<stdout>", e))?;
    writeln!(out, "wrote {}", args.run.out.display()).map_err(|e| Error::io("<stdout>", e))
}

fn compare(args: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = run_config(&args.run, ActivationKind::Tangma)?;
    let kinds: Vec<ActivationKind> = args.activations.iter().map(|&a| a.into()).collect();
    let runs = harness::compare(&cfg, &kinds)?;
    let io = |e| Error::io("<stdout>", e);
    for r in &runs {
        print_epochs(out, r).map_err(io)?;
    }
    writeln!(out, "\n{}", harness::summary_table(&runs)).map_err(io)?;
    let summary = args.run.out.join("summary.csv");
    std::fs::write(&summary, harness::summary_csv(&runs)).map_err(|e| Error::io(&summary, e))
}

fn eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = Model::<f32>::load(&args.checkpoint)?;
    let source = data_source(&args.data)?;
    if source.architecture() != model.spec().architecture {
        return Err(Error::Config(format!(
            "checkpoint is a {} model but the dataset needs {}",
            model.spec().architecture,
            source.architecture()
        )));
    }
    let mut d = source.load(args.seed)?;
    if let Some(n) = args.subset {
        d = d.subset(n, args.seed);
    }
    let e = harness::evaluate(&model, &d, args.batch_size)?;
    writeln!(
        out,
        "{} samples  loss {:.4}  accuracy {:.2}%",
        d.len(),
        e.loss,
        e.accuracy
    )
    .map_err(|e| Error::io("<stdout>", e))
}

/// Returns whether every check passed.
fn gradcheck(args: GradcheckArgs, out: &mut dyn Write) -> Result<bool> {
    let io = |e| Error::io("<stdout>", e);
    let mut ok = true;
    writeln!(
        out,
        "op suite (h = {:e}, {} instances per op)",
        gradsuite::STEP,
        args.instances
    )
    .map_err(io)?;
    for r in gradsuite::run_op_suite(args.instances, args.seed)? {
        let pass = r.max_error < OP_TOLERANCE;
        ok &= pass;
        writeln!(out, "  {r}  {}", if pass { "ok" } else { "FAIL" }).map_err(io)?;
    }
    if !args.ops_only {
        writeln!(out, "whole-model checks (2-sample batch, dropout off)").map_err(io)?;
        for arch in [Architecture::Mnist, Architecture::Cifar10] {
            let r = gradsuite::model_grad_check(arch, ActivationKind::Tangma, 4, args.seed)?;
            let pass = r.max_error < MODEL_TOLERANCE;
            ok &= pass;
            writeln!(
                out,
                "  {:<8} {:<7} {:>3} coordinates  max rel error {:.3e} ({})  {}",
                arch.name(),
                r.activation.name(),
                r.coordinates,
                r.max_error,
                r.worst_param,
                if pass { "ok" } else { "FAIL" }
            )
            .map_err(io)?;
        }
    }
    Ok(ok)
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code. Usage errors print to stderr and return 2;
/// runtime errors return 1.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a, out).map(|()| true),
        Command::Eval(a) => eval(a, out).map(|()| true),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::Compare(a) => compare(a, out).map(|()| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tversky::data::{load_item_set, save_item_set, split_items, DataError, FeatureVector, LabeledItemSet, SplitSpec};
use tversky::eval::{evaluate, tune_threshold, EvalConfig};
use tversky::measures::Family;
use tversky::model::{ModelError, ModelFile, TrainingMetadata};
use tversky::optim::{OptimizerConfig, OptimizerFamily};
use tversky::trainer::{train_observed, TrainConfig};

#[derive(Parser)]
#[command(name = "tversky", version, about = "Learn and evaluate Tversky similarity on binary features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a labelled CSV into train/val/test files.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Fractions or percentages, e.g. 70/10/20.
        #[arg(long, default_value = "70/10/20")]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a measure and write a model file.
    Train(TrainArgs),
    /// Evaluate a model on labelled data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        triplets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        positive_fraction: f64,
        /// Skip the feature-name check (feature counts must still match).
        #[arg(long)]
        ignore_names: bool,
    },
    /// Score a single pair of rows.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated 0/1 row.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    symmetric: bool,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// sgd_nesterov, adagrad or adam (default depends on the family).
    #[arg(long)]
    optimizer: Option<OptimizerFamily>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    patience_delta: Option<f64>,
    /// Pairs drawn from the validation set for each evaluation.
    #[arg(long)]
    val_pairs: Option<usize>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Pairs used to tune the decision threshold after training.
    #[arg(long, default_value_t = 100_000)]
    tune_triplets: usize,
}

/// Exit code 2 for bad input or flags, 1 for failures while running.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_data(path: &Path) -> Result<LabeledItemSet, CliError> {
    load_item_set(path).map_err(|e| match e {
        DataError::Io { .. } => usage(e),
        other => usage(format!("{}: {other}", path.display())),
    })
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    ModelFile::load(path).map_err(|e| match e {
        ModelError::Io { .. } => usage(e),
        other => usage(format!("{}: {other}", path.display())),
    })
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = s
        .split('/')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("ratios must look like 70/10/20, got {s:?}")))?;
    let [a, b, c] = parts[..] else {
        return Err(usage(format!("ratios need three parts, got {s:?}")));
    };
    let total = a + b + c;
    let scale = if (total - 100.0).abs() < 1e-6 {
        100.0
    } else if (total - 1.0).abs() < 1e-9 {
        1.0
    } else {
        return Err(usage(format!("ratios must sum to 1 or 100, got {total}")));
    };
    Ok((a / scale, b / scale, c / scale))
}

fn cmd_split(data: &Path, out_dir: &Path, ratios: &str, seed: u64) -> Result<(), CliError> {
    let (tr, va, te) = parse_ratios(ratios)?;
    let spec = SplitSpec::new(tr, va, te, seed).map_err(usage)?;
    let set = load_data(data)?;
    let (train, val, test) = split_items(&set, &spec).map_err(usage)?;
    fs::create_dir_all(out_dir).map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    for (name, part) in [("train.csv", &train), ("val.csv", &val), ("test.csv", &test)] {
        save_item_set(part, out_dir.join(name)).map_err(runtime)?;
    }
    println!("train={} val={} test={}", train.len(), val.len(), test.len());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::for_family(a.family);
    cfg.seed = a.seed;
    cfg.symmetric = a.symmetric;
    cfg.loss.margin = a.margin;
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iterations = v;
    }
    if let Some(f) = a.optimizer {
        let lr = a.lr.unwrap_or(cfg.optimizer.learning_rate);
        cfg.optimizer = OptimizerConfig::new(f, lr);
    } else if let Some(lr) = a.lr {
        cfg.optimizer.learning_rate = lr;
    }
    if let Some(v) = a.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = a.patience {
        cfg.patience_evals = v;
    }
    if let Some(v) = a.patience_delta {
        cfg.patience_delta = v;
    }
    if let Some(v) = a.val_pairs {
        cfg.val_pairs = v;
    }
    if let Some(v) = a.l1 {
        cfg.loss.l1_coeff = v;
    }
    if let Some(v) = a.l2 {
        cfg.loss.l2_coeff = v;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = train_config(a)?;
    let tune = EvalConfig::new(a.tune_triplets, a.seed);
    tune.validate().map_err(usage)?;
    let train_set = load_data(&a.train)?;
    let val_set = load_data(&a.val)?;
    if train_set.feature_names() != val_set.feature_names() {
        return Err(usage("train and val files have different feature columns"));
    }

    let report = train_observed(&train_set, &val_set, a.family, &cfg, &mut |r| eprintln!("{r}"))
        .map_err(runtime)?;
    let threshold = tune_threshold(&report.best_params, &val_set, &tune).map_err(runtime)?;
    let model = ModelFile::new(
        &report.best_params,
        train_set.feature_names().to_vec(),
        threshold,
        cfg.loss.margin,
        TrainingMetadata {
            seed: a.seed,
            iterations: report.iterations_run as u64,
            best_val_accuracy: report.best_val_accuracy,
        },
    )
    .map_err(runtime)?;
    model.save(&a.out).map_err(runtime)?;
    eprintln!(
        "stopped: {} after {} iterations, best at iteration {}, threshold {threshold:.6}, model written to {}",
        report.stop_reason,
        report.iterations_run,
        report.best_iteration,
        a.out.display()
    );
    if let Some(last) = report.history.last() {
        println!("{last}");
    }
    Ok(())
}

fn cmd_eval(
    model_path: &Path,
    data: &Path,
    triplets: usize,
    seed: u64,
    positive_fraction: f64,
    ignore_names: bool,
) -> Result<(), CliError> {
    let cfg = EvalConfig {
        positive_fraction,
        ..EvalConfig::new(triplets, seed)
    };
    cfg.validate().map_err(usage)?;
    let model = load_model(model_path)?;
    let set = load_data(data)?;
    if !ignore_names {
        model.check_feature_names(set.feature_names()).map_err(usage)?;
    }
    let measure = model.measure().map_err(usage)?;
    let result = evaluate(&measure, model.threshold, &set, &cfg).map_err(usage)?;
    println!("{}", result.result_line(measure.family(), seed));
    Ok(())
}

fn cmd_score(model_path: &Path, x: &str, y: &str) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let x = FeatureVector::parse_row(x).map_err(|e| usage(format!("--x: {e}")))?;
    let y = FeatureVector::parse_row(y).map_err(|e| usage(format!("--y: {e}")))?;
    let measure = model.measure().map_err(usage)?;
    let scored = measure.score_detailed(&x, &y).map_err(usage)?;
    if scored.degenerate {
        eprintln!("warning: no active weighted features in either row, score defaults to 1");
    }
    let label = if scored.value > model.threshold { "similar" } else { "dissimilar" };
    println!("score={:.6} label={label}", scored.value);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Split { data, out_dir, ratios, seed } => cmd_split(&data, &out_dir, &ratios, seed),
        Command::Train(args) => cmd_train(&args),
        Command::Eval {
            model,
            data,
            triplets,
            seed,
            positive_fraction,
            ignore_names,
        } => cmd_eval(&model, &data, triplets, seed, positive_fraction, ignore_names),
        Command::Score { model, x, y } => cmd_score(&model, &x, &y),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let reason = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: {reason}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message().replace('\n', " "));
            ExitCode::from(e.code())
        }
    }
}

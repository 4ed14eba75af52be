//! The `mindisc` command line.
//!
//! Exit codes: 0 success, 2 bad arguments or config, 3 I/O or unreadable
//! input, 4 numeric divergence, 5 model/data mismatch. Every failure prints a
//! single line starting with `error:` to stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::data::{gen_gaussian_shift, gen_two_moons, load_csv, save_csv, CsvOptions, Dataset};
use crate::error::Error;
use crate::evaluation::{
    accuracy, export_embedding, method_config, run_benchmark, two_moons_sweep, two_moons_task,
    MethodConfig, TransferTask, METHOD_NAMES,
};
use crate::trainer::{parse_kv_lines, LossReport, TrainConfig, Trainer};

pub const SEED_ENV: &str = "MINDISC_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

/// A failure on its way to the process exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn mismatch(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MISMATCH,
            message: message.into(),
        }
    }
}

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParam(_) | Error::InvalidSpec(_) => EXIT_CONFIG,
        Error::Io(_)
        | Error::FileNotFound(_)
        | Error::CorruptCheckpoint(_)
        | Error::VersionMismatch { .. }
        | Error::MalformedRow { .. }
        | Error::NonFiniteValue { .. } => EXIT_IO,
        Error::NonFiniteLoss { .. } | Error::DegenerateBatch(_) => EXIT_DIVERGED,
        Error::ShapeMismatch(_)
        | Error::LabelOutOfRange { .. }
        | Error::UnlabeledDataset
        | Error::EmptyDataset
        | Error::EmptyBatch(_) => EXIT_MISMATCH,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        Error::Io(err).into()
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "mindisc",
    version,
    about = "Minimum-discrepancy domain adaptation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV (features..., label).
    Generate {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Train from a config file; writes a checkpoint and a loss-history CSV.
    Train(TrainArgs),
    /// Print the accuracy of a checkpoint on a labeled CSV.
    Eval(EvalArgs),
    /// Train and score every (task, method, seed) cell; write the table as CSV.
    Benchmark(BenchmarkArgs),
    /// Export a 2-D PCA embedding of representation activations as CSV.
    Embed(EmbedArgs),
}

#[derive(Debug, Subcommand)]
enum Generator {
    /// Two interleaved half circles, rotated about the origin.
    TwoMoons {
        /// Number of samples (>= 2)
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Standard deviation of the Gaussian noise
        #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
        noise: f64,
        /// Rotation in degrees
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rotation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Class-conditional Gaussians; the target is shifted and rescaled.
    GaussianShift {
        /// Samples per domain (>= classes)
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Target mean shift: one value for every axis, or `dim` comma-separated values
        #[arg(long, default_value = "1", allow_negative_numbers = true)]
        shift: String,
        /// Target covariance is cov_scale · I
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        cov_scale: f64,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Source CSV path
        #[arg(long)]
        out: PathBuf,
        /// Target CSV path
        #[arg(long)]
        target_out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    /// Config file of `key = value` lines [default: none, every key at its default]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable, applied after the file and MINDISC_SEED
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Continue from this checkpoint instead of a fresh initialization [default: none]
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many optimizer steps [default: none, run all epochs]
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled CSV (features..., label)
    #[arg(long)]
    data: PathBuf,
    /// Class count of the dataset [default: the checkpoint's]
    #[arg(long)]
    classes: Option<usize>,
    /// The CSV starts with a header line
    #[arg(long, default_value_t = false)]
    header: bool,
}

#[derive(Debug, clap::Args)]
struct BenchmarkArgs {
    /// Built-in task list: two-moons-sweep (15/30/45/60 degrees) or two-moons-30
    #[arg(long, default_value = "two-moons-sweep")]
    suite: String,
    /// Config file of `key = value` lines [default: none]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Number of seeds; cells use seeds 1..=N
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labeled source CSV
    #[arg(long)]
    source: PathBuf,
    /// Target CSV
    #[arg(long)]
    target: PathBuf,
    /// The target CSV has no label column
    #[arg(long, default_value_t = false)]
    target_unlabeled: bool,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// Training settings plus the inputs, outputs and method list of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Whether the target CSV has a label column (ignored during training).
    pub target_labeled: bool,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    /// Methods compared by `benchmark`.
    pub methods: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            source: None,
            target: None,
            target_labeled: true,
            checkpoint: PathBuf::from("checkpoint.mdck"),
            history: PathBuf::from("history.csv"),
            methods: METHOD_NAMES.iter().map(|m| m.to_string()).collect(),
        }
    }
}

impl RunConfig {
    pub const RUN_KEYS: [&'static str; 6] = [
        "source",
        "target",
        "target_labeled",
        "checkpoint",
        "history",
        "methods",
    ];

    /// Sets a key; relative paths are taken relative to `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), Error> {
        let path = || base.join(value);
        match key {
            "source" => self.source = Some(path()),
            "target" => self.target = Some(path()),
            "target_labeled" => {
                self.target_labeled = value.parse().map_err(|_| {
                    Error::Config(format!("invalid value {value:?} for target_labeled"))
                })?
            }
            "checkpoint" => self.checkpoint = path(),
            "history" => self.history = path(),
            "methods" => {
                let methods: Vec<String> = value.split(',').map(|m| m.trim().to_string()).collect();
                if let Some(bad) = methods.iter().find(|m| !METHOD_NAMES.contains(&m.as_str())) {
                    return Err(Error::Config(format!(
                        "unknown method {bad:?} (expected one of {})",
                        METHOD_NAMES.join(", ")
                    )));
                }
                self.methods = methods;
            }
            _ => self.train.set(key, value)?,
        }
        Ok(())
    }

    /// Text form accepted back by [`RunConfig::set`] with an empty base.
    pub fn to_kv_text(&self) -> String {
        let mut out = self.train.to_kv_text();
        for (key, path) in [("source", &self.source), ("target", &self.target)] {
            if let Some(p) = path {
                let _ = writeln!(out, "{key} = {}", p.display());
            }
        }
        let _ = writeln!(out, "target_labeled = {}", self.target_labeled);
        let _ = writeln!(out, "checkpoint = {}", self.checkpoint.display());
        let _ = writeln!(out, "history = {}", self.history.display());
        let _ = writeln!(out, "methods = {}", self.methods.join(","));
        out
    }

    /// File, then `MINDISC_SEED`, then `--set` overrides. Paths in the file
    /// are relative to the file; paths given with `--set` and the defaults
    /// are relative to the working directory.
    pub fn assemble(
        file: Option<&Path>,
        env_seed: Option<&str>,
        overrides: &[String],
    ) -> Result<Self, Error> {
        let cwd = std::env::current_dir()?;
        let mut cfg = Self::default();
        cfg.checkpoint = cwd.join(&cfg.checkpoint);
        cfg.history = cwd.join(&cfg.history);
        if let Some(file) = file {
            let text = match fs::read_to_string(file) {
                Ok(t) => t,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(Error::FileNotFound(file.to_path_buf()))
                }
                Err(e) => return Err(e.into()),
            };
            let base = cwd.join(file.parent().unwrap_or(Path::new("")));
            for (key, value) in parse_kv_lines(&text)? {
                cfg.set(&key, &value, &base)?;
            }
        }
        if let Some(seed) = env_seed {
            cfg.train.seed = seed.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer"))
            })?;
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {item:?}")))?;
            cfg.set(key.trim(), value.trim(), &cwd)?;
        }
        cfg.train.validate()?;
        Ok(cfg)
    }
}

fn config_keys_help() -> String {
    let defaults = RunConfig::default();
    let mut out = String::from("Config keys (file lines or --set KEY=VALUE):\n");
    for key in TrainConfig::KEYS {
        let _ = writeln!(
            out,
            "  {key:<20} [default: {}]",
            defaults.train.get(key).expect("known key")
        );
    }
    let _ = writeln!(out, "  {:<20} [default: none]", "source");
    let _ = writeln!(out, "  {:<20} [default: none]", "target");
    let _ = writeln!(out, "  {:<20} [default: true]", "target_labeled");
    let _ = writeln!(out, "  {:<20} [default: checkpoint.mdck]", "checkpoint");
    let _ = writeln!(out, "  {:<20} [default: history.csv]", "history");
    let _ = writeln!(
        out,
        "  {:<20} [default: {}]",
        "methods",
        METHOD_NAMES.join(",")
    );
    let _ = write!(
        out,
        "\n{SEED_ENV} overrides the file's seed; --set overrides both."
    );
    out
}

fn command() -> clap::Command {
    let keys = config_keys_help();
    Cli::command()
        .mut_subcommand("train", |c| c.after_help(keys.clone()))
        .mut_subcommand("benchmark", |c| c.after_help(keys.clone()))
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_CONFIG
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let rendered = e.render().to_string();
                    let line = rendered
                        .lines()
                        .next()
                        .unwrap_or("error: invalid arguments");
                    eprintln!("{line}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.to_string().lines().next().unwrap_or(""));
            return EXIT_CONFIG;
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            e.code
        }
    }
}

fn run(command: Command) -> CliResult {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Generate { generator } => cmd_generate(generator, &mut out),
        Command::Train(args) => cmd_train(args, &mut out),
        Command::Eval(args) => cmd_eval(args, &mut out),
        Command::Benchmark(args) => cmd_benchmark(args, &mut out),
        Command::Embed(args) => cmd_embed(args, &mut out),
    }
}

fn write_summary(out: &mut impl Write, what: &str, path: &Path, d: &Dataset) -> CliResult {
    writeln!(
        out,
        "wrote {what} {}: {} rows, {} features, {} classes",
        path.display(),
        d.len(),
        d.dim(),
        d.num_classes()
    )?;
    Ok(())
}

fn cmd_generate(generator: Generator, out: &mut impl Write) -> CliResult {
    match generator {
        Generator::TwoMoons {
            n,
            noise,
            rotation,
            seed,
            out: path,
        } => {
            if n < 2 {
                return Err(CliError::config(format!("--n must be >= 2, got {n}")));
            }
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(CliError::config(format!(
                    "--noise must be >= 0, got {noise}"
                )));
            }
            if !rotation.is_finite() {
                return Err(CliError::config("--rotation must be finite"));
            }
            let d = gen_two_moons(n, noise, rotation, seed)?;
            save_csv(&d, &path)?;
            write_summary(out, "dataset", &path, &d)
        }
        Generator::GaussianShift {
            n,
            dim,
            shift,
            cov_scale,
            classes,
            seed,
            out: path,
            target_out,
        } => {
            if dim == 0 {
                return Err(CliError::config("--dim must be >= 1"));
            }
            if classes == 0 {
                return Err(CliError::config("--classes must be >= 1"));
            }
            if n < classes {
                return Err(CliError::config(format!(
                    "--n must be >= --classes ({classes}), got {n}"
                )));
            }
            if !(cov_scale > 0.0 && cov_scale.is_finite()) {
                return Err(CliError::config(format!(
                    "--cov-scale must be > 0, got {cov_scale}"
                )));
            }
            let values: Vec<f64> = shift
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .ok()
                .filter(|v: &Vec<f64>| v.iter().all(|x| x.is_finite()))
                .ok_or_else(|| CliError::config(format!("--shift: cannot parse {shift:?}")))?;
            let shift = match values.len() {
                1 => vec![values[0]; dim],
                k if k == dim => values,
                k => {
                    return Err(CliError::config(format!(
                        "--shift has {k} values, expected 1 or --dim ({dim})"
                    )))
                }
            };
            let (s, t) = gen_gaussian_shift(n, dim, &shift, cov_scale, classes, seed)?;
            save_csv(&s, &path)?;
            save_csv(&t, &target_out)?;
            write_summary(out, "source", &path, &s)?;
            write_summary(out, "target", &target_out, &t)
        }
    }
}

fn env_seed() -> CliResult<Option<String>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(CliError::config(format!("{SEED_ENV} is not valid UTF-8")))
        }
    }
}

fn load_labeled(path: &Path, num_classes: usize) -> CliResult<Dataset> {
    let opts = CsvOptions {
        num_classes,
        labeled: true,
        header: false,
    };
    Ok(load_csv(path, &opts)?)
}

fn cmd_train(args: TrainArgs, out: &mut impl Write) -> CliResult {
    let cfg = RunConfig::assemble(args.config.as_deref(), env_seed()?.as_deref(), &args.set)?;
    let source_path = cfg
        .source
        .as_ref()
        .ok_or_else(|| CliError::config("no source dataset: set `source = path`"))?;
    let target_path = cfg
        .target
        .as_ref()
        .ok_or_else(|| CliError::config("no target dataset: set `target = path`"))?;
    let resume = args.resume.map(Checkpoint::load).transpose()?;
    if let Some(ck) = &resume {
        if ck.config.layers != cfg.train.layers {
            return Err(CliError::mismatch(format!(
                "checkpoint layers {:?} differ from config layers {:?}",
                ck.config.layers, cfg.train.layers
            )));
        }
    }

    let classes = cfg.train.num_classes();
    let source = load_labeled(source_path, classes)?;
    let target = load_csv(
        target_path,
        &CsvOptions {
            num_classes: classes,
            labeled: cfg.target_labeled,
            header: false,
        },
    )?;

    let mut trainer = match resume {
        Some(ck) => Trainer::resume(
            Checkpoint {
                config: cfg.train.clone(),
                ..ck
            },
            &source,
            target.unlabeled(),
        )?,
        None => Trainer::new(cfg.train.clone(), &source, target.unlabeled())?,
    };
    let remaining = trainer.total_steps().saturating_sub(trainer.step_count());
    let steps = args.max_steps.map_or(remaining, |m| m.min(remaining));
    let outcome = trainer.run_steps(steps);

    let mut history = String::from(LossReport::CSV_HEADER);
    history.push('\n');
    for r in trainer.history() {
        history.push_str(&r.csv_row());
        history.push('\n');
    }
    fs::write(&cfg.history, history)?;
    if let Err(e) = outcome {
        return Err(e.into());
    }
    trainer.checkpoint().save(&cfg.checkpoint)?;
    let last = trainer.history().last().map_or(f64::NAN, |r| r.total);
    writeln!(
        out,
        "trained {} steps (step {} of {}), final total loss {last}",
        trainer.history().len(),
        trainer.step_count(),
        trainer.total_steps()
    )?;
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &mut impl Write) -> CliResult {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let classes = ck.network.num_classes();
    if let Some(c) = args.classes {
        if c != classes {
            return Err(CliError::mismatch(format!(
                "dataset has {c} classes, checkpoint has {classes}"
            )));
        }
    }
    let data = load_csv(
        &args.data,
        &CsvOptions {
            num_classes: classes,
            labeled: true,
            header: args.header,
        },
    )?;
    let acc = accuracy(&ck.network, &data)?;
    writeln!(out, "{}", crate::evaluation::format_accuracy(acc))?;
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs, out: &mut impl Write) -> CliResult {
    if args.seeds == 0 {
        return Err(CliError::config("--seeds must be >= 1, got 0"));
    }
    if args.jobs == 0 {
        return Err(CliError::config("--jobs must be >= 1, got 0"));
    }
    let cfg = RunConfig::assemble(args.config.as_deref(), env_seed()?.as_deref(), &args.set)?;
    let tasks: Vec<TransferTask> = match args.suite.as_str() {
        "two-moons-sweep" => two_moons_sweep()?,
        "two-moons-30" => vec![two_moons_task(30.0, 500, 0.15, 0)?],
        other => {
            return Err(CliError::config(format!(
                "--suite: unknown suite {other:?} (expected two-moons-sweep or two-moons-30)"
            )))
        }
    };
    let methods: Vec<MethodConfig> = cfg
        .methods
        .iter()
        .map(|name| MethodConfig {
            name: name.clone(),
            config: method_config(name, &cfg.train).expect("validated method"),
        })
        .collect();
    let seeds: Vec<u64> = (1..=args.seeds as u64).collect();
    let table = run_benchmark(&tasks, &methods, &seeds, args.jobs)?;
    fs::write(&args.out, table.to_csv())?;
    writeln!(
        out,
        "wrote {} cells for {} tasks to {}",
        table.rows.len(),
        tasks.len(),
        args.out.display()
    )?;
    for (method, mean) in &table.means {
        writeln!(out, "{method:<10} mean accuracy {mean:.2}")?;
    }
    Ok(())
}

fn cmd_embed(args: EmbedArgs, out: &mut impl Write) -> CliResult {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let classes = ck.network.num_classes();
    let source = load_labeled(&args.source, classes)?;
    let target = load_csv(
        &args.target,
        &CsvOptions {
            num_classes: classes,
            labeled: !args.target_unlabeled,
            header: false,
        },
    )?;
    for d in [&source, &target] {
        if d.dim() != ck.network.input_dim() {
            return Err(CliError::mismatch(format!(
                "{} has {} features, checkpoint expects {}",
                d.domain_name(),
                d.dim(),
                ck.network.input_dim()
            )));
        }
    }
    export_embedding(&ck.network, &source, &target, &args.out)?;
    writeln!(
        out,
        "wrote embedding {}: {} rows",
        args.out.display(),
        source.len() + target.len()
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        fs::write(&file, "seed = 3\nsource = data/s.csv\nlr = 0.01\n").unwrap();
        let cfg = RunConfig::assemble(Some(&file), None, &[]).unwrap();
        assert_eq!(cfg.train.seed, 3);
        assert_eq!(
            cfg.source.as_deref(),
            Some(dir.path().join("data/s.csv").as_path())
        );

        let cfg = RunConfig::assemble(Some(&file), Some("9"), &[]).unwrap();
        assert_eq!(cfg.train.seed, 9);
        let cfg = RunConfig::assemble(Some(&file), Some("9"), &["seed=11".into()]).unwrap();
        assert_eq!(cfg.train.seed, 11);
        assert_eq!(cfg.train.lr, 0.01);
    }

    #[test]
    fn run_config_text_round_trip() {
        let mut cfg = RunConfig::default();
        let base = Path::new("/data");
        cfg.set("source", "s.csv", base).unwrap();
        cfg.set("methods", "joint,baseline", base).unwrap();
        cfg.set("lambda_entropy", "0", base).unwrap();
        let mut back = RunConfig::default();
        for (k, v) in parse_kv_lines(&cfg.to_kv_text()).unwrap() {
            back.set(&k, &v, Path::new("")).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn run_config_rejects_unknowns() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("lerning_rate", "1", Path::new("")).unwrap_err();
        assert!(err.to_string().contains("lerning_rate"));
        assert!(cfg.set("methods", "joint,dann", Path::new("")).is_err());
        assert!(RunConfig::assemble(None, Some("abc"), &[]).is_err());
        assert!(RunConfig::assemble(None, None, &["seed".into()]).is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::FileNotFound("x".into())), 3);
        assert_eq!(exit_code(&Error::NonFiniteLoss { step: 4 }), 4);
        assert_eq!(exit_code(&Error::ShapeMismatch("x".into())), 5);
    }

    #[test]
    fn help_lists_config_keys() {
        let help = command()
            .find_subcommand_mut("train")
            .unwrap()
            .render_long_help()
            .to_string();
        for key in TrainConfig::KEYS.iter().chain(RunConfig::RUN_KEYS.iter()) {
            assert!(help.contains(key), "{key} missing from help");
        }
        assert!(help.contains("[default: 0.001]"));
    }
}

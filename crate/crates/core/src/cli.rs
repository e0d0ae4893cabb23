//! `kesc` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
//! 3 output file exists without `--force`, 4 numerical divergence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::error::Error;
use crate::exec::Execution;
use crate::experiments::{self, csv, Cost, CostMode, Metrics, StaticMap};
use crate::lifting::{self, KoopmanModel};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OUTPUT_EXISTS: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "kesc",
    version,
    about = "Koopman-lifted relay extremum seeking on a forced Van der Pol oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate training trajectories and fit the Koopman model.
    Train(#[command(flatten)] CommonArgs),
    /// Sweep theta slowly and record the detector output.
    StaticMap(#[command(flatten)] ModeArgs),
    /// Run the closed loop and print its metrics.
    Run(#[command(flatten)] ModeArgs),
    /// Run both pipelines and write a side-by-side metric table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; defaults to a file in the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Raw)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Raw,
    Lifted,
}

impl From<ModeArg> for CostMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => CostMode::Raw,
            ModeArg::Lifted => CostMode::Lifted,
        }
    }
}

/// Failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            Error::Diverged { .. } | Error::RunDiverged { .. } => EXIT_DIVERGED,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(args: &CommonArgs) -> CliResult<Config> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_path(cfg: &Config, args: &CommonArgs, default_name: &str) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(default_name))
}

fn check_writable(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::new(
            EXIT_OUTPUT_EXISTS,
            format!(
                "{} already exists (use --force to overwrite)",
                path.display()
            ),
        ));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    fs::write(path, bytes)
        .map_err(|e| CliError::new(EXIT_FAILURE, format!("writing {}: {e}", path.display())))
}

fn load_model(path: &Path) -> CliResult<KoopmanModel> {
    let file = fs::File::open(path).map_err(|e| {
        CliError::new(
            EXIT_FAILURE,
            format!("opening model {}: {e}", path.display()),
        )
    })?;
    Ok(lifting::read_model(file)?)
}

fn model_for(mode: CostMode, path: Option<&Path>) -> CliResult<Option<KoopmanModel>> {
    match (mode, path) {
        (CostMode::Lifted, None) => Err(CliError::new(
            EXIT_CONFIG,
            "--mode lifted requires --model PATH",
        )),
        (CostMode::Lifted, Some(p)) => Ok(Some(load_model(p)?)),
        (CostMode::Raw, _) => Ok(None),
    }
}

/// Path of the mode table written next to a model file.
pub fn mode_table_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("modes.csv")
}

/// Eigenvalue, modulus, energy and selection flag per mode.
pub fn mode_table(model: &KoopmanModel) -> String {
    let mut s = String::from("mode,eig_re,eig_im,modulus,energy,selected\n");
    for (j, l) in model.eigenvalues.iter().enumerate() {
        let _ = writeln!(
            s,
            "{j},{},{},{},{},{}",
            csv::fmt_sig(l.re, 12),
            csv::fmt_sig(l.im, 12),
            csv::fmt_sig(l.norm(), 12),
            csv::fmt_sig(model.energies[j], 12),
            u8::from(model.is_selected(j)),
        );
    }
    s
}

/// Fits the model and writes it together with its mode table. Returns the
/// text printed on success.
pub fn cmd_train(args: &CommonArgs, exec: Execution) -> CliResult<String> {
    let cfg = load_config(args)?;
    let out = out_path(&cfg, args, "model.txt");
    let table_path = mode_table_path(&out);
    check_writable(&out, args.force)?;
    check_writable(&table_path, args.force)?;
    let model = experiments::train(
        &cfg.training(),
        &cfg.plant,
        &cfg.interference,
        cfg.n_modes,
        cfg.svd_cutoff,
        exec,
    )?;
    let mut buf = Vec::new();
    lifting::write_model(&model, &mut buf)?;
    let table = mode_table(&model);
    write_file(&out, &buf)?;
    write_file(&table_path, table.as_bytes())?;
    Ok(format!(
        "wrote {} and {}\n{table}",
        out.display(),
        table_path.display()
    ))
}

fn sweep(cfg: &Config, cost: Cost<'_>) -> CliResult<(StaticMap, f64, f64)> {
    let map = experiments::static_map(
        &cfg.plant,
        &cfg.interference,
        cost,
        &cfg.detector(),
        &cfg.sweep(),
    )?;
    let (theta_min, r_min) = map.smoothed_min(cfg.smoothing_window).ok_or_else(|| {
        CliError::new(
            EXIT_CONFIG,
            "static map is shorter than metrics.smoothing_window",
        )
    })?;
    Ok((map, theta_min, r_min))
}

pub fn cmd_static_map(args: &ModeArgs) -> CliResult<String> {
    let cfg = load_config(&args.common)?;
    let mode = CostMode::from(args.mode);
    let out = out_path(
        &cfg,
        &args.common,
        &format!("static_map_{}.csv", mode.name()),
    );
    check_writable(&out, args.common.force)?;
    let model = model_for(mode, args.model.as_deref())?;
    let cost = Cost::new(mode, model.as_ref())?;
    let (map, theta_min, r_min) = sweep(&cfg, cost)?;
    let convexity = experiments::convexity_score(&map.points, cfg.smoothing_window)?;
    let mut buf = Vec::new();
    csv::write_static_map(&map, &mut buf)?;
    write_file(&out, &buf)?;
    Ok(format!(
        "mode={}\nargmin_theta={}\nmin_r={}\nconvexity={}\n",
        mode.name(),
        csv::fmt_sig(theta_min, 12),
        csv::fmt_sig(r_min, 12),
        csv::fmt_sig(convexity, 12)
    ))
}

/// Runs one closed loop, then takes `r*` from a static map of the same
/// pipeline.
fn closed_loop(
    cfg: &Config,
    mode: CostMode,
    model: Option<&KoopmanModel>,
    out: &Path,
) -> CliResult<Metrics> {
    let cost = Cost::new(mode, model)?;
    let log = match experiments::run_closed_loop(
        &cfg.plant,
        &cfg.interference,
        cost,
        &cfg.relay(),
        &cfg.detector(),
        &cfg.run,
    ) {
        Ok(log) => log,
        Err(Error::RunDiverged { last, partial }) => {
            let partial_path = out.with_extension("partial.csv");
            let mut buf = Vec::new();
            csv::write_run_log(&partial, &mut buf)?;
            write_file(&partial_path, &buf)?;
            return Err(CliError::new(
                EXIT_DIVERGED,
                format!(
                    "{} run diverged at t={:.3}; partial log in {}",
                    mode.name(),
                    last.t,
                    partial_path.display()
                ),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let mut buf = Vec::new();
    csv::write_run_log(&log, &mut buf)?;
    write_file(out, &buf)?;
    let (_, _, r_star) = sweep(cfg, cost)?;
    Ok(experiments::compute_metrics(&log, &cfg.metrics(r_star))?)
}

pub fn cmd_run(args: &ModeArgs) -> CliResult<String> {
    let cfg = load_config(&args.common)?;
    let mode = CostMode::from(args.mode);
    let out = out_path(&cfg, &args.common, &format!("run_{}.csv", mode.name()));
    check_writable(&out, args.common.force)?;
    let model = model_for(mode, args.model.as_deref())?;
    let m = closed_loop(&cfg, mode, model.as_ref(), &out)?;
    Ok(format!(
        "{}{}\n{}\n",
        csv::metrics_block(&m),
        csv::METRICS_HEADER,
        csv::metrics_row(mode.name(), &m)
    ))
}

fn ratio_cell(raw: f64, lifted: f64) -> String {
    csv::fmt_sig(raw / lifted, 12)
}

/// Raw and lifted metrics plus a `raw/lifted` ratio row. A hitting time that
/// was never reached is bounded by the run duration, and its ratio cell is
/// written as a lower bound (`>=`).
pub fn compare_table(raw: &Metrics, lifted: &Metrics, duration: f64) -> String {
    let t_ratio = match (raw.t_hit, lifted.t_hit) {
        (Some(r), Some(l)) => ratio_cell(r, l),
        (None, Some(l)) => format!(">={}", ratio_cell(duration, l)),
        (_, None) => "undefined".to_string(),
    };
    format!(
        "{}\n{}\n{}\nratio,{},{},{},{}\n",
        csv::METRICS_HEADER,
        csv::metrics_row("raw", raw),
        csv::metrics_row("lifted", lifted),
        ratio_cell(raw.iae, lifted.iae),
        ratio_cell(raw.ise, lifted.ise),
        t_ratio,
        ratio_cell(raw.e_ss, lifted.e_ss),
    )
}

pub fn cmd_compare(args: &CommonArgs, model_path: &Path) -> CliResult<String> {
    let cfg = load_config(args)?;
    let out = out_path(&cfg, args, "compare.csv");
    let raw_log = out.with_extension("raw.csv");
    let lifted_log = out.with_extension("lifted.csv");
    for p in [&out, &raw_log, &lifted_log] {
        check_writable(p, args.force)?;
    }
    let model = load_model(model_path)?;
    let raw = closed_loop(&cfg, CostMode::Raw, None, &raw_log)?;
    let lifted = closed_loop(&cfg, CostMode::Lifted, Some(&model), &lifted_log)?;
    let table = compare_table(&raw, &lifted, cfg.run.duration);
    write_file(&out, table.as_bytes())?;
    Ok(table)
}

pub fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Train(args) => cmd_train(args, Execution::default()),
        Command::StaticMap(args) => cmd_static_map(args),
        Command::Run(args) => cmd_run(args),
        Command::Compare { common, model } => cmd_compare(common, model),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("kesc: {e}");
            e.code
        }
    }
}

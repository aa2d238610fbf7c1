//! `polyfit` subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use polyfit_core::bench::all_traces;
use polyfit_core::data::{split_protocol, synth_generate, TrainModes};
use polyfit_core::kinematics::MaterialFrame;
use polyfit_core::training::{self, restart_config, FitResult, TrainingConfig};
use rayon::prelude::*;

use crate::bench::{self, BenchPlan};
use crate::config::{
    BenchFlags, BenchSettings, ConfigFile, DerivativeFlags, DerivativeSettings, FitFlags, FitSettings, GenFlags, GenSettings,
    TrainingFlags,
};
use crate::error::{Error, Result};
use crate::{dataset_io, fit_io, model_io, OutputDir};

pub const DATA_FILE: &str = "data.csv";
pub const MODEL_FILE: &str = "model.json";
pub const FIT_FILE: &str = "fit_result.json";
pub const HISTORY_FILE: &str = "loss_history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Parser)]
#[command(name = "polyfit", version, about = "Fit polyconvex hyperelastic energy models to stress-stretch data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a closed-form material under standard loading modes.
    GenData(GenArgs),
    /// Train one model family on a data set.
    Fit(FitArgs),
    /// Train/evaluate grid, derivative traces and efficiency sweep.
    Bench(BenchArgs),
    /// Second-derivative traces of a saved model.
    Derivatives(DerivativeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// TOML file with defaults for any flag (keys are the long flag names).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// neo-hookean, mooney-rivlin or fiber.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    /// Comma-separated loading modes (UT, PS, ET, SX, SY, EB).
    #[arg(long)]
    pub modes: Option<String>,
    /// Largest stretch of the grid.
    #[arg(long)]
    pub stretch_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Standard deviation of additive Gaussian stress noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub ansatz: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping threshold on best-loss progress over `--window` epochs.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    /// analytic or finite-difference.
    #[arg(long)]
    pub grad_mode: Option<String>,
    /// RK4 steps of the NODE flow.
    #[arg(long)]
    pub ode_steps: Option<usize>,
    /// Hidden widths of ICNN/NODE terms, e.g. 4,4.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
}

impl TrainArgs {
    fn flags(&self) -> TrainingFlags {
        TrainingFlags {
            restarts: self.restarts,
            seed: self.seed,
            lr: self.lr,
            epochs: self.epochs,
            tolerance: self.tolerance,
            window: self.window,
            grad_mode: self.grad_mode.clone(),
            ode_steps: self.ode_steps,
            widths: self.widths.clone(),
            ansatz: self.ansatz.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data set CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// cann, icnn or node.
    #[arg(long)]
    pub family: Option<String>,
    /// `all` or comma-separated modes to train on; the rest are validation.
    #[arg(long)]
    pub train_modes: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `all` or comma-separated families.
    #[arg(long)]
    pub family: Option<String>,
    /// Grid rows: comma-separated modes and/or `all` (default: every mode, then all).
    #[arg(long)]
    pub train_modes: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Restarts per efficiency ladder step.
    #[arg(long)]
    pub sweep_restarts: Option<usize>,
    /// Skip the efficiency sweep.
    #[arg(long)]
    pub no_sweep: bool,
    /// Trace grid points per invariant.
    #[arg(long)]
    pub points: Option<usize>,
    /// Upper end of the trace grid in normalized units.
    #[arg(long)]
    pub upper: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DerivativeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Saved model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Upper end of the trace grid in normalized units.
    #[arg(long)]
    pub upper: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    path.as_deref().map_or(Ok(ConfigFile::default()), ConfigFile::load)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::GenData(a) => {
            let file = load_config(&a.config)?;
            let flags = GenFlags {
                oracle: a.oracle.clone(),
                c1: a.c1,
                c2: a.c2,
                k1: a.k1,
                k2: a.k2,
                modes: a.modes.clone(),
                stretch_max: a.stretch_max,
                points: a.points,
                noise: a.noise,
                seed: a.seed,
                out: a.out.clone(),
            };
            cmd_gen_data(&flags.resolve(&file)?, a.config.as_deref())
        }
        Command::Fit(a) => {
            let file = load_config(&a.config)?;
            let flags = FitFlags {
                data: a.data.clone(),
                family: a.family.clone(),
                train_modes: a.train_modes.clone(),
                training: a.train.flags(),
                out: a.out.clone(),
            };
            cmd_fit(&flags.resolve(&file)?, a.config.as_deref())
        }
        Command::Bench(a) => {
            let file = load_config(&a.config)?;
            let flags = BenchFlags {
                data: a.data.clone(),
                family: a.family.clone(),
                train_modes: a.train_modes.clone(),
                training: a.train.flags(),
                sweep_restarts: a.sweep_restarts,
                no_sweep: a.no_sweep,
                points: a.points,
                upper: a.upper,
                out: a.out.clone(),
            };
            cmd_bench(flags.resolve(&file)?, a.config.as_deref())
        }
        Command::Derivatives(a) => {
            let file = load_config(&a.config)?;
            let flags = DerivativeFlags { model: a.model.clone(), points: a.points, upper: a.upper, out: a.out.clone() };
            cmd_derivatives(&flags.resolve(&file)?, a.config.as_deref())
        }
    }
}

pub fn cmd_gen_data(s: &GenSettings, config: Option<&Path>) -> Result<()> {
    let ds = synth_generate(&s.oracle, &s.modes, &s.grid, s.noise, s.seed, MaterialFrame::default())?;
    let mut out = OutputDir::create(&s.out)?;
    let csv = out.path(DATA_FILE)?;
    out.path(&dataset_io::sidecar_path(Path::new(DATA_FILE)).to_string_lossy())?;
    dataset_io::save_csv(&ds, &csv)?;
    out.finish("gen-data", config, s)?;
    println!("wrote {} samples to {}", ds.num_samples(), csv.display());
    Ok(())
}

/// Trains `restarts` models in parallel and keeps the lowest final loss
/// (earliest restart on ties).
pub fn fit_best(s: &FitSettings, pool: &rayon::ThreadPool) -> Result<(FitResult, Vec<FitResult>, std::time::Duration)> {
    let ds = dataset_io::load_csv(&s.data)?;
    let (train_set, validation) = split_protocol(&ds, &s.train_modes)?;
    let (fits, wall) = fit_io::timed(|| {
        pool.install(|| {
            (0..s.training.restarts)
                .into_par_iter()
                .map(|k| training::train(&s.spec, &train_set, &validation, &restart_config(&s.training, k)))
                .collect::<Vec<_>>()
        })
    });
    let fits = fits.into_iter().collect::<polyfit_core::Result<Vec<_>>>()?;
    let best = fits
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_loss.total_cmp(&b.1.final_loss).then(a.0.cmp(&b.0)))
        .map(|(_, f)| f.clone())
        .ok_or_else(|| Error::Usage("no restarts requested".into()))?;
    Ok((best, fits, wall))
}

pub fn cmd_fit(s: &FitSettings, config: Option<&Path>) -> Result<()> {
    let pool = bench::thread_pool()?;
    let (best, all, wall) = fit_best(s, &pool)?;
    let mut out = OutputDir::create(&s.out)?;
    let p = out.path(MODEL_FILE)?;
    model_io::save_model(&best.bank, &p)?;
    let p = out.path(FIT_FILE)?;
    fit_io::save_fit(&best, wall, &p)?;
    out.write_text(HISTORY_FILE, &fit_io::loss_history_csv(&best.loss_history))?;
    out.write_text(METRICS_FILE, &fit_io::metrics_csv(&best)?)?;
    if all.len() > 1 {
        let mut t = String::from("seed,final_loss,epochs\n");
        for f in &all {
            t.push_str(&format!("{},{},{}\n", f.seed, f.final_loss, f.epochs));
        }
        out.write_text("restarts.csv", &t)?;
    }
    out.finish("fit", config, s)?;
    println!("{} fit: loss {:.3e} after {} epochs (seed {})", s.spec.family.name(), best.final_loss, best.epochs, best.seed);
    let validation: &[_] = if s.train_modes == TrainModes::All { &[] } else { &best.validation_metrics };
    for (split, metrics) in [("train", &best.train_metrics[..]), ("validation", validation)] {
        for m in metrics {
            match m.r2 {
                Some(r2) => println!("  {split} {}: R2 {r2:.5}", m.mode.name()),
                None => println!("  {split} {}: {}", m.mode.name(), m.note.as_deref().unwrap_or("undefined")),
            }
        }
    }
    Ok(())
}

pub fn cmd_bench(mut s: BenchSettings, config: Option<&Path>) -> Result<()> {
    let ds = dataset_io::load_csv(&s.data)?;
    if !s.restarts_given {
        s.training.restarts =
            if ds.is_anisotropic() { TrainingConfig::SKIN_RESTARTS } else { TrainingConfig::RUBBER_RESTARTS };
    }
    let rows = s.rows.clone().unwrap_or_else(|| BenchPlan::default_rows(&ds));
    s.rows = Some(rows.clone());
    let plan = BenchPlan {
        specs: s.specs.clone(),
        rows,
        training: s.training.clone(),
        sweep_restarts: s.sweep_restarts,
        trace_points: s.trace_points,
        trace_upper: s.trace_upper,
    };
    let pool = bench::thread_pool()?;
    let outcome = bench::run_bench(&plan, &ds, &pool)?;
    let report = &outcome.report;
    let mut out = OutputDir::create(&s.out)?;
    out.write_json(REPORT_FILE, report)?;
    out.write_text("r2_table.csv", &bench::r2_csv(report))?;
    out.write_text("mae_table.csv", &bench::mae_csv(report))?;
    if !report.efficiency.is_empty() {
        out.write_text("efficiency.csv", &bench::efficiency_csv(&report.efficiency))?;
    }
    for set in &report.traces {
        for t in &set.traces {
            let rel = format!("traces/{}_{}.csv", set.family.name(), t.invariant.name().to_ascii_lowercase());
            out.write_text(&rel, &bench::trace_csv(t))?;
        }
    }
    out.write_json(TIMINGS_FILE, &outcome.timings)?;
    out.finish("bench", config, &s)?;
    for &family in &report.families {
        println!("{} mean R2 (rows: train, columns: {})", family.name(), report.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(" "));
        for (row, vals) in report.rows.iter().zip(report.r2_table(family)) {
            let cells: Vec<String> = vals.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.4}"))).collect();
            println!("  {row:>6}: {}", cells.join(" "));
        }
    }
    match outcome.error {
        Some(e) => {
            eprintln!("bench finished with {} failures; report is marked partial", report.failures.len());
            Err(e)
        }
        None => Ok(()),
    }
}

pub fn cmd_derivatives(s: &DerivativeSettings, config: Option<&Path>) -> Result<()> {
    let bank = model_io::load_model(&s.model)?;
    let traces = all_traces(&bank, s.upper, s.points)?;
    let mut out = OutputDir::create(&s.out)?;
    for t in &traces {
        out.write_text(&format!("traces/{}.csv", t.invariant.name().to_ascii_lowercase()), &bench::trace_csv(t))?;
    }
    out.write_json("traces.json", &traces)?;
    out.finish("derivatives", config, s)?;
    for t in &traces {
        println!("{}: min first {:.3e}, min second {:.3e}", t.invariant.name(), t.min_first(), t.min_second());
    }
    Ok(())
}

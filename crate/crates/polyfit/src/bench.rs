//! Benchmark orchestration: the train/eval grid over restarts and families,
//! derivative traces of the best simultaneous fit, and the efficiency sweep.

use std::env;
use std::fmt::Write as _;
use std::time::Duration;

use polyfit_core::bench::{all_traces, DerivativeTrace};
use polyfit_core::data::{split_protocol, Dataset, Mode, TrainModes};
use polyfit_core::potential::{Ansatz, Family, FamilySpec};
use polyfit_core::training::{self, median, restart_config, sample_std, FitResult, TrainingConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit_io::timed;

pub const THREADS_ENV: &str = "POLYFIT_THREADS";

/// Upper end of trace grids in normalized units: the fitted constants map
/// the training range onto `[0, 3]`, so this spans it ×1.5.
pub const DEFAULT_TRACE_UPPER: f64 = 4.5;

pub const REPORT_FORMAT: &str = "polyfit-bench";
pub const REPORT_VERSION: u32 = 1;

/// Thread cap from `POLYFIT_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Usage(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Worker pool honoring the thread cap.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let n = thread_cap()?.map_or(available, |cap| cap.min(available));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {n} worker threads: {e}")))
}

/// One step of an efficiency ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSize {
    Ansatz(Ansatz),
    Widths(Vec<usize>),
}

impl ModelSize {
    pub fn label(&self) -> String {
        match self {
            ModelSize::Ansatz(a) => a.name().to_string(),
            ModelSize::Widths(w) => w.iter().map(ToString::to_string).collect::<Vec<_>>().join("x"),
        }
    }

    pub fn apply(&self, base: &FamilySpec) -> FamilySpec {
        match self {
            ModelSize::Ansatz(a) => FamilySpec { ansatz: *a, ..base.clone() },
            ModelSize::Widths(w) => base.clone().with_widths(w),
        }
    }
}

/// Default ladder: the two ansatz for CANN, hidden widths for the networks.
pub fn default_ladder(family: Family) -> Vec<ModelSize> {
    match family {
        Family::Cann => vec![ModelSize::Ansatz(Ansatz::Reduced), ModelSize::Ansatz(Ansatz::Full)],
        Family::Icnn => [vec![1], vec![2], vec![4], vec![4, 4]].into_iter().map(ModelSize::Widths).collect(),
        Family::Node => [vec![2], vec![3], vec![5], vec![5, 5]].into_iter().map(ModelSize::Widths).collect(),
    }
}

/// Statistics of one (family, training rows, evaluation curve) cell over restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub family: Family,
    pub train: String,
    pub eval: Mode,
    /// The evaluation curve was part of the training data.
    pub in_training: bool,
    /// Restarts with a defined R².
    pub count: usize,
    pub r2_mean: Option<f64>,
    pub r2_std: Option<f64>,
    pub r2_median: Option<f64>,
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub mae_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub family: Family,
    pub train: String,
    pub seed: u64,
    pub traces: Vec<DerivativeTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub family: Family,
    pub size: ModelSize,
    pub param_count: usize,
    pub restarts: usize,
    /// Per restart, the mean over curves of the training MAE.
    pub mae: Vec<f64>,
    pub median_mae: Option<f64>,
}

/// Wall time kept apart from the report so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format: String,
    pub version: u32,
    pub dataset_fingerprint: u64,
    pub modes: Vec<Mode>,
    pub families: Vec<Family>,
    pub rows: Vec<String>,
    pub training: TrainingConfig,
    pub cells: Vec<GridCell>,
    pub traces: Vec<TraceSet>,
    pub efficiency: Vec<EfficiencyRow>,
    /// Set when any fit failed; `failures` says which.
    pub partial: bool,
    pub failures: Vec<String>,
}

impl BenchReport {
    pub fn cell(&self, family: Family, train: &str, eval: Mode) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.family == family && c.train == train && c.eval == eval)
    }

    /// Mean R² as a `rows × modes` table for one family.
    pub fn r2_table(&self, family: Family) -> Vec<Vec<Option<f64>>> {
        self.rows
            .iter()
            .map(|r| self.modes.iter().map(|&m| self.cell(family, r, m).and_then(|c| c.r2_mean)).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub specs: Vec<FamilySpec>,
    pub rows: Vec<TrainModes>,
    pub training: TrainingConfig,
    pub sweep_restarts: Option<usize>,
    pub trace_points: usize,
    pub trace_upper: f64,
}

impl BenchPlan {
    /// Each curve alone, then all curves together.
    pub fn default_rows(dataset: &Dataset) -> Vec<TrainModes> {
        dataset.modes().into_iter().map(|m| TrainModes::Modes(vec![m])).chain([TrainModes::All]).collect()
    }
}

/// Report plus wall times. `error` holds the first failure, if any.
pub struct BenchOutcome {
    pub report: BenchReport,
    pub timings: Vec<Timing>,
    pub error: Option<Error>,
}

struct Outcome {
    fit: std::result::Result<FitResult, polyfit_core::Error>,
    wall: Duration,
}

fn run_fit(spec: &FamilySpec, train: &Dataset, val: &Dataset, config: &TrainingConfig) -> Outcome {
    let (fit, wall) = timed(|| training::train(spec, train, val, config));
    Outcome { fit, wall }
}

fn stats(values: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    (training::mean(values), sample_std(values), median(values))
}

/// Mean over curves of the training MAE, if every curve has one.
pub fn fit_mae(fit: &FitResult) -> Option<f64> {
    let v: Option<Vec<f64>> = fit.train_metrics.iter().map(|m| m.mae).collect();
    v.and_then(|v| training::mean(&v))
}

/// Trains every size `restarts` times on the whole data set.
pub fn efficiency_sweep(
    base: &FamilySpec,
    ladder: &[ModelSize],
    dataset: &Dataset,
    config: &TrainingConfig,
    restarts: usize,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<EfficiencyRow>, Vec<Timing>, Vec<String>)> {
    if ladder.is_empty() || restarts == 0 {
        return Err(Error::Usage("efficiency sweep needs a non-empty ladder and at least one restart".into()));
    }
    let aniso = dataset.is_anisotropic();
    let tasks: Vec<(usize, usize)> = (0..ladder.len()).flat_map(|s| (0..restarts).map(move |k| (s, k))).collect();
    let specs: Vec<FamilySpec> = ladder.iter().map(|s| s.apply(base)).collect();
    let outcomes: Vec<Outcome> = pool.install(|| {
        tasks.par_iter().map(|&(s, k)| run_fit(&specs[s], dataset, dataset, &restart_config(config, k))).collect()
    });
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for (s, size) in ladder.iter().enumerate() {
        let mut mae = Vec::new();
        let mut wall = Duration::ZERO;
        for (&(_, k), o) in tasks.iter().zip(&outcomes).filter(|((t, _), _)| *t == s) {
            wall += o.wall;
            match &o.fit {
                Ok(f) => mae.extend(fit_mae(f)),
                Err(e) => failures.push(format!(
                    "efficiency {} {} seed {}: {e}",
                    base.family.name(),
                    size.label(),
                    training::restart_seed(config, k)
                )),
            }
        }
        rows.push(EfficiencyRow {
            family: base.family,
            param_count: specs[s].count_params(aniso),
            restarts,
            median_mae: median(&mae),
            mae,
            size: size.clone(),
        });
        timings.push(Timing { label: format!("efficiency/{}/{}", base.family.name(), size.label()), wall_time_s: wall.as_secs_f64() });
    }
    Ok((rows, timings, failures))
}

/// Runs the whole benchmark on `pool`.
pub fn run_bench(plan: &BenchPlan, dataset: &Dataset, pool: &rayon::ThreadPool) -> Result<BenchOutcome> {
    plan.training.validate()?;
    dataset.validate()?;
    if plan.specs.is_empty() || plan.rows.is_empty() {
        return Err(Error::Usage("bench needs at least one family and one training row".into()));
    }
    let modes = dataset.modes();
    let splits = plan.rows.iter().map(|r| split_protocol(dataset, r)).collect::<polyfit_core::Result<Vec<_>>>()?;
    let restarts = plan.training.restarts;
    let mut tasks = Vec::new();
    for f in 0..plan.specs.len() {
        for r in 0..plan.rows.len() {
            for k in 0..restarts {
                tasks.push((f, r, k));
            }
        }
    }
    let outcomes: Vec<Outcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(f, r, k)| {
                let (t, v) = &splits[r];
                run_fit(&plan.specs[f], t, v, &restart_config(&plan.training, k))
            })
            .collect()
    });

    let mut cells = Vec::new();
    let mut traces = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    let mut first_error: Option<Error> = None;
    for (f, spec) in plan.specs.iter().enumerate() {
        for (r, row) in plan.rows.iter().enumerate() {
            let label = row.label();
            let group: Vec<(&(usize, usize, usize), &Outcome)> =
                tasks.iter().zip(&outcomes).filter(|((tf, tr, _), _)| *tf == f && *tr == r).collect();
            let wall: Duration = group.iter().map(|(_, o)| o.wall).sum();
            timings.push(Timing { label: format!("grid/{}/{label}", spec.family.name()), wall_time_s: wall.as_secs_f64() });
            let fits: Vec<&FitResult> = group.iter().filter_map(|(_, o)| o.fit.as_ref().ok()).collect();
            for ((_, _, k), o) in &group {
                if let Err(e) = &o.fit {
                    failures.push(format!(
                        "{} trained on {label}, seed {}: {e}",
                        spec.family.name(),
                        training::restart_seed(&plan.training, *k)
                    ));
                    first_error.get_or_insert_with(|| e.clone().into());
                }
            }
            for &m in &modes {
                let metric = |g: fn(&polyfit_core::bench::CurveMetrics) -> Option<f64>| -> Vec<f64> {
                    fits.iter().filter_map(|fit| fit.metrics(m).and_then(g)).collect()
                };
                let r2 = metric(|c| c.r2);
                let mae = metric(|c| c.mae);
                let (r2_mean, r2_std, r2_median) = stats(&r2);
                let (mae_mean, mae_std, mae_median) = stats(&mae);
                cells.push(GridCell {
                    family: spec.family,
                    train: label.clone(),
                    eval: m,
                    in_training: match row {
                        TrainModes::All => true,
                        TrainModes::Modes(ms) => ms.contains(&m),
                    },
                    count: r2.len(),
                    r2_mean,
                    r2_std,
                    r2_median,
                    mae_mean,
                    mae_std,
                    mae_median,
                });
            }
        }
        // Traces from the lowest-loss fit of the `all` row, else of any row.
        let row = plan.rows.iter().position(|r| *r == TrainModes::All);
        let best = tasks
            .iter()
            .zip(&outcomes)
            .filter(|((tf, tr, _), _)| *tf == f && row.is_none_or(|r| *tr == r))
            .filter_map(|((_, tr, _), o)| o.fit.as_ref().ok().map(|fit| (*tr, fit)))
            .min_by(|a, b| a.1.final_loss.total_cmp(&b.1.final_loss));
        if let Some((tr, fit)) = best {
            match all_traces(&fit.bank, plan.trace_upper, plan.trace_points) {
                Ok(t) => traces.push(TraceSet { family: spec.family, train: plan.rows[tr].label(), seed: fit.seed, traces: t }),
                Err(e) => {
                    failures.push(format!("{} traces: {e}", spec.family.name()));
                    first_error.get_or_insert_with(|| e.into());
                }
            }
        }
    }

    let mut efficiency = Vec::new();
    if let Some(n) = plan.sweep_restarts {
        for spec in &plan.specs {
            let (rows, t, fails) = efficiency_sweep(spec, &default_ladder(spec.family), dataset, &plan.training, n, pool)?;
            efficiency.extend(rows);
            timings.extend(t);
            if !fails.is_empty() {
                first_error.get_or_insert_with(|| Error::Numerical(fails[0].clone()));
            }
            failures.extend(fails);
        }
    }

    let report = BenchReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        dataset_fingerprint: dataset.fingerprint(),
        families: plan.specs.iter().map(|s| s.family).collect(),
        rows: plan.rows.iter().map(TrainModes::label).collect(),
        modes,
        training: plan.training.clone(),
        cells,
        traces,
        efficiency,
        partial: !failures.is_empty(),
        failures,
    };
    Ok(BenchOutcome { report, timings, error: first_error })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn r2_csv(report: &BenchReport) -> String {
    let mut s = String::from("family,train,eval,in_training,count,r2_mean,r2_std,r2_median\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.family.name(),
            c.train,
            c.eval.name(),
            c.in_training,
            c.count,
            opt(c.r2_mean),
            opt(c.r2_std),
            opt(c.r2_median)
        );
    }
    s
}

pub fn mae_csv(report: &BenchReport) -> String {
    let mut s = String::from("family,train,eval,in_training,count,mae_mean,mae_std,mae_median\n");
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.family.name(),
            c.train,
            c.eval.name(),
            c.in_training,
            c.count,
            opt(c.mae_mean),
            opt(c.mae_std),
            opt(c.mae_median)
        );
    }
    s
}

pub fn efficiency_csv(rows: &[EfficiencyRow]) -> String {
    let mut s = String::from("family,size,param_count,restarts,median_mae\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.family.name(), r.size.label(), r.param_count, r.restarts, opt(r.median_mae));
    }
    s
}

/// `hat,raw,first,second` per grid point.
pub fn trace_csv(trace: &DerivativeTrace) -> String {
    let mut s = String::from("hat,raw,first,second\n");
    for k in 0..trace.hat.len() {
        let _ = writeln!(s, "{},{},{},{}", trace.hat[k], trace.raw[k], trace.first[k], trace.second[k]);
    }
    s
}

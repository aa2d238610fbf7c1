//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and exits
//! non-zero on any failure other than the documented NODE shortfalls.

use std::env;
use std::f64::consts::E;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use polyfit::bench::{efficiency_sweep, run_bench, BenchPlan, ModelSize};
use polyfit::dataset_io;
use polyfit_core::bench::{all_traces, linspace};
use polyfit_core::cann::{CannTermParams, WeightPair};
use polyfit_core::data::{synth_generate, Dataset, Mode, Oracle, StretchGrid, TrainModes};
use polyfit_core::icnn::IcnnParams;
use polyfit_core::kinematics::{invariants_from_deformation, DeformationState, MaterialFrame, NormalizationConstants};
use polyfit_core::loading::{stress, stress_biaxial, stress_equibiaxial, LoadingMode};
use polyfit_core::node::{node_first_derivative, IntegratorConfig, NodeParams};
use polyfit_core::potential::{Ansatz, ConvexScalar, ConvexTermBank, Family, FamilySpec, TermBackend};
use polyfit_core::tensor::Mat3;
use polyfit_core::training::{self, multi_restart, FitResult, TrainingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frame() -> MaterialFrame {
    MaterialFrame::default()
}

fn rubber() -> Dataset {
    synth_generate(&Oracle::MooneyRivlin { c1: 0.3, c2: 0.1 }, &Mode::RUBBER, &StretchGrid::RUBBER, 0.0, 0, frame()).unwrap()
}

fn skin() -> Dataset {
    synth_generate(&Oracle::FiberReinforced { c1: 0.5, k1: 1.0, k2: 2.0 }, &Mode::SKIN, &StretchGrid::SKIN, 0.0, 0, frame()).unwrap()
}

fn config(lr: f64, epochs: usize, restarts: usize, seed: u64) -> TrainingConfig {
    TrainingConfig { learning_rate: lr, max_epochs: epochs, restarts, seed, ..TrainingConfig::default() }
}

/// Epoch budgets per family; NODE epochs are expensive.
fn rubber_config(family: Family, restarts: usize, seed: u64) -> TrainingConfig {
    match family {
        Family::Cann | Family::Icnn => config(1e-2, 5000, restarts, seed),
        Family::Node => config(1e-2, 2000, restarts, seed),
    }
}

fn skin_config(family: Family, restarts: usize, seed: u64) -> TrainingConfig {
    match family {
        Family::Cann => config(1e-2, 3000, restarts, seed),
        Family::Icnn => config(1e-2, 30_000, restarts, seed),
        Family::Node => config(1e-2, 3000, restarts, seed),
    }
}

struct Outcome {
    passed: bool,
    /// Failed only in parts recorded as NODE shortfalls.
    known_gap: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, known_gap: false, detail }
    }
}

/// Combines per-family results. With `node_gap`, a failure of NODE alone
/// counts as a documented shortfall.
fn by_family(parts: Vec<(Family, bool, String)>, node_gap: bool) -> Outcome {
    let passed = parts.iter().all(|p| p.1);
    let known_gap = node_gap && !passed && parts.iter().all(|p| p.1 || p.0 == Family::Node);
    let detail = parts.iter().map(|p| format!("{} {}", p.0.name(), p.2)).collect::<Vec<_>>().join("; ");
    Outcome { passed, known_gap, detail }
}

fn random_rotation<R: Rng>(r: &mut R) -> Mat3 {
    let axis: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.1..1.0)];
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = r.random_range(-3.1..3.1f64).sin_cos();
    let t = 1.0 - c;
    Mat3([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

fn random_gradient<R: Rng>(r: &mut R) -> Mat3 {
    loop {
        let mut f = Mat3::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] += r.random_range(-0.5..0.5);
            }
        }
        if f.det() > 0.1 {
            return f;
        }
    }
}

fn objectivity() -> Outcome {
    let mut r = rng(1);
    let frame = MaterialFrame::new([0.6, 0.8, 0.0], [0.0, 0.0, 1.0]).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f = random_gradient(&mut r);
        let q = random_rotation(&mut r);
        let a = invariants_from_deformation(&DeformationState::from_gradient(f).unwrap(), &frame);
        let b = invariants_from_deformation(&DeformationState::from_gradient(q * f).unwrap(), &frame);
        for (x, y) in [(a.i1, b.i1), (a.i2, b.i2), (a.i3, b.i3), (a.i4a, b.i4a), (a.i4s, b.i4s)] {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    Outcome::new(worst <= 1e-12, format!("1000 pairs, max relative deviation {worst:.1e}"))
}

/// Smallest first and second derivative over all traces of a bank.
fn trace_minima(bank: &ConvexTermBank) -> (f64, f64) {
    all_traces(bank, polyfit::bench::DEFAULT_TRACE_UPPER, 200)
        .unwrap()
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), t| (a.min(t.min_first()), b.min(t.min_second())))
}

fn polyconvexity() -> Outcome {
    let data = skin();
    let constants = training::fit_constants(&data).unwrap();
    let mut parts = Vec::new();
    for family in Family::ALL {
        let spec = FamilySpec::new(family, Ansatz::Full);
        let mut r = rng(2);
        let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..20 {
            let (a, b) = trace_minima(&spec.build(constants, true, &mut r).unwrap());
            d1 = d1.min(a);
            d2 = d2.min(b);
        }
        let epochs = if family == Family::Node { 200 } else { 500 };
        let fits = multi_restart(&spec, &data, &data, &config(1e-2, epochs, 5, 2)).unwrap();
        for f in &fits.results {
            let (a, b) = trace_minima(&f.bank);
            d1 = d1.min(a);
            d2 = d2.min(b);
        }
        parts.push((family, d1 >= -1e-8 && d2 >= -1e-8, format!("min psi' {d1:.2e}, min psi'' {d2:.2e}")));
    }
    by_family(parts, false)
}

fn random_cann<R: Rng>(r: &mut R) -> CannTermParams {
    let mut p = CannTermParams::default();
    for row in p.pairs.iter_mut() {
        for pair in row.iter_mut() {
            if r.random_bool(0.5) {
                *pair = WeightPair { w: r.random_range(0.0..1.0), g: r.random_range(0.0..0.6) };
            }
        }
    }
    p
}

fn derivative_consistency() -> Outcome {
    let central = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
    let mut r = rng(3);
    let mut parts = Vec::new();
    for family in Family::ALL {
        let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
        for _ in 0..100 {
            let b = match family {
                Family::Cann => TermBackend::Cann(random_cann(&mut r)),
                Family::Icnn => TermBackend::Icnn(IcnnParams::random(&[4, 4], &mut r).unwrap()),
                Family::Node => TermBackend::Node(NodeParams::random(&[5, 5], IntegratorConfig::default(), &mut r).unwrap()),
            };
            let x = r.random_range(0.05..2.5);
            e1 = e1.max(rel(b.first_derivative(x), central(&|t| b.value(t), x, 1e-4)));
            e2 = e2.max(rel(b.second_derivative(x), central(&|t| b.first_derivative(t), x, 1e-4)));
        }
        parts.push((family, e1 <= 1e-5 && e2 <= 1e-4, format!("max rel err first {e1:.1e}, second {e2:.1e}")));
    }
    by_family(parts, false)
}

/// `P = F (2 Σ ψ_k ∂I_k/∂C − p C⁻¹)` with `S_zz = 0`, from the tensors directly.
fn tensor_stress(d: [f64; 4], stretches: [f64; 3], frame: &MaterialFrame) -> Mat3 {
    let f = Mat3::diag(stretches);
    let c = f.transpose() * f;
    let i1 = c.trace();
    let (a, s) = (frame.a0(), frame.s0());
    let mut s_iso = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            s_iso[(i, j)] =
                2.0 * (d[0] * delta + d[1] * (i1 * delta - c[(i, j)]) + d[2] * a[i] * a[j] + d[3] * s[i] * s[j]);
        }
    }
    let c_inv = c.inverse().unwrap();
    let p = s_iso[(2, 2)] / c_inv[(2, 2)];
    f * (s_iso - c_inv.scale(p))
}

fn loading_oracle() -> Outcome {
    let frame = frame();
    let envelope: Vec<[f64; 4]> = [LoadingMode::Uniaxial(2.5), LoadingMode::PureShear(2.5), LoadingMode::Equibiaxial(2.5)]
        .iter()
        .map(|m| m.invariants(&frame).unwrap())
        .collect();
    let constants = NormalizationConstants::fit_to(envelope);
    let mut r = rng(4);
    let (mut worst, mut worst_eb): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let bank = FamilySpec::new(Family::ALL[k % 3], Ansatz::Full).build(constants, false, &mut r).unwrap();
        let lambda = r.random_range(1.0..2.5);
        for mode in [LoadingMode::Uniaxial(lambda), LoadingMode::PureShear(lambda), LoadingMode::Equibiaxial(lambda)] {
            let raw = mode.invariants(&frame).unwrap();
            let d = bank.derivatives_at(&bank.normalize(&raw)).unwrap().first;
            let p = tensor_stress(d, mode.stretches(), &frame)[(0, 0)];
            let closed = stress(&bank, mode, &frame).unwrap()[0];
            worst = worst.max((closed - p).abs() / p.abs().max(1e-9));
        }
        let eb = stress_equibiaxial(&bank, lambda).unwrap();
        let bi = stress_biaxial(&bank, lambda, lambda, &frame).unwrap();
        worst_eb = worst_eb.max((bi.pxx - eb).abs().max((bi.pyy - eb).abs()) / eb.abs().max(1e-10));
    }
    Outcome::new(
        worst <= 1e-9 && worst_eb <= 1e-10,
        format!("100 banks, closed form vs tensor {worst:.1e}, biaxial vs equibiaxial {worst_eb:.1e}"),
    )
}

fn node_integrator() -> Outcome {
    let linear = NodeParams::linear(1.0, IntegratorConfig::default());
    let dev = linspace(0.0, 3.0, 61)
        .iter()
        .map(|&x| (node_first_derivative(&linear, x).unwrap() - x * E).abs())
        .fold(0.0, f64::max);
    let mut r = rng(5);
    let mut monotone = 0;
    for _ in 0..100 {
        let p = NodeParams::random(&[5, 5], IntegratorConfig::default(), &mut r).unwrap();
        let mut xs: Vec<f64> = (0..100).map(|_| r.random_range(0.0..3.0)).collect();
        xs.sort_by(f64::total_cmp);
        let ys: Vec<f64> = xs.iter().map(|&x| node_first_derivative(&p, x).unwrap()).collect();
        if p.biases_are_zero() && ys.windows(2).all(|w| w[0] <= w[1]) {
            monotone += 1;
        }
    }
    Outcome::new(
        dev <= 1e-6 && monotone == 100,
        format!("linear field max |y(1) - x e| {dev:.1e}; {monotone}/100 random fields monotone"),
    )
}

fn medians(fits: &[FitResult], modes: &[Mode]) -> Vec<f64> {
    let summary = training::summarize(fits);
    modes
        .iter()
        .map(|m| summary.iter().find(|s| s.mode == *m).and_then(|s| s.r2_median).unwrap_or(f64::NEG_INFINITY))
        .collect()
}

fn fmt_r2(modes: &[Mode], r2: &[f64]) -> String {
    modes.iter().zip(r2).map(|(m, v)| format!("{} {v:.4}", m.name())).collect::<Vec<_>>().join(" ")
}

fn oracle_recovery(
    data: &Dataset,
    ansatz: Ansatz,
    restarts: usize,
    threshold: f64,
    cfg: fn(Family, usize, u64) -> TrainingConfig,
) -> Outcome {
    let modes = data.modes();
    let parts = Family::ALL
        .iter()
        .map(|&family| {
            let fits = multi_restart(&FamilySpec::new(family, ansatz), data, data, &cfg(family, restarts, 6)).unwrap();
            let r2 = medians(&fits.results, &modes);
            (family, r2.iter().all(|&v| v >= threshold), format!("median R2 {}", fmt_r2(&modes, &r2)))
        })
        .collect();
    by_family(parts, true)
}

fn extrapolation_grid() -> Outcome {
    let data = rubber();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let rows: Vec<TrainModes> = Mode::RUBBER.iter().map(|m| TrainModes::Modes(vec![*m])).collect();
    let mut parts = Vec::new();
    for family in Family::ALL {
        let plan = BenchPlan {
            specs: vec![FamilySpec::new(family, Ansatz::Full)],
            rows: rows.clone(),
            training: rubber_config(family, 3, 8),
            sweep_restarts: None,
            trace_points: 200,
            trace_upper: polyfit::bench::DEFAULT_TRACE_UPPER,
        };
        let report = run_bench(&plan, &data, &pool).unwrap().report;
        let table = report.r2_table(family);
        let complete = table.len() == 3 && table.iter().all(|r| r.len() == 3 && r.iter().all(Option::is_some));
        let diag: Vec<f64> = (0..3).map(|k| table[k][k].unwrap_or(f64::NEG_INFINITY)).collect();
        let off: Vec<String> = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| format!("{:.3}", table[i][j].unwrap_or(f64::NAN)))
            .collect();
        parts.push((
            family,
            complete && diag.iter().all(|&d| d >= 0.99),
            format!("diagonal {}, off-diagonal [{}]", fmt_r2(&Mode::RUBBER, &diag), off.join(" ")),
        ));
    }
    by_family(parts, true)
}

fn efficiency_trend() -> Outcome {
    // The Mooney-Rivlin oracle is linear in the invariants, so every size fits it exactly; the fiber
    // oracle is where capacity shows.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let skin = skin();
    let mut parts = Vec::new();
    for (family, small, large) in [(Family::Icnn, vec![1], vec![4, 4]), (Family::Node, vec![2], vec![5, 5])] {
        let ladder = [ModelSize::Widths(small), ModelSize::Widths(large)];
        let (rows, _, fails) =
            efficiency_sweep(&FamilySpec::new(family, Ansatz::Full), &ladder, &skin, &skin_config(family, 5, 9), 5, &pool).unwrap();
        let (a, b) = (rows[0].median_mae.unwrap_or(f64::INFINITY), rows[1].median_mae.unwrap_or(f64::INFINITY));
        parts.push((
            family,
            fails.is_empty() && b <= a,
            format!("median MAE {} params {a:.2e} -> {} params {b:.2e}", rows[0].param_count, rows[1].param_count),
        ));
    }
    let ladder = [ModelSize::Ansatz(Ansatz::Reduced), ModelSize::Ansatz(Ansatz::Full)];
    let (rows, _, fails) =
        efficiency_sweep(&FamilySpec::new(Family::Cann, Ansatz::Full), &ladder, &skin, &skin_config(Family::Cann, 5, 9), 5, &pool)
            .unwrap();
    let (a, b) = (rows[0].median_mae.unwrap_or(f64::INFINITY), rows[1].median_mae.unwrap_or(f64::INFINITY));
    parts.push((Family::Cann, fails.is_empty() && b <= a, format!("median MAE reduced {a:.2e}, full {b:.2e}")));
    by_family(parts, true)
}

fn reference_parity(path: &Path) -> Outcome {
    let data = match dataset_io::load_csv(path) {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, format!("cannot load {}: {e}", path.display())),
    };
    let modes = data.modes();
    let parts = [(Family::Cann, 0.97), (Family::Icnn, 0.99), (Family::Node, 0.99)]
        .into_iter()
        .map(|(family, target)| {
            let fits = multi_restart(&FamilySpec::new(family, Ansatz::Full), &data, &data, &rubber_config(family, 10, 10)).unwrap();
            let r2 = medians(&fits.results, &modes);
            let avg = r2.iter().sum::<f64>() / r2.len() as f64;
            (family, avg >= target, format!("average R2 {avg:.4} (target {target})"))
        })
        .collect();
    by_family(parts, false)
}

fn run(n: u8, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    let mut timing = format!("{:.1} s", took.as_secs_f64());
    if let Some(b) = budget {
        timing.push_str(&format!(" of {} s", b.as_secs()));
        if took > b {
            o.passed = false;
            o.known_gap = false;
            o.detail.push_str("; over the runtime budget");
        }
    }
    let status = match (o.passed, o.known_gap) {
        (true, _) => "PASS",
        (false, true) => "FAIL (documented NODE shortfall)",
        (false, false) => "FAIL",
    };
    println!("criterion {n:>2} {name}: {status} [{timing}] {}", o.detail);
    o
}

type Check = Box<dyn FnOnce() -> Outcome>;

/// Runs every criterion, or only those whose numbers are given as arguments.
fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let only: Vec<u8> = env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u8| only.is_empty() || only.contains(&n);
    let checks: Vec<(u8, &str, Option<Duration>, Check)> = vec![
        (1, "objectivity", Some(secs(1)), Box::new(objectivity)),
        (2, "polyconvexity", Some(secs(60)), Box::new(polyconvexity)),
        (3, "derivative consistency", Some(secs(60)), Box::new(derivative_consistency)),
        (4, "loading formula oracle", None, Box::new(loading_oracle)),
        (5, "NODE integrator", None, Box::new(node_integrator)),
        (6, "Mooney-Rivlin recovery", Some(secs(600)), Box::new(|| oracle_recovery(&rubber(), Ansatz::Full, 10, 0.99, rubber_config))),
        (7, "fiber oracle recovery", Some(secs(900)), Box::new(|| oracle_recovery(&skin(), Ansatz::Full, 5, 0.98, skin_config))),
        (8, "extrapolation grid", None, Box::new(extrapolation_grid)),
        (9, "efficiency trend", None, Box::new(efficiency_trend)),
    ];
    let mut outcomes: Vec<Outcome> =
        checks.into_iter().filter(|c| wanted(c.0)).map(|(n, name, budget, f)| run(n, name, budget, f)).collect();
    if wanted(10) {
        match env::var_os("POLYFIT_RUBBER_CSV") {
            Some(p) => outcomes.push(run(10, "reference data parity", None, || reference_parity(Path::new(&p)))),
            None => println!("criterion 10 reference data parity: SKIP (set POLYFIT_RUBBER_CSV to a rubber data set CSV to evaluate)"),
        }
    }
    let unexpected = outcomes.iter().filter(|o| !o.passed && !o.known_gap).count();
    let gaps = outcomes.iter().filter(|o| !o.passed && o.known_gap).count();
    println!("acceptance: {} passed, {gaps} documented shortfalls, {unexpected} unexpected failures", outcomes.iter().filter(|o| o.passed).count());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

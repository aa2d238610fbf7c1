mod common;

use polyfit_core::data::{split_protocol, synth_generate, Dataset, Mode, Oracle, StretchGrid, TrainModes};
use polyfit_core::kinematics::MaterialFrame;
use polyfit_core::potential::{Ansatz, Family, FamilySpec};
use polyfit_core::training::*;
use polyfit_core::Error;

fn rubber(oracle: Oracle, modes: &[Mode]) -> Dataset {
    synth_generate(&oracle, modes, &StretchGrid::RUBBER, 0.0, 0, MaterialFrame::default()).unwrap()
}

fn mooney_rivlin() -> Dataset {
    rubber(Oracle::MooneyRivlin { c1: 0.3, c2: 0.1 }, &Mode::RUBBER)
}

fn config(lr: f64, epochs: usize, seed: u64) -> TrainingConfig {
    TrainingConfig { learning_rate: lr, max_epochs: epochs, seed, ..Default::default() }
}

#[test]
fn cann_recovers_neo_hookean_derivative() {
    let data = rubber(Oracle::NeoHookean { c1: 0.5 }, &[Mode::UT]);
    let fit = train(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &data, &data, &config(1e-2, 20_000, 0)).unwrap();
    assert!(fit.final_loss <= 1e-6, "loss {}", fit.final_loss);
    for s in data.samples() {
        let raw = s.loading().invariants(&data.frame).unwrap();
        let d = fit.bank.derivatives_at(&fit.bank.normalize(&raw)).unwrap();
        assert!((0.49..=0.51).contains(&d.first[0]), "∂ψ/∂I1 = {} at λ = {}", d.first[0], s.lambda_x);
    }
}

#[test]
fn same_seed_gives_identical_results() {
    let data = mooney_rivlin();
    for family in Family::ALL {
        let spec = FamilySpec::new(family, Ansatz::Reduced);
        let cfg = config(1e-2, 60, 42);
        let a = train(&spec, &data, &data, &cfg).unwrap();
        let b = train(&spec, &data, &data, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&spec, &data, &data, &config(1e-2, 60, 43)).unwrap();
        assert_ne!(a.bank, c.bank);
    }
}

#[test]
fn cann_and_icnn_fit_mooney_rivlin() {
    let data = mooney_rivlin();
    for (family, epochs) in [(Family::Cann, 20_000), (Family::Icnn, 5_000)] {
        let fit = train(&FamilySpec::new(family, Ansatz::Reduced), &data, &data, &config(1e-2, epochs, 1)).unwrap();
        for m in &fit.train_metrics {
            assert!(m.r2.unwrap() >= 0.999, "{family:?} {:?}: {:?}", m.mode, m.r2);
        }
    }
}

#[test]
fn restart_spread_is_small_for_cann() {
    let data = mooney_rivlin();
    let cfg = TrainingConfig { restarts: 10, ..config(1e-2, 3_000, 5) };
    let runs = multi_restart(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &data, &data, &cfg).unwrap();
    for s in &runs.summary {
        assert!(s.r2_std.unwrap() <= 0.01, "{:?}: σ = {:?}", s.mode, s.r2_std);
    }
}

#[test]
fn multi_restart_summary_matches_results() {
    let data = mooney_rivlin();
    let cfg = TrainingConfig { restarts: 3, ..config(1e-2, 100, 9) };
    let runs = multi_restart(&FamilySpec::new(Family::Icnn, Ansatz::Reduced), &data, &data, &cfg).unwrap();
    assert_eq!(runs.results.len(), 3);
    let mut seeds: Vec<u64> = runs.results.iter().map(|r| r.seed).collect();
    seeds.dedup();
    assert_eq!(seeds.len(), 3);
    for s in &runs.summary {
        let r2: Vec<f64> = runs.results.iter().map(|r| r.metrics(s.mode).unwrap().r2.unwrap()).collect();
        let m = r2.iter().sum::<f64>() / 3.0;
        assert!((s.r2_mean.unwrap() - m).abs() <= 1e-12);
        assert_eq!(s.count, 3);
    }
}

#[test]
fn constraints_hold_throughout_training() {
    let data = synth_generate(
        &Oracle::FiberReinforced { c1: 0.5, k1: 1.0, k2: 2.0 },
        &Mode::SKIN,
        &StretchGrid::SKIN,
        0.0,
        0,
        MaterialFrame::default(),
    )
    .unwrap();
    for family in Family::ALL {
        let spec = FamilySpec::new(family, Ansatz::Full).with_widths(&[3]);
        for epochs in [1, 2, 5, 20] {
            let fit = train(&spec, &data, &data, &config(5e-2, epochs, 3)).unwrap();
            assert!(fit.bank.constraints_hold(), "{family:?} after {epochs} epochs");
            assert_eq!(fit.param_count, fit.bank.params().len());
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let data = mooney_rivlin();
    let constants = fit_constants(&data).unwrap();
    let prepared = PreparedData::new(&data, &constants).unwrap();
    for family in Family::ALL {
        let mut rng = common::rng(17);
        let bank = FamilySpec::new(family, Ansatz::Full)
            .with_widths(&[3, 3])
            .build(constants, false, &mut rng)
            .unwrap();
        let n = bank.num_params();
        let mut analytic = vec![0.0; n];
        let mut fd = vec![0.0; n];
        prepared.loss_and_gradient(&bank, &mut analytic).unwrap();
        prepared.loss_and_fd_gradient(&bank, &mut fd).unwrap();
        let scale = fd.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for k in 0..n.min(50) {
            assert!(
                (analytic[k] - fd[k]).abs() <= 1e-4 * fd[k].abs().max(1e-3 * scale),
                "{family:?} parameter {k}: {} vs {}",
                analytic[k],
                fd[k]
            );
        }
    }
}

#[test]
fn finite_difference_mode_trains_too() {
    let data = rubber(Oracle::NeoHookean { c1: 0.5 }, &[Mode::UT]);
    let cfg = TrainingConfig { grad_mode: GradMode::FiniteDifference, ..config(1e-2, 200, 0) };
    let fd = train(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &data, &data, &cfg).unwrap();
    let an = train(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &data, &data, &config(1e-2, 200, 0)).unwrap();
    assert!(fd.final_loss < fd.loss_history[0]);
    assert!((fd.final_loss - an.final_loss).abs() <= 1e-6 * an.loss_history[0]);
}

#[test]
fn extrapolation_split_keeps_validation_unseen() {
    let data = mooney_rivlin();
    let (tr, va) = split_protocol(&data, &TrainModes::Modes(vec![Mode::UT])).unwrap();
    let fit = train(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &tr, &va, &config(1e-2, 50, 0)).unwrap();
    assert!(fit.protocol_is_clean());
    assert_eq!(fit.train_metrics.len(), 1);
    assert_eq!(fit.validation_metrics.len(), 2);
    let (tr, va) = split_protocol(&data, &TrainModes::All).unwrap();
    let fit = train(&FamilySpec::new(Family::Cann, Ansatz::Reduced), &tr, &va, &config(1e-2, 10, 0)).unwrap();
    assert!(!fit.protocol_is_clean());
}

#[test]
fn loss_examples() {
    let data = rubber(Oracle::NeoHookean { c1: 0.5 }, &[Mode::UT]);
    let mut rng = common::rng(0);
    let mut bank = FamilySpec::new(Family::Cann, Ansatz::Reduced)
        .build(fit_constants(&data).unwrap(), false, &mut rng)
        .unwrap();
    bank.set_params(&vec![0.0; bank.num_params()]).unwrap();
    // A zero bank predicts no stress: the loss is the mean squared data.
    let expected = data.samples().map(|s| s.p_xx * s.p_xx).sum::<f64>() / data.num_samples() as f64;
    assert!((loss(&bank, &data).unwrap() - expected).abs() <= 1e-14 * expected);
}

#[test]
fn invalid_requests_are_rejected() {
    let skin = synth_generate(
        &Oracle::FiberReinforced { c1: 0.5, k1: 1.0, k2: 2.0 },
        &Mode::SKIN,
        &StretchGrid::SKIN,
        0.0,
        0,
        MaterialFrame::default(),
    )
    .unwrap();
    let rubber = mooney_rivlin();
    let mut mixed = skin.clone();
    mixed.curves.extend(rubber.curves.iter().cloned());
    let spec = FamilySpec::new(Family::Cann, Ansatz::Reduced);
    assert!(matches!(train(&spec, &mixed, &mixed, &config(1e-2, 10, 0)), Err(Error::InvalidConfig(_))));
    assert!(matches!(
        train(&spec, &rubber, &rubber, &TrainingConfig { learning_rate: -1.0, ..Default::default() }),
        Err(Error::InvalidConfig(_))
    ));
    // A wildly large step: ICNN diverges and aborts, CANN is caught by the
    // exponential overflow guard and keeps a finite loss.
    let icnn = FamilySpec::new(Family::Icnn, Ansatz::Reduced);
    assert!(matches!(train(&icnn, &rubber, &rubber, &config(1e6, 200, 0)), Err(Error::Numerical(_))));
    let guarded = train(&spec, &rubber, &rubber, &config(1e6, 200, 0)).unwrap();
    assert!(guarded.clamp_events > 0 && guarded.final_loss.is_finite());
}

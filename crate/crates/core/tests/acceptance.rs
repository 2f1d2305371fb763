//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;

use analog_grover::experiment::{
    build_grover_pulse, calibrate_amplitude, fit_dq_coefficient, grover_propagator, Context,
};
use analog_grover::output::{render_state, write_run};
use analog_grover::scaling::{
    farhi_gutmann_probability, hamiltonian, SearchInstance, TransitionAmplitude,
    DEFAULT_FIT_THRESHOLD,
};
use analog_grover::spectra::Line;
use analog_grover::units::{hz, to_hz};
use analog_grover::*;

type Check = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn sodium_field() -> Result<StaticField> {
    StaticField::from_hz(105.79e6, 10840.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn config(overrides: &[&str]) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    c.apply_overrides(overrides)?;
    Ok(c)
}

fn fenner_transfer() -> Result<Outcome> {
    let omega_f = hz(62.5);
    let t = fenner_time(omega_f, 0.5)?;
    let out = propagate_const(
        &StateVector::uniform(4),
        &fenner_hamiltonian(4, 2, omega_f)?,
        t,
    )?;
    let f = fidelity(&out, &StateVector::basis(4, 2))?;
    let angle = 2.0 * omega_f * t;
    let want = 2.0 * PI / (3.0 * 3f64.sqrt());
    let us = t * 1e6;
    outcome(
        f >= 1.0 - 1e-9
            && (angle - want).abs() < 1e-12
            && (us - 1539.6).abs() < 0.05
            && (us - 1540.0).abs() < 1.0,
        format!(
            "F = 1 - {:.1e}, 2 Omega_f t_f = {angle:.6}, t_f = {us:.2} us",
            1.0 - f
        ),
    )
}

fn amplitude_matching() -> Result<Outcome> {
    let ctx = Context::exact(sodium_field()?, IntegrationPolicy::default());
    let a12 = to_hz(calibrate_amplitude((1, 2), 2e-3, &ctx)?);
    let a23 = to_hz(calibrate_amplitude((2, 3), 2e-3, &ctx)?);
    let ratio = a23 / a12;
    let want = 2.0 / 3f64.sqrt();
    outcome(
        rel(ratio, want) <= 0.01 && rel(a12, 62.5) <= 0.005 && rel(a23, 72.2) <= 0.005,
        format!("Omega_12 = {a12:.3} Hz, Omega_23 = {a23:.3} Hz, ratio {ratio:.5} (2/sqrt3 = {want:.5})"),
    )
}

fn equilibrium_spectrum() -> Result<Outcome> {
    let cfg = config(&[])?;
    let spec = render_state(&DeviationState::equilibrium(4), &cfg)?;
    let [a, b, c] = spec.peaks.integrals();
    let ratio_err = [rel(a / b, 0.75), rel(c / b, 0.75)]
        .into_iter()
        .fold(0.0, f64::max);
    let width = |line| spec.peaks.get(line).fwhm_hz.unwrap_or(f64::NAN);
    let broadening = 0.5 * (width(Line::L01) + width(Line::L23)) / width(Line::L12);
    let want = 16.0 / 4.5;
    outcome(
        ratio_err <= 0.02 && rel(broadening, want) <= 0.05,
        format!(
            "integrals {a:.4}:{b:.4}:{c:.4} (ratio error {:.2}%), satellite/central FWHM {broadening:.3} (16/4.5 = {want:.3})",
            100.0 * ratio_err
        ),
    )
}

fn pipeline_states() -> Result<Outcome> {
    let report = run_pipeline(&config(&["relaxation=off"])?)?;
    let patterns: [(char, [f64; 3]); 3] = [
        ('b', [1.5, 0.0, 0.0]),
        ('c', [-1.5, 2.0, 0.0]),
        ('e', [0.0, -2.0, 1.5]),
    ];
    let mut ok = true;
    let mut worst = 0.0f64;
    for (label, want) in patterns {
        let got = report.step(label).expect("recorded").sticks.integrals();
        for (g, w) in got.iter().zip(want) {
            if w == 0.0 {
                ok &= g.abs() < 1e-9;
            } else {
                ok &= g.signum() == w.signum();
                worst = worst.max(rel(*g, w));
            }
        }
    }
    let uniform = report.step('d').expect("recorded");
    let coherence = uniform.state.max_coherence();
    let final_fidelity = report.steps.last().expect("five steps").fidelity;
    outcome(
        ok && worst <= 0.02 && coherence > 0.1 && final_fidelity >= 0.99,
        format!(
            "relaxation off: worst magnitude error {worst:.1e}, |s> coherence {coherence:.3}, |s> sticks {:?}, final F = {final_fidelity:.9}",
            uniform.sticks.integrals().map(|x| (x * 1e4).round() / 1e4)
        ),
    )
}

fn rwa_validity() -> Result<Outcome> {
    let points = rwa_sweep(
        &sodium_field()?,
        &[1.0, 3.0, 10.0],
        2,
        hz(62.5),
        2e-3,
        &IntegrationPolicy::default(),
    )?;
    let monotone = points
        .windows(2)
        .all(|w| w[1].infidelity() < w[0].infidelity());
    let listing: Vec<String> = points
        .iter()
        .map(|p| {
            format!(
                "x{}: p = {:.5} (untrimmed {:.5}, deviation F {:.5})",
                p.scale, p.success, p.untrimmed_success, p.deviation_fidelity
            )
        })
        .collect();
    outcome(
        points[0].success >= 0.95 && monotone,
        format!("{}; monotone = {monotone}", listing.join(", ")),
    )
}

fn dq_law() -> Result<Outcome> {
    let field = sodium_field()?;
    let amps: Vec<f64> = (0..9).map(|k| hz(100.0 + 50.0 * k as f64)).collect();
    let mut worst = 0.0f64;
    let mut kappas = Vec::new();
    for levels in [(0, 2), (1, 3)] {
        let fit = fit_dq_coefficient(levels, &field, &amps, &IntegrationPolicy::default())?;
        worst = worst.max(fit.max_relative_residual);
        kappas.push(fit.kappa);
    }
    let predicted = to_hz(dq_effective_amplitude(hz(458.5), &field)?);
    outcome(
        worst <= 0.05 && rel(predicted, 62.5) <= 0.2,
        format!(
            "kappa = {:.4} / {:.4}, worst residual {:.2}%, rate at 458.5 Hz = {predicted:.2} Hz",
            kappas[0],
            kappas[1],
            100.0 * worst
        ),
    )
}

fn scaling() -> Result<Outcome> {
    let dims: Vec<usize> = (2..=10).map(|k| 1usize << k).collect();
    // A large threshold so the exponent is reported even when the
    // power law is a poor description.
    let fenner = scaling_study(&dims, 1.0, Family::Fenner, f64::INFINITY)?;
    let fg = scaling_study(&dims, 1.0, Family::FarhiGutmann, DEFAULT_FIT_THRESHOLD)?;

    let mut worst = 0.0f64;
    for n in [4usize, 37, 256, 1024] {
        let inst = SearchInstance::new(n, 0, 1.0)?;
        let h = hamiltonian(Family::FarhiGutmann, &inst)?;
        let amp =
            TransitionAmplitude::new(&h, &StateVector::uniform(n), &StateVector::basis(n, 0))?;
        let horizon = 2.0 * PI / inst.overlap();
        for k in 0..=200 {
            let t = horizon * k as f64 / 200.0;
            worst = worst.max((amp.probability(t) - farhi_gutmann_probability(&inst, t)).abs());
        }
    }
    let fe = fenner.fit.exponent;
    let ge = fg.fit.exponent;
    outcome(
        (fe - 0.5).abs() <= 0.02 && (ge - 0.5).abs() <= 0.01 && worst <= 1e-8,
        format!(
            "Fenner exponent {fe:.4} (rms {:.3}), Farhi-Gutmann exponent {ge:.6}, worst |P - formula| {worst:.1e}",
            fenner.fit.residual
        ),
    )
}

fn inversion() -> Result<Outcome> {
    let ctx = Context::effective(sodium_field()?);
    let t = fenner_time(hz(62.5), 0.5)?;
    let mut worst = 0.0f64;
    for target in [1, 2] {
        let (direct, _) = build_grover_pulse(target, Direction::Direct, hz(62.5), t, 2e-3, &ctx)?;
        let (inverse, _) = build_grover_pulse(target, Direction::Inverse, hz(62.5), t, 2e-3, &ctx)?;
        let u = &grover_propagator(&direct, &ctx)? * &grover_propagator(&inverse, &ctx)?;
        worst = worst.max(u.max_abs_diff(&Operator::identity(4)));
    }
    let report = run_pipeline(&config(&["relaxation=off", "final_target=1"])?)?;
    let c = report.step('c').expect("recorded").sticks.integrals();
    let e = report.step('e').expect("recorded").sticks.integrals();
    let diff = c
        .iter()
        .zip(&e)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-9 && diff <= 1e-9,
        format!("|U_direct U_inverse - 1| = {worst:.1e}; spectrum (e) for |01> vs (c): {diff:.1e}"),
    )
}

fn determinism() -> Result<Outcome> {
    let cfg = config(&[])?;
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for dir in &dirs {
        write_run(&run_pipeline(&cfg)?, &cfg, dir.path())?;
        let study = scaling_study(
            &[4, 16, 64, 256],
            1.0,
            Family::FarhiGutmann,
            DEFAULT_FIT_THRESHOLD,
        )?;
        let mut csv = Vec::new();
        study.write_csv(&mut csv)?;
        std::fs::write(dir.path().join("scaling.csv"), csv)?;
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if std::fs::read(dirs[0].path().join(name))? != std::fs::read(dirs[1].path().join(name))? {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    outcome(
        differing.is_empty() && names.len() == 8,
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("Fenner transfer", fenner_transfer),
        ("amplitude matching", amplitude_matching),
        ("equilibrium spectrum", equilibrium_spectrum),
        ("pipeline states", pipeline_states),
        ("RWA validity", rwa_validity),
        ("DQ second-order law", dq_law),
        ("scaling exponents", scaling),
        ("inversion", inversion),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {}. {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

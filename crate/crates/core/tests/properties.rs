use analog_grover::dynamics::{propagator_timedep, relax_between_steps};
use analog_grover::experiment::{prepare_pseudopure, Context};
use analog_grover::hamiltonians::{grover_harmonics, transition_table, RfSampler};
use analog_grover::scaling::{hamiltonian, scaling_study, Family, SearchInstance};
use analog_grover::spectra::{acquire, monitor_pulse, spectrum, stick_spectrum, stick_spectrum_at};
use analog_grover::spin_ops::spin_three_halves;
use analog_grover::units::hz;
use analog_grover::*;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn hermitian(entries: &[f64]) -> Operator {
    let m = DMatrix::from_fn(4, 4, |i, j| {
        C64::new(entries[4 * i + j], entries[16 + 4 * i + j])
    });
    Operator::hermitian((&m + m.adjoint()) * C64::from(0.5)).unwrap()
}

fn deviation(entries: &[f64]) -> DeviationState {
    let h = hermitian(entries);
    let shift = h.trace() / C64::from(4.0);
    let traceless = &h - &Operator::identity(4).scale_complex(shift);
    DeviationState::new(traceless).unwrap()
}

fn sorted_eigenvalues(op: &Operator) -> Vec<f64> {
    let mut v = op.eigh().unwrap().values;
    v.sort_by(f64::total_cmp);
    v
}

fn sodium_field() -> StaticField {
    StaticField::from_hz(105.79e6, 10840.0).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_composes_over_time(e in entries(), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let h = hermitian(&e);
        let a = expm_generator(&h, t1).unwrap();
        let b = expm_generator(&h, t2).unwrap();
        let ab = expm_generator(&h, t1 + t2).unwrap();
        prop_assert!((&a * &b).max_abs_diff(&ab) < 1e-10);
    }

    #[test]
    fn conjugation_keeps_trace_and_spectrum(e in entries(), g in entries(), t in -2.0f64..2.0) {
        let rho = deviation(&e);
        let u = expm_generator(&hermitian(&g), t).unwrap();
        let out = rho.rotated(&u);
        prop_assert!(out.operator().trace().norm() < 1e-10);
        let before = sorted_eigenvalues(rho.operator());
        let after = sorted_eigenvalues(out.operator());
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn casimir_for_any_spin(twice in 1u32..12) {
        let j = twice as f64 / 2.0;
        let s = spin_matrices(j).unwrap();
        let sum = &(&(&s.ix * &s.ix) + &(&s.iy * &s.iy)) + &(&s.iz * &s.iz);
        let want = Operator::identity(s.iz.dim()).scale(j * (j + 1.0));
        prop_assert!(sum.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn unit_norm_after_evolution(e in entries(), t in -5.0f64..5.0, k in 0usize..4) {
        let u = expm_generator(&hermitian(&e), t).unwrap();
        let psi = StateVector::basis(4, k).evolve(&u);
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagation_composes_on_shared_grid(e in entries(), g in entries(), w in 0.5f64..5.0) {
        let (h0, h1) = (hermitian(&e), hermitian(&g));
        let sampler = |t: f64| &h0 + &h1.scale((w * t).sin());
        let policy = IntegrationPolicy::with_dt(0.01);
        let first = propagator_timedep(sampler, 0.0, 0.75, &policy).unwrap();
        let second = propagator_timedep(sampler, 0.75, 2.0, &policy).unwrap();
        let whole = propagator_timedep(sampler, 0.0, 2.0, &policy).unwrap();
        prop_assert!((&second * &first).max_abs_diff(&whole) < 1e-9);
    }

    #[test]
    fn relaxation_keeps_deviation_form(e in entries(), duration in 0.0f64..0.05) {
        let rho = deviation(&e);
        let out = relax_between_steps(&rho, duration, &RelaxationParams::sodium_liquid_crystal(), &DeviationState::equilibrium(4)).unwrap();
        prop_assert!(out.operator().hermiticity_error() < 1e-12);
        prop_assert!(out.operator().trace().norm() < 1e-12);
    }

    #[test]
    fn phase_cycled_pseudopure_is_hermitian_traceless(p in prop::collection::vec(-1.0f64..1.0, 4)) {
        let mean = p.iter().sum::<f64>() / 4.0;
        let populations: Vec<f64> = p.iter().map(|x| x - mean).collect();
        let start = DeviationState::new(Operator::diagonal(&populations)).unwrap();
        let ctx = Context::effective(sodium_field());
        for cycle in [PhaseCycle::TwoStep, PhaseCycle::FourStep] {
            let pp = prepare_pseudopure(&start, 2e-3, cycle, &ctx).unwrap();
            prop_assert!(pp.state.operator().hermiticity_error() < 1e-12);
            prop_assert!(pp.state.operator().trace().norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_is_linear_in_the_deviation(e in entries(), g in entries(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let field = sodium_field();
        let relax = RelaxationParams::sodium_liquid_crystal();
        let integrals = |rho: &DeviationState| {
            spectrum(&acquire(rho, &field, std::f64::consts::PI / 20.0, 0.128, 1e-5, &relax).unwrap()).unwrap().peaks.integrals()
        };
        let (x, y) = (deviation(&e), deviation(&g));
        let mixed = integrals(&x.linear_combination(a, &y, b));
        let (ix, iy) = (integrals(&x), integrals(&y));
        for k in 0..3 {
            let want = a * ix[k] + b * iy[k];
            let scale = (a * ix[k]).abs() + (b * iy[k]).abs() + 1e-9;
            prop_assert!((mixed[k] - want).abs() <= 1e-6 * scale, "line {k}: {} vs {want}", mixed[k]);
        }
    }

    #[test]
    fn search_hamiltonians_vanish_on_the_complement(n in 3usize..40, target_seed in 0usize..1000, coeffs in prop::collection::vec(-1.0f64..1.0, 80)) {
        let target = target_seed % n;
        let inst = SearchInstance::new(n, target, 1.7).unwrap();
        let s = StateVector::uniform(n);
        let w = StateVector::basis(n, target);
        let raw = StateVector::new((0..n).map(|k| C64::new(coeffs[2 * k % 80], coeffs[(2 * k + 1) % 80])).collect()).unwrap();
        // Project out span{|s>, |w>} with Gram-Schmidt.
        let s_perp = {
            let ov = w.inner(&s);
            let v: Vec<C64> = (0..n).map(|k| s.amplitudes()[k] - ov * w.amplitudes()[k]).collect();
            let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|c| c / norm).collect::<Vec<_>>()
        };
        let ow = w.inner(&raw);
        let os: C64 = s_perp.iter().zip(raw.amplitudes().iter()).map(|(a, b)| a.conj() * b).sum();
        let v: Vec<C64> = (0..n).map(|k| raw.amplitudes()[k] - ow * w.amplitudes()[k] - os * s_perp[k]).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let v = StateVector::new(v.into_iter().map(|c| c / norm).collect()).unwrap();
        for family in [Family::Fenner, Family::FarhiGutmann] {
            let h = hamiltonian(family, &inst).unwrap();
            prop_assert!(h.apply(&v).norm() < 1e-12, "{family}");
        }
    }
}

#[test]
fn scaling_exponent_ignores_strength() {
    let dims = [4, 16, 64, 256];
    for family in [Family::Fenner, Family::FarhiGutmann] {
        let base = scaling_study(&dims, 1.0, family, 0.05).unwrap();
        for strength in [0.37, 12.5] {
            let other = scaling_study(&dims, strength, family, 0.05).unwrap();
            assert!(
                (other.fit.exponent - base.fit.exponent).abs() < 1e-6,
                "{family} at {strength}"
            );
            assert!((other.fit.prefactor * strength / base.fit.prefactor - 1.0).abs() < 1e-6);
        }
    }
}

fn reference_states() -> Vec<DeviationState> {
    let mut states = vec![DeviationState::equilibrium(4)];
    states.extend((0..4).map(|k| DeviationState::pseudopure(&StateVector::basis(4, k))));
    states.push(DeviationState::pseudopure(&StateVector::uniform(4)));
    states
}

/// Line integrals read straight off the rotated deviation matrix.
fn rotated_integrals(state: &DeviationState, angle: f64) -> [f64; 3] {
    let rho = monitor_pulse(state, angle).unwrap();
    let raising = spin_three_halves().raising();
    [(0, 1), (1, 2), (2, 3)]
        .map(|(a, b)| (rho.operator()[(b, a)] * raising[(a, b)]).re / (2.0 * angle.sin()))
}

fn largest(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn fourier_integrals_match_rotated_coherences() {
    let field = sodium_field();
    let angle = std::f64::consts::PI / 20.0;
    for state in &reference_states() {
        let exact = rotated_integrals(state, angle);
        let measured = spectrum(
            &acquire(
                state,
                &field,
                angle,
                0.128,
                1e-5,
                &RelaxationParams::disabled(),
            )
            .unwrap(),
        )
        .unwrap()
        .peaks
        .integrals();
        for k in 0..3 {
            assert!(
                (exact[k] - measured[k]).abs() <= 1e-3 * largest(&exact),
                "{k}: {exact:?} vs {measured:?}"
            );
        }
    }
}

#[test]
fn first_order_sticks_deviate_quadratically_in_the_angle() {
    let field = sodium_field();
    let worst = |angle: f64| {
        reference_states()
            .iter()
            .map(|state| {
                let sticks = stick_spectrum_at(state, &field, angle).unwrap().integrals();
                let exact = rotated_integrals(state, angle);
                (0..3)
                    .map(|k| (sticks[k] - exact[k]).abs() / largest(&exact))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (
        worst(std::f64::consts::PI / 20.0),
        worst(std::f64::consts::PI / 40.0),
    );
    assert!(coarse < 0.03, "{coarse}");
    assert!((fine / coarse - 0.25).abs() < 0.02, "{fine} / {coarse}");
    // Rotating I_z is linear, so equilibrium has no second-order error.
    let eq = DeviationState::equilibrium(4);
    let sticks = stick_spectrum(&eq, &field).unwrap().integrals();
    let exact = rotated_integrals(&eq, std::f64::consts::PI / 20.0);
    assert!((0..3).all(|k| (sticks[k] - exact[k]).abs() < 1e-12));
}

#[test]
fn rotating_frame_sampler_matches_secular_on_resonance_terms() {
    let field = sodium_field();
    let table = transition_table(&field);
    let pulse = grover_harmonics(2, hz(62.5), &table, hz(450.0), Direction::Direct).unwrap();
    let sampler = RfSampler::new(
        &pulse.harmonics,
        &field,
        Frame::Rotating,
        hamiltonians::Envelope::Rectangular,
    );
    let period = 8.0 * std::f64::consts::PI / field.omega_q;
    let n = 4000;
    let mut acc = Operator::zeros(4);
    for k in 0..n {
        acc = &acc + &sampler.at((k as f64 + 0.5) * period / n as f64);
    }
    let avg = acc.scale(1.0 / n as f64);
    // Over a common period only the resonant single-quantum terms survive
    // to first order; the double-quantum element is second order.
    let sec = secular_average(&pulse, &field, 0.0).unwrap();
    assert!(avg.max_abs_diff(&sec) < 1e-9 * sec.max_abs());
}

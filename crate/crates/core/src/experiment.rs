//! Pulse-sequence engine: pseudopure preparation, selective pulses, Grover
//! pulses, amplitude and frequency calibration, and the four-step protocol.
//!
//! Every pulse can be applied in two modes. [`Mode::Effective`] uses the
//! secular Hamiltonian of the addressed transitions. [`Mode::Exact`]
//! integrates the full rotating-frame RF Hamiltonian, so off-resonant
//! driving, Bloch-Siegert and double-quantum Stark shifts are all present.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dynamics::{
    propagate_const, propagate_timedep, propagator_timedep, relax_between_steps, IntegrationPolicy,
    RelaxationParams, Scheme,
};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    dq_effective_amplitude, dq_lab_for_effective, grover_harmonics, secular_average,
    transition_table, Direction, Envelope, Frame, GroverPulse, Harmonic, RfSampler, StaticField,
    DQ_NUTATION_COEFF,
};
use crate::optimize::{first_local_max, golden_max, nelder_mead_min};
use crate::spectra::{stick_spectrum_at, PeakTable};
use crate::spin_ops::{
    expm_generator, fidelity, spin_three_halves, DeviationState, Operator, QuantumState,
    StateVector, C64, I,
};

/// `t_f = arccos(x) / (2 omega_f sqrt(1 - x^2))`, the time the Fenner
/// Hamiltonian needs to carry `|s>` onto `|w>` when `<s|w> = x`.
pub fn fenner_time(omega_f: f64, overlap_x: f64) -> Result<f64> {
    if !(omega_f > 0.0) || !omega_f.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "omega_f = {omega_f} must be positive"
        )));
    }
    if !(overlap_x > 0.0 && overlap_x <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "overlap {overlap_x} outside (0, 1]"
        )));
    }
    if overlap_x == 1.0 {
        return Ok(0.0);
    }
    Ok(overlap_x.acos() / (2.0 * omega_f * (1.0 - overlap_x * overlap_x).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Secular Hamiltonians only.
    Effective,
    /// Full time-dependent rotating-frame RF Hamiltonian.
    Exact,
}

/// RF phases over which a preparation pulse is repeated and averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseCycle {
    /// `{0, pi/2}`: cancels double-quantum coherence.
    TwoStep,
    /// `{0, pi/2, pi, 3pi/2}`: cancels single- and double-quantum coherence.
    FourStep,
}

impl PhaseCycle {
    pub fn from_size(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Self::TwoStep),
            4 => Ok(Self::FourStep),
            _ => Err(Error::InvalidParameter(format!(
                "phase cycle of {n} steps; use 2 or 4"
            ))),
        }
    }

    pub fn size(&self) -> usize {
        self.phases().len()
    }

    pub fn phases(&self) -> Vec<f64> {
        match self {
            Self::TwoStep => vec![0.0, FRAC_PI_2],
            Self::FourStep => vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2],
        }
    }
}

/// Field, mode and integrator shared by every pulse of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub field: StaticField,
    pub mode: Mode,
    pub policy: IntegrationPolicy,
}

impl Context {
    pub fn effective(field: StaticField) -> Self {
        Self {
            field,
            mode: Mode::Effective,
            policy: IntegrationPolicy::default(),
        }
    }

    pub fn exact(field: StaticField, policy: IntegrationPolicy) -> Self {
        Self {
            field,
            mode: Mode::Exact,
            policy,
        }
    }
}

/// Hermitian generator with `element` at `levels` and its conjugate.
fn pair_generator(levels: (usize, usize), element: C64) -> Operator {
    let (i, j) = levels;
    Operator::from_fn(4, |r, c| {
        if (r, c) == (i, j) {
            element
        } else if (r, c) == (j, i) {
            element.conj()
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .into_hermitian()
    .expect("built Hermitian")
}

fn sq_element(levels: (usize, usize), amplitude: f64, phase: f64) -> C64 {
    spin_three_halves().iy[levels] * amplitude * C64::from_polar(1.0, -phase)
}

fn dq_element(effective: f64, phase: f64) -> C64 {
    -C64::from_polar(effective, -2.0 * phase)
}

fn run_exact<S: QuantumState>(
    state: &S,
    harmonics: &[Harmonic],
    envelope: Envelope,
    duration: f64,
    ctx: &Context,
) -> Result<S> {
    let sampler = RfSampler::new(harmonics, &ctx.field, Frame::Rotating, envelope);
    let policy = ctx.policy.resolving(sampler.max_frequency());
    propagate_timedep(state, |t| sampler.at(t), 0.0, duration, &policy)
}

fn exact_propagator(
    harmonics: &[Harmonic],
    envelope: Envelope,
    duration: f64,
    field: &StaticField,
    policy: &IntegrationPolicy,
) -> Result<Operator> {
    let sampler = RfSampler::new(harmonics, field, Frame::Rotating, envelope);
    let policy = policy.resolving(sampler.max_frequency());
    propagator_timedep(|t| sampler.at(t), 0.0, duration, &policy)
}

fn transition_order(levels: (usize, usize), field: &StaticField) -> Result<u8> {
    transition_table(field)
        .get(levels)
        .map(|t| t.order)
        .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))
}

/// Peak lab amplitude of a Gaussian single-quantum pulse rotating the
/// effective spin-1/2 of `levels` by `angle`.
pub fn selective_peak_amplitude(levels: (usize, usize), angle: f64, duration: f64) -> f64 {
    let iy = spin_three_halves().iy[levels].norm();
    angle.abs() / (2.0 * iy * Envelope::Gaussian { duration }.area(duration))
}

/// Gaussian single-quantum pulse of `duration` rotating the populations of
/// `levels` by `angle`.
pub fn selective_pulse(
    state: &DeviationState,
    levels: (usize, usize),
    angle: f64,
    duration: f64,
    ctx: &Context,
) -> Result<DeviationState> {
    let table = transition_table(&ctx.field);
    let transition = table
        .get(levels)
        .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))?;
    if transition.order != 1 {
        return Err(Error::InvalidParameter(format!(
            "{levels:?} is not a single-quantum transition"
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} must be positive"
        )));
    }
    let separation = ctx.field.omega_q / 2.0;
    if separation * duration / 6.0 < 4.0 {
        return Err(Error::BandwidthViolation {
            duration,
            separation,
        });
    }
    if angle == 0.0 {
        return Ok(state.clone());
    }
    let peak = selective_peak_amplitude(transition.levels, angle, duration);
    let phase = if angle < 0.0 { PI } else { 0.0 };
    let envelope = Envelope::Gaussian { duration };
    match ctx.mode {
        Mode::Effective => {
            let h = pair_generator(
                transition.levels,
                sq_element(transition.levels, peak, phase),
            );
            Ok(state.rotated(&expm_generator(&h, envelope.area(duration))?))
        }
        Mode::Exact => {
            let harmonic = Harmonic::on_transition(transition, peak, phase)?;
            run_exact(state, &[harmonic], envelope, duration, ctx)
        }
    }
}

/// Result of [`prepare_pseudopure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pseudopure {
    pub state: DeviationState,
    /// `|rho_13|` left after the phase-cycled average.
    pub residual_coherence: f64,
    /// Fidelity to `2|00><00| - 1/2`.
    pub fidelity: f64,
    /// Calibrated peak DQ amplitude in exact mode, rad/s.
    pub dq_peak_amplitude: Option<f64>,
}

/// Levels addressed by the preparation pulse.
pub const PSEUDOPURE_LEVELS: (usize, usize) = (1, 3);

/// Double-quantum 90 degree pulse on `1 <-> 3`, repeated over `cycle` and
/// averaged. From `I_z` this equalizes the populations of levels 1 and 3
/// and leaves the excess on `|00>`.
pub fn prepare_pseudopure(
    eq: &DeviationState,
    duration: f64,
    cycle: PhaseCycle,
    ctx: &Context,
) -> Result<Pseudopure> {
    let levels = PSEUDOPURE_LEVELS;
    let table = transition_table(&ctx.field);
    let transition = *table.get(levels).expect("1-3 exists");
    let envelope = Envelope::Gaussian { duration };
    let dq_peak = match ctx.mode {
        Mode::Effective => None,
        Mode::Exact => {
            let cal =
                calibrate_amplitude_with(levels, duration, envelope, ctx, &ScanOptions::default())?;
            Some(cal.amplitude)
        }
    };
    let mut branches = Vec::with_capacity(cycle.size());
    for phase in cycle.phases() {
        let out = match dq_peak {
            None => {
                let h = pair_generator(levels, dq_element(1.0, phase));
                eq.rotated(&expm_generator(&h, FRAC_PI_4)?)
            }
            Some(peak) => {
                let harmonic = Harmonic::on_transition(&transition, peak, phase)?;
                run_exact(eq, &[harmonic], envelope, duration, ctx)?
            }
        };
        branches.push(out);
    }
    let state = DeviationState::average(&branches)?;
    let residual = state.operator()[levels].norm();
    let pops = state.populations();
    let excess = pops.iter().cloned().fold(f64::MIN, f64::max)
        - pops.iter().cloned().fold(f64::MAX, f64::min);
    if residual > 1e-3 * excess {
        return Err(Error::PhaseCycleIncomplete { residual });
    }
    let fid = fidelity(
        &state,
        &DeviationState::pseudopure(&StateVector::basis(4, 0)),
    )?;
    Ok(Pseudopure {
        state,
        residual_coherence: residual,
        fidelity: fid,
        dq_peak_amplitude: dq_peak,
    })
}

/// Amplitude scan settings for [`calibrate_amplitude_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Scan range as multiples of the first-order estimate.
    pub range: (f64, f64),
    pub points: usize,
    /// Relative tolerance of the golden-section refinement.
    pub rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            range: (0.5, 1.6),
            points: 45,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub levels: (usize, usize),
    pub duration: f64,
    /// Lab amplitude at the signal maximum, rad/s.
    pub amplitude: f64,
    /// `|rho_ij|` reached from `I_z`.
    pub signal: f64,
    /// Starting estimate the scan was centred on, rad/s.
    pub estimate: f64,
}

/// Amplitude that rotates the effective spin-1/2 of `levels` by 90 degrees
/// in `duration`, from the secular model (and the fitted DQ law).
pub fn amplitude_estimate(
    levels: (usize, usize),
    duration: f64,
    envelope: Envelope,
    field: &StaticField,
) -> Result<f64> {
    match transition_order(levels, field)? {
        1 => Ok(FRAC_PI_4 / (spin_three_halves().iy[levels].norm() * envelope.area(duration))),
        2 => Ok(
            (FRAC_PI_4 * field.omega_q / (DQ_NUTATION_COEFF * envelope.power_area(duration)))
                .sqrt(),
        ),
        _ => Err(Error::TripleQuantumRequired { target: levels.1 }),
    }
}

/// `|rho_ij|` after a single-frequency pulse on `levels` applied to `I_z`.
pub fn transverse_signal(
    levels: (usize, usize),
    amplitude: f64,
    duration: f64,
    envelope: Envelope,
    ctx: &Context,
) -> Result<f64> {
    let eq = DeviationState::equilibrium(4);
    let table = transition_table(&ctx.field);
    let transition = table
        .get(levels)
        .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))?;
    let out = match ctx.mode {
        Mode::Effective => {
            let (element, weight) = match transition.order {
                1 => (sq_element(levels, amplitude, 0.0), envelope.area(duration)),
                2 => (
                    dq_element(dq_effective_amplitude(amplitude, &ctx.field)?, 0.0),
                    envelope.power_area(duration),
                ),
                _ => return Err(Error::TripleQuantumRequired { target: levels.1 }),
            };
            eq.rotated(&expm_generator(&pair_generator(levels, element), weight)?)
        }
        Mode::Exact => {
            let harmonic = Harmonic::on_transition(transition, amplitude, 0.0)?;
            run_exact(&eq, &[harmonic], envelope, duration, ctx)?
        }
    };
    Ok(out.operator()[levels].norm())
}

/// Lab amplitude of a rectangular pulse of `duration` on `levels` that
/// maximizes the transverse signal of the effective spin-1/2.
pub fn calibrate_amplitude(levels: (usize, usize), duration: f64, ctx: &Context) -> Result<f64> {
    calibrate_amplitude_with(
        levels,
        duration,
        Envelope::Rectangular,
        ctx,
        &ScanOptions::default(),
    )
    .map(|c| c.amplitude)
}

/// Ascending amplitude scan for the first signal maximum, refined by
/// golden-section search.
pub fn calibrate_amplitude_with(
    levels: (usize, usize),
    duration: f64,
    envelope: Envelope,
    ctx: &Context,
    options: &ScanOptions,
) -> Result<Calibration> {
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} must be positive"
        )));
    }
    let (lo, hi) = options.range;
    if !(lo > 0.0 && hi > lo) || options.points < 3 {
        return Err(Error::InvalidParameter(
            "scan needs 0 < lo < hi and at least 3 points".into(),
        ));
    }
    let estimate = amplitude_estimate(levels, duration, envelope, &ctx.field)?;
    let amps: Vec<f64> = (0..options.points)
        .map(|k| estimate * (lo + (hi - lo) * k as f64 / (options.points - 1) as f64))
        .collect();
    let signals = amps
        .iter()
        .map(|&a| transverse_signal(levels, a, duration, envelope, ctx))
        .collect::<Result<Vec<_>>>()?;
    let k = first_local_max(&signals, 0.0).ok_or_else(|| {
        Error::CalibrationFailed(format!(
            "no signal maximum for {levels:?} between {:.3} and {:.3} Hz",
            crate::units::to_hz(amps[0]),
            crate::units::to_hz(amps[amps.len() - 1])
        ))
    })?;
    let (amplitude, signal) = golden_max(
        |a| transverse_signal(levels, a, duration, envelope, ctx),
        amps[k - 1],
        amps[k + 1],
        amps[k],
        options.rel_tol,
    )?;
    Ok(Calibration {
        levels,
        duration,
        amplitude,
        signal,
        estimate,
    })
}

/// Nutation rate of a double-quantum transition driven by one harmonic of
/// lab amplitude `lab_amplitude`, from the Floquet quasienergies of the
/// exact rotating-frame dynamics. Half the splitting of the two Floquet
/// states that live mostly on `levels`.
pub fn floquet_nutation_rate(
    levels: (usize, usize),
    lab_amplitude: f64,
    field: &StaticField,
    policy: &IntegrationPolicy,
) -> Result<f64> {
    let table = transition_table(field);
    let transition = table
        .get(levels)
        .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))?;
    if transition.order != 2 {
        return Err(Error::InvalidParameter(format!(
            "{levels:?} is not a double-quantum transition"
        )));
    }
    let harmonic = Harmonic::on_transition(transition, lab_amplitude, 0.0)?;
    // All rotating-frame frequencies are multiples of omega_q / 4.
    let period = 8.0 * PI / field.omega_q;
    let u = exact_propagator(&[harmonic], Envelope::Rectangular, period, field, policy)?;
    let k = (&u - &u.adjoint())
        .scale_complex(C64::new(0.0, -0.5))
        .into_hermitian()?;
    let eig = k.eigh()?;
    let mut states: Vec<(f64, f64)> = (0..4)
        .map(|c| {
            let v = eig.vectors.column(c);
            let uv = u.matrix() * v;
            let phase = v.dotc(&uv).arg();
            let weight = v[levels.0].norm_sqr() + v[levels.1].norm_sqr();
            (weight, -phase / period)
        })
        .collect();
    states.sort_by(|a, b| b.0.total_cmp(&a.0));
    let wrap = 2.0 * PI / period;
    let mut diff = (states[0].1 - states[1].1).rem_euclid(wrap);
    if diff > wrap / 2.0 {
        diff = wrap - diff;
    }
    Ok(diff / 2.0)
}

/// Fit of `rate = kappa * Omega^2 / omega_q` to Floquet nutation rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqFit {
    pub kappa: f64,
    pub max_relative_residual: f64,
    /// `(lab amplitude, exact rate)`, rad/s.
    pub samples: Vec<(f64, f64)>,
}

impl DqFit {
    pub fn predict(&self, lab_amplitude: f64, omega_q: f64) -> f64 {
        self.kappa * lab_amplitude * lab_amplitude / omega_q
    }
}

/// Relative least-squares fit of the double-quantum coefficient.
pub fn fit_dq_coefficient(
    levels: (usize, usize),
    field: &StaticField,
    amplitudes: &[f64],
    policy: &IntegrationPolicy,
) -> Result<DqFit> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidParameter("no amplitudes to fit".into()));
    }
    let samples = amplitudes
        .iter()
        .map(|&a| floquet_nutation_rate(levels, a, field, policy).map(|r| (a, r)))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = samples
        .iter()
        .map(|&(a, r)| a * a / field.omega_q / r)
        .collect();
    let kappa = ratios.iter().sum::<f64>() / ratios.iter().map(|q| q * q).sum::<f64>();
    let max_relative_residual = ratios
        .iter()
        .map(|q| (kappa * q - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DqFit {
        kappa,
        max_relative_residual,
        samples,
    })
}

fn check_target(target: usize) -> Result<()> {
    match target {
        1 | 2 => Ok(()),
        0 | 3 => Err(Error::TripleQuantumRequired { target }),
        _ => Err(Error::InvalidParameter(format!(
            "target {target} outside 0..4"
        ))),
    }
}

/// Propagator of a Grover pulse.
pub fn grover_propagator(pulse: &GroverPulse, ctx: &Context) -> Result<Operator> {
    check_target(pulse.target)?;
    match ctx.mode {
        Mode::Effective => expm_generator(
            &secular_average(pulse, &ctx.field, pulse.omega_f)?,
            pulse.duration,
        ),
        Mode::Exact => exact_propagator(
            &pulse.harmonics,
            Envelope::Rectangular,
            pulse.duration,
            &ctx.field,
            &ctx.policy,
        ),
    }
}

/// Applies a Grover pulse. The effective mode uses the secular Hamiltonian
/// with the double-quantum element set to `omega_f`.
pub fn grover_pulse<S: QuantumState>(state: &S, pulse: &GroverPulse, ctx: &Context) -> Result<S> {
    check_target(pulse.target)?;
    match ctx.mode {
        Mode::Effective => propagate_const(
            state,
            &secular_average(pulse, &ctx.field, pulse.omega_f)?,
            pulse.duration,
        ),
        Mode::Exact => run_exact(
            state,
            &pulse.harmonics,
            Envelope::Rectangular,
            pulse.duration,
            ctx,
        ),
    }
}

/// `|<end|U|start>|^2` for the transfer the pulse is meant to perform:
/// `|s> -> |w>` when direct, `|w> -> |s>` when inverse.
pub fn grover_success(pulse: &GroverPulse, ctx: &Context) -> Result<f64> {
    let u = grover_propagator(pulse, ctx)?;
    let s = StateVector::uniform(4);
    let w = StateVector::basis(4, pulse.target);
    let (start, end) = match pulse.direction {
        Direction::Direct => (s, w),
        Direction::Inverse => (w, s),
    };
    Ok(end.inner(&u.apply(&start)).norm_sqr())
}

/// Search settings for [`calibrate_grover_trims`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimOptions {
    /// Grid half-width in units of the double-quantum Stark scale
    /// `Omega_dq^2 / (omega_q / 4)`.
    pub span: f64,
    /// Grid points per single-quantum trim.
    pub grid: usize,
    /// `omega_max * dt` of the coarse integrator used during the search.
    pub coarse_phase_step: f64,
    pub max_iters: u64,
    /// Simplex searches started from the best grid points.
    pub starts: usize,
}

impl Default for TrimOptions {
    fn default() -> Self {
        Self {
            span: 3.0,
            grid: 9,
            coarse_phase_step: 0.3,
            max_iters: 400,
            starts: 3,
        }
    }
}

/// Outcome of [`calibrate_grover_trims`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmedPulse {
    pub pulse: GroverPulse,
    /// Transfer probability with the trims, exact dynamics.
    pub success: f64,
    /// Transfer probability of the nominal pulse.
    pub untrimmed_success: f64,
}

fn apply_trims(pulse: &GroverPulse, trims: &[f64], flip_dq: bool) -> GroverPulse {
    let mut out = pulse.clone();
    let mut sq = trims[..2].iter();
    for h in &mut out.harmonics {
        if h.order == 2 {
            h.trim = trims[2];
            if flip_dq {
                h.phase = (h.phase + PI).rem_euclid(2.0 * PI);
            }
        } else {
            h.trim = *sq.next().expect("two single-quantum harmonics");
        }
    }
    out
}

/// Frequency calibration of a Grover pulse against the exact dynamics.
///
/// The strong double-quantum harmonic shifts all four levels, so the two
/// single-quantum harmonics fall off resonance by a fraction of their own
/// Rabi frequency. The carrier offsets of all three harmonics, and the
/// `phi` vs `phi + pi` branch of the double-quantum phase (equivalent in the
/// secular model), are tuned to maximize the transfer probability.
pub fn calibrate_grover_trims(
    pulse: &GroverPulse,
    field: &StaticField,
    policy: &IntegrationPolicy,
    options: &TrimOptions,
) -> Result<TrimmedPulse> {
    check_target(pulse.target)?;
    let fine = Context::exact(*field, *policy);
    let sampler = RfSampler::new(
        &pulse.harmonics,
        field,
        Frame::Rotating,
        Envelope::Rectangular,
    );
    let coarse = Context::exact(
        *field,
        IntegrationPolicy {
            dt: options.coarse_phase_step / sampler.max_frequency().max(1.0),
            scheme: Scheme::Magnus4,
            convergence_check: false,
        },
    );
    let dq = pulse.double_quantum().lab_amplitude;
    let stark = (dq * dq / (field.omega_q / 4.0)).max(pulse.omega_f);
    let grid = options.grid.max(2);
    let step = 2.0 * options.span * stark / (grid - 1) as f64;
    let axis: Vec<f64> = (0..grid)
        .map(|k| -options.span * stark + k as f64 * step)
        .collect();

    let infidelity = |trims: &[f64], flip: bool, ctx: &Context| -> Result<f64> {
        Ok(1.0 - grover_success(&apply_trims(pulse, trims, flip), ctx)?)
    };

    let mut grid_costs = Vec::with_capacity(2 * grid * grid);
    for flip in [false, true] {
        for &a in &axis {
            for &b in &axis {
                grid_costs.push((infidelity(&[a, b, 0.0], flip, &coarse)?, [a, b, 0.0], flip));
            }
        }
    }
    grid_costs.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for &(_, start, flip) in grid_costs.iter().take(options.starts.max(1)) {
        let mut simplex = vec![start.to_vec()];
        for (axis_index, delta) in [(0, step / 2.0), (1, step / 2.0), (2, 0.1 * stark)] {
            let mut v = start.to_vec();
            v[axis_index] += delta;
            simplex.push(v);
        }
        let (p, cost) = nelder_mead_min(
            |p| infidelity(p, flip, &coarse),
            simplex,
            options.max_iters,
            1e-12,
        )?;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, p, flip));
        }
    }
    let (_, trims, flip) = best.expect("at least one start");
    let trimmed = apply_trims(pulse, &trims, flip);
    Ok(TrimmedPulse {
        success: grover_success(&trimmed, &fine)?,
        untrimmed_success: grover_success(pulse, &fine)?,
        pulse: trimmed,
    })
}

/// Builds the Grover pulse the protocol applies for `target`.
///
/// In effective mode the double-quantum lab amplitude comes from the fitted
/// nutation law. In exact mode it is calibrated with a rectangular pulse of
/// `calibration_duration`, and the carrier trims are then calibrated.
pub fn build_grover_pulse(
    target: usize,
    direction: Direction,
    omega_f: f64,
    duration: f64,
    calibration_duration: f64,
    ctx: &Context,
) -> Result<(GroverPulse, Option<TrimmedPulse>)> {
    check_target(target)?;
    let table = transition_table(&ctx.field);
    let dq_levels = if target == 2 { (0, 2) } else { (1, 3) };
    let dq_lab = match ctx.mode {
        Mode::Effective => dq_lab_for_effective(omega_f, &ctx.field),
        Mode::Exact => calibrate_amplitude(dq_levels, calibration_duration, ctx)?,
    };
    let pulse =
        grover_harmonics(target, omega_f, &table, dq_lab, direction)?.with_duration(duration);
    match ctx.mode {
        Mode::Effective => Ok((pulse, None)),
        Mode::Exact => {
            let trimmed =
                calibrate_grover_trims(&pulse, &ctx.field, &ctx.policy, &TrimOptions::default())?;
            Ok((trimmed.pulse.clone(), Some(trimmed)))
        }
    }
}

/// One point of the exact-versus-secular comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwaPoint {
    /// Factor applied to `omega_q`.
    pub scale: f64,
    pub dq_lab_amplitude: f64,
    pub untrimmed_success: f64,
    /// `|<w|U|s>|^2` of the trimmed pulse under the exact dynamics.
    pub success: f64,
    /// Pseudopure-deviation fidelity of the same transfer, `(4 p - 1) / 3`.
    pub deviation_fidelity: f64,
}

impl RwaPoint {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.success
    }
}

/// Exact Grover transfer `|s> -> |w_target>` as the quadrupole splitting is
/// scaled up.
///
/// The single-quantum amplitudes stay fixed. The double-quantum amplitude is
/// calibrated once at `scale = 1` and multiplied by `sqrt(scale)`, which keeps
/// its effective (second-order) amplitude fixed; the carrier trims are
/// recalibrated at every scale.
pub fn rwa_sweep(
    base: &StaticField,
    scales: &[f64],
    target: usize,
    omega_f: f64,
    calibration_duration: f64,
    policy: &IntegrationPolicy,
) -> Result<Vec<RwaPoint>> {
    check_target(target)?;
    if let Some(bad) = scales.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "scale {bad} must be positive"
        )));
    }
    let dq_levels = if target == 2 { (0, 2) } else { (1, 3) };
    let dq = calibrate_amplitude(
        dq_levels,
        calibration_duration,
        &Context::exact(*base, *policy),
    )?;
    scales
        .iter()
        .map(|&scale| {
            let field = base.with_scaled_splitting(scale)?;
            let pulse = grover_harmonics(
                target,
                omega_f,
                &transition_table(&field),
                dq * scale.sqrt(),
                Direction::Direct,
            )?;
            let trimmed = calibrate_grover_trims(&pulse, &field, policy, &TrimOptions::default())?;
            Ok(RwaPoint {
                scale,
                dq_lab_amplitude: pulse.double_quantum().lab_amplitude,
                untrimmed_success: trimmed.untrimmed_success,
                success: trimmed.success,
                deviation_fidelity: (4.0 * trimmed.success - 1.0) / 3.0,
            })
        })
        .collect()
}

/// One pulse of the protocol as applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub name: String,
    pub shape: Envelope,
    pub duration: f64,
    pub harmonics: Vec<Harmonic>,
    pub nominal_angle: f64,
    pub phase_cycle: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// `a` .. `e`.
    pub label: char,
    pub description: String,
    pub state: DeviationState,
    pub ideal: DeviationState,
    pub fidelity: f64,
    /// First-order line integrals after the monitoring pulse.
    pub sticks: PeakTable,
    /// Cumulative pulse time, seconds.
    pub elapsed: f64,
    /// `exp(-elapsed / T1)`, or 1 without relaxation.
    pub relaxation_factor: f64,
    pub segment: Option<PulseSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroverCalibrationRecord {
    pub step: char,
    pub target: usize,
    pub direction: Direction,
    pub dq_lab_amplitude: f64,
    pub untrimmed_success: f64,
    pub success: f64,
    /// Carrier trims in harmonic order, rad/s.
    pub trims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub mode: Mode,
    pub phase_cycle: PhaseCycle,
    pub final_target: usize,
    pub relaxation: RelaxationParams,
    pub monitor_angle: f64,
    pub pseudopure_residual: f64,
    pub dq_prep_peak_amplitude: Option<f64>,
    pub grover_calibration: Vec<GroverCalibrationRecord>,
    pub steps: Vec<StepRecord>,
    pub notes: Vec<String>,
}

impl PipelineReport {
    pub fn final_state(&self) -> &DeviationState {
        &self.steps.last().expect("five steps").state
    }

    pub fn step(&self, label: char) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.label == label)
    }
}

struct Recorder<'a> {
    config: &'a ExperimentConfig,
    field: StaticField,
    relax: RelaxationParams,
    eq: DeviationState,
    elapsed: f64,
    steps: Vec<StepRecord>,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        label: char,
        description: &str,
        state: DeviationState,
        ideal: DeviationState,
        segment: Option<PulseSegment>,
    ) -> Result<DeviationState> {
        let state = match &segment {
            Some(seg) => {
                self.elapsed += seg.duration;
                relax_between_steps(&state, seg.duration, &self.relax, &self.eq)?
            }
            None => state,
        };
        let fid = fidelity(&state, &ideal)?;
        if fid < self.config.fidelity_floor {
            return Err(Error::FidelityBelowFloor {
                step: format!("{label} ({description})"),
                fidelity: fid,
                floor: self.config.fidelity_floor,
            });
        }
        let relaxation_factor = if self.relax.enabled {
            (-self.elapsed / self.relax.t1).exp()
        } else {
            1.0
        };
        self.steps.push(StepRecord {
            label,
            description: description.to_string(),
            sticks: stick_spectrum_at(&state, &self.field, self.config.monitor_angle())?,
            state: state.clone(),
            ideal,
            fidelity: fid,
            elapsed: self.elapsed,
            relaxation_factor,
            segment,
        });
        Ok(state)
    }
}

/// thermal -> |00> -> |01> -> |s> -> |10>, or `|01>` as the last state when
/// the configured final target is 1.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineReport> {
    config.validate()?;
    let field = config.field()?;
    let ctx = Context {
        field,
        mode: config.mode,
        policy: config.policy(),
    };
    let relax = config.relaxation_params();
    let eq = DeviationState::equilibrium(4);
    let pure = |k: usize| DeviationState::pseudopure(&StateVector::basis(4, k));
    let uniform = DeviationState::pseudopure(&StateVector::uniform(4));
    let mut rec = Recorder {
        config,
        field,
        relax,
        eq: eq.clone(),
        elapsed: 0.0,
        steps: Vec::new(),
    };
    let mut notes = vec![format!(
        "pseudopure preparation uses the {}-step phase cycle {:?}; the cycle is a design default",
        config.phase_cycle.size(),
        config.phase_cycle.phases()
    )];
    if relax.enabled {
        notes.push(
            "relaxation acts for each pulse's duration; inter-pulse delays are taken as zero"
                .into(),
        );
    }

    rec.record('a', "thermal equilibrium", eq.clone(), eq.clone(), None)?;

    let table = transition_table(&field);
    let dq90 = config.dq90_duration();
    let pp = prepare_pseudopure(&eq, dq90, config.phase_cycle, &ctx)?;
    let prep_segment = PulseSegment {
        name: "DQ-90".into(),
        shape: Envelope::Gaussian { duration: dq90 },
        duration: dq90,
        harmonics: vec![Harmonic::on_transition(
            table.get(PSEUDOPURE_LEVELS).expect("exists"),
            pp.dq_peak_amplitude.unwrap_or(0.0),
            0.0,
        )?],
        nominal_angle: FRAC_PI_2,
        phase_cycle: config.phase_cycle.phases(),
    };
    let state = rec.record(
        'b',
        "pseudopure |00>",
        pp.state.clone(),
        pure(0),
        Some(prep_segment),
    )?;

    let sq180 = config.sq180_duration();
    let flipped = selective_pulse(&state, (0, 1), PI, sq180, &ctx)?;
    let sq_segment = PulseSegment {
        name: "SQ-180".into(),
        shape: Envelope::Gaussian { duration: sq180 },
        duration: sq180,
        harmonics: vec![Harmonic::on_transition(
            table.get((0, 1)).expect("exists"),
            selective_peak_amplitude((0, 1), PI, sq180),
            0.0,
        )?],
        nominal_angle: PI,
        phase_cycle: vec![0.0],
    };
    let state = rec.record('c', "|01>", flipped, pure(1), Some(sq_segment))?;

    let omega_f = config.omega_f();
    let grover_duration = config.grover_duration()?;
    let calibration_duration = config.t_pi2();
    let mut grover_calibration = Vec::new();
    let mut grover_step =
        |label: char, target: usize, direction: Direction, state: &DeviationState| {
            let (pulse, trimmed) = build_grover_pulse(
                target,
                direction,
                omega_f,
                grover_duration,
                calibration_duration,
                &ctx,
            )?;
            if let Some(t) = &trimmed {
                grover_calibration.push(GroverCalibrationRecord {
                    step: label,
                    target,
                    direction,
                    dq_lab_amplitude: pulse.double_quantum().lab_amplitude,
                    untrimmed_success: t.untrimmed_success,
                    success: t.success,
                    trims: pulse.harmonics.iter().map(|h| h.trim).collect(),
                });
            }
            let out = grover_pulse(state, &pulse, &ctx)?;
            let segment = PulseSegment {
                name: format!("{direction:?} Grover, target {target}"),
                shape: Envelope::Rectangular,
                duration: pulse.duration,
                harmonics: pulse.harmonics.clone(),
                nominal_angle: 0.0,
                phase_cycle: vec![0.0],
            };
            Ok::<_, Error>((out, segment))
        };

    let (out, seg) = grover_step('d', 1, Direction::Inverse, &state)?;
    let state = rec.record('d', "uniform |s>", out, uniform, Some(seg))?;

    let target = config.final_target;
    let (out, seg) = grover_step('e', target, Direction::Direct, &state)?;
    let description = if target == 2 {
        "marked |10>"
    } else {
        "marked |01>"
    };
    rec.record('e', description, out, pure(target), Some(seg))?;

    Ok(PipelineReport {
        mode: config.mode,
        phase_cycle: config.phase_cycle,
        final_target: target,
        relaxation: relax,
        monitor_angle: config.monitor_angle(),
        pseudopure_residual: pp.residual_coherence,
        dq_prep_peak_amplitude: pp.dq_peak_amplitude,
        grover_calibration,
        steps: rec.steps,
        notes,
    })
}

/// Unitary of an ideal rotation by `angle` about an in-plane axis at
/// `phase` on the effective spin-1/2 of `levels`.
pub fn ideal_rotation(levels: (usize, usize), angle: f64, phase: f64) -> Result<Operator> {
    let element = C64::from_polar(0.5, -phase) * -I;
    expm_generator(&pair_generator(levels, element), angle)
}

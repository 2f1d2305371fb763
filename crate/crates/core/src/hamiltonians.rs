//! Static, RF and effective Hamiltonians of a spin-3/2 nucleus with a
//! first-order quadrupole splitting, and the Fenner search Hamiltonian.
//!
//! Frequencies are angular (rad/s) and `hbar = 1`. The RF field is written
//! as `2 * sum_k Omega_k cos(w_k t + phi_k) I_y`, so on resonance each
//! harmonic contributes `Omega_k <i|I_y|j>` to the interaction-frame
//! Hamiltonian.
//!
//! Two interaction frames are available. [`Frame::Rotating`] drops the
//! counter-rotating terms at twice the Zeeman frequency; [`Frame::Lab`] keeps
//! them and is only practical for artificially small Zeeman frequencies.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::spin_ops::{spin_three_halves, Operator, StateVector, C64, I};

/// Smallest `omega_z / omega_q` accepted for physical runs.
pub const MIN_ZEEMAN_RATIO: f64 = 100.0;

/// Coefficient `kappa` of the double-quantum nutation law
/// `Omega_eff = kappa * Omega_lab^2 / omega_q`.
///
/// Relative least-squares fit of the Floquet nutation rate of the exact
/// rotating-frame dynamics at `omega_q / 2pi = 10840 Hz` over
/// `Omega_lab / 2pi` in `100..=500 Hz` (see `experiment::fit_dq_coefficient`).
/// Largest relative residual of the fit: 2.9e-2, at 500 Hz. The
/// second-order perturbative value is `2 sqrt(3) = 3.4641`.
pub const DQ_NUTATION_COEFF: f64 = 3.3841;

/// Level-energy offsets of the four Zeeman levels in the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticField {
    /// Zeeman frequency, rad/s.
    pub omega_z: f64,
    /// Full quadrupole splitting, rad/s. The satellites sit at `+/- omega_q / 2`.
    pub omega_q: f64,
}

impl StaticField {
    /// High-field case, `omega_z >= 100 omega_q`.
    pub fn new(omega_z: f64, omega_q: f64) -> Result<Self> {
        let field = Self::artificial(omega_z, omega_q)?;
        if omega_z < MIN_ZEEMAN_RATIO * omega_q {
            return Err(Error::InvalidParameter(format!(
                "omega_z / omega_q = {} is below {MIN_ZEEMAN_RATIO}",
                omega_z / omega_q
            )));
        }
        Ok(field)
    }

    /// Any positive pair; used for convergence studies.
    pub fn artificial(omega_z: f64, omega_q: f64) -> Result<Self> {
        if !(omega_z > 0.0 && omega_q > 0.0) || !omega_z.is_finite() || !omega_q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "field frequencies must be positive (omega_z = {omega_z}, omega_q = {omega_q})"
            )));
        }
        Ok(Self { omega_z, omega_q })
    }

    pub fn from_hz(zeeman_hz: f64, quadrupole_hz: f64) -> Result<Self> {
        Self::new(crate::units::hz(zeeman_hz), crate::units::hz(quadrupole_hz))
    }

    /// Same Zeeman frequency, quadrupole splitting multiplied by `factor`.
    pub fn with_scaled_splitting(&self, factor: f64) -> Result<Self> {
        Self::artificial(self.omega_z, self.omega_q * factor)
    }

    /// `eps_0 .. eps_3`.
    pub fn energies(&self) -> [f64; 4] {
        let q = self.quadrupole_energies();
        let z = self.omega_z;
        [
            -1.5 * z + q[0],
            -0.5 * z + q[1],
            0.5 * z + q[2],
            1.5 * z + q[3],
        ]
    }

    /// `omega_q [I_z^2 - I(I+1)/3] / 4` on the diagonal.
    pub fn quadrupole_energies(&self) -> [f64; 4] {
        let q = self.omega_q / 4.0;
        [q, -q, -q, q]
    }
}

/// `H_0 = -omega_z I_z + omega_q [I_z^2 - I(I+1)/3] / 4`.
pub fn static_hamiltonian(field: &StaticField) -> Operator {
    Operator::diagonal(&field.energies())
}

/// Quadrupole part of `H_0`, i.e. `H_0` in the Zeeman rotating frame.
pub fn quadrupole_hamiltonian(field: &StaticField) -> Operator {
    Operator::diagonal(&field.quadrupole_energies())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub levels: (usize, usize),
    pub order: u8,
    /// Resonance frequency relative to the Zeeman carrier, rad/s.
    pub offset: f64,
}

/// All six transitions of the four-level system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub entries: [Transition; 6],
}

impl TransitionTable {
    pub fn get(&self, levels: (usize, usize)) -> Option<&Transition> {
        let key = (levels.0.min(levels.1), levels.0.max(levels.1));
        self.entries.iter().find(|t| t.levels == key)
    }

    pub fn offset(&self, levels: (usize, usize)) -> Result<f64> {
        self.get(levels)
            .map(|t| t.offset)
            .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))
    }
}

/// Carrier offsets from the level energies. A `p`-quantum transition
/// between `i` and `j` is driven at `(eps_i - eps_j) / p`.
pub fn transition_table(field: &StaticField) -> TransitionTable {
    let eps = field.energies();
    let entry = |i: usize, j: usize| {
        let order = (j - i) as u8;
        let lab = (eps[i] - eps[j]) / order as f64;
        Transition {
            levels: (i, j),
            order,
            offset: lab + field.omega_z,
        }
    };
    TransitionTable {
        entries: [
            entry(0, 1),
            entry(1, 2),
            entry(2, 3),
            entry(0, 2),
            entry(1, 3),
            entry(0, 3),
        ],
    }
}

/// `H = 2 omega_f i (|w_t><s| - |s><w_t|)` on `dim` levels.
pub fn fenner_hamiltonian(dim: usize, target: usize, omega_f: f64) -> Result<Operator> {
    if dim < 2 || target >= dim {
        return Err(Error::InvalidParameter(format!(
            "target {target} outside 0..{dim}"
        )));
    }
    if !(omega_f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega_f = {omega_f} must be positive"
        )));
    }
    let w = StateVector::basis(dim, target);
    let s = StateVector::uniform(dim);
    let a = Operator::outer(&w, &s);
    let h = (&a - &a.adjoint()).scale_complex(I * (2.0 * omega_f));
    h.into_hermitian()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Direct,
    Inverse,
}

/// One carrier component of a multi-frequency RF pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub levels: (usize, usize),
    /// Nominal resonance offset from the Zeeman carrier, rad/s.
    pub offset: f64,
    /// `Omega`, rad/s.
    pub lab_amplitude: f64,
    /// `phi`, rad.
    pub phase: f64,
    pub order: u8,
    /// Calibrated frequency correction added to `offset`, rad/s. The secular
    /// model ignores it.
    pub trim: f64,
}

impl Harmonic {
    pub fn on_transition(t: &Transition, lab_amplitude: f64, phase: f64) -> Result<Self> {
        if !(lab_amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lab amplitude {lab_amplitude} must be non-negative"
            )));
        }
        if t.order > 2 {
            return Err(Error::TripleQuantumRequired { target: t.levels.1 });
        }
        Ok(Self {
            levels: t.levels,
            offset: t.offset,
            lab_amplitude,
            phase,
            order: t.order,
            trim: 0.0,
        })
    }

    /// Carrier frequency actually applied, relative to the Zeeman carrier.
    pub fn applied_offset(&self) -> f64 {
        self.offset + self.trim
    }
}

/// Three-harmonic pulse realizing the Fenner Hamiltonian for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroverPulse {
    pub harmonics: Vec<Harmonic>,
    /// `t_f`, seconds.
    pub duration: f64,
    pub target: usize,
    pub direction: Direction,
    /// Fenner constant the amplitudes were matched to, rad/s.
    pub omega_f: f64,
}

impl GroverPulse {
    pub fn double_quantum(&self) -> &Harmonic {
        self.harmonics
            .iter()
            .find(|h| h.order == 2)
            .expect("validated on construction")
    }

    /// Same harmonics with every phase shifted so the secular Hamiltonian
    /// changes sign: a `p`-quantum term picks up `p` times the RF phase, so
    /// single-quantum harmonics move by `pi` and the double-quantum one by
    /// `pi/2`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for h in &mut out.harmonics {
            h.phase = wrap_phase(h.phase + PI / h.order as f64);
        }
        out.direction = match self.direction {
            Direction::Direct => Direction::Inverse,
            Direction::Inverse => Direction::Direct,
        };
        out
    }

    /// Copy with `duration` replaced.
    pub fn with_duration(&self, duration: f64) -> Self {
        Self {
            duration,
            ..self.clone()
        }
    }
}

fn wrap_phase(phi: f64) -> f64 {
    phi.rem_euclid(2.0 * PI)
}

/// Transitions driven for each realizable target: `(dq, sq_a, sq_b)`.
fn grover_transitions(target: usize) -> Result<[(usize, usize); 3]> {
    match target {
        2 => Ok([(0, 2), (1, 2), (2, 3)]),
        1 => Ok([(1, 3), (0, 1), (1, 2)]),
        0 | 3 => Err(Error::TripleQuantumRequired { target }),
        _ => Err(Error::InvalidParameter(format!(
            "target {target} outside 0..4"
        ))),
    }
}

/// Builds the three-harmonic pulse for `target` with amplitudes matched so
/// every nonzero secular element equals `omega_f`, and phases found by
/// exhaustive search against the Fenner sign pattern.
pub fn grover_harmonics(
    target: usize,
    omega_f: f64,
    table: &TransitionTable,
    dq_lab_amplitude: f64,
    direction: Direction,
) -> Result<GroverPulse> {
    let [dq, sq_a, sq_b] = grover_transitions(target)?;
    let iy = spin_three_halves().iy;
    let sq_amp = |levels: (usize, usize)| omega_f / iy[levels].norm();

    let wanted = fenner_hamiltonian(4, target, omega_f)?;
    let sq_phases = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    let dq_phases: Vec<f64> = (0..8).map(|k| k as f64 * FRAC_PI_4).collect();

    let build = |phi_dq: f64, phi_a: f64, phi_b: f64| -> Result<Vec<Harmonic>> {
        Ok(vec![
            Harmonic::on_transition(lookup(table, dq)?, dq_lab_amplitude, phi_dq)?,
            Harmonic::on_transition(lookup(table, sq_a)?, sq_amp(sq_a), phi_a)?,
            Harmonic::on_transition(lookup(table, sq_b)?, sq_amp(sq_b), phi_b)?,
        ])
    };

    for &phi_dq in &dq_phases {
        for &phi_a in &sq_phases {
            for &phi_b in &sq_phases {
                let harmonics = build(phi_dq, phi_a, phi_b)?;
                let secular = secular_matrix(&harmonics, omega_f);
                if secular.max_abs_diff(&wanted) <= 1e-12 * omega_f {
                    let pulse = GroverPulse {
                        harmonics,
                        duration: crate::experiment::fenner_time(omega_f, 0.5)?,
                        target,
                        direction: Direction::Direct,
                        omega_f,
                    };
                    return Ok(match direction {
                        Direction::Direct => pulse,
                        Direction::Inverse => pulse.reversed(),
                    });
                }
            }
        }
    }
    Err(Error::CalibrationFailed(format!(
        "no phase set reproduces the Fenner pattern for target {target}"
    )))
}

fn lookup(table: &TransitionTable, levels: (usize, usize)) -> Result<&Transition> {
    table
        .get(levels)
        .ok_or_else(|| Error::InvalidParameter(format!("no transition {levels:?}")))
}

/// Secular (time-averaged) RF Hamiltonian for on-resonance harmonics.
///
/// A single-quantum harmonic adds `Omega <i|I_y|j> e^{-i phi}` at `(i, j)`.
/// A double-quantum harmonic adds `-dq_effective e^{-2 i phi}` at
/// `(i, i + 2)`, the sign and phase of the second-order coupling through the
/// intermediate level.
pub fn secular_matrix(harmonics: &[Harmonic], dq_effective: f64) -> Operator {
    let iy = spin_three_halves().iy;
    let mut m = nalgebra::DMatrix::<C64>::zeros(4, 4);
    for h in harmonics {
        let (i, j) = h.levels;
        let element = match h.order {
            1 => iy[(i, j)] * h.lab_amplitude * C64::from_polar(1.0, -h.phase),
            _ => -C64::from_polar(dq_effective, -2.0 * h.phase),
        };
        m[(i, j)] += element;
        m[(j, i)] += element.conj();
    }
    Operator::hermitian(m).expect("built Hermitian")
}

/// Checks resonance against `field` and returns the secular Hamiltonian.
pub fn secular_average(
    pulse: &GroverPulse,
    field: &StaticField,
    dq_effective: f64,
) -> Result<Operator> {
    let table = transition_table(field);
    for h in &pulse.harmonics {
        let expected = table.offset(h.levels)?;
        let mismatch = (h.offset - expected).abs();
        if mismatch > 1e-6 * field.omega_q {
            return Err(Error::OffResonant {
                levels: h.levels,
                mismatch,
            });
        }
    }
    Ok(secular_matrix(&pulse.harmonics, dq_effective))
}

/// Interaction frame used for time-dependent RF Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Zeeman rotating frame; counter-rotating `2 omega_z` terms dropped.
    Rotating,
    /// Full interaction representation of `H_0`.
    Lab,
}

/// Amplitude envelope of an RF pulse, peak value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Envelope {
    Rectangular,
    /// Truncated at `+/- 3 sigma` with `sigma = duration / 6`.
    Gaussian {
        duration: f64,
    },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Rectangular => 1.0,
            Envelope::Gaussian { duration } => {
                let sigma = duration / 6.0;
                let x = (t - duration / 2.0) / sigma;
                (-0.5 * x * x).exp()
            }
        }
    }

    /// `integral_0^duration envelope(t) dt`.
    pub fn area(&self, duration: f64) -> f64 {
        match *self {
            Envelope::Rectangular => duration,
            Envelope::Gaussian { duration: d } => {
                let sigma = d / 6.0;
                sigma * (2.0 * PI).sqrt() * erf(3.0 / std::f64::consts::SQRT_2)
            }
        }
    }

    /// `integral_0^duration envelope(t)^2 dt`, the weight of a second-order
    /// (double-quantum) process.
    pub fn power_area(&self, duration: f64) -> f64 {
        match *self {
            Envelope::Rectangular => duration,
            Envelope::Gaussian { duration: d } => d / 6.0 * PI.sqrt() * erf(3.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct RfTerm {
    row: usize,
    coeff: C64,
    freq: f64,
}

/// Precomputed time-dependent RF Hamiltonian `H(t)` in an interaction frame.
///
/// Element `(i, i + 1)` is
/// `<i|I_y|i+1> env(t) sum_k Omega_k e^{-i phi_k} e^{i (off_{i,i+1} - delta_k) t}`
/// in the rotating frame; the lab frame adds the counter-rotating partners
/// at `-2 omega_z + off_{i,i+1} + delta_k`.
#[derive(Debug, Clone)]
pub struct RfSampler {
    terms: Vec<RfTerm>,
    envelope: Envelope,
}

impl RfSampler {
    pub fn new(
        harmonics: &[Harmonic],
        field: &StaticField,
        frame: Frame,
        envelope: Envelope,
    ) -> Self {
        let iy = spin_three_halves().iy;
        let table = transition_table(field);
        let mut terms = Vec::new();
        for row in 0..3 {
            let pair_offset = table.entries[row].offset;
            let element = iy[(row, row + 1)];
            for h in harmonics {
                let delta = h.applied_offset();
                terms.push(RfTerm {
                    row,
                    coeff: element * h.lab_amplitude * C64::from_polar(1.0, -h.phase),
                    freq: pair_offset - delta,
                });
                if frame == Frame::Lab {
                    terms.push(RfTerm {
                        row,
                        coeff: element * h.lab_amplitude * C64::from_polar(1.0, h.phase),
                        freq: -2.0 * field.omega_z + pair_offset + delta,
                    });
                }
            }
        }
        Self { terms, envelope }
    }

    /// Largest frequency present, rad/s.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.freq.abs()).fold(0.0, f64::max)
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    pub fn at(&self, t: f64) -> Operator {
        let mut upper = [C64::new(0.0, 0.0); 3];
        for term in &self.terms {
            upper[term.row] += term.coeff * C64::from_polar(1.0, term.freq * t);
        }
        let env = self.envelope.value(t);
        let mut m = nalgebra::DMatrix::<C64>::zeros(4, 4);
        for (row, v) in upper.iter().enumerate() {
            m[(row, row + 1)] = v * env;
            m[(row + 1, row)] = v.conj() * env;
        }
        Operator::with_role(m, crate::spin_ops::Role::Hermitian)
    }
}

/// Exact RF Hamiltonian `U_0^dagger(t) H_1(t) U_0(t)` at time `t`.
pub fn interaction_frame_rf(
    harmonics: &[Harmonic],
    field: &StaticField,
    frame: Frame,
    t: f64,
) -> Operator {
    RfSampler::new(harmonics, field, frame, Envelope::Rectangular).at(t)
}

/// Perturbative double-quantum nutation rate `kappa Omega^2 / omega_q`.
pub fn dq_effective_amplitude(dq_lab: f64, field: &StaticField) -> Result<f64> {
    let limit = field.omega_q / 4.0;
    if dq_lab > limit {
        return Err(Error::PerturbativeRegime {
            amplitude: dq_lab,
            limit,
        });
    }
    if !(dq_lab >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "amplitude {dq_lab} must be non-negative"
        )));
    }
    Ok(DQ_NUTATION_COEFF * dq_lab * dq_lab / field.omega_q)
}

/// Lab amplitude whose perturbative nutation rate is `omega_eff`.
pub fn dq_lab_for_effective(omega_eff: f64, field: &StaticField) -> f64 {
    (omega_eff * field.omega_q / DQ_NUTATION_COEFF).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz;

    fn sodium_field() -> StaticField {
        StaticField::from_hz(105.79e6, 10840.0).unwrap()
    }

    #[test]
    fn static_hamiltonian_structure() {
        let f = sodium_field();
        let h = static_hamiltonian(&f);
        assert!(h.trace().norm() < 1e-6);
        let q = quadrupole_hamiltonian(&f);
        let w = f.omega_q / 4.0;
        let d: Vec<f64> = (0..4).map(|k| q[(k, k)].re).collect();
        assert_eq!(d, vec![w, -w, -w, w]);
        // Zeeman term removed leaves the quadrupole part.
        let iz = spin_three_halves().iz;
        let rest = &h + &iz.scale(f.omega_z);
        assert!(rest.max_abs_diff(&q) < 1e-6);
    }

    #[test]
    fn transition_offsets() {
        let f = sodium_field();
        let t = transition_table(&f);
        let wq = f.omega_q;
        let expect = [
            ((0, 1), wq / 2.0),
            ((1, 2), 0.0),
            ((2, 3), -wq / 2.0),
            ((0, 2), wq / 4.0),
            ((1, 3), -wq / 4.0),
            ((0, 3), 0.0),
        ];
        for (levels, off) in expect {
            assert!(
                (t.offset(levels).unwrap() - off).abs() < 1e-6 * wq,
                "{levels:?}"
            );
        }
        assert!((t.offset((0, 1)).unwrap() - hz(5420.0)).abs() < 1e-6);
        assert_eq!(t.get((0, 3)).unwrap().order, 3);
    }

    #[test]
    fn static_field_validation() {
        assert!(StaticField::new(1e3, 1e2).is_err());
        assert!(StaticField::artificial(1e3, 1e2).is_ok());
        assert!(StaticField::artificial(-1.0, 1.0).is_err());
        assert!(StaticField::artificial(1.0, 0.0).is_err());
    }

    #[test]
    fn fenner_matrix_for_target_2() {
        let wf = 392.699;
        let h = fenner_hamiltonian(4, 2, wf).unwrap();
        for r in [0, 1, 3] {
            assert!((h[(r, 2)] - C64::new(0.0, -wf)).norm() < 1e-12);
            assert!((h[(2, r)] - C64::new(0.0, wf)).norm() < 1e-12);
        }
        for k in 0..4 {
            assert!(h[(k, k)].norm() < 1e-12);
        }
        for (r, c) in [(0, 1), (0, 3), (1, 3)] {
            assert!(h[(r, c)].norm() < 1e-12);
        }
    }

    #[test]
    fn fenner_equals_commutator_of_oracle_and_driver() {
        // i c [|w><w|, |s><s|] = i c x (|w><s| - |s><w|), so c x = 2 omega_f.
        for (n, t) in [(4usize, 2usize), (4, 0), (9, 5), (16, 15)] {
            let wf = 250.0;
            let x = 1.0 / (n as f64).sqrt();
            let c = 2.0 * wf / x;
            let pw = Operator::projector(&StateVector::basis(n, t));
            let ps = Operator::projector(&StateVector::uniform(n));
            let comm = pw.commutator(&ps).scale_complex(I * c);
            let h = fenner_hamiltonian(n, t, wf).unwrap();
            assert!(comm.max_abs_diff(&h) < 1e-10, "n={n}");
            assert!(h[(t, t)].norm() < 1e-12);
        }
    }

    #[test]
    fn grover_harmonics_reproduce_fenner_matrix() {
        let f = sodium_field();
        let table = transition_table(&f);
        let wf = hz(62.5);
        for target in [1, 2] {
            let pulse = grover_harmonics(target, wf, &table, hz(450.0), Direction::Direct).unwrap();
            let sec = secular_average(&pulse, &f, wf).unwrap();
            let want = fenner_hamiltonian(4, target, wf).unwrap();
            assert!(
                sec.max_abs_diff(&want) < 1e-12 * wf.max(1.0),
                "target {target}"
            );
            assert_eq!(pulse.harmonics.iter().filter(|h| h.order == 2).count(), 1);

            let inv = grover_harmonics(target, wf, &table, hz(450.0), Direction::Inverse).unwrap();
            let sec_inv = secular_average(&inv, &f, wf).unwrap();
            assert!(sec_inv.max_abs_diff(&(-&want)) < 1e-12 * wf);
        }
        let p2 = grover_harmonics(2, wf, &table, hz(450.0), Direction::Direct).unwrap();
        let amp = |levels| {
            p2.harmonics
                .iter()
                .find(|h| h.levels == levels)
                .unwrap()
                .lab_amplitude
        };
        assert!((amp((1, 2)) / hz(1.0) - 62.5).abs() < 1e-9);
        assert!((amp((2, 3)) / hz(1.0) - 72.1688).abs() < 1e-4);
    }

    #[test]
    fn triple_quantum_targets_rejected() {
        let table = transition_table(&sodium_field());
        for target in [0, 3] {
            assert!(matches!(
                grover_harmonics(target, 1.0, &table, 1.0, Direction::Direct),
                Err(Error::TripleQuantumRequired { .. })
            ));
        }
    }

    #[test]
    fn secular_single_harmonic_and_zero_amplitudes() {
        let f = sodium_field();
        let table = transition_table(&f);
        let h23 = Harmonic::on_transition(table.get((2, 3)).unwrap(), 100.0, 0.0).unwrap();
        let m = secular_matrix(&[h23], 0.0);
        let mag = 3f64.sqrt() / 2.0 * 100.0;
        assert!((m[(2, 3)].norm() - mag).abs() < 1e-12);
        assert!((m[(3, 2)].norm() - mag).abs() < 1e-12);
        let others: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| !matches!((i, j), (2, 3) | (3, 2)))
            .map(|(i, j)| m[(i, j)].norm())
            .sum();
        assert_eq!(others, 0.0);

        let pulse = grover_harmonics(2, 1.0, &table, 0.0, Direction::Direct).unwrap();
        let mut zero = pulse.clone();
        zero.harmonics
            .iter_mut()
            .for_each(|h| h.lab_amplitude = 0.0);
        assert_eq!(secular_average(&zero, &f, 0.0).unwrap().max_abs(), 0.0);
        assert_eq!(
            interaction_frame_rf(&zero.harmonics, &f, Frame::Rotating, 1e-4).max_abs(),
            0.0
        );
    }

    #[test]
    fn off_resonant_harmonic_rejected() {
        let f = sodium_field();
        let mut pulse =
            grover_harmonics(2, 10.0, &transition_table(&f), 100.0, Direction::Direct).unwrap();
        pulse.harmonics[1].offset += 1e-3 * f.omega_q;
        assert!(matches!(
            secular_average(&pulse, &f, 10.0),
            Err(Error::OffResonant { .. })
        ));
    }

    #[test]
    fn lab_frame_has_co_and_counter_rotating_parts() {
        let f = StaticField::artificial(hz(2.0e5), hz(10840.0)).unwrap();
        let table = transition_table(&f);
        let omega = 300.0;
        let phi = 0.3;
        let h = Harmonic::on_transition(table.get((1, 2)).unwrap(), omega, phi).unwrap();
        let t = 3.7e-5;
        let m = interaction_frame_rf(&[h], &f, Frame::Lab, t);
        let w12 = f.energies()[1] - f.energies()[2];
        let iy12 = spin_three_halves().iy[(1, 2)];
        let want =
            iy12 * omega * (C64::from_polar(1.0, -phi) + C64::from_polar(1.0, 2.0 * w12 * t + phi));
        assert!((m[(1, 2)] - want).norm() < 1e-9);
        let rot = interaction_frame_rf(&[h], &f, Frame::Rotating, t);
        assert!((rot[(1, 2)] - iy12 * omega * C64::from_polar(1.0, -phi)).norm() < 1e-12);
    }

    #[test]
    fn time_average_of_rotating_frame_converges_to_secular() {
        let f = sodium_field();
        let table = transition_table(&f);
        let harmonics = [
            Harmonic::on_transition(table.get((1, 2)).unwrap(), hz(62.5), 0.0).unwrap(),
            Harmonic::on_transition(table.get((2, 3)).unwrap(), hz(72.17), PI).unwrap(),
        ];
        let period = 2.0 * PI / f.omega_q;
        let span = 100.0 * period;
        let n = 200_000;
        let mut acc = Operator::zeros(4);
        for k in 0..n {
            let t = (k as f64 + 0.5) * span / n as f64;
            acc = &acc + &interaction_frame_rf(&harmonics, &f, Frame::Rotating, t);
        }
        let avg = acc.scale(1.0 / n as f64);
        let sec = secular_matrix(&harmonics, 0.0);
        assert!(avg.max_abs_diff(&sec) <= 1e-3 * sec.max_abs());
    }

    #[test]
    fn dq_effective_scaling() {
        let f = sodium_field();
        let a = dq_effective_amplitude(hz(100.0), &f).unwrap();
        let b = dq_effective_amplitude(hz(200.0), &f).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        assert_eq!(dq_effective_amplitude(0.0, &f).unwrap(), 0.0);
        let small = dq_effective_amplitude(1e-3, &f).unwrap();
        assert!(small < 1e-9);
        let rate = dq_effective_amplitude(hz(458.5), &f).unwrap() / hz(1.0);
        assert!((rate - 62.5).abs() / 62.5 < 0.2, "{rate}");
        assert!(matches!(
            dq_effective_amplitude(f.omega_q / 4.0 * 1.01, &f),
            Err(Error::PerturbativeRegime { .. })
        ));
        let back = dq_lab_for_effective(hz(62.5), &f);
        assert!((dq_effective_amplitude(back, &f).unwrap() - hz(62.5)).abs() < 1e-9);
    }

    #[test]
    fn gaussian_area_matches_quadrature() {
        let d = 1.5e-3;
        let env = Envelope::Gaussian { duration: d };
        let n = 100_000;
        let q: f64 = (0..n)
            .map(|k| env.value((k as f64 + 0.5) * d / n as f64))
            .sum::<f64>()
            * d
            / n as f64;
        assert!((q - env.area(d)).abs() < 1e-10);
        let q2: f64 = (0..n)
            .map(|k| env.value((k as f64 + 0.5) * d / n as f64).powi(2))
            .sum::<f64>()
            * d
            / n as f64;
        assert!((q2 - env.power_area(d)).abs() < 1e-10);
        assert!((env.value(d / 2.0) - 1.0).abs() < 1e-15);
    }
}

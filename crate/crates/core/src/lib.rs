//! Continuous-time Grover search on the four Zeeman levels of a spin-3/2
//! nucleus with a first-order quadrupole splitting.
//!
//! The crate covers the Hamiltonian engineering that turns a three-frequency
//! RF pulse into the Fenner search Hamiltonian, the pulse protocol that
//! prepares, inverts and re-searches pseudopure states, the spectra an NMR
//! experiment would record after each step, and a scaling study of the
//! search time in `N` dimensions.
//!
//! ```
//! use analog_grover::{fenner_hamiltonian, fenner_time, propagate_const, fidelity, StateVector};
//! use analog_grover::units::hz;
//!
//! let omega_f = hz(62.5);
//! let h = fenner_hamiltonian(4, 2, omega_f).unwrap();
//! let t = fenner_time(omega_f, 0.5).unwrap();
//! let out = propagate_const(&StateVector::uniform(4), &h, t).unwrap();
//! assert!(fidelity(&out, &StateVector::basis(4, 2)).unwrap() > 1.0 - 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hamiltonians;
mod optimize;
pub mod output;
pub mod scaling;
pub mod spectra;
pub mod spin_ops;

pub use config::ExperimentConfig;
pub use dynamics::{
    propagate_const, propagate_timedep, propagator_timedep, relax_between_steps, IntegrationPolicy,
    RelaxationParams, Scheme,
};
pub use error::{Error, Result};
pub use experiment::{
    calibrate_amplitude, calibrate_grover_trims, fenner_time, grover_pulse, prepare_pseudopure,
    run_pipeline, rwa_sweep, selective_pulse, Mode, PhaseCycle, PipelineReport, RwaPoint,
};
pub use hamiltonians::{
    dq_effective_amplitude, fenner_hamiltonian, grover_harmonics, interaction_frame_rf,
    secular_average, static_hamiltonian, transition_table, Direction, Frame, GroverPulse, Harmonic,
    StaticField, TransitionTable,
};
pub use scaling::{
    farhi_gutmann_hamiltonian, fenner_general, scaling_study, time_to_target, Family,
    SearchInstance,
};
pub use spectra::{
    monitor_pulse, spectrum, stick_spectrum, synthesize_fid, Fid, PeakTable, Spectrum,
};
pub use spin_ops::{
    expm_generator, fidelity, spin_matrices, DeviationState, Operator, QuantumState, SpinMatrices,
    StateVector,
};

/// Conversions between cyclic (Hz) and angular (rad/s) frequencies.
pub mod units {
    use std::f64::consts::TAU;

    /// Hz to rad/s.
    pub fn hz(f: f64) -> f64 {
        TAU * f
    }

    /// rad/s to Hz.
    pub fn to_hz(omega: f64) -> f64 {
        omega / TAU
    }
}

//! Propagation under constant and time-dependent Hamiltonians, and the
//! phenomenological relaxation applied between pulses.

use serde::{Deserialize, Serialize};

use crate::error::{ConvergenceFailure, Error, Result};
use crate::spin_ops::{expm_generator, DeviationState, Operator, QuantumState, C64, I};

/// Longitudinal and transverse relaxation times, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub t1: f64,
    /// T2 of the central (1-2) coherence.
    pub t2_central: f64,
    /// T2 of the satellite coherences and of all multiple-quantum coherences.
    pub t2_satellite: f64,
    pub enabled: bool,
}

impl RelaxationParams {
    /// 23Na in the lyotropic sample: T1 = 16 ms, T2 = 16 ms / 4.5 ms.
    pub fn sodium_liquid_crystal() -> Self {
        Self {
            t1: 16e-3,
            t2_central: 16e-3,
            t2_satellite: 4.5e-3,
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::sodium_liquid_crystal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.t1 > 0.0 && self.t2_central > 0.0 && self.t2_satellite > 0.0) {
            return Err(Error::InvalidParameter(
                "relaxation times must be positive".into(),
            ));
        }
        Ok(())
    }

    /// T2 governing coherence `(i, j)`; `None` when relaxation is off.
    pub fn t2_for(&self, i: usize, j: usize) -> Option<f64> {
        if !self.enabled {
            return None;
        }
        match (i.min(j), i.max(j)) {
            (1, 2) => Some(self.t2_central),
            _ => Some(self.t2_satellite),
        }
    }
}

/// How each time step's propagator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `exp(-i H(t_mid) dt)`.
    Midpoint,
    /// Fourth-order Magnus step from two Gauss-Legendre samples.
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPolicy {
    /// Upper bound on the step, seconds. The interval is split into equal
    /// steps no longer than this.
    pub dt: f64,
    pub scheme: Scheme,
    /// Re-run at `dt / 2` and require agreement.
    pub convergence_check: bool,
}

/// Tolerance on `1 - F(coarse, fine)` for the dt-halving check.
pub const CONVERGENCE_TOL: f64 = 1e-6;

impl Default for IntegrationPolicy {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            scheme: Scheme::Midpoint,
            convergence_check: false,
        }
    }
}

impl IntegrationPolicy {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    /// Largest step allowed for a Hamiltonian whose fastest component is
    /// `max_frequency` rad/s: 50 samples per cycle.
    pub fn max_step_for(max_frequency: f64) -> f64 {
        if max_frequency <= 0.0 {
            return f64::INFINITY;
        }
        2.0 * std::f64::consts::PI / (50.0 * max_frequency)
    }

    /// This policy with `dt` capped for `max_frequency`.
    pub fn resolving(&self, max_frequency: f64) -> Self {
        Self {
            dt: self.dt.min(Self::max_step_for(max_frequency)),
            ..*self
        }
    }

    fn steps(&self, span: f64) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        let n = ((span / self.dt) - 1e-9).ceil().max(1.0) as usize;
        Ok((n, span / n as f64))
    }
}

/// `U rho U^dagger` or `U |psi>` with `U = exp(-i h t)`.
pub fn propagate_const<S: QuantumState>(state: &S, h: &Operator, t: f64) -> Result<S> {
    if h.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: h.dim(),
        });
    }
    Ok(state.evolve(&expm_generator(h, t)?))
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3) / 6

/// Time-ordered propagator over `[t0, t1]` without the convergence check.
pub fn propagator_timedep<F>(
    sampler: F,
    t0: f64,
    t1: f64,
    policy: &IntegrationPolicy,
) -> Result<Operator>
where
    F: Fn(f64) -> Operator,
{
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{t0}, {t1}]"
        )));
    }
    let (n, h) = policy.steps(t1 - t0)?;
    let mut u: Option<Operator> = None;
    for k in 0..n {
        let start = t0 + k as f64 * h;
        let generator = match policy.scheme {
            Scheme::Midpoint => sampler(start + 0.5 * h),
            Scheme::Magnus4 => {
                let a = sampler(start + (0.5 - GAUSS_OFFSET) * h);
                let b = sampler(start + (0.5 + GAUSS_OFFSET) * h);
                let correction = a.commutator(&b).scale_complex(I * (3f64.sqrt() / 12.0 * h));
                let mean = (&a + &b).scale(0.5);
                Operator::with_role(
                    (&mean + &correction).into_matrix(),
                    crate::spin_ops::Role::Hermitian,
                )
            }
        };
        let step = expm_generator(&generator, h)?;
        u = Some(match u {
            None => step,
            Some(acc) => &step * &acc,
        });
    }
    Ok(u.expect("at least one step"))
}

/// Propagates `state` through `H(t)` given by `sampler` from `t0` to `t1`.
pub fn propagate_timedep<S, F>(
    state: &S,
    sampler: F,
    t0: f64,
    t1: f64,
    policy: &IntegrationPolicy,
) -> Result<S>
where
    S: QuantumState,
    F: Fn(f64) -> Operator,
{
    let u = propagator_timedep(&sampler, t0, t1, policy)?;
    if u.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: u.dim(),
        });
    }
    let out = state.evolve(&u);
    if policy.convergence_check {
        let fine_policy = IntegrationPolicy {
            dt: policy.dt / 2.0,
            ..*policy
        };
        let fine_u = propagator_timedep(&sampler, t0, t1, &fine_policy)?;
        let fine = state.evolve(&fine_u);
        let change = 1.0 - out.fidelity(&fine)?;
        if change.abs() >= CONVERGENCE_TOL {
            return Err(Error::NotConverged(Box::new(ConvergenceFailure {
                change,
                tolerance: CONVERGENCE_TOL,
                coarse: u,
                fine: fine_u,
            })));
        }
    }
    Ok(out)
}

/// Populations relax toward `equilibrium` with T1; each coherence decays
/// with the T2 of its line.
pub fn relax_between_steps(
    state: &DeviationState,
    duration: f64,
    params: &RelaxationParams,
    equilibrium: &DeviationState,
) -> Result<DeviationState> {
    if state.dim() != 4 || equilibrium.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: state.dim(),
        });
    }
    if !params.enabled || duration == 0.0 {
        return Ok(state.clone());
    }
    params.validate()?;
    if duration < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative duration {duration}"
        )));
    }
    let rho = state.operator();
    let eq = equilibrium.operator();
    let longitudinal = (-duration / params.t1).exp();
    let m = Operator::from_fn(4, |i, j| {
        if i == j {
            eq[(i, i)] + (rho[(i, i)] - eq[(i, i)]) * longitudinal
        } else {
            let t2 = params.t2_for(i, j).expect("enabled");
            rho[(i, j)] * C64::from((-duration / t2).exp())
        }
    });
    Ok(DeviationState::from_operator_unchecked(m))
}

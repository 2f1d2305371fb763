//! Continuous search in `N` dimensions and the `O(sqrt N)` scaling of its
//! transfer time.
//!
//! Both Hamiltonian families act only on `span{|s>, |w>}`. The Farhi-Gutmann
//! evolution rotates `|s>` into `|w>` by way of states far from the
//! straight path between them; the Fenner Hamiltonian moves along the
//! geodesic. Neither difference is quantified here.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{first_local_max, golden_max};
use crate::spin_ops::{Operator, StateVector, C64, I};

/// Number of scan points in [`time_to_target`].
pub const SCAN_POINTS: usize = 2048;

/// Default threshold on the RMS log residual of the scaling fit.
pub const DEFAULT_FIT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchInstance {
    pub dim: usize,
    pub target: usize,
    /// Oracle-driver coupling `c` (Fenner) or energy `E` (Farhi-Gutmann), rad/s.
    pub strength: f64,
}

impl SearchInstance {
    pub fn new(dim: usize, target: usize, strength: f64) -> Result<Self> {
        if dim < 2 || target >= dim {
            return Err(Error::InvalidParameter(format!(
                "need N >= 2 and target < N (N = {dim}, target = {target})"
            )));
        }
        if !(strength > 0.0) || !strength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "strength {strength} must be positive"
            )));
        }
        Ok(Self {
            dim,
            target,
            strength,
        })
    }

    /// `<s|w> = 1 / sqrt(N)`.
    pub fn overlap(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    fn projectors(&self) -> (Operator, Operator) {
        (
            Operator::projector(&StateVector::basis(self.dim, self.target)),
            Operator::projector(&StateVector::uniform(self.dim)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Fenner,
    FarhiGutmann,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fenner" => Ok(Self::Fenner),
            "farhi-gutmann" | "fg" => Ok(Self::FarhiGutmann),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fenner => "fenner",
            Self::FarhiGutmann => "farhi-gutmann",
        })
    }
}

/// `E (|w><w| + |s><s|)`.
pub fn farhi_gutmann_hamiltonian(inst: &SearchInstance) -> Result<Operator> {
    let inst = SearchInstance::new(inst.dim, inst.target, inst.strength)?;
    let (pw, ps) = inst.projectors();
    (&pw + &ps).scale(inst.strength).into_hermitian()
}

/// `i c [|w><w|, |s><s|] = c x i (|w><s| - |s><w|)`.
///
/// At `N = 4` this is the four-level Fenner Hamiltonian with
/// `2 omega_f = c x`.
pub fn fenner_general(inst: &SearchInstance) -> Result<Operator> {
    let inst = SearchInstance::new(inst.dim, inst.target, inst.strength)?;
    let (pw, ps) = inst.projectors();
    pw.commutator(&ps)
        .scale_complex(I * inst.strength)
        .into_hermitian()
}

pub fn hamiltonian(family: Family, inst: &SearchInstance) -> Result<Operator> {
    match family {
        Family::Fenner => fenner_general(inst),
        Family::FarhiGutmann => farhi_gutmann_hamiltonian(inst),
    }
}

/// Closed-form first arrival time.
pub fn analytic_time(family: Family, inst: &SearchInstance) -> f64 {
    let x = inst.overlap();
    match family {
        Family::Fenner => x.acos() / (inst.strength * x * (1.0 - x * x).sqrt()),
        Family::FarhiGutmann => FRAC_PI_2 / (inst.strength * x),
    }
}

/// `x^2 cos^2(E x t) + sin^2(E x t)`.
pub fn farhi_gutmann_probability(inst: &SearchInstance, t: f64) -> f64 {
    let x = inst.overlap();
    let phase = inst.strength * x * t;
    x * x * phase.cos().powi(2) + phase.sin().powi(2)
}

/// `t -> <target| exp(-i h t) |start>`, evaluated in the Krylov space of
/// `start`, which the evolution never leaves.
pub struct TransitionAmplitude {
    weights: Vec<C64>,
    energies: Vec<f64>,
}

impl TransitionAmplitude {
    pub fn new(h: &Operator, start: &StateVector, target: &StateVector) -> Result<Self> {
        let n = h.dim();
        if start.dim() != n || target.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: start.dim().max(target.dim()),
            });
        }
        let h = h.clone().into_hermitian()?;
        let scale = h.max_abs().max(f64::MIN_POSITIVE);
        let m = h.matrix();
        let norm = start.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let mut basis: Vec<DVector<C64>> = vec![start.amplitudes() / C64::from(norm)];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let v = basis.last().expect("nonempty");
            let mut w = m * v;
            alpha.push(v.dotc(&w).re);
            // Full reorthogonalization against every basis vector.
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&w);
                    w -= b * c;
                }
            }
            let b = w.norm();
            if basis.len() == n || b <= 1e-12 * scale * (n as f64).sqrt() {
                break;
            }
            beta.push(b);
            basis.push(w / C64::from(b));
        }
        let k = basis.len();
        let tri = Operator::hermitian(nalgebra::DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                C64::from(alpha[r])
            } else if r + 1 == c {
                C64::from(beta[r])
            } else if c + 1 == r {
                C64::from(beta[c])
            } else {
                C64::new(0.0, 0.0)
            }
        }))?;
        let eig = tri.eigh()?;
        let proj: Vec<C64> = basis.iter().map(|b| b.dotc(target.amplitudes())).collect();
        let weights = (0..k)
            .map(|j| {
                let q = eig.vectors.column(j);
                let overlap_target: C64 = (0..k).map(|r| q[r] * proj[r]).sum();
                overlap_target.conj() * q[0]
            })
            .collect();
        Ok(Self {
            weights,
            energies: eig.values,
        })
    }

    pub fn amplitude(&self, t: f64) -> C64 {
        self.weights
            .iter()
            .zip(&self.energies)
            .map(|(w, &e)| w * C64::from_polar(1.0, -e * t))
            .sum()
    }

    pub fn probability(&self, t: f64) -> f64 {
        self.amplitude(t).norm_sqr()
    }

    /// Dimension of the Krylov space.
    pub fn krylov_dim(&self) -> usize {
        self.energies.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub t_star: f64,
    pub p_max: f64,
}

/// First maximum of `|<target|exp(-i h t)|start>|^2` above 1/2 within
/// `(0, horizon]`: a scan of [`SCAN_POINTS`] points, then golden-section
/// refinement.
pub fn time_to_target(
    h: &Operator,
    start: &StateVector,
    target: &StateVector,
    horizon: f64,
) -> Result<Arrival> {
    let amp = TransitionAmplitude::new(h, start, target)?;
    let p0 = amp.probability(0.0);
    if p0 >= 1.0 - 1e-12 {
        return Ok(Arrival {
            t_star: 0.0,
            p_max: p0,
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let times: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| horizon * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let probs: Vec<f64> = times.iter().map(|&t| amp.probability(t)).collect();
    let k = first_local_max(&probs, 0.5).ok_or_else(|| Error::NoMaximum {
        threshold: 0.5,
        best: probs.iter().cloned().fold(0.0, f64::max),
    })?;
    let (t_star, p_max) = golden_max(
        |t| Ok(amp.probability(t)),
        times[k - 1],
        times[k + 1],
        times[k],
        1e-12,
    )?;
    Ok(Arrival { t_star, p_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub t_star: f64,
    pub p_max: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub family: Family,
    pub strength: f64,
    /// Slope of `ln t*` against `ln N`.
    pub exponent: f64,
    /// `t* ~ prefactor * N^exponent`, seconds.
    pub prefactor: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub fit: ScalingFit,
    pub rows: Vec<ScalingRow>,
}

impl ScalingStudy {
    /// CSV with columns `n,t_star_s,p_max`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,t_star_s,p_max")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.n, r.t_star, r.p_max)?;
        }
        Ok(())
    }

    pub fn fit_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.fit)?)
    }
}

fn arrival_for(n: usize, strength: f64, family: Family) -> Result<ScalingRow> {
    let inst = SearchInstance::new(n, 0, strength)?;
    let h = hamiltonian(family, &inst)?;
    let analytic = analytic_time(family, &inst);
    let a = time_to_target(
        &h,
        &StateVector::uniform(n),
        &StateVector::basis(n, 0),
        2.0 * analytic,
    )?;
    Ok(ScalingRow {
        n,
        t_star: a.t_star,
        p_max: a.p_max,
        analytic,
    })
}

/// Least-squares slope and intercept of `y` on `x`, and the RMS residual.
pub fn log_log_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return Err(Error::UnderdeterminedFit);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// Transfer time for each `N` at fixed `strength`, and the fitted power law.
/// Dimensions are evaluated on separate threads.
pub fn scaling_study(
    dims: &[usize],
    strength: f64,
    family: Family,
    threshold: f64,
) -> Result<ScalingStudy> {
    let mut distinct = dims.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::UnderdeterminedFit);
    }
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = dims
            .iter()
            .map(|&n| scope.spawn(move || arrival_for(n, strength, family)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.t_star)).collect();
    let (exponent, intercept, residual) = log_log_fit(&points)?;
    if residual > threshold {
        return Err(Error::FitResidual {
            residual,
            threshold,
        });
    }
    Ok(ScalingStudy {
        fit: ScalingFit {
            family,
            strength,
            exponent,
            prefactor: intercept.exp(),
            residual,
            dims: dims.to_vec(),
        },
        rows,
    })
}

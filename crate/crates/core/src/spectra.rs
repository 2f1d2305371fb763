//! Monitoring pulse, FID synthesis, Fourier transform and peak integration.
//!
//! After a small nonselective pulse `exp(-i theta I_y)` each population
//! difference `p_{k-1} - p_k` turns into single-quantum coherence on line
//! `(k-1, k)` with weight `|<k-1|I_y|k>|^2`, so a spectrum taken after every
//! protocol step reads out the populations. Integrals are reported in units
//! where thermal equilibrium gives `(3/4, 1, 3/4)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::RelaxationParams;
use crate::error::{Error, Result};
use crate::hamiltonians::StaticField;
use crate::spin_ops::{expm_generator, spin_three_halves, DeviationState, C64, I};

/// Monitoring angle used throughout, `pi / 20`.
pub const DEFAULT_MONITOR_ANGLE: f64 = PI / 20.0;

/// The three allowed single-quantum lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Line {
    #[serde(rename = "01")]
    L01,
    #[serde(rename = "12")]
    L12,
    #[serde(rename = "23")]
    L23,
}

impl Line {
    pub const ALL: [Line; 3] = [Line::L01, Line::L12, Line::L23];

    pub fn levels(&self) -> (usize, usize) {
        match self {
            Line::L01 => (0, 1),
            Line::L12 => (1, 2),
            Line::L23 => (2, 3),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Line::L01 => "01",
            Line::L12 => "12",
            Line::L23 => "23",
        }
    }

    /// Resonance offset from the carrier, rad/s: `+omega_q/2, 0, -omega_q/2`.
    pub fn offset(&self, omega_q: f64) -> f64 {
        match self {
            Line::L01 => omega_q / 2.0,
            Line::L12 => 0.0,
            Line::L23 => -omega_q / 2.0,
        }
    }

    fn index(&self) -> usize {
        self.levels().0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub line: Line,
    /// rad/s.
    pub offset: f64,
    pub integral: f64,
    /// T2 the line decays with, if relaxation was on.
    pub t2: Option<f64>,
    /// Measured full width at half maximum, Hz.
    pub fwhm_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakTable {
    pub peaks: [Peak; 3],
}

impl PeakTable {
    /// Integrals ordered 01, 12, 23.
    pub fn integrals(&self) -> [f64; 3] {
        [
            self.peaks[0].integral,
            self.peaks[1].integral,
            self.peaks[2].integral,
        ]
    }

    pub fn get(&self, line: Line) -> &Peak {
        &self.peaks[line.index()]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Hard pulse `exp(-i angle I_y)`.
pub fn monitor_pulse(state: &DeviationState, angle: f64) -> Result<DeviationState> {
    Ok(state.rotated(&expm_generator(&spin_three_halves().iy, angle)?))
}

/// `<k-1| I+ |k>` for the line ending on level `k`.
fn detection_weight(line: Line) -> f64 {
    let (a, b) = line.levels();
    spin_three_halves().raising()[(a, b)].re
}

/// First-order line integrals with the default monitoring angle.
pub fn stick_spectrum(state: &DeviationState, field: &StaticField) -> Result<PeakTable> {
    stick_spectrum_at(state, field, DEFAULT_MONITOR_ANGLE)
}

/// First-order line integrals for a monitoring pulse of `angle`.
///
/// Line `(k-1, k)` gets `|I_y(k-1,k)|^2 (p_{k-1} - p_k)` from the
/// populations, plus `Re(c rho_{k,k-1}) / (2 sin(angle))` from coherence
/// already present on the line, with `c = <k-1|I+|k>`.
pub fn stick_spectrum_at(
    state: &DeviationState,
    field: &StaticField,
    angle: f64,
) -> Result<PeakTable> {
    if state.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: state.dim(),
        });
    }
    let s = angle.sin();
    if s.abs() < 1e-12 {
        return Err(Error::InvalidParameter(
            "monitoring angle must be nonzero".into(),
        ));
    }
    let iy = spin_three_halves().iy;
    let rho = state.operator();
    let comm = iy.commutator(rho);
    let peaks = Line::ALL.map(|line| {
        let (a, b) = line.levels();
        let first_order = rho[(b, a)] - I * s * comm[(b, a)];
        Peak {
            line,
            offset: line.offset(field.omega_q),
            integral: (first_order * detection_weight(line)).re / (2.0 * s),
            t2: None,
            fwhm_hz: None,
        }
    });
    Ok(PeakTable { peaks })
}

/// Sampled transverse magnetization `Tr(rho(t) I+)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fid {
    /// Sampling interval, seconds.
    pub dt: f64,
    pub samples: Vec<C64>,
    pub omega_q: f64,
    /// T2 of each line (01, 12, 23) if relaxation was applied.
    pub t2: [Option<f64>; 3],
    /// Monitoring angle the signal was excited with; spectra are divided
    /// by `2 sin(angle)` when set.
    pub monitor_angle: Option<f64>,
}

/// Evolves `state` under the quadrupole Hamiltonian and records
/// `Tr(rho I+)`, damping each coherence with the T2 of its line.
pub fn synthesize_fid(
    state: &DeviationState,
    field: &StaticField,
    duration: f64,
    dt: f64,
    relax: &RelaxationParams,
) -> Result<Fid> {
    if !(dt > 0.0 && duration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} and dt {dt} must be positive"
        )));
    }
    let max_offset_hz = field.omega_q / (2.0 * TAU);
    if dt * 2.0 * max_offset_hz >= 1.0 {
        return Err(Error::UndersampledFid { dt, max_offset_hz });
    }
    let n = ((duration / dt).round() as usize).max(2);
    relax.validate()?;
    let rho = state.operator();
    let tones: Vec<(C64, f64, f64)> = Line::ALL
        .iter()
        .map(|line| {
            let (a, b) = line.levels();
            let rate = relax.t2_for(a, b).map_or(0.0, |t2| 1.0 / t2);
            (
                rho[(b, a)] * detection_weight(*line),
                line.offset(field.omega_q),
                rate,
            )
        })
        .collect();
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            tones
                .iter()
                .map(|&(amp, w, rate)| amp * C64::from_polar((-rate * t).exp(), w * t))
                .sum()
        })
        .collect();
    let t2 = Line::ALL.map(|line| {
        let (a, b) = line.levels();
        relax.t2_for(a, b)
    });
    Ok(Fid {
        dt,
        samples,
        omega_q: field.omega_q,
        t2,
        monitor_angle: None,
    })
}

/// Monitoring pulse followed by FID synthesis.
pub fn acquire(
    state: &DeviationState,
    field: &StaticField,
    angle: f64,
    duration: f64,
    dt: f64,
    relax: &RelaxationParams,
) -> Result<Fid> {
    let monitored = monitor_pulse(state, angle)?;
    let mut fid = synthesize_fid(&monitored, field, duration, dt, relax)?;
    fid.monitor_angle = Some(angle);
    Ok(fid)
}

/// Frequency-domain data with the integrated lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Bin frequencies, Hz, ascending.
    pub freq_hz: Vec<f64>,
    /// Scaled so that summing a line's bins gives its amplitude.
    pub values: Vec<C64>,
    pub peaks: PeakTable,
}

/// FWHM of a Lorentzian line with `t2`, Hz.
pub fn lorentzian_fwhm_hz(t2: f64) -> f64 {
    1.0 / (PI * t2)
}

/// Fourier transform of `fid` and the integrals of the three lines.
///
/// The first sample is halved, the record zero-filled to a power of two of
/// at least four times its length, and each line integrated over the bins
/// within `omega_q / 4` of its offset, i.e. up to the midpoint between
/// neighbouring lines.
pub fn spectrum(fid: &Fid) -> Result<Spectrum> {
    let n = fid.samples.len();
    if n < 2 || !(fid.dt > 0.0) {
        return Err(Error::InvalidParameter(
            "FID needs at least two samples and dt > 0".into(),
        ));
    }
    let spacing_hz = fid.omega_q / (2.0 * TAU);
    for (a, b) in [(0, 1), (1, 2)] {
        if let (Some(ta), Some(tb)) = (fid.t2[a], fid.t2[b]) {
            if 3.0 * (lorentzian_fwhm_hz(ta) + lorentzian_fwhm_hz(tb)) > spacing_hz {
                return Err(Error::OverlappingPeaks {
                    a: Line::ALL[a].label(),
                    b: Line::ALL[b].label(),
                });
            }
        }
    }
    let m = (4 * n).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    buf[..n].copy_from_slice(&fid.samples);
    buf[0] *= 0.5;
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let norm = fid.monitor_angle.map_or(1.0, |a| 2.0 * a.sin());
    let scale = 2.0 / (m as f64 * norm);
    let half = m / 2;
    let df = 1.0 / (m as f64 * fid.dt);
    let freq_hz: Vec<f64> = (0..m).map(|j| (j as f64 - half as f64) * df).collect();
    let values: Vec<C64> = (0..m).map(|j| buf[(j + half) % m] * scale).collect();

    let window = spacing_hz / 2.0;
    let peaks = Line::ALL.map(|line| {
        let center = line.offset(fid.omega_q) / TAU;
        let bins: Vec<usize> = (0..m)
            .filter(|&j| freq_hz[j] >= center - window && freq_hz[j] < center + window)
            .collect();
        let integral: f64 = bins.iter().map(|&j| values[j].re).sum();
        Peak {
            line,
            offset: line.offset(fid.omega_q),
            integral,
            t2: fid.t2[line.index()],
            fwhm_hz: measure_fwhm(&freq_hz, &values, &bins, integral),
        }
    });
    Ok(Spectrum {
        freq_hz,
        values,
        peaks: PeakTable { peaks },
    })
}

/// Width at half height of the absorption line inside `bins`, by linear
/// interpolation between bins.
fn measure_fwhm(freq: &[f64], values: &[C64], bins: &[usize], integral: f64) -> Option<f64> {
    if bins.len() < 3 || integral == 0.0 {
        return None;
    }
    let sign = integral.signum();
    let h = |j: usize| sign * values[j].re;
    let top = *bins.iter().max_by(|&&a, &&b| h(a).total_cmp(&h(b)))?;
    let half = h(top) / 2.0;
    if !(half > 0.0) {
        return None;
    }
    let (first, last) = (bins[0], bins[bins.len() - 1]);
    let mut left = top;
    while left > first && h(left - 1) > half {
        left -= 1;
    }
    let mut right = top;
    while right < last && h(right + 1) > half {
        right += 1;
    }
    if left == first || right == last {
        return None;
    }
    let cross = |inside: usize, outside: usize| {
        let (fi, fo) = (freq[inside], freq[outside]);
        let (hi, ho) = (h(inside), h(outside));
        fi + (fo - fi) * (hi - half) / (hi - ho)
    };
    Some(cross(right, right + 1) - cross(left, left - 1))
}

impl Spectrum {
    /// CSV with columns `offset_hz,real,imag`, restricted to
    /// `|offset| <= limit_hz` when given.
    pub fn write_csv<W: Write>(&self, mut out: W, limit_hz: Option<f64>) -> Result<()> {
        writeln!(out, "offset_hz,real,imag")?;
        for (f, v) in self.freq_hz.iter().zip(&self.values) {
            if limit_hz.is_some_and(|lim| f.abs() > lim) {
                continue;
            }
            writeln!(out, "{f},{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}

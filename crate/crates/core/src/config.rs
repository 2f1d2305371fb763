//! Run parameters in user units (Hz, ms, us) and their flat `key = value`
//! file format.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error. Saving writes every key, so a saved file loads back to the same
//! configuration.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegrationPolicy, RelaxationParams, Scheme};
use crate::error::{Error, Result};
use crate::experiment::{fenner_time, Mode, PhaseCycle};
use crate::hamiltonians::StaticField;
use crate::units::hz;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub omega_q_hz: f64,
    pub omega_z_hz: f64,
    pub omega_f_hz: f64,
    pub t_pi2_us: f64,
    pub dq90_ms: f64,
    pub sq180_ms: f64,
    /// `None` uses the Fenner time computed from `omega_f_hz`.
    pub grover_ms: Option<f64>,
    pub t1_ms: f64,
    pub t2_central_ms: f64,
    pub t2_satellite_ms: f64,
    pub mode: Mode,
    pub relaxation: bool,
    pub dt_us: f64,
    pub integrator: Scheme,
    pub convergence_check: bool,
    /// Always true; kept so reports state it.
    pub deterministic: bool,
    pub phase_cycle: PhaseCycle,
    pub monitor_deg: f64,
    pub acq_ms: f64,
    pub acq_dt_us: f64,
    /// Marked state searched by the last pulse: 2 (`|10>`) or 1 (`|01>`).
    pub final_target: usize,
    pub fidelity_floor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omega_q_hz: 10840.0,
            omega_z_hz: 105.79e6,
            omega_f_hz: 62.5,
            t_pi2_us: 2000.0,
            dq90_ms: 2.0,
            sq180_ms: 1.5,
            grover_ms: None,
            t1_ms: 16.0,
            t2_central_ms: 16.0,
            t2_satellite_ms: 4.5,
            mode: Mode::Effective,
            relaxation: true,
            dt_us: 1.0,
            integrator: Scheme::Midpoint,
            convergence_check: false,
            deterministic: true,
            phase_cycle: PhaseCycle::TwoStep,
            monitor_deg: 9.0,
            acq_ms: 128.0,
            acq_dt_us: 10.0,
            final_target: 2,
            fidelity_floor: 0.5,
        }
    }
}

const KEYS: [&str; 22] = [
    "omega_q_hz",
    "omega_z_hz",
    "omega_f_hz",
    "t_pi2_us",
    "dq90_ms",
    "sq180_ms",
    "grover_ms",
    "t1_ms",
    "t2_central_ms",
    "t2_satellite_ms",
    "mode",
    "relaxation",
    "dt_us",
    "integrator",
    "convergence_check",
    "deterministic",
    "phase_cycle",
    "monitor_deg",
    "acq_ms",
    "acq_dt_us",
    "final_target",
    "fidelity_floor",
];

fn parse_num(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: '{value}' is not a number")))
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{value}' is not on/off"))),
    }
}

fn flag(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "omega_q_hz" => self.omega_q_hz = parse_num(key, value)?,
            "omega_z_hz" => self.omega_z_hz = parse_num(key, value)?,
            "omega_f_hz" => self.omega_f_hz = parse_num(key, value)?,
            "t_pi2_us" => self.t_pi2_us = parse_num(key, value)?,
            "dq90_ms" => self.dq90_ms = parse_num(key, value)?,
            "sq180_ms" => self.sq180_ms = parse_num(key, value)?,
            "grover_ms" => {
                self.grover_ms = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                };
            }
            "t1_ms" => self.t1_ms = parse_num(key, value)?,
            "t2_central_ms" => self.t2_central_ms = parse_num(key, value)?,
            "t2_satellite_ms" => self.t2_satellite_ms = parse_num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "effective" => Mode::Effective,
                    "exact" => Mode::Exact,
                    _ => {
                        return Err(Error::Config(format!(
                            "mode: '{value}' is not effective/exact"
                        )))
                    }
                }
            }
            "relaxation" => self.relaxation = parse_flag(key, value)?,
            "dt_us" => self.dt_us = parse_num(key, value)?,
            "integrator" => {
                self.integrator = match value {
                    "midpoint" => Scheme::Midpoint,
                    "magnus4" => Scheme::Magnus4,
                    _ => {
                        return Err(Error::Config(format!(
                            "integrator: '{value}' is not midpoint/magnus4"
                        )))
                    }
                }
            }
            "convergence_check" => self.convergence_check = parse_flag(key, value)?,
            "deterministic" => {
                if !parse_flag(key, value)? {
                    return Err(Error::Config(
                        "deterministic: the simulator has no random mode".into(),
                    ));
                }
                self.deterministic = true;
            }
            "phase_cycle" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("phase_cycle: '{value}' is not 2 or 4")))?;
                self.phase_cycle =
                    PhaseCycle::from_size(n).map_err(|e| Error::Config(e.to_string()))?;
            }
            "monitor_deg" => self.monitor_deg = parse_num(key, value)?,
            "acq_ms" => self.acq_ms = parse_num(key, value)?,
            "acq_dt_us" => self.acq_dt_us = parse_num(key, value)?,
            "final_target" => {
                self.final_target = value.parse().map_err(|_| {
                    Error::Config(format!("final_target: '{value}' is not an integer"))
                })?;
            }
            "fidelity_floor" => self.fidelity_floor = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "omega_q_hz" => self.omega_q_hz.to_string(),
                "omega_z_hz" => self.omega_z_hz.to_string(),
                "omega_f_hz" => self.omega_f_hz.to_string(),
                "t_pi2_us" => self.t_pi2_us.to_string(),
                "dq90_ms" => self.dq90_ms.to_string(),
                "sq180_ms" => self.sq180_ms.to_string(),
                "grover_ms" => self.grover_ms.map_or("auto".to_string(), |v| v.to_string()),
                "t1_ms" => self.t1_ms.to_string(),
                "t2_central_ms" => self.t2_central_ms.to_string(),
                "t2_satellite_ms" => self.t2_satellite_ms.to_string(),
                "mode" => match self.mode {
                    Mode::Effective => "effective".into(),
                    Mode::Exact => "exact".into(),
                },
                "relaxation" => flag(self.relaxation).into(),
                "dt_us" => self.dt_us.to_string(),
                "integrator" => match self.integrator {
                    Scheme::Midpoint => "midpoint".into(),
                    Scheme::Magnus4 => "magnus4".into(),
                },
                "convergence_check" => flag(self.convergence_check).into(),
                "deterministic" => flag(self.deterministic).into(),
                "phase_cycle" => self.phase_cycle.size().to_string(),
                "monitor_deg" => self.monitor_deg.to_string(),
                "acq_ms" => self.acq_ms.to_string(),
                "acq_dt_us" => self.acq_dt_us.to_string(),
                "final_target" => self.final_target.to_string(),
                "fidelity_floor" => self.fidelity_floor.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_q_hz", self.omega_q_hz),
            ("omega_z_hz", self.omega_z_hz),
            ("omega_f_hz", self.omega_f_hz),
            ("t_pi2_us", self.t_pi2_us),
            ("dq90_ms", self.dq90_ms),
            ("sq180_ms", self.sq180_ms),
            ("t1_ms", self.t1_ms),
            ("t2_central_ms", self.t2_central_ms),
            ("t2_satellite_ms", self.t2_satellite_ms),
            ("dt_us", self.dt_us),
            ("monitor_deg", self.monitor_deg),
            ("acq_ms", self.acq_ms),
            ("acq_dt_us", self.acq_dt_us),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{key} = {v} must be positive")));
            }
        }
        if let Some(g) = self.grover_ms {
            if !(g > 0.0) {
                return Err(Error::Config(format!("grover_ms = {g} must be positive")));
            }
        }
        if !matches!(self.final_target, 1 | 2) {
            return Err(Error::Config(format!(
                "final_target = {} must be 1 or 2",
                self.final_target
            )));
        }
        if !(0.0..=1.0).contains(&self.fidelity_floor) {
            return Err(Error::Config(format!(
                "fidelity_floor = {} outside [0, 1]",
                self.fidelity_floor
            )));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<StaticField> {
        StaticField::from_hz(self.omega_z_hz, self.omega_q_hz)
    }

    pub fn omega_f(&self) -> f64 {
        hz(self.omega_f_hz)
    }

    pub fn t_pi2(&self) -> f64 {
        self.t_pi2_us * 1e-6
    }

    pub fn dq90_duration(&self) -> f64 {
        self.dq90_ms * 1e-3
    }

    pub fn sq180_duration(&self) -> f64 {
        self.sq180_ms * 1e-3
    }

    pub fn grover_duration(&self) -> Result<f64> {
        match self.grover_ms {
            Some(ms) => Ok(ms * 1e-3),
            None => fenner_time(self.omega_f(), 0.5),
        }
    }

    pub fn monitor_angle(&self) -> f64 {
        self.monitor_deg.to_radians()
    }

    pub fn relaxation_params(&self) -> RelaxationParams {
        RelaxationParams {
            t1: self.t1_ms * 1e-3,
            t2_central: self.t2_central_ms * 1e-3,
            t2_satellite: self.t2_satellite_ms * 1e-3,
            enabled: self.relaxation,
        }
    }

    pub fn policy(&self) -> IntegrationPolicy {
        IntegrationPolicy {
            dt: self.dt_us * 1e-6,
            scheme: self.integrator,
            convergence_check: self.convergence_check,
        }
    }

    pub fn acquisition(&self) -> (f64, f64) {
        (self.acq_ms * 1e-3, self.acq_dt_us * 1e-6)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = cfg.to_text().parse().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_overrides_and_auto_duration() {
        let mut cfg: ExperimentConfig =
            "# run\nmode = exact\n\ngrover_ms = 1.54\nphase_cycle = 4\n"
                .parse()
                .unwrap();
        assert_eq!(cfg.mode, Mode::Exact);
        assert_eq!(cfg.grover_ms, Some(1.54));
        assert_eq!(cfg.phase_cycle, PhaseCycle::FourStep);
        cfg.apply_overrides(&["grover_ms=auto", "relaxation=off"])
            .unwrap();
        assert!((cfg.grover_duration().unwrap() - 1539.6e-6).abs() < 0.05e-6);
        assert!(!cfg.relaxation_params().enabled);
    }

    #[test]
    fn malformed_input_rejected() {
        assert!("mode = fast".parse::<ExperimentConfig>().is_err());
        assert!("bogus = 1".parse::<ExperimentConfig>().is_err());
        assert!("omega_q_hz".parse::<ExperimentConfig>().is_err());
        assert!("omega_q_hz = -3".parse::<ExperimentConfig>().is_err());
        assert!("final_target = 3".parse::<ExperimentConfig>().is_err());
        assert!("deterministic = off".parse::<ExperimentConfig>().is_err());
    }
}

//! Run directories: `report.json`, `step_{a..e}.csv` and `peaks.json`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::{GroverCalibrationRecord, Mode, PipelineReport};
use crate::spectra::{acquire, spectrum, PeakTable, Spectrum};
use crate::spin_ops::DeviationState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub label: char,
    pub description: String,
    pub fidelity: f64,
    /// Integrals of the simulated spectrum, ordered 01, 12, 23.
    pub peak_integrals: [f64; 3],
    /// First-order prediction, same order.
    pub stick_integrals: [f64; 3],
    pub relaxation_factor: f64,
    pub elapsed_s: f64,
    pub state: DeviationState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub mode: Mode,
    pub final_target: usize,
    pub final_state: String,
    pub pseudopure_residual: f64,
    pub grover_calibration: Vec<GroverCalibrationRecord>,
    pub notes: Vec<String>,
    pub steps: Vec<StepSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPeaks {
    pub label: char,
    pub measured: PeakTable,
    pub stick: PeakTable,
}

/// Monitoring pulse, acquisition and Fourier transform with the settings
/// of `config`.
pub fn render_state(state: &DeviationState, config: &ExperimentConfig) -> Result<Spectrum> {
    let (duration, dt) = config.acquisition();
    let fid = acquire(
        state,
        &config.field()?,
        config.monitor_angle(),
        duration,
        dt,
        &config.relaxation_params(),
    )?;
    spectrum(&fid)
}

/// Writes a spectrum as CSV, cropped to the quadrupole splitting.
pub fn write_spectrum_csv(spec: &Spectrum, config: &ExperimentConfig, path: &Path) -> Result<()> {
    spec.write_csv(BufWriter::new(File::create(path)?), Some(config.omega_q_hz))
}

/// Writes the run directory for `report` and returns its summary.
pub fn write_run(
    report: &PipelineReport,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<RunReport> {
    std::fs::create_dir_all(dir)?;
    let mut steps = Vec::new();
    let mut peaks = Vec::new();
    for step in &report.steps {
        let spec = render_state(&step.state, config)?;
        write_spectrum_csv(&spec, config, &dir.join(format!("step_{}.csv", step.label)))?;
        steps.push(StepSummary {
            label: step.label,
            description: step.description.clone(),
            fidelity: step.fidelity,
            peak_integrals: spec.peaks.integrals(),
            stick_integrals: step.sticks.integrals(),
            relaxation_factor: step.relaxation_factor,
            elapsed_s: step.elapsed,
            state: step.state.clone(),
        });
        peaks.push(StepPeaks {
            label: step.label,
            measured: spec.peaks,
            stick: step.sticks,
        });
    }
    let run = RunReport {
        config: config.clone(),
        mode: report.mode,
        final_target: report.final_target,
        final_state: if report.final_target == 2 {
            "|10>".into()
        } else {
            "|01>".into()
        },
        pseudopure_residual: report.pseudopure_residual,
        grover_calibration: report.grover_calibration.clone(),
        notes: report.notes.clone(),
        steps,
    };
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&run)? + "\n",
    )?;
    std::fs::write(
        dir.join("peaks.json"),
        serde_json::to_string_pretty(&peaks)? + "\n",
    )?;
    Ok(run)
}

/// Reads `report.json` back.
pub fn read_run(dir: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(
        dir.join("report.json"),
    )?)?)
}

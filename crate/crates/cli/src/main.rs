use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use analog_grover::experiment::{calibrate_amplitude_with, Context, ScanOptions};
use analog_grover::hamiltonians::Envelope;
use analog_grover::output::{read_run, render_state, write_run};
use analog_grover::units::{hz, to_hz};
use analog_grover::{
    run_pipeline, rwa_sweep, scaling_study, DeviationState, Error, ExperimentConfig, Family, Result,
};
use clap::{Args, Parser, Subcommand};

/// Continuous-time Grover search on a spin-3/2 quadrupolar nucleus.
#[derive(Parser)]
#[command(name = "analog-grover", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set mode=exact`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the five-step protocol and write spectra and a report.
    Pipeline {
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Calibrate the lab amplitude of a rectangular 90-degree pulse.
    Calibrate {
        /// Transition as two level digits: 01, 12, 23, 02 or 13.
        #[arg(long)]
        transition: String,
        /// Pulse length in microseconds; defaults to `t_pi2_us`.
        #[arg(long)]
        duration_us: Option<f64>,
    },
    /// Render the spectrum of a saved deviation state.
    Spectrum {
        /// JSON file holding a deviation matrix.
        #[arg(long, conflicts_with_all = ["report", "step"])]
        state: Option<PathBuf>,
        /// Run directory written by `pipeline`.
        #[arg(long, requires = "step")]
        report: Option<PathBuf>,
        /// Step label `a` .. `e` inside `--report`.
        #[arg(long)]
        step: Option<char>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the time-to-target exponent over a set of dimensions.
    Scaling {
        #[arg(long, default_value = "fenner")]
        family: Family,
        #[arg(long, value_delimiter = ',', default_value = "4,16,64,256,1024")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        strength: f64,
        /// Largest accepted RMS residual of the log-log fit.
        #[arg(long, default_value_t = analog_grover::scaling::DEFAULT_FIT_THRESHOLD)]
        threshold: f64,
        /// Directory for `scaling.csv` and `fit.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare exact and secular Grover transfer as omega_q is scaled up.
    RwaCheck {
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        target: usize,
        /// JSON destination for the sweep.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(&global.overrides)?;
    config.validate()?;
    Ok(config)
}

fn parse_transition(s: &str) -> Result<(usize, usize)> {
    let digits: Vec<usize> = s
        .chars()
        .filter_map(|c| c.to_digit(10).map(|d| d as usize))
        .collect();
    match digits[..] {
        [a, b] if a < b && b < 4 && s.len() == 2 => Ok((a, b)),
        _ => Err(Error::InvalidParameter(format!(
            "transition '{s}' is not two ascending level digits 0..3"
        ))),
    }
}

fn pipeline(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let report = run_pipeline(config)?;
    let run = write_run(&report, config, out)?;
    for step in &run.steps {
        let [a, b, c] = step.peak_integrals;
        println!(
            "{} {:<18} F = {:.6}  integrals 01 {a:+.4} 12 {b:+.4} 23 {c:+.4}  relaxation {:.4}",
            step.label, step.description, step.fidelity, step.relaxation_factor
        );
    }
    println!("final state {}; wrote {}", run.final_state, out.display());
    Ok(())
}

fn calibrate(config: &ExperimentConfig, transition: &str, duration_us: Option<f64>) -> Result<()> {
    let levels = parse_transition(transition)?;
    let duration = duration_us.map_or(config.t_pi2(), |us| us * 1e-6);
    let ctx = Context {
        field: config.field()?,
        mode: config.mode,
        policy: config.policy(),
    };
    let cal = calibrate_amplitude_with(
        levels,
        duration,
        Envelope::Rectangular,
        &ctx,
        &ScanOptions::default(),
    )?;
    let json = serde_json::json!({
        "transition": transition,
        "mode": config.mode,
        "duration_us": duration * 1e6,
        "amplitude_hz": to_hz(cal.amplitude),
        "estimate_hz": to_hz(cal.estimate),
        "signal": cal.signal,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn spectrum(
    config: &ExperimentConfig,
    state: Option<&Path>,
    report: Option<&Path>,
    step: Option<char>,
    out: Option<&Path>,
) -> Result<()> {
    let deviation: DeviationState = match (state, report, step) {
        (Some(path), None, None) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        (None, Some(dir), Some(label)) => {
            let run = read_run(dir)?;
            run.steps
                .into_iter()
                .find(|s| s.label == label)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("no step '{label}' in {}", dir.display()))
                })?
                .state
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give --state, or --report with --step".into(),
            ))
        }
    };
    let spec = render_state(&deviation, config)?;
    match out {
        Some(path) => {
            spec.write_csv(BufWriter::new(File::create(path)?), Some(config.omega_q_hz))?;
            println!("{}", spec.peaks.to_json()?);
        }
        None => spec.write_csv(io::stdout().lock(), Some(config.omega_q_hz))?,
    }
    Ok(())
}

fn scaling(
    family: Family,
    dims: &[usize],
    strength: f64,
    threshold: f64,
    out: Option<&Path>,
) -> Result<()> {
    let study = scaling_study(dims, strength, family, threshold)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        study.write_csv(BufWriter::new(File::create(dir.join("scaling.csv"))?))?;
        std::fs::write(dir.join("fit.json"), study.fit_json()? + "\n")?;
    }
    for row in &study.rows {
        println!(
            "N = {:>6}  t* = {:.6e} s  p_max = {:.9}",
            row.n, row.t_star, row.p_max
        );
    }
    println!(
        "{family}: exponent {:.4}, prefactor {:.4e} s, rms residual {:.4}",
        study.fit.exponent, study.fit.prefactor, study.fit.residual
    );
    Ok(())
}

fn rwa_check(
    config: &ExperimentConfig,
    scales: &[f64],
    target: usize,
    out: Option<&Path>,
) -> Result<()> {
    let points = rwa_sweep(
        &config.field()?,
        scales,
        target,
        hz(config.omega_f_hz),
        config.t_pi2(),
        &config.policy(),
    )?;
    for p in &points {
        println!(
            "omega_q x{:<5} DQ {:.2} Hz  transfer {:.6} (untrimmed {:.6})  deviation fidelity {:.6}",
            p.scale,
            to_hz(p.dq_lab_amplitude),
            p.success,
            p.untrimmed_success,
            p.deviation_fidelity
        );
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&points)? + "\n")?;
    }
    let mut ordered = points.clone();
    ordered.sort_by(|a, b| a.scale.total_cmp(&b.scale));
    if let Some(w) = ordered
        .windows(2)
        .find(|w| w[1].infidelity() >= w[0].infidelity())
    {
        return Err(Error::InvalidParameter(format!(
            "infidelity does not decrease from x{} ({:.3e}) to x{} ({:.3e})",
            w[0].scale,
            w[0].infidelity(),
            w[1].scale,
            w[1].infidelity()
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.global)?;
    match cli.command {
        Command::Pipeline { out } => pipeline(&config, &out),
        Command::Calibrate {
            transition,
            duration_us,
        } => calibrate(&config, &transition, duration_us),
        Command::Spectrum {
            state,
            report,
            step,
            out,
        } => spectrum(
            &config,
            state.as_deref(),
            report.as_deref(),
            step,
            out.as_deref(),
        ),
        Command::Scaling {
            family,
            dims,
            strength,
            threshold,
            out,
        } => scaling(family, &dims, strength, threshold, out.as_deref()),
        Command::RwaCheck {
            scales,
            target,
            out,
        } => rwa_check(&config, &scales, target, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}

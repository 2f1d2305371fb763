//! Thin wrappers over `argmin` for the two searches the crate needs.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

struct Negated<F>(F);

impl<F: Fn(f64) -> Result<f64>> CostFunction for Negated<F> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, x: &f64) -> std::result::Result<f64, argmin::core::Error> {
        (self.0)(*x)
            .map(|v| -v)
            .map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

fn solver_error(e: argmin::core::Error) -> Error {
    Error::CalibrationFailed(e.to_string())
}

/// Maximum of `f` on `[lo, hi]` by golden-section search started at `x0`,
/// to relative tolerance `rel_tol` in the abscissa.
pub(crate) fn golden_max<F>(f: F, lo: f64, hi: f64, x0: f64, rel_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let solver = GoldenSectionSearch::new(lo, hi)
        .and_then(|s| s.with_tolerance(rel_tol))
        .map_err(solver_error)?;
    let res = Executor::new(Negated(f), solver)
        .configure(|s| s.param(x0.clamp(lo, hi)).max_iters(200))
        .run()
        .map_err(solver_error)?;
    let state = res.state();
    let x = *state
        .get_best_param()
        .ok_or_else(|| Error::CalibrationFailed("no best point".into()))?;
    Ok((x, -state.get_best_cost()))
}

struct Simplex<F>(F);

impl<F: Fn(&[f64]) -> Result<f64>> CostFunction for Simplex<F> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        (self.0)(x).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

/// Minimum of `f` by Nelder-Mead from the initial `simplex`.
pub(crate) fn nelder_mead_min<F>(
    f: F,
    simplex: Vec<Vec<f64>>,
    max_iters: u64,
    sd_tol: f64,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(sd_tol)
        .map_err(solver_error)?;
    let res = Executor::new(Simplex(f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run()
        .map_err(solver_error)?;
    let state = res.state();
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::CalibrationFailed("no best point".into()))?;
    Ok((x, state.get_best_cost()))
}

/// Index of the first interior local maximum of `values`.
pub(crate) fn first_local_max(values: &[f64], above: f64) -> Option<usize> {
    (1..values.len().saturating_sub(1))
        .find(|&k| values[k] > above && values[k] >= values[k - 1] && values[k] > values[k + 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_max(|x| Ok(2.0 - (x - 0.7).powi(2)), 0.0, 2.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.7).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nelder_mead_finds_quadratic_bowl() {
        let f = |p: &[f64]| Ok((p[0] - 1.0).powi(2) + 3.0 * (p[1] + 2.0).powi(2));
        let simplex = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]];
        let (x, c) = nelder_mead_min(f, simplex, 500, 1e-14).unwrap();
        assert!(
            (x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4,
            "{x:?}"
        );
        assert!(c < 1e-8);
    }

    #[test]
    fn local_max_skips_edges_and_threshold() {
        assert_eq!(first_local_max(&[0.0, 1.0, 0.5, 2.0, 1.0], 0.0), Some(1));
        assert_eq!(first_local_max(&[0.0, 1.0, 0.5, 2.0, 1.0], 1.5), Some(3));
        assert_eq!(first_local_max(&[0.0, 1.0, 2.0], 0.0), None);
    }
}

//! Finite-difference verification of analytic gradients.
//!
//! `check_gradient` probes a scalar-valued function of a grid with central
//! differences at every pixel and compares against a claimed analytic
//! gradient. Perturbed grids must stay inside `[0, 1]`; keeping probe points
//! away from the domain boundary (and away from any threshold the function
//! binarizes at) is the caller's job, via the values it picks and the skip
//! mask it passes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GradGrid, Grid};

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// (row, col) attaining max_abs_error; None when every pixel was skipped.
    pub worst_pixel: Option<(usize, usize)>,
    pub n_checked: usize,
    pub n_skipped: usize,
}

fn perturbed(at: &Grid, pixel: (usize, usize), delta: f64) -> Result<Grid> {
    let mut values = at.values().to_vec();
    values[pixel.0 * at.width() + pixel.1] += delta;
    Grid::float(at.height(), at.width(), values)
}

/// Central difference (f(x+h) - f(x-h)) / 2h at one pixel.
pub fn central_diff<F>(f: F, at: &Grid, pixel: (usize, usize), step: f64) -> Result<f64>
where
    F: Fn(&Grid) -> Result<f64>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter {
            what: format!("finite-difference step {step}"),
        });
    }
    let hi = f(&perturbed(at, pixel, step)?)?;
    let lo = f(&perturbed(at, pixel, -step)?)?;
    let d = (hi - lo) / (2.0 * step);
    if !d.is_finite() {
        return Err(Error::NonFiniteResult {
            context: format!("central difference at ({}, {})", pixel.0, pixel.1),
        });
    }
    Ok(d)
}

/// Compare an analytic gradient against central differences at every pixel
/// not excluded by `skip` (a binary grid; 1 means skip).
pub fn check_gradient<F>(
    f: F,
    analytic: &GradGrid,
    at: &Grid,
    step: f64,
    skip: Option<&Grid>,
) -> Result<GradReport>
where
    F: Fn(&Grid) -> Result<f64>,
{
    if analytic.height() != at.height() || analytic.width() != at.width() {
        return Err(Error::DimensionMismatch {
            context: "check_gradient analytic/at".into(),
            expected_h: at.height(),
            expected_w: at.width(),
            got_h: analytic.height(),
            got_w: analytic.width(),
        });
    }
    if let Some(s) = skip {
        if !s.same_dims(at) {
            return Err(Error::DimensionMismatch {
                context: "check_gradient skip mask".into(),
                expected_h: at.height(),
                expected_w: at.width(),
                got_h: s.height(),
                got_w: s.width(),
            });
        }
    }
    let mut report = GradReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_pixel: None,
        n_checked: 0,
        n_skipped: 0,
    };
    for r in 0..at.height() {
        for c in 0..at.width() {
            if skip.is_some_and(|s| s.get(r, c) >= 0.5) {
                report.n_skipped += 1;
                continue;
            }
            let numeric = central_diff(&f, at, (r, c), step)?;
            let a = analytic.get(r, c);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(1e-12);
            if abs > report.max_abs_error || report.worst_pixel.is_none() {
                report.max_abs_error = abs;
                report.worst_pixel = Some((r, c));
            }
            report.max_rel_error = report.max_rel_error.max(rel);
            report.n_checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridKind;

    fn weighted_sum(weights: &[f64]) -> impl Fn(&Grid) -> Result<f64> + '_ {
        move |g: &Grid| {
            Ok(g.values()
                .iter()
                .zip(weights)
                .map(|(&v, &w)| v * w)
                .sum())
        }
    }

    #[test]
    fn linear_function_has_derivative_one() {
        let at = Grid::float(1, 1, vec![0.4]).unwrap();
        let d = central_diff(|g| Ok(g.get(0, 0)), &at, (0, 0), DEFAULT_STEP).unwrap();
        assert!((d - 1.0).abs() < 1e-10, "d = {d}");
    }

    #[test]
    fn quadratic_matches_its_closed_form() {
        // f(p) = 100 p^2 at p = 0.3: f' = 60. Central differences are exact
        // for quadratics up to rounding.
        let at = Grid::float(1, 1, vec![0.3]).unwrap();
        let d = central_diff(
            |g| Ok(100.0 * g.get(0, 0) * g.get(0, 0)),
            &at,
            (0, 0),
            DEFAULT_STEP,
        )
        .unwrap();
        assert!((d - 60.0).abs() < 1e-7, "d = {d}");
    }

    #[test]
    fn a_wrong_gradient_is_localized() {
        let at = Grid::float(2, 2, vec![0.3, 0.4, 0.5, 0.6]).unwrap();
        let weights = [1.0, 2.0, -1.0, 0.5];
        let mut wrong = GradGrid::new(2, 2, weights.to_vec()).unwrap();
        wrong.set(1, 0, -2.0); // off by a factor of two at (1, 0)
        let report =
            check_gradient(weighted_sum(&weights), &wrong, &at, DEFAULT_STEP, None).unwrap();
        assert_eq!(report.worst_pixel, Some((1, 0)));
        assert!(report.max_abs_error > 0.9);
        assert_eq!(report.n_checked, 4);
    }

    #[test]
    fn a_correct_gradient_passes_tightly() {
        let at = Grid::float(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let weights = [0.5, -1.5, 2.0, 0.0, 3.0, -0.25];
        let analytic = GradGrid::new(2, 3, weights.to_vec()).unwrap();
        let report =
            check_gradient(weighted_sum(&weights), &analytic, &at, DEFAULT_STEP, None).unwrap();
        assert!(report.max_abs_error < 1e-9, "{report:?}");
        assert_eq!(report.n_skipped, 0);
    }

    #[test]
    fn skip_mask_excludes_pixels_and_can_be_vacuous() {
        let at = Grid::float(1, 2, vec![0.3, 0.7]).unwrap();
        let analytic = GradGrid::zeros(1, 2);
        let skip_all = Grid::binary(1, 2, vec![1.0, 1.0]).unwrap();
        let report = check_gradient(
            |_| Ok(0.0),
            &analytic,
            &at,
            DEFAULT_STEP,
            Some(&skip_all),
        )
        .unwrap();
        assert_eq!(report.n_checked, 0);
        assert_eq!(report.n_skipped, 2);
        assert_eq!(report.worst_pixel, None);
        assert_eq!(report.max_abs_error, 0.0);
    }

    #[test]
    fn reports_are_deterministic() {
        let at = Grid::float(3, 3, vec![0.3; 9]).unwrap();
        let weights: Vec<f64> = (0..9).map(|i| i as f64 - 4.0).collect();
        let analytic = GradGrid::new(3, 3, weights.clone()).unwrap();
        let r1 =
            check_gradient(weighted_sum(&weights), &analytic, &at, DEFAULT_STEP, None).unwrap();
        let r2 =
            check_gradient(weighted_sum(&weights), &analytic, &at, DEFAULT_STEP, None).unwrap();
        assert_eq!(r1.max_abs_error, r2.max_abs_error);
        assert_eq!(r1.max_rel_error, r2.max_rel_error);
        assert_eq!(r1.worst_pixel, r2.worst_pixel);
    }

    #[test]
    fn non_finite_function_values_error() {
        let at = Grid::float(1, 1, vec![0.5]).unwrap();
        let err = central_diff(|_| Ok(f64::NAN), &at, (0, 0), DEFAULT_STEP).unwrap_err();
        assert!(matches!(err, Error::NonFiniteResult { .. }));
    }

    #[test]
    fn invalid_step_is_rejected() {
        let at = Grid::float(1, 1, vec![0.5]).unwrap();
        assert!(central_diff(|g| Ok(g.get(0, 0)), &at, (0, 0), 0.0).is_err());
        assert!(central_diff(|g| Ok(g.get(0, 0)), &at, (0, 0), -1e-4).is_err());
    }

    #[test]
    fn perturbation_outside_the_domain_is_the_callers_fault() {
        // at = 1.0 cannot be nudged upward inside [0, 1]; the error surfaces
        // rather than being silently clamped.
        let at = Grid::float(1, 1, vec![1.0]).unwrap();
        assert!(central_diff(|g| Ok(g.get(0, 0)), &at, (0, 0), DEFAULT_STEP).is_err());
        let _ = GridKind::Float;
    }
}

//! Principal-value evaluation of `L u(x)`.
//!
//! Analytic inputs are integrated zone by zone: a near zone `B_r(x)` split
//! into dyadic annuli with the affine part of `u` subtracted, a mid zone out
//! to where the far-field description takes over, and a far zone handled in
//! closed form or by a substituted radial quadrature. Lattice inputs are
//! evaluated with the cell-constant discretization used by the solver.

mod analytic;
mod certificate;
mod lattice;
mod scan;

pub use analytic::{annulus_integral, near_zone_integral, Directions};
pub use certificate::{continuity_probe, near_zone_certificate, Certificate, ContinuityReport, Regime};
pub use lattice::LatticeOperator;
pub use scan::{threshold_scan, write_scan_csv, ScanRow};

use serde::{Deserialize, Serialize};

use crate::function_space::{AnalyticFunction, GridFunction};
use crate::kernels::KernelSpec;
use crate::Result;

/// Function handed to the evaluator.
#[derive(Debug, Clone, Copy)]
pub enum Field<'a> {
    Analytic(&'a AnalyticFunction),
    Grid(&'a GridFunction),
}

impl<'a> From<&'a AnalyticFunction> for Field<'a> {
    fn from(u: &'a AnalyticFunction) -> Self {
        Field::Analytic(u)
    }
}

impl<'a> From<&'a GridFunction> for Field<'a> {
    fn from(u: &'a GridFunction) -> Self {
        Field::Grid(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

/// Outcome of a principal-value evaluation.
///
/// `partials[k]` is the integral over `ℝⁿ \ B_{epsilons[k]}(x)`; `annuli[k]`
/// is `partials[k + 1] - partials[k]`. `fitted_rate` is the least-squares
/// slope of `log |annuli|` against `log ε` over the last few annuli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PVResult {
    pub point: Vec<f64>,
    pub value: Option<f64>,
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub epsilons: Vec<f64>,
    pub partials: Vec<f64>,
    pub annuli: Vec<f64>,
    pub fitted_rate: Option<f64>,
    pub fit_r_squared: Option<f64>,
    pub remainder_estimate: f64,
    pub near_zone_bound: Option<f64>,
    pub scale: f64,
    pub tol: f64,
}

impl PVResult {
    pub fn is_converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }
}

/// Evaluation knobs; the defaults are the documented behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvOptions {
    /// Number of dyadic annuli tried in the near zone.
    pub max_levels: usize,
    /// Annuli used for the rate fit.
    pub fit_window: usize,
    /// Angles on the circle (n = 2).
    pub angles: usize,
    /// Slopes within this of zero are not classified.
    pub slope_margin: f64,
    pub min_r_squared: f64,
    /// Divergence threshold relative to the local scale.
    pub divergence_factor: f64,
}

impl Default for PvOptions {
    fn default() -> Self {
        PvOptions {
            max_levels: 40,
            fit_window: 8,
            angles: 64,
            slope_margin: 0.01,
            min_r_squared: 0.9,
            divergence_factor: 1e6,
        }
    }
}

pub fn pv_evaluate<'a>(u: impl Into<Field<'a>>, x: &[f64], spec: &KernelSpec, tol: f64) -> Result<PVResult> {
    pv_evaluate_with(u, x, spec, tol, &PvOptions::default())
}

pub fn pv_evaluate_with<'a>(
    u: impl Into<Field<'a>>,
    x: &[f64],
    spec: &KernelSpec,
    tol: f64,
    opts: &PvOptions,
) -> Result<PVResult> {
    match u.into() {
        Field::Analytic(f) => analytic::evaluate(f, x, spec, tol, opts),
        Field::Grid(g) => LatticeOperator::new(g, spec)?.pv_result(g, x, tol),
    }
}

/// Least-squares line through `(xs, ys)`: slope and R².
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (s, r2) = fit_line(&xs, &ys);
        assert!((s + 0.5).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}

#[cfg(test)]
mod oracle_tests {
    use super::*;
    use crate::quadrature::tanh_sinh;
    use crate::signed_power;

    /// Symmetrized radial integral ∫_0^∞ [g(u(x)-u(x+ρ)) + g(u(x)-u(x-ρ))] ρ^{-1-sp} dρ,
    /// split at the given breakpoints and mapped to (0, 1] beyond the last one.
    /// The first piece is cut dyadically and stops at 2^{-45} of its length,
    /// where the symmetric sum is below rounding anyway.
    /// `incr(ρ)` returns `(u(x) - u(x + ρ), u(x) - u(x - ρ))`, computed without cancellation.
    fn oracle_1d(incr: impl Fn(f64) -> (f64, f64), s: f64, p: f64, breaks: &[f64]) -> f64 {
        let sp = s * p;
        let f = |rho: f64| {
            let (a, b) = incr(rho);
            (signed_power(a, p) + signed_power(b, p)) * rho.powf(-1.0 - sp)
        };
        let mut pts: Vec<f64> = (1..=45).rev().map(|k| breaks[0] * 0.5f64.powi(k)).collect();
        pts.extend_from_slice(breaks);
        let mut total = 0.0;
        for w in pts.windows(2) {
            total += tanh_sinh(w[0], w[1], 1e-13, |r, _, _| f(r)).value;
        }
        let last = *pts.last().unwrap();
        total + tanh_sinh(0.0, 1.0, 1e-13, |_, t, _| f(last / t) * last / (t * t)).value
    }

    #[test]
    fn constant_and_affine_vanish() {
        let spec = KernelSpec::fractional(1, 0.5, 1.7).unwrap();
        let c = AnalyticFunction::constant(1, 3.0).unwrap();
        let r = pv_evaluate(&c, &[0.2], &spec, 1e-10).unwrap();
        assert_eq!(r.value, Some(0.0));
        for n in [1, 2] {
            let spec = KernelSpec::fractional(n, 0.4, 2.5).unwrap();
            let a = AnalyticFunction::affine(n, 1.0, [0.7, -0.3]).unwrap();
            let r = pv_evaluate(&a, &[0.1, 0.2][..n], &spec, 1e-10).unwrap();
            assert!(r.is_converged() && r.value.unwrap().abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn capped_square_at_origin_matches_closed_form() {
        // L u(0) = -2 [1 / (2p - 2 - sp) + 1 / sp] for n = 1
        let (s, p) = (0.5, 1.5);
        let spec = KernelSpec::fractional(1, s, p).unwrap();
        let u = AnalyticFunction::capped_square(1).unwrap();
        let r = pv_evaluate(&u, &[0.0], &spec, 1e-9).unwrap();
        let exact = -2.0 * (1.0 / (2.0 * p - 2.0 - s * p) + 1.0 / (s * p));
        assert_eq!(r.verdict, Verdict::Converged);
        assert!((r.value.unwrap() - exact).abs() < 1e-6 * exact.abs(), "{:?} vs {exact}", r.value);
    }

    #[test]
    fn capped_square_below_threshold_diverges_at_the_predicted_rate() {
        let u = AnalyticFunction::capped_square(1).unwrap();
        let spec = KernelSpec::fractional(1, 0.5, 1.25).unwrap();
        assert_eq!(pv_evaluate(&u, &[0.0], &spec, 1e-8).unwrap().verdict, Verdict::Diverged);
        let spec = KernelSpec::fractional(1, 0.5, 1.2).unwrap();
        let r = pv_evaluate(&u, &[0.0], &spec, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Diverged);
        let rate = r.fitted_rate.unwrap();
        assert!((rate + 0.2).abs() < 0.02, "{rate}");
    }

    #[test]
    fn off_center_points_match_symmetrized_quadrature() {
        let u = AnalyticFunction::capped_square(1).unwrap();
        for (s, p, x) in [(0.4, 1.7, 0.3), (0.7, 3.0, -0.55), (0.3, 1.3, 0.8), (0.5, 2.0, 0.2)] {
            let spec = KernelSpec::fractional(1, s, p).unwrap();
            let r = pv_evaluate(&u, &[x], &spec, 1e-10).unwrap();
            // u(x) - u(x ± ρ) = ∓2xρ - ρ² inside the unit ball, u(x) - 1 outside
            let incr = |rho: f64| {
                let side = |t: f64| if (x + t).abs() < 1.0 { -(2.0 * x * t + rho * rho) } else { x * x - 1.0 };
                (side(rho), side(-rho))
            };
            // kinks of u and the level crossing u(x - ρ) = u(x) at ρ = 2|x|
            let mut breaks = vec![(1.0 - x).abs(), (1.0 + x).abs(), 2.0 * x.abs()];
            breaks.sort_by(f64::total_cmp);
            let exact = oracle_1d(incr, s, p, &breaks);
            assert!(r.is_converged(), "{r:?}");
            let v = r.value.unwrap();
            assert!((v - exact).abs() < 1e-7 * (1.0 + exact.abs()), "s={s} p={p} x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn symmetries() {
        let spec = KernelSpec::fractional(2, 0.5, 1.8).unwrap();
        let u = AnalyticFunction::capped_square(2).unwrap();
        let x = [0.3, -0.2];
        let base = pv_evaluate(&u, &x, &spec, 1e-10).unwrap().value.unwrap();
        let neg = pv_evaluate(&u.scale_shift(-1.0, 0.0).unwrap(), &x, &spec, 1e-10).unwrap().value.unwrap();
        let shifted = pv_evaluate(&u.scale_shift(1.0, 2.5).unwrap(), &x, &spec, 1e-10).unwrap().value.unwrap();
        let scaled = pv_evaluate(&u.scale_shift(3.0, 0.0).unwrap(), &x, &spec, 1e-10).unwrap().value.unwrap();
        let moved = u.translate([0.4, 0.1]).unwrap();
        let translated = pv_evaluate(&moved, &[0.7, -0.1], &spec, 1e-10).unwrap().value.unwrap();
        assert!((base + neg).abs() < 1e-12 * base.abs());
        assert!((base - shifted).abs() < 1e-9 * base.abs());
        assert!((3f64.powf(0.8) * base - scaled).abs() < 1e-9 * scaled.abs());
        assert!((base - translated).abs() < 1e-9 * base.abs(), "{base} vs {translated}");
    }

    #[test]
    fn lattice_operator_on_constant_is_zero() {
        use crate::function_space::{DomainSpec, FarField};
        let d = DomainSpec::Interval { lo: -1.0, hi: 1.0 };
        let g = GridFunction::new(d, 1.0 / 16.0, 2.0, FarField::Constant { value: 2.0 }, |_| 2.0).unwrap();
        let spec = KernelSpec::fractional(1, 0.5, 1.5).unwrap();
        let r = pv_evaluate(&g, &[0.25], &spec, 1e-10).unwrap();
        assert_eq!(r.value, Some(0.0));
        assert!(pv_evaluate(&g, &[0.26], &spec, 1e-10).is_err());
    }
}

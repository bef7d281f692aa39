//! Closed-form evaluation of `∫₀¹ |a + b t|^{p-2} dt` and numerical checks of
//! the elementary inequalities built on it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::tanh_sinh;
use crate::{par, signed_power, Error, Result};

/// Constants of the two-sided estimate
/// `c_lower (|a|+|b|)^{p-2} ≤ ∫₀¹ |a+bt|^{p-2} dt ≤ c_upper (|a|+|b|)^{p-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIntegralConstants {
    pub p: f64,
    pub c_upper: f64,
    pub c_lower: f64,
}

impl PowerIntegralConstants {
    pub fn new(p: f64) -> Self {
        let off = 4f64.powf(2.0 - p) / (p - 1.0);
        let (c_upper, c_lower) = if p >= 2.0 { (1.0, off) } else { (off, 1.0) };
        Self { p, c_upper, c_lower }
    }
}

/// `((x+1)^q - x^q) / x^q` for `x > 0`, without cancellation.
fn rel_increment(x: f64, q: f64) -> f64 {
    (q * (1.0 / x).ln_1p()).exp_m1()
}

/// Exact `∫₀¹ |a + b t|^{p-2} dt`.
///
/// Infinite when `a = b = 0` and `p < 2`.
pub fn weighted_power_integral(a: f64, b: f64, p: f64) -> f64 {
    let q = p - 1.0;
    if b == 0.0 {
        return if a != 0.0 {
            a.abs().powf(p - 2.0)
        } else if p < 2.0 {
            f64::INFINITY
        } else if p == 2.0 {
            1.0
        } else {
            0.0
        };
    }
    if a == 0.0 {
        return b.abs().powf(p - 2.0) / q;
    }
    let at = a / b;
    if at > 1.0 {
        // |a|^{p-2} * ã ((1 + 1/ã)^{q} - 1) / q
        a.abs().powf(p - 2.0) * at * rel_increment(at, q) / q
    } else if at >= 0.0 {
        b.abs().powf(p - 2.0) * ((at + 1.0).powf(q) - at.powf(q)) / q
    } else if at > -1.0 {
        b.abs().powf(p - 2.0) * ((at + 1.0).powf(q) + (-at).powf(q)) / q
    } else {
        let m = -at;
        // |ã|^{q} - (|ã|-1)^{q} = |ã|^{q} (1 - (1 - 1/|ã|)^{q})
        let frac = -(q * (-1.0 / m).ln_1p()).exp_m1();
        a.abs().powf(p - 2.0) * m * frac / q
    }
}

/// Quadrature oracle for [`weighted_power_integral`]: tanh-sinh with the
/// interval split at the zero `t* = -a/b` of the integrand.
pub fn weighted_power_integral_quadrature(a: f64, b: f64, p: f64) -> f64 {
    const TOL: f64 = 1e-14;
    if b == 0.0 {
        return weighted_power_integral(a, b, p);
    }
    let scale = b.abs().powf(p - 2.0);
    let e = p - 2.0;
    let t_star = -a / b;
    let v = if t_star > 0.0 && t_star < 1.0 {
        let left = tanh_sinh(0.0, t_star, TOL, |_, _, db| db.powf(e)).value;
        let right = tanh_sinh(t_star, 1.0, TOL, |_, da, _| da.powf(e)).value;
        left + right
    } else if t_star <= 0.0 {
        let off = -t_star;
        tanh_sinh(0.0, 1.0, TOL, |_, da, _| (da + off).powf(e)).value
    } else {
        let off = t_star - 1.0;
        tanh_sinh(0.0, 1.0, TOL, |_, _, db| (db + off).powf(e)).value
    };
    scale * v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Relative slack for comparisons that are equalities in exact arithmetic.
pub const ROUNDING_SLACK: f64 = 1e-12;

pub fn check_two_sided_bounds(a: f64, b: f64, p: f64) -> BoundReport {
    let c = PowerIntegralConstants::new(p);
    let base = (a.abs() + b.abs()).powf(p - 2.0);
    let value = weighted_power_integral(a, b, p);
    let lower = c.c_lower * base;
    let upper = c.c_upper * base;
    let ok = value >= lower * (1.0 - ROUNDING_SLACK) && value <= upper * (1.0 + ROUNDING_SLACK);
    BoundReport { value, lower, upper, ok }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub ok: bool,
}

/// `||a|^{p-2}a - |b|^{p-2}b| ≤ c (|b| + |a-b|)^{p-2} |a-b|` with
/// `c = c_upper (p - 1)`.
pub fn power_difference_bound(a: f64, b: f64, p: f64) -> DifferenceReport {
    let constant = PowerIntegralConstants::new(p).c_upper * (p - 1.0);
    if a == b {
        return DifferenceReport { lhs: 0.0, rhs: 0.0, constant, ok: true };
    }
    let lhs = (signed_power(a, p) - signed_power(b, p)).abs();
    let d = (a - b).abs();
    let rhs = constant * (b.abs() + d).powf(p - 2.0) * d;
    DifferenceReport { lhs, rhs, constant, ok: lhs <= rhs * (1.0 + ROUNDING_SLACK) }
}

/// `∫_{S^{n-1}} (|e·ω| + a)^{p-2} dω`.
pub fn spherical_integral(e: &[f64], a: f64, p: f64) -> Result<f64> {
    let n = e.len();
    let len = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("|e| = {len} is not 1")));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("a = {a} is negative")));
    }
    match n {
        1 => Ok(2.0 * (e[0].abs() + a).powf(p - 2.0)),
        2 => {
            // rotation invariance: 4 ∫_0^{π/2} (sin d + a)^{p-2} dd, d the
            // angular distance to the equator of e
            let est = tanh_sinh(0.0, 0.5 * PI, 1e-14, |_, da, _| (da.sin() + a).powf(p - 2.0));
            Ok(4.0 * est.value)
        }
        _ => Err(Error::InvalidParameter(format!("dimension {n} not in {{1, 2}}"))),
    }
}

/// Calibrated constant `c(n, p)` of the spherical estimate: twice the maximal
/// ratio `∫(|e·ω|+a)^{p-2} / (1+a)^{p-2}` over `a ∈ {0} ∪ [1e-8, 1e8]`
/// (log grid, 10 points per decade). Cached per `(n, p)`.
pub fn spherical_constant(n: usize, p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().unwrap().get(&(n, p.to_bits())) {
        return *c;
    }
    let e: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let grid = std::iter::once(0.0).chain((-80..=80).map(|k| 10f64.powf(k as f64 / 10.0)));
    let max_ratio = grid
        .map(|a| spherical_integral(&e, a, p).unwrap() / (1.0 + a).powf(p - 2.0))
        .fold(0.0, f64::max);
    let c = 2.0 * max_ratio;
    cache.lock().unwrap().insert((n, p.to_bits()), c);
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalReport {
    pub integral: f64,
    pub constant: f64,
    pub bound: f64,
    pub ok: bool,
}

pub fn spherical_average_bound(e: &[f64], a: f64, p: f64) -> Result<SphericalReport> {
    let integral = spherical_integral(e, a, p)?;
    let constant = spherical_constant(e.len(), p);
    let bound = constant * (1.0 + a).powf(p - 2.0);
    Ok(SphericalReport { integral, constant, bound, ok: integral.is_finite() && integral <= bound })
}

/// Summary of one randomized lemma check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest observed ratio of checked side to allowed side (≤ 1 passes);
    /// for the oracle comparison, the largest relative deviation.
    pub worst_ratio: f64,
    pub tol: f64,
    pub pass: bool,
}

pub const SUITE_EXPONENTS: [f64; 5] = [1.2, 1.5, 2.0, 3.0, 4.5];

/// Seeded randomized sweep of every algebraic check. Each lemma draws from
/// its own ChaCha stream (`stream = lemma index`) of the given seed.
pub fn run_lemma_suite(seed: u64, samples: usize, oracle_samples: usize) -> Vec<LemmaReport> {
    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(k);
        r
    };
    let pick_p = |r: &mut ChaCha8Rng| SUITE_EXPONENTS[r.gen_range(0..SUITE_EXPONENTS.len())];

    let mut reports = Vec::new();

    let mut rng = stream(0);
    let draws: Vec<(f64, f64, f64)> = (0..samples)
        .map(|_| (rng.gen_range(-10.0..=10.0), rng.gen_range(-10.0..=10.0), pick_p(&mut rng)))
        .collect();
    let results = par::map_indexed(draws.len(), |i| {
        let (a, b, p) = draws[i];
        let r = check_two_sided_bounds(a, b, p);
        (r.ok, (r.value / r.upper).max(r.lower / r.value))
    });
    reports.push(summarize("two_sided_integral_bounds", &results, 1.0));

    let mut rng = stream(1);
    let draws: Vec<(f64, f64, f64)> = (0..samples)
        .map(|_| (rng.gen_range(-10.0..=10.0), rng.gen_range(-10.0..=10.0), pick_p(&mut rng)))
        .collect();
    let results = par::map_indexed(draws.len(), |i| {
        let (a, b, p) = draws[i];
        let r = power_difference_bound(a, b, p);
        (r.ok, if r.rhs > 0.0 { r.lhs / r.rhs } else { 0.0 })
    });
    reports.push(summarize("power_difference_bound", &results, 1.0));

    let mut rng = stream(2);
    let draws: Vec<(Vec<f64>, f64, f64)> = (0..samples)
        .map(|_| {
            let n = rng.gen_range(1..=2usize);
            let e = if n == 1 {
                vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }]
            } else {
                let t = rng.gen_range(0.0..2.0 * PI);
                vec![t.cos(), t.sin()]
            };
            let a = 10f64.powf(rng.gen_range(-4.0..3.0));
            (e, a, pick_p(&mut rng))
        })
        .collect();
    // warm the constant cache outside the parallel section
    for n in 1..=2 {
        for p in SUITE_EXPONENTS {
            spherical_constant(n, p);
        }
    }
    let results = par::map_indexed(draws.len(), |i| {
        let (e, a, p) = &draws[i];
        match spherical_average_bound(e, *a, *p) {
            Ok(r) => (r.ok, r.integral / r.bound),
            Err(_) => (false, f64::INFINITY),
        }
    });
    reports.push(summarize("spherical_estimate", &results, 1.0));

    let mut rng = stream(3);
    let draws: Vec<(f64, f64, f64)> = (0..oracle_samples)
        .map(|_| (rng.gen_range(-10.0..=10.0), rng.gen_range(-10.0..=10.0), pick_p(&mut rng)))
        .collect();
    const ORACLE_TOL: f64 = 1e-10;
    let results = par::map_indexed(draws.len(), |i| {
        let (a, b, p) = draws[i];
        let exact = weighted_power_integral(a, b, p);
        let quad = weighted_power_integral_quadrature(a, b, p);
        let rel = (exact - quad).abs() / exact.abs();
        (rel <= ORACLE_TOL, rel)
    });
    reports.push(summarize("closed_form_vs_quadrature", &results, ORACLE_TOL));
    reports
}

fn summarize(lemma: &str, results: &[(bool, f64)], tol: f64) -> LemmaReport {
    let violations = results.iter().filter(|r| !r.0).count();
    let worst_ratio = results.iter().map(|r| r.1).fold(0.0, f64::max);
    LemmaReport {
        lemma: lemma.into(),
        samples: results.len(),
        violations,
        worst_ratio,
        tol,
        pass: violations == 0,
    }
}

use serde::{Deserialize, Serialize};

use super::{fit_line, pv_evaluate, Directions};
use crate::algebra::{spherical_integral, PowerIntegralConstants};
use crate::function_space::AnalyticFunction;
use crate::kernels::KernelSpec;
use crate::{critical_exponent, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Nonvanishing gradient, or `p` above the critical exponent.
    Regular,
    /// Vanishing gradient below the critical exponent; needs a C²_β bound.
    Singular,
}

/// Explicit bound on `|∫_{B_ε(x)} [g(u(x) - u(y)) - g(∇u(x)·(x - y))] K(x - y) dy|`.
///
/// Constants come from sampling `|∇u|`, `|D²u|` and `|u(y) - u(x)| / |y - x|^β`
/// on `B_ε(x)`, so the bound is as good as the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub regime: Regime,
    pub eps: f64,
    pub bound: f64,
    pub gradient_norm: f64,
    pub hessian_sup: f64,
    pub beta: Option<f64>,
    /// Exponent of ε in the dominant term.
    pub rate: f64,
}

fn spectral_norm(m: [[f64; 2]; 2], n: usize) -> f64 {
    if n == 1 {
        return m[0][0].abs();
    }
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean + rad).abs().max((mean - rad).abs())
}

pub fn near_zone_certificate(
    u: &AnalyticFunction,
    x: &[f64],
    eps: f64,
    spec: &KernelSpec,
    beta: Option<f64>,
) -> Result<Certificate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {eps} must be positive")));
    }
    let (n, p, sp) = (spec.n, spec.p, spec.sp());
    let grad = u.gradient(x);
    let g0 = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
    let dirs = Directions::new(spec, 16);
    let a_max = dirs
        .dirs
        .iter()
        .map(|w| spec.angular_factor(&w[..n]))
        .fold(0.0, f64::max);
    let mass = spec.sphere_mass();

    let mut hess_sup: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let ux = u.value(x);
    for w in &dirs.dirs {
        for j in 1..=16 {
            let rho = eps * j as f64 / 16.0;
            let y = [x[0] + rho * w[0], if n > 1 { x[1] + rho * w[1] } else { 0.0 }];
            hess_sup = hess_sup.max(spectral_norm(u.hessian(&y[..n]), n));
            if let Some(b) = beta {
                growth = growth.max((u.value(&y[..n]) - ux).abs() / rho.powf(b));
            }
        }
    }
    let c = PowerIntegralConstants::new(p).c_upper * (p - 1.0);
    let half_m = 0.5 * hess_sup;
    let hoelder_rate = 2.0 * p - 2.0 - sp;
    let regular_rate = p - sp;

    let singular = g0 <= 1e-12 * (1.0 + ux.abs()) && p <= critical_exponent(spec.s);
    if singular {
        let b = beta.ok_or_else(|| {
            Error::InadmissibleTestFunction("vanishing gradient below the critical exponent needs a C²_β exponent".into())
        })?;
        let marginal = sp / (p - 1.0);
        if !(b > marginal) {
            return Err(Error::InadmissibleTestFunction(format!("β = {b} must exceed sp/(p-1) = {marginal}")));
        }
        let rate = b * (p - 1.0) - sp;
        return Ok(Certificate {
            regime: Regime::Singular,
            eps,
            bound: mass * a_max.max(1.0) * growth.powf(p - 1.0) * eps.powf(rate) / rate,
            gradient_norm: g0,
            hessian_sup: hess_sup,
            beta: Some(b),
            rate,
        });
    }

    let (bound, rate) = if p >= 2.0 {
        // (|a| + |b|)^{p-2} ≤ (2 |∇u| ρ + ½ M ρ²)^{p-2}, |b - a| ≤ ½ M ρ²
        let split = 2f64.powf((p - 3.0).max(0.0));
        let first = (2.0 * g0).powf(p - 2.0) * eps.powf(regular_rate) / regular_rate;
        let second = half_m.powf(p - 2.0) * eps.powf(hoelder_rate) / hoelder_rate;
        (c * mass * half_m * split * (first + second), regular_rate)
    } else {
        let mut best = (f64::INFINITY, regular_rate);
        if g0 > 0.0 {
            // (|a| + |b|)^{p-2} ≤ |∇u·(y - x)|^{p-2}
            let e = [grad[0] / g0, grad[1] / g0];
            let sphere = spherical_integral(&e[..n], 0.0, p)?;
            let v = c * half_m * g0.powf(p - 2.0) * a_max * sphere * eps.powf(regular_rate) / regular_rate;
            best = (v, regular_rate);
        }
        if hoelder_rate > 0.0 {
            let v = mass * a_max.max(1.0) * 2f64.powf(2.0 - p) * half_m.powf(p - 1.0) * eps.powf(hoelder_rate)
                / hoelder_rate;
            if v < best.0 {
                best = (v, hoelder_rate);
            }
        }
        best
    };
    Ok(Certificate { regime: Regime::Regular, eps, bound, gradient_norm: g0, hessian_sup: hess_sup, beta, rate })
}

/// Continuity of `x ↦ L u(x)` near `x0` and stability of `L φ` under
/// bump perturbations `φ + θη`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub reference: f64,
    pub distances: Vec<f64>,
    pub values: Vec<f64>,
    pub modulus: Vec<f64>,
    pub thetas: Vec<f64>,
    pub gaps: Vec<f64>,
    pub gap_slope: Option<f64>,
}

pub fn continuity_probe(u: &AnalyticFunction, x0: &[f64], radius: f64, spec: &KernelSpec) -> Result<ContinuityReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let n = spec.n;
    let tol = 1e-10;
    let value = |f: &AnalyticFunction, y: &[f64]| -> Result<f64> {
        let r = pv_evaluate(f, y, spec, tol)?;
        r.value.ok_or_else(|| Error::Domain(format!("principal value at {y:?} is {:?}", r.verdict)))
    };
    let shifted = |t: f64, axis: usize| {
        let mut y = [x0[0], if n > 1 { x0[1] } else { 0.0 }];
        y[axis] += t;
        y
    };

    let reference = value(u, x0)?;
    let distances: Vec<f64> = (1..=8).map(|k| radius * 0.5f64.powi(k)).collect();
    let mut values = Vec::new();
    for &d in &distances {
        values.push(value(u, &shifted(d, 0)[..n])?);
    }
    let modulus = values.iter().map(|v| (v - reference).abs()).collect();

    let center = [x0[0], if n > 1 { x0[1] } else { 0.0 }];
    let eta = AnalyticFunction::bump(n, center, 0.5 * radius, 1.0)?;
    let mut probes = vec![center];
    for axis in 0..n {
        for t in [-0.75, -0.25, 0.25, 0.75] {
            probes.push(shifted(t * radius, axis));
        }
    }
    let base: Vec<f64> = probes.iter().map(|y| value(u, &y[..n])).collect::<Result<_>>()?;
    let thetas = vec![0.0, 1e-1, 1e-2, 1e-3, 1e-4];
    let mut gaps = Vec::new();
    for &theta in &thetas {
        if theta == 0.0 {
            gaps.push(0.0);
            continue;
        }
        let perturbed = u.add(&eta.scale_shift(theta, 0.0)?)?;
        let mut gap: f64 = 0.0;
        for (y, b) in probes.iter().zip(&base) {
            gap = gap.max((value(&perturbed, &y[..n])? - b).abs());
        }
        gaps.push(gap);
    }
    let pts: Vec<(f64, f64)> = thetas
        .iter()
        .zip(&gaps)
        .filter(|(t, g)| **t > 0.0 && **g > 0.0)
        .map(|(t, g)| (t.ln(), g.ln()))
        .collect();
    let gap_slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        fit_line(&xs, &ys).0
    });
    Ok(ContinuityReport { reference, distances, values, modulus, thetas, gaps, gap_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pv_engine::near_zone_integral;

    #[test]
    fn regular_certificate_scales_with_the_leading_power() {
        let spec = KernelSpec::fractional(1, 0.5, 3.0).unwrap();
        let u = AnalyticFunction::capped_square(1).unwrap();
        let a = near_zone_certificate(&u, &[0.3], 1e-4, &spec, None).unwrap();
        let b = near_zone_certificate(&u, &[0.3], 5e-5, &spec, None).unwrap();
        let expected = 0.5f64.powf(3.0 * 0.5);
        assert_eq!(a.regime, Regime::Regular);
        assert!((b.bound / a.bound / expected - 1.0).abs() < 0.01, "{}", b.bound / a.bound);
    }

    #[test]
    fn measured_near_zone_respects_the_certificate() {
        let u = AnalyticFunction::capped_square(1).unwrap();
        for (s, p) in [(0.5, 3.0), (0.3, 1.5), (0.7, 1.3), (0.5, 2.0)] {
            let spec = KernelSpec::fractional(1, s, p).unwrap();
            for eps in [0.2, 0.05, 0.01] {
                let measured = near_zone_integral(&u, &[0.3], &spec, eps).unwrap();
                let cert = near_zone_certificate(&u, &[0.3], eps, &spec, None).unwrap();
                assert!(measured.abs() <= cert.bound, "s={s} p={p} eps={eps}: {measured} > {}", cert.bound);
            }
        }
    }

    #[test]
    fn singular_regime_rate_and_admissibility() {
        let (s, p) = (0.6, 1.3);
        let spec = KernelSpec::fractional(1, s, p).unwrap();
        let marginal = s * p / (p - 1.0);
        let beta = 1.5 * marginal;
        let u = AnalyticFunction::radial_power(1, [0.0; 2], 1.0, beta).unwrap();
        let eps: Vec<f64> = (4..=12).map(|k| 0.5f64.powi(k)).collect();
        let vals: Vec<f64> = eps.iter().map(|e| near_zone_integral(&u, &[0.0], &spec, *e).unwrap()).collect();
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = vals.iter().map(|v| v.abs().ln()).collect();
        let slope = fit_line(&xs, &ys).0;
        let predicted = beta * (p - 1.0) - s * p;
        assert!((slope / predicted - 1.0).abs() < 0.15, "{slope} vs {predicted}");
        let cert = near_zone_certificate(&u, &[0.0], 0.01, &spec, Some(beta)).unwrap();
        assert_eq!(cert.regime, Regime::Singular);
        assert!(near_zone_integral(&u, &[0.0], &spec, 0.01).unwrap().abs() <= cert.bound);
        assert!(matches!(
            near_zone_certificate(&u, &[0.0], 0.01, &spec, Some(marginal)),
            Err(Error::InadmissibleTestFunction(_))
        ));
        assert!(near_zone_certificate(&u, &[0.0], 0.01, &spec, None).is_err());
    }

    #[test]
    fn continuity_probe_behaviour() {
        let spec = KernelSpec::fractional(1, 0.5, 2.0).unwrap();
        let a = AnalyticFunction::affine(1, 0.0, [1.0, 0.0]).unwrap();
        let rep = continuity_probe(&a, &[0.0], 0.2, &spec).unwrap();
        assert!(rep.modulus.iter().all(|m| m.abs() < 1e-10));
        let u = AnalyticFunction::capped_square(1).unwrap();
        let rep = continuity_probe(&u, &[0.3], 0.2, &spec).unwrap();
        assert_eq!(rep.gaps[0], 0.0);
        assert!((rep.gap_slope.unwrap() - 1.0).abs() < 0.02, "{:?}", rep.gap_slope);
        assert!(rep.modulus.windows(2).all(|w| w[1] <= w[0] * 1.0001));
    }
}

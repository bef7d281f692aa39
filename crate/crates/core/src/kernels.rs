//! Translation-invariant kernels `K(z) = a(z/|z|) |z|^{-n-sp}`.
//!
//! Kernels are functions of the offset `z = x - y` only, so translation
//! invariance holds by construction. Symmetry `K(z) = K(-z)` is enforced by
//! rejecting angular factors with odd Fourier modes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Radial profile of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "profile")]
pub enum Profile {
    /// `|z|^{-n-sp}`.
    Power,
    /// `a(ω) |z|^{-n-sp}` with `a(θ) = Σ_m c_m cos(m θ)`; `θ` is the polar
    /// angle of `ω` (0 or π when n = 1).
    Perturbed { angular_coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub lambda: f64,
    pub profile: Profile,
}

impl KernelSpec {
    pub fn new(n: usize, s: f64, p: f64, lambda: f64, profile: Profile) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::InvalidParameter(format!("dimension {n} not in {{1, 2}}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s = {s} not in (0, 1)")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be >= 1")));
        }
        if let Profile::Perturbed { angular_coeffs } = &profile {
            if angular_coeffs.is_empty() {
                return Err(Error::InvalidParameter("empty angular_coeffs".into()));
            }
            if let Some((m, c)) = angular_coeffs
                .iter()
                .enumerate()
                .find(|(m, c)| m % 2 == 1 && **c != 0.0)
            {
                return Err(Error::InvalidParameter(format!(
                    "odd angular mode cos({m}θ) with coefficient {c} breaks K(z) = K(-z)"
                )));
            }
            let spec = KernelSpec { n, s, p, lambda, profile: profile.clone() };
            let min = (0..4096)
                .map(|k| spec.angular_factor_at(2.0 * PI * k as f64 / 4096.0))
                .fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "angular factor is not positive (min {min})"
                )));
            }
        }
        Ok(Self { n, s, p, lambda, profile })
    }

    /// Pure power kernel with `Λ = 1`.
    pub fn fractional(n: usize, s: f64, p: f64) -> Result<Self> {
        Self::new(n, s, p, 1.0, Profile::Power)
    }

    /// `sp`.
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// `n + sp`, the homogeneity of the kernel singularity.
    pub fn exponent(&self) -> f64 {
        self.n as f64 + self.sp()
    }

    /// Angular factor at polar angle `theta`.
    pub fn angular_factor_at(&self, theta: f64) -> f64 {
        match &self.profile {
            Profile::Power => 1.0,
            Profile::Perturbed { angular_coeffs } => angular_coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| if m == 0 { *c } else { c * (m as f64 * theta).cos() })
                .sum(),
        }
    }

    /// Angular factor for a direction `omega` (need not be normalized).
    pub fn angular_factor(&self, omega: &[f64]) -> f64 {
        match self.profile {
            Profile::Power => 1.0,
            _ => {
                let theta = if self.n == 1 {
                    if omega[0] >= 0.0 {
                        0.0
                    } else {
                        PI
                    }
                } else {
                    omega[1].atan2(omega[0])
                };
                self.angular_factor_at(theta)
            }
        }
    }

    /// `K(z)`; errors at the origin.
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        let r = norm(z);
        if r == 0.0 {
            return Err(Error::Domain("kernel is singular at z = 0".into()));
        }
        Ok(self.eval_polar(r, z))
    }

    /// `K` at radius `r > 0` in direction `omega`.
    #[inline]
    pub fn eval_polar(&self, r: f64, omega: &[f64]) -> f64 {
        self.angular_factor(omega) * radial_power(r, self.exponent())
    }

    /// `∫_{S^{n-1}} a(ω) dω`.
    pub fn sphere_mass(&self) -> f64 {
        match (&self.profile, self.n) {
            (Profile::Power, 1) => 2.0,
            (Profile::Power, _) => 2.0 * PI,
            (Profile::Perturbed { .. }, 1) => self.angular_factor_at(0.0) + self.angular_factor_at(PI),
            (Profile::Perturbed { angular_coeffs }, _) => 2.0 * PI * angular_coeffs[0],
        }
    }

    /// `∫_{|z| > r} K(z) dz`.
    pub fn mass_outside(&self, r: f64) -> f64 {
        self.sphere_mass() * r.powf(-self.sp()) / self.sp()
    }
}

#[inline]
fn radial_power(r: f64, e: f64) -> f64 {
    r.powf(-e)
}

pub fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sample plan for the admissibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePlan {
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
    pub n_angles: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self { r_min: 1e-3, r_max: 1e3, n_radii: 61, n_angles: 128 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomResult {
    pub axiom: String,
    pub pass: bool,
    /// Worst observed quantity (meaning depends on the axiom).
    pub worst_value: f64,
    pub witness: Option<Vec<f64>>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub symmetry: AxiomResult,
    pub translation_invariance: AxiomResult,
    pub growth: AxiomResult,
    pub continuity: AxiomResult,
    pub all_pass: bool,
}

/// Sample the kernel and test the four `Ker(Λ)` axioms.
pub fn check_admissibility(spec: &KernelSpec, plan: &SamplePlan) -> Result<AdmissibilityReport> {
    if !(plan.r_min > 0.0) || (plan.r_max / plan.r_min).log10() < 4.0 - 1e-12 {
        return Err(Error::InvalidParameter(
            "sample radii must span at least 4 decades".into(),
        ));
    }
    if plan.n_radii < 2 || (spec.n == 2 && plan.n_angles < 8) {
        return Err(Error::InvalidParameter("sample plan too coarse".into()));
    }
    let directions: Vec<Vec<f64>> = if spec.n == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..plan.n_angles)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / plan.n_angles as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    };
    let log_lo = plan.r_min.ln();
    let log_hi = plan.r_max.ln();
    let radii: Vec<f64> = (0..plan.n_radii)
        .map(|i| (log_lo + (log_hi - log_lo) * i as f64 / (plan.n_radii - 1) as f64).exp())
        .collect();

    let exponent = spec.exponent();
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_at, mut max_at) = (vec![], vec![]);
    let mut worst_sym = 0.0f64;
    let mut sym_at = None;
    let mut worst_cont = 0.0f64;
    let mut cont_at = None;
    const STEP: f64 = 1e-6;
    const CONT_FACTOR: f64 = 1e3;

    for &r in &radii {
        for d in &directions {
            let z: Vec<f64> = d.iter().map(|c| c * r).collect();
            let k = spec.eval_polar(r, &z);
            let ratio = k * r.powf(exponent);
            if ratio < min_ratio {
                min_ratio = ratio;
                min_at = z.clone();
            }
            if ratio > max_ratio {
                max_ratio = ratio;
                max_at = z.clone();
            }
            let zm: Vec<f64> = z.iter().map(|c| -c).collect();
            let km = spec.eval_polar(r, &zm);
            let sym = (k - km).abs() / k.abs().max(f64::MIN_POSITIVE);
            if sym > worst_sym {
                worst_sym = sym;
                sym_at = Some(z.clone());
            }
            // relative finite-difference modulus along each coordinate
            let delta = STEP * r;
            for axis in 0..spec.n {
                let mut zs = z.clone();
                zs[axis] += delta;
                let ks = spec.eval_polar(norm(&zs), &zs);
                let modulus = (ks - k).abs() / k.abs() / (CONT_FACTOR * STEP);
                if modulus > worst_cont {
                    worst_cont = modulus;
                    cont_at = Some(z.clone());
                }
            }
        }
    }

    let lam = spec.lambda;
    // the ratio is recomputed as K(z) * |z|^(n+sp), so allow rounding slack
    let growth_ok = min_ratio >= (1.0 / lam) * (1.0 - 1e-12) && max_ratio <= lam * (1.0 + 1e-12);
    let (worst_value, witness) = if max_ratio / lam >= 1.0 / (min_ratio * lam) {
        (max_ratio, max_at)
    } else {
        (min_ratio, min_at)
    };
    let growth = AxiomResult {
        axiom: "growth".into(),
        pass: growth_ok,
        worst_value,
        witness: Some(witness),
        note: format!("K(z)|z|^(n+sp) in [{min_ratio:.6}, {max_ratio:.6}], required [{:.6}, {lam:.6}]", 1.0 / lam),
    };
    let symmetry = AxiomResult {
        axiom: "symmetry".into(),
        pass: worst_sym <= 1e-14,
        worst_value: worst_sym,
        witness: sym_at,
        note: "max relative |K(z) - K(-z)|".into(),
    };
    let translation_invariance = AxiomResult {
        axiom: "translation_invariance".into(),
        pass: true,
        worst_value: 0.0,
        witness: None,
        note: "structural: kernels depend on x - y only".into(),
    };
    let continuity = AxiomResult {
        axiom: "continuity".into(),
        pass: worst_cont < 1.0,
        worst_value: worst_cont,
        witness: cont_at,
        note: format!(
            "proxy: relative finite-difference change < {CONT_FACTOR:e} * step/|z| (step/|z| = {STEP:e}); worst value is the ratio to that threshold"
        ),
    };
    let all_pass = growth.pass && symmetry.pass && continuity.pass && translation_invariance.pass;
    Ok(AdmissibilityReport { symmetry, translation_invariance, growth, continuity, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_power_values() {
        let k = KernelSpec::fractional(1, 0.5, 2.0).unwrap();
        assert_eq!(k.eval(&[2.0]).unwrap(), 0.25);
        assert_eq!(k.eval(&[-2.0]).unwrap(), 0.25);
        assert!(matches!(k.eval(&[0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_perturbation_matches_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pure = KernelSpec::fractional(2, 0.4, 1.7).unwrap();
        let pert = KernelSpec::new(2, 0.4, 1.7, 1.0, Profile::Perturbed { angular_coeffs: vec![1.0] }).unwrap();
        for _ in 0..10_000 {
            let z = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            assert_eq!(pure.eval(&z).unwrap(), pert.eval(&z).unwrap());
        }
    }

    #[test]
    fn odd_modes_rejected() {
        let r = KernelSpec::new(2, 0.5, 2.0, 2.0, Profile::Perturbed { angular_coeffs: vec![1.0, 0.2] });
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn admissibility_examples() {
        let plan = SamplePlan::default();
        let pure = KernelSpec::fractional(2, 0.5, 2.0).unwrap();
        assert!(check_admissibility(&pure, &plan).unwrap().all_pass);

        let doubled = |lambda| {
            KernelSpec::new(1, 0.5, 2.0, lambda, Profile::Perturbed { angular_coeffs: vec![2.0] }).unwrap()
        };
        let rep = check_admissibility(&doubled(1.0), &plan).unwrap();
        assert!(!rep.growth.pass && !rep.all_pass);
        assert!(rep.growth.witness.is_some());
        assert!((rep.growth.worst_value - 2.0).abs() < 1e-12);
        assert!(check_admissibility(&doubled(2.0), &plan).unwrap().all_pass);

        let aniso = KernelSpec::new(2, 0.5, 2.0, 2.0, Profile::Perturbed { angular_coeffs: vec![1.0, 0.0, 0.4] }).unwrap();
        let rep = check_admissibility(&aniso, &plan).unwrap();
        assert!(rep.all_pass, "{rep:?}");
    }

    #[test]
    fn anisotropic_envelope_oracle() {
        // exhaustive angular sweep: 1 + 0.4 cos(2θ) stays within [0.6, 1.4] ⊂ [1/2, 2]
        let aniso = KernelSpec::new(2, 0.5, 2.0, 2.0, Profile::Perturbed { angular_coeffs: vec![1.0, 0.0, 0.4] }).unwrap();
        let (lo, hi) = (0..100_000)
            .map(|k| aniso.angular_factor_at(2.0 * PI * k as f64 / 100_000.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        assert!((lo - 0.6).abs() < 1e-9 && (hi - 1.4).abs() < 1e-9);
        assert!(lo >= 0.5 && hi <= 2.0);
    }

    #[test]
    fn short_plan_rejected() {
        let k = KernelSpec::fractional(1, 0.5, 2.0).unwrap();
        let plan = SamplePlan { r_min: 1e-1, r_max: 1e2, ..Default::default() };
        assert!(check_admissibility(&k, &plan).is_err());
    }

    #[test]
    fn sphere_mass_matches_quadrature() {
        let k = KernelSpec::new(2, 0.5, 2.0, 2.0, Profile::Perturbed { angular_coeffs: vec![1.2, 0.0, 0.4, 0.0, -0.1] }).unwrap();
        let m: f64 = (0..1000).map(|i| k.angular_factor_at(2.0 * PI * i as f64 / 1000.0)).sum::<f64>() * 2.0 * PI / 1000.0;
        assert!((m - k.sphere_mass()).abs() < 1e-12);
    }
}

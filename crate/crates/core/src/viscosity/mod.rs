//! Viscosity supersolution tests: admissible test functions touching from
//! below, the glued function `φ_r`, and the sign of `L φ_r(x0)`.

mod scan;
mod truncate;

pub use scan::{scan_equivalence, EquivalenceReport, Side, TestFamily, TouchRecord};
pub use truncate::{min_with_constant, truncate_min};

use serde::{Deserialize, Serialize};

use crate::function_space::{dist, AnalyticFunction, CriticalSet, DomainSpec, GridFunction};
use crate::kernels::KernelSpec;
use crate::pv_engine::{pv_evaluate, Field, Verdict};
use crate::{critical_exponent, Error, Result};

/// Which clause admits a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum TestRegime {
    /// `p` above the critical exponent, or `∇φ(x0) ≠ 0`.
    Regular,
    /// Isolated critical point at `x0` with `φ ∈ C²_β`, `β > sp/(p-1)`.
    Singular { beta: f64, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub base: AnalyticFunction,
    pub x0: Vec<f64>,
    pub r: f64,
    pub regime: TestRegime,
}

impl TestFunction {
    /// Classify `base` at `x0`. In the singular case `beta` is required and
    /// the `C²_β` norm over `B_r(x0)` must be finite.
    pub fn new(base: AnalyticFunction, x0: &[f64], r: f64, beta: Option<f64>, spec: &KernelSpec) -> Result<Self> {
        let n = base.dim();
        if x0.len() != n || spec.n != n {
            return Err(Error::InvalidParameter("test function, point and kernel dimensions differ".into()));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("touch radius must be positive, got {r}")));
        }
        let g = base.gradient(x0);
        let gnorm = g[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = 1.0 + base.value(x0).abs();
        if spec.p > critical_exponent(spec.s) || gnorm > 1e-12 * scale {
            return Ok(TestFunction { base, x0: x0.to_vec(), r, regime: TestRegime::Regular });
        }
        let threshold = spec.sp() / (spec.p - 1.0);
        let beta = beta.ok_or_else(|| {
            Error::InadmissibleTestFunction("critical point in the singular range needs an exponent β".into())
        })?;
        if !(beta > threshold) {
            return Err(Error::InadmissibleTestFunction(format!("β = {beta} does not exceed sp/(p-1) = {threshold}")));
        }
        let isolated = match base.critical_set() {
            CriticalSet::Points(pts) => pts.iter().any(|p| dist(&p[..n], x0) <= 1e-12 * (1.0 + r)),
            _ => false,
        };
        if !isolated {
            return Err(Error::InadmissibleTestFunction(format!("{x0:?} is not an isolated critical point")));
        }
        let ball = match n {
            1 => DomainSpec::Interval { lo: x0[0] - r, hi: x0[0] + r },
            _ => DomainSpec::Ball { center: [x0[0], x0[1]], radius: r },
        };
        let norm = c2beta_norm(&base, &ball, beta)?;
        if !norm.is_finite() {
            return Err(Error::InadmissibleTestFunction(format!("C²_β norm with β = {beta} is infinite")));
        }
        Ok(TestFunction { base, x0: x0.to_vec(), r, regime: TestRegime::Singular { beta, norm } })
    }
}

fn spectral_norm(h: &[[f64; 2]; 2], n: usize) -> f64 {
    if n == 1 {
        return h[0][0].abs();
    }
    let tr = 0.5 * (h[0][0] + h[1][1]);
    let off = 0.5 * (h[0][1] + h[1][0]);
    let rad = (0.25 * (h[0][0] - h[1][1]).powi(2) + off * off).sqrt();
    (tr + rad).abs().max((tr - rad).abs())
}

/// `min{d,1}^{β-1}/|∇φ| + |D²φ| d^{2-β}` at one point, `d = d_φ(x) > 0`.
fn c2beta_term(phi: &AnalyticFunction, x: &[f64], d: f64, beta: f64) -> f64 {
    let n = phi.dim();
    let g = phi.gradient(x);
    let gnorm = g[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let first = d.min(1.0).powf(beta - 1.0) / gnorm;
    let h = spectral_norm(&phi.hessian(x), n);
    let second = if h == 0.0 { 0.0 } else { h * d.powf(2.0 - beta) };
    first + second
}

/// Sampled `C²_β` norm over `region`. The sample is a uniform grid refined
/// level by level plus rays closing in on every critical point; if the
/// running sup keeps growing geometrically with the level the norm is
/// reported infinite. `d_φ = ∞` when there are no critical points.
pub fn c2beta_norm(phi: &AnalyticFunction, region: &DomainSpec, beta: f64) -> Result<f64> {
    region.validate()?;
    let n = phi.dim();
    if region.dim() != n {
        return Err(Error::InvalidParameter("region and function dimensions differ".into()));
    }
    let critical: Vec<[f64; 2]> = match phi.critical_set() {
        CriticalSet::Unknown => {
            return Err(Error::InvalidParameter(format!("critical set of {} is unknown", phi.name())));
        }
        CriticalSet::Everywhere => return Ok(f64::INFINITY),
        CriticalSet::None => Vec::new(),
        CriticalSet::Points(p) => p.clone(),
    };
    let d_of = |x: &[f64]| critical.iter().map(|c| dist(x, &c[..n])).fold(f64::INFINITY, f64::min);
    let (lo, hi) = region.bbox();
    let width = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    const LEVELS: usize = 40;
    let mut sups = Vec::with_capacity(LEVELS);
    let mut sup: f64 = 0.0;
    let eval = |x: &[f64], sup: &mut f64| {
        if !region.contains_closed(x, 0.0) {
            return;
        }
        let d = d_of(x);
        if d > 0.0 {
            let t = c2beta_term(phi, x, d, beta);
            *sup = sup.max(if t.is_nan() { f64::INFINITY } else { t });
        }
    };
    let cells = 32;
    for j in 0..=(if n > 1 { cells } else { 0 }) {
        for i in 0..=cells {
            let t = |a: usize, k: usize| lo[a] + (hi[a] - lo[a]) * k as f64 / cells as f64;
            let x = [t(0, i), if n > 1 { t(1, j) } else { 0.0 }];
            eval(&x[..n], &mut sup);
        }
    }
    let dirs: Vec<[f64; 2]> = if n == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..8).map(|a| {
            let t = (a as f64 + 0.5) * std::f64::consts::PI / 4.0;
            [t.cos(), t.sin()]
        }).collect()
    };
    for level in 0..LEVELS {
        let rho = width * 0.5f64.powi(level as i32 + 1);
        for c in &critical {
            for w in &dirs {
                let x = [c[0] + rho * w[0], c[1] + rho * w[1]];
                eval(&x[..n], &mut sup);
            }
        }
        sups.push(sup);
    }
    if !sup.is_finite() {
        return Ok(f64::INFINITY);
    }
    // a bounded ratio settles; d^{β'-β} with β > β' grows by a fixed factor per level
    let tail = &sups[LEVELS - 16..];
    let growth = (tail[15] / tail[0]).log2() / 15.0;
    if growth > 0.01 && tail.windows(2).all(|w| w[1] > w[0]) {
        return Ok(f64::INFINITY);
    }
    Ok(sup)
}

/// `φ` glued into `u` outside the open ball `B_r(x0)`.
#[derive(Debug, Clone)]
pub enum GluedFunction {
    Analytic(AnalyticFunction),
    Grid(GridFunction),
}

impl GluedFunction {
    pub fn analytic(u: &AnalyticFunction, phi: &TestFunction) -> Result<Self> {
        let n = u.dim();
        let c = [phi.x0[0], if n > 1 { phi.x0[1] } else { 0.0 }];
        Ok(GluedFunction::Analytic(AnalyticFunction::glue(&phi.base, u, c, phi.r)?))
    }

    /// Nodes strictly inside `B_r(x0)` take the value of `φ`.
    pub fn grid(u: &GridFunction, phi: &TestFunction) -> Result<Self> {
        let n = u.dim();
        Ok(GluedFunction::Grid(u.map(|x, v| if dist(&x[..n], &phi.x0) < phi.r { phi.base.value(&x[..n]) } else { v })?))
    }

    pub fn field(&self) -> Field<'_> {
        match self {
            GluedFunction::Analytic(a) => Field::Analytic(a),
            GluedFunction::Grid(g) => Field::Grid(g),
        }
    }
}

/// Sample points of `B_r(x0)` used for touching checks on analytic `u`.
fn ball_samples(x0: &[f64], r: f64) -> Vec<Vec<f64>> {
    let n = x0.len();
    let mut pts = Vec::new();
    let rings = 48;
    for k in 1..rings {
        let rho = r * k as f64 / rings as f64;
        if n == 1 {
            pts.push(vec![x0[0] - rho]);
            pts.push(vec![x0[0] + rho]);
        } else {
            let m = 8 + 2 * k;
            for a in 0..m {
                let t = 2.0 * std::f64::consts::PI * a as f64 / m as f64;
                pts.push(vec![x0[0] + rho * t.cos(), x0[1] + rho * t.sin()]);
            }
        }
    }
    for j in 1..=30 {
        let rho = r * 0.5f64.powi(j);
        for s in [-1.0, 1.0] {
            let mut p = x0.to_vec();
            p[0] += s * rho;
            pts.push(p);
            if n == 2 {
                let mut q = x0.to_vec();
                q[1] += s * rho;
                pts.push(q);
            }
        }
    }
    pts
}

/// Verify `φ(x0) = u(x0)` and `φ ≤ u` on `B_r(x0)` up to `1e-12·scale`.
pub fn check_touching(u: Field<'_>, phi: &TestFunction) -> Result<()> {
    let (u0, points): (f64, Vec<Vec<f64>>) = match u {
        Field::Analytic(a) => (a.value(&phi.x0), ball_samples(&phi.x0, phi.r)),
        Field::Grid(g) => {
            let k = g.node_at(&phi.x0).ok_or_else(|| Error::LatticeMismatch(format!("{:?} is not a lattice node", phi.x0)))?;
            let n = g.dim();
            let pts = (0..g.len())
                .map(|j| g.coords(j)[..n].to_vec())
                .filter(|x| dist(x, &phi.x0) < phi.r)
                .collect();
            (g.values()[k], pts)
        }
    };
    let value = |x: &[f64]| match u {
        Field::Analytic(a) => a.value(x),
        Field::Grid(g) => g.value_at(x).unwrap_or(f64::NAN),
    };
    let slack = 1e-12 * (1.0 + u0.abs());
    let excess = phi.base.value(&phi.x0) - u0;
    if excess.abs() > slack {
        return Err(Error::TouchingViolated { witness: phi.x0.clone(), excess });
    }
    for x in points {
        let excess = phi.base.value(&x) - value(&x);
        if excess > slack {
            return Err(Error::TouchingViolated { witness: x, excess });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViscosityReport {
    pub x0: Vec<f64>,
    pub regime: TestRegime,
    pub value: Option<f64>,
    pub verdict: Verdict,
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Glue `φ` into `u`, evaluate `L φ_r(x0)` and pass iff it converged to a
/// value `≥ -tol`.
pub fn check_viscosity_at<'a>(u: impl Into<Field<'a>>, phi: &TestFunction, spec: &KernelSpec, tol: f64) -> Result<ViscosityReport> {
    let u = u.into();
    check_touching(u, phi)?;
    let glued = match u {
        Field::Analytic(a) => GluedFunction::analytic(a, phi)?,
        Field::Grid(g) => GluedFunction::grid(g, phi)?,
    };
    let r = pv_evaluate(glued.field(), &phi.x0, spec, tol.max(1e-14))?;
    let pass = r.verdict == Verdict::Converged && r.value.is_some_and(|v| v >= -tol);
    Ok(ViscosityReport { x0: phi.x0.clone(), regime: phi.regime, value: r.value, verdict: r.verdict, scale: r.scale, tol, pass })
}

#[cfg(test)]
mod tests;

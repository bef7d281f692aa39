use serde::{Deserialize, Serialize};

use crate::function_space::{AnalyticFunction, DomainSpec, FarBehavior, FarField, GridFunction};
use crate::kernels::KernelSpec;
use crate::pv_engine::{pv_evaluate, LatticeOperator, Verdict};
use crate::{Error, Result};

/// `Σ_{x ≠ y} g(u(x) - u(y)) (φ(x) - φ(y)) K(x - y) h^{2n}` over ordered
/// lattice pairs, plus the matching far-field interaction
/// `2 Σ_x φ(x) hⁿ ∫ g(u(x) - F(y)) K(x - y) dy`.
///
/// With the energy of [`super::discrete_energy`] this is exactly
/// `(1/p) d/dt E(u + tφ)` at `t = 0`. By antisymmetry it reduces to
/// `2 hⁿ Σ_x φ(x) L_h u(x)`, which is how it is computed.
pub fn weak_pairing(u: &GridFunction, phi: &GridFunction, spec: &KernelSpec) -> Result<f64> {
    if !u.same_lattice(phi) {
        return Err(Error::LatticeMismatch("test function lives on a different lattice".into()));
    }
    let support: Vec<usize> = (0..phi.len()).filter(|&k| phi.values()[k] != 0.0).collect();
    if let Some(&k) = support.iter().find(|&&k| !phi.is_interior(k)) {
        return Err(Error::Support(format!("test function is nonzero at {:?}", &phi.coords(k)[..phi.dim()])));
    }
    let op = LatticeOperator::new(u, spec)?;
    let lu = op.apply_many(u, &support)?;
    let sum: f64 = support.iter().zip(&lu).map(|(&k, l)| phi.values()[k] * l).sum();
    Ok(2.0 * u.cell_volume() * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeakClass {
    Solution,
    Supersolution,
    Subsolution,
    Neither,
}

/// Pairings against every interior hat function. The lattice hat at `x_k`
/// is 1 at `x_k` and 0 at every other node; `normalized` divides its
/// pairing by the hat mass `hⁿ`, giving `2 L_h u(x_k)`, and the
/// classification compares `normalized` with `tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakResidualReport {
    pub nodes: Vec<Vec<f64>>,
    pub pairings: Vec<f64>,
    pub normalized: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub tol: f64,
    pub supersolution: bool,
    pub subsolution: bool,
    pub classification: WeakClass,
}

pub fn classify_weak(u: &GridFunction, spec: &KernelSpec, tol: f64) -> Result<WeakResidualReport> {
    let interior = u.interior_indices();
    let op = LatticeOperator::new(u, spec)?;
    let lu = op.apply_many(u, &interior)?;
    let hn = u.cell_volume();
    let normalized: Vec<f64> = lu.iter().map(|l| 2.0 * l).collect();
    let pairings = normalized.iter().map(|v| v * hn).collect();
    let min = normalized.iter().copied().fold(f64::INFINITY, f64::min);
    let max = normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let supersolution = min >= -tol;
    let subsolution = max <= tol;
    let classification = match (supersolution, subsolution) {
        (true, true) => WeakClass::Solution,
        (true, false) => WeakClass::Supersolution,
        (false, true) => WeakClass::Subsolution,
        (false, false) => WeakClass::Neither,
    };
    Ok(WeakResidualReport {
        nodes: interior.iter().map(|&k| u.coords(k)[..u.dim()].to_vec()).collect(),
        pairings,
        normalized,
        min,
        max,
        tol,
        supersolution,
        subsolution,
        classification,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseWeakReport {
    pub sample_points: Vec<Vec<f64>>,
    pub pointwise_values: Vec<Option<f64>>,
    pub all_converged: bool,
    pub pointwise_min: f64,
    pub weak: WeakResidualReport,
    /// Pointwise nonnegativity at every sample implies a weak supersolution.
    pub consistent: bool,
}

/// Exact far-field model of `u` and the radius beyond which it holds.
fn far_model(u: &AnalyticFunction) -> Result<(FarField, f64)> {
    match u.far_behavior() {
        FarBehavior::Model { radius, model } => Ok((model, radius)),
        FarBehavior::Affine { radius } => {
            let n = u.dim();
            let y = [radius + 1.0, 0.0];
            let a = u.gradient(&y[..n]);
            let slope = if n == 1 { [a[0], 0.0] } else { a };
            let offset = u.value(&y[..n]) - slope[0] * y[0] - slope[1] * y[1];
            Ok((FarField::Affine { offset, slope }, radius))
        }
        FarBehavior::Growth { .. } => {
            Err(Error::InvalidParameter(format!("{} has no exact far-field model to sample", u.name())))
        }
    }
}

/// Sample `u` on a lattice over `region`, evaluate `L u` pointwise at up to
/// `samples` interior nodes and classify the lattice function weakly.
pub fn c2_pointwise_to_weak_check(
    u: &AnalyticFunction,
    region: &DomainSpec,
    spec: &KernelSpec,
    h: f64,
    samples: usize,
    tol: f64,
) -> Result<PointwiseWeakReport> {
    region.validate()?;
    let n = u.dim();
    if region.dim() != n || spec.n != n {
        return Err(Error::InvalidParameter("function, region and kernel dimensions differ".into()));
    }
    let (far, radius) = far_model(u)?;
    let (lo, hi) = region.bbox();
    let reach = lo.iter().chain(hi.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let collar = region.diameter().max(radius - reach + h);
    let grid = GridFunction::new(region.clone(), h, collar, far, |x| u.value(x))?;
    let interior = grid.interior_indices();
    let stride = (interior.len() / samples.max(1)).max(1);
    let picks: Vec<usize> = interior.iter().copied().skip(stride / 2).step_by(stride).take(samples).collect();
    let mut sample_points = Vec::new();
    let mut pointwise_values = Vec::new();
    let mut all_converged = true;
    for &k in &picks {
        let x = grid.coords(k)[..n].to_vec();
        let r = pv_evaluate(u, &x, spec, 1e-8)?;
        if r.verdict != Verdict::Converged {
            all_converged = false;
        }
        pointwise_values.push(r.value.filter(|_| r.verdict == Verdict::Converged));
        sample_points.push(x);
    }
    let pointwise_min = pointwise_values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let weak = classify_weak(&grid, spec, tol)?;
    let consistent = !(all_converged && pointwise_min >= 0.0) || weak.supersolution;
    Ok(PointwiseWeakReport { sample_points, pointwise_values, all_converged, pointwise_min, weak, consistent })
}

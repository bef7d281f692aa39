//! Discrete comparison principle and the doubling-of-variables quantities
//! behind it.

mod doubling;

pub use doubling::{doubling_diagnostic, doubling_exponent, write_doubling_csv, DoublingDiagnostic, DoublingStep};

use serde::{Deserialize, Serialize};

use crate::function_space::GridFunction;
use crate::kernels::KernelSpec;
use crate::weak_solver::classify_weak;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `min (u - v)` over interior nodes and where it is attained.
    pub min_gap: f64,
    pub witness: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
    /// Smallest normalized hat pairing of `u` (a supersolution has it ≥ 0).
    pub u_weak_min: f64,
    /// Largest normalized hat pairing of `v` (a subsolution has it ≤ 0).
    pub v_weak_max: f64,
}

/// Check `u ≥ v` inside the domain, given `u ≥ v` outside it. Ordering of
/// the exterior is verified on collar nodes and on the exterior quadrature
/// nodes of the far fields.
pub fn compare(u: &GridFunction, v: &GridFunction, spec: &KernelSpec, tol: f64) -> Result<ComparisonReport> {
    if !u.same_lattice(v) {
        return Err(Error::LatticeMismatch("compared functions live on different lattices".into()));
    }
    let n = u.dim();
    for k in (0..u.len()).filter(|&k| !u.is_interior(k)) {
        let gap = u.values()[k] - v.values()[k];
        if gap < -1e-12 * (1.0 + u.values()[k].abs()) {
            return Err(Error::BoundaryOrder { witness: u.coords(k)[..n].to_vec(), gap });
        }
    }
    let (fu, fv) = (u.far_field(), v.far_field());
    for y in &u.exterior_quadrature(spec.sp()).points {
        let (a, b) = (fu.value(&y[..n]), fv.value(&y[..n]));
        if a - b < -1e-12 * (1.0 + a.abs()) {
            return Err(Error::BoundaryOrder { witness: y[..n].to_vec(), gap: a - b });
        }
    }
    let (mut min_gap, mut witness) = (f64::INFINITY, Vec::new());
    for k in u.interior_indices() {
        let gap = u.values()[k] - v.values()[k];
        if gap < min_gap {
            min_gap = gap;
            witness = u.coords(k)[..n].to_vec();
        }
    }
    let u_weak_min = classify_weak(u, spec, 0.0)?.min;
    let v_weak_max = classify_weak(v, spec, 0.0)?.max;
    Ok(ComparisonReport { min_gap, witness, tol, pass: min_gap >= -tol, u_weak_min, v_weak_max })
}

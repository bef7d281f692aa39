use serde::{Deserialize, Serialize};

use super::far::FarField;
use super::grid::{GridFunction, KernelTable};
use super::{dist, DomainSpec};
use crate::kernels::KernelSpec;
use crate::{abs_power, par, Error, Result};

/// Discrete `W^{s,p}` seminorm of `u` over `region`: the p-th root of the
/// double sum over node pairs in the closed region of
/// `|u_i - u_j|^p |x_i - x_j|^{-n-sp} h^{2n}`, diagonal excluded.
pub fn gagliardo_seminorm(u: &GridFunction, region: &DomainSpec, s: f64, p: f64) -> Result<f64> {
    let n = u.dim();
    if region.dim() != n {
        return Err(Error::LatticeMismatch("region dimension differs from the lattice".into()));
    }
    let spec = KernelSpec::fractional(n, s, p)?;
    let slack = 1e-9 * u.h();
    let nodes: Vec<usize> = (0..u.len())
        .filter(|&k| region.contains_closed(&u.coords(k)[..n], slack))
        .collect();
    let table = KernelTable::new(&spec, u.h(), u.dims());
    let vals = u.values();
    let total = par::sum_indexed(nodes.len(), |a| {
        let i = nodes[a];
        let mi = u.multi_index(i);
        let ui = vals[i];
        nodes
            .iter()
            .map(|&j| abs_power(ui - vals[j], p) * table.get(mi, u.multi_index(j)))
            .sum::<f64>()
    });
    let vol = u.cell_volume();
    Ok((total * vol * vol).powf(1.0 / p))
}

/// `Tail(f; z, r) = (r^{sp} ∫_{ℝⁿ \ B_r(z)} |f|^{p-1} |y - z|^{-n-sp} dy)^{1/(p-1)}`,
/// with midpoint quadrature on the lattice cells and the exterior quadrature
/// for the far-field model.
pub fn tail(f: &GridFunction, z: &[f64], r: f64, s: f64, p: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("tail radius {r} must be positive")));
    }
    if !(s > 0.0 && s < 1.0 && p > 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < s < 1 and p > 1, got s = {s}, p = {p}")));
    }
    let far = f.far_field();
    if !far.in_tail_space(s, p) {
        return Err(Error::NotInTailSpace(format!(
            "far-field growth {} reaches the marginal exponent {}",
            far.growth_exponent(),
            FarField::marginal_exponent(s, p)
        )));
    }
    let n = f.dim();
    let sp = s * p;
    let expo = -(n as f64) - sp;
    let vals = f.values();
    let lattice = par::sum_indexed(f.len(), |k| {
        let d = dist(&f.coords(k)[..n], z);
        if d >= r {
            abs_power(vals[k], p - 1.0) * d.powf(expo)
        } else {
            0.0
        }
    }) * f.cell_volume();
    let exterior = f.exterior_quadrature(sp).integrate(|y| {
        let d = dist(&y[..n], z);
        if d >= r {
            abs_power(far.value(&y[..n]), p - 1.0) * d.powf(expo)
        } else {
            0.0
        }
    });
    Ok((r.powf(sp) * (lattice + exterior)).powf(1.0 / (p - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailspaceWitness {
    pub member: bool,
    pub growth_exponent: f64,
    pub marginal_exponent: f64,
}

/// Lattice values are bounded, so membership is decided by the far field.
pub fn check_tailspace_membership(f: &GridFunction, s: f64, p: f64) -> TailspaceWitness {
    let far = f.far_field();
    TailspaceWitness {
        member: far.in_tail_space(s, p),
        growth_exponent: far.growth_exponent(),
        marginal_exponent: FarField::marginal_exponent(s, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval() -> DomainSpec {
        DomainSpec::Interval { lo: -0.5, hi: 0.5 }
    }

    #[test]
    fn tail_of_constant_matches_radial_formula() {
        let h = 1.0 / 64.0;
        let f = GridFunction::new(interval(), h, 1.0, FarField::Constant { value: 1.0 }, |_| 1.0).unwrap();
        // radius on a cell face, so the lattice part is a pure midpoint rule
        let r = 0.5 + 0.5 * h;
        let t = tail(&f, &[0.0], r, 0.5, 2.0).unwrap();
        assert!((t - 2.0).abs() < 1e-3, "{t}");
        let zero = f.map(|_, _| 0.0).unwrap().with_far_field(FarField::Zero).unwrap();
        assert_eq!(tail(&zero, &[0.1], 0.3, 0.5, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_rejects_marginal_growth() {
        let (s, p) = (0.5, 2.0);
        let g = FarField::marginal_exponent(s, p);
        let f = GridFunction::new(interval(), 0.1, 1.0, FarField::Power { amplitude: 1.0, gamma: g }, |_| 0.0).unwrap();
        assert!(matches!(tail(&f, &[0.0], 0.2, s, p), Err(Error::NotInTailSpace(_))));
        assert!(!check_tailspace_membership(&f, s, p).member);
    }

    #[test]
    fn tail_is_monotone() {
        let f = GridFunction::new(interval(), 0.05, 1.0, FarField::Power { amplitude: 0.5, gamma: 0.3 }, |x| x[0].sin())
            .unwrap();
        let g = f.map(|_, v| 2.0 * v.abs() + 0.1).unwrap().with_far_field(FarField::Power { amplitude: 1.0, gamma: 0.3 }).unwrap();
        assert!(tail(&f, &[0.1], 0.3, 0.6, 1.7).unwrap() <= tail(&g, &[0.1], 0.3, 0.6, 1.7).unwrap());
    }

    #[test]
    fn seminorm_invariances() {
        let f = GridFunction::new(interval(), 1.0 / 32.0, 1.0, FarField::Zero, |x| x[0] * x[0] - x[0]).unwrap();
        let region = DomainSpec::Interval { lo: -0.25, hi: 0.5 };
        let a = gagliardo_seminorm(&f, &region, 0.3, 2.5).unwrap();
        let shifted = gagliardo_seminorm(&f.map(|_, v| v + 7.0).unwrap(), &region, 0.3, 2.5).unwrap();
        let scaled = gagliardo_seminorm(&f.map(|_, v| -3.0 * v).unwrap(), &region, 0.3, 2.5).unwrap();
        assert!((a - shifted).abs() < 1e-12 * a);
        assert!((3.0 * a - scaled).abs() < 1e-12 * scaled);
        let c = f.map(|_, _| 4.0).unwrap();
        assert_eq!(gagliardo_seminorm(&c, &region, 0.3, 2.5).unwrap(), 0.0);
    }
}

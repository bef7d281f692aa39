use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;

/// Exterior model for a lattice function outside its covered box.
/// Power growth is measured from the coordinate origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum FarField {
    Zero,
    Constant { value: f64 },
    Power { amplitude: f64, gamma: f64 },
    /// `negative` where the first coordinate is negative, `positive` elsewhere.
    Halfspace { negative: f64, positive: f64 },
    /// `offset + slope · y`.
    Affine { offset: f64, slope: [f64; 2] },
}

impl FarField {
    pub fn value(&self, y: &[f64]) -> f64 {
        match *self {
            FarField::Zero => 0.0,
            FarField::Constant { value } => value,
            FarField::Power { amplitude, gamma } => {
                let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                amplitude * r.powf(gamma)
            }
            FarField::Halfspace { negative, positive } => {
                if y[0] < 0.0 {
                    negative
                } else {
                    positive
                }
            }
            FarField::Affine { offset, slope } => offset + y.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>(),
        }
    }

    pub fn growth_exponent(&self) -> f64 {
        match *self {
            FarField::Power { amplitude, gamma } if amplitude != 0.0 => gamma,
            FarField::Affine { slope, .. } if slope != [0.0, 0.0] => 1.0,
            _ => 0.0,
        }
    }

    /// Largest admissible growth exponent, `sp / (p - 1)`.
    pub fn marginal_exponent(s: f64, p: f64) -> f64 {
        s * p / (p - 1.0)
    }

    /// `γ (p - 1) < sp`.
    pub fn in_tail_space(&self, s: f64, p: f64) -> bool {
        self.growth_exponent() * (p - 1.0) < s * p
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            FarField::Zero => true,
            FarField::Constant { value } => value.is_finite(),
            FarField::Power { amplitude, gamma } => amplitude.is_finite() && gamma.is_finite(),
            FarField::Halfspace { negative, positive } => negative.is_finite() && positive.is_finite(),
            FarField::Affine { offset, slope } => offset.is_finite() && slope.iter().all(|v| v.is_finite()),
        }
    }
}

/// Quadrature for integrals over the complement of an axis-aligned box.
///
/// Polar coordinates about the box center, with the radius substituted as
/// `ρ = ρ_min(ω) t^{-1/(sp)}`; this turns a kernel decaying like
/// `ρ^{-n-sp}` into a bounded integrand on `t ∈ (0, 1)`. Nodes are tanh-sinh
/// in `t` and Gauss-Legendre per angular panel, split at the box corners.
/// Weights include the Jacobian, so `∫ F ≈ Σ w_k F(y_k)`.
#[derive(Debug, Clone)]
pub struct ExteriorQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

// radii beyond this are dropped; they carry a fraction ~ (ρ_min / RHO_CAP)^{sp}
const RHO_CAP: f64 = 1e100;

impl ExteriorQuadrature {
    pub fn new(lo: &[f64], hi: &[f64], sp: f64) -> Self {
        let n = lo.len();
        let kappa = 1.0 / sp;
        let t_nodes = tanh_sinh_unit(0.125, 3.5);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let c = [0.5 * (lo[0] + hi[0]), if n == 2 { 0.5 * (lo[1] + hi[1]) } else { 0.0 }];
        let hw = [0.5 * (hi[0] - lo[0]), if n == 2 { 0.5 * (hi[1] - lo[1]) } else { 0.0 }];

        let mut push = |omega: [f64; 2], rho_min: f64, w_omega: f64| {
            for &(t, wt) in &t_nodes {
                let rho = rho_min * t.powf(-kappa);
                if !(rho < RHO_CAP) {
                    continue;
                }
                let jac = kappa * rho_min * t.powf(-kappa - 1.0) * rho.powi(n as i32 - 1);
                points.push([c[0] + rho * omega[0], c[1] + rho * omega[1]]);
                weights.push(wt * w_omega * jac);
            }
        };

        if n == 1 {
            push([1.0, 0.0], hw[0], 1.0);
            push([-1.0, 0.0], hw[0], 1.0);
        } else {
            let a = hw[1].atan2(hw[0]);
            let corners = [-a, a, PI - a, PI + a, 2.0 * PI - a];
            let gl = GaussLegendre::new(24);
            for k in 0..4 {
                for (th, w) in gl.mapped(corners[k], corners[k + 1]) {
                    let (sn, cs) = th.sin_cos();
                    let rho_min = if k % 2 == 0 { hw[0] / cs.abs() } else { hw[1] / sn.abs() };
                    push([cs, sn], rho_min, w);
                }
            }
        }
        ExteriorQuadrature { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64; 2]) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(y, w)| w * f(y)).sum()
    }
}

/// Tanh-sinh nodes and weights on (0, 1).
fn tanh_sinh_unit(step: f64, u_max: f64) -> Vec<(f64, f64)> {
    let m = (u_max / step).round() as i64;
    (-m..=m)
        .filter_map(|k| {
            let u = k as f64 * step;
            let v = 0.5 * PI * u.sinh();
            let q = (-2.0 * v.abs()).exp();
            let near = q / (1.0 + q);
            let t = if u < 0.0 { near } else { 1.0 / (1.0 + q) };
            let w = step * 0.5 * PI * u.cosh() * 2.0 * q / ((1.0 + q) * (1.0 + q));
            (t > 0.0 && t < 1.0 && w > 0.0).then_some((t, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::tanh_sinh;

    #[test]
    fn tail_admissibility() {
        let (s, p) = (0.5, 2.0);
        let m = FarField::marginal_exponent(s, p);
        assert!(FarField::Constant { value: 3.0 }.in_tail_space(s, p));
        assert!(FarField::Power { amplitude: 1.0, gamma: 0.9 * m }.in_tail_space(s, p));
        assert!(!FarField::Power { amplitude: 1.0, gamma: 1.1 * m }.in_tail_space(s, p));
        assert!(!FarField::Power { amplitude: 1.0, gamma: m }.in_tail_space(s, p));
    }

    #[test]
    fn exterior_interval() {
        // ∫_{|y|>L} |y|^{-1-sp} dy = 2 L^{-sp} / sp
        for sp in [0.1, 0.6, 1.4] {
            let q = ExteriorQuadrature::new(&[-2.0], &[2.0], sp);
            let v = q.integrate(|y| y[0].abs().powf(-1.0 - sp));
            let exact = 2.0 * 2f64.powf(-sp) / sp;
            assert!((v - exact).abs() < 1e-9 * exact, "{sp}: {v} vs {exact}");
        }
    }

    #[test]
    fn exterior_square_against_angular_oracle() {
        // ∫ outside [-L, L]^2 of |y|^{-2-sp} = (8 / sp) L^{-sp} ∫_0^{π/4} cos^{sp} θ dθ
        let (l, sp) = (1.5, 0.8);
        let q = ExteriorQuadrature::new(&[-l, -l], &[l, l], sp);
        let v = q.integrate(|y| (y[0] * y[0] + y[1] * y[1]).powf(-1.0 - 0.5 * sp));
        let ang = tanh_sinh(0.0, PI / 4.0, 1e-14, |t, _, _| t.cos().powf(sp)).value;
        let exact = 8.0 / sp * l.powf(-sp) * ang;
        assert!((v - exact).abs() < 1e-9 * exact, "{v} vs {exact}");
    }

    #[test]
    fn exterior_power_growth_off_center() {
        // growth |y|^γ with γ < sp, integrand against a kernel centred off the box centre
        let (sp, gamma) = (1.0, 0.5);
        let q = ExteriorQuadrature::new(&[-3.0], &[3.0], sp);
        let z = 0.7;
        let v = q.integrate(|y| y[0].abs().powf(gamma) * (y[0] - z).abs().powf(-1.0 - sp));
        let side = |sign: f64| {
            tanh_sinh(0.0, 1.0, 1e-14, |t, _, _| {
                let y = 3.0 / t;
                let jac = 3.0 / (t * t);
                y.powf(gamma) * (y - sign * z).abs().powf(-1.0 - sp) * jac
            })
            .value
        };
        let exact = side(1.0) + side(-1.0);
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
    }
}

//! Functions on ℝⁿ: lattice functions with an exterior far-field model,
//! closed-form analytic functions, Gagliardo seminorms and tails.

mod analytic;
mod far;
mod grid;
mod seminorm;

pub use analytic::{AnalyticFunction, CriticalSet, FarBehavior, Kink};
pub use far::{ExteriorQuadrature, FarField};
pub use grid::{GridFunction, GridHeader, KernelTable};
pub use seminorm::{check_tailspace_membership, gagliardo_seminorm, tail, TailspaceWitness};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bounded open set Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DomainSpec {
    Interval { lo: f64, hi: f64 },
    Box { lo: [f64; 2], hi: [f64; 2] },
    Ball { center: [f64; 2], radius: f64 },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DomainSpec::Interval { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            DomainSpec::Box { lo, hi } => (0..2).all(|i| lo[i] < hi[i] && lo[i].is_finite() && hi[i].is_finite()),
            DomainSpec::Ball { radius, center } => *radius > 0.0 && radius.is_finite() && center.iter().all(|c| c.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("empty or unbounded domain {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Interval { lo, hi } => x[0] > *lo && x[0] < *hi,
            DomainSpec::Box { lo, hi } => (0..2).all(|i| x[i] > lo[i] && x[i] < hi[i]),
            DomainSpec::Ball { center, radius } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                d2 < radius * radius
            }
        }
    }

    /// Membership in the closure, up to `slack`.
    pub fn contains_closed(&self, x: &[f64], slack: f64) -> bool {
        match self {
            DomainSpec::Interval { lo, hi } => x[0] >= lo - slack && x[0] <= hi + slack,
            DomainSpec::Box { lo, hi } => (0..2).all(|i| x[i] >= lo[i] - slack && x[i] <= hi[i] + slack),
            DomainSpec::Ball { center, radius } => {
                let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                d <= radius + slack
            }
        }
    }

    /// Bounding box.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            DomainSpec::Box { lo, hi } => (lo.to_vec(), hi.to_vec()),
            DomainSpec::Ball { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval { lo, hi } => hi - lo,
            DomainSpec::Box { lo, hi } => ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt(),
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Distance from `x` to the complement of Ω (0 outside Ω).
    pub fn inner_distance(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            DomainSpec::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            DomainSpec::Box { lo, hi } => (0..2)
                .map(|i| (x[i] - lo[i]).min(hi[i] - x[i]))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::Ball { center, radius } => {
                radius - ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt()
            }
        }
    }
}

/// Euclidean distance between the first `n` coordinates.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_basics() {
        let d = DomainSpec::Interval { lo: -1.0, hi: 1.0 };
        assert!(d.contains(&[0.0]) && !d.contains(&[1.0]));
        assert_eq!(d.diameter(), 2.0);
        let b = DomainSpec::Ball { center: [0.0, 0.0], radius: 1.0 };
        assert!(b.contains(&[0.5, 0.5]) && !b.contains(&[0.8, 0.8]));
        assert!((b.inner_distance(&[0.5, 0.0]) - 0.5).abs() < 1e-15);
        assert!(DomainSpec::Interval { lo: 1.0, hi: 1.0 }.validate().is_err());
    }
}

use crate::function_space::{FarField, GridFunction};
use crate::{Error, Result};

fn unrepresentable(a: FarField, b: FarField) -> Error {
    Error::InvalidParameter(format!("pointwise minimum of far fields {a:?} and {b:?} has no model"))
}

fn constant_of(f: FarField) -> Option<f64> {
    match f {
        FarField::Zero => Some(0.0),
        FarField::Constant { value } => Some(value),
        FarField::Halfspace { negative, positive } if negative == positive => Some(negative),
        _ => None,
    }
}

fn min_far(a: FarField, b: FarField) -> Result<FarField> {
    if a == b {
        return Ok(a);
    }
    if let (Some(x), Some(y)) = (constant_of(a), constant_of(b)) {
        return Ok(FarField::Constant { value: x.min(y) });
    }
    let halves = |f: FarField| match f {
        FarField::Halfspace { negative, positive } => Some((negative, positive)),
        other => constant_of(other).map(|c| (c, c)),
    };
    match (a, b) {
        (FarField::Power { amplitude: x, gamma: g }, FarField::Power { amplitude: y, gamma: h }) if g == h => {
            Ok(FarField::Power { amplitude: x.min(y), gamma: g })
        }
        _ => match (halves(a), halves(b)) {
            (Some((an, ap)), Some((bn, bp))) => Ok(FarField::Halfspace { negative: an.min(bn), positive: ap.min(bp) }),
            _ => Err(unrepresentable(a, b)),
        },
    }
}

/// `min{u, v}` on a shared lattice, far fields included.
pub fn truncate_min(u: &GridFunction, v: &GridFunction) -> Result<GridFunction> {
    if !u.same_lattice(v) {
        return Err(Error::LatticeMismatch("truncation needs a shared lattice".into()));
    }
    let values = u.values().iter().zip(v.values()).map(|(a, b)| a.min(*b)).collect();
    u.with_values(values)?.with_far_field(min_far(u.far_field(), v.far_field())?)
}

/// `min{u, M}`; `M = +∞` returns `u` unchanged.
pub fn min_with_constant(u: &GridFunction, m: f64) -> Result<GridFunction> {
    if m == f64::INFINITY {
        return Ok(u.clone());
    }
    if !m.is_finite() {
        return Err(Error::InvalidParameter(format!("truncation level {m} is not a real number")));
    }
    let far = match u.far_field() {
        // the power model is at least M on the whole exterior of the box
        FarField::Power { amplitude, gamma } if amplitude > 0.0 && gamma > 0.0 => {
            let (lo, hi) = u.cell_box();
            let inner = (0..u.dim()).map(|i| lo[i].abs().min(hi[i].abs())).fold(f64::INFINITY, f64::min);
            if lo.iter().zip(&hi).all(|(a, b)| *a < 0.0 && *b > 0.0) && amplitude * inner.powf(gamma) >= m {
                FarField::Constant { value: m }
            } else {
                return Err(unrepresentable(u.far_field(), FarField::Constant { value: m }));
            }
        }
        far => min_far(far, FarField::Constant { value: m })?,
    };
    u.map(|_, v| v.min(m))?.with_far_field(far)
}

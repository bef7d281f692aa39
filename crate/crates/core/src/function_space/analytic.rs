use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dist;
use super::far::FarField;
use crate::{Error, Result};

type Scalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Vector = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;
type Matrix = Arc<dyn Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync>;

/// Critical points of a test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "lowercase")]
pub enum CriticalSet {
    None,
    Points(Vec<[f64; 2]>),
    /// The gradient vanishes on an open set.
    Everywhere,
    Unknown,
}

/// Sphere across which the function is continuous but not C². Radius zero
/// marks an isolated point singularity of the Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Behaviour at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FarBehavior {
    /// `u(y) = model(y)` whenever `|y| > radius`.
    Model { radius: f64, model: FarField },
    /// Affine beyond `radius` (globally affine when zero). Increments are odd
    /// at infinity, so symmetrized far integrals converge.
    Affine { radius: f64 },
    /// Beyond `radius`, grows like `|y|^growth` with no closed-form model.
    Growth { radius: f64, growth: f64 },
}

impl FarBehavior {
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            FarBehavior::Model { model, .. } => model.growth_exponent(),
            FarBehavior::Affine { .. } => 1.0,
            FarBehavior::Growth { growth, .. } => growth,
        }
    }
}

/// Closed-form function on ℝⁿ with exact first and second derivatives.
#[derive(Clone)]
pub struct AnalyticFunction {
    n: usize,
    name: String,
    value: Scalar,
    gradient: Vector,
    hessian: Matrix,
    critical: CriticalSet,
    far: FarBehavior,
    kinks: Vec<Kink>,
}

impl fmt::Debug for AnalyticFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticFunction")
            .field("n", &self.n)
            .field("name", &self.name)
            .field("critical", &self.critical)
            .field("far", &self.far)
            .field("kinks", &self.kinks)
            .finish()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension {n} not supported")))
    }
}

impl AnalyticFunction {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        name: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync + 'static,
        critical: CriticalSet,
        far: FarBehavior,
        kinks: Vec<Kink>,
    ) -> Result<Self> {
        check_dim(n)?;
        Ok(AnalyticFunction {
            n,
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            critical,
            far,
            kinks,
        })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_parts(
            n,
            format!("constant({c})"),
            move |_| c,
            |_| [0.0; 2],
            |_| [[0.0; 2]; 2],
            CriticalSet::Everywhere,
            FarBehavior::Model { radius: 0.0, model: FarField::Constant { value: c } },
            Vec::new(),
        )
    }

    /// `c0 + a · x`.
    pub fn affine(n: usize, c0: f64, a: [f64; 2]) -> Result<Self> {
        let a = if n == 1 { [a[0], 0.0] } else { a };
        if a == [0.0; 2] {
            return Self::constant(n, c0);
        }
        Self::from_parts(
            n,
            format!("affine({c0}, {a:?})"),
            move |x| c0 + a[0] * x[0] + if x.len() > 1 { a[1] * x[1] } else { 0.0 },
            move |_| a,
            |_| [[0.0; 2]; 2],
            CriticalSet::None,
            FarBehavior::Affine { radius: 0.0 },
            Vec::new(),
        )
    }

    /// `c0 + g · (x - x0) + ½ (x - x0)ᵀ H (x - x0)`.
    pub fn quadratic(n: usize, x0: [f64; 2], c0: f64, g: [f64; 2], hess: [[f64; 2]; 2]) -> Result<Self> {
        let (g, hess) = if n == 1 { ([g[0], 0.0], [[hess[0][0], 0.0], [0.0, 0.0]]) } else { (g, hess) };
        if (hess[0][1] - hess[1][0]).abs() > 1e-14 * (1.0 + hess[0][1].abs()) {
            return Err(Error::InvalidParameter("Hessian must be symmetric".into()));
        }
        let y = move |x: &[f64]| [x[0] - x0[0], if x.len() > 1 { x[1] - x0[1] } else { 0.0 }];
        let value = move |x: &[f64]| {
            let d = y(x);
            c0 + g[0] * d[0] + g[1] * d[1]
                + 0.5 * (hess[0][0] * d[0] * d[0] + 2.0 * hess[0][1] * d[0] * d[1] + hess[1][1] * d[1] * d[1])
        };
        let gradient = move |x: &[f64]| {
            let d = y(x);
            [
                g[0] + hess[0][0] * d[0] + hess[0][1] * d[1],
                g[1] + hess[1][0] * d[0] + hess[1][1] * d[1],
            ]
        };
        let critical = if n == 1 {
            if hess[0][0] != 0.0 {
                CriticalSet::Points(vec![[x0[0] - g[0] / hess[0][0], 0.0]])
            } else if g[0] == 0.0 {
                CriticalSet::Everywhere
            } else {
                CriticalSet::None
            }
        } else {
            let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
            if det != 0.0 {
                let dx = -(hess[1][1] * g[0] - hess[0][1] * g[1]) / det;
                let dy = -(hess[0][0] * g[1] - hess[1][0] * g[0]) / det;
                CriticalSet::Points(vec![[x0[0] + dx, x0[1] + dy]])
            } else {
                CriticalSet::Unknown
            }
        };
        let quad = hess.iter().flatten().any(|v| *v != 0.0);
        let far = if quad { FarBehavior::Growth { radius: 0.0, growth: 2.0 } } else { FarBehavior::Affine { radius: 0.0 } };
        Self::from_parts(n, format!("quadratic({x0:?})"), value, gradient, move |_| hess, critical, far, Vec::new())
    }

    /// `c |x - x0|^β` for `β > 1`.
    pub fn radial_power(n: usize, x0: [f64; 2], c: f64, beta: f64) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(Error::InvalidParameter(format!("radial power needs β > 1, got {beta}")));
        }
        let y = move |x: &[f64]| [x[0] - x0[0], if x.len() > 1 { x[1] - x0[1] } else { 0.0 }];
        let value = move |x: &[f64]| {
            let d = y(x);
            c * (d[0] * d[0] + d[1] * d[1]).powf(0.5 * beta)
        };
        let gradient = move |x: &[f64]| {
            let d = y(x);
            let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if r == 0.0 {
                return [0.0; 2];
            }
            let f = c * beta * r.powf(beta - 2.0);
            [f * d[0], f * d[1]]
        };
        let hessian = move |x: &[f64]| {
            let d = y(x);
            let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if r == 0.0 {
                let v = if beta > 2.0 {
                    0.0
                } else if beta == 2.0 {
                    2.0 * c
                } else {
                    f64::INFINITY
                };
                return [[v, 0.0], [0.0, if x.len() > 1 { v } else { 0.0 }]];
            }
            let f = c * beta * r.powf(beta - 2.0);
            let e = [d[0] / r, d[1] / r];
            let mut m = [[0.0; 2]; 2];
            for i in 0..x.len() {
                for j in 0..x.len() {
                    m[i][j] = f * ((i == j) as u8 as f64 + (beta - 2.0) * e[i] * e[j]);
                }
            }
            m
        };
        let far = if x0 == [0.0; 2] {
            FarBehavior::Model { radius: 0.0, model: FarField::Power { amplitude: c, gamma: beta } }
        } else {
            FarBehavior::Growth { radius: 0.0, growth: beta }
        };
        let smooth = beta.fract() == 0.0 && (beta as i64) % 2 == 0;
        let kinks = if smooth { Vec::new() } else { vec![Kink { center: x0, radius: 0.0 }] };
        Self::from_parts(
            n,
            format!("radial_power({x0:?}, {c}, {beta})"),
            value,
            gradient,
            hessian,
            CriticalSet::Points(vec![x0]),
            far,
            kinks,
        )
    }

    /// `min(|x|², 1)`: smooth near the origin with a degenerate critical point there.
    pub fn capped_square(n: usize) -> Result<Self> {
        Self::from_parts(
            n,
            "capped_square",
            |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().min(1.0),
            |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 < 1.0 {
                    [2.0 * x[0], if x.len() > 1 { 2.0 * x[1] } else { 0.0 }]
                } else {
                    [0.0; 2]
                }
            },
            |x: &[f64]| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let v = if r2 < 1.0 { 2.0 } else { 0.0 };
                [[v, 0.0], [0.0, if x.len() > 1 { v } else { 0.0 }]]
            },
            CriticalSet::Points(vec![[0.0; 2]]),
            FarBehavior::Model { radius: 1.0, model: FarField::Constant { value: 1.0 } },
            vec![Kink { center: [0.0; 2], radius: 1.0 }],
        )
    }

    /// `inner` on the open ball `B_r(center)`, `outer` elsewhere.
    pub fn glue(inner: &AnalyticFunction, outer: &AnalyticFunction, center: [f64; 2], radius: f64) -> Result<Self> {
        if inner.n != outer.n {
            return Err(Error::InvalidParameter("glued functions differ in dimension".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("glue radius {radius} must be positive")));
        }
        let n = inner.n;
        let inside = move |x: &[f64]| dist(x, &center[..n]) < radius;
        let (iv, ov) = (inner.value.clone(), outer.value.clone());
        let (ig, og) = (inner.gradient.clone(), outer.gradient.clone());
        let (ih, oh) = (inner.hessian.clone(), outer.hessian.clone());
        let mut kinks = outer.kinks.clone();
        kinks.extend(inner.kinks.iter().filter(|k| dist(&k.center[..n], &center[..n]) < radius));
        kinks.push(Kink { center, radius });
        let far = match outer.far {
            FarBehavior::Model { radius: r0, model } => {
                FarBehavior::Model { radius: r0.max(dist(&center[..n], &[0.0; 2][..n]) + radius), model }
            }
            FarBehavior::Affine { radius: r0 } => {
                FarBehavior::Affine { radius: r0.max(dist(&center[..n], &[0.0; 2][..n]) + radius) }
            }
            FarBehavior::Growth { radius: r0, growth } => {
                FarBehavior::Growth { radius: r0.max(dist(&center[..n], &[0.0; 2][..n]) + radius), growth }
            }
        };
        Self::from_parts(
            n,
            format!("glue({}, {}, {center:?}, {radius})", inner.name, outer.name),
            move |x| if inside(x) { iv(x) } else { ov(x) },
            move |x| if inside(x) { ig(x) } else { og(x) },
            move |x| if inside(x) { ih(x) } else { oh(x) },
            inner.critical.clone(),
            far,
            kinks,
        )
    }

    /// `height (1 - |x - x0|²/R²)³` on `B_R(x0)`, zero outside; C² across the sphere.
    pub fn bump(n: usize, x0: [f64; 2], radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("bump radius {radius} must be positive")));
        }
        let r2 = radius * radius;
        let y = move |x: &[f64]| [x[0] - x0[0], if x.len() > 1 { x[1] - x0[1] } else { 0.0 }];
        let q = move |d: [f64; 2]| (d[0] * d[0] + d[1] * d[1]) / r2;
        let value = move |x: &[f64]| {
            let w = 1.0 - q(y(x));
            if w > 0.0 {
                height * w * w * w
            } else {
                0.0
            }
        };
        let gradient = move |x: &[f64]| {
            let d = y(x);
            let w = 1.0 - q(d);
            if w <= 0.0 {
                return [0.0; 2];
            }
            let f = -6.0 * height * w * w / r2;
            [f * d[0], f * d[1]]
        };
        let hessian = move |x: &[f64]| {
            let d = y(x);
            let w = 1.0 - q(d);
            let mut m = [[0.0; 2]; 2];
            if w <= 0.0 {
                return m;
            }
            for i in 0..x.len() {
                for j in 0..x.len() {
                    m[i][j] = 24.0 * height * w * d[i] * d[j] / (r2 * r2)
                        - if i == j { 6.0 * height * w * w / r2 } else { 0.0 };
                }
            }
            m
        };
        let reach = dist(&x0[..n], &[0.0; 2][..n]) + radius;
        Self::from_parts(
            n,
            format!("bump({x0:?}, {radius}, {height})"),
            value,
            gradient,
            hessian,
            CriticalSet::Unknown,
            FarBehavior::Model { radius: reach, model: FarField::Zero },
            vec![Kink { center: x0, radius }],
        )
    }

    /// Pointwise sum.
    pub fn add(&self, other: &AnalyticFunction) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::InvalidParameter("summands differ in dimension".into()));
        }
        let constant = |f: FarField| match f {
            FarField::Zero => Some(0.0),
            FarField::Constant { value } => Some(value),
            FarField::Power { .. } | FarField::Halfspace { .. } | FarField::Affine { .. } => None,
        };
        let radius = |b: FarBehavior| match b {
            FarBehavior::Model { radius, .. } | FarBehavior::Growth { radius, .. } => radius,
            FarBehavior::Affine { radius } => radius,
        };
        let far = match (self.far, other.far) {
            (FarBehavior::Model { radius: ra, model: a }, FarBehavior::Model { radius: rb, model: b })
                if constant(a).is_some() && constant(b).is_some() =>
            {
                let value = constant(a).unwrap_or(0.0) + constant(b).unwrap_or(0.0);
                FarBehavior::Model { radius: ra.max(rb), model: FarField::Constant { value } }
            }
            (FarBehavior::Affine { radius: a }, FarBehavior::Affine { radius: b }) => {
                FarBehavior::Affine { radius: a.max(b) }
            }
            (FarBehavior::Affine { radius: a }, FarBehavior::Model { radius: b, model })
            | (FarBehavior::Model { radius: b, model }, FarBehavior::Affine { radius: a })
                if constant(model).is_some() =>
            {
                FarBehavior::Affine { radius: a.max(b) }
            }
            (a, b) => FarBehavior::Growth {
                radius: radius(a).max(radius(b)),
                growth: a.growth_exponent().max(b.growth_exponent()),
            },
        };
        let (av, ag, ah) = (self.value.clone(), self.gradient.clone(), self.hessian.clone());
        let (bv, bg, bh) = (other.value.clone(), other.gradient.clone(), other.hessian.clone());
        let mut kinks = self.kinks.clone();
        kinks.extend(other.kinks.iter().copied());
        Self::from_parts(
            self.n,
            format!("{}+{}", self.name, other.name),
            move |x| av(x) + bv(x),
            move |x| {
                let (a, b) = (ag(x), bg(x));
                [a[0] + b[0], a[1] + b[1]]
            },
            move |x| {
                let (a, b) = (ah(x), bh(x));
                [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
            },
            CriticalSet::Unknown,
            far,
            kinks,
        )
    }

    /// `λ u + c`.
    pub fn scale_shift(&self, lambda: f64, c: f64) -> Result<Self> {
        let (v, g, h) = (self.value.clone(), self.gradient.clone(), self.hessian.clone());
        let far = match self.far {
            _ if lambda == 0.0 => FarBehavior::Model { radius: 0.0, model: FarField::Constant { value: c } },
            FarBehavior::Model { radius, model } => {
                let model = match model {
                    FarField::Zero => FarField::Constant { value: c },
                    FarField::Constant { value } => FarField::Constant { value: lambda * value + c },
                    FarField::Power { amplitude, gamma } if c == 0.0 => {
                        FarField::Power { amplitude: lambda * amplitude, gamma }
                    }
                    FarField::Power { gamma, .. } => {
                        return self.rebuild(lambda, c, v, g, h, FarBehavior::Growth { radius, growth: gamma });
                    }
                    FarField::Halfspace { negative, positive } => {
                        FarField::Halfspace { negative: lambda * negative + c, positive: lambda * positive + c }
                    }
                    FarField::Affine { offset, slope } => FarField::Affine {
                        offset: lambda * offset + c,
                        slope: [lambda * slope[0], lambda * slope[1]],
                    },
                };
                FarBehavior::Model { radius, model }
            }
            other => other,
        };
        self.rebuild(lambda, c, v, g, h, far)
    }

    fn rebuild(&self, lambda: f64, c: f64, v: Scalar, g: Vector, h: Matrix, far: FarBehavior) -> Result<Self> {
        let critical = if lambda == 0.0 { CriticalSet::Everywhere } else { self.critical.clone() };
        Self::from_parts(
            self.n,
            format!("{lambda}*{}+{c}", self.name),
            move |x| lambda * v(x) + c,
            move |x| {
                let d = g(x);
                [lambda * d[0], lambda * d[1]]
            },
            move |x| {
                let m = h(x);
                [[lambda * m[0][0], lambda * m[0][1]], [lambda * m[1][0], lambda * m[1][1]]]
            },
            critical,
            far,
            self.kinks.clone(),
        )
    }

    /// `x ↦ u(x - shift)`.
    pub fn translate(&self, shift: [f64; 2]) -> Result<Self> {
        let n = self.n;
        let shift = if n == 1 { [shift[0], 0.0] } else { shift };
        let back = move |x: &[f64]| -> [f64; 2] { [x[0] - shift[0], if n > 1 { x[1] - shift[1] } else { 0.0 }] };
        let (v, g, h) = (self.value.clone(), self.gradient.clone(), self.hessian.clone());
        let move_pt = |p: [f64; 2]| [p[0] + shift[0], p[1] + shift[1]];
        let critical = match &self.critical {
            CriticalSet::Points(pts) => CriticalSet::Points(pts.iter().map(|p| move_pt(*p)).collect()),
            other => other.clone(),
        };
        let offset = (shift[0] * shift[0] + shift[1] * shift[1]).sqrt();
        let far = match self.far {
            FarBehavior::Model { radius, model: m @ (FarField::Zero | FarField::Constant { .. }) } => {
                FarBehavior::Model { radius: radius + offset, model: m }
            }
            FarBehavior::Model { radius, model } if offset > 0.0 => {
                FarBehavior::Growth { radius: radius + offset, growth: model.growth_exponent() }
            }
            FarBehavior::Growth { radius, growth } => FarBehavior::Growth { radius: radius + offset, growth },
            FarBehavior::Affine { radius } if radius > 0.0 => FarBehavior::Affine { radius: radius + offset },
            other => other,
        };
        let kinks = self.kinks.iter().map(|k| Kink { center: move_pt(k.center), radius: k.radius }).collect();
        Self::from_parts(
            n,
            format!("{}(x-{shift:?})", self.name),
            move |x| v(&back(x)[..n]),
            move |x| g(&back(x)[..n]),
            move |x| h(&back(x)[..n]),
            critical,
            far,
            kinks,
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> [[f64; 2]; 2] {
        (self.hessian)(x)
    }

    pub fn critical_set(&self) -> &CriticalSet {
        &self.critical
    }

    pub fn far_behavior(&self) -> FarBehavior {
        self.far
    }

    pub fn kinks(&self) -> &[Kink] {
        &self.kinks
    }

    /// Radius of the largest ball around `x` on which the function is C²,
    /// ignoring a point singularity at `x` itself. `None` if `x` sits on a
    /// kink sphere.
    pub fn smooth_radius(&self, x: &[f64]) -> Option<f64> {
        let n = self.n;
        let mut r = f64::INFINITY;
        for k in &self.kinks {
            let d = dist(x, &k.center[..n]);
            if k.radius == 0.0 {
                if d > 0.0 {
                    r = r.min(d);
                }
            } else {
                let gap = (d - k.radius).abs();
                if gap <= 1e-12 * k.radius {
                    return None;
                }
                r = r.min(gap);
            }
        }
        Some(r)
    }

    /// Distance from `x` to the critical set (`∞` if empty, `None` if unknown).
    pub fn critical_distance(&self, x: &[f64]) -> Option<f64> {
        match &self.critical {
            CriticalSet::None => Some(f64::INFINITY),
            CriticalSet::Points(pts) => Some(pts.iter().map(|p| dist(x, &p[..self.n])).fold(f64::INFINITY, f64::min)),
            CriticalSet::Everywhere => Some(0.0),
            CriticalSet::Unknown => None,
        }
    }

    /// Largest central-difference mismatch of gradient and Hessian at `x`.
    pub fn derivative_mismatch(&self, x: &[f64], step: f64) -> (f64, f64) {
        let n = self.n;
        let g = self.gradient(x);
        let hm = self.hessian(x);
        let mut eg: f64 = 0.0;
        let mut eh: f64 = 0.0;
        for i in 0..n {
            let mut xp = [x[0], if n > 1 { x[1] } else { 0.0 }];
            let mut xm = xp;
            xp[i] += step;
            xm[i] -= step;
            let fd = (self.value(&xp[..n]) - self.value(&xm[..n])) / (2.0 * step);
            eg = eg.max((fd - g[i]).abs());
            let (gp, gm) = (self.gradient(&xp[..n]), self.gradient(&xm[..n]));
            for j in 0..n {
                eh = eh.max(((gp[j] - gm[j]) / (2.0 * step) - hm[j][i]).abs());
            }
        }
        (eg, eh)
    }
}

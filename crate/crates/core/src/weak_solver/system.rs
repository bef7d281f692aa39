use crate::function_space::{FarField, GridFunction, KernelTable};
use crate::kernels::KernelSpec;
use crate::pv_engine::LatticeOperator;
use crate::{par, signed_power, Result};

/// Quadrature sizes above this are recomputed per evaluation instead of cached.
const CACHE_LIMIT: usize = 4_000_000;

fn abs_power(d: f64, p: f64) -> f64 {
    let a = d.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 4.0 {
        (a * a) * (a * a)
    } else {
        a.powf(p)
    }
}

enum Far {
    /// Constant far field: one weight per interior node.
    Collapsed { mass: Vec<f64>, value: f64 },
    Cached { coef: Vec<Vec<f64>>, values: Vec<f64> },
    Recomputed { values: Vec<f64> },
}

/// Energy, gradient and Hessian diagonal at one iterate. The objective is
/// the energy divided by `2p hⁿ` so its gradient is `L_h u` at interior nodes.
pub(super) struct State {
    pub objective: f64,
    pub grad: Vec<f64>,
    pub diag: Vec<f64>,
}

impl State {
    pub fn max_residual(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub(super) struct System {
    op: LatticeOperator,
    spec: KernelSpec,
    geometry: GridFunction,
    hn: f64,
    interior: Vec<usize>,
    is_interior: Vec<bool>,
    multi: Vec<[usize; 2]>,
    far: Far,
    delta: f64,
}

impl System {
    pub fn new(u: &GridFunction, spec: &KernelSpec) -> Result<Self> {
        let op = LatticeOperator::new(u, spec)?;
        op.apply_many(u, &[])?;
        let interior = u.interior_indices();
        let mut is_interior = vec![false; u.len()];
        for &k in &interior {
            is_interior[k] = true;
        }
        let multi = (0..u.len()).map(|k| u.multi_index(k)).collect();
        let n = spec.n;
        let far = match u.far_field() {
            FarField::Zero | FarField::Constant { .. } => {
                let value = u.far_field().value(&[0.0, 0.0][..n]);
                let mass = par::map_indexed(interior.len(), |i| op.exterior_mass(&u.coords(interior[i])[..n]));
                Far::Collapsed { mass, value }
            }
            far => {
                let q = op.exterior();
                let values: Vec<f64> = q.points.iter().map(|y| far.value(&y[..n])).collect();
                if interior.len() * q.len() <= CACHE_LIMIT {
                    let coef = par::map_indexed(interior.len(), |i| node_far_coef(&op, spec, &u.coords(interior[i])));
                    Far::Cached { coef, values }
                } else {
                    Far::Recomputed { values }
                }
            }
        };
        let (lo, hi) = u.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let delta = 1e-7 * (1.0 + (hi - lo).abs());
        Ok(System {
            op,
            spec: spec.clone(),
            geometry: u.clone(),
            hn: u.cell_volume(),
            interior,
            is_interior,
            multi,
            far,
            delta,
        })
    }

    fn table(&self) -> &KernelTable {
        self.op.table()
    }

    pub fn energy_of(&self, objective: f64) -> f64 {
        2.0 * self.spec.p * self.hn * objective
    }

    /// Regularized `(p - 1)|d|^{p-2}`.
    fn weight(&self, d: f64) -> f64 {
        let p = self.spec.p;
        if p == 2.0 {
            1.0
        } else {
            (p - 1.0) * (d * d + self.delta * self.delta).powf(0.5 * (p - 2.0))
        }
    }

    /// Objective share, derivative and curvature for interior node `i`
    /// carrying the value `t`.
    fn node(&self, vals: &[f64], i: usize, t: f64, with_curvature: bool) -> (f64, f64, f64) {
        let p = self.spec.p;
        let k = self.interior[i];
        let mk = self.multi[k];
        let table = self.table();
        let (mut e, mut g, mut c) = (0.0, 0.0, 0.0);
        for (j, &v) in vals.iter().enumerate() {
            if j == k {
                continue;
            }
            let kk = table.get(mk, self.multi[j]);
            let d = t - v;
            let share = if self.is_interior[j] { 0.5 } else { 1.0 };
            e += share * abs_power(d, p) * kk;
            g += signed_power(d, p) * kk;
            if with_curvature {
                c += self.weight(d) * kk;
            }
        }
        let (mut e, mut g, mut c) = (e * self.hn, g * self.hn, c * self.hn);
        let mut far = |w: f64, f: f64| {
            let d = t - f;
            e += abs_power(d, p) * w;
            g += signed_power(d, p) * w;
            if with_curvature {
                c += self.weight(d) * w;
            }
        };
        match &self.far {
            Far::Collapsed { mass, value } => far(mass[i], *value),
            Far::Cached { coef, values } => coef[i].iter().zip(values).for_each(|(&w, &f)| far(w, f)),
            Far::Recomputed { values } => {
                let coef = node_far_coef(&self.op, &self.spec, &self.geometry.coords(k));
                coef.iter().zip(values).for_each(|(&w, &f)| far(w, f));
            }
        }
        (e / p, g, c)
    }

    pub fn evaluate(&self, vals: &[f64]) -> State {
        let rows = par::map_indexed(self.interior.len(), |i| self.node(vals, i, vals[self.interior[i]], true));
        State {
            objective: rows.iter().map(|r| r.0).sum(),
            grad: rows.iter().map(|r| r.1).collect(),
            diag: rows.iter().map(|r| r.2).collect(),
        }
    }

    fn objective(&self, vals: &[f64]) -> State {
        let rows = par::map_indexed(self.interior.len(), |i| self.node(vals, i, vals[self.interior[i]], false));
        State {
            objective: rows.iter().map(|r| r.0).sum(),
            grad: rows.iter().map(|r| r.1).collect(),
            diag: Vec::new(),
        }
    }

    fn hessian_rows(&self, vals: &[f64], diag: &[f64]) -> Vec<Vec<f64>> {
        let m = self.interior.len();
        par::map_indexed(m, |i| {
            let k = self.interior[i];
            let mut row = vec![0.0; m];
            for (l, &j) in self.interior.iter().enumerate() {
                row[l] = if l == i {
                    diag[i]
                } else {
                    -self.weight(vals[k] - vals[j]) * self.table().get(self.multi[k], self.multi[j]) * self.hn
                };
            }
            row
        })
    }

    /// Backtracking on the objective along `dir`. Steps whose decrease is
    /// below rounding are accepted only if they also shrink the residual.
    fn line_search(&self, vals: &[f64], state: &State, dir: &[f64]) -> Option<(Vec<f64>, State)> {
        let slope: f64 = state.grad.iter().zip(dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            return None;
        }
        let j0 = state.objective;
        let r0 = state.max_residual();
        let mut alpha = 1.0;
        for _ in 0..50 {
            let mut trial = vals.to_vec();
            for (i, &k) in self.interior.iter().enumerate() {
                trial[k] += alpha * dir[i];
            }
            let st = self.objective(&trial);
            let armijo = st.objective <= j0 + 1e-4 * alpha * slope;
            let flat = st.objective <= j0 + 4.0 * f64::EPSILON * j0.abs() && st.max_residual() < r0;
            if armijo || flat {
                let full = self.evaluate(&trial);
                return Some((trial, full));
            }
            alpha *= 0.5;
        }
        None
    }

    pub fn newton_step(&self, vals: &[f64], state: &State) -> Option<(Vec<f64>, State)> {
        let rows = self.hessian_rows(vals, &state.diag);
        let rhs: Vec<f64> = state.grad.iter().map(|g| -g).collect();
        let dir = pcg(&rows, &state.diag, &rhs);
        self.line_search(vals, state, &dir).or_else(|| {
            let dir: Vec<f64> = state.grad.iter().zip(&state.diag).map(|(g, d)| -g / d.max(f64::MIN_POSITIVE)).collect();
            self.line_search(vals, state, &dir)
        })
    }

    /// One red-black sweep of exact per-node minimization.
    pub fn sweep(&self, vals: &[f64], state: &State) -> Option<(Vec<f64>, State)> {
        let mut v = vals.to_vec();
        for color in 0..2 {
            for i in 0..self.interior.len() {
                let k = self.interior[i];
                let m = self.multi[k];
                if (m[0] + m[1]) % 2 != color {
                    continue;
                }
                v[k] = self.node_minimizer(&v, i);
            }
        }
        let next = self.evaluate(&v);
        // each node update is an exact minimization; only rounding can raise the sum
        (next.objective <= state.objective + 4.0 * f64::EPSILON * state.objective.abs()).then_some((v, next))
    }

    fn node_minimizer(&self, vals: &[f64], i: usize) -> f64 {
        let t0 = vals[self.interior[i]];
        let deriv = |t: f64| self.node(vals, i, t, false).1;
        let g0 = deriv(t0);
        if g0 == 0.0 {
            return t0;
        }
        let dir = -g0.signum();
        let mut step = 1e-3 * (1.0 + t0.abs());
        let (mut a, mut b) = (t0, t0 + dir * step);
        while deriv(b).signum() == g0.signum() {
            a = b;
            step *= 2.0;
            b = t0 + dir * step;
            if !b.is_finite() {
                return t0;
            }
        }
        let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if deriv(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn node_far_coef(op: &LatticeOperator, spec: &KernelSpec, x: &[f64; 2]) -> Vec<f64> {
    let n = spec.n;
    let q = op.exterior();
    q.points
        .iter()
        .zip(&q.weights)
        .map(|(y, w)| {
            let z = [x[0] - y[0], x[1] - y[1]];
            w * spec.eval(&z[..n]).unwrap_or(0.0)
        })
        .collect()
}

fn matvec(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    par::map_indexed(rows.len(), |i| rows[i].iter().zip(v).map(|(a, b)| a * b).sum())
}

/// Jacobi-preconditioned conjugate gradients for the SPD Newton system.
fn pcg(rows: &[Vec<f64>], diag: &[f64], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let pre = |r: &[f64]| r.iter().zip(diag).map(|(r, d)| r / d.max(f64::MIN_POSITIVE)).collect::<Vec<_>>();
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut z = pre(&r);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let target = 1e-12 * dot(b, b).sqrt();
    for _ in 0..(4 * m).clamp(50, 2000) {
        if dot(&r, &r).sqrt() <= target {
            break;
        }
        let hd = matvec(rows, &d);
        let curv = dot(&d, &hd);
        if !(curv > 0.0) {
            break;
        }
        let alpha = rz / curv;
        for i in 0..m {
            x[i] += alpha * d[i];
            r[i] -= alpha * hd[i];
        }
        z = pre(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            d[i] = z[i] + beta * d[i];
        }
    }
    x
}

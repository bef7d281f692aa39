use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::write_atomic;
use crate::function_space::GridFunction;
use crate::kernels::KernelSpec;
use crate::pv_engine::LatticeOperator;
use crate::{critical_exponent, par, Error, Result};

/// `q = 2` above the critical exponent, otherwise `sp/(p-1) + 1/2`.
pub fn doubling_exponent(spec: &KernelSpec) -> f64 {
    if spec.p > critical_exponent(spec.s) {
        2.0
    } else {
        spec.sp() / (spec.p - 1.0) + 0.5
    }
}

/// One `ε` of the sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingStep {
    pub eps: f64,
    /// `M_ε = max Ψ_ε(x, y)`, `Ψ_ε = v(x) - u(y) - |x - y|^q / ε`.
    pub m_eps: f64,
    pub x_eps: Vec<f64>,
    pub y_eps: Vec<f64>,
    /// `|x_ε - y_ε|^q / ε`.
    pub pair_gap: f64,
    /// `min_z W_ε(z)` over lattice shifts keeping both points interior.
    pub w_min: f64,
    /// `∫ Θ_ε(z) K(z) dz = L_h v(x_ε) - L_h u(y_ε)`, with
    /// `Θ_ε(z) = g(v(x_ε) - v(x_ε + z)) - g(u(y_ε) - u(y_ε + z))`.
    pub theta_sum: f64,
    /// `2 (M_{2ε} - M_ε) - pair_gap`, when `2ε` precedes in the sequence.
    pub meps_margin: Option<f64>,
    /// `Ψ_{2ε}(x_ε, y_ε) ≤ M_{2ε}`, the exact form of the same inequality.
    pub meps_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingDiagnostic {
    pub q: f64,
    /// `max (v - u)` over interior nodes.
    pub sigma: f64,
    /// `max v - min u` over interior nodes.
    pub h_sup: f64,
    pub steps: Vec<DoublingStep>,
    /// `M_ε` nondecreasing in `ε`.
    pub monotone: bool,
    /// `σ ≤ M_ε ≤ H` for every `ε`.
    pub bounds_hold: bool,
    pub meps_all_hold: bool,
    /// `σ > 0`: a violation of comparison whose maximizers should coalesce.
    pub contradiction_sought: bool,
}

/// Exact sup of `Ψ_ε` over interior lattice pairs for each `ε` (brute force,
/// with the penalty tabulated per lattice offset). Ties go to the smaller
/// `|x - y|`, then to the lower node index of `x`, then of `y`.
pub fn doubling_diagnostic(u: &GridFunction, v: &GridFunction, spec: &KernelSpec, q: f64, eps: &[f64]) -> Result<DoublingDiagnostic> {
    if !u.same_lattice(v) {
        return Err(Error::LatticeMismatch("doubling needs a shared lattice".into()));
    }
    if !(q > 1.0) || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("doubling needs q > 1 and positive ε".into()));
    }
    let n = u.dim();
    let h = u.h();
    let nodes = u.interior_indices();
    let m: Vec<[usize; 2]> = nodes.iter().map(|&k| u.multi_index(k)).collect();
    let (uv, vv) = (u.values(), v.values());
    let lo = [m.iter().map(|a| a[0]).min().unwrap_or(0), m.iter().map(|a| a[1]).min().unwrap_or(0)];
    let hi = [m.iter().map(|a| a[0]).max().unwrap_or(0), m.iter().map(|a| a[1]).max().unwrap_or(0)];
    let span = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1];
    let w0 = 2 * span[0] - 1;
    let penalty: Vec<f64> = (0..w0 * (2 * span[1] - 1))
        .map(|k| {
            let di = (k % w0) as f64 - (span[0] - 1) as f64;
            let dj = (k / w0) as f64 - (span[1] - 1) as f64;
            ((di * di + dj * dj) * h * h).powf(0.5 * q)
        })
        .collect();
    let offset = |a: [usize; 2], b: [usize; 2]| {
        let i = a[0] + span[0] - 1 - b[0];
        let j = a[1] + span[1] - 1 - b[1];
        let (di, dj) = (a[0] as i64 - b[0] as i64, a[1] as i64 - b[1] as i64);
        (i + w0 * j, di * di + dj * dj)
    };
    let psi = |i: usize, j: usize, e: f64| vv[nodes[i]] - uv[nodes[j]] - penalty[offset(m[i], m[j]).0] / e;

    let sigma = (0..nodes.len()).map(|i| vv[nodes[i]] - uv[nodes[i]]).fold(f64::NEG_INFINITY, f64::max);
    let vmax = nodes.iter().map(|&k| vv[k]).fold(f64::NEG_INFINITY, f64::max);
    let umin = nodes.iter().map(|&k| uv[k]).fold(f64::INFINITY, f64::min);
    let h_sup = vmax - umin;

    let op = LatticeOperator::new(u, spec)?;
    let mut steps: Vec<DoublingStep> = Vec::new();
    for (s, &e) in eps.iter().enumerate() {
        let per_x = par::map_indexed(nodes.len(), |i| {
            let mut best = (f64::NEG_INFINITY, i64::MAX, usize::MAX);
            for j in 0..nodes.len() {
                let val = psi(i, j, e);
                let d2 = offset(m[i], m[j]).1;
                if val > best.0 || (val == best.0 && d2 < best.1) {
                    best = (val, d2, j);
                }
            }
            best
        });
        let mut best = (f64::NEG_INFINITY, i64::MAX, usize::MAX, usize::MAX);
        for (i, &(val, d2, j)) in per_x.iter().enumerate() {
            if val > best.0 || (val == best.0 && d2 < best.1) {
                best = (val, d2, i, j);
            }
        }
        let (m_eps, _, bi, bj) = best;
        let pair_gap = penalty[offset(m[bi], m[bj]).0] / e;
        let (xk, yk) = (nodes[bi], nodes[bj]);
        let mut w_min = f64::INFINITY;
        for k in 0..u.len() {
            let mk = u.multi_index(k);
            let dz = [mk[0] as i64 - m[bi][0] as i64, mk[1] as i64 - m[bi][1] as i64];
            if dz == [0, 0] {
                continue;
            }
            let ty = [m[bj][0] as i64 + dz[0], m[bj][1] as i64 + dz[1]];
            if ty[0] < 0 || ty[1] < 0 || ty[0] >= u.dims()[0] as i64 || (n > 1 && ty[1] >= u.dims()[1] as i64) || (n == 1 && ty[1] != 0) {
                continue;
            }
            let ky = u.index([ty[0] as usize, ty[1] as usize]);
            let (dv, du) = (vv[xk] - vv[k], uv[yk] - uv[ky]);
            if u.is_interior(k) && u.is_interior(ky) {
                w_min = w_min.min(dv - du);
            }
        }
        let theta_sum = op.apply(v, xk)? - op.apply(u, yk)?;
        let (meps_margin, meps_holds) = match s.checked_sub(1) {
            Some(prev) if eps[prev] == 2.0 * e => {
                let m2 = steps[prev].m_eps;
                let cross = psi(bi, bj, 2.0 * e);
                (Some(2.0 * (m2 - m_eps) - pair_gap), Some(cross <= m2))
            }
            _ => (None, None),
        };
        steps.push(DoublingStep {
            eps: e,
            m_eps,
            x_eps: u.coords(xk)[..n].to_vec(),
            y_eps: u.coords(yk)[..n].to_vec(),
            pair_gap,
            w_min,
            theta_sum,
            meps_margin,
            meps_holds,
        });
    }
    let mut monotone = true;
    for a in 0..steps.len() {
        for b in 0..steps.len() {
            if steps[a].eps <= steps[b].eps && steps[a].m_eps > steps[b].m_eps {
                monotone = false;
            }
        }
    }
    let bounds_hold = steps.iter().all(|s| sigma <= s.m_eps && s.m_eps <= h_sup);
    let meps_all_hold = steps.iter().all(|s| s.meps_holds != Some(false));
    Ok(DoublingDiagnostic { q, sigma, h_sup, steps, monotone, bounds_hold, meps_all_hold, contradiction_sought: sigma > 0.0 })
}

/// CSV with columns `eps,m_eps,pair_gap`.
pub fn write_doubling_csv(diag: &DoublingDiagnostic, path: &Path) -> Result<()> {
    let mut out = String::from("eps,m_eps,pair_gap\n");
    for s in &diag.steps {
        out.push_str(&format!("{},{},{}\n", s.eps, s.m_eps, s.pair_gap));
    }
    write_atomic(path, out.as_bytes())
}

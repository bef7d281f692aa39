use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{pv_evaluate, Verdict};
use crate::function_space::AnalyticFunction;
use crate::kernels::KernelSpec;
use crate::{critical_exponent, par, Result};

/// Half-width of the band around the critical curve excluded from agreement checks.
pub const NEAR_CRITICAL_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub s: f64,
    pub p: f64,
    pub critical_p: f64,
    /// `above`, `below` or `near-critical`.
    pub side: String,
    pub verdict: Verdict,
    pub fitted_rate: Option<f64>,
    /// `2(p - 1) - sp`, the exponent of the annulus contributions.
    pub predicted_rate: f64,
    /// Whether the verdict matches the side; `None` inside the band.
    pub agrees: Option<bool>,
}

/// Evaluates `L u(0)` for `u = min(|x|², 1)` over an `(s, p)` grid. The value
/// is finite exactly when `p > 2/(2 - s)`.
pub fn threshold_scan(s_grid: &[f64], p_grid: &[f64], template: &KernelSpec, tol: f64) -> Result<Vec<ScanRow>> {
    let u = AnalyticFunction::capped_square(template.n)?;
    let cells: Vec<(f64, f64)> = s_grid.iter().flat_map(|&s| p_grid.iter().map(move |&p| (s, p))).collect();
    let origin = vec![0.0; template.n];
    par::map_indexed(cells.len(), |i| {
        let (s, p) = cells[i];
        let spec = KernelSpec::new(template.n, s, p, template.lambda, template.profile.clone())?;
        let res = pv_evaluate(&u, &origin, &spec, tol)?;
        let critical_p = critical_exponent(s);
        let side = if (p - critical_p).abs() <= NEAR_CRITICAL_BAND {
            "near-critical"
        } else if p > critical_p {
            "above"
        } else {
            "below"
        };
        let agrees = match side {
            "above" => Some(res.verdict == Verdict::Converged),
            "below" => Some(res.verdict == Verdict::Diverged),
            _ => None,
        };
        Ok(ScanRow {
            s,
            p,
            critical_p,
            side: side.to_string(),
            verdict: res.verdict,
            fitted_rate: res.fitted_rate,
            predicted_rate: 2.0 * (p - 1.0) - s * p,
            agrees,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_scan_csv(rows: &[ScanRow], path: &Path) -> Result<()> {
    let mut out = String::from("s,p,critical_p,side,verdict,fitted_rate,predicted_rate,agrees\n");
    for r in rows {
        let verdict = match r.verdict {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::Inconclusive => "inconclusive",
        };
        let rate = r.fitted_rate.map(|v| v.to_string()).unwrap_or_default();
        let agrees = r.agrees.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{verdict},{rate},{},{agrees}",
            r.s, r.p, r.critical_p, r.side, r.predicted_rate
        );
    }
    crate::config::write_atomic(path, out.as_bytes())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::far::{ExteriorQuadrature, FarField};
use super::DomainSpec;
use crate::kernels::KernelSpec;
use crate::{par, Error, Result};

pub const GRID_SCHEMA_VERSION: u32 = 1;
const MAX_NODES: usize = 50_000_000;

/// Lattice description stored next to the values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub h: f64,
    pub collar_width: f64,
    pub far_field: FarField,
    pub origin: Vec<f64>,
    pub dims: Vec<usize>,
}

/// Values on the lattice `origin + h Zⁿ` covering Ω and a collar around it;
/// outside the union of lattice cells the far-field model applies.
/// Node `k` has multi-index `(k % dims[0], k / dims[0])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    header: GridHeader,
    values: Vec<f64>,
}

impl GridFunction {
    /// Samples `f` at every node. The lattice is aligned with `hZⁿ` and
    /// extends at least `collar_width` beyond the bounding box of Ω.
    pub fn new<F>(domain: DomainSpec, h: f64, collar_width: f64, far_field: FarField, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let header = Self::lattice(domain, h, collar_width, far_field)?;
        let n = header.dims.len();
        let total = header.dims.iter().product();
        let d0 = header.dims[0];
        let values = par::map_indexed(total, |k| {
            let x = node_coords(&header.origin, d0, header.h, n, k);
            f(&x[..n])
        });
        Self::from_parts(header, values)
    }

    pub fn lattice(domain: DomainSpec, h: f64, collar_width: f64, far_field: FarField) -> Result<GridHeader> {
        domain.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing h = {h} must be positive")));
        }
        let diam = domain.diameter();
        if !(collar_width >= diam * (1.0 - 1e-12)) || !collar_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "collar width {collar_width} must be at least diam(Ω) = {diam}"
            )));
        }
        if !far_field.is_finite() {
            return Err(Error::InvalidParameter("far-field model is not finite".into()));
        }
        let (lo, hi) = domain.bbox();
        let mut origin = Vec::new();
        let mut dims = Vec::new();
        for i in 0..lo.len() {
            let m_lo = ((lo[i] - collar_width) / h - 1e-9).floor();
            let m_hi = ((hi[i] + collar_width) / h + 1e-9).ceil();
            origin.push(m_lo * h);
            dims.push((m_hi - m_lo) as usize + 1);
        }
        if dims.iter().product::<usize>() > MAX_NODES {
            return Err(Error::InvalidParameter(format!("lattice {dims:?} exceeds {MAX_NODES} nodes")));
        }
        Ok(GridHeader { schema_version: GRID_SCHEMA_VERSION, domain, h, collar_width, far_field, origin, dims })
    }

    pub fn from_parts(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        if header.schema_version != GRID_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported grid schema {}", header.schema_version)));
        }
        let n = header.domain.dim();
        if header.dims.len() != n || header.origin.len() != n {
            return Err(Error::Format("header dimension mismatch".into()));
        }
        let expected = Self::lattice(header.domain.clone(), header.h, header.collar_width, header.far_field)?;
        if expected.dims.iter().zip(&header.dims).any(|(a, b)| b < a) {
            return Err(Error::Format("lattice does not cover domain and collar".into()));
        }
        let total: usize = header.dims.iter().product();
        if values.len() != total {
            return Err(Error::Format(format!("expected {total} values, got {}", values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {k}")));
        }
        Ok(GridFunction { header, values })
    }

    /// Same lattice, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.header.clone(), values)
    }

    pub fn map<F: Fn(&[f64], f64) -> f64 + Sync>(&self, f: F) -> Result<Self> {
        let n = self.dim();
        let values = par::map_indexed(self.len(), |k| f(&self.coords(k)[..n], self.values[k]));
        Self::from_parts(self.header.clone(), values)
    }

    pub fn with_far_field(&self, far_field: FarField) -> Result<Self> {
        let mut header = self.header.clone();
        header.far_field = far_field;
        Self::from_parts(header, self.values.clone())
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.header.domain
    }

    pub fn far_field(&self) -> FarField {
        self.header.far_field
    }

    pub fn dim(&self) -> usize {
        self.header.dims.len()
    }

    pub fn h(&self) -> f64 {
        self.header.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.header.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim() as i32)
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        node_coords(&self.header.origin, self.header.dims[0], self.h(), self.dim(), k)
    }

    pub fn multi_index(&self, k: usize) -> [usize; 2] {
        let d0 = self.header.dims[0];
        [k % d0, k / d0]
    }

    pub fn index(&self, m: [usize; 2]) -> usize {
        m[0] + self.header.dims[0] * m[1]
    }

    /// Node at `x`, if `x` lies on the lattice (to 1e-9 h).
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut m = [0usize; 2];
        for i in 0..self.dim() {
            let r = (x[i] - self.header.origin[i]) / self.h();
            let ri = r.round();
            if (r - ri).abs() > 1e-9 || ri < 0.0 || ri as usize >= self.header.dims[i] {
                return None;
            }
            m[i] = ri as usize;
        }
        Some(self.index(m))
    }

    pub fn is_interior(&self, k: usize) -> bool {
        let n = self.dim();
        self.header.domain.contains(&self.coords(k)[..n])
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_interior(k)).collect()
    }

    /// Union of the lattice cells: `[origin - h/2, origin + (dims-1) h + h/2]`.
    pub fn cell_box(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.h();
        let lo = self.header.origin.iter().map(|o| o - 0.5 * h).collect();
        let hi = self
            .header
            .origin
            .iter()
            .zip(&self.header.dims)
            .map(|(o, d)| o + (*d as f64 - 0.5) * h)
            .collect();
        (lo, hi)
    }

    /// Value at a node, or the far-field model off the lattice box.
    pub fn value_at(&self, y: &[f64]) -> Result<f64> {
        if let Some(k) = self.node_at(y) {
            return Ok(self.values[k]);
        }
        let (lo, hi) = self.cell_box();
        if (0..self.dim()).any(|i| y[i] < lo[i] || y[i] > hi[i]) {
            return Ok(self.header.far_field.value(y));
        }
        Err(Error::LatticeMismatch(format!("point {y:?} is inside the lattice box but not a node")))
    }

    pub fn exterior_quadrature(&self, sp: f64) -> ExteriorQuadrature {
        let (lo, hi) = self.cell_box();
        ExteriorQuadrature::new(&lo, &hi, sp)
    }

    pub fn same_lattice(&self, other: &GridFunction) -> bool {
        self.header.h == other.header.h
            && self.header.origin == other.header.origin
            && self.header.dims == other.header.dims
    }

    /// Writes `<path>` (CSV: coordinates and value per node) and the JSON
    /// header next to it with extension `json`. Both files are written to
    /// a temporary name first and renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.dim();
        let mut csv = String::with_capacity(self.len() * 48);
        csv.push_str(if n == 1 { "x,value\n" } else { "x,y,value\n" });
        for k in 0..self.len() {
            let x = self.coords(k);
            for xi in &x[..n] {
                let _ = write!(csv, "{xi},");
            }
            let _ = writeln!(csv, "{}", self.values[k]);
        }
        let header = serde_json::to_string_pretty(&self.header)?;
        crate::config::write_atomic(&header_path(path), header.as_bytes())?;
        crate::config::write_atomic(path, csv.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let header: GridHeader = serde_json::from_str(&fs::read_to_string(header_path(path))?)?;
        let text = fs::read_to_string(path)?;
        let n = header.dims.len();
        let tmp = GridFunction { header: header.clone(), values: Vec::new() };
        let mut values = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(Error::Format(format!("line {}: expected {} fields", line_no + 1, n + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", line_no + 1)))
            };
            let k = values.len();
            let x = tmp.coords_unchecked(k);
            for i in 0..n {
                let xi = parse(fields[i])?;
                if (xi - x[i]).abs() > 1e-9 * header.h {
                    return Err(Error::LatticeMismatch(format!("line {}: node coordinate {xi} != {}", line_no + 1, x[i])));
                }
            }
            values.push(parse(fields[n])?);
        }
        Self::from_parts(header, values)
    }

    fn coords_unchecked(&self, k: usize) -> [f64; 2] {
        node_coords(&self.header.origin, self.header.dims[0], self.header.h, self.header.dims.len(), k)
    }
}

fn node_coords(origin: &[f64], d0: usize, h: f64, n: usize, k: usize) -> [f64; 2] {
    let mut x = [0.0; 2];
    x[0] = origin[0] + (k % d0) as f64 * h;
    if n == 2 {
        x[1] = origin[1] + (k / d0) as f64 * h;
    }
    x
}

fn header_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Kernel values `K(Δ h)` for every lattice offset Δ, zero on the diagonal.
#[derive(Debug, Clone)]
pub struct KernelTable {
    span: [usize; 2],
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(spec: &KernelSpec, h: f64, dims: &[usize]) -> Self {
        let n = dims.len();
        let span = [dims[0], if n == 2 { dims[1] } else { 1 }];
        let w0 = 2 * span[0] - 1;
        let w1 = 2 * span[1] - 1;
        let values = par::map_indexed(w0 * w1, |k| {
            let di = (k % w0) as f64 - (span[0] - 1) as f64;
            let dj = (k / w0) as f64 - (span[1] - 1) as f64;
            if di == 0.0 && dj == 0.0 {
                0.0
            } else {
                let z = [di * h, dj * h];
                spec.eval(&z[..n]).unwrap_or(0.0)
            }
        });
        KernelTable { span, values }
    }

    #[inline]
    pub fn get(&self, a: [usize; 2], b: [usize; 2]) -> f64 {
        let w0 = 2 * self.span[0] - 1;
        let i = a[0] + self.span[0] - 1 - b[0];
        let j = a[1] + self.span[1] - 1 - b[1];
        self.values[i + w0 * j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFunction {
        let d = DomainSpec::Box { lo: [-1.0, -0.5], hi: [1.0, 0.5] };
        GridFunction::new(d, 0.25, 2.3, FarField::Constant { value: 0.5 }, |x| (x[0] * 1.3).sin() + x[1] / 3.0)
            .unwrap()
    }

    #[test]
    fn lattice_covers_collar() {
        let g = sample();
        let (lo, hi) = g.cell_box();
        assert!(lo[0] <= -1.0 - 2.3 && hi[1] >= 0.5 + 2.3);
        let k = g.node_at(&[0.25, -0.5]).unwrap();
        assert_eq!(g.coords(k), [0.25, -0.5]);
        assert!(g.node_at(&[0.1, 0.0]).is_none());
        assert!(!g.is_interior(k));
        assert!(g.is_interior(g.node_at(&[0.0, 0.0]).unwrap()));
    }

    #[test]
    fn rejects_thin_collar_and_bad_values() {
        let d = DomainSpec::Interval { lo: 0.0, hi: 1.0 };
        assert!(GridFunction::new(d.clone(), 0.1, 0.5, FarField::Zero, |_| 0.0).is_err());
        assert!(GridFunction::new(d, 0.1, 1.0, FarField::Zero, |_| f64::NAN).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = sample().map(|x, v| v * std::f64::consts::PI + x[0] * 1e-17).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        g.save(&path).unwrap();
        let back = GridFunction::load(&path).unwrap();
        assert_eq!(back.header(), g.header());
        assert!(back.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn kernel_table_matches_direct_evaluation() {
        let spec = KernelSpec::fractional(2, 0.4, 2.5).unwrap();
        let t = KernelTable::new(&spec, 0.5, &[5, 4]);
        let direct = spec.eval(&[1.5, -1.0]).unwrap();
        assert_eq!(t.get([4, 0], [1, 2]), direct);
        assert_eq!(t.get([2, 2], [2, 2]), 0.0);
    }
}

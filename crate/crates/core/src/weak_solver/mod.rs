//! Discrete Dirichlet problem: minimize the lattice energy over interior
//! values with the collar and far field held fixed, and test the weak
//! inequality against interior hat functions.

mod pairing;
mod system;

pub use pairing::{c2_pointwise_to_weak_check, classify_weak, weak_pairing, PointwiseWeakReport, WeakClass, WeakResidualReport};

use serde::{Deserialize, Serialize};

use crate::function_space::{DomainSpec, FarField, GridFunction};
use crate::kernels::KernelSpec;
use crate::{Error, Result};
use system::System;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Damped Newton with a conjugate-gradient inner solve.
    #[default]
    Newton,
    /// Red-black nonlinear Gauss-Seidel with bisection per node.
    CoordinateDescent,
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub spec: KernelSpec,
    /// Collar values and far field are the datum; interior values are the
    /// starting guess.
    pub exterior: GridFunction,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl DirichletProblem {
    pub fn new(spec: KernelSpec, exterior: GridFunction, tolerance: f64) -> Result<Self> {
        if exterior.dim() != spec.n {
            return Err(Error::InvalidParameter("kernel and lattice dimensions differ".into()));
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
        }
        if !exterior.far_field().in_tail_space(spec.s, spec.p) {
            return Err(Error::NotInTailSpace(format!(
                "far-field growth {} reaches sp/(p-1) = {}",
                exterior.far_field().growth_exponent(),
                FarField::marginal_exponent(spec.s, spec.p)
            )));
        }
        if exterior.interior_indices().is_empty() {
            return Err(Error::Domain("no lattice node lies inside the domain".into()));
        }
        Ok(DirichletProblem { spec, exterior, tolerance, max_iterations: 200, method: Method::Newton })
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        self.exterior.domain()
    }
}

/// Per-iteration trace. `residuals[k]` is `max |L_h u|` over interior nodes,
/// which is the energy gradient divided by `2p hⁿ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveLog {
    pub method: Method,
    pub iterations: usize,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

pub fn solve_dirichlet(prob: &DirichletProblem) -> Result<GridFunction> {
    solve_dirichlet_logged(prob).map(|(u, _)| u)
}

pub fn solve_dirichlet_logged(prob: &DirichletProblem) -> Result<(GridFunction, SolveLog)> {
    let sys = System::new(&prob.exterior, &prob.spec)?;
    let mut vals = prob.exterior.values().to_vec();
    let mut log = SolveLog {
        method: prob.method,
        iterations: 0,
        energies: Vec::new(),
        residuals: Vec::new(),
        converged: false,
    };
    let mut state = sys.evaluate(&vals);
    loop {
        let energy = sys.energy_of(state.objective);
        let residual = state.max_residual();
        log.energies.push(energy);
        log.residuals.push(residual);
        if residual < prob.tolerance * (1.0 + energy) {
            log.converged = true;
            break;
        }
        if log.iterations >= prob.max_iterations {
            break;
        }
        log.iterations += 1;
        let next = match prob.method {
            Method::Newton => sys.newton_step(&vals, &state),
            Method::CoordinateDescent => sys.sweep(&vals, &state),
        };
        match next {
            Some((v, s)) => {
                vals = v;
                state = s;
            }
            None => break,
        }
    }
    let u = prob.exterior.with_values(vals)?;
    if !log.converged {
        let residual = log.residuals.last().copied().unwrap_or(f64::INFINITY);
        return Err(Error::NoConvergence { iterations: log.iterations, residual, best: Box::new(u) });
    }
    Ok((u, log))
}

/// The discrete energy `Σ_{x ≠ y} |u(x) - u(y)|^p K(x - y) h^{2n}` over
/// ordered pairs with at least one interior node, plus twice the
/// interior-to-far-field interaction. Pairs with both points exterior are
/// constant in the unknowns and left out.
pub fn discrete_energy(u: &GridFunction, spec: &KernelSpec) -> Result<f64> {
    let sys = System::new(u, spec)?;
    Ok(sys.energy_of(sys.evaluate(u.values()).objective))
}

#[cfg(test)]
mod tests;

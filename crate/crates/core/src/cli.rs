//! Subcommand dispatch. Every run writes one JSON report
//! `{schema_version, subcommand, seed, pass, report}`; some also write CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::algebra::run_lemma_suite;
use crate::comparison::{compare, doubling_diagnostic, doubling_exponent, write_doubling_csv};
use crate::config::{write_atomic, RunConfig, Subcommand, SCHEMA_VERSION};
use crate::function_space::GridFunction;
use crate::kernels::check_admissibility;
use crate::pv_engine::{pv_evaluate, threshold_scan, write_scan_csv, Field, Verdict};
use crate::viscosity::{check_viscosity_at, scan_equivalence, TestFunction};
use crate::weak_solver::{classify_weak, solve_dirichlet_logged, DirichletProblem, WeakClass};
use crate::{Error, Result};

/// Result of a run: whether every checked property held, and what was written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// 1 for a solver that ran out of iterations, 2 for anything the caller
/// got wrong.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } => 1,
        _ => 2,
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    subcommand: &'a str,
    seed: u64,
    pass: bool,
    report: T,
}

fn write_report<T: Serialize>(cfg: &RunConfig, cmd: Subcommand, pass: bool, report: T) -> Result<PathBuf> {
    let env = Envelope { schema_version: SCHEMA_VERSION, subcommand: cmd.name(), seed: cfg.seed, pass, report };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    let path = cfg.json_path(cmd);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn load_grid(path: &Path) -> Result<GridFunction> {
    GridFunction::load(path)
}

pub fn run(cmd: Subcommand, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate(cmd)?;
    match cmd {
        Subcommand::CheckKernel => {
            let spec = cfg.kernel_spec()?;
            let plan = cfg.sample_plan.clone().unwrap_or_default();
            let rep = check_admissibility(&spec, &plan)?;
            let pass = rep.all_pass;
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary: format!("kernel admissible: {pass}"), artifacts: vec![json] })
        }
        Subcommand::LemmaSuite => {
            let reps = run_lemma_suite(cfg.seed, cfg.lemma.samples, cfg.lemma.oracle_samples);
            let pass = reps.iter().all(|r| r.pass);
            let violations: usize = reps.iter().map(|r| r.violations).sum();
            let json = write_report(cfg, cmd, pass, &reps)?;
            Ok(Outcome { pass, summary: format!("{} lemmas, {violations} violations", reps.len()), artifacts: vec![json] })
        }
        Subcommand::PvEval => {
            let spec = cfg.kernel_spec()?;
            let grid;
            let analytic;
            let field: Field = match (&cfg.function, &cfg.input.u) {
                (Some(f), _) => {
                    analytic = f.build(spec.n)?;
                    Field::Analytic(&analytic)
                }
                (None, Some(path)) => {
                    grid = load_grid(path)?;
                    Field::Grid(&grid)
                }
                (None, None) => unreachable!("validated"),
            };
            let points = cfg.points.as_deref().unwrap_or_default();
            let results: Vec<_> = points.iter().map(|x| pv_evaluate(field, x, &spec, cfg.tolerance.pv_tol)).collect::<Result<_>>()?;
            let mut csv = String::from("point,eps,partial\n");
            for (i, r) in results.iter().enumerate() {
                for (e, s) in r.epsilons.iter().zip(&r.partials) {
                    let _ = writeln!(csv, "{i},{e},{s}");
                }
            }
            let csv_path = cfg.csv_path(cmd);
            write_atomic(&csv_path, csv.as_bytes())?;
            let pass = results.iter().all(|r| r.verdict != Verdict::Inconclusive);
            let converged = results.iter().filter(|r| r.is_converged()).count();
            let json = write_report(cfg, cmd, pass, &results)?;
            Ok(Outcome {
                pass,
                summary: format!("{converged}/{} points converged", results.len()),
                artifacts: vec![json, csv_path],
            })
        }
        Subcommand::ThresholdScan => {
            let spec = cfg.kernel_spec()?;
            let rows = threshold_scan(&cfg.scan.s, &cfg.scan.p, &spec, cfg.tolerance.pv_tol)?;
            let csv_path = cfg.csv_path(cmd);
            write_scan_csv(&rows, &csv_path)?;
            let disagreements = rows.iter().filter(|r| r.agrees == Some(false)).count();
            let pass = disagreements == 0;
            let json = write_report(cfg, cmd, pass, &rows)?;
            Ok(Outcome {
                pass,
                summary: format!("{} cells, {disagreements} off the critical curve", rows.len()),
                artifacts: vec![json, csv_path],
            })
        }
        Subcommand::Solve => {
            let spec = cfg.kernel_spec()?;
            let csv_path = cfg.output.csv.clone().unwrap_or_else(|| PathBuf::from("solution.csv"));
            let json_path = cfg.json_path(cmd);
            if csv_path.with_extension("json") == json_path {
                return Err(Error::Format(format!("solution header {} would overwrite the report", json_path.display())));
            }
            let mut prob = DirichletProblem::new(spec, cfg.exterior_data()?, cfg.tolerance.solver_tol)?.with_method(cfg.solver.method);
            if let Some(m) = cfg.solver.max_iterations {
                prob = prob.with_max_iterations(m);
            }
            #[derive(Serialize)]
            struct SolveReport {
                converged: bool,
                iterations: Option<usize>,
                residual: Option<f64>,
                tol: f64,
                log: Option<crate::weak_solver::SolveLog>,
            }
            let (u, rep) = match solve_dirichlet_logged(&prob) {
                Ok((u, log)) => (
                    u,
                    SolveReport {
                        converged: log.converged,
                        iterations: Some(log.iterations),
                        residual: log.residuals.last().copied(),
                        tol: prob.tolerance,
                        log: Some(log),
                    },
                ),
                Err(Error::NoConvergence { iterations, residual, best }) => (
                    *best,
                    SolveReport { converged: false, iterations: Some(iterations), residual: Some(residual), tol: prob.tolerance, log: None },
                ),
                Err(e) => return Err(e),
            };
            u.save(&csv_path)?;
            let pass = rep.converged;
            let summary = format!("converged: {pass} after {} iterations", rep.iterations.unwrap_or(0));
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json, csv_path.clone(), csv_path.with_extension("json")] })
        }
        Subcommand::Residual => {
            let spec = cfg.kernel_spec()?;
            let u = load_grid(cfg.input.u.as_deref().unwrap())?;
            let rep = classify_weak(&u, &spec, cfg.tolerance.comparison_tol)?;
            let pass = rep.classification != WeakClass::Neither;
            let summary = format!("{:?}, pairings in [{:e}, {:e}]", rep.classification, rep.min, rep.max);
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json] })
        }
        Subcommand::ViscosityCheck => {
            let spec = cfg.kernel_spec()?;
            let t = cfg.test.as_ref().unwrap();
            let phi = TestFunction::new(t.function.build(spec.n)?, &t.x0, t.r, t.beta, &spec)?;
            let tol = cfg.tolerance.viscosity_tol;
            let rep = match (&cfg.function, &cfg.input.u) {
                (Some(f), _) => check_viscosity_at(&f.build(spec.n)?, &phi, &spec, tol)?,
                (None, Some(path)) => check_viscosity_at(&load_grid(path)?, &phi, &spec, tol)?,
                (None, None) => unreachable!("validated"),
            };
            let pass = rep.pass;
            let summary = format!("{:?} value {:?}", rep.verdict, rep.value);
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json] })
        }
        Subcommand::ScanEquivalence => {
            let spec = cfg.kernel_spec()?;
            let u = match &cfg.input.u {
                Some(path) => load_grid(path)?,
                None => {
                    let prob = DirichletProblem::new(spec.clone(), cfg.exterior_data()?, cfg.tolerance.solver_tol)?.with_method(cfg.solver.method);
                    solve_dirichlet_logged(&prob)?.0
                }
            };
            let family = cfg.family.clone().unwrap_or_default();
            let rep = scan_equivalence(&u, &spec, &family, cfg.tolerance.viscosity_tol)?;
            let pass = rep.pass;
            let summary = format!("{} touchings, {} failures", rep.touchings_tested, rep.failures);
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json] })
        }
        Subcommand::Compare => {
            let spec = cfg.kernel_spec()?;
            let u = load_grid(cfg.input.u.as_deref().unwrap())?;
            let v = load_grid(cfg.input.v.as_deref().unwrap())?;
            let rep = compare(&u, &v, &spec, cfg.tolerance.comparison_tol)?;
            let pass = rep.pass;
            let summary = format!("min(u - v) = {:e}", rep.min_gap);
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json] })
        }
        Subcommand::DoublingDiagnostic => {
            let spec = cfg.kernel_spec()?;
            let u = load_grid(cfg.input.u.as_deref().unwrap())?;
            let v = load_grid(cfg.input.v.as_deref().unwrap())?;
            let q = cfg.doubling.q.unwrap_or_else(|| doubling_exponent(&spec));
            let rep = doubling_diagnostic(&u, &v, &spec, q, &cfg.doubling.eps)?;
            let csv_path = cfg.csv_path(cmd);
            write_doubling_csv(&rep, &csv_path)?;
            let pass = rep.monotone && rep.bounds_hold && rep.meps_all_hold;
            let summary = format!("σ = {:e}, monotone {}, inequality {}", rep.sigma, rep.monotone, rep.meps_all_hold);
            let json = write_report(cfg, cmd, pass, &rep)?;
            Ok(Outcome { pass, summary, artifacts: vec![json, csv_path] })
        }
    }
}

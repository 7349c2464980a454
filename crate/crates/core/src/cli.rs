//! Command implementations behind the `slab-adjoint` binary.
//!
//! Exit codes: [`EXIT_OK`] when every enabled check passes,
//! [`EXIT_CHECK_FAILED`] when any check fails, [`EXIT_ERROR`] for bad
//! configuration or I/O failures.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::bvp::{Grid, SolveLedger};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::report::{fmt4, write_report, RunReport};
use crate::verification::{
    analyze_detector, convergence_ladder, cross_path_checks, grid_convergence_check, symmetry_checks, verify_detector,
    Check, DetectorResults,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sensitivities, moments, and the cheap consistency checks.
    Run,
    /// Everything in `Run` plus finite differences, duality and grid convergence.
    Verify,
    /// Sensitivity and moment tables only; no checks.
    Tables,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub mode: Mode,
    pub report: RunReport,
    pub written: Vec<PathBuf>,
    pub adjoint_solves: u64,
    pub total_solves: u64,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }

    /// Human-readable summary for stdout.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for d in &self.report.detectors {
            let _ = writeln!(
                out,
                "b = {} cm: R = {} cm^-3 s^-1, adjoint solves per response: {}",
                d.detector_b,
                fmt4(d.response_numeric),
                d.adjoint_solves
            );
        }
        for c in &self.report.checks {
            let _ = writeln!(out, "{} {} (measured {}, tolerance {})", if c.passed { "PASS" } else { "FAIL" }, c.name, fmt4(c.measured), fmt4(c.tolerance));
        }
        let failed = self.report.checks.iter().filter(|c| !c.passed).count();
        if self.mode != Mode::Tables {
            let _ = writeln!(out, "{} checks, {} failed", self.report.checks.len(), failed);
        }
        let _ = writeln!(out, "bvp solves: {} total, {} adjoint", self.total_solves, self.adjoint_solves);
        for p in &self.written {
            let _ = writeln!(out, "wrote {}", p.display());
        }
        out
    }
}

pub fn exit_code_for_error(_: &Error) -> i32 {
    EXIT_ERROR
}

fn detector_grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::new(cfg.n_nodes, cfg.half_thickness).map_err(|e| Error::Config(e.to_string()))
}

fn require_on_grid(cfg: &RunConfig, grid: &Grid) -> Result<()> {
    for &b in &cfg.detectors {
        if !grid.is_node(b) {
            return Err(Error::Config(format!(
                "detector b = {b} cm is not a node of the {}-node grid (spacing {} cm)",
                grid.n_nodes(),
                grid.spacing()
            )));
        }
    }
    Ok(())
}

fn run_checks(cfg: &RunConfig, r: &DetectorResults) -> Vec<Check> {
    let b = r.params.detector_b();
    let mut checks = cross_path_checks(
        &r.params,
        (&r.first_quadrature, &r.second_quadrature),
        (&r.first_closed_form, &r.second_closed_form),
        cfg.tolerances.cross_path,
    );
    checks.extend(symmetry_checks(&r.symmetry_quadrature, b, cfg.tolerances.symmetry_quadrature));
    checks.extend(symmetry_checks(&r.symmetry_closed_form, b, cfg.tolerances.symmetry_closed_form));
    checks.push(Check::at_most(
        format!("adjoint solves b={b}"),
        (r.adjoint_solves as f64 - 4.0).abs(),
        0.0,
        format!("{} adjoint solves", r.adjoint_solves),
    ));
    checks
}

/// Runs `mode` and writes the outputs configured in `cfg`.
pub fn execute(mode: Mode, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let grid = detector_grid(cfg)?;
    let ledger = SolveLedger::new();
    let mut results = Vec::new();
    let mut checks = Vec::new();

    match mode {
        Mode::Run | Mode::Tables => {
            require_on_grid(cfg, &grid)?;
            for &b in &cfg.detectors {
                let r = analyze_detector(&cfg.params_at(b)?, &grid, &ledger)?;
                if mode == Mode::Run {
                    checks.extend(run_checks(cfg, &r));
                }
                results.push(r);
            }
        }
        Mode::Verify => {
            let ladder = convergence_ladder(cfg.n_nodes);
            for (k, &b) in cfg.detectors.iter().enumerate() {
                let p = cfg.params_at(b)?;
                match analyze_detector(&p, &grid, &ledger) {
                    Ok(r) => {
                        checks.extend(verify_detector(&r, &cfg.tolerances, &ladder, cfg.seed.wrapping_add(k as u64), &ledger)?);
                        results.push(r);
                    }
                    Err(e) => {
                        checks.push(Check::failed(format!("analysis b={b}"), 0.0, e.to_string()));
                        checks.push(grid_convergence_check(&p, &ladder, cfg.tolerances.convergence_order));
                    }
                }
            }
        }
    }

    let report = RunReport::assemble(cfg, &results, checks)?;
    let written = write_report(&report, &cfg.output_dir, cfg.format, mode != Mode::Tables)?;
    Ok(Outcome { mode, report, written, adjoint_solves: ledger.adjoint_solves(), total_solves: ledger.total() })
}

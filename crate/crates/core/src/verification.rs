//! Oracle suites: finite differences, dual routes, forward/adjoint duality,
//! grid convergence and the solve budget.
//!
//! Every suite returns [`Check`] records. A failed check is data, not an
//! error; errors are reserved for inputs the suites cannot evaluate at all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::adjoint::{build_bundle, closed_form_psi, solve_first_adjoint, solve_flux};
use crate::bvp::{Grid, ScalarField, SolveLedger};
use crate::error::Result;
use crate::forward::{solve_forward_sensitivity_with_flux, total_first_variation, ParameterVariation};
use crate::model::{analytic_flux, analytic_response, ModelParameters, Param};
use crate::sensitivities::{
    first_order_closed_form, first_order_quadrature, mixed_close, second_order_closed_form, second_order_quadrature,
    symmetry_report, symmetry_report_closed_form, SensitivityMatrix, SensitivityVector, SymmetryReport,
};

/// Outcome of one verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured <= tolerance, detail: detail.into() }
    }

    /// Passes when `measured ≥ tolerance`.
    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured >= tolerance, detail: detail.into() }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), measured: f64::NAN, tolerance, passed: false, detail: detail.into() }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Tolerances for every suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// First-order sensitivities against central FD of the response.
    pub fd_first: f64,
    /// Second-order sensitivities against the FD stencil.
    pub fd_second: f64,
    /// Quadrature path against closed form.
    pub cross_path: f64,
    /// Dual-route mixed partials on the quadrature path.
    pub symmetry_quadrature: f64,
    /// Dual-route mixed partials in closed form.
    pub symmetry_closed_form: f64,
    /// Forward route against adjoint route.
    pub duality: f64,
    /// Minimum observed convergence order.
    pub convergence_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fd_first: 1e-4,
            fd_second: 1e-3,
            cross_path: 1e-2,
            symmetry_quadrature: 1e-2,
            symmetry_closed_form: 1e-10,
            duality: 1e-4,
            convergence_order: 1.9,
        }
    }
}

fn relative(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        x.abs()
    } else {
        ((x - y) / y).abs()
    }
}

/// Discrepancy under the mixed absolute/relative rule: the relative error,
/// or zero when the absolute error sits under the floor.
fn mixed_discrepancy(x: f64, y: f64, floor: f64) -> f64 {
    if mixed_close(x, y, 0.0, floor) {
        0.0
    } else {
        relative(x, y)
    }
}

fn response_at(p: &ModelParameters, values: [f64; 4]) -> f64 {
    analytic_response(&p.with_values(values).expect("perturbed parameters stay valid"))
}

/// Central differences of the closed-form response with relative step `rel_step`.
pub fn finite_difference_gradient(p: &ModelParameters, rel_step: f64) -> [f64; 4] {
    let alpha = p.values();
    [0, 1, 2, 3].map(|i| {
        let h = rel_step * alpha[i];
        let mut up = alpha;
        let mut down = alpha;
        up[i] += h;
        down[i] -= h;
        (response_at(p, up) - response_at(p, down)) / (2.0 * h)
    })
}

/// Second-order central-difference stencil with relative step `rel_step`.
pub fn finite_difference_hessian(p: &ModelParameters, rel_step: f64) -> [[f64; 4]; 4] {
    let alpha = p.values();
    let h = alpha.map(|a| rel_step * a);
    let at = |shifts: &[(usize, f64)]| {
        let mut v = alpha;
        for &(i, s) in shifts {
            v[i] += s * h[i];
        }
        response_at(p, v)
    };
    let r0 = at(&[]);
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        out[i][i] = (at(&[(i, 1.0)]) - 2.0 * r0 + at(&[(i, -1.0)])) / (h[i] * h[i]);
        for j in i + 1..4 {
            let v = (at(&[(i, 1.0), (j, 1.0)]) - at(&[(i, 1.0), (j, -1.0)]) - at(&[(i, -1.0), (j, 1.0)])
                + at(&[(i, -1.0), (j, -1.0)]))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Each `Sᵢ` against central FD (relative step 1e-5).
pub fn fd_first_order_checks(p: &ModelParameters, s: &SensitivityVector, tolerance: f64) -> Vec<Check> {
    let fd = finite_difference_gradient(p, 1e-5);
    Param::ALL
        .iter()
        .map(|&param| {
            let i = param.index();
            Check::at_most(
                format!("fd S{} ({}) b={}", i + 1, s.method.label(), p.detector_b()),
                relative(s.values[i], fd[i]),
                tolerance,
                format!("{:e} vs FD {:e}", s.values[i], fd[i]),
            )
        })
        .collect()
}

/// Each `Sᵢⱼ` against the FD stencil (relative steps 1e-3).
///
/// Entries that vanish identically are compared against the stencil's
/// round-off level `16 ε |R| / (hᵢ hⱼ)` instead of relatively.
pub fn fd_second_order_checks(p: &ModelParameters, m: &SensitivityMatrix, tolerance: f64) -> Vec<Check> {
    let rel_step = 1e-3;
    let fd = finite_difference_hessian(p, rel_step);
    let r0 = analytic_response(p).abs();
    let h = p.values().map(|a| rel_step * a);
    let mut out = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            let floor = 16.0 * f64::EPSILON * r0 / (h[i] * h[j]);
            out.push(Check::at_most(
                format!("fd S{}{} ({}) b={}", i + 1, j + 1, m.method.label(), p.detector_b()),
                mixed_discrepancy(m.at(i, j), fd[i][j], floor),
                tolerance,
                format!("{:e} vs FD {:e}", m.at(i, j), fd[i][j]),
            ));
        }
    }
    out
}

/// Quadrature against closed form, entrywise relative; entries that are
/// zero on both paths agree.
pub fn cross_path_checks(
    p: &ModelParameters,
    (sq, mq): (&SensitivityVector, &SensitivityMatrix),
    (sc, mc): (&SensitivityVector, &SensitivityMatrix),
    tolerance: f64,
) -> Vec<Check> {
    let b = p.detector_b();
    let worst_first = (0..4).map(|i| mixed_discrepancy(sq.values[i], sc.values[i], 0.0)).fold(0.0, f64::max);
    let worst_second = (0..4)
        .flat_map(|i| (i..4).map(move |j| (i, j)))
        .map(|(i, j)| mixed_discrepancy(mq.at(i, j), mc.at(i, j), 0.0))
        .fold(0.0, f64::max);
    vec![
        Check::at_most(format!("quadrature vs closed form, first order b={b}"), worst_first, tolerance, "max relative discrepancy"),
        Check::at_most(format!("quadrature vs closed form, second order b={b}"), worst_second, tolerance, "max relative discrepancy"),
    ]
}

/// One check per symmetric pair of `report`.
pub fn symmetry_checks(report: &SymmetryReport, b: f64, tolerance: f64) -> Vec<Check> {
    report
        .pairs
        .iter()
        .map(|pair| {
            Check::at_most(
                format!("symmetry {} ({}) b={b}", pair.label, report.method.label()),
                pair.relative_discrepancy(),
                tolerance,
                format!("{:e} vs {:e}", pair.ij, pair.ji),
            )
        })
        .collect()
}

/// Forward-route first variation against `Σ Sᵢ hᵢ` for random variations.
///
/// Each component is drawn uniformly within ±10% of its nominal parameter.
pub fn duality_check(
    p: &ModelParameters,
    phi: &ScalarField,
    s: &SensitivityVector,
    count: usize,
    seed: u64,
    tolerance: f64,
    ledger: &SolveLedger,
) -> Result<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let alpha = p.values();
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let v = ParameterVariation::from_array(alpha.map(|a| rng.random_range(-0.1..0.1) * a))?;
        let h = solve_forward_sensitivity_with_flux(p, phi, &v, ledger)?;
        let forward = total_first_variation(p, &v, phi, &h)?;
        let adjoint = v.dot(s);
        worst = worst.max(relative(forward, adjoint));
    }
    Ok(Check::at_most(
        format!("duality b={}", p.detector_b()),
        worst,
        tolerance,
        format!("{count} random variations, max relative discrepancy"),
    ))
}

/// Max-norm errors of φ and ψ against their closed forms on one grid.
pub fn field_errors(p: &ModelParameters, n_nodes: usize) -> Result<(f64, f64)> {
    let grid = Grid::for_model(n_nodes, p)?;
    let scratch = SolveLedger::new();
    let phi = solve_flux(p, &grid, &scratch)?;
    let psi = solve_first_adjoint(p, &grid, &scratch)?;
    let a = p.half_thickness_a();
    let mut e_phi: f64 = 0.0;
    let mut e_psi: f64 = 0.0;
    for (i, x) in grid.nodes().enumerate() {
        let x = x.clamp(-a, a);
        e_phi = e_phi.max((phi.values()[i] - analytic_flux(p, x)?).abs());
        e_psi = e_psi.max((psi.values()[i] - closed_form_psi(p, x)?).abs());
    }
    Ok((e_phi, e_psi))
}

/// Grids with halving spacing that end at `n_nodes`, or start there when
/// `n_nodes − 1` is not divisible by 4: 4001 gives 1001, 2001, 4001, 8001.
pub fn convergence_ladder(n_nodes: usize) -> [usize; 4] {
    let n0 = if n_nodes > 4 && (n_nodes - 1).is_multiple_of(4) { (n_nodes - 1) / 4 + 1 } else { n_nodes };
    [n0, 2 * n0 - 1, 4 * n0 - 3, 8 * n0 - 7]
}

/// Observed orders `log₂(e_n / e_{2n−1})` for φ and ψ across `ladder`.
pub fn observed_orders(p: &ModelParameters, ladder: &[usize]) -> Result<Vec<(f64, f64)>> {
    let errs = ladder.iter().map(|&n| field_errors(p, n)).collect::<Result<Vec<_>>>()?;
    Ok(errs.windows(2).map(|w| ((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2())).collect())
}

pub fn grid_convergence_check(p: &ModelParameters, ladder: &[usize], min_order: f64) -> Check {
    let name = format!("grid convergence b={} n={:?}", p.detector_b(), ladder);
    match observed_orders(p, ladder) {
        Ok(orders) => {
            let worst = orders.iter().map(|(a, b)| a.min(*b)).fold(f64::INFINITY, f64::min);
            let worst = if worst.is_nan() { f64::NEG_INFINITY } else { worst };
            Check::at_least(name, worst, min_order, format!("observed orders (phi, psi): {orders:?}"))
        }
        Err(e) => Check::failed(name, min_order, e.to_string()),
    }
}

/// Everything computed for one detector position.
#[derive(Debug, Clone)]
pub struct DetectorResults {
    pub params: ModelParameters,
    pub phi: ScalarField,
    pub response_numeric: f64,
    pub response_closed_form: f64,
    pub first_quadrature: SensitivityVector,
    pub first_closed_form: SensitivityVector,
    pub second_quadrature: SensitivityMatrix,
    pub second_closed_form: SensitivityMatrix,
    pub symmetry_quadrature: SymmetryReport,
    pub symmetry_closed_form: SymmetryReport,
    /// Adjoint solves made for this detector.
    pub adjoint_solves: u64,
}

/// One forward and four adjoint solves, then both sensitivity paths.
pub fn analyze_detector(p: &ModelParameters, grid: &Grid, ledger: &SolveLedger) -> Result<DetectorResults> {
    let local = SolveLedger::new();
    let (phi, bundle) = build_bundle(p, grid, &local)?;
    ledger.merge(&local);
    let response_numeric = p.sigma_d() * crate::bvp::sample_at(&phi, p.detector_b())?;
    Ok(DetectorResults {
        params: *p,
        response_numeric,
        response_closed_form: analytic_response(p),
        first_quadrature: first_order_quadrature(&bundle, &phi, p)?,
        first_closed_form: first_order_closed_form(p),
        second_quadrature: second_order_quadrature(&bundle, &phi, p)?,
        second_closed_form: second_order_closed_form(p),
        symmetry_quadrature: symmetry_report(&bundle, &phi, p)?,
        symmetry_closed_form: symmetry_report_closed_form(p)?,
        adjoint_solves: local.adjoint_solves(),
        phi,
    })
}

/// Full oracle suite for one detector position.
pub fn verify_detector(
    results: &DetectorResults,
    tolerances: &Tolerances,
    ladder: &[usize],
    seed: u64,
    ledger: &SolveLedger,
) -> Result<Vec<Check>> {
    let p = &results.params;
    let b = p.detector_b();
    let mut checks = Vec::new();
    checks.extend(fd_first_order_checks(p, &results.first_quadrature, tolerances.fd_first));
    checks.extend(fd_first_order_checks(p, &results.first_closed_form, tolerances.fd_first));
    checks.extend(fd_second_order_checks(p, &results.second_quadrature, tolerances.fd_second));
    checks.extend(fd_second_order_checks(p, &results.second_closed_form, tolerances.fd_second));
    checks.extend(cross_path_checks(
        p,
        (&results.first_quadrature, &results.second_quadrature),
        (&results.first_closed_form, &results.second_closed_form),
        tolerances.cross_path,
    ));
    checks.extend(symmetry_checks(&results.symmetry_quadrature, b, tolerances.symmetry_quadrature));
    checks.extend(symmetry_checks(&results.symmetry_closed_form, b, tolerances.symmetry_closed_form));
    checks.push(duality_check(p, &results.phi, &results.first_quadrature, 100, seed, tolerances.duality, ledger)?);
    checks.push(grid_convergence_check(p, ladder, tolerances.convergence_order));
    checks.push(Check::at_most(
        format!("adjoint solves b={b}"),
        (results.adjoint_solves as f64 - 4.0).abs(),
        0.0,
        format!("{} adjoint solves", results.adjoint_solves),
    ));
    Ok(checks)
}

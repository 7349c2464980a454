//! First and second adjoint functions for the detector response.
//!
//! Production path: one forward flux solve, then exactly four adjoint solves
//! per detector position. These are ψ (delta source), λ₁ (source ψ),
//! θ₁ (source φ) and θ₂ (source Q/D − (Σa/D)φ). Three more adjoint
//! functions come without a solve:
//!
//! * `λ₄ = ψ / Σd` (same system with unit detector cross section),
//! * `θ₃ = −φ / Q` (unit source versus the flux's `−Q`),
//! * `λ₂ = −(Σa/D) λ₁` (proportional sources).
//!
//! `λ₃` and `θ₄` are identically zero and are not represented.
//!
//! The `closed_form_*` functions evaluate the analytic adjoint functions and
//! serve as oracles for the numeric solves.

use crate::bvp::{solve_bvp, Grid, ScalarField, SolveLedger, SolveTag, SourceSpec};
use crate::error::{Error, Result};
use crate::hyperbolic::{cosh_ratio, hyperbolic_product_ratio, sinh_cosh_ratio, sinh_ratio};
use crate::model::ModelParameters;

/// Adjoint functions for one detector position.
#[derive(Debug, Clone)]
pub struct AdjointBundle {
    pub psi: ScalarField,
    pub lambda1: ScalarField,
    pub theta1: ScalarField,
    pub theta2: ScalarField,
    /// `ψ / Σd`, no solve.
    pub lambda4: ScalarField,
    /// `−φ / Q`, no solve.
    pub theta3: ScalarField,
    /// `−(Σa/D) λ₁`, no solve.
    pub lambda2: ScalarField,
    /// Large-scale adjoint solves behind this bundle, ψ included.
    pub solve_count: u32,
}

/// Nominal flux: solves `D φ'' − Σa φ = −Q`. Tagged as a forward solve.
pub fn solve_flux(p: &ModelParameters, grid: &Grid, ledger: &SolveLedger) -> Result<ScalarField> {
    solve_bvp(p, grid, &SourceSpec::constant(-p.source_q()), ledger, SolveTag::Forward)
}

/// First adjoint ψ: `D ψ'' − Σa ψ = Σd δ(x − b)`, `ψ(±a) = 0`.
pub fn solve_first_adjoint(p: &ModelParameters, grid: &Grid, ledger: &SolveLedger) -> Result<ScalarField> {
    let b = p.detector_b();
    grid.node_index(b)?;
    solve_bvp(p, grid, &SourceSpec::delta(b, p.sigma_d()), ledger, SolveTag::FirstAdjoint)
}

/// Solves the three remaining adjoint systems and applies the reuse rules.
pub fn solve_second_adjoints(
    p: &ModelParameters,
    grid: &Grid,
    psi: &ScalarField,
    phi: &ScalarField,
    ledger: &SolveLedger,
) -> Result<AdjointBundle> {
    psi.check_grid(phi)?;
    if psi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let (sa, d, q, sd) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.sigma_d());

    let lambda1 = solve_bvp(p, grid, &SourceSpec::field(psi.clone()), ledger, SolveTag::SecondAdjoint)?;
    let theta1 = solve_bvp(p, grid, &SourceSpec::field(phi.clone()), ledger, SolveTag::SecondAdjoint)?;
    let theta2_source = phi.map(|f| q / d - sa / d * f);
    let theta2 = solve_bvp(p, grid, &SourceSpec::field(theta2_source), ledger, SolveTag::SecondAdjoint)?;

    Ok(AdjointBundle {
        lambda4: psi.scaled(1.0 / sd),
        theta3: phi.scaled(-1.0 / q),
        lambda2: lambda1.scaled(-sa / d),
        psi: psi.clone(),
        lambda1,
        theta1,
        theta2,
        solve_count: 4,
    })
}

/// Flux plus the complete adjoint bundle: one forward and four adjoint solves.
pub fn build_bundle(
    p: &ModelParameters,
    grid: &Grid,
    ledger: &SolveLedger,
) -> Result<(ScalarField, AdjointBundle)> {
    let phi = solve_flux(p, grid, ledger)?;
    let psi = solve_first_adjoint(p, grid, ledger)?;
    let bundle = solve_second_adjoints(p, grid, &psi, &phi, ledger)?;
    Ok((phi, bundle))
}

fn check_domain(p: &ModelParameters, x: f64) -> Result<()> {
    let a = p.half_thickness_a();
    if x.abs() <= a {
        Ok(())
    } else {
        Err(Error::OutsideDomain { x, a })
    }
}

/// Heaviside step with `H(0) = 1`.
fn heaviside(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Closed-form first adjoint.
///
/// Written in Green's-function form
/// `−c sinh(k(min(x,b)+a)) sinh(k(a−max(x,b))) / sinh(2ak)`,
/// `c = Σd/√(ΣaD)`. This equals the two-term sinh expression with the
/// Heaviside step, without its cancellation for `x > b`.
pub fn closed_form_psi(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let (a, b, k) = (p.half_thickness_a(), p.detector_b(), p.k());
    let c = p.sigma_d() / (p.sigma_a() * p.diff_coeff()).sqrt();
    let lo = x.min(b);
    let hi = x.max(b);
    Ok(-c * hyperbolic_product_ratio(k * (lo + a), k * (a - hi), false, 2.0 * a * k))
}

/// The first adjoint written literally as the two-term expression with a
/// Heaviside step. Loses precision for large `(a − b)k`; used only to
/// cross-check [`closed_form_psi`].
pub fn closed_form_psi_literal(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let (a, b, k) = (p.half_thickness_a(), p.detector_b(), p.k());
    let c = p.sigma_d() / (p.sigma_a() * p.diff_coeff()).sqrt();
    Ok(c * (((b - a) * k).sinh() / (2.0 * a * k).sinh() * ((x + a) * k).sinh()
        + heaviside(x - b) * ((x - b) * k).sinh()))
}

/// `λ₁` for a detector at `b ≥ 0`.
fn lambda1_nonnegative_b(p: &ModelParameters, b: f64, x: f64) -> f64 {
    let (a, k, d) = (p.half_thickness_a(), p.k(), p.diff_coeff());
    let c = p.sigma_d() / (p.sigma_a() * d).sqrt();
    let scale = c / (2.0 * d * k);
    // particular solution, C¹ across x = b
    let particular = |x: f64| {
        let left = x * hyperbolic_product_ratio((b - a) * k, (x + a) * k, true, 2.0 * a * k);
        let z = (x - b) * k;
        let right = heaviside(x - b) * ((x - b) * z.cosh() - z.sinh() / k);
        scale * (left + right)
    };
    let p_plus = particular(a);
    let p_minus = particular(-a);
    particular(x) - sinh_ratio(x * k, a * k) * (p_plus - p_minus) / 2.0 - cosh_ratio(x * k, a * k) * (p_plus + p_minus) / 2.0
}

/// Closed-form second adjoint `λ₁`: `D λ₁'' − Σa λ₁ = ψ`, `λ₁(±a) = 0`.
///
/// Particular solution `c/(2Dk)·[s_b x cosh(k(x+a)) + H(x−b)((x−b)cosh(k(x−b)) − sinh(k(x−b))/k)]`
/// with `s_b = sinh((b−a)k)/sinh(2ak)`, plus the homogeneous correction
/// `−sinh(kx)(P(a)−P(−a))/(2 sinh(ak)) − cosh(kx)(P(a)+P(−a))/(2 cosh(ak))`.
/// Detectors with `b < 0` are evaluated through `λ₁(x; b) = λ₁(−x; −b)`.
pub fn closed_form_lambda1(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let b = p.detector_b();
    Ok(if b >= 0.0 {
        lambda1_nonnegative_b(p, b, x)
    } else {
        lambda1_nonnegative_b(p, -b, -x)
    })
}

/// How to read the homogeneous correction terms of the printed `λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrintedLambda1 {
    /// `sinh(x)`, `cosh(x)` exactly as typeset.
    Literal,
    /// `sinh(xk)`, `cosh(xk)`.
    WithK,
}

/// The reference closed form for `λ₁`, transcribed without correction.
///
/// Neither reading satisfies its own boundary-value problem (see the tests);
/// [`closed_form_lambda1`] is the verified replacement.
pub fn closed_form_lambda1_as_printed(p: &ModelParameters, x: f64, variant: PrintedLambda1) -> Result<f64> {
    check_domain(p, x)?;
    let (a, b, k) = (p.half_thickness_a(), p.detector_b(), p.k());
    let pref = p.sigma_d() / (p.diff_coeff() * p.sigma_a());
    let lp = |x: f64| {
        let first = pref * (b * k - a * k).sinh() / (a * k).cosh()
            * (x / 2.0 * (x * k + a * k).cosh()
                + 1.0 / (4.0 * k) * (2.0 * x * k + a * k).cosh() * ((x * k).sinh() - (x * k).cosh()));
        let second = pref
            * heaviside(x - b)
            * (x / 2.0 * (x * k - b * k).cosh()
                + 1.0 / (4.0 * k) * (2.0 * x * k - b * k).cosh() * ((x * k).sinh() - (x * k).cosh()));
        first - second
    };
    let (lpa, lpm) = (lp(a), lp(-a));
    let (s, c) = match variant {
        PrintedLambda1::Literal => (x.sinh(), x.cosh()),
        PrintedLambda1::WithK => ((x * k).sinh(), (x * k).cosh()),
    };
    Ok(lp(x) - s * (lpa - lpm) / (2.0 * (a * k).sinh()) - c * (lpa + lpm) / (2.0 * (a * k).cosh()))
}

/// Closed-form `θ₁`: `D θ₁'' − Σa θ₁ = φ`, `θ₁(±a) = 0`.
pub fn closed_form_theta1(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let (a, k, sa, q) = (p.half_thickness_a(), p.k(), p.sigma_a(), p.source_q());
    let cr = cosh_ratio(x * k, a * k);
    let sr = sinh_cosh_ratio(x * k, a * k);
    let bracket = a * (a * k).tanh() * cr - x * sr;
    Ok(q / (2.0 * sa * (p.diff_coeff() * sa).sqrt()) * bracket + q / (sa * sa) * (cr - 1.0))
}

/// Closed-form `θ₂`: `D θ₂'' − Σa θ₂ = Q/D − (Σa/D) φ`, `θ₂(±a) = 0`.
pub fn closed_form_theta2(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let (a, k, d, q) = (p.half_thickness_a(), p.k(), p.diff_coeff(), p.source_q());
    let cr = cosh_ratio(x * k, a * k);
    let sr = sinh_cosh_ratio(x * k, a * k);
    Ok(q / (2.0 * k * d * d) * (x * sr - a * (a * k).tanh() * cr))
}

/// Closed-form `θ₃ = (1/Σa)[cosh(xk)/cosh(ak) − 1]`, which is `−φ/Q`.
pub fn closed_form_theta3(p: &ModelParameters, x: f64) -> Result<f64> {
    check_domain(p, x)?;
    let (a, k) = (p.half_thickness_a(), p.k());
    Ok((cosh_ratio(x * k, a * k) - 1.0) / p.sigma_a())
}

/// Samples a closed form on every node of `grid`.
pub fn sample_closed_form(
    p: &ModelParameters,
    grid: &Grid,
    f: impl Fn(&ModelParameters, f64) -> Result<f64>,
) -> Result<ScalarField> {
    let values = grid.nodes().map(|x| f(p, x.clamp(-grid.half_thickness_a(), grid.half_thickness_a()))).collect::<Result<Vec<_>>>()?;
    ScalarField::new(*grid, values)
}

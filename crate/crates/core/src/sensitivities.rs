//! First- and second-order sensitivities of the detector response.
//!
//! Two independent paths produce every quantity:
//!
//! * **quadrature**: inner products of the numerically solved adjoint
//!   functions with the nominal fields, on the grid;
//! * **closed form**: expressions in the helpers `A`, `B`, `C` of
//!   [`crate::model`].
//!
//! Parameter order everywhere is `(Σa, D, Q, Σd)`, matching [`Param`].
//!
//! Second derivatives of the nominal fields never appear in an integrand.
//! `D φ'' = Σa φ − Q` and `D ψ'' = Σa ψ + Σd δ(x − b)` replace them.
//!
//! Quadrature defaults to the trapezoid rule. Under that inner product the
//! discrete operator is symmetric, so the quadrature path differentiates the
//! discrete response exactly and both routes of a mixed partial agree to
//! rounding. Simpson is available for comparison.

use serde::{Deserialize, Serialize};

use crate::adjoint::{closed_form_theta1, closed_form_theta2, AdjointBundle};
use crate::bvp::{integrate, integrate_product, sample_at, QuadratureRule, ScalarField};
use crate::error::{Error, Result};
use crate::model::{helpers, ModelParameters, Param};

/// Provenance of a sensitivity result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    ClosedForm,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed-form",
        }
    }
}

/// Whether entries are plain derivatives or normalized by `α/R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Absolute,
    Relative,
}

/// `∂R/∂α_i` for `α = (Σa, D, Q, Σd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVector {
    pub values: [f64; 4],
    pub method: Method,
    pub scale: Scale,
}

impl SensitivityVector {
    pub fn new(values: [f64; 4], method: Method) -> Self {
        Self { values, method, scale: Scale::Absolute }
    }

    pub fn get(&self, param: Param) -> f64 {
        self.values[param.index()]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Index of `(i, j)` in the packed upper triangle.
fn packed(i: usize, j: usize) -> usize {
    assert!(i < 4 && j < 4, "sensitivity index out of range");
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    r * 4 - r * (r + 1) / 2 + c
}

/// `∂²R/∂α_i∂α_j`, symmetric by construction: each of the ten distinct
/// entries is stored once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    entries: [f64; 10],
    pub method: Method,
    pub scale: Scale,
}

impl SensitivityMatrix {
    pub fn zeros(method: Method) -> Self {
        Self { entries: [0.0; 10], method, scale: Scale::Absolute }
    }

    /// Entry for zero-based parameter indices.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[packed(i, j)]
    }

    pub fn get(&self, pi: Param, pj: Param) -> f64 {
        self.at(pi.index(), pj.index())
    }

    pub fn set(&mut self, pi: Param, pj: Param, value: f64) {
        self.entries[packed(pi.index(), pj.index())] = value;
    }

    /// Full 4×4 array.
    pub fn to_array(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.at(i, j);
            }
        }
        out
    }

    /// Diagonal entries `S_ii`.
    pub fn diagonal(&self) -> [f64; 4] {
        [self.at(0, 0), self.at(1, 1), self.at(2, 2), self.at(3, 3)]
    }

    /// The ten distinct entries in row-major upper-triangle order
    /// `(1,1) (1,2) (1,3) (1,4) (2,2) (2,3) (2,4) (3,3) (3,4) (4,4)`.
    pub fn distinct_entries(&self) -> [((Param, Param), f64); 10] {
        let mut out = [((Param::SigmaA, Param::SigmaA), 0.0); 10];
        let mut n = 0;
        for i in 0..4 {
            for j in i..4 {
                out[n] = ((Param::ALL[i], Param::ALL[j]), self.at(i, j));
                n += 1;
            }
        }
        out
    }

    /// Largest magnitude in row `i`.
    pub fn row_max_abs(&self, i: usize) -> f64 {
        (0..4).fold(0.0, |m, j| m.max(self.at(i, j).abs()))
    }
}

/// Field `g = Σa φ − Q`, which equals `D φ''`.
fn flux_curvature_source(p: &ModelParameters, phi: &ScalarField) -> ScalarField {
    let (sa, q) = (p.sigma_a(), p.source_q());
    phi.map(|f| sa * f - q)
}

fn check_bundle(bundle: &AdjointBundle, phi: &ScalarField) -> Result<()> {
    bundle.psi.check_grid(phi)
}

/// First-order sensitivities from ψ and φ with the trapezoid inner product.
pub fn first_order_quadrature(bundle: &AdjointBundle, phi: &ScalarField, p: &ModelParameters) -> Result<SensitivityVector> {
    first_order_quadrature_with(bundle, phi, p, QuadratureRule::Trapezoid)
}

/// First-order sensitivities with an explicit quadrature rule.
///
/// `S₁ = ⟨ψ, φ⟩`, `S₂ = −(1/D)⟨ψ, Σaφ − Q⟩`, `S₃ = −⟨ψ, 1⟩`, `S₄ = φ(b)`.
pub fn first_order_quadrature_with(
    bundle: &AdjointBundle,
    phi: &ScalarField,
    p: &ModelParameters,
    rule: QuadratureRule,
) -> Result<SensitivityVector> {
    check_bundle(bundle, phi)?;
    let psi = &bundle.psi;
    let g = flux_curvature_source(p, phi);
    let s1 = integrate_product(psi, phi, rule)?;
    let s2 = -integrate_product(psi, &g, rule)? / p.diff_coeff();
    let s3 = -integrate(psi, rule);
    let s4 = sample_at(phi, p.detector_b())?;
    Ok(SensitivityVector::new([s1, s2, s3, s4], Method::Quadrature))
}

/// First-order sensitivities from the closed forms.
pub fn first_order_closed_form(p: &ModelParameters) -> SensitivityVector {
    let (sa, d, q, sd) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.sigma_d());
    let h = helpers(p);
    let k = p.k();
    let s1 = q * sd * (-h.a / (sa * sa) + h.b / (2.0 * sa * (d * sa).sqrt()));
    let s2 = -(q * sd / (2.0 * d * sa)) * k * h.b;
    let s3 = sd / sa * h.a;
    let s4 = q / sa * h.a;
    SensitivityVector::new([s1, s2, s3, s4], Method::ClosedForm)
}

/// Every quadrature route for the second-order entries. Mixed partials
/// appear twice, once per differentiation order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QuadratureRoutes {
    s41: f64,
    s42: f64,
    s43: f64,
    s31: f64,
    s32: f64,
    s34: f64,
    s11: f64,
    s12: f64,
    s13: f64,
    s14: f64,
    s21: f64,
    s22: f64,
    s23: f64,
    s24: f64,
}

fn quadrature_routes(
    bundle: &AdjointBundle,
    phi: &ScalarField,
    p: &ModelParameters,
    rule: QuadratureRule,
) -> Result<QuadratureRoutes> {
    check_bundle(bundle, phi)?;
    let (sa, d, q, sd) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.sigma_d());
    let b = p.detector_b();
    let grid = *phi.grid();
    let one = ScalarField::constant(grid, 1.0);
    let g = flux_curvature_source(p, phi);
    let ip = |u: &ScalarField, v: &ScalarField| integrate_product(u, v, rule);
    let AdjointBundle { psi, lambda1, theta1, theta2, lambda4, theta3, lambda2, .. } = bundle;

    // row 4: λ₄ alone (θ₄ ≡ 0)
    let s41 = ip(lambda4, phi)?;
    let s42 = -ip(lambda4, &g)? / d;
    let s43 = -ip(lambda4, &one)?;

    // row 3: θ₃ alone (λ₃ ≡ 0)
    let th3_psi = ip(theta3, psi)?;
    let th3_b = sample_at(theta3, b)?;
    let s31 = -th3_psi;
    let s32 = sa / d * th3_psi + sd / d * th3_b;
    let s34 = -th3_b;

    // row 1: λ₁ and θ₁
    let l1_one = ip(lambda1, &one)?;
    let th1_b = sample_at(theta1, b)?;
    let s11 = ip(lambda1, phi)? + ip(theta1, psi)?;
    let s12 = -sa / d * s11 + q / d * l1_one - sd / d * th1_b;
    let s13 = -l1_one;
    let s14 = th1_b;

    // row 2: λ₂ and θ₂ plus the direct-effect terms
    let th2_psi = ip(theta2, psi)?;
    let th2_b = sample_at(theta2, b)?;
    let s21 = -ip(phi, psi)? / d + ip(lambda2, phi)? + th2_psi;
    let s22 = ip(psi, &g)? / (d * d) - ip(lambda2, &g)? / d - sa / d * th2_psi - sd / d * th2_b;
    let s23 = ip(psi, &one)? / d - ip(lambda2, &one)?;
    let s24 = th2_b;

    Ok(QuadratureRoutes { s41, s42, s43, s31, s32, s34, s11, s12, s13, s14, s21, s22, s23, s24 })
}

/// All ten distinct second-order sensitivities with the trapezoid rule.
pub fn second_order_quadrature(bundle: &AdjointBundle, phi: &ScalarField, p: &ModelParameters) -> Result<SensitivityMatrix> {
    second_order_quadrature_with(bundle, phi, p, QuadratureRule::Trapezoid)
}

/// Second-order sensitivities with an explicit quadrature rule.
///
/// Rows are filled in the order 4, 3, 1, 2. Each mixed entry keeps the value
/// of the row that reaches it first; the other route goes to
/// [`symmetry_report`].
pub fn second_order_quadrature_with(
    bundle: &AdjointBundle,
    phi: &ScalarField,
    p: &ModelParameters,
    rule: QuadratureRule,
) -> Result<SensitivityMatrix> {
    use Param::*;
    let r = quadrature_routes(bundle, phi, p, rule)?;
    let mut m = SensitivityMatrix::zeros(Method::Quadrature);
    m.set(SigmaD, SigmaA, r.s41);
    m.set(SigmaD, Diffusion, r.s42);
    m.set(SigmaD, Source, r.s43);
    m.set(SigmaD, SigmaD, 0.0);
    m.set(Source, SigmaA, r.s31);
    m.set(Source, Diffusion, r.s32);
    m.set(Source, Source, 0.0);
    m.set(SigmaA, SigmaA, r.s11);
    m.set(SigmaA, Diffusion, r.s12);
    m.set(Diffusion, Diffusion, r.s22);
    Ok(m)
}

/// Closed-form second-order sensitivities.
///
/// The `Σd` row is the first-order vector divided by `Σd`, since `R` is
/// linear in `Σd`.
pub fn second_order_closed_form(p: &ModelParameters) -> SensitivityMatrix {
    use Param::*;
    let (sa, d, q, sd) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.sigma_d());
    let h = helpers(p);
    let k = p.k();
    let s = first_order_closed_form(p).values;
    let root = (d * sa).sqrt();

    let mut m = SensitivityMatrix::zeros(Method::ClosedForm);
    m.set(SigmaA, SigmaA, q * sd / sa.powi(3) * (2.0 * h.a - 1.25 * k * h.b + 0.25 * k * k * h.c));
    m.set(SigmaA, Diffusion, q * sd / (4.0 * d * sa * sa) * k * (h.b - k * h.c));
    m.set(SigmaA, Source, sd / sa * (-h.a / sa + h.b / (2.0 * root)));
    m.set(Diffusion, Diffusion, q * sd / (4.0 * d * d) * (3.0 * k * h.b / sa + h.c / d));
    m.set(Diffusion, Source, -sd * k * h.b / (2.0 * d * sa));
    m.set(Source, Source, 0.0);
    m.set(SigmaD, SigmaA, s[0] / sd);
    m.set(SigmaD, Diffusion, s[1] / sd);
    m.set(SigmaD, Source, s[2] / sd);
    m.set(SigmaD, SigmaD, 0.0);
    m
}

/// Conversion to relative sensitivities `S_i α_i / R` and `S_ij α_i α_j / R`.
pub trait ToRelative: Sized {
    fn to_relative(&self, p: &ModelParameters, response: f64) -> Result<Self>;
}

fn check_response(response: f64) -> Result<()> {
    if response == 0.0 || !response.is_finite() {
        Err(Error::ZeroResponse)
    } else {
        Ok(())
    }
}

impl ToRelative for SensitivityVector {
    fn to_relative(&self, p: &ModelParameters, response: f64) -> Result<Self> {
        check_response(response)?;
        let alpha = p.values();
        let mut values = self.values;
        for (v, a) in values.iter_mut().zip(alpha) {
            *v *= a / response;
        }
        Ok(Self { values, method: self.method, scale: Scale::Relative })
    }
}

impl ToRelative for SensitivityMatrix {
    fn to_relative(&self, p: &ModelParameters, response: f64) -> Result<Self> {
        check_response(response)?;
        let alpha = p.values();
        let mut out = *self;
        for i in 0..4 {
            for j in i..4 {
                out.entries[packed(i, j)] = self.at(i, j) * alpha[i] * alpha[j] / response;
            }
        }
        out.scale = Scale::Relative;
        Ok(out)
    }
}

/// Free-function form of [`ToRelative::to_relative`].
pub fn to_relative<T: ToRelative>(value: &T, p: &ModelParameters, response: f64) -> Result<T> {
    value.to_relative(p, response)
}

/// One mixed partial computed by both differentiation orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryPair {
    /// For example `"S14/S41"`.
    pub label: &'static str,
    pub i: Param,
    pub j: Param,
    pub ij: f64,
    pub ji: f64,
}

impl SymmetryPair {
    /// `|S_ij − S_ji| / max(|S_ij|, |S_ji|)`, zero when both vanish.
    pub fn relative_discrepancy(&self) -> f64 {
        let scale = self.ij.abs().max(self.ji.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.ij - self.ji).abs() / scale
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub method: Method,
    pub pairs: Vec<SymmetryPair>,
}

impl SymmetryReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.pairs.iter().map(SymmetryPair::relative_discrepancy).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_discrepancy() <= tolerance
    }
}

fn pair(label: &'static str, i: Param, j: Param, ij: f64, ji: f64) -> SymmetryPair {
    SymmetryPair { label, i, j, ij, ji }
}

/// Dual-route mixed partials from the solved adjoint functions.
pub fn symmetry_report(bundle: &AdjointBundle, phi: &ScalarField, p: &ModelParameters) -> Result<SymmetryReport> {
    symmetry_report_with(bundle, phi, p, QuadratureRule::Trapezoid)
}

pub fn symmetry_report_with(
    bundle: &AdjointBundle,
    phi: &ScalarField,
    p: &ModelParameters,
    rule: QuadratureRule,
) -> Result<SymmetryReport> {
    use Param::*;
    let r = quadrature_routes(bundle, phi, p, rule)?;
    Ok(SymmetryReport {
        method: Method::Quadrature,
        pairs: vec![
            pair("S14/S41", SigmaA, SigmaD, r.s14, r.s41),
            pair("S24/S42", Diffusion, SigmaD, r.s24, r.s42),
            pair("S13/S31", SigmaA, Source, r.s13, r.s31),
            pair("S23/S32", Diffusion, Source, r.s23, r.s32),
            pair("S12/S21", SigmaA, Diffusion, r.s12, r.s21),
        ],
    })
}

/// Dual-route mixed partials built from closed-form ingredients.
///
/// Each `S_ij` is assembled from the same structural relation the
/// quadrature route uses, with the closed-form adjoint values inserted, and
/// compared with the direct closed-form entry.
pub fn symmetry_report_closed_form(p: &ModelParameters) -> Result<SymmetryReport> {
    use Param::*;
    let (sa, d, q, sd) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.sigma_d());
    let b = p.detector_b();
    let s = first_order_closed_form(p).values;
    let m = second_order_closed_form(p);
    let s14 = closed_form_theta1(p, b)?;
    let s24 = closed_form_theta2(p, b)?;
    let s13 = s[0] / q;
    let s23 = -s[2] / d - sa / d * s13;
    let s12 = -sa / d * m.get(SigmaA, SigmaA) - q / d * m.get(SigmaA, Source) - sd / d * m.get(SigmaA, SigmaD);
    Ok(SymmetryReport {
        method: Method::ClosedForm,
        pairs: vec![
            pair("S14/S41", SigmaA, SigmaD, s14, m.get(SigmaD, SigmaA)),
            pair("S24/S42", Diffusion, SigmaD, s24, m.get(SigmaD, Diffusion)),
            pair("S13/S31", SigmaA, Source, s13, m.get(Source, SigmaA)),
            pair("S23/S32", Diffusion, Source, s23, m.get(Source, Diffusion)),
            pair("S12/S21", SigmaA, Diffusion, s12, m.get(Diffusion, SigmaA)),
        ],
    })
}

/// Mixed absolute/relative closeness: `|x − y| ≤ max(rel·|y|, abs_floor)`.
pub fn mixed_close(x: f64, y: f64, rel: f64, abs_floor: f64) -> bool {
    (x - y).abs() <= (rel * y.abs()).max(abs_floor)
}

/// Absolute floor for near-zero entries: `1e-6` of the row's largest magnitude.
pub fn row_floor(row: &[f64]) -> f64 {
    1e-6 * row.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

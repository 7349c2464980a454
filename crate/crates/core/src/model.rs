//! The slab diffusion model: parameters, analytic flux and detector response,
//! and the hyperbolic helper functions A(k), B(k) = A'(k), C(k) = A''(k).
//!
//! The flux solves `D φ'' − Σa φ + Q = 0` on `(−a, a)` with `φ(±a) = 0`,
//! and the detector reads `R = Σd φ(b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{cosh_ratio, sinh_cosh_ratio};

/// One of the four uncertain model parameters, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    SigmaA,
    Diffusion,
    Source,
    SigmaD,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::SigmaA, Param::Diffusion, Param::Source, Param::SigmaD];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Param::SigmaA => "SIGa",
            Param::Diffusion => "D",
            Param::Source => "Q",
            Param::SigmaD => "SIGd",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Param::SigmaA | Param::SigmaD => "cm^-1",
            Param::Diffusion => "cm",
            Param::Source => "n cm^-3 s^-1",
        }
    }
}

/// Physical parameters and geometry of the slab problem.
///
/// Immutable once built; every constructor validates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    sigma_a: f64,
    diff_coeff: f64,
    source_q: f64,
    sigma_d: f64,
    half_thickness_a: f64,
    detector_b: f64,
}

pub const NOMINAL_SIGMA_A: f64 = 0.0197;
pub const NOMINAL_DIFF_COEFF: f64 = 0.16;
pub const NOMINAL_SOURCE_Q: f64 = 1.0e7;
pub const NOMINAL_SIGMA_D: f64 = 7.438;
pub const NOMINAL_HALF_THICKNESS: f64 = 50.0;
/// Detector positions of the six reference responses, `R1..R6`.
pub const NOMINAL_DETECTORS: [f64; 6] = [10.0, 40.0, 49.5, -10.0, -40.0, -49.5];

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter { name, value, reason: "must be finite" });
    }
    if value <= 0.0 {
        return Err(Error::InvalidParameter { name, value, reason: "must be positive" });
    }
    Ok(value)
}

impl ModelParameters {
    pub fn new(
        sigma_a: f64,
        diff_coeff: f64,
        source_q: f64,
        sigma_d: f64,
        half_thickness_a: f64,
        detector_b: f64,
    ) -> Result<Self> {
        let a = positive("half_thickness_a", half_thickness_a)?;
        if !detector_b.is_finite() || detector_b.abs() >= a {
            return Err(Error::InvalidParameter {
                name: "detector_b",
                value: detector_b,
                reason: "must lie strictly inside (-a, a)",
            });
        }
        Ok(Self {
            sigma_a: positive("sigma_a", sigma_a)?,
            diff_coeff: positive("diff_coeff", diff_coeff)?,
            source_q: positive("source_q", source_q)?,
            sigma_d: positive("sigma_d", sigma_d)?,
            half_thickness_a: a,
            detector_b,
        })
    }

    /// Water-pool data with an indium-like detector at position `b`.
    pub fn nominal(detector_b: f64) -> Result<Self> {
        Self::new(
            NOMINAL_SIGMA_A,
            NOMINAL_DIFF_COEFF,
            NOMINAL_SOURCE_Q,
            NOMINAL_SIGMA_D,
            NOMINAL_HALF_THICKNESS,
            detector_b,
        )
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }
    pub fn diff_coeff(&self) -> f64 {
        self.diff_coeff
    }
    pub fn source_q(&self) -> f64 {
        self.source_q
    }
    pub fn sigma_d(&self) -> f64 {
        self.sigma_d
    }
    pub fn half_thickness_a(&self) -> f64 {
        self.half_thickness_a
    }
    pub fn detector_b(&self) -> f64 {
        self.detector_b
    }

    /// Parameter vector `(Σa, D, Q, Σd)`.
    pub fn values(&self) -> [f64; 4] {
        [self.sigma_a, self.diff_coeff, self.source_q, self.sigma_d]
    }

    pub fn get(&self, param: Param) -> f64 {
        self.values()[param.index()]
    }

    /// Copy with one parameter replaced, re-validated.
    pub fn with(&self, param: Param, value: f64) -> Result<Self> {
        let mut v = self.values();
        v[param.index()] = value;
        Self::new(v[0], v[1], v[2], v[3], self.half_thickness_a, self.detector_b)
    }

    /// Copy with all four parameters replaced, re-validated.
    pub fn with_values(&self, v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3], self.half_thickness_a, self.detector_b)
    }

    pub fn with_detector(&self, detector_b: f64) -> Result<Self> {
        let v = self.values();
        Self::new(v[0], v[1], v[2], v[3], self.half_thickness_a, detector_b)
    }

    pub fn diffusion_length(&self) -> DiffusionLength {
        DiffusionLength::new(self)
    }

    /// Shorthand for the reciprocal diffusion length `k`.
    pub fn k(&self) -> f64 {
        self.diffusion_length().k()
    }
}

/// Reciprocal diffusion length `k = sqrt(Σa / D)` [cm⁻¹].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionLength(f64);

impl DiffusionLength {
    pub fn new(p: &ModelParameters) -> Self {
        Self((p.sigma_a / p.diff_coeff).sqrt())
    }

    pub fn k(self) -> f64 {
        self.0
    }
}

/// Flux `(Q/Σa)[1 − cosh(xk)/cosh(ak)]` at position `x`.
pub fn analytic_flux(p: &ModelParameters, x: f64) -> Result<f64> {
    let a = p.half_thickness_a;
    if x.is_nan() || x.abs() > a {
        return Err(Error::OutsideDomain { x, a });
    }
    let k = p.k();
    Ok(p.source_q / p.sigma_a * (1.0 - cosh_ratio(x * k, a * k)))
}

/// Detector response `Σd φ(b) = (Q Σd / Σa) A(k)`.
pub fn analytic_response(p: &ModelParameters) -> f64 {
    p.source_q * p.sigma_d / p.sigma_a * helper_a(p)
}

/// A, B, C evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helpers {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// A(k), B(k), C(k) for half-thickness `a`, detector `b`, at an arbitrary `k`.
pub fn helpers_at(a: f64, b: f64, k: f64) -> Helpers {
    let ak = a * k;
    let bk = b * k;
    let tanh_ak = ak.tanh();
    let cr = cosh_ratio(bk, ak); // cosh(bk)/cosh(ak)
    let sr = sinh_cosh_ratio(bk, ak); // sinh(bk)/cosh(ak)
    let sech_ak = if ak > 350.0 { 0.0 } else { 1.0 / ak.cosh() };
    Helpers {
        a: 1.0 - cr,
        b: a * tanh_ak * cr - b * sr,
        c: 2.0 * a * a * cr * sech_ak * sech_ak + 2.0 * a * b * tanh_ak * sr
            - (a * a + b * b) * cr,
    }
}

pub fn helpers(p: &ModelParameters) -> Helpers {
    helpers_at(p.half_thickness_a, p.detector_b, p.k())
}

/// `A = 1 − cosh(bk)/cosh(ak)`, dimensionless.
pub fn helper_a(p: &ModelParameters) -> f64 {
    helpers(p).a
}

/// `B = dA/dk` [cm].
pub fn helper_b(p: &ModelParameters) -> f64 {
    helpers(p).b
}

/// `C = d²A/dk²` [cm²].
pub fn helper_c(p: &ModelParameters) -> f64 {
    helpers(p).c
}

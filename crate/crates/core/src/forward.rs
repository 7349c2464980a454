//! Forward sensitivity path, used only to cross-check the adjoint route.
//!
//! A parameter variation `h_α = (δΣa, δD, δQ, δΣd)` perturbs the flux by
//! `h_φ`, which solves
//! `D h_φ'' − Σa h_φ = −[δD φ'' − δΣa φ + δQ]`, `h_φ(±a) = 0`.
//! The full first variation of the response is then
//! `δΣd φ(b) + Σd h_φ(b)`. Every solve here is tagged
//! [`SolveTag::Verification`].

use serde::{Deserialize, Serialize};

use crate::adjoint::solve_flux;
use crate::bvp::{sample_at, solve_bvp, Grid, ScalarField, SolveLedger, SolveTag, SourceSpec};
use crate::error::{Error, Result};
use crate::hyperbolic::{cosh_ratio, sinh_cosh_ratio};
use crate::model::{ModelParameters, Param};
use crate::sensitivities::SensitivityVector;

/// Parameter variation `(δΣa [cm⁻¹], δD [cm], δQ [cm⁻³ s⁻¹], δΣd [cm⁻¹])`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterVariation {
    pub d_sigma_a: f64,
    pub d_diff: f64,
    pub d_q: f64,
    pub d_sigma_d: f64,
}

impl ParameterVariation {
    pub fn new(d_sigma_a: f64, d_diff: f64, d_q: f64, d_sigma_d: f64) -> Result<Self> {
        Self::from_array([d_sigma_a, d_diff, d_q, d_sigma_d])
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        for (value, param) in v.iter().zip(Param::ALL) {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name: param.label(),
                    value: *value,
                    reason: "variation must be finite",
                });
            }
        }
        Ok(Self { d_sigma_a: v[0], d_diff: v[1], d_q: v[2], d_sigma_d: v[3] })
    }

    /// Unit variation in a single parameter.
    pub fn unit(param: Param) -> Self {
        let mut v = [0.0; 4];
        v[param.index()] = 1.0;
        Self::from_array(v).expect("unit variation is finite")
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.d_sigma_a, self.d_diff, self.d_q, self.d_sigma_d]
    }

    /// `Σᵢ Sᵢ hᵢ`, the adjoint-route prediction of the first variation.
    pub fn dot(&self, s: &SensitivityVector) -> f64 {
        self.as_array().iter().zip(s.values).map(|(h, s)| h * s).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let v = self.as_array().map(|x| x * factor);
        Self { d_sigma_a: v[0], d_diff: v[1], d_q: v[2], d_sigma_d: v[3] }
    }
}

/// `h_φ` for the given variation, using an already computed flux.
pub fn solve_forward_sensitivity_with_flux(
    p: &ModelParameters,
    phi: &ScalarField,
    variation: &ParameterVariation,
    ledger: &SolveLedger,
) -> Result<ScalarField> {
    let (sa, d, q) = (p.sigma_a(), p.diff_coeff(), p.source_q());
    let ParameterVariation { d_sigma_a, d_diff, d_q, .. } = *variation;
    // φ'' = (Σa φ − Q)/D
    let source = phi.map(|f| -(d_diff * (sa * f - q) / d - d_sigma_a * f + d_q));
    solve_bvp(p, phi.grid(), &SourceSpec::field(source), ledger, SolveTag::Verification)
}

/// `h_φ` for the given variation. Solves for the flux first; both solves
/// are tagged as verification.
pub fn solve_forward_sensitivity(
    p: &ModelParameters,
    grid: &Grid,
    variation: &ParameterVariation,
    ledger: &SolveLedger,
) -> Result<ScalarField> {
    let scratch = SolveLedger::new();
    let phi = solve_flux(p, grid, &scratch)?;
    ledger.record(SolveTag::Verification);
    solve_forward_sensitivity_with_flux(p, &phi, variation, ledger)
}

/// Closed-form `h_φ(x)`:
/// `C₁[cosh(xk) − cosh(ak)] + C₂[x sinh(xk) cosh(ak) − a sinh(ak) cosh(xk)]`
/// with `C₁ = (δΣa Q/Σa − δQ)/(Σa cosh(ak))` and
/// `C₂ = (δD/D − δΣa/Σa) Q/(2√(DΣa) cosh²(ak))`.
pub fn closed_form_forward_sensitivity(p: &ModelParameters, variation: &ParameterVariation, x: f64) -> Result<f64> {
    let a = p.half_thickness_a();
    if x.is_nan() || x.abs() > a {
        return Err(Error::OutsideDomain { x, a });
    }
    let (sa, d, q, k) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.k());
    let ParameterVariation { d_sigma_a, d_diff, d_q, .. } = *variation;
    let (xk, ak) = (x * k, a * k);
    // C₁ and C₂ carry 1/cosh(ak) and 1/cosh²(ak); fold them into the ratios
    let c1_term = (d_sigma_a * q / sa - d_q) / sa * (cosh_ratio(xk, ak) - 1.0);
    let c2_term = (d_diff / d - d_sigma_a / sa) * q / (2.0 * (d * sa).sqrt())
        * (x * sinh_cosh_ratio(xk, ak) - a * ak.tanh() * cosh_ratio(xk, ak));
    Ok(c1_term + c2_term)
}

/// `δΣd φ(b) + Σd h_φ(b)`.
pub fn total_first_variation(
    p: &ModelParameters,
    variation: &ParameterVariation,
    phi: &ScalarField,
    h_phi: &ScalarField,
) -> Result<f64> {
    phi.check_grid(h_phi)?;
    let b = p.detector_b();
    Ok(variation.d_sigma_d * sample_at(phi, b)? + p.sigma_d() * sample_at(h_phi, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::build_bundle;
    use crate::bvp::apply_operator;
    use crate::sensitivities::first_order_quadrature;

    fn nominal(b: f64) -> ModelParameters {
        ModelParameters::nominal(b).unwrap()
    }

    fn setup(b: f64, n: usize) -> (ModelParameters, ScalarField) {
        let p = nominal(b);
        let g = Grid::new(n, 50.0).unwrap();
        let phi = solve_flux(&p, &g, &SolveLedger::new()).unwrap();
        (p, phi)
    }

    #[test]
    fn zero_variation_gives_zero_field() {
        let (p, phi) = setup(10.0, 401);
        let h = solve_forward_sensitivity_with_flux(&p, &phi, &ParameterVariation::default(), &SolveLedger::new()).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn source_variation_scales_the_flux() {
        let (p, phi) = setup(10.0, 2001);
        let eps = 1e-3;
        let v = ParameterVariation::new(0.0, 0.0, eps * p.source_q(), 0.0).unwrap();
        let h = solve_forward_sensitivity_with_flux(&p, &phi, &v, &SolveLedger::new()).unwrap();
        let expected = phi.scaled(eps);
        assert!(h.max_abs_diff(&expected).unwrap() <= 1e-12 * expected.max_abs());
    }

    #[test]
    fn closed_form_vanishes_at_the_boundary() {
        let p = nominal(10.0);
        let v = ParameterVariation::new(1e-3, 1e-2, 1e5, 0.5).unwrap();
        let scale = closed_form_forward_sensitivity(&p, &v, 0.0).unwrap().abs();
        for x in [-50.0, 50.0] {
            assert!(closed_form_forward_sensitivity(&p, &v, x).unwrap().abs() <= 1e-12 * scale);
        }
        assert!(closed_form_forward_sensitivity(&p, &v, 50.1).is_err());
    }

    #[test]
    fn numeric_matches_closed_form() {
        let variations = [
            ParameterVariation::new(1e-3, 0.0, 0.0, 0.0).unwrap(),
            ParameterVariation::new(0.0, 1e-2, 0.0, 0.0).unwrap(),
            ParameterVariation::new(2e-4, -3e-3, 4e4, 0.0).unwrap(),
        ];
        for v in &variations {
            let mut errs = Vec::new();
            for n in [2001, 4001] {
                let (p, phi) = setup(10.0, n);
                let h = solve_forward_sensitivity_with_flux(&p, &phi, v, &SolveLedger::new()).unwrap();
                let exact = ScalarField::from_fn(*phi.grid(), |x| closed_form_forward_sensitivity(&p, v, x.clamp(-50.0, 50.0)).unwrap());
                let err = h.max_abs_diff(&exact).unwrap();
                assert!(err < 1e-4 * exact.max_abs(), "{v:?}");
                errs.push(err);
            }
            let ratio = errs[0] / errs[1];
            assert!((3.5..4.5).contains(&ratio), "{v:?}: {ratio}");
        }
    }

    #[test]
    fn closed_form_satisfies_the_equation() {
        let p = nominal(40.0);
        let v = ParameterVariation::new(1e-3, 2e-2, 3e5, 0.0).unwrap();
        let (sa, d, q, k) = (p.sigma_a(), p.diff_coeff(), p.source_q(), p.k());
        let phi = |x: f64| q / sa * (1.0 - cosh_ratio(x * k, 50.0 * k));
        let h = |x: f64| closed_form_forward_sensitivity(&p, &v, x).unwrap();
        let step = 1e-2;
        for x in [-30.0, 0.0, 12.5, 45.0] {
            let h2 = (h(x + step) - 2.0 * h(x) + h(x - step)) / (step * step);
            let lhs = d * h2 - sa * h(x);
            let rhs = -(v.d_diff * (sa * phi(x) - q) / d - v.d_sigma_a * phi(x) + v.d_q);
            assert!((lhs - rhs).abs() < 1e-4 * rhs.abs().max(v.d_q), "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn unit_variations_reproduce_first_order_sensitivities() {
        let p = nominal(10.0);
        let g = Grid::new(4001, 50.0).unwrap();
        let ledger = SolveLedger::new();
        let (phi, bundle) = build_bundle(&p, &g, &ledger).unwrap();
        let s = first_order_quadrature(&bundle, &phi, &p).unwrap();
        for param in Param::ALL {
            let v = ParameterVariation::unit(param);
            let h = solve_forward_sensitivity_with_flux(&p, &phi, &v, &ledger).unwrap();
            let dr = total_first_variation(&p, &v, &phi, &h).unwrap();
            let si = s.get(param);
            assert!((dr - si).abs() <= 1e-9 * si.abs(), "{param:?}: {dr} vs {si}");
        }
        assert_eq!(ledger.count(SolveTag::Verification), 4);
        assert_eq!(ledger.adjoint_solves(), 4);
        let s3 = total_first_variation(&p, &ParameterVariation::unit(Param::Source), &phi, &solve_forward_sensitivity_with_flux(&p, &phi, &ParameterVariation::unit(Param::Source), &ledger).unwrap()).unwrap();
        assert!((s3 / 3.776e2 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn first_variation_is_linear() {
        let (p, phi) = setup(-40.0, 801);
        let ledger = SolveLedger::new();
        let u = ParameterVariation::new(1e-3, 2e-3, 1e4, 0.1).unwrap();
        let w = ParameterVariation::new(-4e-4, 5e-3, -3e4, 0.2).unwrap();
        let sum = ParameterVariation::from_array([0, 1, 2, 3].map(|i| 2.0 * u.as_array()[i] + w.as_array()[i])).unwrap();
        let tv = |v: &ParameterVariation| {
            let h = solve_forward_sensitivity_with_flux(&p, &phi, v, &ledger).unwrap();
            total_first_variation(&p, v, &phi, &h).unwrap()
        };
        let lhs = tv(&sum);
        let rhs = 2.0 * tv(&u) + tv(&w);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }

    #[test]
    fn forward_field_obeys_discrete_operator() {
        let (p, phi) = setup(10.0, 1001);
        let v = ParameterVariation::new(1e-3, 1e-2, 1e5, 0.0).unwrap();
        let h = solve_forward_sensitivity_with_flux(&p, &phi, &v, &SolveLedger::new()).unwrap();
        let lh = apply_operator(&p, &h);
        let src = phi.map(|f| -(v.d_diff * (p.sigma_a() * f - p.source_q()) / p.diff_coeff() - v.d_sigma_a * f + v.d_q));
        for i in 1..1000 {
            assert!((lh.values()[i] - src.values()[i]).abs() <= 1e-10 * src.max_abs());
        }
    }

    #[test]
    fn standalone_solve_records_verification_only() {
        let p = nominal(10.0);
        let g = Grid::new(401, 50.0).unwrap();
        let ledger = SolveLedger::new();
        solve_forward_sensitivity(&p, &g, &ParameterVariation::unit(Param::SigmaA), &ledger).unwrap();
        assert_eq!(ledger.count(SolveTag::Verification), 2);
        assert_eq!(ledger.adjoint_solves(), 0);
        assert_eq!(ledger.count(SolveTag::Forward), 0);
    }

    #[test]
    fn rejects_non_finite_variation() {
        assert!(ParameterVariation::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }
}

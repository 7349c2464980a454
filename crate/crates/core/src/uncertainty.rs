//! Moment propagation for uncorrelated Gaussian parameter uncertainties.
//!
//! With absolute standard deviations `σᵢ = σ_rel,i · αᵢ`:
//!
//! * `E = R⁰ + ½ Σᵢ Sᵢᵢ σᵢ²`
//! * `cov(k, l) = Σᵢ Sᵢ⁽ᵏ⁾ Sᵢ⁽ˡ⁾ σᵢ² + ½ Σᵢ Sᵢᵢ⁽ᵏ⁾ Sᵢᵢ⁽ˡ⁾ σᵢ⁴`
//! * `μ₃ = 3 Σᵢ Sᵢ² Sᵢᵢ σᵢ⁴`, `γ₁ = μ₃ / var^{3/2}`
//!
//! Only same-index second-order terms enter. The Monte Carlo helpers sample
//! the second-order Taylor surrogate and report its exact moments too, so
//! the terms the formulas leave out can be measured.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::sensitivities::{SensitivityMatrix, SensitivityVector};

/// Relative standard deviations for `(Σa, D, Q, Σd)`, dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyCase {
    pub name: String,
    pub rel_std: [f64; 4],
}

impl UncertaintyCase {
    pub fn new(name: impl Into<String>, rel_std: [f64; 4]) -> Result<Self> {
        for v in rel_std {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "relative standard deviation",
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(Self { name: name.into(), rel_std })
    }

    /// The five standard cases: 15% on Q, Σd, Σa, D alone, then 10% on all.
    pub fn standard_cases() -> Vec<UncertaintyCase> {
        [
            [0.0, 0.0, 0.15, 0.0],
            [0.0, 0.0, 0.0, 0.15],
            [0.15, 0.0, 0.0, 0.0],
            [0.0, 0.15, 0.0, 0.0],
            [0.10, 0.10, 0.10, 0.10],
        ]
        .iter()
        .enumerate()
        .map(|(i, s)| UncertaintyCase { name: format!("case {}", i + 1), rel_std: *s })
        .collect()
    }

    /// `σᵢ = σ_rel,i · αᵢ⁰` in parameter units.
    pub fn absolute_std(&self, p: &ModelParameters) -> [f64; 4] {
        let alpha = p.values();
        [0, 1, 2, 3].map(|i| self.rel_std[i] * alpha[i])
    }
}

/// Moments of one response under one uncertainty case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseMoments {
    pub nominal: f64,
    pub expected_value: f64,
    pub variance: f64,
    pub third_central_moment: f64,
    pub skewness: f64,
}

impl ResponseMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Standard deviation over the nominal response.
    pub fn relative_std_dev(&self) -> f64 {
        self.std_dev() / self.nominal.abs()
    }
}

/// `R⁰ + ½ Σᵢ Sᵢᵢ σᵢ²`.
pub fn expected_value(nominal: f64, matrix: &SensitivityMatrix, case: &UncertaintyCase, p: &ModelParameters) -> f64 {
    let sigma = case.absolute_std(p);
    let diag = matrix.diagonal();
    nominal + 0.5 * (0..4).map(|i| diag[i] * sigma[i] * sigma[i]).sum::<f64>()
}

/// Covariance of two responses.
pub fn covariance(
    vec_k: &SensitivityVector,
    mat_k: &SensitivityMatrix,
    vec_l: &SensitivityVector,
    mat_l: &SensitivityMatrix,
    case: &UncertaintyCase,
    p: &ModelParameters,
) -> f64 {
    let sigma = case.absolute_std(p);
    let (dk, dl) = (mat_k.diagonal(), mat_l.diagonal());
    (0..4)
        .map(|i| {
            let s2 = sigma[i] * sigma[i];
            vec_k.values[i] * vec_l.values[i] * s2 + 0.5 * dk[i] * dl[i] * s2 * s2
        })
        .sum()
}

/// `Σᵢ Sᵢ² σᵢ² + ½ Σᵢ Sᵢᵢ² σᵢ⁴`.
pub fn variance(vec: &SensitivityVector, matrix: &SensitivityMatrix, case: &UncertaintyCase, p: &ModelParameters) -> f64 {
    covariance(vec, matrix, vec, matrix, case, p)
}

/// `cov / √(var_k var_l)`; values beyond ±1 by less than `1e-12` are clipped.
pub fn correlation(cov: f64, var_k: f64, var_l: f64) -> Result<f64> {
    if !(var_k > 0.0 && var_l > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let rho = cov / (var_k * var_l).sqrt();
    Ok(if rho.abs() > 1.0 && rho.abs() - 1.0 < 1e-12 { rho.signum() } else { rho })
}

/// Third-order moment across three responses, summed over same-index terms.
#[allow(clippy::too_many_arguments)]
pub fn mixed_third_moment(
    (vk, mk): (&SensitivityVector, &SensitivityMatrix),
    (vl, ml): (&SensitivityVector, &SensitivityMatrix),
    (vm, mm): (&SensitivityVector, &SensitivityMatrix),
    case: &UncertaintyCase,
    p: &ModelParameters,
) -> f64 {
    let sigma = case.absolute_std(p);
    let (dk, dl, dm) = (mk.diagonal(), ml.diagonal(), mm.diagonal());
    (0..4)
        .map(|i| {
            let (sk, sl, sm) = (vk.values[i], vl.values[i], vm.values[i]);
            (dk[i] * sl * sm + sk * dl[i] * sm + sk * sl * dm[i]) * sigma[i].powi(4)
        })
        .sum()
}

/// `(μ₃, γ₁)` with `μ₃ = 3 Σᵢ Sᵢ² Sᵢᵢ σᵢ⁴`; `γ₁ = 0` when the variance vanishes.
pub fn third_moment_and_skewness(
    vec: &SensitivityVector,
    matrix: &SensitivityMatrix,
    case: &UncertaintyCase,
    p: &ModelParameters,
) -> (f64, f64) {
    let mu3 = mixed_third_moment((vec, matrix), (vec, matrix), (vec, matrix), case, p);
    let var = variance(vec, matrix, case, p);
    let gamma = if var > 0.0 { mu3 / var.powf(1.5) } else { 0.0 };
    (mu3, gamma)
}

/// All moments of one response.
pub fn response_moments(
    nominal: f64,
    vec: &SensitivityVector,
    matrix: &SensitivityMatrix,
    case: &UncertaintyCase,
    p: &ModelParameters,
) -> ResponseMoments {
    let (third_central_moment, skewness) = third_moment_and_skewness(vec, matrix, case, p);
    ResponseMoments {
        nominal,
        expected_value: expected_value(nominal, matrix, case, p),
        variance: variance(vec, matrix, case, p),
        third_central_moment,
        skewness,
    }
}

/// Covariance and correlation matrices across several responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTable {
    pub covariance: Vec<Vec<f64>>,
    /// `None` where a variance is zero.
    pub correlation: Vec<Vec<Option<f64>>>,
}

/// Builds the covariance and correlation matrices for `responses`, each
/// given with the parameters it was computed at.
pub fn covariance_table(
    responses: &[(&ModelParameters, &SensitivityVector, &SensitivityMatrix)],
    case: &UncertaintyCase,
) -> CovarianceTable {
    let n = responses.len();
    let mut cov = vec![vec![0.0; n]; n];
    for k in 0..n {
        for l in 0..n {
            let (p, vk, mk) = responses[k];
            let (_, vl, ml) = responses[l];
            cov[k][l] = covariance(vk, mk, vl, ml, case, p);
        }
    }
    let correlation = (0..n)
        .map(|k| (0..n).map(|l| correlation(cov[k][l], cov[k][k], cov[l][l]).ok()).collect())
        .collect();
    CovarianceTable { covariance: cov, correlation }
}

/// Which second-order terms the Taylor surrogate keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateTerms {
    /// `½ Σᵢⱼ Sᵢⱼ δᵢ δⱼ` over the full matrix.
    Full,
    /// `½ Σᵢ Sᵢᵢ δᵢ²` only.
    Diagonal,
}

fn surrogate_matrix(matrix: &SensitivityMatrix, terms: SurrogateTerms) -> [[f64; 4]; 4] {
    let mut m = matrix.to_array();
    if terms == SurrogateTerms::Diagonal {
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = 0.0;
                }
            }
        }
    }
    m
}

/// Exact mean, variance and third central moment of the surrogate
/// `R⁰ + sᵀδ + ½ δᵀMδ` for `δ ~ N(0, diag(σ²))`:
/// `½ tr(MΣ)`, `sᵀΣs + ½ tr((MΣ)²)`, `3 sᵀΣMΣs + tr((MΣ)³)`.
pub fn surrogate_exact_moments(
    nominal: f64,
    vec: &SensitivityVector,
    matrix: &SensitivityMatrix,
    case: &UncertaintyCase,
    p: &ModelParameters,
    terms: SurrogateTerms,
) -> (f64, f64, f64) {
    let sigma = case.absolute_std(p);
    let var_of = sigma.map(|s| s * s);
    let m = surrogate_matrix(matrix, terms);
    let s = vec.values;
    // A = M Σ
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = m[i][j] * var_of[j];
        }
    }
    let mul = |x: &[[f64; 4]; 4], y: &[[f64; 4]; 4]| {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        out
    };
    let trace = |x: &[[f64; 4]; 4]| (0..4).map(|i| x[i][i]).sum::<f64>();
    let a2 = mul(&a, &a);
    let a3 = mul(&a2, &a);
    let mean = nominal + 0.5 * trace(&a);
    let lin: f64 = (0..4).map(|i| s[i] * s[i] * var_of[i]).sum();
    let var = lin + 0.5 * trace(&a2);
    // sᵀ Σ M Σ s
    let sms: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| s[i] * var_of[i] * m[i][j] * var_of[j] * s[j])
        .sum();
    let mu3 = 3.0 * sms + trace(&a3);
    (mean, var, mu3)
}

/// Empirical moments of a Monte Carlo run with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub std_err_mean: f64,
    pub std_err_variance: f64,
    pub std_err_skewness: f64,
}

const MC_BATCHES: usize = 100;

fn central_moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    (mean, m2 / n, m3 / n)
}

fn skew_of(m2: f64, m3: f64) -> f64 {
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

fn spread(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
}

/// Samples the Taylor surrogate with independent Gaussian parameter
/// deviations from a seeded ChaCha20 stream. Standard errors come from
/// 100 equal batches.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_surrogate(
    nominal: f64,
    vec: &SensitivityVector,
    matrix: &SensitivityMatrix,
    case: &UncertaintyCase,
    p: &ModelParameters,
    terms: SurrogateTerms,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if samples < 2 * MC_BATCHES || !samples.is_multiple_of(MC_BATCHES) {
        return Err(Error::Config(format!("Monte Carlo sample count must be a positive multiple of {MC_BATCHES} and at least {}", 2 * MC_BATCHES)));
    }
    let sigma = case.absolute_std(p);
    let m = surrogate_matrix(matrix, terms);
    let s = vec.values;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // deviations from R⁰ keep the sums well conditioned
    let draws: Vec<f64> = (0..samples)
        .map(|_| {
            let delta: [f64; 4] = [0, 1, 2, 3].map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sigma[i]
            });
            let mut r = 0.0;
            for i in 0..4 {
                r += s[i] * delta[i];
                for j in 0..4 {
                    r += 0.5 * m[i][j] * delta[i] * delta[j];
                }
            }
            r
        })
        .collect();
    let (mean, var, m3) = central_moments(&draws);
    let batch = samples / MC_BATCHES;
    let mut stats = (Vec::new(), Vec::new(), Vec::new());
    for chunk in draws.chunks(batch) {
        let (bm, bv, b3) = central_moments(chunk);
        stats.0.push(bm);
        stats.1.push(bv);
        stats.2.push(skew_of(bv, b3));
    }
    Ok(MonteCarloSummary {
        samples,
        mean: nominal + mean,
        variance: var,
        skewness: skew_of(var, m3),
        std_err_mean: spread(&stats.0),
        std_err_variance: spread(&stats.1),
        std_err_skewness: spread(&stats.2),
    })
}

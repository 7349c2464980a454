//! Finite-difference solver for `D u'' − Σa u = s(x)` on `(−a, a)` with
//! `u(±a) = 0`, plus grid fields and quadrature.
//!
//! The operator is self-adjoint, so forward and adjoint problems share this
//! one routine; only the source changes. Every solve is recorded in a
//! [`SolveLedger`] under the purpose it served.
//!
//! Point sources `w·δ(x − b)` must sit on a node and are deposited as
//! `w/Δx` into that node's right-hand side. Integrals against a delta are
//! never taken by quadrature; use [`sample_at`].

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;

/// Uniform mesh on `[−a, a]` with an odd node count, so `x = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_nodes: usize,
    half_thickness_a: f64,
    spacing: f64,
}

/// Nodes within this fraction of Δx of a requested position count as a hit.
const NODE_SNAP: f64 = 1e-9;

impl Grid {
    pub fn new(n_nodes: usize, half_thickness_a: f64) -> Result<Self> {
        if n_nodes < 3 || n_nodes.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "node count must be odd and at least 3, got {n_nodes}"
            )));
        }
        if !(half_thickness_a.is_finite() && half_thickness_a > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-thickness must be positive, got {half_thickness_a}"
            )));
        }
        Ok(Self {
            n_nodes,
            half_thickness_a,
            spacing: 2.0 * half_thickness_a / (n_nodes - 1) as f64,
        })
    }

    pub fn for_model(n_nodes: usize, p: &ModelParameters) -> Result<Self> {
        Self::new(n_nodes, p.half_thickness_a())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn half_thickness_a(&self) -> f64 {
        self.half_thickness_a
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Position of node `i`; the end nodes are exactly `∓a`.
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.half_thickness_a
        } else {
            -self.half_thickness_a + i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.node(i))
    }

    /// Index of the node at `x`, or [`Error::OffGrid`].
    pub fn node_index(&self, x: f64) -> Result<usize> {
        let a = self.half_thickness_a;
        if x.is_nan() || x.abs() > a * (1.0 + 1e-15) {
            return Err(Error::OutsideDomain { x, a });
        }
        let t = (x + a) / self.spacing;
        let i = t.round();
        if (t - i).abs() > NODE_SNAP || i < 0.0 || i as usize >= self.n_nodes {
            return Err(Error::OffGrid { x, spacing: self.spacing });
        }
        Ok(i as usize)
    }

    pub fn is_node(&self, x: f64) -> bool {
        self.node_index(x).is_ok()
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.n_nodes == other.n_nodes && self.half_thickness_a == other.half_thickness_a
    }
}

/// A function sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.n_nodes
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n_nodes] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n_nodes] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `alpha·self + beta·other`, nodewise.
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| alpha * u + beta * v)
                .collect(),
        })
    }

    pub fn product(&self, other: &ScalarField) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(u, v)| u * v).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest nodewise `|self − other|`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (u, v)| m.max((u - v).abs())))
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Smooth part of a right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub enum Smooth {
    Zero,
    Constant(f64),
    Field(ScalarField),
}

/// Right-hand side `s(x) = smooth(x) + Σ w_j δ(x − b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub smooth: Smooth,
    pub deltas: Vec<(f64, f64)>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self { smooth: Smooth::Zero, deltas: Vec::new() }
    }
}

impl SourceSpec {
    pub fn constant(value: f64) -> Self {
        Self { smooth: Smooth::Constant(value), deltas: Vec::new() }
    }

    pub fn field(field: ScalarField) -> Self {
        Self { smooth: Smooth::Field(field), deltas: Vec::new() }
    }

    pub fn delta(position: f64, weight: f64) -> Self {
        Self { smooth: Smooth::Zero, deltas: vec![(position, weight)] }
    }

    pub fn with_delta(mut self, position: f64, weight: f64) -> Self {
        self.deltas.push((position, weight));
        self
    }

    /// Nodal right-hand side on `grid`, deltas deposited as `w/Δx`.
    pub fn discretize(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut rhs = match &self.smooth {
            Smooth::Zero => vec![0.0; grid.n_nodes],
            Smooth::Constant(c) => vec![*c; grid.n_nodes],
            Smooth::Field(f) => {
                if !f.grid.same_as(grid) {
                    return Err(Error::GridMismatch);
                }
                f.values.clone()
            }
        };
        for &(x, w) in &self.deltas {
            let i = grid.node_index(x)?;
            rhs[i] += w / grid.spacing;
        }
        Ok(rhs)
    }
}

/// What a large-scale solve was for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveTag {
    Forward,
    FirstAdjoint,
    SecondAdjoint,
    Verification,
}

impl SolveTag {
    pub const ALL: [SolveTag; 4] = [
        SolveTag::Forward,
        SolveTag::FirstAdjoint,
        SolveTag::SecondAdjoint,
        SolveTag::Verification,
    ];

    pub fn is_adjoint(self) -> bool {
        matches!(self, SolveTag::FirstAdjoint | SolveTag::SecondAdjoint)
    }

    pub fn label(self) -> &'static str {
        match self {
            SolveTag::Forward => "forward",
            SolveTag::FirstAdjoint => "first-adjoint",
            SolveTag::SecondAdjoint => "second-adjoint",
            SolveTag::Verification => "verification",
        }
    }
}

/// Counts of solves by purpose. Increments are atomic, so one ledger may be
/// shared across threads.
#[derive(Debug, Default)]
pub struct SolveLedger {
    counts: [AtomicU64; 4],
}

impl SolveLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, tag: SolveTag) {
        self.counts[tag as usize].fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self, tag: SolveTag) -> u64 {
        self.counts[tag as usize].load(Ordering::Relaxed)
    }

    pub fn adjoint_solves(&self) -> u64 {
        self.count(SolveTag::FirstAdjoint) + self.count(SolveTag::SecondAdjoint)
    }

    pub fn total(&self) -> u64 {
        SolveTag::ALL.iter().map(|&t| self.count(t)).sum()
    }

    /// Adds another ledger's counts into this one.
    pub fn merge(&self, other: &SolveLedger) {
        for tag in SolveTag::ALL {
            self.counts[tag as usize].fetch_add(other.count(tag), Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            forward: self.count(SolveTag::Forward),
            first_adjoint: self.count(SolveTag::FirstAdjoint),
            second_adjoint: self.count(SolveTag::SecondAdjoint),
            verification: self.count(SolveTag::Verification),
        }
    }
}

/// Plain copy of a ledger's counters, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub forward: u64,
    pub first_adjoint: u64,
    pub second_adjoint: u64,
    pub verification: u64,
}

impl LedgerSnapshot {
    pub fn adjoint(&self) -> u64 {
        self.first_adjoint + self.second_adjoint
    }

    pub fn total(&self) -> u64 {
        self.forward + self.first_adjoint + self.second_adjoint + self.verification
    }
}

/// Thomas algorithm for a tridiagonal system. `sub[0]` and `sup[n-1]` are
/// ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    assert!(sub.len() == n && diag.len() == n && sup.len() == n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = sup[i] / pivot;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Solves `D u'' − Σa u = s` with `u(±a) = 0` by second-order central
/// differences and records one solve under `tag`.
pub fn solve_bvp(
    p: &ModelParameters,
    grid: &Grid,
    source: &SourceSpec,
    ledger: &SolveLedger,
    tag: SolveTag,
) -> Result<ScalarField> {
    let rhs = source.discretize(grid)?;
    let n = grid.n_nodes;
    let m = n - 2;
    let h2 = grid.spacing * grid.spacing;
    let off = p.diff_coeff() / h2;
    let diag = -2.0 * off - p.sigma_a();
    let interior = solve_tridiagonal(&vec![off; m], &vec![diag; m], &vec![off; m], &rhs[1..n - 1])?;
    ledger.record(tag);
    let mut values = Vec::with_capacity(n);
    values.push(0.0);
    values.extend(interior);
    values.push(0.0);
    ScalarField::new(*grid, values)
}

/// Discrete operator `D (u_{i−1} − 2u_i + u_{i+1})/Δx² − Σa u_i` at interior
/// nodes; zero at the two boundary nodes.
pub fn apply_operator(p: &ModelParameters, u: &ScalarField) -> ScalarField {
    let n = u.grid.n_nodes;
    let h2 = u.grid.spacing * u.grid.spacing;
    let v = &u.values;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = p.diff_coeff() * (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2 - p.sigma_a() * v[i];
    }
    ScalarField { grid: u.grid, values: out }
}

/// Quadrature rule over the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite Simpson.
    #[default]
    Simpson,
    /// Composite trapezoid. For fields vanishing at `±a` this is the inner
    /// product under which the discrete operator is symmetric, which makes
    /// adjoint-route sensitivities exact derivatives of the discrete response.
    Trapezoid,
}

fn weights(grid: &Grid, rule: QuadratureRule) -> impl Iterator<Item = f64> + '_ {
    let n = grid.n_nodes;
    let h = grid.spacing;
    (0..n).map(move |i| {
        let end = i == 0 || i + 1 == n;
        match rule {
            QuadratureRule::Trapezoid => {
                if end {
                    0.5 * h
                } else {
                    h
                }
            }
            QuadratureRule::Simpson => {
                let w = if end {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * h / 3.0
            }
        }
    })
}

/// `∫_{−a}^{a} f dx`.
pub fn integrate(f: &ScalarField, rule: QuadratureRule) -> f64 {
    weights(&f.grid, rule).zip(&f.values).map(|(w, v)| w * v).sum()
}

/// `∫_{−a}^{a} f g dx`.
pub fn integrate_product(f: &ScalarField, g: &ScalarField, rule: QuadratureRule) -> Result<f64> {
    f.check_grid(g)?;
    Ok(weights(&f.grid, rule)
        .zip(f.values.iter().zip(&g.values))
        .map(|(w, (u, v))| w * u * v)
        .sum())
}

/// Nodal value of `field` at `x`; this is `∫ f δ(x' − x) dx'`.
pub fn sample_at(field: &ScalarField, x: f64) -> Result<f64> {
    Ok(field.values[field.grid.node_index(x)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analytic_flux, ModelParameters};

    fn nominal(b: f64) -> ModelParameters {
        ModelParameters::nominal(b).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(4001, 50.0).unwrap();
        assert_eq!(g.node(0), -50.0);
        assert_eq!(g.node(4000), 50.0);
        assert_eq!(g.node(2000), 0.0);
        assert!((g.spacing() - 0.025).abs() < 1e-15);
        for &b in &[10.0, 40.0, 49.5, -10.0, -40.0, -49.5, 0.0] {
            let i = g.node_index(b).unwrap();
            assert!((g.node(i) - b).abs() < 1e-12);
        }
        assert!(matches!(g.node_index(10.01), Err(Error::OffGrid { .. })));
        assert!(matches!(g.node_index(51.0), Err(Error::OutsideDomain { .. })));
        assert!(Grid::new(4000, 50.0).is_err());
        assert!(Grid::new(1, 50.0).is_err());
        assert!(Grid::new(3, 50.0).is_ok());
    }

    #[test]
    fn spacing_is_uniform() {
        let g = Grid::new(801, 50.0).unwrap();
        for i in 1..g.n_nodes() {
            assert!((g.node(i) - g.node(i - 1) - g.spacing()).abs() <= 1e-14 * 50.0);
        }
    }

    #[test]
    fn thomas_solves_a_small_system() {
        // [2 1 0; 1 3 1; 0 1 4] x = [4 9 10] → x = [1 2 2]
        let x = solve_tridiagonal(
            &[0.0, 1.0, 1.0],
            &[2.0, 3.0, 4.0],
            &[1.0, 1.0, 0.0],
            &[4.0, 9.0, 10.0],
        )
        .unwrap();
        for (xi, ei) in x.iter().zip([1.0, 2.0, 2.0]) {
            assert!((xi - ei).abs() < 1e-14);
        }
    }

    #[test]
    fn thomas_reports_zero_pivot() {
        let r = solve_tridiagonal(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert_eq!(r, Err(Error::SingularSystem { row: 1 }));
        let r = solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]);
        assert_eq!(r, Err(Error::SingularSystem { row: 0 }));
    }

    #[test]
    fn zero_source_gives_zero_field() {
        let p = nominal(10.0);
        let g = Grid::new(101, 50.0).unwrap();
        let ledger = SolveLedger::new();
        let u = solve_bvp(&p, &g, &SourceSpec::default(), &ledger, SolveTag::Verification).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        assert_eq!(ledger.count(SolveTag::Verification), 1);
    }

    #[test]
    fn flux_solve_satisfies_difference_equations() {
        let p = nominal(10.0);
        let g = Grid::new(401, 50.0).unwrap();
        let ledger = SolveLedger::new();
        let q = p.source_q();
        let phi = solve_bvp(&p, &g, &SourceSpec::constant(-q), &ledger, SolveTag::Forward).unwrap();
        assert_eq!(phi.values()[0], 0.0);
        assert_eq!(*phi.values().last().unwrap(), 0.0);
        let lu = apply_operator(&p, &phi);
        for i in 1..g.n_nodes() - 1 {
            assert!((lu.values()[i] + q).abs() < 1e-10 * q);
        }
        // maximum principle
        assert!(phi.values().iter().all(|&v| v >= 0.0));
        // close to the analytic flux
        let exact = ScalarField::from_fn(g, |x| analytic_flux(&p, x).unwrap());
        assert!(phi.max_abs_diff(&exact).unwrap() < 1e-3 * exact.max_abs());
    }

    #[test]
    fn delta_source_must_be_on_a_node() {
        let p = nominal(10.0);
        let g = Grid::new(101, 50.0).unwrap();
        let ledger = SolveLedger::new();
        let r = solve_bvp(&p, &g, &SourceSpec::delta(10.3, 1.0), &ledger, SolveTag::FirstAdjoint);
        assert!(matches!(r, Err(Error::OffGrid { .. })));
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn integrals_of_simple_functions() {
        let g = Grid::new(4001, 50.0).unwrap();
        let one = ScalarField::constant(g, 1.0);
        for rule in [QuadratureRule::Simpson, QuadratureRule::Trapezoid] {
            assert!((integrate_product(&one, &one, rule).unwrap() - 100.0).abs() < 1e-11);
        }
        let k = 0.35;
        let ch = ScalarField::from_fn(g, |x| (k * x).cosh());
        let exact = 2.0 / k * (50.0 * k).sinh();
        let simpson = integrate_product(&ch, &one, QuadratureRule::Simpson).unwrap();
        assert!(((simpson - exact) / exact).abs() < 1e-10);
        let trap = integrate(&ch, QuadratureRule::Trapezoid);
        assert!(((trap - exact) / exact).abs() < 1e-4);
    }

    #[test]
    fn integrate_rejects_mismatched_grids() {
        let f = ScalarField::zeros(Grid::new(11, 50.0).unwrap());
        let g = ScalarField::zeros(Grid::new(13, 50.0).unwrap());
        assert_eq!(integrate_product(&f, &g, QuadratureRule::Simpson), Err(Error::GridMismatch));
    }

    #[test]
    fn sample_at_reads_nodes_only() {
        let g = Grid::new(11, 50.0).unwrap();
        let f = ScalarField::from_fn(g, |x| x * x);
        assert_eq!(sample_at(&f, -50.0).unwrap(), 2500.0);
        assert_eq!(sample_at(&f, 10.0).unwrap(), f.values()[6]);
        assert!(sample_at(&f, 12.0).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Grid::new(5, 1.0).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 4]).is_err());
        assert!(ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ledger_merges_and_partitions() {
        let a = SolveLedger::new();
        a.record(SolveTag::Forward);
        a.record(SolveTag::FirstAdjoint);
        let b = SolveLedger::new();
        b.record(SolveTag::SecondAdjoint);
        b.record(SolveTag::Verification);
        b.record(SolveTag::Verification);
        a.merge(&b);
        let s = a.snapshot();
        assert_eq!(s.total(), 5);
        assert_eq!(s.adjoint(), 2);
        assert_eq!(a.total(), SolveTag::ALL.iter().map(|&t| a.count(t)).sum::<u64>());
    }

    #[test]
    fn ledger_counts_concurrent_records() {
        let ledger = SolveLedger::new();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..1000 {
                        ledger.record(SolveTag::Verification);
                    }
                });
            }
        });
        assert_eq!(ledger.count(SolveTag::Verification), 8000);
    }
}

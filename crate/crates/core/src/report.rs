//! Tabular and JSON output.
//!
//! Tables put one row per detector (or per detector and method) so that
//! every numeric column carries a single unit in its header. TSV values
//! use four significant digits; JSON values use seventeen, enough to
//! round-trip an `f64`.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::error::Result;
use crate::model::Param;
use crate::sensitivities::{to_relative, Method, SensitivityMatrix, SensitivityVector};
use crate::uncertainty::{covariance_table, response_moments, ResponseMoments, UncertaintyCase};
use crate::verification::{Check, DetectorResults};

/// Unit of the detector response.
pub const RESPONSE_UNIT: &str = "cm^-3 s^-1";

/// Unit string of `∂R/∂α_i`.
pub fn first_order_unit(i: Param) -> String {
    format!("({RESPONSE_UNIT})/({})", i.unit())
}

/// Unit string of `∂²R/∂α_i∂α_j`.
pub fn second_order_unit(i: Param, j: Param) -> String {
    if i == j {
        format!("({RESPONSE_UNIT})/({})^2", i.unit())
    } else {
        format!("({RESPONSE_UNIT})/(({})({}))", i.unit(), j.unit())
    }
}

/// Four significant digits.
pub fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrder {
    pub quadrature: [f64; 4],
    pub closed_form: [f64; 4],
    pub relative: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrder {
    pub quadrature: [[f64; 4]; 4],
    pub closed_form: [[f64; 4]; 4],
    pub relative: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryRow {
    pub method: Method,
    pub pair: String,
    pub unit: String,
    pub ij: f64,
    pub ji: f64,
    pub relative_discrepancy: f64,
}

/// Results for one detector position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorReport {
    pub detector_b: f64,
    pub response_numeric: f64,
    pub response_closed_form: f64,
    pub first_order: FirstOrder,
    pub second_order: SecondOrder,
    pub symmetry: Vec<SymmetryRow>,
    pub adjoint_solves: u64,
}

impl DetectorReport {
    /// Relative values come from the quadrature path and the numeric response.
    pub fn from_results(r: &DetectorResults) -> Result<Self> {
        let rel_first: SensitivityVector = to_relative(&r.first_quadrature, &r.params, r.response_numeric)?;
        let rel_second: SensitivityMatrix = to_relative(&r.second_quadrature, &r.params, r.response_numeric)?;
        let symmetry = [&r.symmetry_quadrature, &r.symmetry_closed_form]
            .into_iter()
            .flat_map(|rep| {
                rep.pairs.iter().map(move |pair| SymmetryRow {
                    method: rep.method,
                    pair: pair.label.to_string(),
                    unit: second_order_unit(pair.i, pair.j),
                    ij: pair.ij,
                    ji: pair.ji,
                    relative_discrepancy: pair.relative_discrepancy(),
                })
            })
            .collect();
        Ok(Self {
            detector_b: r.params.detector_b(),
            response_numeric: r.response_numeric,
            response_closed_form: r.response_closed_form,
            first_order: FirstOrder {
                quadrature: r.first_quadrature.values,
                closed_form: r.first_closed_form.values,
                relative: rel_first.values,
            },
            second_order: SecondOrder {
                quadrature: r.second_quadrature.to_array(),
                closed_form: r.second_closed_form.to_array(),
                relative: rel_second.to_array(),
            },
            symmetry,
            adjoint_solves: r.adjoint_solves,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorMoments {
    pub detector_b: f64,
    #[serde(flatten)]
    pub moments: ResponseMoments,
    pub std_dev: f64,
    pub relative_std_dev: f64,
}

/// Propagated moments for one uncertainty case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: UncertaintyCase,
    pub moments: Vec<DetectorMoments>,
    /// Rows and columns follow the detector order; `None` where a variance is zero.
    pub correlation: Vec<Vec<Option<f64>>>,
}

impl CaseReport {
    /// Moments use the quadrature sensitivities and the numeric response.
    pub fn compute(case: &UncertaintyCase, results: &[DetectorResults]) -> Self {
        let moments = results
            .iter()
            .map(|r| {
                let m = response_moments(r.response_numeric, &r.first_quadrature, &r.second_quadrature, case, &r.params);
                DetectorMoments {
                    detector_b: r.params.detector_b(),
                    std_dev: m.std_dev(),
                    relative_std_dev: m.relative_std_dev(),
                    moments: m,
                }
            })
            .collect();
        let inputs: Vec<_> = results.iter().map(|r| (&r.params, &r.first_quadrature, &r.second_quadrature)).collect();
        Self { case: case.clone(), moments, correlation: covariance_table(&inputs, case).correlation }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub detectors: Vec<DetectorReport>,
    pub cases: Vec<CaseReport>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl RunReport {
    pub fn assemble(config: &RunConfig, results: &[DetectorResults], checks: Vec<Check>) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            detectors: results.iter().map(DetectorReport::from_results).collect::<Result<_>>()?,
            cases: config.cases.iter().map(|c| CaseReport::compute(c, results)).collect(),
            all_passed: checks.iter().all(|c| c.passed),
            checks,
        })
    }
}

fn pairs() -> impl Iterator<Item = (Param, Param)> {
    (0..4).flat_map(|i| (i..4).map(move |j| (Param::ALL[i], Param::ALL[j])))
}

pub fn first_order_tsv(report: &RunReport) -> String {
    let mut out = format!("detector b [cm]\tmethod\tR [{RESPONSE_UNIT}]");
    for p in Param::ALL {
        let _ = write!(out, "\tdR/d{} [{}]", p.label(), first_order_unit(p));
    }
    out.push('\n');
    for d in &report.detectors {
        for (method, values) in [(Method::Quadrature, &d.first_order.quadrature), (Method::ClosedForm, &d.first_order.closed_form)] {
            let r = if method == Method::Quadrature { d.response_numeric } else { d.response_closed_form };
            let _ = write!(out, "{}\t{}\t{}", d.detector_b, method.label(), fmt4(r));
            for v in values {
                let _ = write!(out, "\t{}", fmt4(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn first_order_relative_tsv(report: &RunReport) -> String {
    let mut out = String::from("detector b [cm]");
    for p in Param::ALL {
        let _ = write!(out, "\t(dR/d{0})({0}/R) [dimensionless]", p.label());
    }
    out.push('\n');
    for d in &report.detectors {
        let _ = write!(out, "{}", d.detector_b);
        for v in d.first_order.relative {
            let _ = write!(out, "\t{}", fmt4(v));
        }
        out.push('\n');
    }
    out
}

pub fn second_order_tsv(report: &RunReport) -> String {
    let mut out = String::from("detector b [cm]\tmethod");
    for (i, j) in pairs() {
        let _ = write!(out, "\td2R/d{}d{} [{}]", i.label(), j.label(), second_order_unit(i, j));
    }
    out.push('\n');
    for d in &report.detectors {
        for (method, m) in [(Method::Quadrature, &d.second_order.quadrature), (Method::ClosedForm, &d.second_order.closed_form)] {
            let _ = write!(out, "{}\t{}", d.detector_b, method.label());
            for (i, j) in pairs() {
                let _ = write!(out, "\t{}", fmt4(m[i.index()][j.index()]));
            }
            out.push('\n');
        }
    }
    out
}

pub fn second_order_relative_tsv(report: &RunReport) -> String {
    let mut out = String::from("detector b [cm]");
    for (i, j) in pairs() {
        let _ = write!(out, "\t(d2R/d{0}d{1})({0} {1}/R) [dimensionless]", i.label(), j.label());
    }
    out.push('\n');
    for d in &report.detectors {
        let _ = write!(out, "{}", d.detector_b);
        for (i, j) in pairs() {
            let _ = write!(out, "\t{}", fmt4(d.second_order.relative[i.index()][j.index()]));
        }
        out.push('\n');
    }
    out
}

pub fn symmetry_tsv(report: &RunReport) -> String {
    let mut out = String::from("detector b [cm]\tmethod\tpair\tunit of S_ij and S_ji\tS_ij [see unit column]\tS_ji [see unit column]\trelative discrepancy [dimensionless]\n");
    for d in &report.detectors {
        for row in &d.symmetry {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                d.detector_b,
                row.method.label(),
                row.pair,
                row.unit,
                fmt4(row.ij),
                fmt4(row.ji),
                fmt4(row.relative_discrepancy)
            );
        }
    }
    out
}

pub fn solve_count_text(report: &RunReport) -> String {
    let mut out = String::new();
    for d in &report.detectors {
        let _ = writeln!(out, "detector b = {} cm: adjoint solves per response: {}", d.detector_b, d.adjoint_solves);
    }
    out
}

pub fn moments_tsv(report: &RunReport) -> String {
    let mut out = format!(
        "case\tdetector b [cm]\tR0 [{u}]\tE(R) [{u}]\tstd dev [{u}]\trelative std dev [dimensionless]\tmu3 [({u})^3]\tskewness [dimensionless]\n",
        u = RESPONSE_UNIT
    );
    for c in &report.cases {
        for m in &c.moments {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.case.name,
                m.detector_b,
                fmt4(m.moments.nominal),
                fmt4(m.moments.expected_value),
                fmt4(m.std_dev),
                fmt4(m.relative_std_dev),
                fmt4(m.moments.third_central_moment),
                fmt4(m.moments.skewness)
            );
        }
    }
    out
}

pub fn correlations_tsv(report: &RunReport) -> String {
    let mut out = String::from("case\tdetector b [cm]");
    for d in &report.detectors {
        let _ = write!(out, "\tcorr with b={} [dimensionless]", d.detector_b);
    }
    out.push('\n');
    for c in &report.cases {
        for (row, d) in c.correlation.iter().zip(&report.detectors) {
            let _ = write!(out, "{}\t{}", c.case.name, d.detector_b);
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(out, "\t{}", fmt4(*v));
                    }
                    None => out.push_str("\tundefined"),
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn checks_tsv(checks: &[Check]) -> String {
    let mut out = String::from("check\tresult\tmeasured [dimensionless]\ttolerance [dimensionless]\tdetail\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            fmt4(c.measured),
            fmt4(c.tolerance),
            c.detail
        );
    }
    out
}

/// JSON formatter that writes every `f64` with seventeen significant digits.
struct SeventeenDigits<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with seventeen significant digits per float.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| crate::Error::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes the tables and returns the paths written, in order.
///
/// `with_checks` adds `verification.tsv`; the tables-only mode leaves it out.
pub fn write_report(report: &RunReport, dir: &Path, format: OutputFormat, with_checks: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, String)> = Vec::new();
    if format.tsv() {
        files.push(("first_order.tsv", first_order_tsv(report)));
        files.push(("first_order_relative.tsv", first_order_relative_tsv(report)));
        files.push(("second_order.tsv", second_order_tsv(report)));
        files.push(("second_order_relative.tsv", second_order_relative_tsv(report)));
        files.push(("symmetry.tsv", symmetry_tsv(report)));
        files.push(("solve_counts.txt", solve_count_text(report)));
        files.push(("moments.tsv", moments_tsv(report)));
        files.push(("correlations.tsv", correlations_tsv(report)));
        if with_checks {
            files.push(("verification.tsv", checks_tsv(&report.checks)));
        }
    }
    if format.json() {
        files.push(("report.json", to_json(report)?));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{Grid, SolveLedger};
    use crate::verification::analyze_detector;

    fn small_report() -> RunReport {
        let cfg = RunConfig { detectors: vec![10.0, 49.5], n_nodes: 1001, ..RunConfig::default() };
        let grid = Grid::new(cfg.n_nodes, cfg.half_thickness).unwrap();
        let ledger = SolveLedger::new();
        let results: Vec<_> = cfg
            .detectors
            .iter()
            .map(|&b| analyze_detector(&cfg.params_at(b).unwrap(), &grid, &ledger).unwrap())
            .collect();
        RunReport::assemble(&cfg, &results, vec![Check::at_most("demo", 0.5, 1.0, "")]).unwrap()
    }

    #[test]
    fn four_significant_digits() {
        assert_eq!(fmt4(3.775_63e9), "3.776e9");
        assert_eq!(fmt4(-1.33064e-2), "-1.331e-2");
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let text = to_json(&vec![0.1_f64, -2.5e-1]).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e-1"), "{text}");
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.1, -2.5e-1]);
    }

    #[test]
    fn every_numeric_header_has_a_unit() {
        let r = small_report();
        for table in [
            first_order_tsv(&r),
            first_order_relative_tsv(&r),
            second_order_tsv(&r),
            second_order_relative_tsv(&r),
            moments_tsv(&r),
            correlations_tsv(&r),
        ] {
            let header = table.lines().next().unwrap();
            for col in header.split('\t').filter(|c| *c != "method" && *c != "case") {
                assert!(col.contains('[') && col.ends_with(']'), "column '{col}' lacks a unit");
            }
            let width = header.split('\t').count();
            assert!(table.lines().all(|l| l.split('\t').count() == width));
        }
    }

    #[test]
    fn output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let r = small_report();
        let a = write_report(&r, &dir.path().join("a"), OutputFormat::Both, true).unwrap();
        let b = write_report(&small_report(), &dir.path().join("b"), OutputFormat::Both, true).unwrap();
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.last().unwrap()).unwrap()).unwrap();
        assert_eq!(json["detectors"].as_array().unwrap().len(), 2);
        assert_eq!(json["cases"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn solve_count_line() {
        assert!(solve_count_text(&small_report()).contains("detector b = 10 cm: adjoint solves per response: 4"));
    }
}

//! Text and CSV renderings of the library's results.
//!
//! Every float goes out with 17 significant digits so that a written value
//! reads back to the same `f64`.

use std::fmt::Write as _;
use std::io;

use turnlayer_core::expansion::ExpansionBundle;
use turnlayer_core::layer::LayerSolution;
use turnlayer_core::pencil::{PencilStructure, StructureReport};
use turnlayer_core::validate::{ConvergenceStudy, Slope};

/// `v` with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn slope_text(s: Slope) -> String {
    match s {
        Slope::Fitted(v) => format!("{v:.4}"),
        Slope::AtFloor => "at roundoff floor".into(),
    }
}

/// Condition table: `name, verdict, witness_t, witness_value`.
pub fn write_conditions<W: io::Write>(out: W, report: &StructureReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "verdict", "witness_t", "witness_value"])?;
    for c in &report.checks {
        w.write_record([c.name, c.verdict.label(), &float(c.witness_t), &float(c.witness_value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_text(report: &StructureReport, structure: Option<&PencilStructure>) -> String {
    let mut s = String::new();
    if let Some(st) = structure {
        let _ = writeln!(s, "growing directions p = {}, decaying directions q = {}", st.p, st.q);
        let _ = writeln!(s, "turning-point eigenvalues: {} and {}", float(st.eta_plus()), float(st.eta_minus()));
        let w: Vec<String> = st.end_eigenvalues.iter().map(|&v| float(v)).collect();
        let _ = writeln!(s, "end eigenvalues: {}", w.join(", "));
        let _ = writeln!(s, "layer decay rates: start {}, end {}", float(st.start_rate), float(st.end_rate));
    } else {
        let _ = writeln!(s, "normalization could not be built");
    }
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{:width$}  {:10}  t = {:<24}  {:<24}  {}",
            c.name,
            c.verdict.label(),
            float(c.witness_t),
            float(c.witness_value),
            c.detail
        );
    }
    let verdict = if report.all_pass() { "all conditions pass" } else { "some conditions fail" };
    let _ = writeln!(s, "{verdict}");
    s
}

/// Regular terms at their sample nodes: `t, k, component, value`.
pub fn write_series<W: io::Write>(out: W, bundle: &ExpansionBundle) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "k", "component", "value"])?;
    for k in 0..=bundle.order {
        for (&t, x) in bundle.regular.nodes().iter().zip(bundle.regular.samples(k)) {
            for (i, v) in x.iter().enumerate() {
                w.write_record([float(t), k.to_string(), i.to_string(), float(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Layer terms at their grid nodes: `stretched_time, component, value, order, side`.
pub fn write_layers<W: io::Write>(out: W, bundle: &ExpansionBundle) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stretched_time", "component", "value", "order", "side"])?;
    let layers: Vec<&LayerSolution> = bundle.start_layers.iter().chain(&bundle.end_layers).collect();
    for layer in layers {
        let times = layer.grid.stretched(layer.side);
        for (&s, x) in times.iter().zip(&layer.values) {
            for (i, v) in x.iter().enumerate() {
                w.write_record([
                    float(s),
                    i.to_string(),
                    float(*v),
                    layer.order.to_string(),
                    layer.side.label().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Matched layer parameters and their boundary residuals:
/// `order, name, component, value`.
pub fn write_constants<W: io::Write>(out: W, bundle: &ExpansionBundle) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order", "name", "component", "value"])?;
    for c in &bundle.constants {
        let k = c.order.to_string();
        for (i, v) in c.start.iter().enumerate() {
            w.write_record([k.as_str(), "start", &i.to_string(), &float(*v)])?;
        }
        for (i, v) in c.end.iter().enumerate() {
            w.write_record([k.as_str(), "end", &i.to_string(), &float(*v)])?;
        }
        w.write_record([k.as_str(), "residual", "0", &float(c.residual)])?;
    }
    w.flush()?;
    Ok(())
}

/// `epsilon, max_error, interior_residual, boundary_residual`.
pub fn write_study<W: io::Write>(out: W, study: &ConvergenceStudy) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "max_error", "interior_residual", "boundary_residual"])?;
    for r in &study.rows {
        w.write_record([
            float(r.epsilon),
            float(r.max_error),
            float(r.interior_residual),
            float(r.boundary_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn study_summary(problem: &str, study: &ConvergenceStudy) -> String {
    let expected = study.order as f64 + 1.0;
    let mut s = String::new();
    let _ = writeln!(s, "problem {problem}, order {}, {} values of epsilon", study.order, study.rows.len());
    let _ = writeln!(s, "error slope: {:.4} (expected {expected})", study.error_slope);
    let _ = writeln!(s, "interior residual slope: {}", slope_text(study.interior_slope));
    let _ = writeln!(s, "boundary residual slope: {}", slope_text(study.boundary_slope));
    let verdict = if study.confirms(0.2) { "consistent with" } else { "NOT consistent with" };
    let _ = writeln!(s, "{verdict} O(eps^{expected}); empirical confirmation only");
    s
}

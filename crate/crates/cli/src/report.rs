//! JSON and CSV renderings of solver results.

use ncw_core::balance::Variant;
use ncw_core::solver::{SdpProblem, SolveReport};
use serde_json::{json, Value};

pub const CSV_TAIL: [&str; 8] = [
    "variant",
    "optimal_cost",
    "distance",
    "primal_residual",
    "dual_residual",
    "constraint_residual",
    "iterations",
    "status",
];

pub fn solve_json(r: &SolveReport) -> Value {
    json!({
        "optimal_cost": r.optimal_cost,
        "distance": r.distance,
        "primal_residual": r.primal_residual,
        "dual_residual": r.dual_residual,
        "constraint_residual": r.constraint_residual,
        "min_eigenvalue": r.min_eigenvalue,
        "iterations": r.iterations,
        "converged": r.converged,
    })
}

/// Constraint rows grouped by origin.
pub fn provenance_json(problem: &SdpProblem) -> Value {
    Value::Array(
        problem
            .constraints
            .provenance()
            .into_iter()
            .map(|(group, rows)| json!({ "group": group, "rows": rows }))
            .collect(),
    )
}

pub fn merge(doc: &mut Value, extra: Value) {
    if let (Value::Object(d), Value::Object(e)) = (doc, extra) {
        d.extend(e);
    }
}

pub fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}

pub fn status(r: &ncw_core::Result<SolveReport>) -> String {
    match r {
        Ok(rep) if rep.converged => "ok".into(),
        Ok(_) => "not_converged".into(),
        Err(e) => format!("error: {e}"),
    }
}

/// One row per grid point, in grid order.
pub fn sweep_csv(
    id: &str,
    params: &[&str],
    variant: Variant,
    points: &[Vec<f64>],
    results: &[ncw_core::Result<SolveReport>],
) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario"];
    header.extend_from_slice(params);
    header.extend_from_slice(&CSV_TAIL);
    w.write_record(&header)?;
    for (point, result) in points.iter().zip(results) {
        let mut row = vec![id.to_string()];
        row.extend(point.iter().map(|&v| number(v)));
        row.push(variant.to_string());
        match result {
            Ok(r) => row.extend([
                number(r.optimal_cost),
                number(r.distance),
                number(r.primal_residual),
                number(r.dual_residual),
                number(r.constraint_residual),
                r.iterations.to_string(),
            ]),
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row.push(status(result));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Shortest round-trip text, in exponent form for small magnitudes.
fn number(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, csv::Error> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

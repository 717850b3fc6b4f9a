//! Deterministic JSON reports, loop and trajectory CSVs, and SVG plots.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::dynamics::FlowState;
use crate::error::{Error, Result};
use crate::functionals::SpectrumReport;
use crate::loopspace::DiscreteLoop;
use crate::solvers::{ContinuationRun, CriticalPoint, DescentStatus};

/// Pretty JSON with sorted keys and every float printed as `{:.16e}`.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{:.16e}", n.as_f64().unwrap_or(f64::NAN));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Floats that are not finite become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Lower-case hex SHA-256 of the canonical form of `v`.
pub fn config_hash(v: &Value) -> String {
    let digest = Sha256::digest(canonical_json(v).as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn loop_csv(lp: &DiscreteLoop<f64>) -> String {
    let n = lp.dim();
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for m in 0..lp.len() {
        let _ = write!(s, "{:.16e}", m as f64 / lp.len() as f64);
        for &x in lp.sample(m) {
            let _ = write!(s, ",{x:.16e}");
        }
        s.push('\n');
    }
    s
}

pub fn trajectory_csv(states: &[FlowState<f64>], total_time: f64) -> String {
    let n = states.first().map_or(0, |s| s.x.len());
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",v{i}");
    }
    s.push('\n');
    let steps = states.len().saturating_sub(1).max(1);
    for (k, st) in states.iter().enumerate() {
        let _ = write!(s, "{:.16e}", total_time * k as f64 / steps as f64);
        for &x in st.x.iter().chain(&st.v) {
            let _ = write!(s, ",{x:.16e}");
        }
        s.push('\n');
    }
    s
}

/// Reads the first two coordinate columns (`x1`, `x2`) of a loop or
/// trajectory CSV.
pub fn read_plane_points(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("CSV has no '{name}' column")))
    };
    let (a, b) = (col("x1")?, col("x2")?);
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let parse = |c: usize| {
                f.get(c)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("bad value on CSV row {}", i + 2)))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// Polyline in a fixed 800×800 view box with labelled axes.
pub fn svg_polyline(points: &[(f64, f64)], closed: bool, title: &str) -> String {
    const SIZE: f64 = 800.0;
    const MARGIN: f64 = 60.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (lo_x, lo_y) = (cx - span / 2.0, cy - span / 2.0);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |x: f64| MARGIN + (x - lo_x) * scale;
    let py = |y: f64| SIZE - MARGIN - (y - lo_y) * scale;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#);
    let _ = writeln!(s, r#"<rect width="800" height="800" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{m}" y="{m}" width="{w}" height="{w}" fill="none" stroke="#888" stroke-width="1"/>"##,
        m = MARGIN,
        w = SIZE - 2.0 * MARGIN
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let vx = lo_x + f * span;
        let vy = lo_y + f * span;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{vx:.4}</text>"#,
            px(vx),
            SIZE - MARGIN + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{vy:.4}</text>"#,
            MARGIN - 6.0,
            py(vy) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="400" y="{}" font-size="14" text-anchor="middle">x1</text>"#, SIZE - 12.0);
    let _ = writeln!(s, r#"<text x="16" y="400" font-size="14" text-anchor="middle" transform="rotate(-90 16 400)">x2</text>"#);
    let escaped = title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let _ = writeln!(s, r#"<text x="400" y="30" font-size="16" text-anchor="middle">{escaped}</text>"#);
    let tag = if closed { "polygon" } else { "polyline" };
    let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
    let _ = writeln!(
        s,
        r##"<{tag} points="{}" fill="none" stroke="#1f4e9c" stroke-width="2"/>"##,
        coords.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

fn status_name(s: DescentStatus) -> &'static str {
    match s {
        DescentStatus::Converged => "converged",
        DescentStatus::BudgetExhausted => "budget_exhausted",
        DescentStatus::Collapsed => "collapsed",
    }
}

pub fn spectrum_json(s: &SpectrumReport<f64>) -> Value {
    json!({
        "index": s.index,
        "nullity": s.nullity,
        "smallest": nums(&s.smallest),
        "tol": num(s.tol),
        "dimension": s.dimension,
        "samples": s.samples,
    })
}

pub fn critical_point_json(cp: &CriticalPoint<f64>) -> Value {
    json!({
        "epsilon": num(cp.params.epsilon),
        "tau": num(cp.params.tau),
        "value": num(cp.value),
        "grad_norm": num(cp.grad_norm),
        "index": cp.index,
        "nullity": cp.nullity,
        "length": num(cp.length),
        "speed_variation": num(cp.speed_variation),
        "mean_speed": num(cp.mean_speed),
        "relative_speed_variation": num(cp.relative_speed_variation()),
        "iterations": cp.iterations,
        "status": status_name(cp.status),
        "samples": cp.curve.len(),
        "spectrum": cp.spectrum.as_ref().map(spectrum_json),
    })
}

pub fn continuation_json(run: &ContinuationRun<f64>) -> Value {
    let limit = run.limit.as_ref().map(|l| {
        json!({
            "multiplier": num(l.multiplier),
            "residual": num(l.residual),
            "stage_residual": num(l.stage_residual),
            "extrapolated_length": l.extrapolated_length.map(num),
            "shooting_residual": num(l.shooting_residual),
            "length": num(l.curve.length().unwrap_or(f64::NAN)),
        })
    });
    json!({
        "schedule": run.schedule.iter().map(|&(e, t)| nums(&[e, t])).collect::<Vec<_>>(),
        "stages": run.stages.iter().map(critical_point_json).collect::<Vec<_>>(),
        "substeps": run.substeps,
        "limit_residual": num(run.limit_residual),
        "limit": limit,
        "converged": run.converged,
    })
}

/// Wraps a command body with the config hash and tolerances.
pub fn envelope(command: &str, config: &Value, tolerances: &Value, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config.clone());
    m.insert("config_hash".into(), json!(config_hash(config)));
    m.insert("tolerances".into(), tolerances.clone());
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("result".into(), body);
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_sorted_and_fixed_width() {
        let v = json!({"b": 1.0, "a": [0.1, 2], "c": {"z": null, "y": "q\"s"}});
        let s = canonical_json(&v);
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("\"q\\\"s\""));
        assert!(s.contains("\n    2\n"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(0.1));
        assert_eq!(config_hash(&v), config_hash(&back));
        assert_eq!(config_hash(&v).len(), 64);
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(num(f64::INFINITY), Value::Null);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_round_trip_and_svg() {
        let text = "t,x1,x2\n0,1,2\n0.5,-1,3\n";
        let pts = read_plane_points(text).unwrap();
        assert_eq!(pts, vec![(1.0, 2.0), (-1.0, 3.0)]);
        assert!(read_plane_points("t,x1\n0,1\n").is_err());
        let svg = svg_polyline(&pts, true, "a<b");
        assert!(svg.contains(r#"viewBox="0 0 800 800""#));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("<polygon"));
    }
}

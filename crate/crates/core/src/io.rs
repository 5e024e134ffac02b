//! Deterministic file formats: versioned JSON documents, CSV tables and SVG
//! plots of configuration-space curves.
//!
//! Floats are always written with 17 significant digits in exponent form, so
//! identical values give byte-identical files and every `f64` round-trips.

use std::fmt::Write as _;
use std::io;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::phase::State4;
use crate::shooting::Family;

pub const SCHEMA: &str = "orbit-krein/1";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with fixed float formatting.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
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

/// Serializes `value` as deterministic pretty JSON.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serialization into memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

#[derive(Serialize)]
struct DocumentRef<'a, T: ?Sized> {
    schema: &'a str,
    kind: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<T> {
    schema: String,
    kind: String,
    data: T,
}

/// A versioned document `{"schema", "kind", "data"}`.
pub fn document<T: Serialize + ?Sized>(kind: &str, data: &T) -> String {
    to_json(&DocumentRef { schema: SCHEMA, kind, data })
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {found:?} (expected {SCHEMA:?})")]
    Schema { found: String },
    #[error("document holds {found:?}, expected {expected:?}")]
    Kind { found: String, expected: String },
}

/// Parses a document written by [`document`], checking schema and kind.
pub fn parse_document<T: DeserializeOwned>(text: &str, kind: &str) -> Result<T, DocumentError> {
    let doc: Document<T> = serde_json::from_str(text)?;
    if doc.schema != SCHEMA {
        return Err(DocumentError::Schema { found: doc.schema });
    }
    if doc.kind != kind {
        return Err(DocumentError::Kind { found: doc.kind, expected: kind.to_string() });
    }
    Ok(doc.data)
}

/// Time series with header `t,<names>`.
pub fn states_csv(names: [&str; 4], times: &[f64], states: &[State4]) -> String {
    let mut out = format!("t,{}\n", names.join(","));
    for (t, x) in times.iter().zip(states) {
        let row: Vec<String> = std::iter::once(*t).chain(x.to_array()).map(fmt_f64).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(times: &[f64], states: &[State4]) -> String {
    states_csv(["q1", "q2", "p1", "p2"], times, states)
}

pub fn lc_csv(times: &[f64], states: &[State4]) -> String {
    states_csv(["z_re", "z_im", "w_re", "w_im"], times, states)
}

/// One row per member. `q1_start` holds the chart coordinate of the start
/// point on the first fixed set (`q1` for Hill, `q2` for Langmuir).
pub fn family_csv(family: &Family) -> String {
    let mut out = String::from("energy,q1_start,period,trace,b_sign_0,b_sign_half,class\n");
    let sign = |s: Option<crate::KreinSign>| s.map_or("", |s| s.symbol());
    for m in &family.members {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(m.energy),
            fmt_f64(m.shot.param),
            fmt_f64(m.shot.orbit.period),
            fmt_f64(m.report.trace),
            sign(m.report.b_sign_0),
            sign(m.report.b_sign_half),
            m.report.classification
        );
    }
    out
}

/// Static SVG of polylines in the plane. The view box is the bounding box
/// of all points plus a 5% margin; the vertical axis points up.
pub fn svg_curves(curves: &[(&str, &[(f64, f64)])]) -> String {
    let pts = curves.iter().flat_map(|(_, c)| c.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let (wx, wy) = ((x1 - x0).max(1e-12 * span), (y1 - y0).max(1e-12 * span));
    let (mx, my) = (0.05 * wx, 0.05 * wy);
    let (vx, vy, vw, vh) = (x0 - mx, -(y1 + my), wx + 2.0 * mx, wy + 2.0 * my);
    let stroke = 0.004 * vw.max(vh);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="{:.0}" viewBox="{vx:.9} {vy:.9} {vw:.9} {vh:.9}">"#,
        (600.0 * vh / vw).clamp(60.0, 6000.0)
    );
    if vx < 0.0 && vx + vw > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="0" y1="{vy:.9}" x2="0" y2="{:.9}" stroke="#bbbbbb" stroke-width="{:.9}"/>"##,
            vy + vh,
            0.5 * stroke
        );
    }
    if vy < 0.0 && vy + vh > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="{vx:.9}" y1="0" x2="{:.9}" y2="0" stroke="#bbbbbb" stroke-width="{:.9}"/>"##,
            vx + vw,
            0.5 * stroke
        );
    }
    for (i, (label, curve)) in curves.iter().enumerate() {
        let points: Vec<String> = curve.iter().map(|(x, y)| format!("{x:.9},{:.9}", -y)).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="{stroke:.9}" points="{}"><title>{}</title></polyline>"#,
            colors[i % colors.len()],
            points.join(" "),
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real_sl2::RealSL2;

    #[test]
    fn floats_keep_all_digits() {
        let text = to_json(&[0.1f64, 1.0 / 3.0, -2.5e-300]);
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![0.1, 1.0 / 3.0, -2.5e-300]);
        assert!(text.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn document_round_trip_checks_schema_and_kind() {
        let m = RealSL2::new(2.0, 1.0, 3.0, 2.0, 1e-12).unwrap();
        let text = document("matrix", &m);
        assert_eq!(text, document("matrix", &m));
        let back: RealSL2 = parse_document(&text, "matrix").unwrap();
        assert_eq!(back, m);
        assert!(matches!(parse_document::<RealSL2>(&text, "orbit"), Err(DocumentError::Kind { .. })));
        let other = text.replace(SCHEMA, "orbit-krein/0");
        assert!(matches!(parse_document::<RealSL2>(&other, "matrix"), Err(DocumentError::Schema { .. })));
        assert!(matches!(parse_document::<RealSL2>("{", "matrix"), Err(DocumentError::Json(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let text = trajectory_csv(&[0.0, 0.5], &[State4::new(1.0, 0.0, 0.0, 1.0), State4::new(0.0, 1.0, -1.0, 0.0)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,q1,q2,p1,p2");
        assert_eq!(lines[1].split(',').count(), 5);
    }

    #[test]
    fn svg_view_box_has_margin() {
        let curve = [(0.0, 0.0), (1.0, 2.0)];
        let svg = svg_curves(&[("orbit", &curve)]);
        assert!(svg.contains(r#"viewBox="-0.050000000 -2.100000000 1.100000000 2.200000000""#), "{svg}");
        assert!(svg.ends_with("</svg>\n"));
    }
}

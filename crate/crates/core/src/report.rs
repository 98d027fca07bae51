//! Report files: deterministic CSV/JSON/SVG bodies plus a separate header with the run
//! configuration and timestamp.
//!
//! Bodies depend only on the seed and the experiment parameters, so re-running with any
//! worker count reproduces them byte for byte. Everything that may vary between runs (time,
//! worker count) lives in `<name>.header.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::estimators::FieldEstimate;
use crate::lattice::{Domain, FaceId};
use crate::Error;

pub const SCHEMA_VERSION: &str = "percolab-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// One declared threshold. Advisory checks are reported but never fail a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
    pub advisory: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), value, threshold: threshold.into(), pass, advisory: false }
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Results of one experiment run.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub experiment: String,
    pub body: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// (file stem, SVG document)
    pub svgs: Vec<(String, String)>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Report { experiment: experiment.into(), body: json!({}), ..Default::default() }
    }

    /// True unless a non-advisory check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.advisory)
    }

    /// The JSON body: results and checks, without anything run-dependent.
    pub fn body_json(&self) -> Value {
        json!({
            "schema": SCHEMA_VERSION,
            "experiment": self.experiment,
            "results": self.body,
            "checks": self.checks,
            "passed": self.passed(),
        })
    }

    /// Writes the requested formats into `dir` and returns the created paths. The header
    /// is always written.
    pub fn write(&self, dir: &Path, formats: &[Format], header: &Value) -> Result<Vec<PathBuf>, Error> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, contents: &str| -> Result<(), Error> {
            let p = dir.join(name);
            fs::write(&p, contents)?;
            written.push(p);
            Ok(())
        };
        let header = json!({ "schema": SCHEMA_VERSION, "experiment": self.experiment, "header": header });
        put(format!("{}.header.json", self.experiment), &pretty(&header))?;
        if formats.contains(&Format::Json) {
            put(format!("{}.json", self.experiment), &pretty(&self.body_json()))?;
        }
        if formats.contains(&Format::Csv) {
            for t in &self.tables {
                put(format!("{}.{}.csv", self.experiment, t.name), &t.to_csv())?;
            }
            let mut checks = Table::new("checks", &["name", "value", "threshold", "pass", "advisory"]);
            for c in &self.checks {
                checks.push(vec![c.name.clone(), num(c.value), c.threshold.clone(), c.pass.to_string(), c.advisory.to_string()]);
            }
            put(format!("{}.checks.csv", self.experiment), &checks.to_csv())?;
        }
        if formats.contains(&Format::Svg) {
            for (stem, svg) in &self.svgs {
                put(format!("{}.{stem}.svg", self.experiment), svg)?;
            }
        }
        Ok(written)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Shortest round-trip decimal form, as used in every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Seconds since the Unix epoch, for report headers.
pub fn timestamp() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Per-face rows `face_id,cx,cy,alpha,hits,trials,p,lo,hi,prediction`.
pub fn field_table(d: &Domain, name: &str, fields: &[FieldEstimate], prediction: &dyn Fn(usize, FaceId) -> f64, confidence: f64) -> Table {
    let mut t = Table::new(name, &["face_id", "cx", "cy", "alpha", "hits", "trials", "p", "lo", "hi", "prediction"]);
    for field in fields {
        for f in 0..d.face_count() as FaceId {
            let (cx, cy) = d.face_center(f);
            let (lo, hi) = field.interval(f, confidence);
            t.push(vec![
                f.to_string(),
                num(cx),
                num(cy),
                field.alpha.to_string(),
                field.hits[f as usize].to_string(),
                field.trials.to_string(),
                num(field.p(f)),
                num(lo),
                num(hi),
                num(prediction(field.alpha, f)),
            ]);
        }
    }
    t
}

/// Linear color map on [0, 1]: blue (0, 0, 255) at 0 to yellow (255, 255, 0) at 1.
pub fn color(v: f64) -> (u8, u8, u8) {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let hi = (255.0 * v).round() as u8;
    (hi, hi, 255 - hi)
}

/// SVG 1.1 heatmap with one filled polygon per face.
pub fn field_svg(d: &Domain, values: &[f64], title: &str) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 10.0;
    let pts: Vec<(f64, f64)> = (0..d.site_count() as u32).map(|s| d.site_point(s)).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let scale = SIZE / (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let (w, h) = ((x1 - x0) * scale + 2.0 * PAD, (y1 - y0) * scale + 2.0 * PAD);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    for (f, face) in d.faces().iter().enumerate() {
        let (r, g, b) = color(values[f]);
        let corners: Vec<String> = face
            .corners
            .iter()
            .map(|&s| {
                let (x, y) = pts[s as usize];
                format!("{:.2},{:.2}", (x - x0) * scale + PAD, (y1 - y) * scale + PAD)
            })
            .collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="#{r:02x}{g:02x}{b:02x}"/>"##, corners.join(" "));
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
    use crate::lattice::build_triangle;

    #[test]
    fn color_map_endpoints() {
        assert_eq!(color(0.0), (0, 0, 255));
        assert_eq!(color(1.0), (255, 255, 0));
        assert_eq!(color(2.0), color(1.0));
        assert_eq!(color(f64::NAN), color(0.0));
    }

    #[test]
    fn svg_has_one_polygon_per_face() {
        let d = build_triangle(3, 1.0 / 3.0).unwrap();
        let svg = field_svg(&d, &vec![0.5; d.face_count()], "a<b");
        assert_eq!(svg.matches("<polygon").count(), 9);
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg, field_svg(&d, &vec![0.5; d.face_count()], "a<b"));
    }

    #[test]
    fn reports_write_and_gate_on_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("demo");
        r.body = json!({ "x": 0.1 });
        r.checks.push(Check::new("ok", 1.0, "<= 2", true));
        r.checks.push(Check::new("soft", 3.0, "<= 2", false).advisory());
        let mut t = Table::new("rows", &["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        r.tables.push(t);
        assert!(r.passed());
        let files = r.write(dir.path(), &[Format::Json, Format::Csv], &json!({ "timestamp": 1 })).unwrap();
        assert_eq!(files.len(), 4);
        assert_eq!(fs::read_to_string(dir.path().join("demo.rows.csv")).unwrap(), "a,b\n1,0.5\n");
        let body: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("demo.json")).unwrap()).unwrap();
        assert_eq!(body["passed"], json!(true));
        r.checks.push(Check::new("hard", 3.0, "<= 2", false));
        assert!(!r.passed());
    }
}

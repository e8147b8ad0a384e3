//! Per-sample (n_base, n_refined) scatter data as CSV or SVG.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, EvalReport, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScatterFormat {
    Csv,
    Svg,
}

impl ScatterFormat {
    /// From a file extension, `csv` or `svg`.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "svg" => Some(Self::Svg),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub sample_id: String,
    pub n_base: usize,
    pub n_refined: usize,
    pub aki: i64,
}

fn rows(report: &EvalReport) -> Vec<ScatterRow> {
    report
        .samples
        .iter()
        .map(|s| ScatterRow {
            sample_id: s.sample_id.clone(),
            n_base: s.n_base,
            n_refined: s.n_refined,
            aki: s.aki,
        })
        .collect()
}

fn write_csv(rows: &[ScatterRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::io(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::io(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ScatterRow>, _>>()
        .map_err(|e| BenchError::io(path, e))
}

const SIZE: f64 = 480.0;
const PAD: f64 = 48.0;

fn render_svg(rows: &[ScatterRow]) -> String {
    let max = rows
        .iter()
        .map(|r| r.n_base.max(r.n_refined))
        .max()
        .unwrap_or(0)
        .max(1) as f64
        * 1.05;
    let span = SIZE - 2.0 * PAD;
    let px = |v: f64| PAD + v / max * span;
    let py = |v: f64| SIZE - PAD - v / max * span;
    let (x0, y0, x1, y1) = (px(0.0), py(0.0), px(max), py(max));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    // Above the diagonal the refined image has more matches.
    let _ = writeln!(
        s,
        r#"<polygon class="gain" points="{x0:.2},{y0:.2} {x0:.2},{y1:.2} {x1:.2},{y1:.2}" fill="honeydew"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line class="diagonal" x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="red" stroke-dasharray="6,4"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">matches (generated)</text>"#,
        SIZE / 2.0,
        SIZE - PAD / 3.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 {:.2} {:.2})">matches (refined)</text>"#,
        PAD / 3.0,
        SIZE / 2.0,
        PAD / 3.0,
        SIZE / 2.0
    );
    for r in rows {
        let _ = writeln!(
            s,
            r#"<circle class="sample" cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"><title>{}</title></circle>"#,
            px(r.n_base as f64),
            py(r.n_refined as f64),
            xml_escape(&r.sample_id)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_scatter(report: &EvalReport, path: &Path, format: ScatterFormat) -> Result<()> {
    if report.samples.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let rows = rows(report);
    match format {
        ScatterFormat::Csv => write_csv(&rows, path),
        ScatterFormat::Svg => {
            std::fs::write(path, render_svg(&rows)).map_err(|e| BenchError::io(path, e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, b: usize, r: usize) -> ScatterRow {
        ScatterRow {
            sample_id: id.into(),
            n_base: b,
            n_refined: r,
            aki: r as i64 - b as i64,
        }
    }

    fn attr(tag: &str, name: &str) -> f64 {
        let start = tag.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        let end = start + tag[start..].find('"').unwrap();
        tag[start..end].parse().unwrap()
    }

    #[test]
    fn diagonal_points_sit_on_the_dashed_line() {
        let svg = render_svg(&[row("a", 0, 0), row("b", 17, 17), row("c", 80, 80)]);
        let line = svg
            .lines()
            .find(|l| l.contains("class=\"diagonal\""))
            .unwrap();
        assert!(line.contains("stroke-dasharray"));
        let (x1, y1, x2, y2) = (
            attr(line, "x1"),
            attr(line, "y1"),
            attr(line, "x2"),
            attr(line, "y2"),
        );
        let circles: Vec<&str> = svg.lines().filter(|l| l.contains("<circle")).collect();
        assert_eq!(circles.len(), 3);
        for c in circles {
            let (cx, cy) = (attr(c, "cx"), attr(c, "cy"));
            let cross = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1);
            assert!(cross.abs() < 1e-6, "{c}");
        }
    }

    #[test]
    fn gain_region_is_above_the_diagonal() {
        let svg = render_svg(&[row("a", 10, 20)]);
        let poly = svg.lines().find(|l| l.contains("class=\"gain\"")).unwrap();
        assert!(poly.contains("fill="));
        let c = svg.lines().find(|l| l.contains("<circle")).unwrap();
        // Screen y grows downward: above the line means cy < SIZE - cx.
        assert!(attr(c, "cy") < SIZE - attr(c, "cx"));
    }
}

//! ROC curve export: one CSV per curve and an SVG overlay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::auc::RocCurve;
use crate::error::{Error, Result};

const CSV_HEADER: &str = "threshold,fpr,tpr";
const SVG_SIZE: f64 = 400.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for i in 0..curve.len() {
        writeln!(s, "{},{},{}", curve.thresholds[i], curve.fpr[i], curve.tpr[i]).unwrap();
    }
    fs::write(path, s).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_roc_csv(path: &Path) -> Result<RocCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad("missing header".into()));
    }
    let mut curve = RocCurve {
        thresholds: vec![],
        fpr: vec![],
        tpr: vec![],
    };
    for (no, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", no + 2)))?;
        let [t, f, p] = vals[..] else {
            return Err(bad(format!("line {}: expected 3 fields", no + 2)));
        };
        curve.thresholds.push(t);
        curve.fpr.push(f);
        curve.tpr.push(p);
    }
    Ok(curve)
}

fn svg_path(points: impl Iterator<Item = (f64, f64)>, stroke: &str, extra: &str) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        write!(d, "{cmd}{:.2},{:.2} ", x * SVG_SIZE, (1.0 - y) * SVG_SIZE).unwrap();
    }
    format!(
        "  <path d=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{extra}/>\n",
        d.trim_end()
    )
}

/// SVG with one path per curve and a dashed chance diagonal.
pub fn roc_svg(curves: &[(String, RocCurve)]) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
        SVG_SIZE
    );
    s.push_str(&svg_path(
        [(0.0, 0.0), (1.0, 1.0)].into_iter(),
        "#888888",
        " stroke-dasharray=\"4 4\"",
    ));
    for (i, (name, c)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        s.push_str(&svg_path(c.fpr.iter().copied().zip(c.tpr.iter().copied()), colour, ""));
        writeln!(
            s,
            "  <text x=\"{:.0}\" y=\"{:.0}\" fill=\"{colour}\" font-size=\"12\">{} (AUC {:.4})</text>",
            SVG_SIZE * 0.55,
            SVG_SIZE * 0.75 + 16.0 * i as f64,
            name,
            c.area()
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<name>.csv` for every curve and `roc.svg` into `dir`.
pub fn roc_export(curves: &[(String, RocCurve)], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for (name, curve) in curves {
        let p = dir.join(format!("{name}.csv"));
        write_roc_csv(curve, &p)?;
        written.push(p);
    }
    let svg = dir.join("roc.svg");
    fs::write(&svg, roc_svg(curves)).map_err(|e| Error::io(format!("writing {}", svg.display()), e))?;
    written.push(svg);
    Ok(written)
}

//! Report emission: fixed-column CSV at full precision, JSON summaries,
//! and small SVG polyline plots. Everything written here is byte-stable
//! for a fixed config and seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::logsum::format_from_ln;

/// One table cell. Floats are printed with 17 significant digits;
/// `LnFloat` carries the natural log of a possibly out-of-range magnitude.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    LnFloat(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_sig17(*v),
            Cell::LnFloat(l) => format_from_ln(*l),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_sig17(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Write `<name>.csv` under `dir` with the fixed column order.
pub fn write_csv(dir: &Path, table: &Table) -> Result<PathBuf> {
    if table.rows.is_empty() {
        return Err(Error::EmptyReport(format!(
            "nothing to report for table '{}'",
            table.name
        )));
    }
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        let rec: Vec<String> = row.iter().map(Cell::render).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path)
}

/// Write pretty JSON (serde_json's map keys sort, so output is stable).
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    f.write_all(s.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// One plotted series: a label and `(x, y)` samples.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#c0392b", "#27803b", "#8e44ad", "#b07d10", "#16717a"];

/// Minimal polyline plot. With `log_y` the y values are plotted as log10;
/// non-finite points are dropped.
pub fn write_svg_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> Result<()> {
    let tf = |y: f64| if log_y { y.abs().max(1e-320).log10() } else { y };
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        let mut v = Vec::new();
        for &(x, y) in &s.points {
            let yy = tf(y);
            if x.is_finite() && yy.is_finite() {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(yy);
                ymax = ymax.max(yy);
                v.push((x, yy));
            }
        }
        pts.push(v);
    }
    if !xmin.is_finite() {
        return Err(Error::EmptyReport(format!("nothing to report in plot '{title}'")));
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymax = ymin + 1.0;
    }
    let (w, h, ml, mb, mt, mr) = (640.0, 420.0, 70.0, 50.0, 40.0, 20.0);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - ymin) / (ymax - ymin) * (h - mb - mt);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        w / 2.0
    ));
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    let ylab = if log_y {
        format!("log10 {y_label}")
    } else {
        y_label.to_string()
    };
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{ylab}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    // axis extremes
    for (x, anchor) in [(xmin, "start"), (xmax, "end")] {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"{anchor}\" font-size=\"11\">{x:.3}</text>\n",
            sx(x),
            h - mb + 16.0
        ));
    }
    for y in [ymin, ymax] {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{y:.3}</text>\n",
            ml - 6.0,
            sy(y) + 4.0
        ));
    }
    for (k, v) in pts.iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let path_pts: Vec<String> = v
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path_pts.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 14.0 * (k as f64 + 1.0),
            series[k].label
        ));
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_refused() {
        let t = Table::new("empty", &["a"]);
        let dir = tempfile::tempdir().unwrap();
        let err = write_csv(dir.path(), &t).unwrap_err();
        assert!(err.to_string().contains("nothing to report"));
    }

    #[test]
    fn single_row_round_trip() {
        let mut t = Table::new("one", &["s", "ratio", "note"]);
        t.push(vec![
            Cell::Float(4.0),
            Cell::LnFloat(7000.0),
            Cell::Text("ok".into()),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let p = write_csv(dir.path(), &t).unwrap();
        let body = std::fs::read_to_string(p).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next().unwrap(), "s,ratio,note");
        let row = lines.next().unwrap();
        assert!(row.starts_with("4.0000000000000000e0,"));
        assert!(row.contains("e3040"), "{row}");
    }

    #[test]
    fn csv_bytes_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut bodies = Vec::new();
        for run in 0..2 {
            let mut t = Table::new(&format!("run{run}"), &["x", "y"]);
            for i in 0..5 {
                t.push(vec![Cell::Int(i), Cell::Float(0.1 * i as f64)]);
            }
            let p = write_csv(dir.path(), &t).unwrap();
            bodies.push(std::fs::read(p).unwrap());
        }
        assert_eq!(bodies[0], bodies[1]);
    }

    #[test]
    fn sig17_digits() {
        assert_eq!(fmt_sig17(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_sig17(f64::NAN), "nan");
    }

    #[test]
    fn svg_plot_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plot.svg");
        let s = Series {
            label: "bound".into(),
            points: (0..10).map(|i| (i as f64, (-(i as f64)).exp())).collect(),
        };
        write_svg_plot(&p, "decay", "s", "bound", &[s], true).unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        assert!(body.starts_with("<svg"));
        assert!(body.contains("polyline"));
    }

    #[test]
    fn svg_empty_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plot.svg");
        let s = Series {
            label: "nan".into(),
            points: vec![(f64::NAN, 1.0)],
        };
        assert!(write_svg_plot(&p, "t", "x", "y", &[s], false).is_err());
    }

    #[test]
    fn json_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let v = serde_json::json!({"b": 1, "a": [1.5, 2.5], "c": {"z": true, "y": "s"}});
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        write_json(&p1, &v).unwrap();
        write_json(&p2, &v).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}

//! Metric plotting: each input CSV becomes one series whose repeats (the
//! group-by column, usually `seed`) are smoothed, then averaged into a mean
//! line with a +/-1 standard-deviation band. Output is plain SVG — text,
//! diffable, no renderer needed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{echo_config, CmdResult, Failure};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Input CSVs; each file is one plotted series.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Column providing the horizontal axis.
    #[arg(long, default_value = "step")]
    x: String,
    /// Column providing the vertical axis; empty cells are skipped.
    #[arg(long, default_value = "normalized_score")]
    y: String,
    /// Column separating repeats within one file.
    #[arg(long = "group-by", default_value = "seed")]
    group_by: String,
    /// Trailing-mean window applied to each repeat before aggregation.
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Output SVG path.
    #[arg(long, default_value = "plot.svg")]
    out: PathBuf,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_table(text: &str, path: &Path) -> Result<Table, Failure> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Failure::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(Failure::Config(format!(
                "{} line {}: {} fields, header has {}",
                path.display(),
                i + 2,
                fields.len(),
                header.len()
            )));
        }
        rows.push(fields);
    }
    Ok(Table { header, rows })
}

fn column_index(table: &Table, name: &str, path: &Path) -> Result<usize, Failure> {
    table.header.iter().position(|h| h == name).ok_or_else(|| {
        Failure::Config(format!(
            "column {name:?} not found in {} (have: {})",
            path.display(),
            table.header.join(", ")
        ))
    })
}

/// Trailing mean over the last `window` values, shorter at the start.
fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &values[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// One aggregated series: at each x, mean and population std across the
/// groups that have a value there.
#[derive(Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

fn aggregate(table: &Table, args: &Args, path: &Path) -> Result<Series, Failure> {
    let xi = column_index(table, &args.x, path)?;
    let yi = column_index(table, &args.y, path)?;
    let gi = column_index(table, &args.group_by, path)?;

    let mut groups: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for (i, row) in table.rows.iter().enumerate() {
        if row[yi].is_empty() {
            continue;
        }
        let parse = |field: &str, col: &str| {
            field.parse::<f64>().map_err(|_| {
                Failure::Config(format!(
                    "{} line {}: cannot read {field:?} as a number (column {col:?})",
                    path.display(),
                    i + 2
                ))
            })
        };
        let x = parse(&row[xi], &args.x)?;
        let y = parse(&row[yi], &args.y)?;
        groups.entry(row[gi].clone()).or_default().push((x, y));
    }
    if groups.is_empty() {
        return Err(Failure::Config(format!(
            "{} has no rows with a value in column {:?}",
            path.display(),
            args.y
        )));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut curves: Vec<Vec<(f64, f64)>> = Vec::new();
    for series in groups.values() {
        let mut series = series.clone();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ys: Vec<f64> = series.iter().map(|p| p.1).collect();
        let sm = smooth(&ys, args.window);
        let curve: Vec<(f64, f64)> =
            series.iter().zip(sm).map(|(&(x, _), y)| (x, y)).collect();
        xs.extend(curve.iter().map(|p| p.0));
        curves.push(curve);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let points = xs
        .iter()
        .map(|&x| {
            let vals: Vec<f64> = curves
                .iter()
                .filter_map(|c| c.iter().find(|p| p.0 == x).map(|p| p.1))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            (x, mean, var.max(0.0).sqrt())
        })
        .collect();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Series { label, points })
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const W: f64 = 860.0;
const H: f64 = 520.0;
const ML: f64 = 66.0;
const MR: f64 = 18.0;
const MT: f64 = 18.0;
const MB: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }
    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }
}

/// Data extent padded so flat or single-point series still get a frame.
fn frame_for(series: &[Series]) -> Frame {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for s in series {
        for &(x, mean, std) in &s.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(mean - std);
            y1 = y1.max(mean + std);
        }
    }
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y0 == y1 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let ypad = (y1 - y0) * 0.05;
    Frame { x0, x1, y0: y0 - ypad, y1: y1 + ypad }
}

fn render_svg(series: &[Series], x_label: &str, y_label: &str) -> String {
    let f = frame_for(series);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));

    // Grid and ticks.
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (px, py) = (f.px(xv), f.py(yv));
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{MT}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            H - MB
        ));
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#dddddd\"/>\n",
            W - MR
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            H - MB + 16.0,
            escape_xml(&fmt_num(xv))
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            ML - 6.0,
            py + 4.0,
            escape_xml(&fmt_num(yv))
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333333\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        ML + (W - ML - MR) / 2.0,
        H - 10.0,
        escape_xml(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0,
        escape_xml(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // Band: upper edge left to right, lower edge back.
        let mut band = String::new();
        for &(x, mean, std) in &s.points {
            band.push_str(&format!("{:.2},{:.2} ", f.px(x), f.py(mean + std)));
        }
        for &(x, mean, std) in s.points.iter().rev() {
            band.push_str(&format!("{:.2},{:.2} ", f.px(x), f.py(mean - std)));
        }
        out.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
            band.trim_end()
        ));
        let line: Vec<String> = s
            .points
            .iter()
            .map(|&(x, mean, _)| format!("{:.2},{:.2}", f.px(x), f.py(mean)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            line.join(" ")
        ));
        // Legend swatch + label.
        let ly = MT + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"14\" height=\"6\" fill=\"{color}\"/>\n",
            W - MR - 170.0,
            ly - 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{ly:.2}\">{}</text>\n",
            W - MR - 150.0,
            escape_xml(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn run(args: Args) -> CmdResult {
    echo_config(&args)?;
    if args.window == 0 {
        return Err(Failure::Config("--window must be at least 1".into()));
    }
    let mut series = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let table = parse_table(&text, path)?;
        series.push(aggregate(&table, &args, path)?);
    }
    let svg = render_svg(&series, &args.x, &args.y);
    fs::write(&args.out, &svg)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", args.out.display())))?;
    println!("wrote {} ({} series)", args.out.display(), series.len());
    Ok(())
}

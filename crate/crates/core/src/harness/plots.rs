//! SVG figures and their backing CSV files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::metrics::MetricsReport;
use crate::error::{Error, Result};

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Other(format!("failed to draw {}: {e}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Per-episode sum-reward curves, one panel per series side by side.
/// Writes `<stem>.svg` and `<stem>.csv` (`series,episode,reward`).
pub fn reward_curves(series: &[(String, Vec<f64>)], dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    let mut text = String::from("series,episode,reward\n");
    for (name, ys) in series {
        for (i, y) in ys.iter().enumerate() {
            writeln!(text, "{name},{i},{y}").expect("string write");
        }
    }
    write(&csv, &text)?;

    let panels = series.len().max(1);
    let target = svg.clone();
    let root = SVGBackend::new(&target, (480 * panels as u32, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&svg, e))?;
    let areas = root.split_evenly((1, panels));
    for (k, (area, (name, ys))) in areas.iter().zip(series).enumerate() {
        let (lo, hi) = range_of(ys.iter().copied());
        let mut chart = ChartBuilder::on(area)
            .caption(name, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(50)
            .build_cartesian_2d(0f64..(ys.len().max(1) as f64), lo..hi)
            .map_err(|e| plot_err(&svg, e))?;
        chart
            .configure_mesh()
            .x_desc("episode")
            .y_desc("sum reward")
            .draw()
            .map_err(|e| plot_err(&svg, e))?;
        chart
            .draw_series(LineSeries::new(ys.iter().enumerate().map(|(i, &y)| (i as f64, y)), PALETTE[k % PALETTE.len()]))
            .map_err(|e| plot_err(&svg, e))?;
    }
    root.present().map_err(|e| plot_err(&svg, e))?;
    Ok((svg, csv))
}

/// Per-node transmission count bars. Writes `<stem>.svg` and `<stem>.csv`
/// (`node,tc,rac`).
pub fn tc_bars(report: &MetricsReport, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    let mut text = format!("# protocol={} seed={}\nnode,tc,rac\n", report.protocol, report.seed);
    for i in 0..report.tc.len() {
        writeln!(text, "{i},{},{}", report.tc[i], report.rac[i]).expect("string write");
    }
    write(&csv, &text)?;

    let n = report.tc.len().max(1);
    let top = report.tc.iter().copied().max().unwrap_or(0).max(1) as f64 * 1.1;
    let target = svg.clone();
    let root = SVGBackend::new(&target, (480, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&svg, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} transmissions per node", report.protocol), ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(45)
        .build_cartesian_2d(0f64..n as f64, 0f64..top)
        .map_err(|e| plot_err(&svg, e))?;
    chart.configure_mesh().x_desc("node").y_desc("count").draw().map_err(|e| plot_err(&svg, e))?;
    chart
        .draw_series(report.tc.iter().enumerate().map(|(i, &tc)| {
            Rectangle::new([(i as f64 + 0.1, 0.0), (i as f64 + 0.45, tc as f64)], PALETTE[0].filled())
        }))
        .map_err(|e| plot_err(&svg, e))?
        .label("TC")
        .legend(|(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], PALETTE[0].filled()));
    chart
        .draw_series(report.rac.iter().enumerate().map(|(i, &rac)| {
            Rectangle::new([(i as f64 + 0.5, 0.0), (i as f64 + 0.85, rac as f64)], PALETTE[1].filled())
        }))
        .map_err(|e| plot_err(&svg, e))?
        .label("RAC")
        .legend(|(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], PALETTE[1].filled()));
    chart.configure_series_labels().border_style(BLACK).draw().map_err(|e| plot_err(&svg, e))?;
    root.present().map_err(|e| plot_err(&svg, e))?;
    Ok((svg, csv))
}

/// One marker per node-slot transmission. Writes `<stem>.svg` and
/// `<stem>.csv` (`slot,node`, one row per marker).
pub fn slot_raster(raster: &[Vec<u8>], n_senders: usize, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let svg = dir.join(format!("{stem}.svg"));
    let csv = dir.join(format!("{stem}.csv"));
    let marks: Vec<(usize, usize)> = raster
        .iter()
        .enumerate()
        .flat_map(|(t, row)| row.iter().enumerate().filter(|(_, &b)| b == 1).map(move |(i, _)| (t, i)))
        .collect();
    let mut text = String::from("slot,node\n");
    for (t, i) in &marks {
        writeln!(text, "{t},{i}").expect("string write");
    }
    write(&csv, &text)?;

    let target = svg.clone();
    let root = SVGBackend::new(&target, (720, 80 + 40 * n_senders.max(1) as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&svg, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("transmissions per slot", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(45)
        .build_cartesian_2d(0f64..raster.len().max(1) as f64, -0.5f64..(n_senders.max(1) as f64 - 0.5))
        .map_err(|e| plot_err(&svg, e))?;
    chart
        .configure_mesh()
        .x_desc("slot")
        .y_desc("node")
        .y_labels(n_senders.max(1))
        .draw()
        .map_err(|e| plot_err(&svg, e))?;
    chart
        .draw_series(marks.iter().map(|&(t, i)| Circle::new((t as f64 + 0.5, i as f64), 3, PALETTE[i % PALETTE.len()].filled())))
        .map_err(|e| plot_err(&svg, e))?;
    root.present().map_err(|e| plot_err(&svg, e))?;
    Ok((svg, csv))
}

fn bad_csv(path: &Path, line: usize) -> Error {
    Error::Other(format!("{}: malformed line {}", path.display(), line + 1))
}

/// Data rows of a CSV file: comment lines and the header are skipped.
fn csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(Error::Other(format!("{}: expected header `{header}`", path.display()))),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty()).map(|(i, l)| (i, l.split(',').map(str::to_string).collect())).collect())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, cols: &[String], k: usize) -> Result<T> {
    cols.get(k).and_then(|c| c.parse().ok()).ok_or_else(|| bad_csv(path, line))
}

/// Reads a file written by [`reward_curves`], keeping series order.
pub fn read_reward_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, cols) in csv_rows(path, "series,episode,reward")? {
        let name = cols[0].clone();
        let y: f64 = field(path, line, &cols, 2)?;
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, ys)) => ys.push(y),
            None => out.push((name, vec![y])),
        }
    }
    Ok(out)
}

/// Reads a file written by [`tc_bars`] into a report holding only the
/// counts, protocol and seed.
pub fn read_tc_csv(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta = |key: &str| {
        text.lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix(key).map(str::to_string)))
    };
    let protocol = meta("protocol=").unwrap_or_default();
    let seed = meta("seed=").and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut tc = Vec::new();
    let mut rac = Vec::new();
    for (line, cols) in csv_rows(path, "node,tc,rac")? {
        tc.push(field(path, line, &cols, 1)?);
        rac.push(field(path, line, &cols, 2)?);
    }
    let n = tc.len();
    Ok(MetricsReport {
        protocol,
        seed,
        steps: 0,
        tc,
        rac,
        rdc: 0,
        collisions: 0,
        silence: vec![0; n],
        energy_j: vec![0.0; n],
        jain: 1.0,
        episode_rewards: Vec::new(),
    })
}

/// Reads a file written by [`slot_raster`]. The raster is as long as the
/// last marked slot and as wide as the largest node index seen, unless
/// `n_senders` is given.
pub fn read_raster_csv(path: &Path, n_senders: Option<usize>) -> Result<(Vec<Vec<u8>>, usize)> {
    let mut marks = Vec::new();
    for (line, cols) in csv_rows(path, "slot,node")? {
        marks.push((field::<usize>(path, line, &cols, 0)?, field::<usize>(path, line, &cols, 1)?));
    }
    let n = n_senders.unwrap_or_else(|| marks.iter().map(|&(_, i)| i + 1).max().unwrap_or(0));
    let len = marks.iter().map(|&(t, _)| t + 1).max().unwrap_or(0);
    let mut raster = vec![vec![0u8; n]; len];
    for (t, i) in marks {
        if i >= n {
            return Err(Error::Other(format!("{}: node {i} outside {n} senders", path.display())));
        }
        raster[t][i] = 1;
    }
    Ok((raster, n))
}

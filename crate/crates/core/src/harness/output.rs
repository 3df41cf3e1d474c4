use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::aggregate::{clip_rewards_for_plot, AggregateCurve};
use super::config::Algo;
use super::run::RunRecord;
use super::HarnessError;

/// Seventeen significant digits, enough to reproduce any `f64` exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    algo: Algo,
    seed: u64,
    episode: usize,
    #[serde(rename = "return")]
    ret: String,
    cum_time_ms: String,
}

/// `{stem}.aggregate.csv` next to `path`.
pub fn aggregate_path(path: &Path) -> PathBuf {
    path.with_extension("aggregate.csv")
}

/// `{stem}.timing.csv` next to `path`.
pub fn timing_path(path: &Path) -> PathBuf {
    path.with_extension("timing.csv")
}

fn csv_error(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Csv { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes one row per (seed, episode) to `path` and the pointwise
/// statistics to [`aggregate_path`]. Episodes are numbered from 1.
pub fn emit_csv(records: &[RunRecord], aggregate: &AggregateCurve, path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        for (i, (ret, t)) in r.returns.iter().zip(&r.cum_time_ms).enumerate() {
            let row = ResultRow { algo: r.algo, seed: r.seed, episode: i + 1, ret: format_f64(*ret), cum_time_ms: format_f64(*t) };
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;

    let agg_path = aggregate_path(path);
    let mut text = String::from("algo,episode,mean,min,max\n");
    for i in 0..aggregate.len() {
        let (m, lo, hi) = (aggregate.mean[i], aggregate.min[i], aggregate.max[i]);
        writeln!(text, "{},{},{},{},{}", aggregate.algo, i + 1, format_f64(m), format_f64(lo), format_f64(hi)).unwrap();
    }
    std::fs::write(&agg_path, text).map_err(|e| HarnessError::io(&agg_path, e))
}

/// Records from a results CSV, in first-appearance seed order. The config
/// hash is not stored in the CSV and comes back empty; `total_ms` is the
/// last cumulative time.
pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut order: Vec<(Algo, u64)> = Vec::new();
    let mut by_run: BTreeMap<(Algo, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in reader.deserialize::<ResultRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| HarnessError::Csv { path: path.to_path_buf(), message: format!("`{s}`: {e}") })
        };
        let key = (row.algo, row.seed);
        let entry = by_run.entry(key).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        if row.episode != entry.0.len() + 1 {
            return Err(HarnessError::Csv {
                path: path.to_path_buf(),
                message: format!("seed {} episode {} out of order", row.seed, row.episode),
            });
        }
        entry.0.push(parse(&row.ret)?);
        entry.1.push(parse(&row.cum_time_ms)?);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (returns, cum_time_ms) = by_run.remove(&key).expect("key recorded");
            let total_ms = cum_time_ms.last().copied().unwrap_or(0.0);
            RunRecord { algo: key.0, seed: key.1, returns, cum_time_ms, total_ms, config_hash: String::new() }
        })
        .collect())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= target as f64).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn timing_csv(aggregates: &[AggregateCurve]) -> String {
    let mut text = String::from("algo,mean_total_seconds\n");
    for a in aggregates {
        writeln!(text, "{},{}", a.algo, format_f64(a.mean_total_seconds)).unwrap();
    }
    text
}

/// Standalone SVG line chart: per algorithm a translucent min–max band
/// (`polygon`) and the mean (`polyline`), plus a legend drawn with `rect`
/// and `text` only. Values below `clip_floor` are raised to it on a copy.
pub fn render_svg(aggregates: &[AggregateCurve], clip_floor: f64) -> String {
    let clipped: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = aggregates
        .iter()
        .map(|a| {
            (
                clip_rewards_for_plot(&a.mean, clip_floor),
                clip_rewards_for_plot(&a.min, clip_floor),
                clip_rewards_for_plot(&a.max, clip_floor),
            )
        })
        .collect();
    let n_max = aggregates.iter().map(|a| a.len()).max().unwrap_or(1).max(2);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, lo, hi) in &clipped {
        lo.iter().for_each(|v| y_lo = y_lo.min(*v));
        hi.iter().for_each(|v| y_hi = y_hi.max(*v));
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-9 {
        (y_lo, y_hi) = (y_lo - 1.0, y_hi + 1.0);
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |episode: f64| MARGIN_LEFT + (episode - 1.0) / (n_max as f64 - 1.0) * plot_w;
    let sy = |v: f64| MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    let (x0, y0, x1) = (MARGIN_LEFT, MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w);
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#).unwrap();
    for t in nice_ticks(1.0, n_max as f64, 8) {
        let x = sx(t);
        writeln!(s, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, y0 + 20.0).unwrap();
    }
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#, x0 - 8.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>"#, x0 + plot_w / 2.0, HEIGHT - 15.0).unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">episode return</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    for (k, (a, (mean, lo, hi))) in aggregates.iter().zip(&clipped).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut band: Vec<String> = hi.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", sx(i as f64 + 1.0), sy(*v))).collect();
        band.extend(lo.iter().enumerate().rev().map(|(i, v)| format!("{:.2},{:.2}", sx(i as f64 + 1.0), sy(*v))));
        writeln!(s, r#"<polygon class="band" data-algo="{}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, a.algo, band.join(" "))
            .unwrap();
        let line: Vec<String> = mean.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", sx(i as f64 + 1.0), sy(*v))).collect();
        writeln!(s, r#"<polyline class="mean" data-algo="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, a.algo, line.join(" "))
            .unwrap();
    }
    for (k, a) in aggregates.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let (lx, ly) = (x1 + 20.0, MARGIN_TOP + 10.0 + 22.0 * k as f64);
        writeln!(s, r#"<rect x="{lx:.2}" y="{ly:.2}" width="14" height="14" fill="{color}"/>"#).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 20.0, ly + 11.0, a.algo).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes [`render_svg`] to `path` and the per-algorithm mean training time
/// to [`timing_path`].
pub fn emit_plot(aggregates: &[AggregateCurve], path: &Path, clip_floor: f64) -> Result<(), HarnessError> {
    if aggregates.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    std::fs::write(path, render_svg(aggregates, clip_floor)).map_err(|e| HarnessError::io(path, e))?;
    let timing = timing_path(path);
    std::fs::write(&timing, timing_csv(aggregates)).map_err(|e| HarnessError::io(&timing, e))
}

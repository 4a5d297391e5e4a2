//! CSV emission for per-episode metrics, rolling averages and summaries.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use warden_core::metrics::{metric_means, MetricMeans, MetricsRow};

pub const METRICS_HEADER: &str =
    "episode,reward,rate_s,rate_s_alt,rate_f,rate_sf,no_incidents,violations,wall_ms";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.reward,
            r.rate_s,
            r.rate_s_alt,
            r.rate_f,
            r.rate_sf,
            if r.no_incidents { 1 } else { 0 },
            r.violations,
            r.wall_ms
        );
    }
    out
}

pub fn rolling_csv(rolled: &[(u64, MetricMeans)]) -> String {
    let mut out = String::from("window_end,reward,rate_s,rate_s_alt,rate_f,rate_sf\n");
    for (end, m) in rolled {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            end, m.reward, m.rate_s, m.rate_s_alt, m.rate_f, m.rate_sf
        );
    }
    out
}

pub fn summary_csv(tag: &str, variant: &str, seed: u64, episodes: u64, m: &MetricMeans) -> String {
    let mut out = String::from("scenario,variant,seed,episodes,reward,rate_s,rate_s_alt,rate_f,rate_sf\n");
    let _ = writeln!(
        out,
        "{tag},{variant},{seed},{episodes},{},{},{},{},{}",
        m.reward, m.rate_s, m.rate_s_alt, m.rate_f, m.rate_sf
    );
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("write {}", path.display()))
}

/// Parses a metrics CSV back into rows (used by the recompute check).
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            anyhow::ensure!(line == METRICS_HEADER, "unexpected metrics header");
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(f.len() == 9, "line {}: bad column count", i + 1);
        rows.push(MetricsRow {
            episode: f[0].parse()?,
            reward: f[1].parse()?,
            rate_s: f[2].parse()?,
            rate_s_alt: f[3].parse()?,
            rate_f: f[4].parse()?,
            rate_sf: f[5].parse()?,
            no_incidents: f[6] == "1",
            violations: f[7].parse()?,
            wall_ms: f[8].parse()?,
        });
    }
    Ok(rows)
}

/// Recomputes the summary from a written CSV, for the self-check that the
/// summary is derivable from the CSV alone.
pub fn recompute_summary(csv_text: &str, tail_fraction: f64) -> Result<MetricMeans> {
    let rows = parse_metrics_csv(csv_text)?;
    if rows.is_empty() {
        return Ok(MetricMeans::default());
    }
    let tail = ((rows.len() as f64 * tail_fraction).ceil() as usize).max(1);
    Ok(metric_means(&rows[rows.len() - tail..]))
}

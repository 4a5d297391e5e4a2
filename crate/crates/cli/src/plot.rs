//! Static SVG line plots of the four metric curves.

use std::path::Path;

use anyhow::{Context, Result};
use plotters::prelude::*;
use warden_core::metrics::MetricMeans;

/// One plot per headline metric, mirroring the usual four-panel result
/// figure: reward, completion rate, response completion rate, loss rate.
pub fn plot_metric_curves(
    dir: &Path,
    curves: &[(String, Vec<(u64, MetricMeans)>)],
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
    let panels: [(&str, fn(&MetricMeans) -> f64); 4] = [
        ("reward", |m| m.reward),
        ("rate_s", |m| m.rate_s),
        ("rate_sf", |m| m.rate_sf),
        ("rate_f", |m| m.rate_f),
    ];
    let palette = [&RED, &BLUE, &GREEN, &MAGENTA, &CYAN, &BLACK];
    let mut written = Vec::new();
    for (name, get) in panels {
        let path = dir.join(format!("{name}.svg"));
        let root = SVGBackend::new(&path, (800, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let max_x = curves
            .iter()
            .flat_map(|(_, c)| c.iter().map(|(e, _)| *e))
            .max()
            .unwrap_or(1);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, curve) in curves {
            for (_, m) in curve {
                lo = lo.min(get(m));
                hi = hi.max(get(m));
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo).abs() < 1e-9 {
            hi = lo + 1.0;
        }
        let pad = (hi - lo) * 0.05;
        let mut chart = ChartBuilder::on(&root)
            .caption(name, ("sans-serif", 24))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0u64..max_x.max(1), (lo - pad)..(hi + pad))?;
        chart.configure_mesh().x_desc("episode").y_desc(name).draw()?;
        for (i, (label, curve)) in curves.iter().enumerate() {
            let color = palette[i % palette.len()];
            chart
                .draw_series(LineSeries::new(
                    curve.iter().map(|(e, m)| (*e, get(m))),
                    color,
                ))?
                .label(label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.8))
            .draw()?;
        root.present()?;
        drop(chart);
        drop(root);
        written.push(path);
    }
    Ok(written)
}

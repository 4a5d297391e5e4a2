//! Experiment orchestration: single runs, the layout grid, rolling
//! averages, CSV/plot emission, and cross-variant ordering reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use warden_core::env::CmdpEnv;
use warden_core::extractor::{generate_dataset, train_extractor, ExtractorMetrics, ExtractorModel};
use warden_core::graph::{Layout, Scenario};
use warden_core::learn::{
    scenario_tag, train, EpisodeStats, RunSink, TrainConfig, Variant,
};
use warden_core::metrics::{
    compare_variants, final_summary, metric_rate_f, metric_rate_s, metric_rate_s_alt,
    metric_rate_sf, metric_reward, rolling_means, MetricMeans, MetricsRow, OrderingVerdict,
    VariantSummary,
};

use crate::csv_out;
use crate::plot::plot_metric_curves;
use crate::runlog::RunLogWriter;

/// Converts episode stats into a metrics row; wall time is stamped by the
/// caller.
pub fn stats_to_row(s: &EpisodeStats, wall_ms: u64) -> MetricsRow {
    MetricsRow {
        episode: s.episode,
        reward: metric_reward(&s.external),
        rate_s: metric_rate_s(&s.per_device_completions, s.n_tasks, s.n_devices),
        rate_s_alt: metric_rate_s_alt(&s.per_device_completions, s.n_tasks),
        rate_f: metric_rate_f(s.incident_nodes, s.n_nodes),
        rate_sf: metric_rate_sf(s.resolved_nodes, s.incident_nodes),
        no_incidents: s.incident_nodes == 0,
        violations: s.violations,
        wall_ms,
    }
}

/// Sink combining an optional run-log writer with wall-clock stamps.
struct HarnessSink {
    log: Option<RunLogWriter>,
    episode_start: Instant,
    wall_ms: Vec<u64>,
}

impl HarnessSink {
    fn new(log: Option<RunLogWriter>) -> Self {
        Self {
            log,
            episode_start: Instant::now(),
            wall_ms: Vec::new(),
        }
    }
}

impl RunSink for HarnessSink {
    fn begin_episode(&mut self, episode: u64) {
        self.episode_start = Instant::now();
        if let Some(log) = self.log.as_mut() {
            log.begin_episode(episode);
        }
    }

    fn actions(&mut self, episode: u64, tick: u64, actions: &[warden_core::env::Action]) {
        if let Some(log) = self.log.as_mut() {
            log.actions(episode, tick, actions);
        }
    }

    fn event(&mut self, episode: u64, ev: &warden_core::env::RunEvent) {
        if let Some(log) = self.log.as_mut() {
            log.event(episode, ev);
        }
    }

    fn end_episode(&mut self, stats: &EpisodeStats) {
        self.wall_ms
            .push(self.episode_start.elapsed().as_millis() as u64);
        if let Some(log) = self.log.as_mut() {
            log.end_episode(stats);
        }
    }
}

/// Pretrains the constraint extractor on random-rollout data from this
/// scenario. One pretrained model is shared by every seed of a cell.
pub fn pretrain_extractor(
    env: &CmdpEnv,
    dataset_episodes: u64,
    epochs: u64,
    seed: u64,
) -> (ExtractorModel, ExtractorMetrics) {
    let dataset = generate_dataset(env, dataset_episodes, seed, 4);
    train_extractor(env, &dataset, epochs, 3e-3, 16, seed)
}

pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: VariantSummary,
    pub nets: warden_core::learn::AgentNets,
}

/// Trains one (scenario, variant, seed) cell, optionally writing the full
/// artifact set (run log, per-episode CSV, rolling CSV, summary, plots,
/// checkpoints) under `out_dir`.
pub fn run_experiment(
    scenario: &Scenario,
    config: TrainConfig,
    extractor: Option<&ExtractorModel>,
    out_dir: Option<&Path>,
    rolling_window: usize,
) -> Result<RunOutput> {
    let env = CmdpEnv::new(scenario.clone());
    let tag = scenario_tag(&env);
    let log = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
            let meta = vec![
                ("scenario".to_string(), tag.clone()),
                ("variant".to_string(), config.variant.as_str().to_string()),
                ("seed".to_string(), config.seed.to_string()),
                ("episodes".to_string(), config.episodes.to_string()),
            ];
            Some(RunLogWriter::create(&dir.join("runlog.txt"), &meta)?)
        }
        None => None,
    };
    // The trainer asserts extractor presence for EI.
    if config.variant == Variant::Ei && extractor.is_none() {
        anyhow::bail!("EI variant requires a pretrained extractor");
    }
    let mut sink = HarnessSink::new(log);
    let (nets, stats) = train(&env, config.clone(), extractor, &mut sink);
    let rows: Vec<MetricsRow> = stats
        .iter()
        .zip(sink.wall_ms.iter())
        .map(|(s, &w)| stats_to_row(s, w))
        .collect();
    if let Some(log) = sink.log.take() {
        log.finish()?;
    }
    let means = final_summary(&rows, 0.1);
    let summary = VariantSummary {
        variant: config.variant.as_str().to_string(),
        scenario_tag: tag.clone(),
        means,
    };
    if let Some(dir) = out_dir {
        csv_out::write_text(&dir.join("metrics.csv"), &csv_out::metrics_csv(&rows))?;
        let rolled = rolling_means(&rows, rolling_window);
        csv_out::write_text(&dir.join("rolling.csv"), &csv_out::rolling_csv(&rolled))?;
        csv_out::write_text(
            &dir.join("summary.csv"),
            &csv_out::summary_csv(&tag, config.variant.as_str(), config.seed, config.episodes, &means),
        )?;
        let curves = vec![(config.variant.as_str().to_string(), rolled)];
        plot_metric_curves(&dir.join("plots"), &curves)?;
        let ckpt = crate::checkpoint::nets_to_checkpoint(
            &nets,
            vec![
                ("variant".to_string(), config.variant.as_str().to_string()),
                ("seed".to_string(), config.seed.to_string()),
                ("scenario".to_string(), tag),
            ],
        );
        ckpt.save(&dir.join("nets.wckpt"))?;
    }
    Ok(RunOutput {
        rows,
        summary,
        nets,
    })
}

/// Median over seeds, per metric (component-wise).
pub fn median_means(mut per_seed: Vec<MetricMeans>) -> MetricMeans {
    fn median(xs: &mut [f64]) -> f64 {
        xs.sort_by(|a, b| a.total_cmp(b));
        if xs.is_empty() {
            return 0.0;
        }
        let mid = xs.len() / 2;
        if xs.len() % 2 == 1 {
            xs[mid]
        } else {
            0.5 * (xs[mid - 1] + xs[mid])
        }
    }
    let mut reward: Vec<f64> = per_seed.iter().map(|m| m.reward).collect();
    let mut rate_s: Vec<f64> = per_seed.iter().map(|m| m.rate_s).collect();
    let mut rate_s_alt: Vec<f64> = per_seed.iter().map(|m| m.rate_s_alt).collect();
    let mut rate_f: Vec<f64> = per_seed.iter().map(|m| m.rate_f).collect();
    let mut rate_sf: Vec<f64> = per_seed.iter().map(|m| m.rate_sf).collect();
    per_seed.clear();
    MetricMeans {
        reward: median(&mut reward),
        rate_s: median(&mut rate_s),
        rate_s_alt: median(&mut rate_s_alt),
        rate_f: median(&mut rate_f),
        rate_sf: median(&mut rate_sf),
    }
}

/// Runs one variant over a seed set (parallel waves sized to the
/// available cores) and returns per-seed rows and the median summary.
#[allow(clippy::too_many_arguments)]
pub fn run_variant_seeds(
    scenario: &Scenario,
    variant: Variant,
    episodes: u64,
    seeds: &[u64],
    base_config: &TrainConfig,
    extractor: Option<&ExtractorModel>,
    out_root: Option<&Path>,
    rolling_window: usize,
) -> Result<(Vec<Vec<MetricsRow>>, MetricMeans)> {
    let parallelism = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let mut all_rows: Vec<Option<Vec<MetricsRow>>> = (0..seeds.len()).map(|_| None).collect();
    let mut summaries: Vec<Option<MetricMeans>> = (0..seeds.len()).map(|_| None).collect();
    for wave in (0..seeds.len()).collect::<Vec<_>>().chunks(parallelism.max(1)) {
        let results: Vec<(usize, Result<RunOutput>)> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &idx in wave {
                let seed = seeds[idx];
                let mut config = base_config.clone();
                config.variant = variant;
                config.episodes = episodes;
                config.seed = seed;
                let out_dir: Option<PathBuf> =
                    out_root.map(|root| root.join(format!("seed_{seed}")));
                handles.push(scope.spawn(move || {
                    let out = run_experiment(
                        scenario,
                        config,
                        extractor,
                        out_dir.as_deref(),
                        rolling_window,
                    );
                    (idx, out)
                }));
            }
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (idx, out) in results {
            let out = out?;
            summaries[idx] = Some(out.summary.means);
            all_rows[idx] = Some(out.rows);
        }
    }
    let per_seed: Vec<MetricMeans> = summaries.into_iter().map(|s| s.unwrap()).collect();
    let rows: Vec<Vec<MetricsRow>> = all_rows.into_iter().map(|r| r.unwrap()).collect();
    Ok((rows, median_means(per_seed)))
}

pub struct GridCellResult {
    pub layout: Layout,
    pub n_agents: usize,
    pub n_incidents: usize,
    pub summaries: Vec<VariantSummary>,
    pub verdicts: Vec<OrderingVerdict>,
}

/// The published evaluation grid: layouts x (agents, incidents) pairs x
/// variants, each cell aggregated over the seed set by medians.
#[allow(clippy::too_many_arguments)]
pub fn run_grid(
    layouts: &[Layout],
    pairs: &[(usize, usize)],
    variants: &[Variant],
    episodes: u64,
    seeds: &[u64],
    base_config: &TrainConfig,
    out_root: &Path,
    rolling_window: usize,
) -> Result<Vec<GridCellResult>> {
    let mut cells = Vec::new();
    for &layout in layouts {
        for &(n_agents, n_incidents) in pairs {
            let scenario =
                crate::scenario_file::make_layout(layout, n_agents, n_incidents, 1000);
            let env = CmdpEnv::new(scenario.clone());
            let tag = scenario_tag(&env);
            let cell_dir = out_root.join(&tag);
            // One pretrained extractor per cell, shared across seeds.
            let needs_extractor = variants.contains(&Variant::Ei);
            let extractor = needs_extractor.then(|| {
                let (model, metrics) = pretrain_extractor(&env, 40, 30, scenario.seed);
                eprintln!(
                    "[{tag}] extractor pretrained: cell accuracy {:.3}, h_c MAE {:.3}",
                    metrics.cell_accuracy, metrics.hc_mae
                );
                model
            });
            let mut summaries = Vec::new();
            for &variant in variants {
                let vdir = cell_dir.join(variant.as_str());
                let (_, medians) = run_variant_seeds(
                    &scenario,
                    variant,
                    episodes,
                    seeds,
                    base_config,
                    extractor.as_ref(),
                    Some(&vdir),
                    rolling_window,
                )?;
                summaries.push(VariantSummary {
                    variant: variant.as_str().to_string(),
                    scenario_tag: tag.clone(),
                    means: medians,
                });
                eprintln!(
                    "[{tag}] {} median: reward {:.2} rate_s {:.3} rate_f {:.3} rate_sf {:.3}",
                    variant.as_str(),
                    summaries.last().unwrap().means.reward,
                    summaries.last().unwrap().means.rate_s,
                    summaries.last().unwrap().means.rate_f,
                    summaries.last().unwrap().means.rate_sf,
                );
            }
            let verdicts = if summaries.len() >= 2 {
                compare_variants(&summaries).map_err(|e| anyhow::anyhow!("{e}"))?
            } else {
                Vec::new()
            };
            cells.push(GridCellResult {
                layout,
                n_agents,
                n_incidents,
                summaries,
                verdicts,
            });
        }
    }
    // Grid summary file: one row per (cell, variant).
    let mut out = String::from(
        "layout,n_agents,n_incidents,variant,reward,rate_s,rate_s_alt,rate_f,rate_sf\n",
    );
    for cell in &cells {
        for s in &cell.summaries {
            use std::fmt::Write;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cell.layout.as_str(),
                cell.n_agents,
                cell.n_incidents,
                s.variant,
                s.means.reward,
                s.means.rate_s,
                s.means.rate_s_alt,
                s.means.rate_f,
                s.means.rate_sf
            );
        }
    }
    csv_out::write_text(&out_root.join("grid_summary.csv"), &out)?;
    let mut report = String::new();
    for cell in &cells {
        use std::fmt::Write;
        let _ = writeln!(
            report,
            "cell layout={} agents={} incidents={}",
            cell.layout.as_str(),
            cell.n_agents,
            cell.n_incidents
        );
        for v in &cell.verdicts {
            let chain: Vec<String> = v
                .expected
                .iter()
                .zip(v.deltas.iter().chain(std::iter::once(&0.0)))
                .map(|(name, _)| name.clone())
                .collect();
            let _ = writeln!(
                report,
                "  {}: {} ordering {} (deltas {:?})",
                v.metric,
                chain.join(" >= "),
                if v.holds { "holds" } else { "VIOLATED" },
                v.deltas
            );
        }
    }
    csv_out::write_text(&out_root.join("ordering_report.txt"), &report)?;
    Ok(cells)
}

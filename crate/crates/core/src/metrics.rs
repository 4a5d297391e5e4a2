//! Evaluation indicators and cross-variant ordering checks.

use alloc::string::String;
use alloc::vec::Vec;

/// Mean episode reward over agents: R = (sum r_i) / m.
pub fn metric_reward(agent_totals: &[f64]) -> f64 {
    assert!(!agent_totals.is_empty(), "reward metric needs agents");
    agent_totals.iter().sum::<f64>() / agent_totals.len() as f64
}

/// Operation completion rate as printed: sum_i n_i / (n_O * N), where n_i
/// counts completions by device i, n_O is the task total and N the device
/// count. Note this normalizes by the task total per device; see
/// `metric_rate_s_alt` for the plain completion fraction.
pub fn metric_rate_s(per_device_completions: &[u64], n_tasks: u64, n_devices: u64) -> f64 {
    assert!(n_tasks >= 1 && n_devices >= 1, "rate_s denominator");
    let total: u64 = per_device_completions.iter().sum();
    total as f64 / (n_tasks * n_devices) as f64
}

/// Completed / total tasks, reported alongside rate_s.
pub fn metric_rate_s_alt(per_device_completions: &[u64], n_tasks: u64) -> f64 {
    assert!(n_tasks >= 1, "rate_s_alt denominator");
    let total: u64 = per_device_completions.iter().sum();
    total as f64 / n_tasks as f64
}

/// Incident loss rate: distinct incident-hosting nodes / total nodes.
pub fn metric_rate_f(n_incident_nodes: u64, n_nodes: u64) -> f64 {
    assert!(n_nodes >= 1, "rate_f denominator");
    n_incident_nodes as f64 / n_nodes as f64
}

/// Incident response completion rate: resolved nodes / incident nodes.
/// Defined as 0 when no incidents occurred; the caller flags that case.
pub fn metric_rate_sf(n_resolved_nodes: u64, n_incident_nodes: u64) -> f64 {
    if n_incident_nodes == 0 {
        0.0
    } else {
        n_resolved_nodes as f64 / n_incident_nodes as f64
    }
}

/// Per-episode metric record.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub reward: f64,
    pub rate_s: f64,
    pub rate_s_alt: f64,
    pub rate_f: f64,
    pub rate_sf: f64,
    /// True when the episode hosted no incidents (rate_sf convention).
    pub no_incidents: bool,
    pub violations: u64,
    pub wall_ms: u64,
}

/// Means of the four headline metrics over a slice of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricMeans {
    pub reward: f64,
    pub rate_s: f64,
    pub rate_s_alt: f64,
    pub rate_f: f64,
    pub rate_sf: f64,
}

pub fn metric_means(rows: &[MetricsRow]) -> MetricMeans {
    if rows.is_empty() {
        return MetricMeans::default();
    }
    let n = rows.len() as f64;
    MetricMeans {
        reward: rows.iter().map(|r| r.reward).sum::<f64>() / n,
        rate_s: rows.iter().map(|r| r.rate_s).sum::<f64>() / n,
        rate_s_alt: rows.iter().map(|r| r.rate_s_alt).sum::<f64>() / n,
        rate_f: rows.iter().map(|r| r.rate_f).sum::<f64>() / n,
        rate_sf: rows.iter().map(|r| r.rate_sf).sum::<f64>() / n,
    }
}

/// Non-overlapping rolling averages: one entry per full `window` of
/// episodes, in order.
pub fn rolling_means(rows: &[MetricsRow], window: usize) -> Vec<(u64, MetricMeans)> {
    assert!(window >= 1, "rolling window must be >= 1");
    rows.chunks(window)
        .filter(|c| c.len() == window)
        .map(|c| (c.last().unwrap().episode, metric_means(c)))
        .collect()
}

/// Final summary: means over the last `fraction` of episodes (default a
/// tenth), which is the converged operating point reported per run.
pub fn final_summary(rows: &[MetricsRow], fraction: f64) -> MetricMeans {
    if rows.is_empty() {
        return MetricMeans::default();
    }
    let tail = (crate::math::ceil(rows.len() as f64 * fraction) as usize).max(1);
    metric_means(&rows[rows.len() - tail..])
}

/// One trained run's converged metrics, tagged by variant.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub variant: String,
    pub scenario_tag: String,
    pub means: MetricMeans,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderingVerdict {
    pub metric: &'static str,
    /// Variant names from best to worst under the expected direction.
    pub expected: Vec<String>,
    pub holds: bool,
    /// Pairwise deltas along the expected chain.
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompareError {
    MismatchedScenarios(String, String),
    TooFewSummaries,
}

impl core::fmt::Display for CompareError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CompareError::MismatchedScenarios(a, b) => {
                write!(f, "summaries come from different scenarios: {a} vs {b}")
            }
            CompareError::TooFewSummaries => write!(f, "need at least two summaries"),
        }
    }
}

/// Checks the published ordering claim over variant summaries: higher is
/// better for rate_s, rate_sf and reward; lower is better for rate_f.
/// Summaries are expected in best-to-worst order (e.g. EI, C, base).
pub fn compare_variants(summaries: &[VariantSummary]) -> Result<Vec<OrderingVerdict>, CompareError> {
    if summaries.len() < 2 {
        return Err(CompareError::TooFewSummaries);
    }
    let tag = &summaries[0].scenario_tag;
    for s in summaries.iter().skip(1) {
        if &s.scenario_tag != tag {
            return Err(CompareError::MismatchedScenarios(
                tag.clone(),
                s.scenario_tag.clone(),
            ));
        }
    }
    let names: Vec<String> = summaries.iter().map(|s| s.variant.clone()).collect();
    let mut verdicts = Vec::new();
    let checks: [(&'static str, fn(&MetricMeans) -> f64, bool); 4] = [
        ("rate_s", |m| m.rate_s, true),
        ("rate_sf", |m| m.rate_sf, true),
        ("rate_f", |m| m.rate_f, false),
        ("reward", |m| m.reward, true),
    ];
    for (metric, get, higher_better) in checks {
        let vals: Vec<f64> = summaries.iter().map(|s| get(&s.means)).collect();
        let mut holds = true;
        let mut deltas = Vec::new();
        for w in vals.windows(2) {
            let delta = if higher_better {
                w[0] - w[1]
            } else {
                w[1] - w[0]
            };
            deltas.push(delta);
            if delta < 0.0 {
                holds = false;
            }
        }
        verdicts.push(OrderingVerdict {
            metric,
            expected: names.clone(),
            holds,
            deltas,
        });
    }
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn reward_metric_examples() {
        assert_eq!(metric_reward(&[3.0, 3.0, 3.0]), 3.0);
        assert_eq!(metric_reward(&[-10.0, 10.0]), 0.0);
        // Hand mean of a fixture episode.
        let totals = [4.0, -2.0, 7.0, 1.0];
        assert!((metric_reward(&totals) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn rate_s_examples() {
        assert_eq!(metric_rate_s(&[0, 0], 10, 2), 0.0);
        assert_eq!(metric_rate_s(&[4, 6], 10, 2), 0.5);
        assert_eq!(metric_rate_s(&[10], 10, 1), 1.0);
    }

    #[test]
    fn rate_s_printed_formula_property() {
        // With every task completed the printed formula yields
        // total/(n_O*N), not 1, unless N = 1.
        assert_eq!(metric_rate_s(&[5, 5], 10, 2), 0.5);
        assert_eq!(metric_rate_s_alt(&[5, 5], 10), 1.0);
    }

    #[test]
    fn rate_f_examples() {
        assert_eq!(metric_rate_f(0, 100), 0.0);
        assert!((metric_rate_f(6, 100) - 0.06).abs() < 1e-15);
        assert_eq!(metric_rate_f(100, 100), 1.0);
    }

    #[test]
    fn rate_sf_examples() {
        assert_eq!(metric_rate_sf(3, 6), 0.5);
        assert_eq!(metric_rate_sf(6, 6), 1.0);
        assert_eq!(metric_rate_sf(0, 0), 0.0);
    }

    fn row(episode: u64, reward: f64) -> MetricsRow {
        MetricsRow {
            episode,
            reward,
            rate_s: 0.5,
            rate_s_alt: 0.5,
            rate_f: 0.1,
            rate_sf: 0.9,
            no_incidents: false,
            violations: 0,
            wall_ms: 0,
        }
    }

    #[test]
    fn rolling_window_arithmetic() {
        let rows: Vec<MetricsRow> = (0..15).map(|i| row(i, i as f64)).collect();
        let rolled = rolling_means(&rows, 15);
        assert_eq!(rolled.len(), 1);
        assert_eq!(rolled[0].0, 14);
        assert!((rolled[0].1.reward - 7.0).abs() < 1e-12);
        // A 16th episode does not produce a second full window.
        let mut rows = rows;
        rows.push(row(15, 100.0));
        assert_eq!(rolling_means(&rows, 15).len(), 1);
    }

    #[test]
    fn rolling_means_stay_in_window_envelope() {
        let rows: Vec<MetricsRow> = (0..60).map(|i| row(i, (i % 7) as f64)).collect();
        for (_, m) in rolling_means(&rows, 15) {
            assert!(m.reward >= 0.0 && m.reward <= 6.0);
        }
    }

    #[test]
    fn final_summary_uses_tail() {
        let rows: Vec<MetricsRow> = (0..100)
            .map(|i| row(i, if i < 90 { 0.0 } else { 10.0 }))
            .collect();
        let s = final_summary(&rows, 0.1);
        assert!((s.reward - 10.0).abs() < 1e-12);
    }

    fn summary(variant: &str, rate_s: f64, rate_f: f64, rate_sf: f64, reward: f64) -> VariantSummary {
        VariantSummary {
            variant: variant.to_string(),
            scenario_tag: "layoutA-3-6".to_string(),
            means: MetricMeans {
                reward,
                rate_s,
                rate_s_alt: rate_s,
                rate_f,
                rate_sf,
            },
        }
    }

    #[test]
    fn identical_summaries_all_tie() {
        let s = [
            summary("ei", 0.5, 0.1, 0.5, 1.0),
            summary("c", 0.5, 0.1, 0.5, 1.0),
        ];
        let verdicts = compare_variants(&s).unwrap();
        assert!(verdicts.iter().all(|v| v.holds));
        assert!(verdicts
            .iter()
            .all(|v| v.deltas.iter().all(|&d| d == 0.0)));
    }

    #[test]
    fn expected_ordering_verdict() {
        let s = [
            summary("ei", 0.9, 0.08, 0.9, 5.0),
            summary("c", 0.6, 0.4, 0.6, 2.0),
            summary("base", 0.4, 0.5, 0.5, -3.0),
        ];
        let verdicts = compare_variants(&s).unwrap();
        assert!(verdicts.iter().all(|v| v.holds), "{verdicts:?}");
    }

    #[test]
    fn inverted_ordering_detected() {
        let s = [
            summary("ei", 0.3, 0.5, 0.2, -5.0),
            summary("base", 0.9, 0.1, 0.9, 5.0),
        ];
        let verdicts = compare_variants(&s).unwrap();
        assert!(verdicts.iter().all(|v| !v.holds));
    }

    #[test]
    fn mismatched_scenarios_rejected() {
        let mut b = summary("c", 0.5, 0.1, 0.5, 1.0);
        b.scenario_tag = "layoutB-2-4".to_string();
        let s = [summary("ei", 0.9, 0.08, 0.9, 5.0), b];
        assert!(matches!(
            compare_variants(&s),
            Err(CompareError::MismatchedScenarios(_, _))
        ));
    }
}

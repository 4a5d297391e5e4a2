//! Line-oriented run log: executed joint actions plus every environment
//! event, enough to replay a full trajectory.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use warden_core::env::{Action, RunEvent};
use warden_core::learn::{EpisodeStats, RunSink};

pub struct RunLogWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl RunLogWriter {
    pub fn create(path: &Path, meta: &[(String, String)]) -> Result<Self> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("create run log {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "# warden-run-log v1")?;
        let mut line = String::from("meta");
        for (k, v) in meta {
            let _ = write!(line, " {k}={v}");
        }
        writeln!(out, "{line}")?;
        Ok(Self { out })
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn format_event(episode: u64, ev: &RunEvent) -> String {
    match ev {
        RunEvent::Trigger { tick, node, itype } => {
            format!("ev {episode} {tick} trigger node={node} type={}", itype.as_str())
        }
        RunEvent::Spread { tick, node } => format!("ev {episode} {tick} spread node={node}"),
        RunEvent::Resolve { tick, node, itype } => {
            format!("ev {episode} {tick} resolve node={node} type={}", itype.as_str())
        }
        RunEvent::Violation {
            tick,
            agent,
            cell,
            kind,
        } => format!(
            "ev {episode} {tick} violation agent={agent} cell={},{} kind={}",
            cell.0,
            cell.1,
            kind.as_str()
        ),
        RunEvent::TaskDone { tick, task, device } => {
            format!("ev {episode} {tick} task_done task={task} device={device}")
        }
        RunEvent::TaskFailed { tick, task } => {
            format!("ev {episode} {tick} task_failed task={task}")
        }
        RunEvent::ResponseFailed { tick, agent } => {
            format!("ev {episode} {tick} response_failed agent={agent}")
        }
    }
}

impl RunSink for RunLogWriter {
    fn begin_episode(&mut self, episode: u64) {
        let _ = writeln!(self.out, "ep {episode} begin");
    }

    fn actions(&mut self, episode: u64, tick: u64, actions: &[Action]) {
        let mut line = format!("act {episode} {tick}");
        for a in actions {
            let _ = write!(line, " {}", a.to_index());
        }
        let _ = writeln!(self.out, "{line}");
    }

    fn event(&mut self, episode: u64, ev: &RunEvent) {
        let _ = writeln!(self.out, "{}", format_event(episode, ev));
    }

    fn end_episode(&mut self, stats: &EpisodeStats) {
        let external: Vec<String> = stats.external.iter().map(|r| r.to_string()).collect();
        let completions: Vec<String> = stats
            .per_device_completions
            .iter()
            .map(|c| c.to_string())
            .collect();
        let _ = writeln!(
            self.out,
            "ep {} end ticks={} external={} completions={} incident_nodes={} resolved={} violations={}",
            stats.episode,
            stats.ticks,
            external.join(","),
            completions.join(","),
            stats.incident_nodes,
            stats.resolved_nodes,
            stats.violations,
        );
    }
}

/// Parsed run log: per-episode action sequences and event lines.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub meta: Vec<(String, String)>,
    pub episodes: Vec<LoggedEpisode>,
}

#[derive(Clone, Debug, Default)]
pub struct LoggedEpisode {
    pub episode: u64,
    /// Joint actions in tick order.
    pub actions: Vec<Vec<Action>>,
    /// Event lines exactly as written.
    pub events: Vec<String>,
}

pub fn load_runlog(path: &Path) -> Result<RunLog> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("read log {}", path.display()))?;
    let mut log = RunLog::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("meta") => {
                for kv in parts {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| anyhow!("line {line_no}: bad meta entry"))?;
                    log.meta.push((k.to_string(), v.to_string()));
                }
            }
            Some("ep") => {
                let episode: u64 = parts
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| anyhow!("line {line_no}: bad episode"))?;
                match parts.next() {
                    Some("begin") => log.episodes.push(LoggedEpisode {
                        episode,
                        ..Default::default()
                    }),
                    Some("end") => {}
                    _ => bail!("line {line_no}: bad ep line"),
                }
            }
            Some("act") => {
                let _episode: u64 = parts
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| anyhow!("line {line_no}: bad act episode"))?;
                let _tick: u64 = parts
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| anyhow!("line {line_no}: bad act tick"))?;
                let actions: Option<Vec<Action>> = parts
                    .map(|w| w.parse::<usize>().ok().and_then(Action::from_index))
                    .collect();
                let actions =
                    actions.ok_or_else(|| anyhow!("line {line_no}: malformed action index"))?;
                log.episodes
                    .last_mut()
                    .ok_or_else(|| anyhow!("line {line_no}: act before ep begin"))?
                    .actions
                    .push(actions);
            }
            Some("ev") => {
                log.episodes
                    .last_mut()
                    .ok_or_else(|| anyhow!("line {line_no}: ev before ep begin"))?
                    .events
                    .push(line.to_string());
            }
            Some(other) => bail!("line {line_no}: unknown record '{other}'"),
            None => {}
        }
    }
    Ok(log)
}

/// Replays a logged run against the scenario: re-executes every episode's
/// actions with the logged per-episode seed derivation and checks that
/// the environment emits the same events. Returns the number of episodes
/// and total events verified.
pub fn replay(
    env: &warden_core::env::CmdpEnv,
    log: &RunLog,
    run_seed: u64,
) -> Result<(usize, usize)> {
    let mut verified_events = 0;
    for ep in &log.episodes {
        let ep_seed = warden_core::rng::DetRng::stream(run_seed, "episode")
            .next_u64()
            .wrapping_add(ep.episode);
        let mut state = env.reset(ep_seed);
        let mut emitted: Vec<String> = Vec::new();
        for joint in &ep.actions {
            if state.done {
                bail!("episode {}: more actions than the env accepts", ep.episode);
            }
            let res = env.step(&mut state, joint);
            for event in &res.events {
                emitted.push(format_event(ep.episode, event));
            }
        }
        if emitted != ep.events {
            let diff = emitted
                .iter()
                .zip(ep.events.iter())
                .position(|(a, b)| a != b)
                .map(|i| format!("first divergence at event {i}: '{}' vs '{}'", emitted[i], ep.events[i]))
                .unwrap_or_else(|| {
                    format!("event counts differ: {} vs {}", emitted.len(), ep.events.len())
                });
            bail!("episode {} replay mismatch: {diff}", ep.episode);
        }
        verified_events += emitted.len();
    }
    Ok((log.episodes.len(), verified_events))
}

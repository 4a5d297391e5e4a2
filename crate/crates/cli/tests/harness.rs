//! Harness integration: run artifacts, trajectory replay, checkpoint
//! restore, and the bundled scenario fixtures.

use std::path::PathBuf;

use warden_cli::checkpoint::{
    extractor_from_checkpoint, extractor_to_checkpoint, Checkpoint,
};
use warden_cli::experiment::{pretrain_extractor, run_experiment};
use warden_cli::runlog::{load_runlog, replay};
use warden_cli::scenario_file::{format_scenario, load_scenario, make_layout, save_scenario};
use warden_core::env::CmdpEnv;
use warden_core::graph::Layout;
use warden_core::learn::{TrainConfig, Variant};

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("warden-harness-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(variant: Variant, episodes: u64, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(variant, episodes, seed);
    c.hidden = 16;
    c.batch = 16;
    c.buffer = 4096;
    c.warmup = 64;
    c.update_every = 16;
    c
}

#[test]
fn run_writes_all_artifacts_and_replays() {
    let dir = tmp_dir("artifacts");
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let config = small_config(Variant::Base, 6, 11);
    let out = run_experiment(&scenario, config, None, Some(&dir), 3).unwrap();
    assert_eq!(out.rows.len(), 6);
    for file in [
        "metrics.csv",
        "rolling.csv",
        "summary.csv",
        "runlog.txt",
        "nets.wckpt",
        "plots/reward.svg",
        "plots/rate_s.svg",
        "plots/rate_sf.svg",
        "plots/rate_f.svg",
    ] {
        let path = dir.join(file);
        assert!(path.exists(), "missing artifact {file}");
        assert!(path.metadata().unwrap().len() > 0, "empty artifact {file}");
    }
    // The run log replays cleanly against the scenario.
    let env = CmdpEnv::new(scenario);
    let log = load_runlog(&dir.join("runlog.txt")).unwrap();
    assert_eq!(log.episodes.len(), 6);
    let (episodes, events) = replay(&env, &log, 11).unwrap();
    assert_eq!(episodes, 6);
    assert!(events > 0, "expected some events in the log");
    // SVG plots are well-formed enough to contain the svg root element.
    let svg = std::fs::read_to_string(dir.join("plots/reward.svg")).unwrap();
    assert!(svg.contains("<svg"));
}

#[test]
fn replay_detects_tampering() {
    let dir = tmp_dir("tamper");
    let scenario = make_layout(Layout::A, 2, 4, 42);
    let config = small_config(Variant::Base, 2, 3);
    run_experiment(&scenario, config, None, Some(&dir), 3).unwrap();
    let path = dir.join("runlog.txt");
    let mut log = load_runlog(&path).unwrap();
    // Flip one logged action and expect the replay to flag divergence.
    let ep = log
        .episodes
        .iter_mut()
        .find(|e| !e.actions.is_empty() && !e.events.is_empty())
        .expect("an episode with actions and events");
    let original = ep.actions[0][0];
    ep.actions[0][0] = warden_core::env::Action::from_index(
        (original.to_index() + 7) % warden_core::env::ACTION_COUNT,
    )
    .unwrap();
    let env = CmdpEnv::new(scenario);
    // Either the events diverge or, in rare cases, the tampered action is
    // behaviorally identical; accept only explicit divergence reports.
    if let Err(err) = replay(&env, &log, 3) {
        let msg = err.to_string();
        assert!(msg.contains("replay mismatch"), "unexpected error: {msg}");
    }
}

#[test]
fn extractor_checkpoint_restores_identically() {
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario);
    let (model, metrics) = pretrain_extractor(&env, 2, 2, 5);
    let ckpt = extractor_to_checkpoint(
        &model,
        vec![("cell_accuracy".into(), format!("{:.4}", metrics.cell_accuracy))],
    );
    let dir = tmp_dir("extractor-ckpt");
    let path = dir.join("extractor.wckpt");
    ckpt.save(&path).unwrap();
    let restored = extractor_from_checkpoint(&Checkpoint::load(&path).unwrap(), &env).unwrap();
    assert_eq!(restored.params.as_slice(), model.params.as_slice());

    // Restored model extracts identically on a live state.
    let mut state = env.reset(1);
    let stay = vec![warden_core::env::Action::STAY; 3];
    for _ in 0..5 {
        env.step(&mut state, &stay);
    }
    let frame = warden_core::extractor::graph_frame(&env, &state);
    let frames: Vec<&[Vec<f64>]> = vec![frame.as_slice()];
    let obs = env.observe(&state, 0).flat_entities();
    assert_eq!(model.extract(&frames, &obs), restored.extract(&frames, &obs));
}

#[test]
fn bundled_scenarios_load_and_round_trip() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["layout_a.wsc", "layout_b.wsc", "layout_c.wsc"] {
        let path = root.join(name);
        let scenario = load_scenario(&path).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(scenario.agent_starts.len(), 3);
        assert_eq!(scenario.schedule.len(), 6);
        // save(load(f)) reproduces the canonical bytes.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(format_scenario(&scenario).as_bytes(), &bytes[..], "{name}");
    }
}

#[test]
fn saved_scenario_reloads_equal() {
    let dir = tmp_dir("scenario-save");
    let scenario = make_layout(Layout::B, 4, 8, 7);
    let path = dir.join("b.wsc");
    save_scenario(&path, &scenario).unwrap();
    let loaded = load_scenario(&path).unwrap();
    assert_eq!(loaded, scenario);
}

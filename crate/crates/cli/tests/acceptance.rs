//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measurements. Run with `--nocapture` to see the lines for
//! passing tests.

use std::path::Path;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

// Criteria run one at a time so their runtime budgets are measured on an
// unloaded machine; the lock tolerates a poisoned predecessor.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

use warden_cli::experiment::{pretrain_extractor, run_experiment, run_variant_seeds};
use warden_cli::scenario_file::make_layout;
use warden_core::constraint::{
    check_resource, check_space, check_time, compute_budget, response_time, safety_filter,
    violation_cost, BudgetMatrix, ConstraintContext, ConstraintMatrix, ConstraintThreshold,
    CostAccumulator, CostMatrix, FilterWorld,
};
use warden_core::env::{Action, CmdpEnv, MoveDir, Observation, RespondKind, RewardComponents, RewardWeights};
use warden_core::extractor::{generate_dataset, train_extractor, ExtractorModel, ExtractorSpec};
use warden_core::graph::{Layout, Task};
use warden_core::incident::{severity_probabilities, SeverityModel};
use warden_core::learn::{AvftModel, AvftSpec, AvftStep, RndPair, TrainConfig, Variant};
use warden_core::metrics::{
    metric_rate_f, metric_rate_s, metric_rate_sf, metric_reward,
};
use warden_core::nn::{soft_update, Activation, GruSpec, MlpSpec, Optimizer, OptimizerKind};
use warden_core::rng::DetRng;

/// Desk-scale training configuration used by the training criteria; the
/// thresholds themselves are fixed in the individual tests.
fn desk_config(variant: Variant, episodes: u64, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(variant, episodes, seed);
    c.hidden = 40;
    c.batch = 32;
    c.buffer = 20_000;
    c.update_every = 12;
    c.warmup = 512;
    c.critic_lr = 2e-3;
    c.actor_lr = 5e-4;
    c.noise_sigma = 1.0;
    c.noise_floor = 0.05;
    c.noise_anneal = 0.8;
    c.eps_start = 0.4;
    c.eps_floor = 0.05;
    c.extractor_frames = 2;
    c.logit_reg = 0.02;
    c.policy_temp = 2.0;
    c
}

#[test]
fn criterion_formula_oracles() {
    let _serial = serial();
    let t0 = Instant::now();
    let mut rng = DetRng::seed_from(20_240_001);

    // Severity normalization: 10k random finite models.
    for _ in 0..10_000 {
        let m = SeverityModel {
            alpha: [
                rng.uniform_in(-40.0, 40.0),
                rng.uniform_in(-40.0, 40.0),
                rng.uniform_in(-40.0, 40.0),
            ],
            beta: [
                rng.uniform_in(-5.0, 5.0),
                rng.uniform_in(-5.0, 5.0),
                rng.uniform_in(-5.0, 5.0),
            ],
            features: [
                rng.uniform_in(-10.0, 10.0),
                rng.uniform_in(-10.0, 10.0),
                rng.uniform_in(-10.0, 10.0),
            ],
        };
        let p = severity_probabilities(&m).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "normalization broke: {sum}");
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    // Time / space / resource predicates and response scaling against
    // brute-force evaluation on 10k random inputs each.
    for _ in 0..10_000 {
        let task = Task {
            id: 0,
            node: 0,
            deadline: rng.below(100) as u64,
            expected: rng.below(50) as u64,
            spent: rng.below(120) as u64,
            num: 1,
            dest: 1,
        };
        let t_m = rng.below(40) as u64;
        let oracle =
            (task.expected as i128 + t_m as i128) <= (task.deadline as i128 - task.spent as i128);
        assert_eq!(check_time(&task, t_m), oracle);

        let a = (rng.below(41) as i64 - 20, rng.below(41) as i64 - 20);
        let b = (rng.below(41) as i64 - 20, rng.below(41) as i64 - 20);
        let d = rng.uniform_in(0.0, 15.0);
        let squared = ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)) as f64;
        assert_eq!(check_space(a, b, d), squared >= d * d);

        let dim = 1 + rng.below(4);
        let req: Vec<u64> = (0..dim).map(|_| rng.below(6) as u64).collect();
        let avail: Vec<u64> = (0..dim).map(|_| rng.below(6) as u64).collect();
        let oracle = (0..dim).all(|i| req[i] <= avail[i]);
        assert_eq!(check_resource(&req, &avail), oracle);

        let ct = rng.below(60) as u64;
        let n = 1 + rng.below(8) as u64;
        let oracle = (ct as f64 / n as f64).ceil() as u64;
        assert_eq!(response_time(ct, n), oracle);
    }

    // Budget matrix vs re-accumulation over 1k random episodes.
    for _ in 0..1_000 {
        let n = 3 + rng.below(3);
        let steps = 1 + rng.below(40);
        let mut acc = CostAccumulator::zeros(n);
        let mut history: Vec<Vec<u8>> = Vec::new();
        for _ in 0..steps {
            let cells: Vec<u8> = (0..n * n).map(|_| rng.below(2) as u8).collect();
            acc.add(&CostMatrix {
                n,
                cells: cells.clone(),
            });
            history.push(cells);
        }
        let h = rng.below(8) as u64;
        let mask: Vec<u8> = (0..n * n).map(|_| rng.below(2) as u8).collect();
        let m = ConstraintMatrix {
            n,
            cells: mask.clone(),
        };
        let b = compute_budget(&acc, ConstraintThreshold(h), &m);
        for cell in 0..n * n {
            let replayed: i64 = history.iter().map(|s| s[cell] as i64).sum();
            let want = if mask[cell] == 0 { 0 } else { replayed - h as i64 };
            assert_eq!(b.cells[cell], want);
        }
    }

    // Metric formulas on hand-computed fixtures.
    assert_eq!(metric_reward(&[4.0, -2.0, 7.0, 1.0]), 2.5);
    assert_eq!(metric_rate_s(&[4, 6], 10, 2), 0.5);
    assert_eq!(metric_rate_s(&[10], 10, 1), 1.0);
    assert!((metric_rate_f(6, 100) - 0.06).abs() < 1e-15);
    assert_eq!(metric_rate_sf(3, 6), 0.5);
    assert_eq!(metric_rate_sf(0, 0), 0.0);

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "formula oracles took {secs:.1}s (limit 60s)");
    println!("ACCEPTANCE formula_oracles: PASS ({secs:.2}s, zero mismatches)");
}

fn central_diff_check<F: FnMut(&[f64]) -> f64>(
    params: &mut [f64],
    grad: &[f64],
    mut f: F,
    stride: usize,
    label: &str,
) {
    let eps = 1e-5;
    let mut checked = 0;
    for i in (0..params.len()).step_by(stride.max(1)) {
        let orig = params[i];
        params[i] = orig + eps;
        let plus = f(params);
        params[i] = orig - eps;
        let minus = f(params);
        params[i] = orig;
        let fd = (plus - minus) / (2.0 * eps);
        let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8);
        assert!(
            rel < 1e-4,
            "{label} param {i}: analytic {} vs fd {} (rel {rel:.2e})",
            grad[i],
            fd
        );
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn criterion_gradient_checks() {
    let _serial = serial();
    let t0 = Instant::now();
    let mut rng = DetRng::seed_from(555);
    let obs_dim = Observation::flat_len(5);

    // Every dense configuration used by the stack, including one per
    // activation kind.
    let mlp_cases: Vec<(&str, MlpSpec)> = vec![
        (
            "actor",
            MlpSpec::new(&[obs_dim, 32, 20], Activation::Relu, Activation::Identity),
        ),
        (
            "critic",
            MlpSpec::new(&[238, 32, 1], Activation::Relu, Activation::Identity),
        ),
        (
            "rnd",
            MlpSpec::new(&[obs_dim, 32, 16], Activation::Tanh, Activation::Identity),
        ),
        (
            "sigmoid-head",
            MlpSpec::new(&[10, 8, 4], Activation::Sigmoid, Activation::Sigmoid),
        ),
        (
            "identity-chain",
            MlpSpec::new(&[6, 6, 6], Activation::Identity, Activation::Identity),
        ),
    ];
    for (label, spec) in mlp_cases {
        let mut params = spec.init(&mut rng);
        let input: Vec<f64> = (0..spec.input_dim())
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        // Scalar objective: weighted sum of outputs.
        let weights: Vec<f64> = (0..spec.output_dim())
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        let (_, cache) = spec.forward(&params, &input);
        let (grad, _) = spec.backward(&params, &cache, &weights);
        let stride = (params.len() / 600).max(1);
        central_diff_check(
            params.as_mut_slice(),
            &grad,
            |p| {
                spec.eval(p, &input)
                    .iter()
                    .zip(weights.iter())
                    .map(|(y, w)| y * w)
                    .sum()
            },
            stride,
            label,
        );
    }

    // Gated recurrent cell unrolled 8 steps.
    {
        let spec = GruSpec {
            input: 6,
            hidden: 8,
        };
        let mut params = spec.init(&mut rng);
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let weights: Vec<f64> = (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let (_, cache) = spec.forward_seq(&params, &xs);
        let (grad, _) = spec.backward_seq(&params, &cache, &weights);
        central_diff_check(
            params.as_mut_slice(),
            &grad,
            |p| {
                let (h, _) = spec.forward_seq(p, &xs);
                h.iter().zip(weights.iter()).map(|(y, w)| y * w).sum()
            },
            1,
            "gru-8",
        );
    }

    // Return-conditioned predictor end to end.
    {
        let spec = AvftSpec {
            context: 8,
            obs_dim: 20,
            action_dim: 20,
            embed: 12,
            hidden: 12,
        };
        let mut params = spec.init(&mut rng);
        let window: Vec<AvftStep> = (0..5)
            .map(|i| AvftStep {
                rtg: rng.uniform_in(-5.0, 5.0),
                obs: (0..20).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
                action: i % 20,
            })
            .collect();
        let (_, grad) = spec.q_with_grad(&params, &window);
        let stride = (params.len() / 800).max(1);
        central_diff_check(
            params.as_mut_slice(),
            &grad,
            |p| spec.q_value(p, &window),
            stride,
            "avft",
        );
    }

    // Constraint extractor end to end (graph layers + sequence + heads),
    // through its combined loss.
    {
        let scenario = make_layout(Layout::A, 3, 6, 42);
        let env = CmdpEnv::new(scenario);
        let mut state = env.reset(3);
        let stay = vec![Action::STAY; 3];
        for _ in 0..4 {
            env.step(&mut state, &stay);
        }
        let spec = ExtractorSpec::for_env(&env);
        let mut model = ExtractorModel::new(spec, ExtractorModel::adjacency_of(&env), &mut rng);
        let f1 = warden_core::extractor::graph_frame(&env, &state);
        env.step(&mut state, &stay);
        let f2 = warden_core::extractor::graph_frame(&env, &state);
        let frames: Vec<&[Vec<f64>]> = vec![f1.as_slice(), f2.as_slice()];
        let obs = env.observe(&state, 0).flat_entities();
        let (mc, hc) = warden_core::extractor::label_oracle(&env, &state, 0);
        let (probs, hc_raw, cache) = model.forward(&frames, &obs);
        let (_, d_mc) = warden_core::extractor::loss_mc(&probs, &mc.cells);
        let (_, d_hc) = warden_core::extractor::loss_hc(hc_raw, hc);
        let grad = model.backward(&cache, &d_mc, d_hc);
        let count = model.spec.param_count();
        let stride = (count / 800).max(1);
        let mut params = std::mem::replace(
            &mut model.params,
            warden_core::nn::ParamVector::zeros(count),
        );
        central_diff_check(
            params.as_mut_slice(),
            &grad,
            |p| {
                model.params.as_mut_slice().copy_from_slice(p);
                let (probs, hc_raw, _) = model.forward(&frames, &obs);
                let (l1, _) = warden_core::extractor::loss_mc(&probs, &mc.cells);
                let (l2, _) = warden_core::extractor::loss_hc(hc_raw, hc);
                l1 + l2
            },
            stride,
            "extractor",
        );
    }

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "gradient checks took {secs:.1}s (limit 120s)");
    println!("ACCEPTANCE gradient_checks: PASS ({secs:.2}s, rel err < 1e-4 at eps=1e-5)");
}

fn enumerate_joint_moves(n: usize) -> Vec<Vec<MoveDir>> {
    let mut all = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for prefix in &all {
            for d in MoveDir::ALL {
                let mut p = prefix.clone();
                p.push(d);
                next.push(p);
            }
        }
        all = next;
    }
    all
}

fn executed_violations(
    agents: &[(i64, i64)],
    devices: &[(i64, i64)],
    moves: &[MoveDir],
    d_safe: f64,
) -> u64 {
    let post: Vec<(i64, i64)> = agents
        .iter()
        .zip(moves.iter())
        .map(|(&p, &m)| warden_core::constraint::apply_move(p, m, (5, 5)))
        .collect();
    let responds = vec![None; agents.len()];
    let mut total = 0;
    for i in 0..agents.len() {
        let ctx = ConstraintContext {
            window: 5,
            d_safe,
            ct: [6, 6, 9],
            resources: [3, 3, 3],
            agent_pos: &post,
            device_pos: devices,
            incidents: &[],
            tasks: &[],
            responds: &responds,
        };
        total += violation_cost(&ctx, i).total();
    }
    total
}

#[test]
fn criterion_safety_property() {
    let _serial = serial();
    let t0 = Instant::now();
    let d_safe = 2.0;
    let mut rng = DetRng::seed_from(909);
    let mut tested = 0u64;
    while tested < 10_000 {
        let n_agents = 1 + rng.below(3);
        let n_devices = rng.below(3);
        let mut cells: Vec<(i64, i64)> = Vec::new();
        for _ in 0..n_agents + n_devices {
            cells.push((rng.below(5) as i64, rng.below(5) as i64));
        }
        // Precondition: a violation-free action exists per agent, which a
        // pairwise-safe start guarantees (staying is violation-free).
        let mut safe_start = true;
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                if warden_core::math::euclid(cells[i], cells[j]) < d_safe {
                    safe_start = false;
                }
            }
        }
        if !safe_start {
            continue;
        }
        tested += 1;
        let (agents, devices) = cells.split_at(n_agents);

        // Exhaustive joint-action enumeration is the oracle: it must
        // certify a violation-free joint move exists.
        let best = enumerate_joint_moves(n_agents)
            .iter()
            .map(|mv| executed_violations(agents, devices, mv, d_safe))
            .min()
            .unwrap();
        assert_eq!(best, 0, "oracle certificate failed for {agents:?}");

        let mc: Vec<ConstraintMatrix> = (0..n_agents).map(|_| ConstraintMatrix::ones(5)).collect();
        let acc = CostAccumulator::zeros(5);
        let budgets: Vec<BudgetMatrix> = (0..n_agents)
            .map(|_| compute_budget(&acc, ConstraintThreshold(0), &mc[0]))
            .collect();
        let proposed: Vec<Action> = (0..n_agents)
            .map(|_| Action {
                movement: MoveDir::ALL[rng.below(5)],
                respond: RespondKind::None,
            })
            .collect();
        let world = FilterWorld {
            window: 5,
            d_safe,
            ct: [6, 6, 9],
            resources: [3, 3, 3],
            grid: (5, 5),
            agent_pos: agents,
            device_pos: devices,
            incidents: &[],
            tasks: &[],
        };
        let safe = safety_filter(&proposed, &world, &mc, &budgets);
        let moves: Vec<MoveDir> = safe.iter().map(|a| a.movement).collect();
        let got = executed_violations(agents, devices, &moves, d_safe);
        assert_eq!(
            got, 0,
            "filter left {got} violations: agents {agents:?} devices {devices:?}"
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 300.0, "safety property took {secs:.1}s (limit 300s)");
    println!("ACCEPTANCE safety_property: PASS ({secs:.2}s, 10k states, zero violations)");
}

/// Zeroes the wall_ms column (the one host-clock field) of a metrics CSV.
fn mask_wall(text: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let cut = line.rfind(',').unwrap();
            out.push_str(&line[..cut]);
            out.push_str(",0");
        }
        out.push('\n');
    }
    out
}

#[test]
fn criterion_determinism() {
    let _serial = serial();
    let t0 = Instant::now();
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario.clone());
    let (extractor, _) = pretrain_extractor(&env, 4, 4, scenario.seed);

    let tmp = std::env::temp_dir().join("warden-acc-determinism");
    let _ = std::fs::remove_dir_all(&tmp);
    for variant in [Variant::Base, Variant::Ei] {
        let mut dirs = Vec::new();
        for attempt in 0..2 {
            let mut config = desk_config(variant, 12, 7);
            config.warmup = 64;
            let dir = tmp.join(format!("{}_{attempt}", variant.as_str()));
            run_experiment(&scenario, config, Some(&extractor), Some(&dir), 5).unwrap();
            dirs.push(dir);
        }
        let log_a = std::fs::read(dirs[0].join("runlog.txt")).unwrap();
        let log_b = std::fs::read(dirs[1].join("runlog.txt")).unwrap();
        assert_eq!(log_a, log_b, "{variant:?} run logs differ");
        let csv_a = std::fs::read_to_string(dirs[0].join("metrics.csv")).unwrap();
        let csv_b = std::fs::read_to_string(dirs[1].join("metrics.csv")).unwrap();
        assert_eq!(
            mask_wall(&csv_a),
            mask_wall(&csv_b),
            "{variant:?} metrics differ"
        );
        let roll_a = std::fs::read(dirs[0].join("rolling.csv")).unwrap();
        let roll_b = std::fs::read(dirs[1].join("rolling.csv")).unwrap();
        assert_eq!(roll_a, roll_b);
    }

    // Same check end-to-end through the binary.
    let scenario_path = tmp.join("scenario.wsc");
    warden_cli::scenario_file::save_scenario(&scenario_path, &scenario).unwrap();
    let bin = env!("CARGO_BIN_EXE_warden");
    for attempt in 0..2 {
        let out = tmp.join(format!("cli_{attempt}"));
        let status = std::process::Command::new(bin)
            .args([
                "run",
                "--scenario",
                scenario_path.to_str().unwrap(),
                "--variant",
                "base",
                "--episodes",
                "8",
                "--seed",
                "3",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(tmp.join("cli_0/runlog.txt")).unwrap();
    let b = std::fs::read(tmp.join("cli_1/runlog.txt")).unwrap();
    assert_eq!(a, b, "CLI run logs differ");

    let secs = t0.elapsed().as_secs_f64();
    println!("ACCEPTANCE determinism: PASS ({secs:.2}s, bit-identical logs and CSVs)");
}

#[test]
fn criterion_rnd_behavior() {
    let _serial = serial();
    let t0 = Instant::now();
    let obs_dim = Observation::flat_len(5);
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let mut rng = DetRng::seed_from(40_000 + seed);
        let mut rnd = RndPair::new(obs_dim, 32, 16, 1e-3, &mut rng);
        let trained: Vec<f64> = (0..obs_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let novel: Vec<f64> = (0..obs_dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let initial = rnd.intrinsic(&trained);
        for _ in 0..500 {
            rnd.update(&[&trained]);
        }
        let after = rnd.intrinsic(&trained);
        assert!(
            after <= initial / 10.0,
            "seed {seed}: intrinsic {initial:.4} -> {after:.4} (needs 10x drop)"
        );
        let on_novel = rnd.intrinsic(&novel);
        ratios.push(on_novel / after.max(1e-12));
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (ratios[9] + ratios[10]);
    assert!(
        median >= 2.0,
        "median novelty ratio {median:.2} below 2x over 20 seeds"
    );
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE rnd_behavior: PASS ({secs:.2}s, all seeds dropped 10x, median novelty ratio {median:.1}x)"
    );
}

/// Deterministic 3-state chain: right moves toward state 2 (terminal,
/// reward 1 on arrival), left moves back, gamma = 0.9.
mod chain {
    pub const GAMMA: f64 = 0.9;

    pub fn step(s: usize, a: usize) -> (usize, f64, bool) {
        let next = if a == 1 { (s + 1).min(2) } else { s.saturating_sub(1) };
        let reward = if next == 2 && s != 2 { 1.0 } else { 0.0 };
        (next, reward, next == 2)
    }

    /// Tabular value-iteration oracle over the non-terminal states.
    pub fn q_star() -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..200 {
            let mut next = q;
            for (s, row) in next.iter_mut().enumerate() {
                for (a, slot) in row.iter_mut().enumerate() {
                    let (s2, r, done) = step(s, a);
                    let bootstrap = if done {
                        0.0
                    } else {
                        q[s2][0].max(q[s2][1])
                    };
                    *slot = r + GAMMA * bootstrap;
                }
            }
            q = next;
        }
        q
    }
}

#[test]
fn criterion_avft_sanity() {
    let _serial = serial();
    let t0 = Instant::now();
    let q_star = chain::q_star();

    let spec = AvftSpec {
        context: 4,
        obs_dim: 3,
        action_dim: 2,
        embed: 10,
        hidden: 10,
    };
    // Token-count contract: exactly 3K inputs per window.
    {
        let mut rng = DetRng::seed_from(1);
        let p = spec.init(&mut rng);
        for len in 0..=spec.context {
            let window: Vec<AvftStep> = (0..len)
                .map(|i| AvftStep {
                    rtg: i as f64,
                    obs: vec![1.0, 0.0, 0.0],
                    action: i % 2,
                })
                .collect();
            assert_eq!(spec.tokens(&p, &window).len(), 3 * spec.context);
        }
    }

    let mut rng = DetRng::seed_from(808);
    let mut model = AvftModel::new(spec, 3e-3, &mut rng);

    // Random-policy rollouts become training windows; targets bootstrap
    // through the target copy with a max over next actions.
    let onehot = |s: usize| {
        let mut v = vec![0.0; 3];
        v[s] = 1.0;
        v
    };
    let mut episodes: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    for _ in 0..300 {
        let mut s = rng.below(2);
        let mut ep = Vec::new();
        for _ in 0..12 {
            let a = rng.below(2);
            let (s2, r, done) = chain::step(s, a);
            ep.push((s, a, r));
            s = s2;
            if done {
                break;
            }
        }
        episodes.push(ep);
    }
    let window_at = |ep: &[(usize, usize, f64)], t: usize, k: usize| -> Vec<AvftStep> {
        let total: f64 = ep.iter().map(|&(_, _, r)| r).sum();
        let mut rtg = total;
        let mut steps = Vec::new();
        for (i, &(s, a, r)) in ep.iter().enumerate() {
            steps.push(AvftStep {
                rtg,
                obs: onehot(s),
                action: a,
            });
            rtg -= r;
            if i == t {
                break;
            }
        }
        let start = steps.len().saturating_sub(k);
        steps[start..].to_vec()
    };

    for iter in 0..4000 {
        let mut windows = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..16 {
            let ep = &episodes[rng.below(episodes.len())];
            let t = rng.below(ep.len());
            let (s, a, r) = ep[t];
            let window = window_at(ep, t, 4);
            let (s2, _, done) = chain::step(s, a);
            let y = if done {
                r
            } else {
                // Max over next actions through the target copy.
                let mut best = f64::NEG_INFINITY;
                for a2 in 0..2 {
                    let mut w2 = window.clone();
                    if w2.len() == 4 {
                        w2.remove(0);
                    }
                    w2.push(AvftStep {
                        rtg: window.last().unwrap().rtg - r,
                        obs: onehot(s2),
                        action: a2,
                    });
                    best = best.max(model.q_target(&w2));
                }
                r + chain::GAMMA * best
            };
            windows.push(window);
            targets.push(y);
        }
        model.update(&windows, &targets);
        if iter % 4 == 0 {
            model.soft_update(0.05);
        }
    }

    // Evaluate |Q - Q*| on held-out random-policy occurrences.
    let mut worst: f64 = 0.0;
    for ep in episodes.iter().take(60) {
        for t in 0..ep.len() {
            let (s, a, _) = ep[t];
            let q = model.q(&window_at(ep, t, 4));
            let err = (q - q_star[s][a]).abs();
            worst = worst.max(err);
        }
    }
    assert!(
        worst < 0.1,
        "AVFT off the value-iteration oracle by {worst:.3} (limit 0.1)"
    );
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE avft_sanity: PASS ({secs:.2}s, max |Q - Q*| = {worst:.4}, 3K token contract holds)"
    );
}

#[test]
fn criterion_extractor_quality() {
    let _serial = serial();
    let t0 = Instant::now();
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario);
    // 42 episodes x 80 ticks x 3 agents ~ 10k samples.
    let dataset = generate_dataset(&env, 42, 7, 2);
    assert!(
        dataset.samples.len() >= 10_000,
        "dataset too small: {}",
        dataset.samples.len()
    );
    let (_, metrics) = train_extractor(&env, &dataset, 30, 3e-3, 16, 7);
    assert!(
        metrics.cell_accuracy >= 0.90,
        "holdout cell accuracy {:.4} below 0.90",
        metrics.cell_accuracy
    );
    assert!(
        metrics.hc_mae <= 0.5,
        "holdout h_c MAE {:.4} above 0.5",
        metrics.hc_mae
    );
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 600.0, "extractor training took {secs:.1}s (limit 600s)");
    println!(
        "ACCEPTANCE extractor_quality: PASS ({secs:.2}s, {} samples, accuracy {:.3}, h_c MAE {:.3})",
        dataset.samples.len(),
        metrics.cell_accuracy,
        metrics.hc_mae
    );
}

#[test]
fn criterion_reward_linearity() {
    let _serial = serial();
    let t0 = Instant::now();
    let mut rng = DetRng::seed_from(3030);
    for _ in 0..1000 {
        let comp = RewardComponents {
            succ: rng.uniform_in(-30.0, 30.0),
            work: rng.uniform_in(-20.0, 20.0),
            loss: rng.uniform_in(0.0, 3.0),
            has_type_c: rng.bernoulli(0.5),
        };
        let (a, b, g) = (rng.uniform(), rng.uniform(), rng.uniform());
        let mk = |alpha, beta, gamma| RewardWeights {
            alpha,
            beta,
            gamma,
            r_s: 10.0,
            r_w: 5.0,
        };
        let combined = warden_core::env::reward(&comp, &mk(a, b, g));
        let parts = a * warden_core::env::reward(&comp, &mk(1.0, 0.0, 0.0))
            + b * warden_core::env::reward(&comp, &mk(0.0, 1.0, 0.0))
            + g * warden_core::env::reward(&comp, &mk(0.0, 0.0, 1.0));
        assert!(
            (combined - parts).abs() <= 1e-12,
            "linearity broke: {combined} vs {parts}"
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    println!("ACCEPTANCE reward_linearity: PASS ({secs:.2}s, 1k transitions within 1e-12)");
}

#[test]
fn criterion_goods_conservation() {
    let _serial = serial();
    // The environment hard-asserts conservation on every tick; driving
    // random spread-heavy episodes exercises the assert across pickup,
    // delivery, type-b carrying and task-failure returns.
    let t0 = Instant::now();
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario);
    let mut ticks = 0u64;
    for seed in 0..12 {
        let mut state = env.reset(seed);
        let mut rng = DetRng::stream(seed, "policy");
        while !state.done {
            let joint: Vec<Action> = (0..3)
                .map(|_| Action::from_index(rng.below(20)).unwrap())
                .collect();
            env.step(&mut state, &joint);
            ticks += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE goods_conservation: PASS ({secs:.2}s, hard assert held for {ticks} ticks)"
    );
}

#[test]
fn criterion_variant_ordering() {
    let _serial = serial();
    let t0 = Instant::now();
    let episodes = 2000u64;
    let seeds = [1u64, 2, 3, 4, 5];
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario.clone());
    let (extractor, ext_metrics) = pretrain_extractor(&env, 40, 30, scenario.seed);
    eprintln!(
        "ordering: extractor pretrained (accuracy {:.3}, h_c MAE {:.3})",
        ext_metrics.cell_accuracy, ext_metrics.hc_mae
    );

    let mut medians = std::collections::BTreeMap::new();
    for variant in [Variant::Ei, Variant::C, Variant::Base] {
        let v0 = Instant::now();
        let config = desk_config(variant, episodes, 1);
        let (_, median) = run_variant_seeds(
            &scenario,
            variant,
            episodes,
            &seeds,
            &config,
            Some(&extractor),
            None,
            15,
        )
        .unwrap();
        let mins = v0.elapsed().as_secs_f64() / 60.0;
        eprintln!(
            "ordering: {} medians reward {:.2} rate_s {:.3} rate_f {:.3} rate_sf {:.3} ({mins:.1} min)",
            variant.as_str(),
            median.reward,
            median.rate_s,
            median.rate_f,
            median.rate_sf
        );
        assert!(
            mins <= 30.0,
            "{} variant exceeded the 30-minute budget ({mins:.1} min)",
            variant.as_str()
        );
        medians.insert(variant.as_str().to_string(), median);
    }
    let ei = medians["ei"];
    let c = medians["c"];
    let base = medians["base"];

    assert!(
        ei.rate_s >= c.rate_s + 0.05,
        "rate_s: ei {:.3} not >= c {:.3} + 0.05",
        ei.rate_s,
        c.rate_s
    );
    assert!(
        c.rate_s + 0.05 >= base.rate_s + 0.10,
        "rate_s: c {:.3} + 0.05 not >= base {:.3} + 0.10",
        c.rate_s,
        base.rate_s
    );
    assert!(
        ei.rate_f <= base.rate_f - 0.10,
        "rate_f: ei {:.3} not <= base {:.3} - 0.10",
        ei.rate_f,
        base.rate_f
    );
    assert!(
        ei.rate_sf >= base.rate_sf + 0.10,
        "rate_sf: ei {:.3} not >= base {:.3} + 0.10",
        ei.rate_sf,
        base.rate_sf
    );
    assert!(
        ei.reward > base.reward,
        "reward: ei {:.2} not > base {:.2}",
        ei.reward,
        base.reward
    );
    let mins = t0.elapsed().as_secs_f64() / 60.0;
    println!(
        "ACCEPTANCE variant_ordering: PASS ({mins:.1} min; rate_s {:.3}/{:.3}/{:.3}, rate_f {:.3}/{:.3}/{:.3}, rate_sf {:.3}/{:.3}/{:.3}, reward {:.1}/{:.1}/{:.1} for ei/c/base)",
        ei.rate_s, c.rate_s, base.rate_s,
        ei.rate_f, c.rate_f, base.rate_f,
        ei.rate_sf, c.rate_sf, base.rate_sf,
        ei.reward, c.reward, base.reward
    );
}

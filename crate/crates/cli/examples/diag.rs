// Throwaway training diagnostic (not part of the deliverable).
use warden_cli::scenario_file::make_layout;
use warden_core::constraint::{safety_filter, ConstraintThreshold};
use warden_core::env::{Action, CmdpEnv, ACTION_COUNT};
use warden_core::extractor::label_oracle;
use warden_core::graph::Layout;
use warden_core::learn::{global_features, NullSink, TrainConfig, Trainer, Variant};
use warden_core::math::softmax;

fn main() {
    let episodes: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(600);
    let variant = match std::env::args().nth(2).as_deref() {
        Some("base") => Variant::Base,
        Some("ei") => Variant::Ei,
        Some("c") | None => Variant::C,
        Some(other) => panic!("unknown variant {other}"),
    };
    let scenario = make_layout(Layout::A, 3, 6, 42);
    let env = CmdpEnv::new(scenario);
    let mut config = TrainConfig::new(variant, episodes, 1);
    config.hidden = 32;
    config.batch = 32;
    config.buffer = 20_000;
    config.update_every = 8;
    config.warmup = 512;
    config.noise_anneal = 0.8;
    config.eps_start = 0.4;
    config.eps_floor = 0.05;
    config.logit_reg = 0.02;
    config.policy_temp = 2.0;
    config.hidden = 40;
    config.update_every = 12;
    config.critic_lr = 2e-3;
    config.actor_lr = 5e-4;
    let extractor = (variant == Variant::Ei).then(|| {
        let (model, metrics) = warden_cli::experiment::pretrain_extractor(&env, 40, 30, 42);
        eprintln!(
            "extractor: accuracy {:.3}, mae {:.3}",
            metrics.cell_accuracy, metrics.hc_mae
        );
        model
    });
    let mut trainer = Trainer::new(&env, config, extractor.as_ref());
    let stats = trainer.run(&mut NullSink);
    let tail = &stats[stats.len().saturating_sub(200)..];
    let mean_res: f64 =
        tail.iter().map(|s| s.resolved_nodes as f64).sum::<f64>() / tail.len() as f64;
    let mean_hosted: f64 =
        tail.iter().map(|s| s.incident_nodes as f64).sum::<f64>() / tail.len() as f64;
    let mean_done: f64 = tail
        .iter()
        .map(|s| s.per_device_completions.iter().sum::<u64>() as f64)
        .sum::<f64>()
        / tail.len() as f64;
    let mean_reward: f64 = tail
        .iter()
        .map(|s| s.external.iter().sum::<f64>() / s.external.len() as f64)
        .sum::<f64>()
        / tail.len() as f64;
    println!(
        "tail: resolved {mean_res:.2} of hosted {mean_hosted:.2}, tasks {mean_done:.2}/8, R {mean_reward:.1}"
    );

    // Greedy rollout with action histogram.
    let mut hist = [0u64; ACTION_COUNT];
    let mut state = env.reset(999);
    while !state.done {
        let mut mc = Vec::new();
        let mut hc = 0;
        for agent in 0..3 {
            let (m, h) = label_oracle(&env, &state, agent);
            mc.push(m);
            hc = h;
        }
        state.mc = mc;
        state.hc = ConstraintThreshold(hc);
        let obs: Vec<Vec<f64>> = (0..3).map(|i| env.observe(&state, i).flat()).collect();
        let mut proposed = Vec::new();
        for i in 0..3 {
            let net = &trainer.nets.actors[i];
            let scores = net.spec.eval(&net.params, &obs[i]);
            let mut best = 0;
            for (j, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = j;
                }
            }
            hist[best] += 1;
            proposed.push(Action::from_index(best).unwrap());
        }
        let (ap, dp, iv, tv) = env.filter_world_data(&state);
        let world = env.filter_world(&ap, &dp, &iv, &tv);
        let budgets = state.budgets();
        let safe = safety_filter(&proposed, &world, &state.mc, &budgets);
        env.step(&mut state, &safe);
    }
    println!("greedy episode: resolved {} of {}", state.resolved_nodes.len(), state.hosted_nodes.len());
    println!("action histogram (move-major x respond): {hist:?}");

    // Q probe: put agent 0 adjacent to a fresh type-a incident and ask
    // the critic about each respond option.
    let mut state = env.reset(5);
    // trigger schedule: run a few stays
    let stay = vec![Action::STAY; 3];
    for _ in 0..4 {
        env.step(&mut state, &stay);
    }
    if let Some(inc) = state.incidents.iter().find(|i| i.is_active()) {
        let node = inc.node;
        let coord = env.scenario.op_graph.coord_of(node);
        let adj = env
            .scenario
            .op_graph
            .node_at((coord.0 + 1, coord.1))
            .unwrap_or(node);
        state.agents[0].loc = adj;
        let itype = inc.itype;
        let mut mc = Vec::new();
        let mut hc = 0;
        for agent in 0..3 {
            let (m, h) = label_oracle(&env, &state, agent);
            mc.push(m);
            hc = h;
        }
        state.mc = mc;
        state.hc = ConstraintThreshold(hc);
        let global = global_features(&env, &state);
        let obs0 = env.observe(&state, 0).flat();
        let actor = &trainer.nets.actors[0];
        let logits = actor.spec.eval(&actor.params, &obs0);
        let temp: Vec<f64> = logits.iter().map(|l| l / 2.0).collect();
        let probs = softmax(&temp);
        println!("incident type at probe: {itype:?}");
        for respond in 0..4 {
            // stay + respond k = action index 4*4 + respond
            let idx = 4 * 4 + respond;
            let mut input = global.clone();
            for agent in 0..3 {
                let mut onehot = vec![0.0; ACTION_COUNT];
                onehot[if agent == 0 { idx } else { 19 }] = 1.0;
                input.extend_from_slice(&onehot);
            }
            let critic = &trainer.nets.critics[0];
            let q = critic.spec.eval(&critic.params, &input)[0];
            println!(
                "respond {respond}: Q = {q:.3}, policy prob(stay+respond) = {:.4}",
                probs[idx]
            );
        }
    }
}

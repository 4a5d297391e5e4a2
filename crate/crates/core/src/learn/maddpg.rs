//! Per-agent actors, centralized critics, and the episode loop with its
//! three variants: the full method (learned constraints + novelty reward
//! + return-conditioned critic targets), ground-truth constraints, and
//! the bare safety scaffolding.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::avft::{AvftModel, AvftSpec, AvftStep};
use super::replay::{ReplayBuffer, StoredStep};
use super::rnd::RndPair;
use super::{combined_reward, rtg_init, rtg_update};
use crate::constraint::{safety_filter, ConstraintMatrix, ConstraintThreshold};
use crate::env::{Action, CmdpEnv, EnvState, Observation, RunEvent, ACTION_COUNT};
use crate::extractor::{graph_frame, label_oracle, ExtractorModel};
use crate::math::softmax;
use crate::nn::{soft_update, Activation, MlpSpec, Optimizer, OptimizerKind, ParamVector};
use crate::rng::DetRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Learned constraint extraction + novelty reward + return-conditioned
    /// critic targets.
    Ei,
    /// Ground-truth rule-based constraints, no exploration extras.
    C,
    /// All-ones constraint mask with zero tolerance, nothing learned
    /// about constraints.
    Base,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Ei => "ei",
            Variant::C => "c",
            Variant::Base => "base",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "ei" | "EI" => Some(Variant::Ei),
            "c" | "C" => Some(Variant::C),
            "base" | "BASE" => Some(Variant::Base),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub variant: Variant,
    pub episodes: u64,
    pub seed: u64,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch: usize,
    pub buffer: usize,
    pub tau: f64,
    /// AVFT context length K.
    pub context: usize,
    /// RND output dimension.
    pub rnd_dim: usize,
    /// Intrinsic reward scale.
    pub eta: f64,
    pub hidden: usize,
    pub noise_sigma: f64,
    pub noise_floor: f64,
    /// Fraction of episodes over which noise anneals to the floor.
    pub noise_anneal: f64,
    /// Burst-exploration rate: probability a component of the random
    /// process overwhelms the scores entirely (annealed like sigma).
    pub eps_start: f64,
    pub eps_floor: f64,
    /// Ticks between update rounds.
    pub update_every: u64,
    /// Minimum stored steps before updates start.
    pub warmup: usize,
    /// Initial return-to-go target per agent.
    pub rtg_target: f64,
    /// Graph-sequence window fed to the constraint extractor.
    pub extractor_frames: usize,
    /// Actor logit regularization (the recovery force that keeps
    /// suppressed actions reachable by the policy gradient).
    pub logit_reg: f64,
    /// Softmax temperature for the differentiable action interface.
    pub policy_temp: f64,
}

impl TrainConfig {
    pub fn new(variant: Variant, episodes: u64, seed: u64) -> Self {
        Self {
            variant,
            episodes,
            seed,
            gamma: 0.95,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            batch: 64,
            buffer: 50_000,
            tau: 0.01,
            context: 8,
            rnd_dim: 16,
            eta: 1.0,
            hidden: 64,
            noise_sigma: 1.0,
            noise_floor: 0.05,
            noise_anneal: 0.8,
            eps_start: 0.3,
            eps_floor: 0.02,
            update_every: 4,
            warmup: 512,
            rtg_target: 40.0,
            extractor_frames: 4,
            logit_reg: 1e-2,
            policy_temp: 2.0,
        }
    }
}

pub struct ActorNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub target: ParamVector,
    pub opt: Optimizer,
}

pub struct CriticNet {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub target: ParamVector,
    pub opt: Optimizer,
}

fn new_actor(obs_dim: usize, hidden: usize, lr: f64, rng: &mut DetRng) -> ActorNet {
    let spec = MlpSpec::new(
        &[obs_dim, hidden, ACTION_COUNT],
        Activation::Relu,
        Activation::Identity,
    );
    let params = spec.init(rng);
    let target = params.clone();
    let opt = Optimizer::new(OptimizerKind::adam_default(), lr, spec.param_count());
    ActorNet {
        spec,
        params,
        target,
        opt,
    }
}

fn new_critic(input_dim: usize, hidden: usize, lr: f64, rng: &mut DetRng) -> CriticNet {
    let spec = MlpSpec::new(
        &[input_dim, hidden, 1],
        Activation::Relu,
        Activation::Identity,
    );
    let params = spec.init(rng);
    let target = params.clone();
    let opt = Optimizer::new(OptimizerKind::adam_default(), lr, spec.param_count());
    CriticNet {
        spec,
        params,
        target,
        opt,
    }
}

/// One MSE descent step of a critic on (input, target) pairs. Returns the
/// mean squared Bellman error before the step.
pub fn critic_update_batch(critic: &mut CriticNet, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
    assert_eq!(inputs.len(), targets.len());
    if inputs.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut grad = vec![0.0; critic.spec.param_count()];
    let mut loss = 0.0;
    for (input, &z) in inputs.iter().zip(targets.iter()) {
        let (q, cache) = critic.spec.forward(&critic.params, input);
        let d = q[0] - z;
        loss += d * d;
        let (g, _) = critic
            .spec
            .backward(&critic.params, &cache, &[2.0 * d * scale]);
        for (acc, v) in grad.iter_mut().zip(g.iter()) {
            *acc += v;
        }
    }
    critic.opt.apply(&mut critic.params, &grad);
    loss * scale
}

/// One ascent step of an actor through a frozen critic. For each sample
/// the agent's stored action slot in the critic input is replaced by the
/// actor's softmax scores, the critic is differentiated back to that
/// slot, and the chain continues through the softmax into the actor.
/// Returns the L2 norm of the applied gradient.
pub fn actor_update_batch(
    actor: &mut ActorNet,
    critic: &CriticNet,
    obs_batch: &[&[f64]],
    base_inputs: &mut [Vec<f64>],
    action_offset: usize,
    logit_reg: f64,
    temp: f64,
) -> f64 {
    assert_eq!(obs_batch.len(), base_inputs.len());
    if obs_batch.is_empty() {
        return 0.0;
    }
    let adim = ACTION_COUNT;
    let scale = 1.0 / obs_batch.len() as f64;
    let mut ascent = vec![0.0; actor.spec.param_count()];
    for (obs, input) in obs_batch.iter().zip(base_inputs.iter_mut()) {
        let (logits, acache) = actor.spec.forward(&actor.params, obs);
        let tempered: Vec<f64> = logits.iter().map(|l| l / temp).collect();
        let probs = softmax(&tempered);
        input[action_offset..action_offset + adim].copy_from_slice(&probs);
        let (_, ccache) = critic.spec.forward(&critic.params, input);
        let (_, dinput) = critic.spec.backward(&critic.params, &ccache, &[1.0]);
        let dprobs = &dinput[action_offset..action_offset + adim];
        // Softmax Jacobian at temperature T:
        // dlogit_j = p_j (dprob_j - sum_k p_k dprob_k) / T.
        let dot: f64 = probs.iter().zip(dprobs.iter()).map(|(p, d)| p * d).sum();
        let mut dlogits = Vec::with_capacity(adim);
        for j in 0..adim {
            dlogits.push(probs[j] * (dprobs[j] - dot) / temp - logit_reg * logits[j]);
        }
        let (g, _) = actor.spec.backward(&actor.params, &acache, &dlogits);
        for (acc, v) in ascent.iter_mut().zip(g.iter()) {
            *acc += v * scale;
        }
    }
    let norm = crate::math::sqrt(ascent.iter().map(|g| g * g).sum());
    // Optimizers minimize; negate for ascent.
    for g in ascent.iter_mut() {
        *g = -*g;
    }
    actor.opt.apply(&mut actor.params, &ascent);
    norm
}

/// All trained parameters for one run.
pub struct AgentNets {
    pub actors: Vec<ActorNet>,
    pub critics: Vec<CriticNet>,
    pub rnd: Option<RndPair>,
    pub avft: Option<AvftModel>,
}

/// Per-episode evaluation record handed to the harness.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: u64,
    /// Per-agent external reward totals.
    pub external: Vec<f64>,
    pub per_device_completions: Vec<u64>,
    pub n_tasks: u64,
    pub n_devices: u64,
    pub n_nodes: u64,
    pub incident_nodes: u64,
    pub resolved_nodes: u64,
    pub violations: u64,
    pub ticks: u64,
}

/// Receiver for the run log; the harness writes these to disk.
pub trait RunSink {
    fn begin_episode(&mut self, _episode: u64) {}
    fn actions(&mut self, _episode: u64, _tick: u64, _actions: &[Action]) {}
    fn event(&mut self, _episode: u64, _ev: &RunEvent) {}
    fn end_episode(&mut self, _stats: &EpisodeStats) {}
}

/// Sink that drops everything.
pub struct NullSink;
impl RunSink for NullSink {}

/// Centralized-critic state features: every agent's full observation
/// (typed incident channels, constraint/budget windows, goal offsets),
/// per-agent and per-device poses, task status counts, incident counts
/// and damage, the episode clock and the constraint threshold.
pub fn global_features(env: &CmdpEnv, state: &EnvState) -> Vec<f64> {
    let s = &env.scenario;
    let (w, h) = (s.grid.0 as f64, s.grid.1 as f64);
    let mut f = Vec::new();
    for i in 0..state.agents.len() {
        f.extend_from_slice(&env.observe(state, i).flat());
    }
    for a in &state.agents {
        let (x, y) = s.op_graph.coord_of(a.loc);
        f.push(x as f64 / w);
        f.push(y as f64 / h);
    }
    for d in &state.devices {
        let (x, y) = s.op_graph.coord_of(d.loc);
        f.push(x as f64 / w);
        f.push(y as f64 / h);
        f.push(if d.carrying > 0 { 1.0 } else { 0.0 });
    }
    let progress = env.task_progress(state);
    let nt = state.tasks.len().max(1) as f64;
    f.push(progress.pending as f64 / nt);
    f.push(progress.in_progress as f64 / nt);
    f.push(progress.done as f64 / nt);
    f.push(progress.failed as f64 / nt);
    let mut counts = [0.0; 3];
    let mut damage = 0.0;
    for inc in state.incidents.iter().filter(|i| i.is_active()) {
        counts[inc.itype.index()] += 1.0;
        damage += inc.damage;
    }
    for c in counts {
        f.push(c / 4.0);
    }
    f.push(crate::math::tanh(damage / 10.0));
    f.push(state.tick as f64 / s.constants.horizon as f64);
    f.push(state.hc.0 as f64 / 10.0);
    f
}

pub struct Trainer<'a> {
    pub env: &'a CmdpEnv,
    pub config: TrainConfig,
    pub nets: AgentNets,
    extractor: Option<&'a ExtractorModel>,
    buffer: ReplayBuffer,
    noise_rng: DetRng,
    sample_rng: DetRng,
    global_dim: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        env: &'a CmdpEnv,
        config: TrainConfig,
        extractor: Option<&'a ExtractorModel>,
    ) -> Self {
        assert!(
            config.variant != Variant::Ei || extractor.is_some(),
            "the EI variant needs a pretrained extractor"
        );
        let n_agents = env.n_agents();
        let obs_dim = Observation::flat_len(env.window());
        let probe = env.reset(0);
        let global_dim = global_features(env, &probe).len();
        let critic_dim = global_dim + n_agents * ACTION_COUNT;
        let mut init_rng = DetRng::stream(config.seed, "init");
        let actors = (0..n_agents)
            .map(|_| new_actor(obs_dim, config.hidden, config.actor_lr, &mut init_rng))
            .collect();
        let critics = (0..n_agents)
            .map(|_| new_critic(critic_dim, config.hidden, config.critic_lr, &mut init_rng))
            .collect();
        let rnd = (config.variant == Variant::Ei).then(|| {
            RndPair::new(
                obs_dim,
                config.hidden.min(32),
                config.rnd_dim,
                config.critic_lr,
                &mut init_rng,
            )
        });
        let avft = (config.variant == Variant::Ei).then(|| {
            AvftModel::new(
                AvftSpec {
                    context: config.context,
                    obs_dim,
                    action_dim: ACTION_COUNT,
                    embed: 12,
                    hidden: 12,
                },
                config.critic_lr,
                &mut init_rng,
            )
        });
        let buffer = ReplayBuffer::new(config.buffer);
        let noise_rng = DetRng::stream(config.seed, "noise");
        let sample_rng = DetRng::stream(config.seed, "sample");
        Self {
            env,
            config,
            nets: AgentNets {
                actors,
                critics,
                rnd,
                avft,
            },
            extractor,
            buffer,
            noise_rng,
            sample_rng,
            global_dim,
        }
    }

    fn constraints_for(
        &self,
        state: &EnvState,
        observations: &[Observation],
        frames: &VecDeque<Vec<Vec<f64>>>,
    ) -> (Vec<ConstraintMatrix>, u64) {
        let window = self.env.window();
        match self.config.variant {
            Variant::Base => (
                vec![ConstraintMatrix::ones(window); state.agents.len()],
                0,
            ),
            Variant::C => {
                let mut mats = Vec::with_capacity(state.agents.len());
                let mut hc = 0;
                for agent in 0..state.agents.len() {
                    let (m, h) = label_oracle(self.env, state, agent);
                    mats.push(m);
                    hc = h;
                }
                (mats, hc)
            }
            Variant::Ei => {
                let model = self.extractor.expect("checked in new()");
                let frame_slices: Vec<&[Vec<f64>]> =
                    frames.iter().map(|f| f.as_slice()).collect();
                let mut mats = Vec::with_capacity(state.agents.len());
                let mut hc = 0;
                for obs in observations {
                    let (m, h) = model.extract(&frame_slices, &obs.flat_entities());
                    mats.push(m);
                    hc = h;
                }
                (mats, hc)
            }
        }
    }

    fn noise_sigma(&self, episode: u64) -> (f64, f64) {
        let c = &self.config;
        if c.episodes == 0 {
            return (c.noise_floor, c.eps_floor);
        }
        let progress = episode as f64 / (c.episodes as f64 * c.noise_anneal).max(1.0);
        (
            (c.noise_sigma * (1.0 - progress)).max(c.noise_floor),
            (c.eps_start * (1.0 - progress)).max(c.eps_floor),
        )
    }

    fn select_actions(&mut self, observations: &[Vec<f64>], sigma: f64, eps: f64) -> Vec<Action> {
        let mut actions = Vec::with_capacity(observations.len());
        for (agent, obs) in observations.iter().enumerate() {
            // The random process on the scores has two parts: additive
            // Gaussian noise, and an occasional burst that swamps the
            // scores entirely (keeps every action reachable after the
            // policy sharpens).
            if self.noise_rng.bernoulli(eps) {
                actions.push(Action::from_index(self.noise_rng.below(ACTION_COUNT)).unwrap());
                continue;
            }
            let scores = self.nets.actors[agent]
                .spec
                .eval(&self.nets.actors[agent].params, obs);
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (j, &s) in scores.iter().enumerate() {
                let v = s + sigma * self.noise_rng.normal();
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            actions.push(Action::from_index(best).unwrap());
        }
        actions
    }

    fn target_action_onehot(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        let net = &self.nets.actors[agent];
        let scores = net.spec.eval(&net.target, obs);
        let mut best = 0;
        for (j, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = j;
            }
        }
        let mut onehot = vec![0.0; ACTION_COUNT];
        onehot[best] = 1.0;
        onehot
    }

    fn critic_input(&self, global: &[f64], action_onehots: &[Vec<f64>]) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.global_dim + action_onehots.len() * ACTION_COUNT);
        input.extend_from_slice(global);
        for a in action_onehots {
            input.extend_from_slice(a);
        }
        input
    }

    fn avft_window(&self, index: u64, agent: usize) -> Vec<AvftStep> {
        let steps = self.buffer.window_back(index, self.config.context);
        steps
            .iter()
            .map(|s| AvftStep {
                rtg: s.rtg_pre[agent],
                obs: s.obs[agent].clone(),
                action: s.actions[agent],
            })
            .collect()
    }

    fn update_round(&mut self) {
        let batch = self
            .buffer
            .sample(self.config.batch, &mut self.sample_rng);
        if batch.len() < self.config.batch / 2 {
            return;
        }
        let n_agents = self.env.n_agents();
        let gamma = self.config.gamma;

        // Gather per-sample data up front.
        struct Row {
            input: Vec<f64>,
            targets: Vec<f64>,
            obs: Vec<Vec<f64>>,
            index: u64,
        }
        let mut rows: Vec<Row> = Vec::with_capacity(batch.len());
        for t in &batch {
            let step = self.buffer.get(t.index).unwrap();
            let onehots: Vec<Vec<f64>> = step
                .actions
                .iter()
                .map(|&a| {
                    let mut v = vec![0.0; ACTION_COUNT];
                    v[a] = 1.0;
                    v
                })
                .collect();
            let input = self.critic_input(&step.global, &onehots);
            let mut targets = Vec::with_capacity(n_agents);
            if step.done {
                for i in 0..n_agents {
                    targets.push(step.rewards[i]);
                }
            } else {
                let next = self.buffer.successor(t.index).unwrap();
                let next_onehots: Vec<Vec<f64>> = (0..n_agents)
                    .map(|i| self.target_action_onehot(i, &next.obs[i]))
                    .collect();
                match (&self.nets.avft, self.config.variant) {
                    (Some(avft), Variant::Ei) => {
                        for i in 0..n_agents {
                            // Window ending at the successor step with the
                            // target actor's action in the final triple.
                            let mut window = self.avft_window(t.index, i);
                            if window.len() == self.config.context {
                                window.remove(0);
                            }
                            let next_action = next_onehots[i]
                                .iter()
                                .position(|&v| v == 1.0)
                                .unwrap();
                            window.push(AvftStep {
                                rtg: next.rtg_pre[i],
                                obs: next.obs[i].clone(),
                                action: next_action,
                            });
                            let q_next = avft.q_target(&window);
                            targets.push(step.rewards[i] + gamma * q_next);
                        }
                    }
                    _ => {
                        let next_input = self.critic_input(&next.global, &next_onehots);
                        for i in 0..n_agents {
                            let critic = &self.nets.critics[i];
                            let q_next = critic.spec.eval(&critic.target, &next_input)[0];
                            targets.push(step.rewards[i] + gamma * q_next);
                        }
                    }
                }
            }
            rows.push(Row {
                input,
                targets,
                obs: step.obs.clone(),
                index: t.index,
            });
        }

        // Critic updates.
        for i in 0..n_agents {
            let inputs: Vec<Vec<f64>> = rows.iter().map(|r| r.input.clone()).collect();
            let targets: Vec<f64> = rows.iter().map(|r| r.targets[i]).collect();
            critic_update_batch(&mut self.nets.critics[i], &inputs, &targets);
        }

        // Actor updates.
        for i in 0..n_agents {
            let obs_batch: Vec<&[f64]> = rows.iter().map(|r| r.obs[i].as_slice()).collect();
            let mut base_inputs: Vec<Vec<f64>> = rows.iter().map(|r| r.input.clone()).collect();
            let offset = self.global_dim + i * ACTION_COUNT;
            let (actors, critics) = (&mut self.nets.actors, &self.nets.critics);
            actor_update_batch(
                &mut actors[i],
                &critics[i],
                &obs_batch,
                &mut base_inputs,
                offset,
                self.config.logit_reg,
                self.config.policy_temp,
            );
        }

        // RND predictor: distill on the observations in the batch.
        if let Some(rnd) = self.nets.rnd.as_mut() {
            let obs_batch: Vec<&[f64]> = rows
                .iter()
                .flat_map(|r| r.obs.iter().map(|o| o.as_slice()))
                .collect();
            rnd.update(&obs_batch);
        }

        // AVFT training on one agent's window per sample, rotating.
        if self.nets.avft.is_some() {
            let mut windows = Vec::with_capacity(rows.len());
            let mut ys = Vec::with_capacity(rows.len());
            for (k, row) in rows.iter().enumerate() {
                let agent = k % n_agents;
                let window = self.avft_window(row.index, agent);
                if window.is_empty() {
                    continue;
                }
                windows.push(window);
                ys.push(row.targets[agent]);
            }
            if let Some(avft) = self.nets.avft.as_mut() {
                avft.update(&windows, &ys);
            }
        }

        // Soft target updates.
        let tau = self.config.tau;
        for a in self.nets.actors.iter_mut() {
            soft_update(&mut a.target, &a.params, tau);
        }
        for c in self.nets.critics.iter_mut() {
            soft_update(&mut c.target, &c.params, tau);
        }
        if let Some(avft) = self.nets.avft.as_mut() {
            avft.soft_update(tau);
        }
    }

    /// Runs the configured number of training episodes, streaming the run
    /// log into `sink` and returning the per-episode stats.
    pub fn run(&mut self, sink: &mut dyn RunSink) -> Vec<EpisodeStats> {
        let n_agents = self.env.n_agents();
        let mut all_stats = Vec::with_capacity(self.config.episodes as usize);
        for episode in 0..self.config.episodes {
            sink.begin_episode(episode);
            let ep_seed = crate::rng::DetRng::stream(self.config.seed, "episode")
                .next_u64()
                .wrapping_add(episode);
            let mut state = self.env.reset(ep_seed);
            let (sigma, eps) = self.noise_sigma(episode);
            let mut rtg: Vec<f64> = vec![rtg_init(self.config.rtg_target); n_agents];
            let mut external = vec![0.0; n_agents];
            let mut violations = 0;
            let mut frames: VecDeque<Vec<Vec<f64>>> = VecDeque::new();

            while !state.done {
                frames.push_back(graph_frame(self.env, &state));
                if frames.len() > self.config.extractor_frames {
                    frames.pop_front();
                }
                let observations: Vec<Observation> =
                    (0..n_agents).map(|i| self.env.observe(&state, i)).collect();
                let (mc, hc) = self.constraints_for(&state, &observations, &frames);
                state.mc = mc;
                state.hc = ConstraintThreshold(hc);
                // Re-encode observations so the constraint channels match
                // the matrices just installed.
                let obs_flat: Vec<Vec<f64>> = (0..n_agents)
                    .map(|i| self.env.observe(&state, i).flat())
                    .collect();
                let global = global_features(self.env, &state);

                let proposed = self.select_actions(&obs_flat, sigma, eps);
                let (agent_pos, device_pos, incidents, tasks) =
                    self.env.filter_world_data(&state);
                let world = self
                    .env
                    .filter_world(&agent_pos, &device_pos, &incidents, &tasks);
                let budgets = state.budgets();
                let safe = safety_filter(&proposed, &world, &state.mc, &budgets);
                sink.actions(episode, state.tick, &safe);

                let res = self.env.step(&mut state, &safe);
                for ev in &res.events {
                    sink.event(episode, ev);
                }
                violations += res.violations;

                let mut stored_rewards = Vec::with_capacity(n_agents);
                let rtg_pre = rtg.clone();
                for i in 0..n_agents {
                    let e = res.rewards[i];
                    external[i] += e;
                    let stored = if let Some(rnd) = &self.nets.rnd {
                        let next_obs = self.env.observe(&state, i).flat();
                        combined_reward(e, rnd.intrinsic(&next_obs), self.config.eta)
                    } else {
                        e
                    };
                    stored_rewards.push(stored);
                    rtg[i] = rtg_update(rtg[i], e);
                }
                self.buffer.push(StoredStep {
                    global,
                    obs: obs_flat,
                    actions: safe.iter().map(|a| a.to_index()).collect(),
                    rewards: stored_rewards,
                    rtg_pre,
                    done: res.done,
                    episode,
                });

                if self.buffer.len() >= self.config.warmup
                    && state.tick % self.config.update_every == 0
                {
                    self.update_round();
                }
            }

            let progress = self.env.task_progress(&state);
            let stats = EpisodeStats {
                episode,
                external,
                per_device_completions: progress.per_device_completions,
                n_tasks: state.tasks.len() as u64,
                n_devices: state.devices.len() as u64,
                n_nodes: self.env.scenario.op_graph.len() as u64,
                incident_nodes: state.hosted_nodes.len() as u64,
                resolved_nodes: state.resolved_nodes.len() as u64,
                violations,
                ticks: state.tick,
            };
            sink.end_episode(&stats);
            all_stats.push(stats);
        }
        all_stats
    }
}

/// Convenience wrapper: builds a trainer and runs it.
pub fn train(
    env: &CmdpEnv,
    config: TrainConfig,
    extractor: Option<&ExtractorModel>,
    sink: &mut dyn RunSink,
) -> (AgentNets, Vec<EpisodeStats>) {
    let mut trainer = Trainer::new(env, config, extractor);
    let stats = trainer.run(sink);
    (trainer.nets, stats)
}

/// Human-readable tag for a scenario/config cell, used to align variant
/// summaries.
pub fn scenario_tag(env: &CmdpEnv) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    let _ = write!(
        s,
        "layout{}-{}a-{}i",
        env.scenario.layout.as_str(),
        env.scenario.agent_starts.len(),
        env.scenario.schedule.len()
    );
    s
}

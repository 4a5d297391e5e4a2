//! Constraint extraction: learns the per-agent constraint matrix and the
//! violation threshold from sequences of operation-graph states plus the
//! agent's entity observation, supervised by a rule-based label oracle.
//!
//! Pipeline: per-node dense embedding, one mean-over-neighbors
//! aggregation layer, frame mean-pooling, a gated recurrent cell over the
//! frame sequence, a dense observation embedding, and two heads (per-cell
//! sigmoid mask, scalar threshold regression).

use alloc::vec;
use alloc::vec::Vec;

use crate::constraint::{window_cell, ConstraintMatrix};
use crate::env::{Action, CmdpEnv, EnvState, ACTION_COUNT, OBS_ENTITY_CHANNELS, OBS_SCALARS};
use crate::math::sigmoid;
use crate::nn::{bce, init_weight_region, GruSpec, Optimizer, OptimizerKind, ParamVector};
use crate::rng::DetRng;

/// Per-node feature dimension of a graph frame.
pub const NODE_FEAT: usize = 8;

/// Fixed output scale of the threshold head: the head regresses
/// h_c / HC_SCALE so the optimizer works in unit-magnitude targets.
pub const HC_SCALE: f64 = 10.0;

/// Snapshot of the operation graph as per-node feature vectors: goods,
/// device presence, incident one-hot, damage, agent presence, task source.
pub fn graph_frame(env: &CmdpEnv, state: &EnvState) -> Vec<Vec<f64>> {
    let s = &env.scenario;
    let n = s.op_graph.len();
    let mut frame = vec![vec![0.0; NODE_FEAT]; n];
    for (node, f) in frame.iter_mut().enumerate() {
        f[0] = (state.goods[node] as f64 / 10.0).min(1.0);
        f[1] = if s.op_graph.nodes[node].device_id.is_some() {
            1.0
        } else {
            0.0
        };
    }
    for inc in state.incidents.iter().filter(|i| i.is_active()) {
        frame[inc.node][2 + inc.itype.index()] = 1.0;
        frame[inc.node][5] = crate::math::tanh(inc.damage);
    }
    for agent in &state.agents {
        frame[agent.loc][6] = 1.0;
    }
    for (task, status) in state.tasks.iter().zip(state.omega.iter()) {
        if !status.is_terminal() {
            frame[task.node][7] = 1.0;
        }
    }
    frame
}

/// Ground-truth constraint labels for one agent: window cells holding a
/// constraint entity (agents or devices within potential safe-distance
/// conflict, active incident nodes, live task source nodes), plus the
/// scenario threshold.
pub fn label_oracle(env: &CmdpEnv, state: &EnvState, agent: usize) -> (ConstraintMatrix, u64) {
    let s = &env.scenario;
    let window = s.constants.window;
    let reach = s.constants.d_safe + 1.0;
    let center = s.op_graph.coord_of(state.agents[agent].loc);
    let mut m = ConstraintMatrix::zeros(window);
    let mut mark = |coord: (i64, i64)| {
        if let Some((r, c)) = window_cell(center, coord, window) {
            m.set(r, c, 1);
        }
    };
    for (j, other) in state.agents.iter().enumerate() {
        if j != agent {
            let coord = s.op_graph.coord_of(other.loc);
            if crate::math::euclid(center, coord) <= reach {
                mark(coord);
            }
        }
    }
    for dev in &state.devices {
        let coord = s.op_graph.coord_of(dev.loc);
        if crate::math::euclid(center, coord) <= reach {
            mark(coord);
        }
    }
    for inc in state.incidents.iter().filter(|i| i.is_active()) {
        mark(s.op_graph.coord_of(inc.node));
    }
    for (task, status) in state.tasks.iter().zip(state.omega.iter()) {
        if !status.is_terminal() {
            mark(s.op_graph.coord_of(task.node));
        }
    }
    (m, s.constants.h_c)
}

/// Architecture constants of the extractor network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractorSpec {
    pub window: usize,
    pub obs_dim: usize,
    pub embed: usize,
    pub hidden: usize,
    pub obs_embed: usize,
}

impl ExtractorSpec {
    pub fn for_env(env: &CmdpEnv) -> Self {
        let window = env.window();
        Self {
            window,
            obs_dim: window * window * OBS_ENTITY_CHANNELS + OBS_SCALARS,
            embed: 16,
            hidden: 16,
            obs_embed: 32,
        }
    }

    fn gru(&self) -> GruSpec {
        GruSpec {
            input: self.embed,
            hidden: self.hidden,
        }
    }

    fn cells(&self) -> usize {
        self.window * self.window
    }

    // Region sizes: node embed, aggregation, gru, obs embed, mc head,
    // hc head.
    fn region_sizes(&self) -> [usize; 6] {
        let e = self.embed;
        let joint = self.hidden + self.obs_embed;
        [
            NODE_FEAT * e + e,
            e * e + e,
            self.gru().param_count(),
            self.obs_dim * self.obs_embed + self.obs_embed,
            joint * self.cells() + self.cells(),
            joint + 1,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.region_sizes().iter().sum()
    }

    fn offsets(&self) -> [usize; 6] {
        let sizes = self.region_sizes();
        let mut off = [0; 6];
        let mut acc = 0;
        for (i, s) in sizes.iter().enumerate() {
            off[i] = acc;
            acc += s;
        }
        off
    }

    pub fn init(&self, rng: &mut DetRng) -> ParamVector {
        let mut p = ParamVector::zeros(self.param_count());
        let off = self.offsets();
        let sizes = self.region_sizes();
        let data = p.as_mut_slice();
        let e = self.embed;
        let joint = self.hidden + self.obs_embed;
        init_weight_region(&mut data[off[0]..off[0] + NODE_FEAT * e], NODE_FEAT, e, rng);
        init_weight_region(&mut data[off[1]..off[1] + e * e], e, e, rng);
        {
            let gru = self.gru().init(rng);
            data[off[2]..off[2] + sizes[2]].copy_from_slice(&gru);
        }
        init_weight_region(
            &mut data[off[3]..off[3] + self.obs_dim * self.obs_embed],
            self.obs_dim,
            self.obs_embed,
            rng,
        );
        init_weight_region(
            &mut data[off[4]..off[4] + joint * self.cells()],
            joint,
            self.cells(),
            rng,
        );
        init_weight_region(&mut data[off[5]..off[5] + joint], joint, 1, rng);
        p
    }
}

/// Forward cache for one sample.
pub struct ExtractorCache {
    frames: Vec<FrameCache>,
    gru_cache: crate::nn::GruCache,
    obs: Vec<f64>,
    obs_act: Vec<f64>,
    joint: Vec<f64>,
    mc_probs: Vec<f64>,
}

struct FrameCache {
    nodes: Vec<Vec<f64>>,
    embedded: Vec<Vec<f64>>,
    pooled: Vec<Vec<f64>>,
    aggregated: Vec<Vec<f64>>,
}

/// Trained extractor with the graph adjacency baked in.
pub struct ExtractorModel {
    pub spec: ExtractorSpec,
    pub params: ParamVector,
    /// Per-node neighbor lists including self.
    pub adjacency: Vec<Vec<usize>>,
}

impl ExtractorModel {
    pub fn new(spec: ExtractorSpec, adjacency: Vec<Vec<usize>>, rng: &mut DetRng) -> Self {
        let params = spec.init(rng);
        Self {
            spec,
            params,
            adjacency,
        }
    }

    pub fn adjacency_of(env: &CmdpEnv) -> Vec<Vec<usize>> {
        let g = &env.scenario.op_graph;
        (0..g.len())
            .map(|n| {
                let mut nb = g.neighbors(n);
                nb.push(n);
                nb
            })
            .collect()
    }

    /// Raw head outputs: per-cell probabilities and the unrounded
    /// threshold, with the cache needed for backward.
    pub fn forward(&self, frames: &[&[Vec<f64>]], obs: &[f64]) -> (Vec<f64>, f64, ExtractorCache) {
        assert!(!frames.is_empty(), "extractor needs at least one frame");
        assert_eq!(obs.len(), self.spec.obs_dim, "extractor obs shape");
        let p = self.params.as_slice();
        let off = self.spec.offsets();
        let e = self.spec.embed;
        let (w1, b1) = p[off[0]..off[1]].split_at(NODE_FEAT * e);
        let (w2, b2) = p[off[1]..off[2]].split_at(e * e);
        let gru_params = &p[off[2]..off[3]];
        let (w3, b3) = p[off[3]..off[4]].split_at(self.spec.obs_dim * self.spec.obs_embed);
        let joint_dim = self.spec.hidden + self.spec.obs_embed;
        let cells = self.spec.cells();
        let (w4, b4) = p[off[4]..off[5]].split_at(joint_dim * cells);
        let (w5, b5) = p[off[5]..].split_at(joint_dim);

        let mut frame_caches = Vec::with_capacity(frames.len());
        let mut embeds = Vec::with_capacity(frames.len());
        for frame in frames {
            let n = frame.len();
            let mut embedded = Vec::with_capacity(n);
            for node in frame.iter() {
                let mut h = b1.to_vec();
                for (i, &x) in node.iter().enumerate() {
                    if x != 0.0 {
                        for j in 0..e {
                            h[j] += x * w1[i * e + j];
                        }
                    }
                }
                for v in h.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                embedded.push(h);
            }
            let mut pooled = Vec::with_capacity(n);
            for nb in self.adjacency.iter().take(n) {
                let mut m = vec![0.0; e];
                for &j in nb {
                    for k in 0..e {
                        m[k] += embedded[j][k];
                    }
                }
                let scale = 1.0 / nb.len() as f64;
                for v in m.iter_mut() {
                    *v *= scale;
                }
                pooled.push(m);
            }
            let mut aggregated = Vec::with_capacity(n);
            let mut mean = vec![0.0; e];
            for m in &pooled {
                let mut g = b2.to_vec();
                for (i, &x) in m.iter().enumerate() {
                    if x != 0.0 {
                        for j in 0..e {
                            g[j] += x * w2[i * e + j];
                        }
                    }
                }
                for v in g.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                for k in 0..e {
                    mean[k] += g[k];
                }
                aggregated.push(g);
            }
            let scale = 1.0 / n.max(1) as f64;
            for v in mean.iter_mut() {
                *v *= scale;
            }
            embeds.push(mean);
            frame_caches.push(FrameCache {
                nodes: frame.to_vec(),
                embedded,
                pooled,
                aggregated,
            });
        }
        let (latent, gru_cache) = self.spec.gru().forward_seq(gru_params, &embeds);
        // Observation embedding (relu).
        let mut obs_act = b3.to_vec();
        for (i, &x) in obs.iter().enumerate() {
            if x != 0.0 {
                for j in 0..self.spec.obs_embed {
                    obs_act[j] += x * w3[i * self.spec.obs_embed + j];
                }
            }
        }
        for v in obs_act.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mut joint = latent;
        joint.extend_from_slice(&obs_act);
        let mut mc_probs = b4.to_vec();
        for (i, &x) in joint.iter().enumerate() {
            if x != 0.0 {
                for j in 0..cells {
                    mc_probs[j] += x * w4[i * cells + j];
                }
            }
        }
        for v in mc_probs.iter_mut() {
            *v = sigmoid(*v);
        }
        let mut hc = b5[0];
        for (i, &x) in joint.iter().enumerate() {
            hc += x * w5[i];
        }
        hc *= HC_SCALE;
        (
            mc_probs.clone(),
            hc,
            ExtractorCache {
                frames: frame_caches,
                gru_cache,
                obs: obs.to_vec(),
                obs_act,
                joint,
                mc_probs,
            },
        )
    }

    /// Exact gradient for upstream (d mc_probs, d hc_raw).
    pub fn backward(&self, cache: &ExtractorCache, d_mc: &[f64], d_hc: f64) -> Vec<f64> {
        let p = self.params.as_slice();
        let off = self.spec.offsets();
        let e = self.spec.embed;
        let joint_dim = self.spec.hidden + self.spec.obs_embed;
        let cells = self.spec.cells();
        let mut grad = vec![0.0; self.spec.param_count()];

        // Heads.
        let d_pre_mc: Vec<f64> = d_mc
            .iter()
            .zip(cache.mc_probs.iter())
            .map(|(&d, &y)| d * y * (1.0 - y))
            .collect();
        let mut d_joint = vec![0.0; joint_dim];
        {
            let w4 = &p[off[4]..off[4] + joint_dim * cells];
            let (g4, rest) = grad[off[4]..off[5]].split_at_mut(joint_dim * cells);
            for (i, &x) in cache.joint.iter().enumerate() {
                for j in 0..cells {
                    g4[i * cells + j] += x * d_pre_mc[j];
                    d_joint[i] += w4[i * cells + j] * d_pre_mc[j];
                }
            }
            for (j, r) in rest.iter_mut().enumerate() {
                *r += d_pre_mc[j];
            }
        }
        {
            let d_hc = d_hc * HC_SCALE;
            let w5 = &p[off[5]..off[5] + joint_dim];
            let (g5, b5) = grad[off[5]..].split_at_mut(joint_dim);
            for (i, &x) in cache.joint.iter().enumerate() {
                g5[i] += x * d_hc;
                d_joint[i] += w5[i] * d_hc;
            }
            b5[0] += d_hc;
        }
        let (d_latent, d_obs_act_raw) = d_joint.split_at(self.spec.hidden);
        // Observation embedder (relu derivative from output).
        {
            let d_pre: Vec<f64> = d_obs_act_raw
                .iter()
                .zip(cache.obs_act.iter())
                .map(|(&d, &y)| if y > 0.0 { d } else { 0.0 })
                .collect();
            let g3 = &mut grad[off[3]..off[4]];
            let (gw, gb) = g3.split_at_mut(self.spec.obs_dim * self.spec.obs_embed);
            for (i, &x) in cache.obs.iter().enumerate() {
                if x != 0.0 {
                    for j in 0..self.spec.obs_embed {
                        gw[i * self.spec.obs_embed + j] += x * d_pre[j];
                    }
                }
            }
            for (j, b) in gb.iter_mut().enumerate() {
                *b += d_pre[j];
            }
        }
        // Sequence cell.
        let gru_params = &p[off[2]..off[3]];
        let (g_gru, d_embeds) = self
            .spec
            .gru()
            .backward_seq(gru_params, &cache.gru_cache, d_latent);
        grad[off[2]..off[3]].copy_from_slice(&g_gru);
        // Per-frame graph layers.
        let w2 = &p[off[1]..off[1] + e * e];
        for (frame, d_embed) in cache.frames.iter().zip(d_embeds.iter()) {
            let n = frame.nodes.len();
            let scale = 1.0 / n.max(1) as f64;
            let mut d_embedded = vec![vec![0.0; e]; n];
            {
                let g2 = &mut grad[off[1]..off[2]];
                let (gw2, gb2) = g2.split_at_mut(e * e);
                for (node, g_out) in frame.aggregated.iter().enumerate() {
                    // d g_i = d_embed * scale, through relu.
                    let d_pre: Vec<f64> = d_embed
                        .iter()
                        .zip(g_out.iter())
                        .map(|(&d, &y)| if y > 0.0 { d * scale } else { 0.0 })
                        .collect();
                    let m = &frame.pooled[node];
                    for (i, &x) in m.iter().enumerate() {
                        if x != 0.0 {
                            for j in 0..e {
                                gw2[i * e + j] += x * d_pre[j];
                            }
                        }
                    }
                    for (j, b) in gb2.iter_mut().enumerate() {
                        *b += d_pre[j];
                    }
                    // Into the pooled mean, then spread to neighbors.
                    let nb = &self.adjacency[node];
                    let share = 1.0 / nb.len() as f64;
                    for &j_node in nb {
                        for k in 0..e {
                            let mut acc = 0.0;
                            for j in 0..e {
                                acc += w2[k * e + j] * d_pre[j];
                            }
                            d_embedded[j_node][k] += share * acc;
                        }
                    }
                }
            }
            let g1 = &mut grad[off[0]..off[1]];
            let (gw1, gb1) = g1.split_at_mut(NODE_FEAT * e);
            for (node, d_emb) in d_embedded.iter().enumerate() {
                let d_pre: Vec<f64> = d_emb
                    .iter()
                    .zip(frame.embedded[node].iter())
                    .map(|(&d, &y)| if y > 0.0 { d } else { 0.0 })
                    .collect();
                for (i, &x) in frame.nodes[node].iter().enumerate() {
                    if x != 0.0 {
                        for j in 0..e {
                            gw1[i * e + j] += x * d_pre[j];
                        }
                    }
                }
                for (j, b) in gb1.iter_mut().enumerate() {
                    *b += d_pre[j];
                }
            }
        }
        grad
    }

    /// Binarized extraction: cells at probability >= 0.5 become 1 (ties
    /// conservatively constrain), threshold clamped and rounded.
    pub fn extract(&self, frames: &[&[Vec<f64>]], obs: &[f64]) -> (ConstraintMatrix, u64) {
        let (probs, hc, _) = self.forward(frames, obs);
        let mut m = ConstraintMatrix::zeros(self.spec.window);
        for (i, &p) in probs.iter().enumerate() {
            m.cells[i] = if p >= 0.5 { 1 } else { 0 };
        }
        let hc = crate::math::round(hc).max(0.0) as u64;
        (m, hc)
    }
}

/// Per-cell binary cross-entropy between predicted probabilities and the
/// oracle mask, with the mean over cells built in.
pub fn loss_mc(pred: &[f64], label: &[u8]) -> (f64, Vec<f64>) {
    let labels: Vec<f64> = label.iter().map(|&v| v as f64).collect();
    bce(pred, &labels)
}

/// Squared error on the raw threshold output.
pub fn loss_hc(pred: f64, label: u64) -> (f64, f64) {
    let d = pred - label as f64;
    (d * d, 2.0 * d)
}

/// One training sample: a frame window, the entity observation, labels.
#[derive(Clone, Debug)]
pub struct ExtractorSample {
    /// [start, end) into the dataset frame store.
    pub frame_range: (usize, usize),
    pub obs: Vec<f64>,
    pub label_mc: Vec<u8>,
    pub label_hc: u64,
}

/// Dataset generated from random-policy rollouts. Frames are shared
/// between the samples of an episode.
#[derive(Clone, Debug)]
pub struct ExtractorDataset {
    pub window: usize,
    pub obs_dim: usize,
    pub frames: Vec<Vec<Vec<f64>>>,
    pub samples: Vec<ExtractorSample>,
    pub seed: u64,
}

/// Rolls `episodes` random-policy episodes and samples (graph window,
/// observation, labels) for every agent at every tick.
pub fn generate_dataset(
    env: &CmdpEnv,
    episodes: u64,
    seed: u64,
    frame_window: usize,
) -> ExtractorDataset {
    let mut rng = DetRng::stream(seed, "dataset");
    let mut dataset = ExtractorDataset {
        window: env.window(),
        obs_dim: env.window() * env.window() * OBS_ENTITY_CHANNELS + OBS_SCALARS,
        frames: Vec::new(),
        samples: Vec::new(),
        seed,
    };
    let n_agents = env.n_agents();
    for episode in 0..episodes {
        let mut state = env.reset(seed.wrapping_add(episode));
        let episode_start = dataset.frames.len();
        while !state.done {
            dataset.frames.push(graph_frame(env, &state));
            let end = dataset.frames.len();
            let start = end.saturating_sub(frame_window).max(episode_start);
            for agent in 0..n_agents {
                let (mc, hc) = label_oracle(env, &state, agent);
                let obs = env.observe(&state, agent).flat_entities();
                dataset.samples.push(ExtractorSample {
                    frame_range: (start, end),
                    obs,
                    label_mc: mc.cells.clone(),
                    label_hc: hc,
                });
            }
            let joint: Vec<Action> = (0..n_agents)
                .map(|_| Action::from_index(rng.below(ACTION_COUNT)).unwrap())
                .collect();
            env.step(&mut state, &joint);
        }
    }
    dataset
}

/// Held-out quality of a trained extractor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractorMetrics {
    pub cell_accuracy: f64,
    pub hc_mae: f64,
    pub train_loss: f64,
    pub train_samples: usize,
    pub holdout_samples: usize,
}

fn evaluate(
    model: &ExtractorModel,
    dataset: &ExtractorDataset,
    indices: &[usize],
) -> (f64, f64) {
    let mut correct = 0u64;
    let mut total = 0u64;
    let mut mae = 0.0;
    for &i in indices {
        let s = &dataset.samples[i];
        let frames: Vec<&[Vec<f64>]> = dataset.frames[s.frame_range.0..s.frame_range.1]
            .iter()
            .map(|f| f.as_slice())
            .collect();
        let (mc, hc) = model.extract(&frames, &s.obs);
        for (&got, &want) in mc.cells.iter().zip(s.label_mc.iter()) {
            if got == want {
                correct += 1;
            }
            total += 1;
        }
        mae += (hc as f64 - s.label_hc as f64).abs();
    }
    (
        correct as f64 / total.max(1) as f64,
        mae / indices.len().max(1) as f64,
    )
}

/// Trains on an 80/20 split (seeded shuffle) and reports held-out
/// metrics. `epochs = 0` returns the freshly initialized model.
pub fn train_extractor(
    env: &CmdpEnv,
    dataset: &ExtractorDataset,
    epochs: u64,
    lr: f64,
    batch: usize,
    seed: u64,
) -> (ExtractorModel, ExtractorMetrics) {
    assert!(!dataset.samples.is_empty(), "empty dataset");
    let spec = ExtractorSpec::for_env(env);
    assert_eq!(spec.obs_dim, dataset.obs_dim, "dataset/env window mismatch");
    let mut rng = DetRng::stream(seed, "extractor");
    let mut model = ExtractorModel::new(spec, ExtractorModel::adjacency_of(env), &mut rng);
    let mut opt = Optimizer::new(
        OptimizerKind::adam_default(),
        lr,
        model.spec.param_count(),
    );

    let mut order: Vec<usize> = (0..dataset.samples.len()).collect();
    rng.shuffle(&mut order);
    let split = (order.len() * 4) / 5;
    let (train_idx, holdout_idx) = order.split_at(split.max(1).min(order.len()));

    let mut train_loss = 0.0;
    for _ in 0..epochs {
        train_loss = 0.0;
        for chunk in train_idx.chunks(batch.max(1)) {
            let mut grad = vec![0.0; model.spec.param_count()];
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let s = &dataset.samples[i];
                let frames: Vec<&[Vec<f64>]> = dataset.frames[s.frame_range.0..s.frame_range.1]
                    .iter()
                    .map(|f| f.as_slice())
                    .collect();
                let (probs, hc_raw, cache) = model.forward(&frames, &s.obs);
                let (l_mc, d_mc) = loss_mc(&probs, &s.label_mc);
                let (l_hc, d_hc) = loss_hc(hc_raw, s.label_hc);
                train_loss += l_mc + l_hc;
                let g = model.backward(&cache, &d_mc, d_hc);
                for (acc, v) in grad.iter_mut().zip(g.iter()) {
                    *acc += v * scale;
                }
            }
            opt.apply(&mut model.params, &grad);
        }
        train_loss /= train_idx.len().max(1) as f64;
    }
    let (cell_accuracy, hc_mae) = evaluate(&model, dataset, holdout_idx);
    (
        model,
        ExtractorMetrics {
            cell_accuracy,
            hc_mae,
            train_loss,
            train_samples: train_idx.len(),
            holdout_samples: holdout_idx.len(),
        },
    )
}

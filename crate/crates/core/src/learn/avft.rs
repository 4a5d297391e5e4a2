//! Return-conditioned action-value predictor.
//!
//! A window of the last K steps is tokenized as K triples of
//! (return-to-go, state, action) — exactly 3K tokens — each projected to
//! a shared embedding dimension, aggregated by a gated recurrent cell,
//! and read out as a scalar Q(s, a). Windows shorter than K are
//! front-padded with zero tokens.

use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{Activation, GruSpec, MlpSpec, Optimizer, OptimizerKind, ParamVector};
use crate::rng::DetRng;

/// One window step: return-to-go before the step, flat observation, and
/// the action one-hot index.
#[derive(Clone, Debug)]
pub struct AvftStep {
    pub rtg: f64,
    pub obs: Vec<f64>,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvftSpec {
    /// Context length K in steps (3K tokens).
    pub context: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl AvftSpec {
    fn rtg_embed(&self) -> MlpSpec {
        MlpSpec::new(&[1, self.embed], Activation::Identity, Activation::Identity)
    }

    fn obs_embed(&self) -> MlpSpec {
        MlpSpec::new(
            &[self.obs_dim, self.embed],
            Activation::Identity,
            Activation::Identity,
        )
    }

    fn act_embed(&self) -> MlpSpec {
        MlpSpec::new(
            &[self.action_dim, self.embed],
            Activation::Identity,
            Activation::Identity,
        )
    }

    fn gru(&self) -> GruSpec {
        GruSpec {
            input: self.embed,
            hidden: self.hidden,
        }
    }

    fn head(&self) -> MlpSpec {
        MlpSpec::new(&[self.hidden, 1], Activation::Identity, Activation::Identity)
    }

    /// Region order: rtg embed, obs embed, action embed, gru, head.
    pub fn param_count(&self) -> usize {
        self.rtg_embed().param_count()
            + self.obs_embed().param_count()
            + self.act_embed().param_count()
            + self.gru().param_count()
            + self.head().param_count()
    }

    fn offsets(&self) -> [usize; 5] {
        let a = self.rtg_embed().param_count();
        let b = a + self.obs_embed().param_count();
        let c = b + self.act_embed().param_count();
        let d = c + self.gru().param_count();
        [a, b, c, d, d + self.head().param_count()]
    }

    pub fn init(&self, rng: &mut DetRng) -> ParamVector {
        let mut p = ParamVector::zeros(self.param_count());
        let [a, b, c, d, _] = self.offsets();
        let data = p.as_mut_slice();
        let mut tmp = self.rtg_embed().init(rng);
        data[..a].copy_from_slice(&tmp);
        tmp = self.obs_embed().init(rng);
        data[a..b].copy_from_slice(&tmp);
        tmp = self.act_embed().init(rng);
        data[b..c].copy_from_slice(&tmp);
        tmp = self.gru().init(rng);
        data[c..d].copy_from_slice(&tmp);
        let head = self.head().init(rng);
        data[d..].copy_from_slice(&head);
        p
    }

    /// Tokenizes a window into exactly 3K embedding inputs: zero padding
    /// tokens first, then (rtg, obs, action) triples per step.
    pub fn tokens(&self, params: &[f64], window: &[AvftStep]) -> Vec<Vec<f64>> {
        assert!(
            window.len() <= self.context,
            "window longer than context K"
        );
        let [a, b, c, _, _] = self.offsets();
        let rtg_spec = self.rtg_embed();
        let obs_spec = self.obs_embed();
        let act_spec = self.act_embed();
        let mut tokens = Vec::with_capacity(3 * self.context);
        let pad = 3 * (self.context - window.len());
        for _ in 0..pad {
            tokens.push(vec![0.0; self.embed]);
        }
        for step in window {
            tokens.push(rtg_spec.eval(&params[..a], &[step.rtg]));
            tokens.push(obs_spec.eval(&params[a..b], &step.obs));
            let mut onehot = vec![0.0; self.action_dim];
            onehot[step.action] = 1.0;
            tokens.push(act_spec.eval(&params[b..c], &onehot));
        }
        debug_assert_eq!(tokens.len(), 3 * self.context);
        tokens
    }

    /// Q value for a window ending at the queried (state, action).
    pub fn q_value(&self, params: &[f64], window: &[AvftStep]) -> f64 {
        let [_, _, c, d, _] = self.offsets();
        let tokens = self.tokens(params, window);
        let (h, _) = self.gru().forward_seq(&params[c..d], &tokens);
        self.head().eval(&params[d..], &h)[0]
    }

    /// Forward + exact backward for one window: returns (q, dq/dparams).
    pub fn q_with_grad(&self, params: &[f64], window: &[AvftStep]) -> (f64, Vec<f64>) {
        let [a, b, c, d, _] = self.offsets();
        let rtg_spec = self.rtg_embed();
        let obs_spec = self.obs_embed();
        let act_spec = self.act_embed();
        let gru_spec = self.gru();
        let head_spec = self.head();

        let pad = 3 * (self.context - window.len());
        // Token forward with caches for the three embedders.
        let mut tokens: Vec<Vec<f64>> = Vec::with_capacity(3 * self.context);
        let mut caches = Vec::with_capacity(window.len());
        for _ in 0..pad {
            tokens.push(vec![0.0; self.embed]);
        }
        let mut onehots = Vec::with_capacity(window.len());
        for step in window {
            let (t_r, c_r) = rtg_spec.forward(&params[..a], &[step.rtg]);
            tokens.push(t_r);
            let (t_o, c_o) = obs_spec.forward(&params[a..b], &step.obs);
            tokens.push(t_o);
            let mut onehot = vec![0.0; self.action_dim];
            onehot[step.action] = 1.0;
            let (t_a, c_a) = act_spec.forward(&params[b..c], &onehot);
            tokens.push(t_a);
            caches.push((c_r, c_o, c_a));
            onehots.push(onehot);
        }
        let (h, gru_cache) = gru_spec.forward_seq(&params[c..d], &tokens);
        let (q_vec, head_cache) = head_spec.forward(&params[d..], &h);
        let q = q_vec[0];

        let mut grad = vec![0.0; self.param_count()];
        let (g_head, dh) = head_spec.backward(&params[d..], &head_cache, &[1.0]);
        grad[d..].copy_from_slice(&g_head);
        let (g_gru, dtokens) = gru_spec.backward_seq(&params[c..d], &gru_cache, &dh);
        grad[c..d].copy_from_slice(&g_gru);
        for (i, (c_r, c_o, c_a)) in caches.iter().enumerate() {
            let base = pad + 3 * i;
            let (g_r, _) = rtg_spec.backward(&params[..a], c_r, &dtokens[base]);
            for (acc, v) in grad[..a].iter_mut().zip(g_r.iter()) {
                *acc += v;
            }
            let (g_o, _) = obs_spec.backward(&params[a..b], c_o, &dtokens[base + 1]);
            for (acc, v) in grad[a..b].iter_mut().zip(g_o.iter()) {
                *acc += v;
            }
            let (g_a, _) = act_spec.backward(&params[b..c], c_a, &dtokens[base + 2]);
            for (acc, v) in grad[b..c].iter_mut().zip(g_a.iter()) {
                *acc += v;
            }
        }
        (q, grad)
    }
}

/// Trainable predictor with a soft-updated target copy.
pub struct AvftModel {
    pub spec: AvftSpec,
    pub params: ParamVector,
    pub target: ParamVector,
    pub opt: Optimizer,
}

impl AvftModel {
    pub fn new(spec: AvftSpec, lr: f64, rng: &mut DetRng) -> Self {
        let params = spec.init(rng);
        let target = params.clone();
        let opt = Optimizer::new(OptimizerKind::adam_default(), lr, spec.param_count());
        Self {
            spec,
            params,
            target,
            opt,
        }
    }

    pub fn q(&self, window: &[AvftStep]) -> f64 {
        self.spec.q_value(&self.params, window)
    }

    pub fn q_target(&self, window: &[AvftStep]) -> f64 {
        self.spec.q_value(&self.target, window)
    }

    /// One MSE step toward the provided targets. Returns the mean loss.
    pub fn update(&mut self, windows: &[Vec<AvftStep>], targets: &[f64]) -> f64 {
        assert_eq!(windows.len(), targets.len());
        if windows.is_empty() {
            return 0.0;
        }
        let scale = 1.0 / windows.len() as f64;
        let mut grad = vec![0.0; self.spec.param_count()];
        let mut loss = 0.0;
        for (w, &y) in windows.iter().zip(targets.iter()) {
            let (q, g) = self.spec.q_with_grad(&self.params, w);
            let d = q - y;
            loss += d * d;
            let coef = 2.0 * d * scale;
            for (acc, v) in grad.iter_mut().zip(g.iter()) {
                *acc += coef * v;
            }
        }
        self.opt.apply(&mut self.params, &grad);
        loss * scale
    }

    pub fn soft_update(&mut self, tau: f64) {
        crate::nn::soft_update(&mut self.target, &self.params, tau);
    }
}

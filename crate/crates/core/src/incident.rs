//! Incident lifecycle: severity probabilities, triggering, resolution,
//! response effects, type-c damage accrual and spreading.

use alloc::vec::Vec;

use crate::graph::{IncidentType, OperationGraph};
use crate::math::{exp, softmax};
use crate::rng::DetRng;

/// Multinomial-logit severity model over the three levels I/II/III.
/// Each level k has logit alpha[k] + beta[k] * x[k] (scalar features).
#[derive(Clone, Debug, PartialEq)]
pub struct SeverityModel {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub features: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IncidentError {
    NonFiniteLogit,
    NegativeDt,
}

impl core::fmt::Display for IncidentError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            IncidentError::NonFiniteLogit => write!(f, "severity logits must be finite"),
            IncidentError::NegativeDt => write!(f, "damage step requires non-negative dt"),
        }
    }
}

impl SeverityModel {
    fn logits(&self) -> [f64; 3] {
        [
            self.alpha[0] + self.beta[0] * self.features[0],
            self.alpha[1] + self.beta[1] * self.features[1],
            self.alpha[2] + self.beta[2] * self.features[2],
        ]
    }
}

/// P(k) = exp(logit_k) / sum_k exp(logit_k), computed with max-subtraction
/// so large logits cannot overflow.
pub fn severity_probabilities(m: &SeverityModel) -> Result<[f64; 3], IncidentError> {
    let logits = m.logits();
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(IncidentError::NonFiniteLogit);
    }
    let p = softmax(&logits);
    Ok([p[0], p[1], p[2]])
}

/// An incident occurs when level I is not strictly dominant:
/// P(I) <= P(II) or P(I) <= P(III).
#[inline]
pub fn should_trigger(probs: &[f64; 3]) -> bool {
    probs[0] <= probs[1] || probs[0] <= probs[2]
}

/// A response has succeeded when level I strictly dominates:
/// P(I) > P(II) and P(I) > P(III).
#[inline]
pub fn is_resolved(probs: &[f64; 3]) -> bool {
    probs[0] > probs[1] && probs[0] > probs[2]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncidentStatus {
    Active,
    Resolved,
}

/// A live incident at a node.
#[derive(Clone, Debug, PartialEq)]
pub struct Incident {
    pub start_tick: u64,
    pub node: usize,
    pub itype: IncidentType,
    pub severity: SeverityModel,
    /// Feature vector at creation; spread children start from this.
    pub initial_features: [f64; 3],
    pub probs: [f64; 3],
    pub status: IncidentStatus,
    /// Accumulated environmental damage (type c only).
    pub damage: f64,
}

impl Incident {
    pub fn new(
        start_tick: u64,
        node: usize,
        itype: IncidentType,
        severity: SeverityModel,
    ) -> Result<Self, IncidentError> {
        let probs = severity_probabilities(&severity)?;
        let initial_features = severity.features;
        Ok(Self {
            start_tick,
            node,
            itype,
            severity,
            initial_features,
            probs,
            status: IncidentStatus::Active,
            damage: 0.0,
        })
    }

    pub fn is_active(&self) -> bool {
        self.status == IncidentStatus::Active
    }
}

/// Shifts the severity features by `effect` and recomputes probabilities;
/// flips to resolved once level I strictly dominates. No-op on resolved
/// incidents.
pub fn apply_response(inc: &mut Incident, effect: &[f64; 3]) -> Result<(), IncidentError> {
    if inc.status == IncidentStatus::Resolved {
        return Ok(());
    }
    for (x, &d) in inc.severity.features.iter_mut().zip(effect.iter()) {
        *x += d;
    }
    inc.probs = severity_probabilities(&inc.severity)?;
    if is_resolved(&inc.probs) {
        inc.status = IncidentStatus::Resolved;
    }
    Ok(())
}

/// Linear damage accrual for active type-c incidents: f += lambda * dt.
/// Types a/b accrue nothing; resolved incidents are frozen.
pub fn damage_step(inc: &mut Incident, lambda: f64, dt: u64) {
    if inc.status == IncidentStatus::Active && inc.itype == IncidentType::C {
        inc.damage += lambda * dt as f64;
    }
}

/// Loss shaping term for a type-c incident: lambda * e^(-f) while active,
/// 0 once resolved (the damage rate drops to zero).
pub fn loss_reward(inc: &Incident, lambda: f64) -> f64 {
    if inc.itype != IncidentType::C || inc.status == IncidentStatus::Resolved {
        return 0.0;
    }
    lambda * exp(-inc.damage)
}

/// Per-tick type-c spread: every active type-c incident ignites each
/// graph neighbor independently with probability `p_spread`, skipping
/// nodes that already host an active incident. New incidents start at
/// `tick` with the parent's (alpha, beta) and the parent's initial
/// feature vector, i.e. a fresh severity state.
///
/// Iterates incidents and neighbors in index order so the rng draw
/// sequence is reproducible.
pub fn step_spread(
    g: &OperationGraph,
    incidents: &[Incident],
    p_spread: f64,
    tick: u64,
    rng: &mut DetRng,
) -> Vec<Incident> {
    let mut occupied: Vec<bool> = {
        let mut v = alloc::vec![false; g.len()];
        for inc in incidents.iter().filter(|i| i.is_active()) {
            v[inc.node] = true;
        }
        v
    };
    let mut new = Vec::new();
    for inc in incidents {
        if !inc.is_active() || inc.itype != IncidentType::C {
            continue;
        }
        for nb in g.neighbors(inc.node) {
            if occupied[nb] {
                continue;
            }
            if rng.bernoulli(p_spread) {
                occupied[nb] = true;
                let severity = SeverityModel {
                    alpha: inc.severity.alpha,
                    beta: inc.severity.beta,
                    features: inc.initial_features,
                };
                // The parent's initial parameters always describe a
                // triggering state for scheduled type-c fires.
                if let Ok(spawned) = Incident::new(tick, nb, IncidentType::C, severity) {
                    new.push(spawned);
                }
            }
        }
    }
    new
}

//! The constrained multi-agent environment: state assembly, per-agent
//! observations, action semantics, transition dynamics for tasks, devices,
//! agents and incidents, and the weighted three-part reward.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraint::{
    apply_move, compute_budget, resolve_respond, violation_cells, BudgetMatrix, ConstraintKind,
    ConstraintMatrix, ConstraintThreshold, CostAccumulator, CostMatrix, FilterWorld,
    IncidentView, TaskView,
};
use crate::graph::{shortest_path_filtered, IncidentType, PathResult, Scenario, Task};
use crate::incident::{
    apply_response, damage_step, loss_reward, should_trigger, step_spread, Incident, SeverityModel,
};
use crate::rng::DetRng;

/// Movement component of an agent action. The declaration order is the
/// repair enumeration order used by the safety filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveDir {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl MoveDir {
    pub const ALL: [MoveDir; 5] = [
        MoveDir::Up,
        MoveDir::Down,
        MoveDir::Left,
        MoveDir::Right,
        MoveDir::Stay,
    ];

    /// Grid delta; y grows downward.
    #[inline]
    pub fn delta(self) -> (i64, i64) {
        match self {
            MoveDir::Up => (0, -1),
            MoveDir::Down => (0, 1),
            MoveDir::Left => (-1, 0),
            MoveDir::Right => (1, 0),
            MoveDir::Stay => (0, 0),
        }
    }
}

/// Response component of an agent action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RespondKind {
    None,
    RespondA,
    RespondBCarry,
    RespondC,
}

impl RespondKind {
    pub const ALL: [RespondKind; 4] = [
        RespondKind::None,
        RespondKind::RespondA,
        RespondKind::RespondBCarry,
        RespondKind::RespondC,
    ];

    pub fn incident_type(self) -> Option<IncidentType> {
        match self {
            RespondKind::None => None,
            RespondKind::RespondA => Some(IncidentType::A),
            RespondKind::RespondBCarry => Some(IncidentType::B),
            RespondKind::RespondC => Some(IncidentType::C),
        }
    }
}

/// One agent's action: a move plus an optional incident response.
/// Encoded as a flat discrete index in [0, 20).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Action {
    pub movement: MoveDir,
    pub respond: RespondKind,
}

pub const ACTION_COUNT: usize = 20;

impl Action {
    pub const STAY: Action = Action {
        movement: MoveDir::Stay,
        respond: RespondKind::None,
    };

    pub fn to_index(self) -> usize {
        let m = MoveDir::ALL.iter().position(|&d| d == self.movement).unwrap();
        let r = RespondKind::ALL
            .iter()
            .position(|&k| k == self.respond)
            .unwrap();
        m * RespondKind::ALL.len() + r
    }

    pub fn from_index(idx: usize) -> Option<Action> {
        if idx >= ACTION_COUNT {
            return None;
        }
        Some(Action {
            movement: MoveDir::ALL[idx / 4],
            respond: RespondKind::ALL[idx % 4],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskStatus {
    Pending,
    InProgress,
    Done,
    Failed,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Failed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub loc: usize,
    pub goal: usize,
    pub carrying: u64,
    /// Node the carried goods were taken from during a type-b response.
    pub carry_from: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceState {
    pub loc: usize,
    pub task: Option<usize>,
    pub carrying: u64,
    pub completed: u64,
}

/// Reward weights and magnitudes of the three objectives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_s: f64,
    pub r_w: f64,
}

/// Unweighted per-agent reward components for one transition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardComponents {
    pub succ: f64,
    pub work: f64,
    pub loss: f64,
    /// Whether any type-c incident is active; when false the loss weight
    /// is forced to zero.
    pub has_type_c: bool,
}

/// Weighted reward: alpha * R_succ + beta * R_work + gamma * R_loss,
/// with gamma forced to 0 when no type-c incident exists.
pub fn reward(components: &RewardComponents, w: &RewardWeights) -> f64 {
    let gamma = if components.has_type_c { w.gamma } else { 0.0 };
    w.alpha * components.succ + w.beta * components.work + gamma * components.loss
}

/// Agent-centered observation: `window x window x CHANNELS` spatial tensor
/// plus scalar features. Out-of-map cells stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub window: usize,
    /// Channel-major spatial data: channels[c][row * window + col].
    pub channels: Vec<Vec<f64>>,
    /// h_c (scaled), normalized tick, goal offset x, goal offset y.
    pub scalars: [f64; 4],
}

/// Spatial channels: device occupancy, agent occupancy, incident one-hot
/// (a, b, c), goods presence, constraint mask, budget state.
pub const OBS_CHANNELS: usize = 8;
/// Channels visible to the constraint extractor (everything before the
/// constraint mask, so the extractor never sees its own output).
pub const OBS_ENTITY_CHANNELS: usize = 6;
pub const OBS_SCALARS: usize = 4;

impl Observation {
    pub fn flat_len(window: usize) -> usize {
        window * window * OBS_CHANNELS + OBS_SCALARS
    }

    /// Flattened full view: all channels then scalars.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::flat_len(self.window));
        for c in &self.channels {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(&self.scalars);
        out
    }

    /// Flattened entity view (extractor input): the first
    /// OBS_ENTITY_CHANNELS channels then scalars.
    pub fn flat_entities(&self) -> Vec<f64> {
        let mut out =
            Vec::with_capacity(self.window * self.window * OBS_ENTITY_CHANNELS + OBS_SCALARS);
        for c in self.channels.iter().take(OBS_ENTITY_CHANNELS) {
            out.extend_from_slice(c);
        }
        out.extend_from_slice(&self.scalars);
        out
    }
}

/// Run-log events emitted by the environment, one line each.
#[derive(Clone, Debug, PartialEq)]
pub enum RunEvent {
    Trigger {
        tick: u64,
        node: usize,
        itype: IncidentType,
    },
    Spread {
        tick: u64,
        node: usize,
    },
    Resolve {
        tick: u64,
        node: usize,
        itype: IncidentType,
    },
    Violation {
        tick: u64,
        agent: usize,
        cell: (usize, usize),
        kind: ConstraintKind,
    },
    TaskDone {
        tick: u64,
        task: u64,
        device: usize,
    },
    TaskFailed {
        tick: u64,
        task: u64,
    },
    ResponseFailed {
        tick: u64,
        agent: usize,
    },
}

/// Result of one environment step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub rewards: Vec<f64>,
    pub components: Vec<RewardComponents>,
    pub done: bool,
    pub events: Vec<RunEvent>,
    /// Total executed violation-cost entries this tick.
    pub violations: u64,
}

/// Counts of task statuses plus per-device completions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskProgress {
    pub pending: usize,
    pub in_progress: usize,
    pub done: usize,
    pub failed: usize,
    pub per_device_completions: Vec<u64>,
}

/// Full mutable environment state for one episode.
#[derive(Clone, Debug)]
pub struct EnvState {
    pub tick: u64,
    pub mc: Vec<ConstraintMatrix>,
    pub hc: ConstraintThreshold,
    pub tasks: Vec<Task>,
    pub omega: Vec<TaskStatus>,
    pub incidents: Vec<Incident>,
    pub agents: Vec<AgentState>,
    pub devices: Vec<DeviceState>,
    pub accumulators: Vec<CostAccumulator>,
    /// Live per-node goods counts.
    pub goods: Vec<u64>,
    /// Distinct nodes that hosted an incident this episode.
    pub hosted_nodes: BTreeSet<usize>,
    /// Distinct nodes whose incident was resolved this episode.
    pub resolved_nodes: BTreeSet<usize>,
    pub done: bool,
    schedule_cursor: usize,
    initial_goods: u64,
    rng: DetRng,
}

impl EnvState {
    /// Active-incident views in incident-index order.
    pub fn incident_views(&self, scenario: &Scenario) -> Vec<IncidentView> {
        self.incidents
            .iter()
            .filter(|i| i.is_active())
            .map(|i| IncidentView {
                node: i.node,
                coord: scenario.op_graph.coord_of(i.node),
                itype: i.itype,
            })
            .collect()
    }

    /// Non-terminal task views.
    pub fn task_views(&self, scenario: &Scenario) -> Vec<TaskView> {
        self.tasks
            .iter()
            .zip(self.omega.iter())
            .filter(|(_, s)| !s.is_terminal())
            .map(|(t, _)| TaskView {
                node: t.node,
                coord: scenario.op_graph.coord_of(t.node),
                expected: t.expected,
                deadline: t.deadline,
                spent: t.spent,
            })
            .collect()
    }

    pub fn agent_positions(&self, scenario: &Scenario) -> Vec<(i64, i64)> {
        self.agents
            .iter()
            .map(|a| scenario.op_graph.coord_of(a.loc))
            .collect()
    }

    pub fn device_positions(&self, scenario: &Scenario) -> Vec<(i64, i64)> {
        self.devices
            .iter()
            .map(|d| scenario.op_graph.coord_of(d.loc))
            .collect()
    }

    /// Per-agent budget matrices from the current accumulators, threshold
    /// and constraint matrices.
    pub fn budgets(&self) -> Vec<BudgetMatrix> {
        self.accumulators
            .iter()
            .zip(self.mc.iter())
            .map(|(acc, m)| compute_budget(acc, self.hc, m))
            .collect()
    }

    pub fn any_active_incident(&self) -> bool {
        self.incidents.iter().any(|i| i.is_active())
    }

    fn any_active_type_c(&self) -> bool {
        self.incidents
            .iter()
            .any(|i| i.is_active() && i.itype == IncidentType::C)
    }
}

/// The environment: scenario plus transition dynamics. One instance per
/// worker; the state is single-owner mutable.
#[derive(Clone, Debug)]
pub struct CmdpEnv {
    pub scenario: Scenario,
}

impl CmdpEnv {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario }
    }

    pub fn n_agents(&self) -> usize {
        self.scenario.agent_starts.len()
    }

    pub fn window(&self) -> usize {
        self.scenario.constants.window
    }

    /// Fresh episode state: tick 0, starts applied, all tasks pending,
    /// no incidents, zero accumulators, seeded rng.
    pub fn reset(&self, seed: u64) -> EnvState {
        let s = &self.scenario;
        let window = s.constants.window;
        let goods: Vec<u64> = s.op_graph.nodes.iter().map(|n| n.goods).collect();
        let initial_goods: u64 = goods.iter().sum();
        let agents = s
            .agent_starts
            .iter()
            .map(|&loc| AgentState {
                loc,
                goal: loc,
                carrying: 0,
                carry_from: None,
            })
            .collect();
        let devices = s
            .device_starts
            .iter()
            .map(|&loc| DeviceState {
                loc,
                task: None,
                carrying: 0,
                completed: 0,
            })
            .collect();
        let n_agents = s.agent_starts.len();
        let mut state = EnvState {
            tick: 0,
            mc: vec![ConstraintMatrix::ones(window); n_agents],
            hc: ConstraintThreshold(s.constants.h_c),
            tasks: s.tasks.clone(),
            omega: vec![TaskStatus::Pending; s.tasks.len()],
            incidents: Vec::new(),
            agents,
            devices,
            accumulators: vec![CostAccumulator::zeros(window); n_agents],
            goods,
            hosted_nodes: BTreeSet::new(),
            resolved_nodes: BTreeSet::new(),
            done: false,
            schedule_cursor: 0,
            initial_goods,
            rng: DetRng::stream(seed, "env"),
        };
        self.refresh_goals(&mut state);
        state
    }

    /// World snapshot for the safety filter.
    pub fn filter_world_data(
        &self,
        state: &EnvState,
    ) -> (Vec<(i64, i64)>, Vec<(i64, i64)>, Vec<IncidentView>, Vec<TaskView>) {
        (
            state.agent_positions(&self.scenario),
            state.device_positions(&self.scenario),
            state.incident_views(&self.scenario),
            state.task_views(&self.scenario),
        )
    }

    /// Builds the filter world over borrowed snapshot slices.
    pub fn filter_world<'a>(
        &self,
        agent_pos: &'a [(i64, i64)],
        device_pos: &'a [(i64, i64)],
        incidents: &'a [IncidentView],
        tasks: &'a [TaskView],
    ) -> FilterWorld<'a> {
        let c = &self.scenario.constants;
        FilterWorld {
            window: c.window,
            d_safe: c.d_safe,
            ct: c.ct,
            resources: c.resources,
            grid: self.scenario.grid,
            agent_pos,
            device_pos,
            incidents,
            tasks,
        }
    }

    /// One transition. The joint action is expected to be already
    /// safety-filtered; the environment does not re-filter, it executes
    /// and logs whatever violations occur.
    pub fn step(&self, state: &mut EnvState, joint: &[Action]) -> StepResult {
        assert_eq!(joint.len(), state.agents.len(), "joint action arity");
        assert!(!state.done, "step on finished episode");
        let s = &self.scenario;
        let c = &s.constants;
        let tick = state.tick;
        let mut events = Vec::new();
        let mut components = vec![
            RewardComponents {
                has_type_c: false,
                ..Default::default()
            };
            state.agents.len()
        ];

        // Device positions are frozen at their pre-step cells for this
        // tick's constraint evaluation.
        let device_pos_snapshot = state.device_positions(s);

        // (1) Agent moves, clamped at the grid boundary.
        for (agent, action) in state.agents.iter_mut().zip(joint.iter()) {
            let pos = s.op_graph.coord_of(agent.loc);
            let new_pos = apply_move(pos, action.movement, s.grid);
            if let Some(node) = s.op_graph.node_at(new_pos) {
                agent.loc = node;
            }
        }

        // (2) Response actions advance incident state. Responders of one
        // incident pool their effect: n simultaneous applications per
        // tick, which makes the resolution time match CT / n (rounded up).
        let incident_views = state.incident_views(s);
        let mut responds: Vec<Option<usize>> = Vec::with_capacity(joint.len());
        for (i, action) in joint.iter().enumerate() {
            let pos = s.op_graph.coord_of(state.agents[i].loc);
            let target = resolve_respond(pos, action.respond, &incident_views);
            if action.respond != RespondKind::None && target.is_none() {
                components[i].succ -= c.r_s;
                events.push(RunEvent::ResponseFailed { tick, agent: i });
            }
            responds.push(target);
        }
        // Map view indices back to incident indices.
        let active_indices: Vec<usize> = state
            .incidents
            .iter()
            .enumerate()
            .filter(|(_, inc)| inc.is_active())
            .map(|(i, _)| i)
            .collect();
        for (view_idx, &inc_idx) in active_indices.iter().enumerate() {
            let responders: Vec<usize> = responds
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == Some(view_idx))
                .map(|(a, _)| a)
                .collect();
            if responders.is_empty() {
                continue;
            }
            let n = responders.len() as f64;
            let inc = &mut state.incidents[inc_idx];
            let e = c.effect[inc.itype.index()];
            let scaled = [e * n, -e * n, -e * n];
            apply_response(inc, &scaled).expect("finite severity state");
            // Type-b response: hold one good from the incident node while
            // clearing it.
            if inc.itype == IncidentType::B {
                for &a in &responders {
                    let agent = &mut state.agents[a];
                    if agent.carrying == 0 && state.goods[inc.node] > 0 {
                        state.goods[inc.node] -= 1;
                        agent.carrying = 1;
                        agent.carry_from = Some(inc.node);
                    }
                }
            }
            if !inc.is_active() {
                let node = inc.node;
                let itype = inc.itype;
                state.resolved_nodes.insert(node);
                events.push(RunEvent::Resolve { tick, node, itype });
                for &a in &responders {
                    components[a].succ += c.r_s;
                }
            }
        }
        // Agents put carried goods back when they stop responding to the
        // source incident or it resolves.
        for (i, agent_respond) in responds.iter().enumerate() {
            let agent = &mut state.agents[i];
            if let Some(from) = agent.carry_from {
                let still_clearing = agent_respond
                    .map(|v| {
                        active_indices
                            .get(v)
                            .map(|&idx| {
                                state.incidents[idx].node == from
                                    && state.incidents[idx].is_active()
                            })
                            .unwrap_or(false)
                    })
                    .unwrap_or(false);
                if !still_clearing {
                    state.goods[from] += agent.carrying;
                    agent.carrying = 0;
                    agent.carry_from = None;
                }
            }
        }

        // (3) Devices pull tasks from the queue and advance along
        // incident-free shortest paths.
        let mut done_tasks: Vec<(u64, usize)> = Vec::new();
        self.step_devices(state, &mut done_tasks);
        for (task, st) in state.tasks.iter_mut().zip(state.omega.iter()) {
            if *st == TaskStatus::InProgress {
                task.spent += 1;
            }
        }

        // (4) Scheduled triggers, type-c spread, damage accrual.
        while state.schedule_cursor < s.schedule.len()
            && s.schedule[state.schedule_cursor].tick == tick
        {
            let entry = &s.schedule[state.schedule_cursor];
            state.schedule_cursor += 1;
            let occupied = state
                .incidents
                .iter()
                .any(|i| i.is_active() && i.node == entry.node);
            if occupied {
                continue;
            }
            let severity = SeverityModel {
                alpha: entry.alpha,
                beta: entry.beta,
                features: entry.features,
            };
            if let Ok(inc) = Incident::new(tick, entry.node, entry.itype, severity) {
                if should_trigger(&inc.probs) {
                    state.hosted_nodes.insert(entry.node);
                    events.push(RunEvent::Trigger {
                        tick,
                        node: entry.node,
                        itype: entry.itype,
                    });
                    state.incidents.push(inc);
                }
            }
        }
        let spawned = step_spread(&s.op_graph, &state.incidents, c.p_spread, tick, &mut state.rng);
        for inc in spawned {
            state.hosted_nodes.insert(inc.node);
            events.push(RunEvent::Spread {
                tick,
                node: inc.node,
            });
            state.incidents.push(inc);
        }
        for inc in state.incidents.iter_mut() {
            damage_step(inc, c.lambda, 1);
        }

        // (5) Task status updates: deliveries become done, expired tasks
        // fail. A delivery counts when it lands strictly before the
        // deadline tick.
        for &(task_id, device) in &done_tasks {
            let idx = state.tasks.iter().position(|t| t.id == task_id).unwrap();
            state.omega[idx] = TaskStatus::Done;
            state.devices[device].completed += 1;
            events.push(RunEvent::TaskDone {
                tick,
                task: task_id,
                device,
            });
        }
        for (idx, task) in state.tasks.iter().enumerate() {
            if !state.omega[idx].is_terminal() && tick + 1 >= task.deadline {
                state.omega[idx] = TaskStatus::Failed;
                // Unassign the device working on it.
                for dev in state.devices.iter_mut() {
                    if dev.task == Some(idx) {
                        // Return anything it carried to its current node.
                        state.goods[dev.loc] += dev.carrying;
                        dev.carrying = 0;
                        dev.task = None;
                    }
                }
                events.push(RunEvent::TaskFailed {
                    tick,
                    task: task.id,
                });
            }
        }

        // (6) Rewards.
        let work_delta = {
            let done_now = done_tasks.len() as f64;
            let failed_now = events
                .iter()
                .filter(|e| matches!(e, RunEvent::TaskFailed { .. }))
                .count() as f64;
            c.r_w * done_now - c.r_w * failed_now
        };
        let loss_total: f64 = state
            .incidents
            .iter()
            .map(|i| loss_reward(i, c.lambda))
            .sum();
        let has_type_c = state.any_active_type_c();
        let weights = RewardWeights {
            alpha: c.weights.0,
            beta: c.weights.1,
            gamma: c.weights.2,
            r_s: c.r_s,
            r_w: c.r_w,
        };
        let mut rewards = Vec::with_capacity(state.agents.len());
        for comp in components.iter_mut() {
            comp.work = work_delta;
            comp.loss = loss_total;
            comp.has_type_c = has_type_c;
            rewards.push(reward(comp, &weights));
        }

        // (7) Executed violation accounting.
        let agent_pos = state.agent_positions(s);
        let incident_views_after = state.incident_views(s);
        let task_views = state.task_views(s);
        // Re-resolve responds against the post-response incident list so
        // indices match; resolved incidents drop out.
        let responds_after: Vec<Option<usize>> = joint
            .iter()
            .enumerate()
            .map(|(i, a)| {
                resolve_respond(
                    s.op_graph.coord_of(state.agents[i].loc),
                    a.respond,
                    &incident_views_after,
                )
            })
            .collect();
        let ctx = crate::constraint::ConstraintContext {
            window: c.window,
            d_safe: c.d_safe,
            ct: c.ct,
            resources: c.resources,
            agent_pos: &agent_pos,
            device_pos: &device_pos_snapshot,
            incidents: &incident_views_after,
            tasks: &task_views,
            responds: &responds_after,
        };
        let mut total_violations = 0;
        for i in 0..state.agents.len() {
            let cells = violation_cells(&ctx, i);
            let mut cost = CostMatrix::zeros(c.window);
            for &(row, col, kind) in &cells {
                if cost.cells[row * c.window + col] == 0 {
                    cost.cells[row * c.window + col] = 1;
                    events.push(RunEvent::Violation {
                        tick,
                        agent: i,
                        cell: (row, col),
                        kind,
                    });
                }
            }
            total_violations += cost.total();
            state.accumulators[i].add(&cost);
        }

        // Goods conservation is a hard invariant of every step.
        let live: u64 = state.goods.iter().sum::<u64>()
            + state.agents.iter().map(|a| a.carrying).sum::<u64>()
            + state.devices.iter().map(|d| d.carrying).sum::<u64>();
        assert_eq!(
            live, state.initial_goods,
            "goods conservation violated at tick {tick}"
        );

        state.tick += 1;
        self.refresh_goals(state);
        let all_terminal = state.omega.iter().all(|s| s.is_terminal());
        state.done = (all_terminal && !state.any_active_incident())
            || state.tick >= c.horizon;

        StepResult {
            rewards,
            components,
            done: state.done,
            events,
            violations: total_violations,
        }
    }

    fn step_devices(&self, state: &mut EnvState, done_tasks: &mut Vec<(u64, usize)>) {
        let s = &self.scenario;
        // Queue of unassigned pending tasks in work order.
        let order = crate::graph::task_queue_order(&state.tasks);
        let mut queue: Vec<usize> = order
            .into_iter()
            .filter(|&i| state.omega[i] == TaskStatus::Pending)
            .collect();
        queue.reverse(); // pop from the back

        let blocked_nodes: BTreeSet<usize> = state
            .incidents
            .iter()
            .filter(|i| i.is_active() && i.itype != IncidentType::A)
            .map(|i| i.node)
            .collect();
        let halted_nodes: BTreeSet<usize> = state
            .incidents
            .iter()
            .filter(|i| i.is_active())
            .map(|i| i.node)
            .collect();

        for dev_idx in 0..state.devices.len() {
            if state.devices[dev_idx].task.is_none() {
                // Pull the first queued task whose source is not under an
                // active incident; blocked tasks wait for a later pull.
                if let Some(pos) = queue
                    .iter()
                    .rposition(|&t| !halted_nodes.contains(&state.tasks[t].node))
                {
                    let task_idx = queue.remove(pos);
                    state.devices[dev_idx].task = Some(task_idx);
                    state.omega[task_idx] = TaskStatus::InProgress;
                }
            }
            let Some(task_idx) = state.devices[dev_idx].task else {
                continue;
            };
            // A device standing on an active incident node is halted.
            if halted_nodes.contains(&state.devices[dev_idx].loc) {
                continue;
            }
            let task = state.tasks[task_idx].clone();
            let carrying = state.devices[dev_idx].carrying;
            let target = if carrying == 0 { task.node } else { task.dest };
            let loc = state.devices[dev_idx].loc;
            if loc != target {
                let path = shortest_path_filtered(&s.op_graph, loc, target, |n| {
                    blocked_nodes.contains(&n)
                });
                match path {
                    PathResult::Found { path, .. } => {
                        if let Some(&next) = path.first() {
                            state.devices[dev_idx].loc = next;
                        }
                    }
                    PathResult::NoPath => {
                        // Queue up next to the blocked target: head for the
                        // nearest reachable neighbor and wait there.
                        let mut best: Option<(u64, usize, Vec<usize>)> = None;
                        for nb in s.op_graph.neighbors(target) {
                            if blocked_nodes.contains(&nb) {
                                continue;
                            }
                            if let PathResult::Found { path, dist } =
                                shortest_path_filtered(&s.op_graph, loc, nb, |n| {
                                    blocked_nodes.contains(&n)
                                })
                            {
                                let better = match &best {
                                    None => true,
                                    Some((d, n, _)) => dist < *d || (dist == *d && nb < *n),
                                };
                                if better {
                                    best = Some((dist, nb, path));
                                }
                            }
                        }
                        if let Some((_, _, path)) = best {
                            if let Some(&next) = path.first() {
                                state.devices[dev_idx].loc = next;
                            }
                        }
                    }
                }
            }
            let loc = state.devices[dev_idx].loc;
            if carrying == 0 && loc == task.node && !halted_nodes.contains(&loc) {
                let take = task.num.min(state.goods[loc]);
                state.goods[loc] -= take;
                state.devices[dev_idx].carrying = take;
            } else if carrying > 0 && loc == task.dest {
                state.goods[loc] += carrying;
                if carrying == task.num && state.tick < task.deadline {
                    done_tasks.push((task.id, dev_idx));
                } else {
                    // Short pickup can never complete; drop the goods and
                    // leave the task to expire.
                }
                state.devices[dev_idx].carrying = 0;
                if carrying == task.num && state.tick < task.deadline {
                    state.devices[dev_idx].task = None;
                }
            }
        }
    }

    /// Points each agent at the nearest active incident (device and
    /// shelf incidents take priority over fires, which multiply), falling
    /// back to the nearest live task source, else its own cell. Distance
    /// ties break by node index.
    fn refresh_goals(&self, state: &mut EnvState) {
        let s = &self.scenario;
        let mut incident_nodes: Vec<usize> = state
            .incidents
            .iter()
            .filter(|i| i.is_active() && i.itype != IncidentType::C)
            .map(|i| i.node)
            .collect();
        if incident_nodes.is_empty() {
            incident_nodes = state
                .incidents
                .iter()
                .filter(|i| i.is_active())
                .map(|i| i.node)
                .collect();
        }
        let task_nodes: Vec<usize> = state
            .tasks
            .iter()
            .zip(state.omega.iter())
            .filter(|(_, st)| !st.is_terminal())
            .map(|(t, _)| t.node)
            .collect();
        for agent in state.agents.iter_mut() {
            let from = s.op_graph.coord_of(agent.loc);
            let nearest = |nodes: &[usize]| -> Option<usize> {
                nodes
                    .iter()
                    .map(|&n| {
                        let d = crate::math::euclid(from, s.op_graph.coord_of(n));
                        (d, n)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, n)| n)
            };
            agent.goal = nearest(&incident_nodes)
                .or_else(|| nearest(&task_nodes))
                .unwrap_or(agent.loc);
        }
    }

    /// Deterministic agent-centered observation encoding.
    pub fn observe(&self, state: &EnvState, agent_id: usize) -> Observation {
        let s = &self.scenario;
        let c = &s.constants;
        let window = c.window;
        let mut channels = vec![vec![0.0; window * window]; OBS_CHANNELS];
        let center = s.op_graph.coord_of(state.agents[agent_id].loc);
        let put = |ch: &mut Vec<f64>, coord: (i64, i64), v: f64| {
            if let Some((row, col)) = crate::constraint::window_cell(center, coord, window) {
                ch[row * window + col] = v;
            }
        };
        for dev in &state.devices {
            put(&mut channels[0], s.op_graph.coord_of(dev.loc), 1.0);
        }
        for (j, agent) in state.agents.iter().enumerate() {
            if j != agent_id {
                put(&mut channels[1], s.op_graph.coord_of(agent.loc), 1.0);
            }
        }
        for inc in state.incidents.iter().filter(|i| i.is_active()) {
            let ch = 2 + inc.itype.index();
            put(&mut channels[ch], s.op_graph.coord_of(inc.node), 1.0);
        }
        for (node, &goods) in state.goods.iter().enumerate() {
            if goods > 0 {
                put(&mut channels[5], s.op_graph.coord_of(node), 1.0);
            }
        }
        // Constraint mask and budget state for this agent's window.
        let budget = compute_budget(&state.accumulators[agent_id], state.hc, &state.mc[agent_id]);
        for row in 0..window {
            for col in 0..window {
                let i = row * window + col;
                channels[6][i] = state.mc[agent_id].cells[i] as f64;
                let b = budget.cells[i];
                channels[7][i] = if state.hc.0 == 0 {
                    if b >= 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (b as f64 / state.hc.0 as f64).clamp(-1.0, 1.0)
                };
            }
        }
        let goal = s.op_graph.coord_of(state.agents[agent_id].goal);
        let scalars = [
            state.hc.0 as f64 / 10.0,
            state.tick as f64 / c.horizon as f64,
            (goal.0 - center.0) as f64 / s.grid.0 as f64,
            (goal.1 - center.1) as f64 / s.grid.1 as f64,
        ];
        Observation {
            window,
            channels,
            scalars,
        }
    }

    /// Pure projection of task statuses.
    pub fn task_progress(&self, state: &EnvState) -> TaskProgress {
        let mut p = TaskProgress {
            pending: 0,
            in_progress: 0,
            done: 0,
            failed: 0,
            per_device_completions: state.devices.iter().map(|d| d.completed).collect(),
        };
        for st in &state.omega {
            match st {
                TaskStatus::Pending => p.pending += 1,
                TaskStatus::InProgress => p.in_progress += 1,
                TaskStatus::Done => p.done += 1,
                TaskStatus::Failed => p.failed += 1,
            }
        }
        p
    }
}

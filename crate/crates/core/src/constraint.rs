//! Hard constraint predicates (time/space/resource), response-time
//! scaling, the violation-budget bookkeeping, and the safety layer that
//! repairs proposed joint actions.

use alloc::vec;
use alloc::vec::Vec;

use crate::env::{Action, MoveDir, RespondKind};
use crate::graph::{IncidentType, Task};
use crate::math::euclid;

/// Time constraint (response must leave enough slack to finish the task):
/// t_e + t_m <= t_d - t_n, evaluated without underflow.
#[inline]
pub fn check_time(task: &Task, t_m: u64) -> bool {
    task.expected + t_m + task.spent <= task.deadline
}

/// Space constraint: Euclidean distance between two positions must be at
/// least the minimum safe distance d.
#[inline]
pub fn check_space(p_i: (i64, i64), p_j: (i64, i64), d: f64) -> bool {
    euclid(p_i, p_j) >= d
}

/// Resource constraint: requirements must be covered componentwise.
/// Panics on dimension mismatch.
pub fn check_resource(required: &[u64], available: &[u64]) -> bool {
    assert_eq!(
        required.len(),
        available.len(),
        "resource dimension mismatch"
    );
    required.iter().zip(available.iter()).all(|(r, a)| r <= a)
}

/// Response duration for `n` cooperating agents: ceil(CT / n) ticks.
/// Panics if n == 0.
#[inline]
pub fn response_time(ct: u64, n: u64) -> u64 {
    assert!(n >= 1, "response requires at least one agent");
    ct.div_ceil(n)
}

/// Binary per-window-cell constraint mask: 1 marks a constraint entity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintMatrix {
    pub n: usize,
    pub cells: Vec<u8>,
}

impl ConstraintMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            n,
            cells: vec![1; n * n],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.cells[row * self.n + col] = v;
    }
}

/// Number of tolerated constraint violations per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintThreshold(pub u64);

/// Binary violation cost of one joint action, per window cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix {
    pub n: usize,
    pub cells: Vec<u8>,
}

impl CostMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().map(|&c| c as u64).sum()
    }
}

/// Per-cell cumulative violation counts over an episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostAccumulator {
    pub n: usize,
    pub cells: Vec<u64>,
}

impl CostAccumulator {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn add(&mut self, cost: &CostMatrix) {
        assert_eq!(self.n, cost.n, "cost shape mismatch");
        for (a, &c) in self.cells.iter_mut().zip(cost.cells.iter()) {
            *a += c as u64;
        }
    }
}

/// Remaining-budget matrix: (accumulated - h) masked by the constraint
/// matrix. Non-negative entries mean the budget at that cell is spent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetMatrix {
    pub n: usize,
    pub cells: Vec<i64>,
}

impl BudgetMatrix {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.cells[row * self.n + col]
    }
}

/// b[i,j] = (c_sum[i,j] - h) * m[i,j], explicitly 0 wherever m = 0.
pub fn compute_budget(
    c: &CostAccumulator,
    h: ConstraintThreshold,
    m: &ConstraintMatrix,
) -> BudgetMatrix {
    assert_eq!(c.n, m.n, "budget shape mismatch");
    let cells = c
        .cells
        .iter()
        .zip(m.cells.iter())
        .map(|(&sum, &mask)| {
            if mask == 0 {
                0
            } else {
                sum as i64 - h.0 as i64
            }
        })
        .collect();
    BudgetMatrix { n: c.n, cells }
}

/// Maps a world coordinate into an agent-centered window cell.
#[inline]
pub fn window_cell(center: (i64, i64), coord: (i64, i64), window: usize) -> Option<(usize, usize)> {
    let half = (window / 2) as i64;
    let col = coord.0 - center.0 + half;
    let row = coord.1 - center.1 + half;
    if row < 0 || col < 0 || row >= window as i64 || col >= window as i64 {
        None
    } else {
        Some((row as usize, col as usize))
    }
}

/// An active incident as the constraint layer sees it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentView {
    pub node: usize,
    pub coord: (i64, i64),
    pub itype: IncidentType,
}

/// A live (non-terminal) task as the constraint layer sees it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskView {
    pub node: usize,
    pub coord: (i64, i64),
    pub expected: u64,
    pub deadline: u64,
    pub spent: u64,
}

/// World snapshot the violation predicates evaluate against. Agent
/// positions are the positions being evaluated (post-move for executed
/// costs, partially-committed for filter lookahead); devices stay at
/// their pre-step positions.
#[derive(Clone, Debug)]
pub struct ConstraintContext<'a> {
    pub window: usize,
    pub d_safe: f64,
    pub ct: [u64; 3],
    pub resources: [u64; 3],
    pub agent_pos: &'a [(i64, i64)],
    pub device_pos: &'a [(i64, i64)],
    pub incidents: &'a [IncidentView],
    pub tasks: &'a [TaskView],
    /// Per agent: index into `incidents` it responds to this tick.
    pub responds: &'a [Option<usize>],
}

impl ConstraintContext<'_> {
    fn responders_of(&self, incident: usize) -> u64 {
        self.responds
            .iter()
            .filter(|r| **r == Some(incident))
            .count() as u64
    }

    fn responders_by_type(&self) -> [u64; 3] {
        let mut counts = [0u64; 3];
        for r in self.responds.iter().flatten() {
            counts[self.incidents[*r].itype.index()] += 1;
        }
        counts
    }
}

/// Which predicate a violation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Space,
    Time,
    Resource,
}

impl ConstraintKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::Space => "space",
            ConstraintKind::Time => "time",
            ConstraintKind::Resource => "resource",
        }
    }
}

/// Violated window cells for one agent under the given world snapshot,
/// as (row, col, kind) triples in a deterministic order.
///
/// Space: any other agent or device closer than d_safe marks that
/// entity's window cell. Time: a respond action whose duration would
/// break the deadline of a task sourced at the response node marks the
/// node's cell. Resource: responders of a type beyond the available
/// resources mark their response node's cell.
pub fn violation_cells(
    ctx: &ConstraintContext<'_>,
    agent: usize,
) -> Vec<(usize, usize, ConstraintKind)> {
    let mut out = Vec::new();
    let center = ctx.agent_pos[agent];

    for (j, &pos) in ctx.agent_pos.iter().enumerate() {
        if j == agent {
            continue;
        }
        if !check_space(center, pos, ctx.d_safe) {
            if let Some((r, c)) = window_cell(center, pos, ctx.window) {
                out.push((r, c, ConstraintKind::Space));
            }
        }
    }
    for &pos in ctx.device_pos.iter() {
        if !check_space(center, pos, ctx.d_safe) {
            if let Some((r, c)) = window_cell(center, pos, ctx.window) {
                out.push((r, c, ConstraintKind::Space));
            }
        }
    }

    if let Some(target) = ctx.responds[agent] {
        let inc = ctx.incidents[target];
        let t_m = response_time(ctx.ct[inc.itype.index()], ctx.responders_of(target));
        for task in ctx.tasks {
            if task.node == inc.node {
                let view = Task {
                    id: 0,
                    node: task.node,
                    deadline: task.deadline,
                    expected: task.expected,
                    spent: task.spent,
                    num: 1,
                    dest: usize::MAX,
                };
                if !check_time(&view, t_m) {
                    if let Some((r, c)) = window_cell(center, inc.coord, ctx.window) {
                        out.push((r, c, ConstraintKind::Time));
                    }
                }
            }
        }
        let counts = ctx.responders_by_type();
        let kind = inc.itype.index();
        let mut required = [0u64; 3];
        required[kind] = counts[kind];
        if !check_resource(&required, &ctx.resources) {
            if let Some((r, c)) = window_cell(center, inc.coord, ctx.window) {
                out.push((r, c, ConstraintKind::Resource));
            }
        }
    }
    out
}

/// Binary violation cost for one agent: violated cells collapsed into a
/// per-cell 0/1 matrix.
pub fn violation_cost(ctx: &ConstraintContext<'_>, agent: usize) -> CostMatrix {
    let mut cost = CostMatrix::zeros(ctx.window);
    for (r, c, _) in violation_cells(ctx, agent) {
        cost.cells[r * ctx.window + c] = 1;
    }
    cost
}

/// Static world data the safety filter needs beyond per-candidate state.
#[derive(Clone, Debug)]
pub struct FilterWorld<'a> {
    pub window: usize,
    pub d_safe: f64,
    pub ct: [u64; 3],
    pub resources: [u64; 3],
    pub grid: (i64, i64),
    /// Current (pre-move) agent positions.
    pub agent_pos: &'a [(i64, i64)],
    pub device_pos: &'a [(i64, i64)],
    pub incidents: &'a [IncidentView],
    pub tasks: &'a [TaskView],
}

/// Applies a move on the grid, clamping at the boundary (off-grid moves
/// behave as stay).
pub fn apply_move(pos: (i64, i64), dir: MoveDir, grid: (i64, i64)) -> (i64, i64) {
    let (dx, dy) = dir.delta();
    let nx = pos.0 + dx;
    let ny = pos.1 + dy;
    if nx < 0 || ny < 0 || nx >= grid.0 || ny >= grid.1 {
        pos
    } else {
        (nx, ny)
    }
}

/// Resolves a respond action against the active incidents: the type must
/// match and the incident node must be at or 4-adjacent to the agent's
/// position. Preference order: own cell, then up/down/left/right.
pub fn resolve_respond(
    pos: (i64, i64),
    kind: RespondKind,
    incidents: &[IncidentView],
) -> Option<usize> {
    let want = kind.incident_type()?;
    let mut probes = [(0i64, 0i64), (0, -1), (0, 1), (-1, 0), (1, 0)];
    for (dx, dy) in probes.iter_mut() {
        let at = (pos.0 + *dx, pos.1 + *dy);
        if let Some(idx) = incidents
            .iter()
            .position(|i| i.coord == at && i.itype == want)
        {
            return Some(idx);
        }
    }
    None
}

fn blocked_violations(
    ctx: &ConstraintContext<'_>,
    agent: usize,
    mc: &ConstraintMatrix,
    budget: &BudgetMatrix,
) -> u64 {
    let cost = violation_cost(ctx, agent);
    let mut n = 0;
    for i in 0..cost.cells.len() {
        if cost.cells[i] == 1 && mc.cells[i] == 1 && budget.cells[i] >= 0 {
            n += 1;
        }
    }
    n
}

/// Converts a proposed joint action into a safe joint action.
///
/// Agents are processed in ascending id order; earlier agents' repaired
/// choices are visible to later agents, later agents are assumed to hold
/// their current cell. An action is repaired when its one-step lookahead
/// violates a constraint-marked cell whose budget is spent; the repair
/// keeps the respond component and scans moves in enumeration order for a
/// violation-free alternative, falling back to stay-in-place (stay, none).
pub fn safety_filter(
    proposed: &[Action],
    world: &FilterWorld<'_>,
    mc: &[ConstraintMatrix],
    budgets: &[BudgetMatrix],
) -> Vec<Action> {
    let n = proposed.len();
    let mut safe: Vec<Action> = Vec::with_capacity(n);
    let mut pos: Vec<(i64, i64)> = world.agent_pos.to_vec();
    let mut responds: Vec<Option<usize>> = vec![None; n];

    for i in 0..n {
        let evaluate = |action: Action, pos: &mut Vec<(i64, i64)>, responds: &mut Vec<Option<usize>>| {
            let prev_pos = pos[i];
            let prev_resp = responds[i];
            pos[i] = apply_move(world.agent_pos[i], action.movement, world.grid);
            responds[i] = resolve_respond(pos[i], action.respond, world.incidents);
            let ctx = ConstraintContext {
                window: world.window,
                d_safe: world.d_safe,
                ct: world.ct,
                resources: world.resources,
                agent_pos: pos,
                device_pos: world.device_pos,
                incidents: world.incidents,
                tasks: world.tasks,
                responds,
            };
            let count = blocked_violations(&ctx, i, &mc[i], &budgets[i]);
            pos[i] = prev_pos;
            responds[i] = prev_resp;
            count
        };

        let chosen = if evaluate(proposed[i], &mut pos, &mut responds) == 0 {
            proposed[i]
        } else {
            let mut found = None;
            for dir in MoveDir::ALL {
                let candidate = Action {
                    movement: dir,
                    respond: proposed[i].respond,
                };
                if evaluate(candidate, &mut pos, &mut responds) == 0 {
                    found = Some(candidate);
                    break;
                }
            }
            found.unwrap_or(Action {
                movement: MoveDir::Stay,
                respond: RespondKind::None,
            })
        };
        pos[i] = apply_move(world.agent_pos[i], chosen.movement, world.grid);
        responds[i] = resolve_respond(pos[i], chosen.respond, world.incidents);
        safe.push(chosen);
    }
    safe
}

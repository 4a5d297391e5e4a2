//! Physical-space graph, the derived operation graph, task sequences, and
//! scenario data, plus the path oracle used by the environment dynamics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Node class in the physical space graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Shelf,
    Inbound,
    Outbound,
    Hub,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Shelf => "shelf",
            NodeClass::Inbound => "inbound",
            NodeClass::Outbound => "outbound",
            NodeClass::Hub => "hub",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalNode {
    pub id: String,
    pub class: NodeClass,
    pub goods: u64,
    /// Grid footprint covered by this area, inclusive: (x0, y0, x1, y1).
    pub cover: (i64, i64, i64, i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalEdge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Physical space graph: hubs, shelves, inbound/outbound areas and their
/// connectivity. Incident membership (the failed-node set) lives in the
/// environment state, not here.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalGraph {
    pub nodes: Vec<PhysicalNode>,
    pub edges: Vec<PhysicalEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphError {
    DuplicateNodeId(String),
    NonPositiveDistance { a: usize, b: usize },
    Disconnected,
    UnknownNode(String),
    OverlappingMotionAreas { x: i64, y: i64 },
    DuplicateCoord { x: i64, y: i64 },
}

impl core::fmt::Display for GraphError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GraphError::DuplicateNodeId(id) => write!(f, "duplicate node id: {id}"),
            GraphError::NonPositiveDistance { a, b } => {
                write!(f, "distance must be positive on edge {a}-{b}")
            }
            GraphError::Disconnected => write!(f, "graph must be connected"),
            GraphError::UnknownNode(id) => write!(f, "unknown node: {id}"),
            GraphError::OverlappingMotionAreas { x, y } => {
                write!(f, "overlapping motion areas at ({x},{y})")
            }
            GraphError::DuplicateCoord { x, y } => write!(f, "duplicate coord ({x},{y})"),
        }
    }
}

impl PhysicalGraph {
    /// Checks id uniqueness, positive distances and connectivity.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if seen.insert(n.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNodeId(n.id.clone()));
            }
        }
        for e in &self.edges {
            if !(e.distance > 0.0) {
                return Err(GraphError::NonPositiveDistance { a: e.a, b: e.b });
            }
        }
        if self.nodes.len() > 1 {
            let mut adj = vec![Vec::new(); self.nodes.len()];
            for e in &self.edges {
                adj[e.a].push(e.b);
                adj[e.b].push(e.a);
            }
            let mut visited = vec![false; self.nodes.len()];
            let mut stack = vec![0usize];
            visited[0] = true;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !visited[v] {
                        visited[v] = true;
                        stack.push(v);
                    }
                }
            }
            if visited.iter().any(|&v| !v) {
                return Err(GraphError::Disconnected);
            }
        }
        Ok(())
    }
}

/// One node of the operation graph: a grid cell a device or agent can
/// occupy while working.
#[derive(Clone, Debug, PartialEq)]
pub struct OpNode {
    pub coord: (i64, i64),
    /// Device whose motion area covers this cell, if any.
    pub device_id: Option<usize>,
    pub goods: u64,
    /// Seed value for the per-node damage accumulator.
    pub loss_seed: f64,
}

/// Grid-embedded operation graph. Edges are implicit 4-neighborhood unit
/// edges; the node index for a coord is looked up through `index`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperationGraph {
    pub nodes: Vec<OpNode>,
    index: BTreeMap<(i64, i64), usize>,
}

impl OperationGraph {
    pub fn from_nodes(nodes: Vec<OpNode>) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.coord, i).is_some() {
                return Err(GraphError::DuplicateCoord {
                    x: n.coord.0,
                    y: n.coord.1,
                });
            }
        }
        Ok(Self { nodes, index })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn node_at(&self, coord: (i64, i64)) -> Option<usize> {
        self.index.get(&coord).copied()
    }

    #[inline]
    pub fn coord_of(&self, node: usize) -> (i64, i64) {
        self.nodes[node].coord
    }

    /// Grid neighbors (4-neighborhood) that exist in the graph.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let (x, y) = self.nodes[node].coord;
        let mut out = Vec::with_capacity(4);
        for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
            if let Some(&i) = self.index.get(&(x + dx, y + dy)) {
                out.push(i);
            }
        }
        out
    }

    /// Number of unit edges (adjacent coord pairs).
    pub fn edge_count(&self) -> usize {
        let mut n = 0;
        for node in &self.nodes {
            let (x, y) = node.coord;
            // Count each edge once by looking right and down.
            if self.index.contains_key(&(x + 1, y)) {
                n += 1;
            }
            if self.index.contains_key(&(x, y + 1)) {
                n += 1;
            }
        }
        n
    }

    pub fn total_goods(&self) -> u64 {
        self.nodes.iter().map(|n| n.goods).sum()
    }
}

/// Builds the operation graph from the physical graph and device motion
/// areas. One node per covered coord, unit 4-neighbor edges, device ids
/// where a motion area covers the cell, goods copied from the physical
/// node covering the coord.
pub fn build_operation_graph(
    pg: &PhysicalGraph,
    motion_areas: &[(usize, Vec<(i64, i64)>)],
    region: &[(i64, i64)],
) -> Result<OperationGraph, GraphError> {
    let mut device_at: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for (dev, coords) in motion_areas {
        for &c in coords {
            if device_at.insert(c, *dev).is_some() {
                return Err(GraphError::OverlappingMotionAreas { x: c.0, y: c.1 });
            }
        }
    }
    let mut nodes = Vec::with_capacity(region.len());
    for &coord in region {
        let goods = pg
            .nodes
            .iter()
            .find(|n| {
                let (x0, y0, x1, y1) = n.cover;
                coord.0 >= x0 && coord.0 <= x1 && coord.1 >= y0 && coord.1 <= y1
            })
            .map(|n| n.goods)
            .unwrap_or(0);
        nodes.push(OpNode {
            coord,
            device_id: device_at.get(&coord).copied(),
            goods,
            loss_seed: 0.0,
        });
    }
    OperationGraph::from_nodes(nodes)
}

/// Result of a shortest-path query.
#[derive(Clone, Debug, PartialEq)]
pub enum PathResult {
    /// Intermediate + destination nodes (excludes the start; empty when
    /// start == goal) and the total distance in grid units.
    Found { path: Vec<usize>, dist: u64 },
    NoPath,
}

/// Unweighted BFS shortest path on the unit grid, skipping nodes for which
/// `blocked` returns true (the start node is always allowed). Neighbor
/// expansion order is the fixed up/down/left/right order, which makes the
/// returned path deterministic.
pub fn shortest_path_filtered<F: Fn(usize) -> bool>(
    g: &OperationGraph,
    a: usize,
    b: usize,
    blocked: F,
) -> PathResult {
    if a == b {
        return PathResult::Found {
            path: Vec::new(),
            dist: 0,
        };
    }
    if blocked(b) {
        return PathResult::NoPath;
    }
    let mut prev = vec![usize::MAX; g.len()];
    let mut seen = vec![false; g.len()];
    let mut queue = alloc::collections::VecDeque::new();
    seen[a] = true;
    queue.push_back(a);
    while let Some(u) = queue.pop_front() {
        if u == b {
            break;
        }
        for v in g.neighbors(u) {
            if !seen[v] && !blocked(v) {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    if !seen[b] {
        return PathResult::NoPath;
    }
    let mut path = vec![b];
    let mut cur = b;
    while prev[cur] != usize::MAX {
        cur = prev[cur];
        if cur == a {
            break;
        }
        path.push(cur);
    }
    path.reverse();
    let dist = path.len() as u64;
    PathResult::Found { path, dist }
}

/// Shortest path with no blocking.
pub fn shortest_path(g: &OperationGraph, a: usize, b: usize) -> PathResult {
    shortest_path_filtered(g, a, b, |_| false)
}

/// An inbound/outbound operation: move `num` goods from `node` to `dest`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub id: u64,
    /// Source node on the operation graph.
    pub node: usize,
    /// Deadline in ticks.
    pub deadline: u64,
    /// Expected completion time in ticks (queue key).
    pub expected: u64,
    /// Time already spent, in ticks.
    pub spent: u64,
    pub num: u64,
    /// Destination node.
    pub dest: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskError {
    NonPositiveDeadline(u64),
    NonPositiveExpected(u64),
    ZeroGoods(u64),
    SameSourceAndDest(u64),
}

impl core::fmt::Display for TaskError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TaskError::NonPositiveDeadline(id) => write!(f, "task {id}: deadline must be > 0"),
            TaskError::NonPositiveExpected(id) => {
                write!(f, "task {id}: expected time must be > 0")
            }
            TaskError::ZeroGoods(id) => write!(f, "task {id}: num must be >= 1"),
            TaskError::SameSourceAndDest(id) => {
                write!(f, "task {id}: node and destination must differ")
            }
        }
    }
}

impl Task {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.deadline == 0 {
            return Err(TaskError::NonPositiveDeadline(self.id));
        }
        if self.expected == 0 {
            return Err(TaskError::NonPositiveExpected(self.id));
        }
        if self.num == 0 {
            return Err(TaskError::ZeroGoods(self.id));
        }
        if self.node == self.dest {
            return Err(TaskError::SameSourceAndDest(self.id));
        }
        Ok(())
    }
}

/// Returns task indices ordered as a single work queue: ascending expected
/// completion time, ties broken by ascending task id.
pub fn task_queue_order(tasks: &[Task]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        tasks[a]
            .expected
            .cmp(&tasks[b].expected)
            .then(tasks[a].id.cmp(&tasks[b].id))
    });
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    A,
    B,
    C,
}

impl Layout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::A => "A",
            Layout::B => "B",
            Layout::C => "C",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncidentType {
    A,
    B,
    C,
}

impl IncidentType {
    pub fn as_str(&self) -> &'static str {
        match self {
            IncidentType::A => "a",
            IncidentType::B => "b",
            IncidentType::C => "c",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            IncidentType::A => 0,
            IncidentType::B => 1,
            IncidentType::C => 2,
        }
    }
}

/// A scheduled incident: at `tick`, an incident of `itype` is seeded at
/// `node` with the given severity-model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledIncident {
    pub tick: u64,
    pub node: usize,
    pub itype: IncidentType,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub features: [f64; 3],
}

/// Per-scenario constants: safety distance, response times, damage and
/// spread rates, reward weights, and environment sizing.
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub d_safe: f64,
    /// Response time CT per incident type (a, b, c), in ticks.
    pub ct: [u64; 3],
    /// Damage accrual rate for type-c incidents.
    pub lambda: f64,
    /// Per-neighbor per-tick ignition probability for type-c spread.
    pub p_spread: f64,
    /// Reward weights (alpha, beta, gamma) of the three objectives.
    pub weights: (f64, f64, f64),
    pub r_s: f64,
    pub r_w: f64,
    /// Ground-truth constraint threshold.
    pub h_c: u64,
    pub horizon: u64,
    /// Observation window side (odd).
    pub window: usize,
    /// Available response resources per incident type.
    pub resources: [u64; 3],
    /// Response effect magnitude per incident type: one application adds
    /// +e to the level-I feature and -e to levels II/III.
    pub effect: [f64; 3],
}

/// A complete experiment scenario: world, workload, incident schedule,
/// starting positions, seed and constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub layout: Layout,
    pub grid: (i64, i64),
    pub physical: PhysicalGraph,
    pub op_graph: OperationGraph,
    pub tasks: Vec<Task>,
    pub schedule: Vec<ScheduledIncident>,
    pub agent_starts: Vec<usize>,
    pub device_starts: Vec<usize>,
    pub seed: u64,
    pub constants: Constants,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    Graph(GraphError),
    Task(TaskError),
    BadStart { kind: &'static str, node: usize },
    ScheduleOutOfRange { entry: usize, node: usize },
    ScheduleNotSorted { entry: usize },
    EvenWindow(usize),
}

impl core::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScenarioError::Graph(e) => write!(f, "{e}"),
            ScenarioError::Task(e) => write!(f, "{e}"),
            ScenarioError::BadStart { kind, node } => {
                write!(f, "{kind} start references invalid node {node}")
            }
            ScenarioError::ScheduleOutOfRange { entry, node } => {
                write!(f, "incident schedule entry {entry} references invalid node {node}")
            }
            ScenarioError::ScheduleNotSorted { entry } => {
                write!(f, "incident schedule ticks must be non-decreasing (entry {entry})")
            }
            ScenarioError::EvenWindow(w) => write!(f, "observation window must be odd, got {w}"),
        }
    }
}

impl From<GraphError> for ScenarioError {
    fn from(e: GraphError) -> Self {
        ScenarioError::Graph(e)
    }
}

impl From<TaskError> for ScenarioError {
    fn from(e: TaskError) -> Self {
        ScenarioError::Task(e)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.physical.validate()?;
        for t in &self.tasks {
            t.validate()?;
            if t.node >= self.op_graph.len() || t.dest >= self.op_graph.len() {
                return Err(ScenarioError::BadStart {
                    kind: "task",
                    node: t.node.max(t.dest),
                });
            }
        }
        for &s in &self.agent_starts {
            if s >= self.op_graph.len() {
                return Err(ScenarioError::BadStart {
                    kind: "agent",
                    node: s,
                });
            }
        }
        for &s in &self.device_starts {
            if s >= self.op_graph.len() {
                return Err(ScenarioError::BadStart {
                    kind: "device",
                    node: s,
                });
            }
        }
        let mut prev = 0;
        for (i, e) in self.schedule.iter().enumerate() {
            if e.node >= self.op_graph.len() {
                return Err(ScenarioError::ScheduleOutOfRange {
                    entry: i,
                    node: e.node,
                });
            }
            if e.tick < prev {
                return Err(ScenarioError::ScheduleNotSorted { entry: i });
            }
            prev = e.tick;
        }
        if self.constants.window % 2 == 0 {
            return Err(ScenarioError::EvenWindow(self.constants.window));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_region(w: i64, h: i64) -> Vec<(i64, i64)> {
        let mut region = Vec::new();
        for y in 0..h {
            for x in 0..w {
                region.push((x, y));
            }
        }
        region
    }

    fn empty_pg() -> PhysicalGraph {
        PhysicalGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    #[test]
    fn single_cell_region() {
        let g = build_operation_graph(&empty_pg(), &[(0, alloc::vec![(0, 0)])], &[(0, 0)]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.nodes[0].device_id, Some(0));
    }

    #[test]
    fn two_cell_strip() {
        let g = build_operation_graph(&empty_pg(), &[], &grid_region(2, 1)).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn three_by_three_counts() {
        // Oracle: brute-force enumeration of adjacent coord pairs.
        let region = grid_region(3, 3);
        let mut expect_edges = 0;
        for &(x, y) in &region {
            for &(dx, dy) in &[(1i64, 0i64), (0, 1)] {
                if region.contains(&(x + dx, y + dy)) {
                    expect_edges += 1;
                }
            }
        }
        let g = build_operation_graph(&empty_pg(), &[], &region).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.edge_count(), expect_edges);
        assert_eq!(expect_edges, 12);
    }

    #[test]
    fn overlapping_areas_rejected() {
        let err = build_operation_graph(
            &empty_pg(),
            &[(0, alloc::vec![(0, 0)]), (1, alloc::vec![(0, 0)])],
            &grid_region(2, 1),
        )
        .unwrap_err();
        assert_eq!(err, GraphError::OverlappingMotionAreas { x: 0, y: 0 });
    }

    #[test]
    fn goods_copied_from_covering_physical_node() {
        let pg = PhysicalGraph {
            nodes: alloc::vec![PhysicalNode {
                id: alloc::string::String::from("s1"),
                class: NodeClass::Shelf,
                goods: 7,
                cover: (1, 0, 1, 0),
            }],
            edges: Vec::new(),
        };
        let g = build_operation_graph(&pg, &[], &grid_region(2, 1)).unwrap();
        assert_eq!(g.nodes[0].goods, 0);
        assert_eq!(g.nodes[1].goods, 7);
    }

    #[test]
    fn path_identity_case() {
        let g = build_operation_graph(&empty_pg(), &[], &grid_region(2, 1)).unwrap();
        assert_eq!(
            shortest_path(&g, 0, 0),
            PathResult::Found {
                path: Vec::new(),
                dist: 0
            }
        );
    }

    #[test]
    fn path_across_strip() {
        let g = build_operation_graph(&empty_pg(), &[], &grid_region(2, 1)).unwrap();
        match shortest_path(&g, 0, 1) {
            PathResult::Found { path, dist } => {
                assert_eq!(dist, 1);
                assert_eq!(path, alloc::vec![1]);
            }
            PathResult::NoPath => panic!("expected path"),
        }
    }

    #[test]
    fn four_by_four_corner_to_corner() {
        let g = build_operation_graph(&empty_pg(), &[], &grid_region(4, 4)).unwrap();
        let a = g.node_at((0, 0)).unwrap();
        let b = g.node_at((3, 3)).unwrap();
        match shortest_path(&g, a, b) {
            PathResult::Found { dist, .. } => assert_eq!(dist, 6),
            PathResult::NoPath => panic!("expected path"),
        }
    }

    #[test]
    fn blocked_path_reported() {
        // 3x1 strip with the middle cell blocked.
        let g = build_operation_graph(&empty_pg(), &[], &grid_region(3, 1)).unwrap();
        assert_eq!(
            shortest_path_filtered(&g, 0, 2, |n| n == 1),
            PathResult::NoPath
        );
    }

    #[test]
    fn queue_empty() {
        assert!(task_queue_order(&[]).is_empty());
    }

    fn task(id: u64, expected: u64) -> Task {
        Task {
            id,
            node: 0,
            deadline: 100,
            expected,
            spent: 0,
            num: 1,
            dest: 1,
        }
    }

    #[test]
    fn queue_sorted_by_expected_time() {
        let tasks = alloc::vec![task(0, 5), task(1, 3), task(2, 9)];
        assert_eq!(task_queue_order(&tasks), alloc::vec![1, 0, 2]);
    }

    #[test]
    fn queue_tie_breaks_by_id() {
        let tasks = alloc::vec![task(7, 4), task(2, 4)];
        // Index 1 holds id 2, which wins the tie.
        assert_eq!(task_queue_order(&tasks), alloc::vec![1, 0]);
    }

    #[test]
    fn task_invariants_enforced() {
        assert!(task(0, 5).validate().is_ok());
        let mut bad = task(0, 5);
        bad.num = 0;
        assert_eq!(bad.validate(), Err(TaskError::ZeroGoods(0)));
        let mut bad = task(1, 5);
        bad.dest = bad.node;
        assert_eq!(bad.validate(), Err(TaskError::SameSourceAndDest(1)));
    }

    #[test]
    fn physical_graph_validation() {
        let mut pg = PhysicalGraph {
            nodes: alloc::vec![
                PhysicalNode {
                    id: alloc::string::String::from("a"),
                    class: NodeClass::Hub,
                    goods: 0,
                    cover: (0, 0, 0, 0),
                },
                PhysicalNode {
                    id: alloc::string::String::from("b"),
                    class: NodeClass::Shelf,
                    goods: 3,
                    cover: (1, 0, 1, 0),
                },
            ],
            edges: alloc::vec![PhysicalEdge {
                a: 0,
                b: 1,
                distance: 2.0
            }],
        };
        assert!(pg.validate().is_ok());
        pg.edges[0].distance = 0.0;
        assert_eq!(
            pg.validate(),
            Err(GraphError::NonPositiveDistance { a: 0, b: 1 })
        );
        pg.edges.clear();
        assert_eq!(pg.validate(), Err(GraphError::Disconnected));
    }
}

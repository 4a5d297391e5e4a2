//! Cross-module property tests with independent oracles.

use proptest::prelude::*;
use warden_core::constraint::{
    compute_budget, safety_filter, violation_cost, BudgetMatrix, ConstraintContext,
    ConstraintMatrix, ConstraintThreshold, CostAccumulator, CostMatrix, FilterWorld,
};
use warden_core::env::{Action, MoveDir, RespondKind};
use warden_core::graph::{
    build_operation_graph, shortest_path, task_queue_order, PathResult, PhysicalGraph, Task,
};
use warden_core::incident::{severity_probabilities, SeverityModel};
use warden_core::rng::DetRng;

fn empty_pg() -> PhysicalGraph {
    PhysicalGraph {
        nodes: Vec::new(),
        edges: Vec::new(),
    }
}

/// Independent oracle: breadth-first distances over explicit adjacency,
/// built without touching the graph module's neighbor logic.
fn bfs_oracle(coords: &[(i64, i64)], from: usize) -> Vec<Option<u64>> {
    let mut dist = vec![None; coords.len()];
    dist[from] = Some(0);
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for (v, &c) in coords.iter().enumerate() {
            let dd = (coords[u].0 - c.0).abs() + (coords[u].1 - c.1).abs();
            if dd == 1 && dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

#[test]
fn shortest_path_matches_bfs_oracle_on_random_grids() {
    for seed in 0..100 {
        let mut rng = DetRng::seed_from(seed);
        // Random connected subset of a 5x5 board, <= 25 nodes: grow a
        // random tree-ish region from the origin.
        let mut region = vec![(0i64, 0i64)];
        while region.len() < 5 + rng.below(21) {
            let &(x, y) = &region[rng.below(region.len())];
            let (dx, dy) = [(0, 1), (0, -1), (1, 0), (-1, 0)][rng.below(4)];
            let c = (x + dx, y + dy);
            if c.0 >= 0 && c.1 >= 0 && c.0 < 5 && c.1 < 5 && !region.contains(&c) {
                region.push(c);
            }
        }
        let g = build_operation_graph(&empty_pg(), &[], &region).unwrap();
        for a in 0..g.len() {
            let oracle = bfs_oracle(&region, a);
            for b in 0..g.len() {
                match (shortest_path(&g, a, b), oracle[b]) {
                    (PathResult::Found { dist, path }, Some(want)) => {
                        assert_eq!(dist, want, "seed {seed} {a}->{b}");
                        assert_eq!(path.len() as u64, dist);
                    }
                    (PathResult::NoPath, None) => {}
                    (got, want) => panic!("seed {seed} {a}->{b}: {got:?} vs {want:?}"),
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn queue_order_is_sorted_permutation(expected in proptest::collection::vec(0u64..100, 0..20)) {
        let tasks: Vec<Task> = expected
            .iter()
            .enumerate()
            .map(|(id, &e)| Task {
                id: id as u64,
                node: 0,
                deadline: 1000,
                expected: e,
                spent: 0,
                num: 1,
                dest: 1,
            })
            .collect();
        let order = task_queue_order(&tasks);
        // Permutation of the input indices.
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..tasks.len()).collect::<Vec<_>>());
        // Non-decreasing in expected time, ids break ties ascending.
        for w in order.windows(2) {
            let (a, b) = (&tasks[w[0]], &tasks[w[1]]);
            prop_assert!(a.expected < b.expected || (a.expected == b.expected && a.id < b.id));
        }
    }

    #[test]
    fn severity_probabilities_form_distribution(
        alpha in proptest::array::uniform3(-30.0f64..30.0),
        beta in proptest::array::uniform3(-5.0f64..5.0),
        feats in proptest::array::uniform3(-8.0f64..8.0),
    ) {
        let p = severity_probabilities(&SeverityModel {
            alpha,
            beta,
            features: feats,
        })
        .unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn budget_matches_trajectory_reaccumulation(
        steps in proptest::collection::vec(proptest::collection::vec(0u8..2, 9), 1..30),
        h in 0u64..6,
        mask in proptest::collection::vec(0u8..2, 9),
    ) {
        // Accumulate through the API.
        let mut acc = CostAccumulator::zeros(3);
        for s in &steps {
            acc.add(&CostMatrix { n: 3, cells: s.clone() });
        }
        let m = ConstraintMatrix { n: 3, cells: mask.clone() };
        let b = compute_budget(&acc, ConstraintThreshold(h), &m);
        // Oracle: re-accumulate by hand and apply the formula directly.
        for cell in 0..9 {
            let total: i64 = steps.iter().map(|s| s[cell] as i64).sum();
            let want = if mask[cell] == 0 { 0 } else { total - h as i64 };
            prop_assert_eq!(b.cells[cell], want);
        }
    }
}

fn stay() -> Action {
    Action {
        movement: MoveDir::Stay,
        respond: RespondKind::None,
    }
}

/// Executed violations of a joint move on a 5x5 board: agents at their
/// post-move cells, devices static.
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
            ct: [4, 4, 6],
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

#[test]
fn filter_output_violation_free_when_possible() {
    // Random pairwise-safe states on a 25-cell map with exhausted
    // budgets: exhaustive enumeration certifies a violation-free joint
    // move exists, and the filter must find one. The acceptance suite
    // runs the full 10k-state version; this is the fast core check.
    let d_safe = 2.0;
    let mut rng = DetRng::seed_from(1234);
    let mut tested = 0;
    while tested < 500 {
        let n_agents = 1 + rng.below(3);
        let n_devices = rng.below(3);
        let mut cells: Vec<(i64, i64)> = Vec::new();
        for _ in 0..n_agents + n_devices {
            cells.push((rng.below(5) as i64, rng.below(5) as i64));
        }
        let (agents, devices) = cells.split_at(n_agents);
        // Keep only pairwise-safe starting states (stay is then safe).
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

        // Exhaustive oracle: some joint move must be violation-free.
        let best = enumerate_joint_moves(n_agents)
            .iter()
            .map(|mv| executed_violations(agents, devices, mv, d_safe))
            .min()
            .unwrap();
        assert_eq!(best, 0, "oracle: stay-all should be violation-free");

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
            ct: [4, 4, 6],
            resources: [3, 3, 3],
            grid: (5, 5),
            agent_pos: agents,
            device_pos: devices,
            incidents: &[],
            tasks: &[],
        };
        let safe = safety_filter(&proposed, &world, &mc, &budgets);
        let moves: Vec<MoveDir> = safe.iter().map(|a| a.movement).collect();
        assert_eq!(
            executed_violations(agents, devices, &moves, d_safe),
            0,
            "filter left violations: agents {agents:?} devices {devices:?} proposed {proposed:?}"
        );
    }
}

#[test]
fn filter_idempotent_on_random_states() {
    let mut rng = DetRng::seed_from(777);
    for _ in 0..300 {
        let n_agents = 1 + rng.below(3);
        let agents: Vec<(i64, i64)> = (0..n_agents)
            .map(|_| (rng.below(5) as i64, rng.below(5) as i64))
            .collect();
        let devices: Vec<(i64, i64)> = (0..rng.below(3))
            .map(|_| (rng.below(5) as i64, rng.below(5) as i64))
            .collect();
        let mc: Vec<ConstraintMatrix> = (0..n_agents).map(|_| ConstraintMatrix::ones(5)).collect();
        let acc = CostAccumulator::zeros(5);
        let budgets: Vec<BudgetMatrix> = (0..n_agents)
            .map(|_| compute_budget(&acc, ConstraintThreshold(rng.below(3) as u64), &mc[0]))
            .collect();
        let proposed: Vec<Action> = (0..n_agents)
            .map(|_| Action {
                movement: MoveDir::ALL[rng.below(5)],
                respond: RespondKind::None,
            })
            .collect();
        let world = FilterWorld {
            window: 5,
            d_safe: 2.0,
            ct: [4, 4, 6],
            resources: [3, 3, 3],
            grid: (5, 5),
            agent_pos: &agents,
            device_pos: &devices,
            incidents: &[],
            tasks: &[],
        };
        let once = safety_filter(&proposed, &world, &mc, &budgets);
        let twice = safety_filter(&once, &world, &mc, &budgets);
        assert_eq!(once, twice);
    }
}

#[test]
fn stay_all_never_modified_below_threshold() {
    // While the accumulated count stays strictly under h, the filter
    // leaves actions alone on account of those cells.
    let agents = [(1i64, 2i64), (2i64, 2i64)];
    let world = FilterWorld {
        window: 5,
        d_safe: 2.0,
        ct: [4, 4, 6],
        resources: [3, 3, 3],
        grid: (5, 5),
        agent_pos: &agents,
        device_pos: &[],
        incidents: &[],
        tasks: &[],
    };
    let mc = [ConstraintMatrix::ones(5), ConstraintMatrix::ones(5)];
    let h = 5;
    let mut acc = [CostAccumulator::zeros(5), CostAccumulator::zeros(5)];
    let proposed = vec![stay(), stay()];
    for step in 0..h {
        let budgets: Vec<BudgetMatrix> = (0..2)
            .map(|i| compute_budget(&acc[i], ConstraintThreshold(h as u64), &mc[i]))
            .collect();
        let safe = safety_filter(&proposed, &world, &mc, &budgets);
        assert_eq!(safe, proposed, "modified at accumulated count {step}");
        // Both agents violate at each other's cells each tick.
        let responds = [None, None];
        for i in 0..2 {
            let ctx = ConstraintContext {
                window: 5,
                d_safe: 2.0,
                ct: [4, 4, 6],
                resources: [3, 3, 3],
                agent_pos: &agents,
                device_pos: &[],
                incidents: &[],
                tasks: &[],
                responds: &responds,
            };
            let cost = violation_cost(&ctx, i);
            acc[i].add(&cost);
        }
    }
    // At h accumulated violations the budget is spent and the filter
    // intervenes.
    let budgets: Vec<BudgetMatrix> = (0..2)
        .map(|i| compute_budget(&acc[i], ConstraintThreshold(h as u64), &mc[i]))
        .collect();
    let safe = safety_filter(&proposed, &world, &mc, &budgets);
    assert_ne!(safe, proposed);
}

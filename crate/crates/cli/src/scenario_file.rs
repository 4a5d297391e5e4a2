//! Scenario text format: strict key/value sections, documented in
//! docs/scenario-format.md. `save` writes the canonical form; loading a
//! canonical file and saving it again is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use warden_core::graph::{
    build_operation_graph, Constants, IncidentType, Layout, PhysicalEdge, PhysicalGraph,
    PhysicalNode, Scenario, ScheduledIncident, Task,
};

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read scenario: {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("parse scenario: {}", path.display()))
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::write(path, format_scenario(scenario))
        .with_context(|| format!("write scenario: {}", path.display()))
}

fn parse_class(s: &str) -> Result<warden_core::graph::NodeClass> {
    use warden_core::graph::NodeClass::*;
    Ok(match s {
        "shelf" => Shelf,
        "inbound" => Inbound,
        "outbound" => Outbound,
        "hub" => Hub,
        other => bail!("unknown node class '{other}'"),
    })
}

fn parse_itype(s: &str) -> Result<IncidentType> {
    Ok(match s {
        "a" => IncidentType::A,
        "b" => IncidentType::B,
        "c" => IncidentType::C,
        other => bail!("unknown incident type '{other}'"),
    })
}

struct Cursor<'a> {
    parts: std::str::SplitWhitespace<'a>,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a str, line_no: usize) -> Self {
        Self {
            parts: line.split_whitespace(),
            line_no,
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.parts
            .next()
            .ok_or_else(|| anyhow!("line {}: unexpected end of line", self.line_no))
    }

    fn lit(&mut self, expect: &str) -> Result<()> {
        let got = self.word()?;
        if got != expect {
            bail!("line {}: expected '{expect}', got '{got}'", self.line_no);
        }
        Ok(())
    }

    fn u64(&mut self) -> Result<u64> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| anyhow!("line {}: expected integer, got '{w}'", self.line_no))
    }

    fn i64(&mut self) -> Result<i64> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| anyhow!("line {}: expected integer, got '{w}'", self.line_no))
    }

    fn f64(&mut self) -> Result<f64> {
        let w = self.word()?;
        w.parse()
            .map_err(|_| anyhow!("line {}: expected number, got '{w}'", self.line_no))
    }

    fn coord(&mut self) -> Result<(i64, i64)> {
        Ok((self.i64()?, self.i64()?))
    }

    fn triple_f64(&mut self) -> Result<[f64; 3]> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }

    fn triple_u64(&mut self) -> Result<[u64; 3]> {
        Ok([self.u64()?, self.u64()?, self.u64()?])
    }

    fn finish(mut self) -> Result<()> {
        if let Some(extra) = self.parts.next() {
            bail!("line {}: unexpected trailing '{extra}'", self.line_no);
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut layout: Option<Layout> = None;
    let mut seed: Option<u64> = None;
    let mut grid: Option<(i64, i64)> = None;
    let mut constants: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut phys_nodes: Vec<PhysicalNode> = Vec::new();
    let mut phys_edges: Vec<(String, String, f64)> = Vec::new();
    let mut devices: Vec<((i64, i64, i64, i64), (i64, i64))> = Vec::new();
    let mut tasks_raw: Vec<(u64, (i64, i64), u64, u64, u64, u64, (i64, i64))> = Vec::new();
    let mut incidents_raw: Vec<(u64, (i64, i64), IncidentType, [f64; 3], [f64; 3], [f64; 3])> =
        Vec::new();
    let mut agents_raw: Vec<(i64, i64)> = Vec::new();

    let mut section = "";
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[constants]" => "constants",
                "[physical]" => "physical",
                "[devices]" => "devices",
                "[tasks]" => "tasks",
                "[incidents]" => "incidents",
                "[agents]" => "agents",
                other => bail!("line {line_no}: unknown section {other}"),
            };
            continue;
        }
        let mut c = Cursor::new(line, line_no);
        match section {
            "" => {
                let key = c.word()?;
                match key {
                    "layout" => {
                        layout = Some(match c.word()? {
                            "A" => Layout::A,
                            "B" => Layout::B,
                            "C" => Layout::C,
                            other => bail!("line {line_no}: unknown layout '{other}'"),
                        });
                    }
                    "seed" => seed = Some(c.u64()?),
                    "grid" => grid = Some(c.coord()?),
                    other => bail!("line {line_no}: unknown top-level key '{other}'"),
                }
                c.finish()?;
            }
            "constants" => {
                let key = c.word()?;
                let values: Vec<f64> = match key {
                    "d_safe" | "lambda" | "p_spread" | "r_s" | "r_w" => vec![c.f64()?],
                    "h_c" | "horizon" | "window" => vec![c.u64()? as f64],
                    "ct" | "resources" => c.triple_u64()?.iter().map(|&v| v as f64).collect(),
                    "weights" | "effect" => c.triple_f64()?.to_vec(),
                    other => bail!("line {line_no}: unknown constant '{other}'"),
                };
                c.finish()?;
                let key: &str = match key {
                    "d_safe" => "d_safe",
                    "lambda" => "lambda",
                    "p_spread" => "p_spread",
                    "r_s" => "r_s",
                    "r_w" => "r_w",
                    "h_c" => "h_c",
                    "horizon" => "horizon",
                    "window" => "window",
                    "ct" => "ct",
                    "resources" => "resources",
                    "weights" => "weights",
                    "effect" => "effect",
                    _ => unreachable!(),
                };
                if constants.insert(key, values).is_some() {
                    bail!("line {line_no}: duplicate constant '{key}'");
                }
            }
            "physical" => {
                let kind = c.word()?;
                match kind {
                    "node" => {
                        let id = c.word()?.to_string();
                        let class = parse_class(c.word()?)?;
                        let goods = c.u64()?;
                        c.lit("cover")?;
                        let x0 = c.i64()?;
                        let y0 = c.i64()?;
                        let x1 = c.i64()?;
                        let y1 = c.i64()?;
                        phys_nodes.push(PhysicalNode {
                            id,
                            class,
                            goods,
                            cover: (x0, y0, x1, y1),
                        });
                    }
                    "edge" => {
                        let a = c.word()?.to_string();
                        let b = c.word()?.to_string();
                        let d = c.f64()?;
                        phys_edges.push((a, b, d));
                    }
                    other => bail!("line {line_no}: unknown physical entry '{other}'"),
                }
                c.finish()?;
            }
            "devices" => {
                c.lit("device")?;
                let index = c.u64()? as usize;
                if index != devices.len() {
                    bail!("line {line_no}: device ids must be sequential from 0");
                }
                c.lit("area")?;
                let x0 = c.i64()?;
                let y0 = c.i64()?;
                let x1 = c.i64()?;
                let y1 = c.i64()?;
                c.lit("start")?;
                let start = c.coord()?;
                c.finish()?;
                devices.push(((x0, y0, x1, y1), start));
            }
            "tasks" => {
                c.lit("task")?;
                let id = c.u64()?;
                c.lit("node")?;
                let node = c.coord()?;
                c.lit("dead")?;
                let dead = c.u64()?;
                c.lit("exp")?;
                let exp = c.u64()?;
                c.lit("spent")?;
                let spent = c.u64()?;
                c.lit("num")?;
                let num = c.u64()?;
                c.lit("dest")?;
                let dest = c.coord()?;
                c.finish()?;
                tasks_raw.push((id, node, dead, exp, spent, num, dest));
            }
            "incidents" => {
                c.lit("incident")?;
                c.lit("tick")?;
                let tick = c.u64()?;
                c.lit("node")?;
                let node = c.coord()?;
                c.lit("type")?;
                let itype = parse_itype(c.word()?)?;
                c.lit("alpha")?;
                let alpha = c.triple_f64()?;
                c.lit("beta")?;
                let beta = c.triple_f64()?;
                c.lit("x")?;
                let feats = c.triple_f64()?;
                c.finish()?;
                incidents_raw.push((tick, node, itype, alpha, beta, feats));
            }
            "agents" => {
                c.lit("agent")?;
                let coord = c.coord()?;
                c.finish()?;
                agents_raw.push(coord);
            }
            _ => unreachable!(),
        }
    }

    let layout = layout.ok_or_else(|| anyhow!("missing 'layout'"))?;
    let seed = seed.ok_or_else(|| anyhow!("missing 'seed'"))?;
    let grid = grid.ok_or_else(|| anyhow!("missing 'grid'"))?;
    if grid.0 <= 0 || grid.1 <= 0 {
        bail!("grid dimensions must be positive");
    }
    let need = |key: &str| {
        constants
            .get(key)
            .cloned()
            .ok_or_else(|| anyhow!("missing constant '{key}'"))
    };
    let constants = Constants {
        d_safe: need("d_safe")?[0],
        ct: {
            let v = need("ct")?;
            [v[0] as u64, v[1] as u64, v[2] as u64]
        },
        lambda: need("lambda")?[0],
        p_spread: need("p_spread")?[0],
        weights: {
            let v = need("weights")?;
            (v[0], v[1], v[2])
        },
        r_s: need("r_s")?[0],
        r_w: need("r_w")?[0],
        h_c: need("h_c")?[0] as u64,
        horizon: need("horizon")?[0] as u64,
        window: need("window")?[0] as usize,
        resources: {
            let v = need("resources")?;
            [v[0] as u64, v[1] as u64, v[2] as u64]
        },
        effect: {
            let v = need("effect")?;
            [v[0], v[1], v[2]]
        },
    };

    // Physical edges resolve by node id.
    let node_index: BTreeMap<&str, usize> = phys_nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut edges = Vec::with_capacity(phys_edges.len());
    for (a, b, d) in &phys_edges {
        let ai = *node_index
            .get(a.as_str())
            .ok_or_else(|| anyhow!("edge references unknown node '{a}'"))?;
        let bi = *node_index
            .get(b.as_str())
            .ok_or_else(|| anyhow!("edge references unknown node '{b}'"))?;
        edges.push(PhysicalEdge {
            a: ai,
            b: bi,
            distance: *d,
        });
    }
    let physical = PhysicalGraph {
        nodes: phys_nodes,
        edges,
    };

    // Region is the full grid; motion areas come from device rectangles.
    let mut region = Vec::with_capacity((grid.0 * grid.1) as usize);
    for y in 0..grid.1 {
        for x in 0..grid.0 {
            region.push((x, y));
        }
    }
    let motion_areas: Vec<(usize, Vec<(i64, i64)>)> = devices
        .iter()
        .enumerate()
        .map(|(i, ((x0, y0, x1, y1), _))| {
            let mut cells = Vec::new();
            for y in *y0..=*y1 {
                for x in *x0..=*x1 {
                    cells.push((x, y));
                }
            }
            (i, cells)
        })
        .collect();
    let op_graph = build_operation_graph(&physical, &motion_areas, &region)
        .map_err(|e| anyhow!("{e}"))?;

    let resolve = |coord: (i64, i64), what: &str| {
        op_graph
            .node_at(coord)
            .ok_or_else(|| anyhow!("{what} references off-grid cell ({}, {})", coord.0, coord.1))
    };
    let tasks: Vec<Task> = tasks_raw
        .iter()
        .map(|&(id, node, deadline, expected, spent, num, dest)| {
            Ok(Task {
                id,
                node: resolve(node, "task")?,
                deadline,
                expected,
                spent,
                num,
                dest: resolve(dest, "task dest")?,
            })
        })
        .collect::<Result<_>>()?;
    let schedule: Vec<ScheduledIncident> = incidents_raw
        .iter()
        .map(|&(tick, node, itype, alpha, beta, features)| {
            Ok(ScheduledIncident {
                tick,
                node: resolve(node, "incident")?,
                itype,
                alpha,
                beta,
                features,
            })
        })
        .collect::<Result<_>>()?;
    let agent_starts: Vec<usize> = agents_raw
        .iter()
        .map(|&c| resolve(c, "agent"))
        .collect::<Result<_>>()?;
    let device_starts: Vec<usize> = devices
        .iter()
        .map(|&(_, start)| resolve(start, "device start"))
        .collect::<Result<_>>()?;

    let scenario = Scenario {
        layout,
        grid,
        physical,
        op_graph,
        tasks,
        schedule,
        agent_starts,
        device_starts,
        seed,
        constants,
    };
    scenario.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(scenario)
}

/// Canonical text form. Device areas are reconstructed from the
/// operation graph's device assignments (rectangles by construction).
pub fn format_scenario(s: &Scenario) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let c = &s.constants;
    let _ = writeln!(out, "layout {}", s.layout.as_str());
    let _ = writeln!(out, "seed {}", s.seed);
    let _ = writeln!(out, "grid {} {}", s.grid.0, s.grid.1);
    let _ = writeln!(out);
    let _ = writeln!(out, "[constants]");
    let _ = writeln!(out, "d_safe {}", c.d_safe);
    let _ = writeln!(out, "ct {} {} {}", c.ct[0], c.ct[1], c.ct[2]);
    let _ = writeln!(out, "lambda {}", c.lambda);
    let _ = writeln!(out, "p_spread {}", c.p_spread);
    let _ = writeln!(
        out,
        "weights {} {} {}",
        c.weights.0, c.weights.1, c.weights.2
    );
    let _ = writeln!(out, "r_s {}", c.r_s);
    let _ = writeln!(out, "r_w {}", c.r_w);
    let _ = writeln!(out, "h_c {}", c.h_c);
    let _ = writeln!(out, "horizon {}", c.horizon);
    let _ = writeln!(out, "window {}", c.window);
    let _ = writeln!(
        out,
        "resources {} {} {}",
        c.resources[0], c.resources[1], c.resources[2]
    );
    let _ = writeln!(out, "effect {} {} {}", c.effect[0], c.effect[1], c.effect[2]);
    let _ = writeln!(out);
    let _ = writeln!(out, "[physical]");
    for n in &s.physical.nodes {
        let _ = writeln!(
            out,
            "node {} {} {} cover {} {} {} {}",
            n.id, n.class.as_str(), n.goods, n.cover.0, n.cover.1, n.cover.2, n.cover.3
        );
    }
    for e in &s.physical.edges {
        let _ = writeln!(
            out,
            "edge {} {} {}",
            s.physical.nodes[e.a].id, s.physical.nodes[e.b].id, e.distance
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[devices]");
    let n_devices = s.device_starts.len();
    for dev in 0..n_devices {
        let cells: Vec<(i64, i64)> = s
            .op_graph
            .nodes
            .iter()
            .filter(|n| n.device_id == Some(dev))
            .map(|n| n.coord)
            .collect();
        let x0 = cells.iter().map(|c| c.0).min().unwrap_or(0);
        let y0 = cells.iter().map(|c| c.1).min().unwrap_or(0);
        let x1 = cells.iter().map(|c| c.0).max().unwrap_or(0);
        let y1 = cells.iter().map(|c| c.1).max().unwrap_or(0);
        let start = s.op_graph.coord_of(s.device_starts[dev]);
        let _ = writeln!(
            out,
            "device {dev} area {x0} {y0} {x1} {y1} start {} {}",
            start.0, start.1
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[tasks]");
    for t in &s.tasks {
        let node = s.op_graph.coord_of(t.node);
        let dest = s.op_graph.coord_of(t.dest);
        let _ = writeln!(
            out,
            "task {} node {} {} dead {} exp {} spent {} num {} dest {} {}",
            t.id, node.0, node.1, t.deadline, t.expected, t.spent, t.num, dest.0, dest.1
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[incidents]");
    for i in &s.schedule {
        let node = s.op_graph.coord_of(i.node);
        let _ = writeln!(
            out,
            "incident tick {} node {} {} type {} alpha {} {} {} beta {} {} {} x {} {} {}",
            i.tick,
            node.0,
            node.1,
            i.itype.as_str(),
            i.alpha[0],
            i.alpha[1],
            i.alpha[2],
            i.beta[0],
            i.beta[1],
            i.beta[2],
            i.features[0],
            i.features[1],
            i.features[2]
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[agents]");
    for &a in &s.agent_starts {
        let coord = s.op_graph.coord_of(a);
        let _ = writeln!(out, "agent {} {}", coord.0, coord.1);
    }
    out
}

/// Builds one of the three bundled warehouse layouts at a given agent and
/// incident count. The geometry is fixed per layout; incident schedules
/// scale with `n_incidents`.
pub fn make_layout(layout: Layout, n_agents: usize, n_incidents: usize, seed: u64) -> Scenario {
    // Severity parameters: alpha = (0, A, A) with unit beta and zero
    // features triggers on arrival; the per-type effect e = A/(2*CT - 1)
    // makes a single responder need exactly CT applications.
    let ct: [u64; 3] = [1, 1, 1];
    let sev_a: [f64; 3] = [0.0, 6.0, 6.0];
    let sev_c: [f64; 3] = [0.0, 9.0, 9.0];
    let effect = [
        6.0 / (2.0 * ct[0] as f64 - 1.0),
        6.0 / (2.0 * ct[1] as f64 - 1.0),
        9.0 / (2.0 * ct[2] as f64 - 1.0),
    ];
    let constants = Constants {
        d_safe: 2.2,
        ct,
        lambda: 0.5,
        p_spread: 0.03,
        weights: (0.4, 0.3, 0.05),
        r_s: 10.0,
        r_w: 30.0,
        h_c: 40,
        horizon: 100,
        window: 5,
        resources: [3, 3, 3],
        effect,
    };
    let (grid, shelf_cells, corridor_y, outbound): ((i64, i64), Vec<(i64, i64)>, Vec<i64>, (i64, i64)) =
        match layout {
            // Two horizontal work corridors with shelves above each.
            Layout::A => (
                (10, 10),
                vec![(2, 1), (4, 1), (6, 1), (8, 1), (2, 5), (4, 5), (6, 5), (8, 5)],
                vec![2, 6],
                (0, 4),
            ),
            // One central corridor, shelves on both sides.
            Layout::B => (
                (10, 10),
                vec![(1, 3), (3, 3), (5, 3), (7, 3), (1, 7), (3, 7), (5, 7), (7, 7)],
                vec![4, 8],
                (9, 5),
            ),
            // Wide hall, single long corridor.
            Layout::C => (
                (12, 8),
                vec![(2, 2), (4, 2), (6, 2), (8, 2), (10, 2), (2, 5), (5, 5), (8, 5)],
                vec![3, 6],
                (0, 4),
            ),
        };
    let phys_nodes: Vec<PhysicalNode> = shelf_cells
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| PhysicalNode {
            id: format!("s{i}"),
            class: warden_core::graph::NodeClass::Shelf,
            goods: 4,
            cover: (x, y, x, y),
        })
        .chain(std::iter::once(PhysicalNode {
            id: "out".to_string(),
            class: warden_core::graph::NodeClass::Outbound,
            goods: 0,
            cover: (outbound.0, outbound.1, outbound.0, outbound.1),
        }))
        .collect();
    let phys_edges: Vec<PhysicalEdge> = (1..phys_nodes.len())
        .map(|i| PhysicalEdge {
            a: i - 1,
            b: i,
            distance: 2.0,
        })
        .collect();
    let physical = PhysicalGraph {
        nodes: phys_nodes,
        edges: phys_edges,
    };
    let mut region = Vec::new();
    for y in 0..grid.1 {
        for x in 0..grid.0 {
            region.push((x, y));
        }
    }
    // Two devices, one per corridor row.
    let motion_areas: Vec<(usize, Vec<(i64, i64)>)> = corridor_y
        .iter()
        .enumerate()
        .map(|(i, &y)| (i, (0..grid.0).map(|x| (x, y)).collect()))
        .collect();
    let op_graph = build_operation_graph(&physical, &motion_areas, &region).unwrap();
    let device_starts: Vec<usize> = corridor_y
        .iter()
        .map(|&y| op_graph.node_at((0, y)).unwrap())
        .collect();

    // Eight tasks: shelves to the outbound cell, queued by expected time.
    let dest = op_graph.node_at(outbound).unwrap();
    let tasks: Vec<Task> = shelf_cells
        .iter()
        .cycle()
        .take(8)
        .enumerate()
        .map(|(i, &cell)| Task {
            id: i as u64 + 1,
            node: op_graph.node_at(cell).unwrap(),
            deadline: 36 + 8 * i as u64,
            expected: 6 + 2 * i as u64,
            spent: 0,
            num: 1,
            dest,
        })
        .collect();

    // Incident schedule: types cycle a, b, c at staggered early ticks,
    // sited on shelves (a, b) and corridor cells (c).
    let mut schedule = Vec::with_capacity(n_incidents);
    for i in 0..n_incidents {
        // Shelf incidents first, fires later: a b a b c c (cycled).
        let itype = [
            IncidentType::A,
            IncidentType::B,
            IncidentType::A,
            IncidentType::B,
            IncidentType::C,
            IncidentType::C,
        ][i % 6];
        let node = match itype {
            IncidentType::C => {
                let y = corridor_y[i % corridor_y.len()];
                let x = 3 + 2 * (i as i64 % 3);
                op_graph.node_at((x.min(grid.0 - 1), y)).unwrap()
            }
            _ => op_graph
                .node_at(shelf_cells[(2 * i + 1) % shelf_cells.len()])
                .unwrap(),
        };
        let alpha = if itype == IncidentType::C { sev_c } else { sev_a };
        schedule.push(ScheduledIncident {
            tick: 2 + 3 * i as u64,
            node,
            itype,
            alpha,
            beta: [1.0, 1.0, 1.0],
            features: [0.0, 0.0, 0.0],
        });
    }
    schedule.sort_by_key(|e| e.tick);

    // Agents are stationed next to the earliest incident sites (response
    // posts), falling back to corridor posts when fewer incidents than
    // agents are scheduled.
    let posts = [
        (1, corridor_y[0] + 1),
        (grid.0 - 2, corridor_y[0] + 1),
        (grid.0 / 2, corridor_y[1] + 1),
        (1, corridor_y[1] + 1),
    ];
    let agent_starts: Vec<usize> = (0..n_agents)
        .map(|i| {
            if i < schedule.len() {
                let coord = op_graph.coord_of(schedule[i].node);
                let below = (coord.0, (coord.1 + 1).min(grid.1 - 1));
                op_graph.node_at(below).unwrap()
            } else {
                op_graph.node_at(posts[i % 4]).unwrap()
            }
        })
        .collect();

    let scenario = Scenario {
        layout,
        grid,
        physical,
        op_graph,
        tasks,
        schedule,
        agent_starts,
        device_starts,
        seed,
        constants,
    };
    scenario.validate().expect("generated layout must validate");
    scenario
}

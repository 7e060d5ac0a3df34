//! Path planning over the search map.
//!
//! The production planner is a nearest-unvisited greedy walk stitched
//! together from shortest paths; an exhaustive solver over visit orders
//! serves as an oracle on tiny instances. Cooperating agents split the
//! unvisited set with a deterministic round-robin assignment.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::GridGeometry;
use crate::world::Position;

/// Largest target set the exhaustive planner accepts.
pub const EXACT_MAX_TARGETS: usize = 6;

const COST_EPS: f64 = 1e-9;

/// Lattice neighbourhood used when building the graph over grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Weighted undirected graph with precomputed all-pairs shortest paths.
#[derive(Debug, Clone)]
pub struct SearchGraph {
    centers: Vec<Position>,
    adjacency: Vec<Vec<(usize, f64)>>,
    dist: Vec<f64>,
}

impl SearchGraph {
    /// Builds a graph from explicit node positions and weighted edges.
    pub fn from_edges(centers: Vec<Position>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = centers.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, c) in edges {
            if a >= n {
                return Err(Error::UnknownNode(a));
            }
            if b >= n {
                return Err(Error::UnknownNode(b));
            }
            if !(c > 0.0) || a == b {
                return Err(Error::InvalidParameter {
                    name: "edge",
                    reason: format!("edge ({a}, {b}) needs distinct ends and a positive cost, got {c}"),
                });
            }
            adjacency[a].push((b, c));
            adjacency[b].push((a, c));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0));
            list.dedup_by_key(|e| e.0);
        }

        // Floyd–Warshall; the graphs here have at most a few hundred nodes.
        let mut dist = vec![f64::INFINITY; n * n];
        for (i, list) in adjacency.iter().enumerate() {
            dist[i * n + i] = 0.0;
            for &(j, c) in list {
                dist[i * n + j] = dist[i * n + j].min(c);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let via = dik + dist[k * n + j];
                    if via < dist[i * n + j] {
                        dist[i * n + j] = via;
                    }
                }
            }
        }
        Ok(Self { centers, adjacency, dist })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, node: usize) -> Position {
        self.centers[node]
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edge_cost(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|e| e.0 == b).map(|e| e.1)
    }

    /// Shortest-path distance (∞ when unreachable).
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.len() + b]
    }

    /// Nodes of a shortest path from `a` to `b`, excluding `a`.
    ///
    /// At each hop the lowest-id neighbour on some shortest path is taken,
    /// so the result is deterministic.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut path = Vec::new();
        if !self.distance(a, b).is_finite() {
            return path;
        }
        let mut cur = a;
        while cur != b {
            let remaining = self.distance(cur, b);
            let next = self.adjacency[cur]
                .iter()
                .find(|&&(n, c)| (c + self.distance(n, b) - remaining).abs() <= COST_EPS * (1.0 + remaining))
                .map(|e| e.0)
                .expect("a finite distance always has a next hop");
            path.push(next);
            cur = next;
        }
        path
    }

    /// Sum of edge costs along a walk; `None` if two consecutive nodes are not adjacent.
    pub fn walk_cost(&self, walk: &[usize]) -> Option<f64> {
        walk.windows(2)
            .map(|w| if w[0] == w[1] { Some(0.0) } else { self.edge_cost(w[0], w[1]) })
            .sum()
    }

    fn check(&self, node: usize) -> Result<()> {
        if node < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(node))
        }
    }
}

/// Lattice graph over the grid cells with Euclidean centre-to-centre costs.
pub fn build_graph(geometry: &GridGeometry, connectivity: Connectivity) -> SearchGraph {
    let centers: Vec<Position> = (0..geometry.len()).map(|c| geometry.center(c)).collect();
    let offsets: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(1, 0), (0, 1)],
        Connectivity::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
    };
    let mut edges = Vec::new();
    for cell in 0..geometry.len() {
        let (c, r) = geometry.col_row(cell);
        for &(dc, dr) in offsets {
            let (nc, nr) = (c as i64 + dc, r as i64 + dr);
            if nc < 0 || nr < 0 || nc >= geometry.cols as i64 || nr >= geometry.rows as i64 {
                continue;
            }
            let other = geometry.index(nc as usize, nr as usize);
            edges.push((cell, other, centers[cell].distance(&centers[other])));
        }
    }
    SearchGraph::from_edges(centers, &edges).expect("lattice edges are valid")
}

/// A walk on the search graph owned by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub owner: usize,
    /// Graph walk; the first node contains the agent's start position.
    pub walk: Vec<usize>,
    /// Target nodes this plan is responsible for, in first-visit order.
    pub assigned: Vec<usize>,
}

impl Plan {
    pub fn cost(&self, graph: &SearchGraph) -> f64 {
        graph.walk_cost(&self.walk).unwrap_or(f64::INFINITY)
    }
}

/// Appends the shortest path to `target`, marking every pending node it passes.
fn extend_walk(
    graph: &SearchGraph,
    walk: &mut Vec<usize>,
    target: usize,
    pending: &mut Vec<usize>,
    assigned: &mut Vec<usize>,
) {
    let head = *walk.last().expect("walks are never empty");
    let mut take = |n: usize, pending: &mut Vec<usize>| {
        if let Some(pos) = pending.iter().position(|&p| p == n) {
            pending.remove(pos);
            assigned.push(n);
        }
    };
    take(head, pending);
    for n in graph.shortest_path(head, target) {
        walk.push(n);
        take(n, pending);
    }
}

fn normalise_targets(graph: &SearchGraph, targets: &[usize]) -> Result<Vec<usize>> {
    let mut v = targets.to_vec();
    for &n in &v {
        graph.check(n)?;
    }
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Nearest index in `pending` from `head` by graph distance, ties to the lowest id.
fn nearest(graph: &SearchGraph, head: usize, pending: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &l in pending {
        let d = graph.distance(head, l);
        if !d.is_finite() {
            continue;
        }
        match best {
            Some((_, bd)) if d >= bd - COST_EPS => {}
            _ => best = Some((l, d)),
        }
    }
    best.map(|b| b.0)
}

/// Greedy single-agent walk: repeatedly head for the nearest uncovered target.
pub fn greedy_path(graph: &SearchGraph, targets: &[usize], start: usize) -> Result<Plan> {
    graph.check(start)?;
    let mut pending = normalise_targets(graph, targets)?;
    let mut walk = vec![start];
    let mut assigned = Vec::new();
    extend_walk(graph, &mut walk, start, &mut pending, &mut assigned);
    while let Some(l) = nearest(graph, *walk.last().unwrap(), &pending) {
        extend_walk(graph, &mut walk, l, &mut pending, &mut assigned);
    }
    Ok(Plan { owner: 0, walk, assigned })
}

/// Minimum-cost walk covering every target, by enumerating visit orders.
///
/// Only meant for tiny instances; more than [`EXACT_MAX_TARGETS`] targets is an error.
pub fn exact_path_small(graph: &SearchGraph, targets: &[usize], start: usize) -> Result<Plan> {
    graph.check(start)?;
    let pending = normalise_targets(graph, targets)?;
    if pending.len() > EXACT_MAX_TARGETS {
        return Err(Error::TooManyTargets { max: EXACT_MAX_TARGETS, got: pending.len() });
    }

    let mut order: Vec<usize> = pending.clone();
    let mut best: Option<(f64, Vec<usize>)> = None;
    permute(&mut order, 0, &mut |perm| {
        let mut cost = 0.0;
        let mut head = start;
        for &n in perm {
            cost += graph.distance(head, n);
            head = n;
        }
        if cost.is_finite() && best.as_ref().is_none_or(|(b, _)| cost < *b - COST_EPS) {
            best = Some((cost, perm.to_vec()));
        }
    });

    let mut walk = vec![start];
    let mut assigned = Vec::new();
    let mut remaining = pending;
    extend_walk(graph, &mut walk, start, &mut remaining, &mut assigned);
    if let Some((_, order)) = best {
        for n in order {
            extend_walk(graph, &mut walk, n, &mut remaining, &mut assigned);
        }
    }
    Ok(Plan { owner: 0, walk, assigned })
}

/// Calls `f` once for every ordering of `v`.
fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Round-robin joint assignment for a cohort of cooperating agents.
///
/// Agents take turns in index order; on its turn an agent claims the target
/// nearest to its current head (shortest-path distance, ties to the lowest
/// id) and extends its walk along the path to it. Pending targets crossed on
/// the way are claimed too, so the claimed sets partition the targets.
pub fn joint_plan(graph: &SearchGraph, targets: &[usize], starts: &[usize]) -> Result<Vec<Plan>> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter {
            name: "starts",
            reason: "joint planning needs at least one agent".into(),
        });
    }
    for &s in starts {
        graph.check(s)?;
    }
    let mut pending = normalise_targets(graph, targets)?;
    let mut plans: Vec<Plan> = starts
        .iter()
        .enumerate()
        .map(|(owner, &s)| Plan { owner, walk: vec![s], assigned: Vec::new() })
        .collect();

    let mut stalled = 0;
    let mut turn = 0usize;
    while !pending.is_empty() && stalled < plans.len() {
        let plan = &mut plans[turn % starts.len()];
        turn += 1;
        match nearest(graph, *plan.walk.last().unwrap(), &pending) {
            Some(l) => {
                stalled = 0;
                extend_walk(graph, &mut plan.walk, l, &mut pending, &mut plan.assigned);
            }
            None => stalled += 1,
        }
    }
    Ok(plans)
}

/// Index of the control whose resulting position is closest to `target`.
///
/// Ties go to the earliest control in enumeration order. Panics on an empty set.
pub fn search_control(controls: &[Position], target: Position) -> usize {
    assert!(!controls.is_empty(), "control set must be nonempty");
    let mut best = 0;
    let mut best_d = controls[0].distance(&target);
    for (i, u) in controls.iter().enumerate().skip(1) {
        let d = u.distance(&target);
        if d < best_d - 1e-12 {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Writes `agent_id, seq, node_x, node_y` rows for each plan's walk.
pub fn write_plans_csv<W: Write>(graph: &SearchGraph, plans: &[Plan], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent_id", "seq", "node_x", "node_y"])?;
    for plan in plans {
        for (seq, &n) in plan.walk.iter().enumerate() {
            let c = graph.center(n);
            w.write_record([plan.owner.to_string(), seq.to_string(), c.x.to_string(), c.y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

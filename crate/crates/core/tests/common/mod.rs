//! Shared helpers for integration tests: independent brute-force
//! evaluators and placement fixtures.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use treecap::geometry::{decompose, place_nodes, GridDecomposition, NodePlacement};
use treecap::regions::Direction;
use treecap::traffic::{MulticastTraffic, UnicastTraffic};
use treecap::treegraph::{build_tree, internal_capacity, EdgeRef, TreeGraph, TreeNodeId};

pub fn ideal_grid(n: usize) -> NodePlacement {
    let m = (n as f64).sqrt() as usize;
    assert_eq!(m * m, n, "n must be a perfect square");
    let mut points = Vec::new();
    for row in 0..m {
        for col in 0..m {
            points.push([col as f64 + 0.5, row as f64 + 0.5]);
        }
    }
    NodePlacement::from_points(n, 0, points).unwrap()
}

/// First seed from `start` whose placement yields a buildable tree.
pub fn placement_with_tree(
    n: usize,
    alpha: f64,
    start_seed: u64,
    require_exact_reps: bool,
) -> (NodePlacement, GridDecomposition, TreeGraph) {
    for seed in start_seed..start_seed + 1000 {
        let p = place_nodes(n, seed).unwrap();
        let g = decompose(&p).unwrap();
        if let Ok(tree) = build_tree(&p, &g, alpha) {
            if !require_exact_reps || tree.reps_exact {
                return (p, g, tree);
            }
        }
    }
    panic!("no buildable placement found for n={n}");
}

pub fn random_unicast(n: usize, rng: &mut ChaCha8Rng) -> UnicastTraffic {
    let mut t = UnicastTraffic::new();
    let entries = rng.gen_range(1..=2 * n);
    for _ in 0..entries {
        let src = rng.gen_range(0..n);
        let mut dst = rng.gen_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        t.add(src, dst, rng.gen_range(0.01..1.0)).unwrap();
    }
    t
}

pub fn random_multicast(n: usize, rng: &mut ChaCha8Rng) -> MulticastTraffic {
    let mut t = MulticastTraffic::new();
    let sessions = rng.gen_range(1..=n);
    for _ in 0..sessions {
        let src = rng.gen_range(0..n);
        let size = rng.gen_range(1..=5.min(n - 1));
        let mut group = Vec::new();
        while group.len() < size {
            let w = rng.gen_range(0..n);
            if w != src && !group.contains(&w) {
                group.push(w);
            }
        }
        t.add(src, &group, rng.gen_range(0.01..1.0)).unwrap();
    }
    t
}

/// Largest feasible multiplier by plain full enumeration: straight
/// accumulation over every cut, no shared code with the library
/// evaluator beyond the capacity formula.
pub fn naive_rho_unicast(
    t: &UnicastTraffic,
    g: &GridDecomposition,
    alpha: f64,
    direction: Direction,
) -> f64 {
    let mut best = f64::INFINITY;
    if direction != Direction::Dense {
        for level in 1..=g.levels {
            let rhs = internal_capacity(g.n, level, alpha);
            for cell in 0..g.cell_count(level) {
                let mut lhs = 0.0;
                for (s, d, r) in t.iter() {
                    let cs = g.cell_of[level][s];
                    let cd = g.cell_of[level][d];
                    if cs == cell && cd != cell {
                        lhs += r;
                    }
                    if direction == Direction::Both && cd == cell && cs != cell {
                        lhs += r;
                    }
                }
                if lhs > 0.0 {
                    best = best.min(rhs / lhs);
                }
            }
        }
    }
    for u in 0..g.n {
        let mut lhs = 0.0;
        for (s, d, r) in t.iter() {
            if s == u || d == u {
                lhs += r;
            }
        }
        if lhs > 0.0 {
            best = best.min(1.0 / lhs);
        }
    }
    best
}

pub fn naive_rho_multicast(
    t: &MulticastTraffic,
    g: &GridDecomposition,
    alpha: f64,
    direction: Direction,
) -> f64 {
    let mut best = f64::INFINITY;
    if direction != Direction::Dense {
        for level in 1..=g.levels {
            let rhs = internal_capacity(g.n, level, alpha);
            for cell in 0..g.cell_count(level) {
                let mut lhs = 0.0;
                for (s, group, r) in t.iter() {
                    let cs = g.cell_of[level][s];
                    let inside: Vec<bool> =
                        group.iter().map(|&w| g.cell_of[level][w] == cell).collect();
                    if cs == cell && inside.iter().any(|&b| !b) {
                        lhs += r;
                    }
                    if direction == Direction::Both && cs != cell && inside.iter().any(|&b| b) {
                        lhs += r;
                    }
                }
                if lhs > 0.0 {
                    best = best.min(rhs / lhs);
                }
            }
        }
    }
    for u in 0..g.n {
        let mut lhs = 0.0;
        for (s, group, r) in t.iter() {
            if s == u && group.iter().any(|&w| w != u) {
                lhs += r;
            }
            if s != u && group.contains(&u) {
                lhs += r;
            }
        }
        if lhs > 0.0 {
            best = best.min(1.0 / lhs);
        }
    }
    best
}

/// Leaves in the component containing `child` after removing the edge
/// above it.
fn leaves_under(tree: &TreeGraph, id: TreeNodeId) -> Vec<usize> {
    if tree.is_leaf(id) {
        return vec![tree.leaf_node(id)];
    }
    let mut out = Vec::new();
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        if tree.is_leaf(x) {
            out.push(tree.leaf_node(x));
        } else {
            stack.extend_from_slice(tree.children(x));
        }
    }
    out
}

/// Load on one edge by the separation definition: the total rate of
/// sessions whose endpoints straddle the two components left after
/// removing the edge.
pub fn oracle_edge_load_unicast(tree: &TreeGraph, e: &EdgeRef, t: &UnicastTraffic) -> f64 {
    let below = leaves_under(tree, e.child);
    let mut inside = vec![false; tree.n];
    for &u in &below {
        inside[u] = true;
    }
    let mut load = 0.0;
    for (s, d, r) in t.iter() {
        if inside[s] != inside[d] {
            load += r;
        }
    }
    load
}

pub fn oracle_edge_load_multicast(tree: &TreeGraph, e: &EdgeRef, t: &MulticastTraffic) -> f64 {
    let below = leaves_under(tree, e.child);
    let mut inside = vec![false; tree.n];
    for &u in &below {
        inside[u] = true;
    }
    let mut load = 0.0;
    for (s, group, r) in t.iter() {
        let mut any_in = inside[s];
        let mut any_out = !inside[s];
        for &w in group {
            if w == s {
                continue;
            }
            any_in |= inside[w];
            any_out |= !inside[w];
        }
        if any_in && any_out {
            load += r;
        }
    }
    load
}

pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

//! Exact routing feasibility on the tree: per-edge loads under the unique
//! tree routing, and capacity checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{MulticastTraffic, UnicastTraffic};
use crate::treegraph::{multicast_subtree, unique_path, EdgeRef, TreeGraph, TreeNodeId};
use crate::util::{pairwise_sum, within_capacity};

/// Per-edge routed demand, indexed by the edge's child endpoint. Every
/// tree edge is present (zero allowed); the root slot is unused.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeLoadMap {
    loads: Vec<f64>,
}

impl EdgeLoadMap {
    pub fn load(&self, child: TreeNodeId) -> f64 {
        self.loads[child]
    }

    pub fn iter<'a>(&'a self, tree: &'a TreeGraph) -> impl Iterator<Item = (EdgeRef, f64)> + 'a {
        tree.edges().map(|e| (e, self.loads[e.child]))
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.loads)
    }
}

fn check_leaf(u: usize, n: usize) -> Result<()> {
    if u >= n {
        Err(Error::IndexOutOfRange { index: u, n })
    } else {
        Ok(())
    }
}

/// Route every unicast entry along its unique path; edge loads are the
/// bidirectional sums across each edge.
pub fn edge_loads_unicast(t: &UnicastTraffic, tree: &TreeGraph) -> Result<EdgeLoadMap> {
    let mut contrib: Vec<Vec<f64>> = vec![Vec::new(); tree.node_count()];
    for (src, dst, rate) in t.iter() {
        check_leaf(src, tree.n)?;
        check_leaf(dst, tree.n)?;
        for e in unique_path(tree, src, dst) {
            contrib[e.child].push(rate);
        }
    }
    Ok(EdgeLoadMap {
        loads: contrib.iter().map(|c| pairwise_sum(c)).collect(),
    })
}

/// Directional split of unicast edge loads, for diagnostics: `up` counts
/// traffic whose source is below the edge, `down` the rest.
pub fn edge_loads_unicast_directed(
    t: &UnicastTraffic,
    tree: &TreeGraph,
) -> Result<(EdgeLoadMap, EdgeLoadMap)> {
    let mut up: Vec<Vec<f64>> = vec![Vec::new(); tree.node_count()];
    let mut down: Vec<Vec<f64>> = vec![Vec::new(); tree.node_count()];
    for (src, dst, rate) in t.iter() {
        check_leaf(src, tree.n)?;
        check_leaf(dst, tree.n)?;
        let path = unique_path(tree, src, dst);
        for (i, e) in path.iter().enumerate() {
            // the first half of the path climbs from src, the rest
            // descends towards dst
            if i < path.len() / 2 {
                up[e.child].push(rate);
            } else {
                down[e.child].push(rate);
            }
        }
    }
    Ok((
        EdgeLoadMap {
            loads: up.iter().map(|c| pairwise_sum(c)).collect(),
        },
        EdgeLoadMap {
            loads: down.iter().map(|c| pairwise_sum(c)).collect(),
        },
    ))
}

/// Route every multicast entry along its Steiner subtree.
pub fn edge_loads_multicast(t: &MulticastTraffic, tree: &TreeGraph) -> Result<EdgeLoadMap> {
    let mut contrib: Vec<Vec<f64>> = vec![Vec::new(); tree.node_count()];
    for (src, group, rate) in t.iter() {
        check_leaf(src, tree.n)?;
        for &w in group {
            check_leaf(w, tree.n)?;
        }
        for e in multicast_subtree(tree, src, group) {
            contrib[e.child].push(rate);
        }
    }
    Ok(EdgeLoadMap {
        loads: contrib.iter().map(|c| pairwise_sum(c)).collect(),
    })
}

/// Feasibility of a load map against the tree's edge capacities. Routing
/// on a tree is unique, so this is exact membership in the tree region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteFeasibility {
    pub feasible: bool,
    /// min over loaded edges of capacity/load; infinite when nothing is
    /// loaded
    pub max_multiplier: f64,
    pub binding: Option<EdgeRef>,
}

pub fn feasibility_of_loads(tree: &TreeGraph, loads: &EdgeLoadMap) -> RouteFeasibility {
    let mut feasible = true;
    let mut best = f64::INFINITY;
    let mut binding = None;
    for e in tree.edges() {
        let load = loads.load(e.child);
        let cap = tree.capacity(e.child);
        if !within_capacity(load, cap) {
            feasible = false;
        }
        if load > 0.0 {
            let ratio = cap / load;
            if ratio < best {
                best = ratio;
                binding = Some(e);
            }
        }
    }
    RouteFeasibility {
        feasible,
        max_multiplier: best,
        binding,
    }
}

pub fn feasible_on_tree_unicast(t: &UnicastTraffic, tree: &TreeGraph) -> Result<RouteFeasibility> {
    Ok(feasibility_of_loads(tree, &edge_loads_unicast(t, tree)?))
}

pub fn feasible_on_tree_multicast(
    t: &MulticastTraffic,
    tree: &TreeGraph,
) -> Result<RouteFeasibility> {
    Ok(feasibility_of_loads(tree, &edge_loads_multicast(t, tree)?))
}

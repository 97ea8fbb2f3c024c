//! The capacitated full tree over the grid hierarchy: leaves are network
//! nodes, internal nodes are grid cells, and each edge carries the
//! capacity implied by the cut it separates.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridDecomposition, NodePlacement};

/// Identifier of a tree node: internal nodes first (level order), then
/// leaves.
pub type TreeNodeId = usize;

/// One tree edge, identified by its child endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub child: TreeNodeId,
    pub parent: TreeNodeId,
    /// level of the child endpoint; leaf edges sit at level L+1
    pub level: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeGraph {
    pub n: usize,
    /// deepest internal level L; leaves sit at L+1
    pub levels: usize,
    pub alpha: f64,
    parent: Vec<Option<TreeNodeId>>,
    children: Vec<Vec<TreeNodeId>>,
    level_of: Vec<usize>,
    /// capacity of internal edges whose child endpoint is at level `l`,
    /// indexed 1..=L (index 0 unused)
    cap_per_level: Vec<f64>,
    /// representative sets per internal node, ascending node indices
    reps: Vec<Vec<usize>>,
    /// target representative count at level L
    pub rep_count_leaf_level: usize,
    /// true when no cell forced clamping of the representative count
    pub reps_exact: bool,
    internal_count: usize,
}

fn level_offset(level: usize) -> usize {
    // 1 + 4 + ... + 4^{level-1}
    ((1usize << (2 * level)) - 1) / 3
}

impl TreeGraph {
    pub fn internal_count(&self) -> usize {
        self.internal_count
    }

    pub fn node_count(&self) -> usize {
        self.internal_count + self.n
    }

    pub fn internal_id(&self, level: usize, cell: usize) -> TreeNodeId {
        debug_assert!(level <= self.levels && cell < 1 << (2 * level));
        level_offset(level) + cell
    }

    pub fn leaf_id(&self, node: usize) -> TreeNodeId {
        self.internal_count + node
    }

    pub fn is_leaf(&self, id: TreeNodeId) -> bool {
        id >= self.internal_count
    }

    /// Network node index of a leaf id.
    pub fn leaf_node(&self, id: TreeNodeId) -> usize {
        debug_assert!(self.is_leaf(id));
        id - self.internal_count
    }

    /// `(level, cell)` of an internal id.
    pub fn internal_key(&self, id: TreeNodeId) -> (usize, usize) {
        debug_assert!(!self.is_leaf(id));
        let level = self.level_of[id];
        (level, id - level_offset(level))
    }

    pub fn parent(&self, id: TreeNodeId) -> Option<TreeNodeId> {
        self.parent[id]
    }

    pub fn children(&self, id: TreeNodeId) -> &[TreeNodeId] {
        &self.children[id]
    }

    pub fn level(&self, id: TreeNodeId) -> usize {
        self.level_of[id]
    }

    pub fn root(&self) -> TreeNodeId {
        0
    }

    /// The edge from `child` to its parent.
    pub fn parent_edge(&self, child: TreeNodeId) -> Option<EdgeRef> {
        self.parent[child].map(|parent| EdgeRef {
            child,
            parent,
            level: self.level_of[child],
        })
    }

    /// Capacity of the edge identified by its child endpoint. Both
    /// directions share this value.
    pub fn capacity(&self, child: TreeNodeId) -> f64 {
        if self.is_leaf(child) {
            1.0
        } else {
            self.cap_per_level[self.level_of[child]]
        }
    }

    pub fn capacity_at_level(&self, level: usize) -> f64 {
        if level == self.levels + 1 {
            1.0
        } else {
            self.cap_per_level[level]
        }
    }

    /// Representative node set of a tree node ({u} for a leaf u).
    pub fn reps(&self, id: TreeNodeId) -> Vec<usize> {
        if self.is_leaf(id) {
            vec![self.leaf_node(id)]
        } else {
            self.reps[id].clone()
        }
    }

    /// Iterate every edge, identified by child id, internal edges first.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        (1..self.node_count()).map(|child| self.parent_edge(child).expect("non-root has parent"))
    }

    pub fn edge_count(&self) -> usize {
        self.node_count() - 1
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::to_writer_pretty(BufWriter::new(file), self).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

/// Internal edge capacity between levels `l` and `l-1`.
pub fn internal_capacity(n: usize, level: usize, alpha: f64) -> f64 {
    (4f64.powi(-(level as i32)) * n as f64).powf(2.0 - alpha.min(3.0) / 2.0)
}

/// Build the capacitated tree. Fails if any level-L cell is empty; use
/// [`build_tree_with_levels`] to force a smaller depth in that case.
pub fn build_tree(
    placement: &NodePlacement,
    decomposition: &GridDecomposition,
    alpha: f64,
) -> Result<TreeGraph> {
    build_tree_with_levels(placement, decomposition, alpha, decomposition.levels)
}

/// Build the tree with an explicit depth `levels <= L`.
pub fn build_tree_with_levels(
    placement: &NodePlacement,
    decomposition: &GridDecomposition,
    alpha: f64,
    levels: usize,
) -> Result<TreeGraph> {
    if alpha <= 2.0 {
        return Err(Error::Domain(format!("alpha must be > 2, got {alpha}")));
    }
    if levels > decomposition.levels {
        return Err(Error::Domain(format!(
            "requested {levels} levels, decomposition has {}",
            decomposition.levels
        )));
    }
    let n = placement.n;
    for (cell, members) in decomposition.cell_members[levels].iter().enumerate() {
        if members.is_empty() {
            return Err(Error::DegeneratePlacement {
                level: levels,
                cell,
            });
        }
    }

    let internal_count = level_offset(levels + 1);
    let node_count = internal_count + n;
    let mut parent: Vec<Option<TreeNodeId>> = vec![None; node_count];
    let mut children: Vec<Vec<TreeNodeId>> = vec![Vec::new(); node_count];
    let mut level_of = vec![0usize; node_count];

    for level in 1..=levels {
        for cell in 0..1usize << (2 * level) {
            let id = level_offset(level) + cell;
            level_of[id] = level;
            let p = level_offset(level - 1) + crate::geometry::parent_cell(cell, level);
            parent[id] = Some(p);
            children[p].push(id);
        }
    }
    for u in 0..n {
        let id = internal_count + u;
        level_of[id] = levels + 1;
        let cell = decomposition.cell_of[levels][u];
        let p = level_offset(levels) + cell;
        parent[id] = Some(p);
        children[p].push(id);
    }

    let mut cap_per_level = vec![0.0; levels + 1];
    for (level, cap) in cap_per_level.iter_mut().enumerate().skip(1) {
        *cap = internal_capacity(n, level, alpha);
    }

    // Representatives: the m lowest-indexed members of each level-L cell,
    // unioned upward.
    let m_target = ((4f64.powi(-(levels as i32) - 1) * n as f64).floor() as usize).max(1);
    let mut reps: Vec<Vec<usize>> = vec![Vec::new(); internal_count];
    let mut reps_exact = true;
    for cell in 0..1usize << (2 * levels) {
        let members = &decomposition.cell_members[levels][cell];
        let m = m_target.min(members.len());
        if m < m_target {
            reps_exact = false;
        }
        reps[level_offset(levels) + cell] = members[..m].to_vec();
    }
    for level in (0..levels).rev() {
        for cell in 0..1usize << (2 * level) {
            let id = level_offset(level) + cell;
            let mut union = Vec::new();
            for &c in &children[id] {
                union.extend_from_slice(&reps[c]);
            }
            union.sort_unstable();
            reps[id] = union;
        }
    }

    Ok(TreeGraph {
        n,
        levels,
        alpha,
        parent,
        children,
        level_of,
        cap_per_level,
        reps,
        rep_count_leaf_level: m_target,
        reps_exact,
        internal_count,
    })
}

/// The unique simple path between two leaves, edges ordered from `u` up
/// to the meet node, then down to `w`. Equal endpoints give an empty
/// path.
pub fn unique_path(tree: &TreeGraph, u: usize, w: usize) -> Vec<EdgeRef> {
    if u == w {
        return Vec::new();
    }
    let mut a = tree.leaf_id(u);
    let mut b = tree.leaf_id(w);
    let mut up = Vec::new();
    let mut down = Vec::new();
    // Leaves share depth, so climb in lockstep until the chains meet.
    while a != b {
        up.push(tree.parent_edge(a).expect("leaf chain reaches root"));
        down.push(tree.parent_edge(b).expect("leaf chain reaches root"));
        a = tree.parent(a).unwrap();
        b = tree.parent(b).unwrap();
    }
    down.reverse();
    up.extend(down);
    up
}

/// Edges of the smallest subtree covering `{u} ∪ group`: exactly the
/// edges whose removal separates `u` from some group member.
pub fn multicast_subtree(tree: &TreeGraph, u: usize, group: &[usize]) -> Vec<EdgeRef> {
    let mut edges: BTreeSet<TreeNodeId> = BTreeSet::new();
    for &w in group {
        if w == u {
            continue;
        }
        for e in unique_path(tree, u, w) {
            edges.insert(e.child);
        }
    }
    edges
        .into_iter()
        .map(|c| tree.parent_edge(c).expect("edge child has parent"))
        .collect()
}

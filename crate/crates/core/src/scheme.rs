//! The three-layer architecture, structurally: cooperation-layer message
//! distribution/concentration with exact fragment bookkeeping, physical-
//! layer rate accounting with the time-sharing factors, and the relay
//! hierarchy used for small path-loss exponents.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cell_index, NodePlacement};
use crate::traffic::gen_permutation;
use crate::treegraph::{multicast_subtree, unique_path, EdgeRef, TreeGraph, TreeNodeId};

type Frac = Ratio<i64>;

/// Half-open fragment [start, end) of the unit message.
pub type Fragment = (Frac, Frac);

/// Which nodes hold which disjoint fragments of one message. Fragments
/// are exact rationals so partition checks need no tolerance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageState {
    holdings: BTreeMap<usize, Vec<Fragment>>,
}

fn measure(frags: &[Fragment]) -> Frac {
    frags.iter().map(|&(a, b)| b - a).sum()
}

/// Merge touching fragments of a sorted list.
fn normalize(mut frags: Vec<Fragment>) -> Vec<Fragment> {
    frags.sort();
    let mut out: Vec<Fragment> = Vec::with_capacity(frags.len());
    for f in frags {
        if let Some(last) = out.last_mut() {
            if last.1 == f.0 {
                last.1 = f.1;
                continue;
            }
        }
        out.push(f);
    }
    out
}

/// Cut a fragment list into `parts` pieces of equal measure, in order.
fn split_fragments(frags: &[Fragment], parts: usize) -> Vec<Vec<Fragment>> {
    let total = measure(frags);
    let quota = total / Frac::from_integer(parts as i64);
    let mut out = vec![Vec::new(); parts];
    let mut part = 0usize;
    let mut room = quota;
    for &(start, end) in frags {
        let mut cursor = start;
        while cursor < end {
            if room.is_zero() {
                part += 1;
                room = quota;
            }
            let take = (end - cursor).min(room);
            out[part].push((cursor, cursor + take));
            cursor += take;
            room -= take;
        }
    }
    out
}

impl MessageState {
    /// The whole message held by a single node.
    pub fn full_at(node: usize) -> Self {
        let mut holdings = BTreeMap::new();
        holdings.insert(node, vec![(Frac::zero(), Frac::one())]);
        Self { holdings }
    }

    pub fn holders(&self) -> impl Iterator<Item = usize> + '_ {
        self.holdings.keys().copied()
    }

    pub fn measure_at(&self, node: usize) -> Frac {
        self.holdings.get(&node).map(|f| measure(f)).unwrap_or_else(Frac::zero)
    }

    pub fn fragments_at(&self, node: usize) -> &[Fragment] {
        self.holdings.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn holder_count(&self) -> usize {
        self.holdings.len()
    }

    /// Check the invariance property against a representative set: the
    /// holdings are exactly at `reps`, each holding measure 1/|reps|,
    /// fragments globally disjoint with union [0, 1).
    pub fn verify_even(&self, reps: &[usize]) -> Result<()> {
        let k = reps.len();
        if self.holdings.len() != k {
            return Err(Error::Invariance {
                node: format!("{:?}", reps),
                detail: format!("{} holders, expected {k}", self.holdings.len()),
            });
        }
        let share = Frac::one() / Frac::from_integer(k as i64);
        let mut all: Vec<Fragment> = Vec::new();
        for &r in reps {
            let frags = self.holdings.get(&r).ok_or_else(|| Error::Invariance {
                node: format!("node {r}"),
                detail: "holds nothing".into(),
            })?;
            let m = measure(frags);
            if m != share {
                return Err(Error::Invariance {
                    node: format!("node {r}"),
                    detail: format!("holds measure {m}, expected {share}"),
                });
            }
            all.extend_from_slice(frags);
        }
        all.sort();
        let mut cursor = Frac::zero();
        for (a, b) in all {
            if a < cursor || b <= a {
                return Err(Error::Invariance {
                    node: format!("{:?}", reps),
                    detail: "fragments overlap or are empty".into(),
                });
            }
            cursor = b;
        }
        // disjoint fragments with total measure 1 inside [0, 1] tile it
        if cursor > Frac::one() {
            return Err(Error::Invariance {
                node: format!("{:?}", reps),
                detail: "fragments leave the unit interval".into(),
            });
        }
        Ok(())
    }
}

/// Move a message one edge up the tree: the holdings at `child`'s
/// representatives are spread evenly over `parent`'s.
pub fn distribute_up(
    state: &MessageState,
    tree: &TreeGraph,
    child: TreeNodeId,
    parent: TreeNodeId,
) -> Result<MessageState> {
    debug_assert_eq!(tree.parent(child), Some(parent));
    let parent_reps = tree.reps(parent);
    let mut next = MessageState::default();
    if tree.is_leaf(child) {
        let u = tree.leaf_node(child);
        state.verify_even(&[u])?;
        let pieces = split_fragments(state.fragments_at(u), parent_reps.len());
        for (r, piece) in parent_reps.iter().zip(pieces) {
            next.holdings.insert(*r, normalize(piece));
        }
    } else {
        let child_reps = tree.reps(child);
        state.verify_even(&child_reps)?;
        let receivers: Vec<usize> = parent_reps
            .iter()
            .copied()
            .filter(|r| !child_reps.contains(r))
            .collect();
        if receivers.len() != 3 * child_reps.len() {
            return Err(Error::Invariance {
                node: format!("tree node {child}"),
                detail: format!(
                    "{} receivers for {} holders; representative counts are not 1:3",
                    receivers.len(),
                    child_reps.len()
                ),
            });
        }
        for (i, &holder) in child_reps.iter().enumerate() {
            let pieces = split_fragments(state.fragments_at(holder), 4);
            next.holdings.insert(holder, normalize(pieces[0].clone()));
            for (j, piece) in pieces[1..].iter().enumerate() {
                next.holdings
                    .insert(receivers[3 * i + j], normalize(piece.clone()));
            }
        }
    }
    next.verify_even(&parent_reps)?;
    Ok(next)
}

/// Move a message one edge down the tree: holdings at `parent`'s
/// representatives are concentrated onto `child`'s.
pub fn concentrate_down(
    state: &MessageState,
    tree: &TreeGraph,
    parent: TreeNodeId,
    child: TreeNodeId,
) -> Result<MessageState> {
    debug_assert_eq!(tree.parent(child), Some(parent));
    let parent_reps = tree.reps(parent);
    state.verify_even(&parent_reps)?;
    let mut next = MessageState::default();
    if tree.is_leaf(child) {
        let u = tree.leaf_node(child);
        let mut all = Vec::new();
        for &r in &parent_reps {
            all.extend_from_slice(state.fragments_at(r));
        }
        next.holdings.insert(u, normalize(all));
        next.verify_even(&[u])?;
    } else {
        let child_reps = tree.reps(child);
        let donors: Vec<usize> = parent_reps
            .iter()
            .copied()
            .filter(|r| !child_reps.contains(r))
            .collect();
        if donors.len() != 3 * child_reps.len() {
            return Err(Error::Invariance {
                node: format!("tree node {child}"),
                detail: format!(
                    "{} donors for {} keepers; representative counts are not 1:3",
                    donors.len(),
                    child_reps.len()
                ),
            });
        }
        for (j, &keeper) in child_reps.iter().enumerate() {
            let mut frags = state.fragments_at(keeper).to_vec();
            for &d in &donors[3 * j..3 * j + 3] {
                frags.extend_from_slice(state.fragments_at(d));
            }
            next.holdings.insert(keeper, normalize(frags));
        }
        next.verify_even(&child_reps)?;
    }
    Ok(next)
}

/// One step of an end-to-end simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimStep {
    pub edge: EdgeRef,
    pub upward: bool,
    /// holder count after the step
    pub holders: usize,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub steps: Vec<SimStep>,
    pub final_state: MessageState,
}

/// Route one message from `u` to `w` over the tree, applying the
/// cooperation layer along every edge and verifying the invariance
/// property after each step.
pub fn simulate_unicast(tree: &TreeGraph, u: usize, w: usize) -> Result<SimTrace> {
    let mut state = MessageState::full_at(u);
    let mut steps = Vec::new();
    let path = unique_path(tree, u, w);
    let mut current = tree.leaf_id(u);
    for e in path {
        let upward = e.child == current;
        state = if upward {
            let next = distribute_up(&state, tree, e.child, e.parent)?;
            current = e.parent;
            next
        } else {
            let next = concentrate_down(&state, tree, e.parent, e.child)?;
            current = e.child;
            next
        };
        steps.push(SimStep {
            edge: e,
            upward,
            holders: state.holder_count(),
        });
    }
    Ok(SimTrace {
        steps,
        final_state: state,
    })
}

/// Multicast: route along the Steiner subtree, copying the message where
/// the subtree branches. Returns the per-destination final states.
pub fn simulate_multicast(
    tree: &TreeGraph,
    u: usize,
    group: &[usize],
) -> Result<(Vec<SimStep>, BTreeMap<usize, MessageState>)> {
    let edges = multicast_subtree(tree, u, group);
    if edges.is_empty() {
        return Ok((Vec::new(), BTreeMap::new()));
    }
    let mut steps = Vec::new();
    let mut finals = BTreeMap::new();
    // Climb to the subtree top first.
    let mut top = tree.leaf_id(u);
    let in_subtree: std::collections::BTreeSet<TreeNodeId> =
        edges.iter().map(|e| e.child).collect();
    let mut state = MessageState::full_at(u);
    while let Some(e) = tree.parent_edge(top) {
        if !in_subtree.contains(&e.child) {
            break;
        }
        state = distribute_up(&state, tree, e.child, e.parent)?;
        steps.push(SimStep {
            edge: e,
            upward: true,
            holders: state.holder_count(),
        });
        top = e.parent;
    }
    // Walk down every branch, cloning at splits.
    fn descend(
        tree: &TreeGraph,
        in_subtree: &std::collections::BTreeSet<TreeNodeId>,
        node: TreeNodeId,
        state: &MessageState,
        steps: &mut Vec<SimStep>,
        finals: &mut BTreeMap<usize, MessageState>,
        source_leaf: TreeNodeId,
    ) -> Result<()> {
        if tree.is_leaf(node) && node != source_leaf {
            finals.insert(tree.leaf_node(node), state.clone());
            return Ok(());
        }
        for &c in tree.children(node) {
            if c == source_leaf && tree.is_leaf(c) {
                continue;
            }
            if in_subtree.contains(&c) {
                let next = concentrate_down(state, tree, node, c)?;
                steps.push(SimStep {
                    edge: tree.parent_edge(c).unwrap(),
                    upward: false,
                    holders: next.holder_count(),
                });
                descend(tree, in_subtree, c, &next, steps, finals, source_leaf)?;
            }
        }
        Ok(())
    }
    descend(
        tree,
        &in_subtree,
        top,
        &state,
        &mut steps,
        &mut finals,
        tree.leaf_id(u),
    )?;
    Ok((steps, finals))
}

/// One entry of the physical-layer rate ledger: the rate an edge is
/// served at, as a product of the declared time-share factors, against
/// the nominal edge capacity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateLedgerEntry {
    pub level: usize,
    pub leaf_edge: bool,
    pub factors: Vec<(String, f64)>,
    pub rate: f64,
    pub capacity: f64,
    pub gap_ratio: f64,
}

/// Rate the physical layer sustains on one edge. Internal edges carry
/// the up/down and level time share, the 1/4 spatial and 1/3 pairing
/// shares, and the per-node permutation rate over the representative
/// set; leaf edges carry the up/down share and the 1/16 intra-cell
/// pairing fraction. The unresolved sub-polynomial factor is taken as 1.
pub fn achieved_edge_rate(tree: &TreeGraph, edge: &EdgeRef, alpha: f64) -> RateLedgerEntry {
    let n = tree.n as f64;
    let levels = tree.levels as f64;
    let abar = alpha.min(3.0);
    let time_share = 1.0 / (2.0 * (levels + 1.0));
    let leaf_edge = tree.is_leaf(edge.child);
    let (factors, capacity): (Vec<(String, f64)>, f64) = if leaf_edge {
        let cell_size = 4f64.powi(-(tree.levels as i32)) * n;
        (
            vec![
                ("time_share_up_down_levels".into(), time_share),
                ("intra_cell_pairings".into(), 1.0 / 16.0),
                ("per_node_rate".into(), cell_size.powf(1.0 - abar / 2.0)),
            ],
            1.0,
        )
    } else {
        let level = edge.level;
        let reps = 4f64.powi(-(level as i32) - 1) * n;
        (
            vec![
                ("time_share_up_down_levels".into(), time_share),
                ("spatial_reuse".into(), 0.25),
                ("pairings".into(), 1.0 / 3.0),
                ("representative_count".into(), reps),
                ("per_node_rate".into(), reps.powf(1.0 - abar / 2.0)),
            ],
            tree.capacity(edge.child),
        )
    };
    let rate: f64 = factors.iter().map(|(_, v)| v).product();
    RateLedgerEntry {
        level: edge.level,
        leaf_edge,
        factors,
        rate,
        capacity,
        gap_ratio: rate / capacity,
    }
}

/// Full ledger over all edges, one entry per level (capacities and rates
/// depend only on the level).
pub fn rate_ledger(tree: &TreeGraph, alpha: f64) -> Vec<RateLedgerEntry> {
    let mut out = Vec::new();
    for level in 1..=tree.levels + 1 {
        // any edge at this level
        let edge = tree
            .edges()
            .find(|e| e.level == level)
            .expect("every level has an edge");
        out.push(achieved_edge_rate(tree, &edge, alpha));
    }
    out
}

/// Number of recursion levels of the relay hierarchy.
pub fn recursion_depth(n: usize) -> usize {
    ((n as f64).log2().powf(1.0 / 3.0).round() as usize).max(1)
}

/// Squarelet count for one recursion level, rounded up to a power of 4
/// so the squarelets tile the square region.
pub fn squarelet_count(n_level: usize) -> usize {
    if n_level < 4 {
        return 4;
    }
    let log_n = (n_level as f64).log2();
    let raw = (n_level as f64).powf(1.0 / (1.0 + log_n.powf(-1.0 / 3.0)));
    let grid_level = (raw.log2() / 2.0).ceil().max(1.0) as u32;
    1usize << (2 * grid_level)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelayLevel {
    /// squarelets per side
    pub grid_side: usize,
    pub squarelet_count: usize,
    pub node_counts: Vec<usize>,
    pub dense: Vec<bool>,
    /// relay squarelet per source-destination pair, pair order
    pub relay_of_pair: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelayHierarchy {
    pub depth: usize,
    pub pairs: Vec<(usize, usize)>,
    pub levels: Vec<RelayLevel>,
    pub success: bool,
}

/// Build the hierarchical relaying structure for a random permutation
/// pairing of the placement.
pub fn build_relay_hierarchy(placement: &NodePlacement, seed: u64) -> Result<RelayHierarchy> {
    let n = placement.n;
    if n < 16 {
        return Err(Error::InvalidSize(format!("n must be >= 16, got {n}")));
    }
    let traffic = gen_permutation(n, seed)?;
    let pairs: Vec<(usize, usize)> = traffic.iter().map(|(s, d, _)| (s, d)).collect();
    let depth = recursion_depth(n);
    let side = placement.side();
    let mut levels = Vec::with_capacity(depth);
    let mut n_level = n;
    for level in 0..depth {
        let count = squarelet_count(n_level);
        let grid_side = (count as f64).sqrt() as usize;
        let grid_level = grid_side.trailing_zeros() as usize;
        let mut node_counts = vec![0usize; count];
        let mut squarelet_of = vec![0usize; n];
        for (u, p) in placement.points.iter().enumerate() {
            let s = cell_index(*p, side, grid_level);
            squarelet_of[u] = s;
            node_counts[s] += 1;
        }
        let expected = n as f64 / count as f64;
        let dense: Vec<bool> = node_counts
            .iter()
            .map(|&c| c as f64 >= expected / 2.0)
            .collect();
        let mut assigned = vec![0usize; count];
        let mut relay_of_pair = Vec::with_capacity(pairs.len());
        for &(src, dst) in &pairs {
            let forbidden = (squarelet_of[src], squarelet_of[dst]);
            // least-loaded dense squarelet, lowest index on ties
            let mut best: Option<usize> = None;
            for (s, &is_dense) in dense.iter().enumerate() {
                if !is_dense || s == forbidden.0 || s == forbidden.1 {
                    continue;
                }
                match best {
                    None => best = Some(s),
                    Some(b) if assigned[s] < assigned[b] => best = Some(s),
                    _ => {}
                }
            }
            let relay = best.ok_or_else(|| Error::RelayFailure {
                level,
                histogram: node_counts.clone(),
            })?;
            assigned[relay] += 1;
            relay_of_pair.push(relay);
        }
        levels.push(RelayLevel {
            grid_side,
            squarelet_count: count,
            node_counts,
            dense,
            relay_of_pair,
        });
        n_level = ((n_level as f64 / count as f64).round() as usize).max(1);
    }
    Ok(RelayHierarchy {
        depth,
        pairs,
        levels,
        success: true,
    })
}

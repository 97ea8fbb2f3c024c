//! Cut-based membership tests for the approximate capacity regions, and
//! the maximal feasible traffic multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridDecomposition;
use crate::traffic::{MulticastTraffic, UnicastTraffic};
use crate::treegraph::internal_capacity;
use crate::util::{pairwise_sum, within_capacity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficKind {
    Unicast,
    Multicast,
}

/// Which cut family defines the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// traffic leaving each grid cell, plus node cuts
    OutOnly,
    /// traffic in both directions across each grid cell, plus node cuts;
    /// tight only for large path-loss exponents
    Both,
    /// node (singleton) cuts only, for dense rescaled networks
    Dense,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: TrafficKind,
    pub direction: Direction,
    pub alpha: f64,
}

impl RegionSpec {
    pub fn new(kind: TrafficKind, direction: Direction, alpha: f64) -> Result<Self> {
        if alpha <= 2.0 {
            return Err(Error::Domain(format!("alpha must be > 2, got {alpha}")));
        }
        Ok(Self {
            kind,
            direction,
            alpha,
        })
    }

    /// The both-directions characterization is tight only for alpha > 5.
    pub fn both_directions_tight(&self) -> bool {
        self.alpha > 5.0
    }
}

/// A single cut constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    CellCut {
        level: usize,
        cell: usize,
        direction: Direction,
    },
    NodeCut {
        node: usize,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub constraint: Constraint,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of a membership test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub feasible: bool,
    pub max_multiplier: f64,
    pub binding: Option<Constraint>,
    /// per-constraint (lhs, rhs), cell cuts in (level, cell) order then
    /// node cuts; truncated to loaded constraints on large instances
    pub slack: Vec<ConstraintSlack>,
    pub slack_truncated: bool,
}

const SLACK_CAP: usize = 512;

struct Evaluator {
    feasible: bool,
    best_ratio: f64,
    binding: Option<Constraint>,
    slack: Vec<ConstraintSlack>,
    keep_all: bool,
    truncated: bool,
}

impl Evaluator {
    fn new(total_constraints: usize) -> Self {
        Self {
            feasible: true,
            best_ratio: f64::INFINITY,
            binding: None,
            slack: Vec::new(),
            keep_all: total_constraints <= SLACK_CAP,
            truncated: false,
        }
    }

    /// Feed constraints in binding-priority order: cell cuts by (level,
    /// cell), then node cuts by node. Ties keep the earliest.
    fn push(&mut self, constraint: Constraint, lhs: f64, rhs: f64) {
        if !within_capacity(lhs, rhs) {
            self.feasible = false;
        }
        if lhs > 0.0 {
            let ratio = rhs / lhs;
            if ratio < self.best_ratio {
                self.best_ratio = ratio;
                self.binding = Some(constraint);
            }
        }
        if self.keep_all || lhs > 0.0 {
            if self.slack.len() < SLACK_CAP {
                self.slack.push(ConstraintSlack { constraint, lhs, rhs });
            } else {
                self.truncated = true;
            }
        }
    }

    fn finish(self) -> MembershipReport {
        MembershipReport {
            feasible: self.feasible,
            max_multiplier: self.best_ratio,
            binding: self.binding,
            slack: self.slack,
            slack_truncated: self.truncated,
        }
    }
}

fn check_index(u: usize, n: usize) -> Result<()> {
    if u >= n {
        Err(Error::IndexOutOfRange { index: u, n })
    } else {
        Ok(())
    }
}

/// Number of cell cuts evaluated for a decomposition: 4 + 16 + ... + 4^L.
pub fn cell_cut_count(levels: usize) -> usize {
    ((1usize << (2 * (levels + 1))) - 4) / 3
}

/// Test a unicast traffic matrix against the cut region.
pub fn membership_unicast(
    t: &UnicastTraffic,
    g: &GridDecomposition,
    spec: &RegionSpec,
) -> Result<MembershipReport> {
    if let Some(max) = t.max_node_index() {
        check_index(max, g.n)?;
    }
    let use_cells = spec.direction != Direction::Dense;
    let total = g.n + if use_cells { cell_cut_count(g.levels) } else { 0 };
    let mut eval = Evaluator::new(total);

    if use_cells {
        for level in 1..=g.levels {
            let cells = g.cell_count(level);
            let rhs = internal_capacity(g.n, level, spec.alpha);
            let mut out: Vec<Vec<f64>> = vec![Vec::new(); cells];
            for (src, dst, rate) in t.iter() {
                let cs = g.cell_of[level][src];
                let cd = g.cell_of[level][dst];
                if cs != cd {
                    out[cs].push(rate);
                    if spec.direction == Direction::Both {
                        out[cd].push(rate);
                    }
                }
            }
            for (cell, contrib) in out.iter().enumerate() {
                eval.push(
                    Constraint::CellCut {
                        level,
                        cell,
                        direction: spec.direction,
                    },
                    pairwise_sum(contrib),
                    rhs,
                );
            }
        }
    }

    let mut node: Vec<Vec<f64>> = vec![Vec::new(); g.n];
    for (src, dst, rate) in t.iter() {
        node[src].push(rate);
        node[dst].push(rate);
    }
    for (u, contrib) in node.iter().enumerate() {
        eval.push(Constraint::NodeCut { node: u }, pairwise_sum(contrib), 1.0);
    }
    Ok(eval.finish())
}

/// Test a multicast traffic matrix against the cut region.
pub fn membership_multicast(
    t: &MulticastTraffic,
    g: &GridDecomposition,
    spec: &RegionSpec,
) -> Result<MembershipReport> {
    if let Some(max) = t.max_node_index() {
        check_index(max, g.n)?;
    }
    let use_cells = spec.direction != Direction::Dense;
    let total = g.n + if use_cells { cell_cut_count(g.levels) } else { 0 };
    let mut eval = Evaluator::new(total);

    if use_cells {
        for level in 1..=g.levels {
            let cells = g.cell_count(level);
            let rhs = internal_capacity(g.n, level, spec.alpha);
            let mut lhs: Vec<Vec<f64>> = vec![Vec::new(); cells];
            for (src, group, rate) in t.iter() {
                let cs = g.cell_of[level][src];
                let mut group_cells: Vec<usize> =
                    group.iter().map(|&w| g.cell_of[level][w]).collect();
                group_cells.sort_unstable();
                group_cells.dedup();
                // source inside, group not contained
                if group_cells.iter().any(|&c| c != cs) {
                    lhs[cs].push(rate);
                }
                if spec.direction == Direction::Both {
                    // source outside, group intersecting
                    for &c in &group_cells {
                        if c != cs {
                            lhs[c].push(rate);
                        }
                    }
                }
            }
            for (cell, contrib) in lhs.iter().enumerate() {
                eval.push(
                    Constraint::CellCut {
                        level,
                        cell,
                        direction: spec.direction,
                    },
                    pairwise_sum(contrib),
                    rhs,
                );
            }
        }
    }

    let mut node: Vec<Vec<f64>> = vec![Vec::new(); g.n];
    for (src, group, rate) in t.iter() {
        if group.iter().any(|&w| w != src) {
            node[src].push(rate);
        }
        for &w in group {
            if w != src {
                node[w].push(rate);
            }
        }
    }
    for (u, contrib) in node.iter().enumerate() {
        eval.push(Constraint::NodeCut { node: u }, pairwise_sum(contrib), 1.0);
    }
    Ok(eval.finish())
}

/// Largest multiplier rho with rho * t inside the region.
pub fn max_multiplier_unicast(
    t: &UnicastTraffic,
    g: &GridDecomposition,
    spec: &RegionSpec,
) -> Result<f64> {
    Ok(membership_unicast(t, g, spec)?.max_multiplier)
}

pub fn max_multiplier_multicast(
    t: &MulticastTraffic,
    g: &GridDecomposition,
    spec: &RegionSpec,
) -> Result<f64> {
    Ok(membership_multicast(t, g, spec)?.max_multiplier)
}

/// Membership and balance in one report, for the balanced-region
/// intersection with a caller-supplied gamma threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalancedMembershipReport {
    pub membership: MembershipReport,
    pub balance: crate::traffic::BalanceReport,
    pub gamma_threshold: f64,
    pub balanced: bool,
}

pub fn balanced_membership_unicast(
    t: &UnicastTraffic,
    g: &GridDecomposition,
    spec: &RegionSpec,
    gamma_threshold: Option<f64>,
) -> Result<BalancedMembershipReport> {
    let membership = membership_unicast(t, g, spec)?;
    let balance = crate::traffic::balance_factor_unicast(t, g)?;
    let gamma_threshold = gamma_threshold.unwrap_or(1.0);
    let balanced = balance.gamma <= gamma_threshold;
    Ok(BalancedMembershipReport {
        membership,
        balance,
        gamma_threshold,
        balanced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{decompose, place_nodes, NodePlacement};
    use crate::traffic::gen_broadcast;

    fn ideal_grid_16() -> NodePlacement {
        let mut points = Vec::new();
        for row in 0..4 {
            for col in 0..4 {
                points.push([col as f64 + 0.5, row as f64 + 0.5]);
            }
        }
        NodePlacement::from_points(16, 0, points).unwrap()
    }

    /// Derangement on the ideal 16-grid with every destination in a
    /// different level-1 cell: node k of cell c sends to node k of cell
    /// (c + 1) mod 4.
    pub(crate) fn cross_cell_derangement(g: &GridDecomposition) -> UnicastTraffic {
        let mut t = UnicastTraffic::new();
        for cell in 0..4usize {
            let members = g.members(1, cell);
            let targets = g.members(1, (cell + 1) % 4);
            for (a, b) in members.iter().zip(targets.iter()) {
                t.add(*a, *b, 1.0).unwrap();
            }
        }
        t
    }

    #[test]
    fn zero_traffic_is_feasible_with_infinite_multiplier() {
        let p = place_nodes(64, 2).unwrap();
        let g = decompose(&p).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let r = membership_unicast(&UnicastTraffic::new(), &g, &spec).unwrap();
        assert!(r.feasible);
        assert!(r.max_multiplier.is_infinite());
        assert!(r.binding.is_none());
    }

    #[test]
    fn ideal_grid_derangement_multiplier() {
        let p = ideal_grid_16();
        let g = decompose(&p).unwrap();
        let t = cross_cell_derangement(&g);
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let r = membership_unicast(&t, &g, &spec).unwrap();
        // cell cuts: lhs 4, rhs 2; node cuts: lhs 2, rhs 1
        assert_eq!(r.max_multiplier, 0.5);
        assert!(!r.feasible);
        assert_eq!(
            r.binding,
            Some(Constraint::CellCut {
                level: 1,
                cell: 0,
                direction: Direction::OutOnly
            })
        );
    }

    #[test]
    fn symmetric_pair_in_one_cell_binds_node_cuts() {
        let p = place_nodes(256, 31).unwrap();
        let g = decompose(&p).unwrap();
        // two nodes sharing a level-L cell
        let cell = g
            .cell_members[g.levels]
            .iter()
            .find(|m| m.len() >= 2)
            .unwrap();
        let (u, w) = (cell[0], cell[1]);
        let rho = 0.8;
        let mut t = UnicastTraffic::new();
        t.add(u, w, rho).unwrap();
        t.add(w, u, rho).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let r = membership_unicast(&t, &g, &spec).unwrap();
        assert!((r.max_multiplier - 1.0 / (2.0 * rho)).abs() < 1e-12);
        assert_eq!(r.binding, Some(Constraint::NodeCut { node: u.min(w) }));
    }

    #[test]
    fn broadcast_node_cuts_bind() {
        let p = place_nodes(64, 4).unwrap();
        let g = decompose(&p).unwrap();
        let t = gen_broadcast(64, &vec![1.0; 64], 1.0).unwrap();
        let spec = RegionSpec::new(TrafficKind::Multicast, Direction::OutOnly, 3.0).unwrap();
        let r = membership_multicast(&t, &g, &spec).unwrap();
        assert!((r.max_multiplier - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn contained_group_only_binds_source_node_cut() {
        let p = ideal_grid_16();
        let g = decompose(&p).unwrap();
        // nodes 0, 1 share every cell up to level L
        let mut t = MulticastTraffic::new();
        t.add(0, &[1], 2.0).unwrap();
        let spec = RegionSpec::new(TrafficKind::Multicast, Direction::OutOnly, 3.0).unwrap();
        let r = membership_multicast(&t, &g, &spec).unwrap();
        assert_eq!(r.max_multiplier, 0.5);
        assert_eq!(r.binding, Some(Constraint::NodeCut { node: 0 }));
    }

    #[test]
    fn multiplier_scales_inversely() {
        let p = place_nodes(64, 6).unwrap();
        let g = decompose(&p).unwrap();
        let t = crate::traffic::gen_permutation(64, 3).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let a = max_multiplier_unicast(&t, &g, &spec).unwrap();
        let b = max_multiplier_unicast(&t.scaled(4.0), &g, &spec).unwrap();
        assert!((b - a / 4.0).abs() < 1e-12 * a);
    }

    #[test]
    fn boundary_traffic_has_multiplier_one() {
        let p = place_nodes(64, 6).unwrap();
        let g = decompose(&p).unwrap();
        let t = crate::traffic::gen_permutation(64, 3).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let rho = max_multiplier_unicast(&t, &g, &spec).unwrap();
        let scaled = t.scaled(rho);
        let r = membership_unicast(&scaled, &g, &spec).unwrap();
        assert!((r.max_multiplier - 1.0).abs() < 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn direction_dominance() {
        let p = place_nodes(64, 10).unwrap();
        let g = decompose(&p).unwrap();
        let t = crate::traffic::gen_permutation(64, 11).unwrap();
        let out = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 2.5).unwrap();
        let both = RegionSpec::new(TrafficKind::Unicast, Direction::Both, 2.5).unwrap();
        let a = max_multiplier_unicast(&t, &g, &out).unwrap();
        let b = max_multiplier_unicast(&t, &g, &both).unwrap();
        assert!(b <= a);
    }

    #[test]
    fn alpha_monotonicity() {
        let p = place_nodes(64, 12).unwrap();
        let g = decompose(&p).unwrap();
        let t = crate::traffic::gen_permutation(64, 13).unwrap();
        let mut prev = f64::INFINITY;
        for &alpha in &[2.2, 2.5, 2.8, 3.0, 4.0, 6.0] {
            let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, alpha).unwrap();
            let m = max_multiplier_unicast(&t, &g, &spec).unwrap();
            assert!(m <= prev + 1e-12);
            prev = m;
        }
        let s3 = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        let s5 = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 5.0).unwrap();
        assert_eq!(
            max_multiplier_unicast(&t, &g, &s3).unwrap(),
            max_multiplier_unicast(&t, &g, &s5).unwrap()
        );
    }

    #[test]
    fn constraint_count_bound() {
        for n in [16usize, 64, 256, 1024] {
            let (levels, _) = crate::geometry::grid_levels(n).unwrap();
            let cuts = cell_cut_count(levels);
            assert!(cuts <= ((1usize << (2 * (levels + 1))) - 4) / 3);
            assert!(cuts <= 2 * n);
        }
    }

    #[test]
    fn bad_index_is_rejected() {
        let p = place_nodes(16, 2).unwrap();
        let g = decompose(&p).unwrap();
        let mut t = UnicastTraffic::new();
        t.add(0, 99, 1.0).unwrap();
        let spec = RegionSpec::new(TrafficKind::Unicast, Direction::OutOnly, 3.0).unwrap();
        assert!(matches!(
            membership_unicast(&t, &g, &spec),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}

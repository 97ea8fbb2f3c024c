//! Closed-form sanity bounds on single-node cut capacities.

use serde::{Deserialize, Serialize};

use crate::geometry::{dist, NodePlacement};

/// Information-flow bound out of one node, against the coarse
/// `(2 + alpha) log2 n` cap it must stay under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutBoundReport {
    pub node: usize,
    /// log2(1 + sum over other nodes of r^{-alpha})
    pub value: f64,
    pub bound: f64,
    /// None when the coarse cap is only asymptotic (n too small to
    /// matter is never the case here; kept for symmetry with callers
    /// that skip the comparison)
    pub satisfied: Option<bool>,
}

/// Capacity of the cut isolating `node` from everyone else, in the
/// power-limited model: log2(1 + sum_{v != u} r_{uv}^{-alpha}).
pub fn node_cut_bound(placement: &NodePlacement, node: usize, alpha: f64) -> CutBoundReport {
    let p = placement.points[node];
    let sum: f64 = placement
        .points
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != node)
        .map(|(_, q)| dist(p, *q).powf(-alpha))
        .sum();
    let value = (1.0 + sum).log2();
    let bound = (2.0 + alpha) * (placement.n as f64).log2();
    CutBoundReport {
        node,
        value,
        bound,
        satisfied: Some(value <= bound),
    }
}

/// Reports for every node.
pub fn all_node_cut_bounds(placement: &NodePlacement, alpha: f64) -> Vec<CutBoundReport> {
    (0..placement.points.len())
        .map(|u| node_cut_bound(placement, u, alpha))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::place_nodes;

    fn square_corners() -> NodePlacement {
        // n = 4, region [0, 2]^2, nodes at the corners: distances from
        // node 0 are 2, 2, 2*sqrt(2)
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]];
        NodePlacement::from_points(4, 0, pts).unwrap()
    }

    #[test]
    fn corner_value_matches_closed_form() {
        let r = node_cut_bound(&square_corners(), 0, 3.0);
        let expect = (1.0f64 + 2.0 * 2.0f64.powf(-3.0) + (8.0f64).sqrt().powf(-3.0)).log2();
        assert!((r.value - expect).abs() < 1e-12);
        assert!((expect - 0.372).abs() < 5e-3);
        assert_eq!(r.satisfied, Some(true));
    }

    #[test]
    fn value_decreases_in_alpha_beyond_unit_distance() {
        let p = square_corners();
        let mut prev = f64::INFINITY;
        for alpha in [2.2, 3.0, 4.0, 6.0] {
            let v = node_cut_bound(&p, 0, alpha).value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn random_placements_satisfy_the_cap() {
        for seed in 0..20 {
            let p = place_nodes(256, seed).unwrap();
            for r in all_node_cut_bounds(&p, 3.0) {
                assert_eq!(r.satisfied, Some(true), "node {} value {}", r.node, r.value);
            }
        }
    }
}

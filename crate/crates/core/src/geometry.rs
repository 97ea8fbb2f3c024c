//! Node placement on the square region, the nested grid decomposition, and
//! the regularity checks that the capacity characterization depends on.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` points on `[0, sqrt(n)]^2`, reproducible from `(n, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePlacement {
    pub n: usize,
    pub seed: u64,
    pub points: Vec<[f64; 2]>,
}

impl NodePlacement {
    pub fn side(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// Build a placement from explicit coordinates, validating bounds.
    pub fn from_points(n: usize, seed: u64, points: Vec<[f64; 2]>) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidSize(format!("n must be >= 4, got {n}")));
        }
        if points.len() != n {
            return Err(Error::InvalidSize(format!(
                "expected {n} points, got {}",
                points.len()
            )));
        }
        let side = (n as f64).sqrt();
        for (i, p) in points.iter().enumerate() {
            if !(0.0..=side).contains(&p[0]) || !(0.0..=side).contains(&p[1]) {
                return Err(Error::Domain(format!(
                    "point {i} = ({}, {}) outside [0, {side}]^2",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self { n, seed, points })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let raw: NodePlacement =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
        Self::from_points(raw.n, raw.seed, raw.points)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

/// Draw `n` points independently and uniformly on `[0, sqrt(n)]^2`.
pub fn place_nodes(n: usize, seed: u64) -> Result<NodePlacement> {
    if n < 4 {
        return Err(Error::InvalidSize(format!("n must be >= 4, got {n}")));
    }
    let side = (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let x: f64 = rng.gen::<f64>() * side;
            let y: f64 = rng.gen::<f64>() * side;
            [x, y]
        })
        .collect();
    Ok(NodePlacement { n, seed, points })
}

/// Level count `L(n) = floor(1/2 log n (1 - log^{-1/2} n))` and the deeper
/// limit `L'(n)` used by the regularity class. Logarithms are base 2.
pub fn grid_levels(n: usize) -> Result<(usize, usize)> {
    if n < 4 {
        return Err(Error::InvalidSize(format!("n must be >= 4, got {n}")));
    }
    let log_n = (n as f64).log2();
    let l = 0.5 * log_n * (1.0 - log_n.powf(-0.5));
    let lprime = 0.5 * log_n * (1.0 - 0.5 * log_n.powf(-5.0 / 6.0));
    let l = l.floor().max(0.0) as usize;
    let lprime = lprime.floor().max(0.0) as usize;
    Ok((l, lprime.max(l)))
}

/// Cell index of a point at a grid level. Cells are half-open, closed at
/// the top/right boundary of the region, numbered row-major from the
/// bottom-left, 0-based.
pub fn cell_index(point: [f64; 2], side: f64, level: usize) -> usize {
    let m = 1usize << level;
    let cell_side = side / m as f64;
    let col = ((point[0] / cell_side) as usize).min(m - 1);
    let row = ((point[1] / cell_side) as usize).min(m - 1);
    row * m + col
}

/// Index of the quadrant-parent of `cell` one level up.
pub fn parent_cell(cell: usize, level: usize) -> usize {
    debug_assert!(level >= 1);
    let m = 1usize << level;
    let row = cell / m;
    let col = cell % m;
    (row / 2) * (m / 2) + col / 2
}

/// Per-level cell assignment for levels `0..=L`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDecomposition {
    pub n: usize,
    pub levels: usize,
    pub lprime: usize,
    /// `cell_of[level][node]`
    pub cell_of: Vec<Vec<usize>>,
    /// `cell_members[level][cell]`, node indices ascending
    pub cell_members: Vec<Vec<Vec<usize>>>,
}

impl GridDecomposition {
    pub fn cell_count(&self, level: usize) -> usize {
        1usize << (2 * level)
    }

    pub fn members(&self, level: usize, cell: usize) -> &[usize] {
        &self.cell_members[level][cell]
    }
}

/// Assign each node to its cell at every level `0..=L(n)`.
pub fn decompose(placement: &NodePlacement) -> Result<GridDecomposition> {
    let (levels, lprime) = grid_levels(placement.n)?;
    let side = placement.side();
    let mut cell_of = Vec::with_capacity(levels + 1);
    let mut cell_members = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        let cells = 1usize << (2 * level);
        let mut of = Vec::with_capacity(placement.n);
        let mut members = vec![Vec::new(); cells];
        for (u, p) in placement.points.iter().enumerate() {
            let c = cell_index(*p, side, level);
            of.push(c);
            members[c].push(u);
        }
        cell_of.push(of);
        cell_members.push(members);
    }
    Ok(GridDecomposition {
        n: placement.n,
        levels,
        lprime,
        cell_of,
        cell_members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularityCondition {
    MinDistance,
    UnitCellMax,
    LogCellMin,
    Proportional,
    LevelClamped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityViolation {
    pub condition: RegularityCondition,
    pub level: usize,
    pub cell: usize,
}

/// Outcome of the four regularity conditions defining the class of
/// placements for which the cut characterization is valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub min_dist_ok: bool,
    pub unit_cell_max_ok: bool,
    pub log_cell_min_ok: bool,
    /// index k holds the flag for level k+1, up to L'
    pub proportional_ok: Vec<bool>,
    pub violations: Vec<RegularityViolation>,
    pub overall: bool,
}

fn cell_counts(placement: &NodePlacement, level: usize) -> Vec<usize> {
    let side = placement.side();
    let mut counts = vec![0usize; 1 << (2 * level)];
    for p in &placement.points {
        counts[cell_index(*p, side, level)] += 1;
    }
    counts
}

/// Evaluate the four regularity conditions. Failures are reported, never
/// raised.
pub fn check_regularity(
    placement: &NodePlacement,
    decomposition: &GridDecomposition,
) -> RegularityReport {
    let n = placement.n;
    let log_n = (n as f64).log2();
    let mut violations = Vec::new();

    // (a) minimum pairwise distance > 1/n
    let min_dist_ok = min_distance(placement)
        .map(|d| d > 1.0 / n as f64)
        .unwrap_or(false);
    if !min_dist_ok {
        violations.push(RegularityViolation {
            condition: RegularityCondition::MinDistance,
            level: 0,
            cell: 0,
        });
    }

    // Levels beyond 1/2 log n would have cells of area below one; that is
    // the finest resolution any condition may ask for.
    let max_level = (0.5 * log_n).floor() as usize;
    let clamp = |requested: usize, violations: &mut Vec<RegularityViolation>| -> usize {
        if requested > max_level {
            violations.push(RegularityViolation {
                condition: RegularityCondition::LevelClamped,
                level: requested,
                cell: 0,
            });
            max_level
        } else {
            requested
        }
    };

    // (b) cells at level 1/2 log n hold at most log n nodes
    let level_b = clamp((0.5 * log_n).floor() as usize, &mut violations);
    let mut unit_cell_max_ok = true;
    for (i, &c) in cell_counts(placement, level_b).iter().enumerate() {
        if c as f64 > log_n {
            unit_cell_max_ok = false;
            violations.push(RegularityViolation {
                condition: RegularityCondition::UnitCellMax,
                level: level_b,
                cell: i,
            });
        }
    }

    // (c) cells at level 1/2 log(n / (2 log n)) hold at least one node
    let level_c = clamp(
        (0.5 * (n as f64 / (2.0 * log_n)).log2()).floor().max(0.0) as usize,
        &mut violations,
    );
    let mut log_cell_min_ok = true;
    for (i, &c) in cell_counts(placement, level_c).iter().enumerate() {
        if c == 0 {
            log_cell_min_ok = false;
            violations.push(RegularityViolation {
                condition: RegularityCondition::LogCellMin,
                level: level_c,
                cell: i,
            });
        }
    }

    // (d) cells at levels 1..=L' hold a number of nodes proportional to
    // their area
    let lprime = clamp(decomposition.lprime, &mut violations);
    let mut proportional_ok = Vec::with_capacity(lprime);
    for level in 1..=lprime {
        let lo = 4f64.powi(-(level as i32) - 1) * n as f64;
        let hi = 4f64.powi(-(level as i32) + 1) * n as f64;
        let mut ok = true;
        for (i, &c) in cell_counts(placement, level).iter().enumerate() {
            if (c as f64) < lo || (c as f64) > hi {
                ok = false;
                violations.push(RegularityViolation {
                    condition: RegularityCondition::Proportional,
                    level,
                    cell: i,
                });
            }
        }
        proportional_ok.push(ok);
    }

    let overall = min_dist_ok
        && unit_cell_max_ok
        && log_cell_min_ok
        && proportional_ok.iter().all(|&f| f);
    RegularityReport {
        min_dist_ok,
        unit_cell_max_ok,
        log_cell_min_ok,
        proportional_ok,
        violations,
        overall,
    }
}

/// Minimum pairwise Euclidean distance, via unit-cell bucketing with a
/// brute-force fallback when the bucket scan finds no candidate pair.
pub fn min_distance(placement: &NodePlacement) -> Result<f64> {
    let n = placement.points.len();
    if placement.points.len() < 2 {
        return Err(Error::InvalidSize(
            "min_distance needs at least 2 points".into(),
        ));
    }
    let side = placement.side();
    let m = (side.ceil() as usize).max(1);
    let cell_side = side / m as f64;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m * m];
    for (u, p) in placement.points.iter().enumerate() {
        let col = ((p[0] / cell_side) as usize).min(m - 1);
        let row = ((p[1] / cell_side) as usize).min(m - 1);
        buckets[row * m + col].push(u);
    }
    let mut best = f64::INFINITY;
    for row in 0..m {
        for col in 0..m {
            for &u in &buckets[row * m + col] {
                for dr in 0..=1usize {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc < 0 {
                            continue;
                        }
                        let (nr, nc) = (row + dr, col as i64 + dc);
                        if nr >= m || nc < 0 || nc as usize >= m {
                            continue;
                        }
                        for &v in &buckets[nr * m + nc as usize] {
                            if (dr == 0 && dc == 0 && v <= u) || v == u {
                                continue;
                            }
                            let d = dist(placement.points[u], placement.points[v]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
    }
    if best.is_infinite() {
        // No pair shares a neighborhood; scan everything.
        for u in 0..n {
            for v in (u + 1)..n {
                let d = dist(placement.points[u], placement.points[v]);
                if d < best {
                    best = d;
                }
            }
        }
    }
    Ok(best)
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform spatial index over the placement for radius and nearest-node
/// queries.
pub struct GridIndex<'a> {
    placement: &'a NodePlacement,
    m: usize,
    cell_side: f64,
    buckets: Vec<Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    pub fn new(placement: &'a NodePlacement) -> Self {
        let side = placement.side();
        let m = (side.ceil() as usize).max(1);
        let cell_side = side / m as f64;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m * m];
        for (u, p) in placement.points.iter().enumerate() {
            let col = ((p[0] / cell_side) as usize).min(m - 1);
            let row = ((p[1] / cell_side) as usize).min(m - 1);
            buckets[row * m + col].push(u);
        }
        Self {
            placement,
            m,
            cell_side,
            buckets,
        }
    }

    /// Nodes within distance `r` of node `u`, excluding `u`, ascending.
    pub fn within_radius(&self, u: usize, r: f64) -> Vec<usize> {
        let side = self.placement.side();
        if r >= side * std::f64::consts::SQRT_2 {
            return (0..self.placement.n).filter(|&v| v != u).collect();
        }
        let p = self.placement.points[u];
        let reach = (r / self.cell_side).ceil() as i64 + 1;
        let col = ((p[0] / self.cell_side) as i64).min(self.m as i64 - 1);
        let row = ((p[1] / self.cell_side) as i64).min(self.m as i64 - 1);
        let mut out = Vec::new();
        for nr in (row - reach).max(0)..=(row + reach).min(self.m as i64 - 1) {
            for nc in (col - reach).max(0)..=(col + reach).min(self.m as i64 - 1) {
                for &v in &self.buckets[nr as usize * self.m + nc as usize] {
                    if v != u && dist(p, self.placement.points[v]) <= r {
                        out.push(v);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest node to `u` (smallest index on ties).
    pub fn nearest(&self, u: usize) -> usize {
        let p = self.placement.points[u];
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        // Expand rings until a hit, then one more ring to be safe.
        let col = ((p[0] / self.cell_side) as i64).min(self.m as i64 - 1);
        let row = ((p[1] / self.cell_side) as i64).min(self.m as i64 - 1);
        let mut ring = 0i64;
        let mut found_at = None;
        while ring < self.m as i64 * 2 {
            for nr in (row - ring).max(0)..=(row + ring).min(self.m as i64 - 1) {
                for nc in (col - ring).max(0)..=(col + ring).min(self.m as i64 - 1) {
                    if (nr - row).abs() != ring && (nc - col).abs() != ring {
                        continue;
                    }
                    for &v in &self.buckets[nr as usize * self.m + nc as usize] {
                        if v == u {
                            continue;
                        }
                        let d = dist(p, self.placement.points[v]);
                        if d < best_d || (d == best_d && v < best) {
                            best_d = d;
                            best = v;
                        }
                    }
                }
            }
            if let Some(hit) = found_at {
                if ring > hit {
                    break;
                }
            } else if best != usize::MAX {
                found_at = Some(ring);
            }
            ring += 1;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn place_nodes_respects_bounds() {
        let p = place_nodes(4, 7).unwrap();
        assert_eq!(p.points.len(), 4);
        for pt in &p.points {
            assert!(pt[0] >= 0.0 && pt[0] <= 2.0);
            assert!(pt[1] >= 0.0 && pt[1] <= 2.0);
        }
    }

    #[test]
    fn place_nodes_is_deterministic() {
        let a = place_nodes(16, 123).unwrap();
        let b = place_nodes(16, 123).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn place_nodes_rejects_tiny_n() {
        assert!(matches!(place_nodes(3, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn place_nodes_mean_is_near_center() {
        // Mean of x over 1024 uniform draws on [0, 32] has sigma
        // side/sqrt(12 n); require it within 3 sigma of side/2 = 16.
        let n = 1024;
        let p = place_nodes(n, 42).unwrap();
        let mean_x: f64 = p.points.iter().map(|q| q[0]).sum::<f64>() / n as f64;
        let side = p.side();
        let sigma_mean = side / (12.0 * n as f64).sqrt();
        assert!(
            (mean_x - side / 2.0).abs() < 3.0 * sigma_mean,
            "mean_x = {mean_x}, expected near {}",
            side / 2.0
        );
    }

    #[test]
    fn grid_levels_exact_values() {
        assert_eq!(grid_levels(65536).unwrap().0, 6);
        assert_eq!(grid_levels(256).unwrap().0, 2);
        assert_eq!(grid_levels(65536).unwrap().1, 7);
    }

    #[test]
    fn grid_levels_monotone_in_n() {
        let mut prev = (0, 0);
        let mut n = 4usize;
        while n <= 1 << 20 {
            let cur = grid_levels(n).unwrap();
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1, "n={n}");
            assert!(cur.0 <= cur.1);
            prev = cur;
            n *= 2;
        }
    }

    #[test]
    fn cell_index_corners() {
        // n = 64, side 8
        assert_eq!(cell_index([0.1, 0.1], 8.0, 1), 0);
        assert_eq!(cell_index([7.9, 7.9], 8.0, 1), 3);
        assert_eq!(cell_index([8.0, 8.0], 8.0, 1), 3);
        assert_eq!(cell_index([4.0, 0.0], 8.0, 1), 1);
    }

    #[test]
    fn decompose_partitions_and_nests() {
        let p = place_nodes(256, 9).unwrap();
        let g = decompose(&p).unwrap();
        for level in 0..=g.levels {
            let total: usize = g.cell_members[level].iter().map(|c| c.len()).sum();
            assert_eq!(total, p.n);
        }
        for level in 0..g.levels {
            for u in 0..p.n {
                let child = g.cell_of[level + 1][u];
                assert_eq!(parent_cell(child, level + 1), g.cell_of[level][u]);
            }
        }
    }

    #[test]
    fn min_distance_exact_cases() {
        let p = NodePlacement::from_points(4, 0, vec![[0.0, 0.0], [1.8, 1.4], [0.0, 1.0], [1.0, 0.0]])
            .unwrap();
        // closest pair: (0,0)-(1,0) and (0,0)-(0,1), distance 1
        assert_eq!(min_distance(&p).unwrap(), 1.0);
    }

    #[test]
    fn min_distance_three_four_five() {
        // 3-4-5 triangle: the only pair is at distance exactly 5.
        let p = NodePlacement {
            n: 64,
            seed: 0,
            points: vec![[0.0, 0.0], [3.0, 4.0]],
        };
        assert_eq!(min_distance(&p).unwrap(), 5.0);
    }

    #[test]
    fn min_distance_matches_brute_force() {
        let p = place_nodes(1000, 5).unwrap();
        let fast = min_distance(&p).unwrap();
        let mut brute = f64::INFINITY;
        for u in 0..p.n {
            for v in (u + 1)..p.n {
                brute = brute.min(dist(p.points[u], p.points[v]));
            }
        }
        assert_eq!(fast, brute);
    }

    fn ideal_grid_16() -> NodePlacement {
        let mut points = Vec::new();
        for row in 0..4 {
            for col in 0..4 {
                points.push([col as f64 + 0.5, row as f64 + 0.5]);
            }
        }
        NodePlacement::from_points(16, 0, points).unwrap()
    }

    #[test]
    fn regularity_holds_on_ideal_grid() {
        let p = ideal_grid_16();
        let g = decompose(&p).unwrap();
        let r = check_regularity(&p, &g);
        assert!(r.overall, "violations: {:?}", r.violations);
    }

    #[test]
    fn regularity_flags_coincident_points() {
        let mut p = ideal_grid_16();
        p.points[1] = p.points[0];
        let g = decompose(&p).unwrap();
        let r = check_regularity(&p, &g);
        assert!(!r.min_dist_ok);
        assert!(!r.overall);
    }

    #[test]
    fn regularity_flags_crowded_unit_cell() {
        // all 64 points inside one unit square: 64 > log2(64) = 6
        let points = (0..64)
            .map(|i| [0.1 + 0.01 * (i % 8) as f64, 0.1 + 0.01 * (i / 8) as f64])
            .collect();
        let p = NodePlacement::from_points(64, 0, points).unwrap();
        let g = decompose(&p).unwrap();
        let r = check_regularity(&p, &g);
        assert!(!r.unit_cell_max_ok);
    }

    #[test]
    fn placement_roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("placement.json");
        let p = place_nodes(16, 3).unwrap();
        p.save(&path).unwrap();
        let q = NodePlacement::load(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn grid_index_radius_matches_scan() {
        let p = place_nodes(256, 11).unwrap();
        let idx = GridIndex::new(&p);
        for &u in &[0usize, 17, 100, 255] {
            for &r in &[0.5f64, 2.0, 7.0, 100.0] {
                let fast = idx.within_radius(u, r);
                let slow: Vec<usize> = (0..p.n)
                    .filter(|&v| v != u && dist(p.points[u], p.points[v]) <= r)
                    .collect();
                assert_eq!(fast, slow, "u={u} r={r}");
            }
        }
    }

    #[test]
    fn grid_index_nearest_matches_scan() {
        let p = place_nodes(256, 13).unwrap();
        let idx = GridIndex::new(&p);
        for u in (0..p.n).step_by(17) {
            let fast = idx.nearest(u);
            let slow = (0..p.n)
                .filter(|&v| v != u)
                .min_by(|&a, &b| {
                    dist(p.points[u], p.points[a])
                        .partial_cmp(&dist(p.points[u], p.points[b]))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            assert_eq!(
                dist(p.points[u], p.points[fast]),
                dist(p.points[u], p.points[slow]),
                "u={u}"
            );
        }
    }
}

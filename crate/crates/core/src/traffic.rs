//! Sparse unicast and multicast traffic matrices, balance factors, and the
//! example-scenario generators.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridDecomposition, GridIndex, NodePlacement};
use crate::util::pairwise_sum;

/// Sparse nonnegative rate map over ordered node pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnicastTraffic {
    entries: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnicastLine {
    src: usize,
    dst: usize,
    rate: f64,
}

impl UnicastTraffic {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `rate` to the (src, dst) entry. Self-pairs and negative rates
    /// are rejected; zero rates are dropped.
    pub fn add(&mut self, src: usize, dst: usize, rate: f64) -> Result<()> {
        if src == dst {
            return Err(Error::Domain(format!("self-pair ({src}, {dst})")));
        }
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::Domain(format!("invalid rate {rate}")));
        }
        if rate > 0.0 {
            *self.entries.entry((src, dst)).or_insert(0.0) += rate;
        }
        Ok(())
    }

    pub fn rate(&self, src: usize, dst: usize) -> f64 {
        self.entries.get(&(src, dst)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(s, d), &r)| (s, d, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(&k, &r)| (k, r * c))
                .collect(),
        }
    }

    pub fn max_node_index(&self) -> Option<usize> {
        self.entries
            .keys()
            .map(|&(s, d)| s.max(d))
            .max()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut t = Self::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: UnicastLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: {e}", i + 1),
            })?;
            t.add(rec.src, rec.dst, rec.rate).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: {e}", i + 1),
            })?;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        for (src, dst, rate) in self.iter() {
            let line = serde_json::to_string(&UnicastLine { src, dst, rate }).expect("serialize");
            writeln!(w, "{line}").map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// Sparse rate map over (source, destination-group) pairs. Groups are kept
/// canonical: sorted ascending, deduplicated, nonempty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MulticastTraffic {
    entries: BTreeMap<(usize, Vec<usize>), f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MulticastLine {
    src: usize,
    group: Vec<usize>,
    rate: f64,
}

impl MulticastTraffic {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, src: usize, group: &[usize], rate: f64) -> Result<()> {
        if group.is_empty() {
            return Err(Error::Domain("empty multicast group".into()));
        }
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::Domain(format!("invalid rate {rate}")));
        }
        let mut canon = group.to_vec();
        canon.sort_unstable();
        canon.dedup();
        if rate > 0.0 {
            *self.entries.entry((src, canon)).or_insert(0.0) += rate;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize], f64)> + '_ {
        self.entries
            .iter()
            .map(|(&(s, ref g), &r)| (s, g.as_slice(), r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, &r)| (k.clone(), r * c))
                .collect(),
        }
    }

    pub fn max_node_index(&self) -> Option<usize> {
        self.entries
            .keys()
            .map(|(s, g)| g.iter().copied().max().unwrap_or(0).max(*s))
            .max()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut t = Self::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: MulticastLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: {e}", i + 1),
            })?;
            t.add(rec.src, &rec.group, rec.rate)
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("line {}: {e}", i + 1),
                })?;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        for (src, group, rate) in self.iter() {
            let line = serde_json::to_string(&MulticastLine {
                src,
                group: group.to_vec(),
                rate,
            })
            .expect("serialize");
            writeln!(w, "{line}").map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// Per-cut inflow/outflow and the resulting balance factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceReport {
    pub gamma: f64,
    pub binding_cut: Option<(usize, usize)>,
    pub per_cut: Vec<CutFlow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutFlow {
    pub level: usize,
    pub cell: usize,
    pub inflow: f64,
    pub outflow: f64,
}

/// Ratio with the 0/0 -> 0 and positive/0 -> infinity conventions.
fn flow_ratio(inflow: f64, outflow: f64) -> f64 {
    if inflow == 0.0 {
        0.0
    } else if outflow == 0.0 {
        f64::INFINITY
    } else {
        inflow / outflow
    }
}

fn finish_balance(per_cut: Vec<CutFlow>) -> BalanceReport {
    let mut gamma = 0.0f64;
    let mut binding_cut = None;
    for c in &per_cut {
        let ratio = flow_ratio(c.inflow, c.outflow);
        if ratio > gamma {
            gamma = ratio;
            binding_cut = Some((c.level, c.cell));
        }
    }
    BalanceReport {
        gamma,
        binding_cut,
        per_cut,
    }
}

fn check_index(u: usize, n: usize) -> Result<()> {
    if u >= n {
        Err(Error::IndexOutOfRange { index: u, n })
    } else {
        Ok(())
    }
}

/// Inflow/outflow across every grid cut at levels `1..=L` for unicast
/// traffic.
pub fn balance_factor_unicast(
    t: &UnicastTraffic,
    g: &GridDecomposition,
) -> Result<BalanceReport> {
    let mut per_cut = Vec::new();
    for level in 1..=g.levels {
        let cells = g.cell_count(level);
        let mut inflow: Vec<Vec<f64>> = vec![Vec::new(); cells];
        let mut outflow: Vec<Vec<f64>> = vec![Vec::new(); cells];
        for (src, dst, rate) in t.iter() {
            check_index(src, g.n)?;
            check_index(dst, g.n)?;
            let cs = g.cell_of[level][src];
            let cd = g.cell_of[level][dst];
            if cs != cd {
                outflow[cs].push(rate);
                inflow[cd].push(rate);
            }
        }
        for cell in 0..cells {
            per_cut.push(CutFlow {
                level,
                cell,
                inflow: pairwise_sum(&inflow[cell]),
                outflow: pairwise_sum(&outflow[cell]),
            });
        }
    }
    Ok(finish_balance(per_cut))
}

/// Inflow/outflow across every grid cut at levels `1..=L` for multicast
/// traffic: an entry flows into a cell its source is outside of when the
/// group intersects the cell, and out of its source cell when the group
/// is not contained in it.
pub fn balance_factor_multicast(
    t: &MulticastTraffic,
    g: &GridDecomposition,
) -> Result<BalanceReport> {
    let mut per_cut = Vec::new();
    for level in 1..=g.levels {
        let cells = g.cell_count(level);
        let mut inflow: Vec<Vec<f64>> = vec![Vec::new(); cells];
        let mut outflow: Vec<Vec<f64>> = vec![Vec::new(); cells];
        for (src, group, rate) in t.iter() {
            check_index(src, g.n)?;
            let cs = g.cell_of[level][src];
            let mut group_cells: Vec<usize> = Vec::with_capacity(group.len());
            for &w in group {
                check_index(w, g.n)?;
                group_cells.push(g.cell_of[level][w]);
            }
            group_cells.sort_unstable();
            group_cells.dedup();
            if group_cells.iter().any(|&c| c != cs) {
                outflow[cs].push(rate);
            }
            for &c in &group_cells {
                if c != cs {
                    inflow[c].push(rate);
                }
            }
        }
        for cell in 0..cells {
            per_cut.push(CutFlow {
                level,
                cell,
                inflow: pairwise_sum(&inflow[cell]),
                outflow: pairwise_sum(&outflow[cell]),
            });
        }
    }
    Ok(finish_balance(per_cut))
}

/// Uniform random derangement pairing: every node is source and
/// destination exactly once, no fixed points, all rates 1.
pub fn gen_permutation(n: usize, seed: u64) -> Result<UnicastTraffic> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("n must be >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            break;
        }
    }
    let mut t = UnicastTraffic::new();
    for (src, &dst) in perm.iter().enumerate() {
        t.add(src, dst, 1.0)?;
    }
    Ok(t)
}

/// Multiple classes of source-destination pairs: each node joins a class
/// uniformly at random, then picks a destination uniformly within
/// distance n^{beta/2} (nearest node when the ball is empty).
pub fn gen_classes(
    placement: &NodePlacement,
    classes: &[(f64, f64)],
    seed: u64,
) -> Result<UnicastTraffic> {
    if classes.is_empty() {
        return Err(Error::Domain("need at least one class".into()));
    }
    for &(beta, rate) in classes {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta {beta} outside [0, 1]")));
        }
        if rate < 0.0 {
            return Err(Error::Domain(format!("negative rate {rate}")));
        }
    }
    let n = placement.n;
    let idx = GridIndex::new(placement);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = UnicastTraffic::new();
    for u in 0..n {
        let (beta, rate) = classes[rng.gen_range(0..classes.len())];
        let radius = (n as f64).powf(beta / 2.0);
        let candidates = idx.within_radius(u, radius);
        let dst = if candidates.is_empty() {
            idx.nearest(u)
        } else {
            candidates[rng.gen_range(0..candidates.len())]
        };
        t.add(u, dst, rate)?;
    }
    Ok(t)
}

/// Each node is source for one uniform destination; the rate grows with
/// separation as rho * max(r, 1)^beta.
pub fn gen_distance_rate(
    placement: &NodePlacement,
    beta: f64,
    rho: f64,
    seed: u64,
) -> Result<UnicastTraffic> {
    let n = placement.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = UnicastTraffic::new();
    for u in 0..n {
        let mut dst = rng.gen_range(0..n - 1);
        if dst >= u {
            dst += 1;
        }
        let r = crate::geometry::dist(placement.points[u], placement.points[dst]);
        let rate = rho * r.max(1.0).powf(beta);
        t.add(u, dst, rate)?;
    }
    Ok(t)
}

/// Sources with multiple destinations: a class-i source gets
/// floor(n^{beta_i}) distinct uniform destinations (capped at n-1), each
/// at the class rate.
pub fn gen_multi_destination(
    placement: &NodePlacement,
    classes: &[(f64, f64)],
    seed: u64,
) -> Result<UnicastTraffic> {
    if classes.is_empty() {
        return Err(Error::Domain("need at least one class".into()));
    }
    for &(beta, _) in classes {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta {beta} outside [0, 1]")));
        }
    }
    let n = placement.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = UnicastTraffic::new();
    let mut chosen = vec![false; n];
    for u in 0..n {
        let (beta, rate) = classes[rng.gen_range(0..classes.len())];
        let count = ((n as f64).powf(beta).floor() as usize).min(n - 1);
        let mut picked = Vec::with_capacity(count);
        while picked.len() < count {
            let mut dst = rng.gen_range(0..n - 1);
            if dst >= u {
                dst += 1;
            }
            if !chosen[dst] {
                chosen[dst] = true;
                picked.push(dst);
            }
        }
        for &dst in &picked {
            chosen[dst] = false;
            t.add(u, dst, rate)?;
        }
    }
    Ok(t)
}

/// Broadcast: every node with positive weight multicasts to all other
/// nodes at rate rho * weight.
pub fn gen_broadcast(n: usize, weights: &[f64], rho: f64) -> Result<MulticastTraffic> {
    if weights.len() != n {
        return Err(Error::InvalidSize(format!(
            "expected {n} weights, got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::Domain("negative broadcast weight".into()));
    }
    let mut t = MulticastTraffic::new();
    for (u, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            let group: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            t.add(u, &group, rho * w)?;
        }
    }
    Ok(t)
}

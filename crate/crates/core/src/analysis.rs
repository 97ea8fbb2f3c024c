//! Scenario sweeps over n, log-log exponent fitting, and result I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_regularity, decompose, place_nodes};
use crate::regions::{max_multiplier_multicast, max_multiplier_unicast, RegionSpec};
use crate::traffic::{gen_broadcast, gen_classes, gen_distance_rate, gen_multi_destination};

/// A named traffic scenario whose maximal multiplier has a predicted
/// n-exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Scenario {
    /// one class of pairs, destination within distance n^{beta/2}
    NeighborhoodPairs { beta: f64 },
    /// uniform pairing with rate growing as distance^beta
    DistanceWeightedPairs { beta: f64 },
    /// each source unicasts to floor(n^beta) uniform destinations
    MultiDestination { beta: f64 },
    /// every node multicasts to everyone, unit weights
    Broadcast,
}

impl Scenario {
    pub fn id(&self) -> String {
        match self {
            Scenario::NeighborhoodPairs { beta } => format!("neighborhood-pairs(beta={beta})"),
            Scenario::DistanceWeightedPairs { beta } => {
                format!("distance-weighted-pairs(beta={beta})")
            }
            Scenario::MultiDestination { beta } => format!("multi-destination(beta={beta})"),
            Scenario::Broadcast => "broadcast".into(),
        }
    }

    /// Predicted exponent of the maximal multiplier in n, where known.
    pub fn predicted_exponent(&self, alpha: f64) -> Option<f64> {
        let abar = alpha.min(3.0);
        match *self {
            Scenario::NeighborhoodPairs { beta } => Some(beta * (1.0 - abar / 2.0)),
            Scenario::DistanceWeightedPairs { beta } => {
                (beta >= 2.0 - abar).then(|| 1.0 - (abar + beta) / 2.0)
            }
            Scenario::MultiDestination { beta } => Some(1.0 - beta - abar / 2.0),
            Scenario::Broadcast => Some(-1.0),
        }
    }
}

/// One (n, seed) run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub n: usize,
    pub seed: u64,
    pub rho_star: f64,
    pub regular_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub scenario: String,
    pub alpha: f64,
    /// (n, median rho_star over seeds)
    pub points: Vec<(usize, f64)>,
    pub fitted_exponent: f64,
    pub stderr: f64,
    pub predicted_exponent: Option<f64>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRow>,
}

/// Ordinary least squares on (log2 n, log2 value). Returns (slope,
/// standard error of the slope).
pub fn fit_exponent(points: &[(usize, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 points for a fit, got {}",
            points.len()
        )));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(_, v)| v <= 0.0) {
        return Err(Error::Domain(format!("nonpositive value {v} at n={n}")));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.log2()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all points share one n".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let stderr = (sse / (m - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Sweep a scenario over `n_list` and `seeds`: place, decompose,
/// generate traffic, and record the maximal multiplier, then fit the
/// exponent of the per-n medians. Regularity failures are recorded per
/// run, never discarded.
pub fn run_scaling(
    scenario: Scenario,
    n_list: &[usize],
    alpha: f64,
    seeds: &[u64],
    spec: &RegionSpec,
) -> Result<ScalingResult> {
    if !n_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Domain("n_list must be strictly increasing".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Domain("need at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(n_list.len() * seeds.len());
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut rhos = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let placement = place_nodes(n, seed)?;
            let g = decompose(&placement)?;
            let regular_flag = check_regularity(&placement, &g).overall;
            let rho_star = match scenario {
                Scenario::NeighborhoodPairs { beta } => {
                    let t = gen_classes(&placement, &[(beta, 1.0)], seed)?;
                    max_multiplier_unicast(&t, &g, spec)?
                }
                Scenario::DistanceWeightedPairs { beta } => {
                    let t = gen_distance_rate(&placement, beta, 1.0, seed)?;
                    max_multiplier_unicast(&t, &g, spec)?
                }
                Scenario::MultiDestination { beta } => {
                    let t = gen_multi_destination(&placement, &[(beta, 1.0)], seed)?;
                    max_multiplier_unicast(&t, &g, spec)?
                }
                Scenario::Broadcast => {
                    let t = gen_broadcast(n, &vec![1.0; n], 1.0)?;
                    max_multiplier_multicast(&t, &g, spec)?
                }
            };
            rhos.push(rho_star);
            runs.push(RunRow {
                n,
                seed,
                rho_star,
                regular_flag,
            });
        }
        points.push((n, median(rhos)));
    }
    let (fitted_exponent, stderr) = fit_exponent(&points)?;
    Ok(ScalingResult {
        scenario: scenario.id(),
        alpha,
        points,
        fitted_exponent,
        stderr,
        predicted_exponent: scenario.predicted_exponent(alpha),
        seeds: seeds.to_vec(),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

/// Write a result to disk: JSON embeds the full record, CSV emits one
/// plot-ready row per run.
pub fn emit(result: &ScalingResult, format: EmitFormat, path: &Path) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    match format {
        EmitFormat::Json => {
            serde_json::to_writer_pretty(&mut w, result).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
            writeln!(w).map_err(io_err)?;
        }
        EmitFormat::Csv => {
            writeln!(w, "n,seed,rho_star,regular_flag").map_err(io_err)?;
            for r in &result.runs {
                writeln!(w, "{},{},{},{}", r.n, r.seed, r.rho_star, r.regular_flag)
                    .map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Read back a JSON result written by [`emit`].
pub fn load_result(path: &Path) -> Result<ScalingResult> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

//! Command-line front end: placements, regularity checks, tree
//! construction, region membership, tree routing, message simulation,
//! cut bounds, and scaling sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use treecap::analysis::{emit, run_scaling, EmitFormat, Scenario};
use treecap::bounds::all_node_cut_bounds;
use treecap::geometry::{check_regularity, decompose, place_nodes, NodePlacement};
use treecap::regions::{
    membership_multicast, membership_unicast, Direction, RegionSpec, TrafficKind,
};
use treecap::routing::{feasible_on_tree_multicast, feasible_on_tree_unicast};
use treecap::scheme::{rate_ledger, simulate_multicast, simulate_unicast};
use treecap::traffic::{MulticastTraffic, UnicastTraffic};
use treecap::treegraph::build_tree;

#[derive(Parser)]
#[command(name = "treecap", version, about = "tree abstraction of wireless network capacity")]
struct Cli {
    /// RNG seed for anything randomized
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// path-loss exponent (> 2)
    #[arg(long, global = true, default_value_t = 3.0)]
    alpha: f64,
    /// emit machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    OutOnly,
    Both,
    Dense,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::OutOnly => Direction::OutOnly,
            DirectionArg::Both => Direction::Both,
            DirectionArg::Dense => Direction::Dense,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    NeighborhoodPairs,
    DistanceWeightedPairs,
    MultiDestination,
    Broadcast,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a uniform placement and write it to a file
    Place {
        n: usize,
        out: PathBuf,
    },
    /// Run the regularity checks on a placement
    Check {
        placement: PathBuf,
    },
    /// Build the capacitated tree and dump it
    BuildTree {
        placement: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a traffic matrix against the cut region
    Membership {
        placement: PathBuf,
        traffic: PathBuf,
        #[arg(long)]
        multicast: bool,
        #[arg(long, value_enum, default_value = "out-only")]
        direction: DirectionArg,
    },
    /// Route a traffic matrix over the tree and test edge capacities
    Route {
        placement: PathBuf,
        traffic: PathBuf,
        #[arg(long)]
        multicast: bool,
    },
    /// Simulate one end-to-end message through the cooperation layer
    Simulate {
        placement: PathBuf,
        src: usize,
        /// destination node; repeat for a multicast group
        #[arg(required = true)]
        dst: Vec<usize>,
        /// also print the per-level rate ledger
        #[arg(long)]
        ledger: bool,
    },
    /// Per-node information-flow cut bounds
    Bounds {
        placement: PathBuf,
    },
    /// Sweep a scenario over n and fit the exponent
    Scaling {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// network sizes, strictly increasing
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// number of seeds per n (seeds seed..seed+count)
        #[arg(long, default_value_t = 5)]
        seed_count: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Ok(true) = success, Ok(false) = infeasible / check failed, Err = bad
/// input.
fn run(cli: &Cli) -> treecap::Result<bool> {
    match &cli.command {
        Command::Place { n, out } => {
            let p = place_nodes(*n, cli.seed)?;
            p.save(out)?;
            if cli.json {
                println!("{{\"n\": {}, \"seed\": {}, \"side\": {}}}", p.n, p.seed, p.side());
            } else {
                println!("placed {} nodes on a {}-side square -> {}", p.n, p.side(), out.display());
            }
            Ok(true)
        }
        Command::Check { placement } => {
            let p = NodePlacement::load(placement)?;
            let g = decompose(&p)?;
            let report = check_regularity(&p, &g);
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                println!(
                    "min_dist {} | unit_cell_max {} | log_cell_min {} | proportional {:?} | overall {}",
                    report.min_dist_ok,
                    report.unit_cell_max_ok,
                    report.log_cell_min_ok,
                    report.proportional_ok,
                    report.overall
                );
                for v in &report.violations {
                    println!("violation: {:?} at level {} cell {}", v.condition, v.level, v.cell);
                }
            }
            Ok(report.overall)
        }
        Command::BuildTree { placement, out } => {
            let p = NodePlacement::load(placement)?;
            let g = decompose(&p)?;
            let tree = build_tree(&p, &g, cli.alpha)?;
            if let Some(path) = out {
                tree.dump(path)?;
            }
            if cli.json {
                println!(
                    "{{\"levels\": {}, \"edges\": {}, \"reps_exact\": {}}}",
                    tree.levels,
                    tree.edge_count(),
                    tree.reps_exact
                );
            } else {
                println!(
                    "tree: {} levels, {} edges, {} reps per deepest cell (exact: {})",
                    tree.levels,
                    tree.edge_count(),
                    tree.rep_count_leaf_level,
                    tree.reps_exact
                );
            }
            Ok(true)
        }
        Command::Membership {
            placement,
            traffic,
            multicast,
            direction,
        } => {
            let p = NodePlacement::load(placement)?;
            let g = decompose(&p)?;
            let report = if *multicast {
                let t = MulticastTraffic::load(traffic)?;
                let spec =
                    RegionSpec::new(TrafficKind::Multicast, (*direction).into(), cli.alpha)?;
                membership_multicast(&t, &g, &spec)?
            } else {
                let t = UnicastTraffic::load(traffic)?;
                let spec = RegionSpec::new(TrafficKind::Unicast, (*direction).into(), cli.alpha)?;
                membership_unicast(&t, &g, &spec)?
            };
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                println!(
                    "feasible: {} | max multiplier: {} | binding: {:?}",
                    report.feasible, report.max_multiplier, report.binding
                );
            }
            Ok(report.feasible)
        }
        Command::Route {
            placement,
            traffic,
            multicast,
        } => {
            let p = NodePlacement::load(placement)?;
            let g = decompose(&p)?;
            let tree = build_tree(&p, &g, cli.alpha)?;
            let f = if *multicast {
                let t = MulticastTraffic::load(traffic)?;
                feasible_on_tree_multicast(&t, &tree)?
            } else {
                let t = UnicastTraffic::load(traffic)?;
                feasible_on_tree_unicast(&t, &tree)?
            };
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&f).unwrap());
            } else {
                println!(
                    "feasible: {} | max multiplier: {} | binding edge: {:?}",
                    f.feasible, f.max_multiplier, f.binding
                );
            }
            Ok(f.feasible)
        }
        Command::Simulate {
            placement,
            src,
            dst,
            ledger,
        } => {
            let p = NodePlacement::load(placement)?;
            let g = decompose(&p)?;
            let tree = build_tree(&p, &g, cli.alpha)?;
            let steps = if dst.len() == 1 {
                let trace = simulate_unicast(&tree, *src, dst[0])?;
                trace.steps
            } else {
                let (steps, _) = simulate_multicast(&tree, *src, dst)?;
                steps
            };
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&steps).unwrap());
            } else {
                for s in &steps {
                    println!(
                        "{} edge ({} -> {}) level {}: {} holders",
                        if s.upward { "up  " } else { "down" },
                        s.edge.child,
                        s.edge.parent,
                        s.edge.level,
                        s.holders
                    );
                }
                println!("delivered in {} steps", steps.len());
            }
            if *ledger {
                let entries = rate_ledger(&tree, cli.alpha);
                if cli.json {
                    println!("{}", serde_json::to_string_pretty(&entries).unwrap());
                } else {
                    for e in &entries {
                        println!(
                            "level {} ({}): rate {} vs capacity {} (ratio {})",
                            e.level,
                            if e.leaf_edge { "leaf" } else { "internal" },
                            e.rate,
                            e.capacity,
                            e.gap_ratio
                        );
                    }
                }
            }
            Ok(true)
        }
        Command::Bounds { placement } => {
            let p = NodePlacement::load(placement)?;
            let reports = all_node_cut_bounds(&p, cli.alpha);
            let all_ok = reports.iter().all(|r| r.satisfied == Some(true));
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&reports).unwrap());
            } else {
                for r in &reports {
                    println!(
                        "node {}: {} <= {} ({})",
                        r.node,
                        r.value,
                        r.bound,
                        if r.satisfied == Some(true) { "ok" } else { "VIOLATED" }
                    );
                }
            }
            Ok(all_ok)
        }
        Command::Scaling {
            scenario,
            beta,
            n,
            seed_count,
            out,
            format,
        } => {
            let scenario = match scenario {
                ScenarioArg::NeighborhoodPairs => Scenario::NeighborhoodPairs { beta: *beta },
                ScenarioArg::DistanceWeightedPairs => {
                    Scenario::DistanceWeightedPairs { beta: *beta }
                }
                ScenarioArg::MultiDestination => Scenario::MultiDestination { beta: *beta },
                ScenarioArg::Broadcast => Scenario::Broadcast,
            };
            let kind = match scenario {
                Scenario::Broadcast => TrafficKind::Multicast,
                _ => TrafficKind::Unicast,
            };
            let spec = RegionSpec::new(kind, Direction::OutOnly, cli.alpha)?;
            let seeds: Vec<u64> = (cli.seed..cli.seed + seed_count).collect();
            let result = run_scaling(scenario, n, cli.alpha, &seeds, &spec)?;
            if let Some(path) = out {
                let fmt = match format {
                    FormatArg::Json => EmitFormat::Json,
                    FormatArg::Csv => EmitFormat::Csv,
                };
                emit(&result, fmt, path)?;
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&result).unwrap());
            } else {
                println!(
                    "{}: fitted exponent {:.4} (stderr {:.4}), predicted {:?}",
                    result.scenario, result.fitted_exponent, result.stderr,
                    result.predicted_exponent
                );
                for (n, rho) in &result.points {
                    println!("  n={n}: median rho* = {rho}");
                }
            }
            Ok(true)
        }
    }
}

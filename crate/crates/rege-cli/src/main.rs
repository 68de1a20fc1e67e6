//! `rege` — spectral graph views, node uncertainty radii, and
//! noise-curriculum GCN training from the command line.
//!
//! Subcommands: `views`, `radii`, `train`, `experiment`, `sweep`. All
//! outputs are plain text (edge lists, CSV, JSON) written atomically; every
//! command is bit-reproducible for a fixed `--seed`.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rege::graph::{karate, load_edge_pairs_indexed, load_graph, Graph};
use rege::io;
use rege::perturb::{component_sweep, run_experiment, Attack, PerturbationBudget};
use rege::pipeline::{self, Method};
use rege::radii::{consensus_with_graph, RadiusKind};
use rege::trainer::evaluate;

#[derive(Parser)]
#[command(
    name = "rege",
    about = "Uncertainty radii for graphs: spectral views, conformal intervals, noise-curriculum training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Edge-list path, or `karate` for the built-in dataset
    #[arg(long)]
    dataset: String,
    /// Node features CSV (header row; first column node id)
    #[arg(long)]
    features: Option<PathBuf>,
    /// Node labels CSV (header row; first column node id)
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Split assignment CSV (`node_id,split` with train/val/test)
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Replace the adjacency with a pre-attacked edge list (dense indices)
    #[arg(long)]
    perturbed_edges: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// key=value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for every random draw
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Smallest component count in the view schedule
    #[arg(long)]
    q_min: Option<usize>,
    /// Component increment between consecutive views
    #[arg(long)]
    step: Option<usize>,
    /// Conformal miscoverage level
    #[arg(long)]
    alpha: Option<f64>,
    /// Training epochs per view
    #[arg(long)]
    epochs_per_view: Option<usize>,
    /// Views without validation improvement before stopping
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export reconstructed graph views and the retained-energy table
    Views {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute per-node uncertainty radii and write them as CSV
    Radii {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// ddr, mdr, stddev or entropy
        #[arg(long)]
        kind: String,
        /// Also export the consensus matrix as dense CSV
        #[arg(long, default_value_t = false)]
        with_consensus: bool,
    },
    /// Train a model end to end and report test accuracy
    Train {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// baseline, rege-d, rege-m, nct-d or nct-m
        #[arg(long)]
        method: String,
        /// Force all radii to zero (diagnostic)
        #[arg(long, default_value_t = false)]
        radii_zero: bool,
    },
    /// Run a methods x attacks x budgets x seeds grid
    Experiment {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated method list
        #[arg(long, value_delimiter = ',', default_value = "baseline,rege-d")]
        methods: Vec<String>,
        /// Comma-separated attack list (random, heuristic)
        #[arg(long, value_delimiter = ',', default_value = "heuristic")]
        attacks: Vec<String>,
        /// Comma-separated perturbation rates
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1")]
        budgets: Vec<f64>,
        /// Comma-separated run seeds
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        /// Maximum concurrent grid cells
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Accuracy as a function of the starting component count
    Sweep {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated starting component counts
        #[arg(long, value_delimiter = ',')]
        q_values: Vec<usize>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn resolve_config(common: &CommonArgs) -> Result<rege::TrainConfig> {
    let file = match &common.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let flags = config::Overrides {
        seed: common.seed,
        q_min: common.q_min,
        step: common.step,
        alpha: common.alpha,
        epochs_per_view: common.epochs_per_view,
        patience_views: common.patience,
    };
    Ok(config::resolve(&file, &flags)?)
}

fn load_dataset(args: &DatasetArgs, split_seed: u64) -> Result<Graph> {
    let mut graph = if args.dataset == "karate" {
        let g = karate();
        g.with_random_split(0.1, 0.1, split_seed)
            .context("splitting the karate club graph")?
    } else {
        load_graph(
            Path::new(&args.dataset),
            args.features.as_deref(),
            args.labels.as_deref(),
            args.splits.as_deref(),
            split_seed,
        )?
    };
    if let Some(path) = &args.perturbed_edges {
        let edges = load_edge_pairs_indexed(path)?;
        graph = graph.with_replaced_edges(&edges)?;
    }
    Ok(graph)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Views { dataset, common } => {
            let cfg = resolve_config(&common)?;
            let graph = load_dataset(&dataset, cfg.seed)?;
            let artifacts = pipeline::spectral_artifacts(&graph, &cfg)?;
            let paths = io::write_views(&common.out, &artifacts.views)?;
            let energy =
                io::energy_table_text(&artifacts.decomposition, artifacts.views.component_counts())?;
            io::atomic_write(&common.out.join("energy.csv"), &energy)?;
            io::atomic_write(&common.out.join("graph.txt"), &io::edge_list_text(&graph))?;
            println!(
                "wrote {} views and energy.csv to {}",
                paths.len(),
                common.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Radii {
            dataset,
            common,
            kind,
            with_consensus,
        } => {
            let cfg = resolve_config(&common)?;
            let graph = load_dataset(&dataset, cfg.seed)?;
            let kind: RadiusKind = kind.parse()?;
            let radii = if kind == RadiusKind::Mdr {
                let (radii, calibration) = rege::mdr::mdr_pipeline_full(&graph, &cfg)?;
                io::atomic_write(&common.out.join("qhat.csv"), &io::qhat_csv_text(&calibration))?;
                radii
            } else {
                pipeline::radii_of_kind(&graph, kind, &cfg)?
            };
            let name = format!("radii_{}.csv", kind.as_str());
            io::atomic_write(&common.out.join(&name), &io::radii_csv_text(&radii))?;
            if with_consensus {
                let artifacts = pipeline::spectral_artifacts(&graph, &cfg)?;
                let w = consensus_with_graph(&artifacts.views, &graph)?;
                io::atomic_write(&common.out.join("consensus.csv"), &io::consensus_csv_text(&w))?;
            }
            let mut sorted = radii.values().to_vec();
            sorted.sort_by(f64::total_cmp);
            println!(
                "{} radii written to {}: min {:.4} median {:.4} max {:.4}",
                radii.len(),
                common.out.join(&name).display(),
                sorted.first().copied().unwrap_or(0.0),
                sorted[sorted.len() / 2],
                sorted.last().copied().unwrap_or(0.0),
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Train {
            dataset,
            common,
            method,
            radii_zero,
        } => {
            let cfg = resolve_config(&common)?;
            let graph = load_dataset(&dataset, cfg.seed)?;
            let method: Method = method.parse()?;
            let (params, mut report) = if radii_zero {
                let zeros = rege::RadiusVector::zeros(graph.n(), RadiusKind::Ddr);
                match method {
                    Method::Baseline => pipeline::train_method(&graph, method, &cfg)?,
                    Method::RegeD | Method::RegeM => {
                        let artifacts = pipeline::spectral_artifacts(&graph, &cfg)?;
                        pipeline::train_prepared(
                            &graph,
                            method,
                            Some(&artifacts),
                            Some(&zeros),
                            Some(&zeros),
                            &cfg,
                        )?
                    }
                    Method::NctD | Method::NctM => pipeline::train_prepared(
                        &graph,
                        method,
                        None,
                        Some(&zeros),
                        Some(&zeros),
                        &cfg,
                    )?,
                }
            } else {
                pipeline::train_method(&graph, method, &cfg)?
            };
            let masks = graph
                .masks()
                .ok_or_else(|| anyhow::anyhow!("dataset has no splits"))?;
            let accuracy = evaluate(&params, &graph, &masks.test)?;
            report.final_test_accuracy = Some(accuracy);
            io::atomic_write(&common.out.join("report.json"), &io::report_json_text(&report)?)?;
            io::atomic_write(&common.out.join("best.ckpt"), &io::checkpoint_text(&params)?)?;
            println!(
                "method {} test accuracy {accuracy:.6} ({} views trained, {:.1}s)",
                method.as_str(),
                report.records.len(),
                report.wall_clock_secs
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Experiment {
            dataset,
            common,
            methods,
            attacks,
            budgets,
            seeds,
            jobs,
        } => {
            let cfg = resolve_config(&common)?;
            let graph = load_dataset(&dataset, cfg.seed)?;
            let methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<rege::Result<Vec<_>>>()?;
            let attacks = attacks
                .iter()
                .map(|a| a.parse::<Attack>())
                .collect::<rege::Result<Vec<_>>>()?;
            let budgets = budgets
                .iter()
                .map(|&b| PerturbationBudget::new(b))
                .collect::<rege::Result<Vec<_>>>()?;
            let outcome = run_experiment(&graph, &methods, &attacks, &budgets, &seeds, &cfg, jobs)?;
            io::atomic_write(
                &common.out.join("experiment.csv"),
                &io::experiment_csv_text(&outcome.report),
            )?;
            io::atomic_write(
                &common.out.join("summary.csv"),
                &io::summary_csv_text(&outcome.report),
            )?;
            print_summary_table(&outcome.report);
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!(
                        "cell failed: attack={} budget={} seed={}: {}",
                        f.attack, f.budget, f.seed, f.message
                    );
                }
                bail!("{} experiment cells failed", outcome.failures.len());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sweep {
            dataset,
            common,
            q_values,
        } => {
            let cfg = resolve_config(&common)?;
            let graph = load_dataset(&dataset, cfg.seed)?;
            if q_values.is_empty() {
                bail!("--q-values must name at least one component count");
            }
            let rows = component_sweep(&graph, &q_values, &cfg)?;
            io::atomic_write(&common.out.join("sweep.csv"), &io::sweep_csv_text(&rows))?;
            for r in &rows {
                println!(
                    "q={:4} views={}/{} accuracy={:.6}",
                    r.q, r.views_trained, r.views_total, r.accuracy
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary_table(report: &rege::perturb::ExperimentReport) {
    println!(
        "{:<10} {:<10} {:>7} {:>8} {:>8} {:>5}",
        "method", "attack", "budget", "mean", "std", "runs"
    );
    for s in &report.summary {
        println!(
            "{:<10} {:<10} {:>7.3} {:>8.4} {:>8.4} {:>5}",
            s.method, s.attack, s.budget, s.mean, s.std, s.runs
        );
    }
}

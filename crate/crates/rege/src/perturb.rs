//! Structural perturbation harness and the experiment grid runner.
//!
//! Two perturbations stand in for externally computed attacks: uniform
//! random edge flips, and a label-aware heuristic that deletes within-class
//! edges and inserts between-class edges. Pre-attacked graphs can also be
//! supplied as ordinary edge lists. The experiment runner perturbs the
//! graph, recomputes radii on the perturbed graph (the defender never sees
//! the clean one), trains each method and aggregates accuracy over seeds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RegeError, Result};
use crate::graph::Graph;
use crate::pipeline::{self, Method};
use crate::seeds::{self, stream};
use crate::trainer::{evaluate, TrainConfig};

/// Fraction of existing edges the attacker may modify.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    pub rate: f64,
}

impl PerturbationBudget {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(RegeError::parameter(
                "rate",
                format!("budget must lie in [0, 1], got {rate}"),
            ));
        }
        Ok(PerturbationBudget { rate })
    }
}

/// A perturbed graph plus a flag set when the requested budget had to be
/// clipped for lack of candidate pairs.
#[derive(Debug, Clone)]
pub struct PerturbOutcome {
    pub graph: Graph,
    pub clipped: bool,
}

/// Flips `floor(rate * |E|)` node pairs chosen uniformly without
/// replacement: half removals of existing edges, the rest additions of
/// non-edges. Deterministic per seed.
pub fn random_flip(graph: &Graph, budget: PerturbationBudget, seed: u64) -> Result<PerturbOutcome> {
    let n = graph.n();
    let edges = graph.edge_list();
    let total = ((budget.rate * edges.len() as f64).floor()) as usize;
    let want_remove = total / 2;
    let want_add = total - want_remove;

    let mut rng = seeds::rng(seed, stream::FLIP);
    let mut adjacency = graph.adjacency().clone();
    let mut clipped = false;

    let mut removable = edges;
    let n_remove = want_remove.min(removable.len());
    for _ in 0..n_remove {
        let idx = rng.gen_range(0..removable.len());
        let (u, v) = removable.swap_remove(idx);
        adjacency[(u, v)] = 0.0;
        adjacency[(v, u)] = 0.0;
    }

    let mut addable: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.adjacency()[(i, j)] == 0.0 {
                addable.push((i, j));
            }
        }
    }
    if want_add > addable.len() {
        clipped = true;
    }
    let n_add = want_add.min(addable.len());
    for _ in 0..n_add {
        let idx = rng.gen_range(0..addable.len());
        let (u, v) = addable.swap_remove(idx);
        adjacency[(u, v)] = 1.0;
        adjacency[(v, u)] = 1.0;
    }
    if n_remove < want_remove {
        clipped = true;
    }

    Ok(PerturbOutcome {
        graph: graph.clone().replace_adjacency(adjacency)?,
        clipped,
    })
}

/// Label-aware heuristic: for each of `floor(rate * |E|)` modifications,
/// with probability one half delete a uniformly chosen within-class edge,
/// otherwise add a uniformly chosen between-class non-edge. Falls back to
/// the other category when one runs dry.
pub fn heuristic_attack(
    graph: &Graph,
    budget: PerturbationBudget,
    seed: u64,
) -> Result<PerturbOutcome> {
    let labels = graph
        .labels()
        .ok_or_else(|| RegeError::Precondition("heuristic attack requires labels".to_string()))?
        .to_vec();
    let n = graph.n();
    let total = ((budget.rate * graph.num_edges() as f64).floor()) as usize;

    let mut within: Vec<(usize, usize)> = Vec::new();
    let mut between_non: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let edge = graph.adjacency()[(i, j)] > 0.0;
            if edge && labels[i] == labels[j] {
                within.push((i, j));
            } else if !edge && labels[i] != labels[j] {
                between_non.push((i, j));
            }
        }
    }

    let mut rng = seeds::rng(seed, stream::DICE);
    let mut adjacency = graph.adjacency().clone();
    let mut clipped = false;
    for _ in 0..total {
        let prefer_delete = rng.gen::<f64>() < 0.5;
        let deleted = if prefer_delete && !within.is_empty() {
            let idx = rng.gen_range(0..within.len());
            let (u, v) = within.swap_remove(idx);
            adjacency[(u, v)] = 0.0;
            adjacency[(v, u)] = 0.0;
            true
        } else {
            false
        };
        if !deleted {
            if !between_non.is_empty() {
                let idx = rng.gen_range(0..between_non.len());
                let (u, v) = between_non.swap_remove(idx);
                adjacency[(u, v)] = 1.0;
                adjacency[(v, u)] = 1.0;
            } else if !within.is_empty() {
                let idx = rng.gen_range(0..within.len());
                let (u, v) = within.swap_remove(idx);
                adjacency[(u, v)] = 0.0;
                adjacency[(v, u)] = 0.0;
            } else {
                clipped = true;
                break;
            }
        }
    }

    Ok(PerturbOutcome {
        graph: graph.clone().replace_adjacency(adjacency)?,
        clipped,
    })
}

/// Attack selector for experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attack {
    RandomFlip,
    Heuristic,
}

impl Attack {
    pub fn as_str(&self) -> &'static str {
        match self {
            Attack::RandomFlip => "random",
            Attack::Heuristic => "heuristic",
        }
    }

    pub fn apply(&self, graph: &Graph, budget: PerturbationBudget, seed: u64) -> Result<PerturbOutcome> {
        match self {
            Attack::RandomFlip => random_flip(graph, budget, seed),
            Attack::Heuristic => heuristic_attack(graph, budget, seed),
        }
    }
}

impl std::str::FromStr for Attack {
    type Err = RegeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" | "random-flip" => Ok(Attack::RandomFlip),
            "heuristic" | "dice" => Ok(Attack::Heuristic),
            other => Err(RegeError::parameter(
                "attack",
                format!("unknown attack `{other}` (expected random or heuristic)"),
            )),
        }
    }
}

/// One raw experiment measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRow {
    pub method: String,
    pub attack: String,
    pub budget: f64,
    pub seed: u64,
    pub accuracy: f64,
}

/// Aggregate over seeds for one (method, attack, budget) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub attack: String,
    pub budget: f64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Raw rows plus aggregates; aggregates always recompute from the raw rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<RawRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn from_rows(rows: Vec<RawRow>) -> Self {
        let mut summary: Vec<SummaryRow> = Vec::new();
        for row in &rows {
            if !summary
                .iter()
                .any(|s| s.method == row.method && s.attack == row.attack && s.budget == row.budget)
            {
                let group: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        r.method == row.method && r.attack == row.attack && r.budget == row.budget
                    })
                    .map(|r| r.accuracy)
                    .collect();
                let mean = group.iter().sum::<f64>() / group.len() as f64;
                let var = group.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                    / group.len() as f64;
                summary.push(SummaryRow {
                    method: row.method.clone(),
                    attack: row.attack.clone(),
                    budget: row.budget,
                    mean,
                    std: var.sqrt(),
                    runs: group.len(),
                });
            }
        }
        ExperimentReport { rows, summary }
    }

    pub fn mean_for(&self, method: Method, attack: Attack, budget: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method.as_str() && s.attack == attack.as_str() && s.budget == budget)
            .map(|s| s.mean)
    }
}

/// Runs the full grid. For each (attack, budget, seed) the graph is
/// perturbed once and radii are computed once on the perturbed graph, then
/// every requested method trains against it. Groups run in parallel on up
/// to `jobs` threads; row order is independent of scheduling.
pub fn run_experiment(
    graph: &Graph,
    methods: &[Method],
    attacks: &[Attack],
    budgets: &[PerturbationBudget],
    run_seeds: &[u64],
    config: &TrainConfig,
    jobs: usize,
) -> Result<ExperimentOutcome> {
    if methods.is_empty() || attacks.is_empty() || budgets.is_empty() || run_seeds.is_empty() {
        return Err(RegeError::parameter(
            "experiment",
            "methods, attacks, budgets and seeds must be non-empty",
        ));
    }
    if graph.labels().is_none() {
        return Err(RegeError::Precondition(
            "experiments require a labeled graph".to_string(),
        ));
    }

    let mut groups: Vec<(Attack, PerturbationBudget, u64)> = Vec::new();
    for &attack in attacks {
        for &budget in budgets {
            for &seed in run_seeds {
                groups.push((attack, budget, seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RegeError::Numerical(format!("thread pool: {e}")))?;

    let results: Vec<Result<Vec<RawRow>>> = pool.install(|| {
        use rayon::prelude::*;
        groups
            .par_iter()
            .map(|&(attack, budget, seed)| run_group(graph, methods, attack, budget, seed, config))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (group, r) in groups.iter().zip(results) {
        match r {
            Ok(group_rows) => rows.extend(group_rows),
            Err(e) => failures.push(CellFailure {
                attack: group.0.as_str().to_string(),
                budget: group.1.rate,
                seed: group.2,
                message: e.to_string(),
            }),
        }
    }
    Ok(ExperimentOutcome {
        report: ExperimentReport::from_rows(rows),
        failures,
    })
}

/// A cell that could not run, annotated with its grid coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub attack: String,
    pub budget: f64,
    pub seed: u64,
    pub message: String,
}

/// Successful rows plus any per-cell failures.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub failures: Vec<CellFailure>,
}

fn run_group(
    graph: &Graph,
    methods: &[Method],
    attack: Attack,
    budget: PerturbationBudget,
    seed: u64,
    config: &TrainConfig,
) -> Result<Vec<RawRow>> {
    // Per-seed split when the input graph carries no masks.
    let base = if graph.masks().is_some() {
        graph.clone()
    } else {
        graph
            .clone()
            .with_random_split(0.1, 0.1, seeds::derive(seed, stream::SPLIT))?
    };
    let attacked = attack
        .apply(&base, budget, seeds::derive(seed, stream::ATTACK))?
        .graph;

    let mut cfg = config.clone();
    cfg.seed = seed;

    // Radii are computed once per perturbed graph and shared across methods.
    let needs_ddr = methods.iter().any(|m| matches!(m, Method::RegeD | Method::NctD));
    let needs_mdr = methods.iter().any(|m| matches!(m, Method::RegeM | Method::NctM));
    let needs_views = methods.iter().any(|m| matches!(m, Method::RegeD | Method::RegeM));
    let spectral = if needs_ddr || needs_views {
        Some(pipeline::spectral_artifacts(&attacked, &cfg)?)
    } else {
        None
    };
    let ddr = if needs_ddr {
        Some(pipeline::ddr_from_artifacts(
            spectral.as_ref().expect("spectral artifacts"),
            &attacked,
        )?)
    } else {
        None
    };
    let mdr = if needs_mdr {
        let mut mdr_cfg = cfg.clone();
        mdr_cfg.seed = seeds::derive(seed, stream::MDR);
        Some(crate::mdr::mdr_pipeline(&attacked, &mdr_cfg)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let params = pipeline::train_prepared(
            &attacked,
            method,
            spectral.as_ref(),
            ddr.as_ref(),
            mdr.as_ref(),
            &cfg,
        )?
        .0;
        let masks = attacked.masks().expect("split assigned above");
        let accuracy = evaluate(&params, &attacked, &masks.test)?;
        rows.push(RawRow {
            method: method.as_str().to_string(),
            attack: attack.as_str().to_string(),
            budget: budget.rate,
            seed,
            accuracy,
        });
    }
    Ok(rows)
}

/// Accuracy as a function of the starting component count: trains the
/// data-dependent curriculum once per requested `q` and reports test
/// accuracy alongside the view counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: usize,
    pub views_total: usize,
    pub views_trained: usize,
    pub accuracy: f64,
}

pub fn component_sweep(
    graph: &Graph,
    q_values: &[usize],
    config: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    let base = if graph.masks().is_some() {
        graph.clone()
    } else {
        graph
            .clone()
            .with_random_split(0.1, 0.1, seeds::derive(config.seed, stream::SPLIT))?
    };
    let mut rows = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let mut cfg = config.clone();
        cfg.q_min = q;
        let artifacts = pipeline::spectral_artifacts(&base, &cfg)?;
        let views_total = artifacts.views.len();
        let views_trained = artifacts
            .views
            .count_informative(crate::trainer::informative_view_threshold(&base));
        let ddr = pipeline::ddr_from_artifacts(&artifacts, &base)?;
        let (params, _) =
            pipeline::train_prepared(&base, Method::RegeD, Some(&artifacts), Some(&ddr), None, &cfg)?;
        let masks = base.masks().expect("split assigned above");
        let accuracy = evaluate(&params, &base, &masks.test)?;
        rows.push(SweepRow {
            q,
            views_total,
            views_trained,
            accuracy,
        });
    }
    Ok(rows)
}

/// Hamming distance between adjacency matrices divided by two: the number
/// of undirected pair flips separating the graphs.
pub fn pair_flips(a: &Graph, b: &Graph) -> usize {
    let (ma, mb) = (a.adjacency(), b.adjacency());
    let mut diff = 0usize;
    for i in 0..ma.nrows() {
        for j in 0..ma.ncols() {
            if ma[(i, j)] != mb[(i, j)] {
                diff += 1;
            }
        }
    }
    diff / 2
}

/// Validates the Graph invariants on a perturbed adjacency; used by tests.
pub fn check_graph_invariants(graph: &Graph) -> bool {
    let m = graph.adjacency();
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)] != 0.0 {
            return false;
        }
        for j in 0..n {
            if m[(i, j)] != m[(j, i)] || (m[(i, j)] != 0.0 && m[(i, j)] != 1.0) {
                return false;
            }
        }
    }
    true
}

//! Acceptance suite. Each test is one numbered criterion with its tolerance
//! pinned in code; `cargo test --test acceptance` prints one pass/fail line
//! per criterion (run with `--nocapture` for the measured values).

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use rege::graph::{generate_sbm, karate};
use rege::mdr::{compute_qhat, conformal_score};
use rege::nn::{
    cross_entropy_grad, cross_entropy_loss, gcn_backward, gcn_forward, mlp_backward,
    mlp_forward, mse_grad, quantile_loss_grad, GcnParams, MlpParams, Mode,
};
use rege::perturb::{run_experiment, Attack, PerturbationBudget};
use rege::pipeline::Method;
use rege::radii::{binary_deviation_of_row, RadiusKind, RadiusVector};
use rege::seeds;
use rege::spectral::{eigendecompose, reconstruct_view, retained_energy};
use rege::trainer::{curriculum_train, train_baseline, TrainConfig};

/// Node radii read off the published karate-club table (data-dependent
/// column), node 0 through node 33.
const KARATE_DDR_REFERENCE: [f64; 34] = [
    1.0, 0.41, 0.5, 0.45, 0.16, 0.22, 0.19, 0.24, 0.29, 0.0, 0.16, 0.01, 0.02, 0.31, 0.07, 0.08,
    0.12, 0.0, 0.0, 0.06, 0.04, 0.03, 0.06, 0.25, 0.13, 0.02, 0.08, 0.21, 0.1, 0.23, 0.26, 0.2,
    0.73, 0.98,
];

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma).powi(2);
        vb += (rb[i] - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn rege_binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rege"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn rege");
    assert!(
        out.status.success(),
        "command failed: {}\nstderr: {}",
        format!("{cmd:?}"),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn criterion_01_karate_ddr_golden() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        rege_binary()
            .args(["radii", "--dataset", "karate", "--kind", "ddr"])
            .args(["--q-min", "5", "--step", "5", "--seed", "42"])
            .arg("--out")
            .arg(dir.path()),
    );
    let csv = std::fs::read_to_string(dir.path().join("radii_ddr.csv")).unwrap();
    let mut computed = vec![0.0f64; 34];
    for line in csv.lines().skip(1) {
        let mut fields = line.split(',');
        let node: usize = fields.next().unwrap().parse().unwrap();
        let value: f64 = fields.next().unwrap().parse().unwrap();
        computed[node] = value;
    }
    let rho = spearman(&computed, &KARATE_DDR_REFERENCE);
    let argmax = (0..34)
        .max_by(|&a, &b| computed[a].total_cmp(&computed[b]))
        .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(rho >= 0.90, "spearman {rho} below 0.90");
    assert!(argmax == 0 || argmax == 33, "argmax node {argmax}");
    assert!(elapsed < 5.0, "took {elapsed:.2}s, budget 5s");
    println!("criterion 01 karate-ddr-golden: PASS (rho {rho:.4}, argmax {argmax}, {elapsed:.2}s)");
}

#[test]
fn criterion_02_binary_deviation_endpoints() {
    for n in [1usize, 3, 10, 50] {
        assert_eq!(binary_deviation_of_row(&vec![0.5; n]), 1.0);
        assert_eq!(binary_deviation_of_row(&vec![0.0; n]), 0.0);
        assert_eq!(binary_deviation_of_row(&vec![1.0; n]), 0.0);
    }
    println!("criterion 02 binary-deviation-endpoints: PASS (exact at n = 1, 3, 10, 50)");
}

#[test]
fn criterion_03_spectral_identity() {
    let started = Instant::now();
    let mut worst_err: f64 = 0.0;
    for trial in 0..50u64 {
        let n = 20 + (trial as usize * 7) % 81; // 20..100
        let p_in = 0.3 + 0.4 * ((trial % 5) as f64 / 5.0);
        let p_out = 0.05 + 0.1 * ((trial % 3) as f64 / 3.0);
        let g = generate_sbm(n, 2, p_in, p_out, 1000 + trial).unwrap();
        let d = eigendecompose(&g).unwrap();
        let v = reconstruct_view(&d, n).unwrap();
        assert_eq!(&v, g.adjacency(), "trial {trial}: full-rank view differs");
        let err = (d.reconstruct_full() - g.adjacency()).abs().max();
        worst_err = worst_err.max(err);
        assert!(err < 1e-8, "trial {trial}: reconstruction error {err}");
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "took {elapsed:.1}s, budget 60s");
    println!(
        "criterion 03 spectral-identity: PASS (50 graphs, max err {worst_err:.2e}, {elapsed:.1}s)"
    );
}

#[test]
fn criterion_04_energy_monotonicity() {
    let mut graphs = vec![karate()];
    for seed in 0..10u64 {
        graphs.push(generate_sbm(30 + (seed as usize) * 5, 2, 0.5, 0.1, seed).unwrap());
    }
    for g in &graphs {
        let d = eigendecompose(g).unwrap();
        let mut prev = 0.0;
        for q in 1..=g.n() {
            let e = retained_energy(&d, q).unwrap();
            assert!(e >= prev, "energy decreased at q = {q}");
            prev = e;
        }
        assert_eq!(prev, 1.0, "energy at q = n must be exactly 1");
    }
    println!(
        "criterion 04 energy-monotonicity: PASS ({} graphs, exact endpoint)",
        graphs.len()
    );
}

#[test]
fn criterion_05_conformal_coverage() {
    let started = Instant::now();
    let alpha = 0.05;
    let m_cal = 200;
    let m_test = 1000;
    let mut successes = 0;
    let mut coverages = Vec::new();
    for trial in 0..10u64 {
        let mut rng = seeds::rng(5000 + trial, 0xC5);
        let mut draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let x: f64 = rng.gen_range(0.0..1.0);
            let eps: f64 = rng.sample(StandardNormal);
            let y = (2.0 * std::f64::consts::PI * x).sin() + (0.1 + 0.9 * x) * eps;
            (x, y)
        };
        // deliberately undersized fixed quantile regressor
        let lower = |x: f64| (2.0 * std::f64::consts::PI * x).sin() - 0.25;
        let upper = |x: f64| (2.0 * std::f64::consts::PI * x).sin() + 0.25;
        let mut scores = Vec::with_capacity(m_cal);
        for _ in 0..m_cal {
            let (x, y) = draw(&mut rng);
            scores.push(conformal_score(lower(x), upper(x), y));
        }
        let qhat = compute_qhat(&scores, alpha).unwrap();
        let mut covered = 0usize;
        for _ in 0..m_test {
            let (x, y) = draw(&mut rng);
            if y >= lower(x) - qhat && y <= upper(x) + qhat {
                covered += 1;
            }
        }
        let coverage = covered as f64 / m_test as f64;
        coverages.push(coverage);
        if coverage >= 0.92 {
            successes += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        successes >= 9,
        "coverage >= 0.92 in only {successes}/10 trials ({coverages:?})"
    );
    assert!(elapsed < 120.0, "took {elapsed:.1}s, budget 120s");
    println!(
        "criterion 05 conformal-coverage: PASS ({successes}/10 trials, min coverage {:.3}, {elapsed:.1}s)",
        coverages.iter().copied().fold(f64::INFINITY, f64::min)
    );
}

#[test]
fn criterion_06_qhat_oracle() {
    let oracle = |scores: &[f64], alpha: f64| -> f64 {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = (((sorted.len() as f64) + 1.0) * (1.0 - alpha)).ceil() as usize;
        sorted[k.min(sorted.len()) - 1]
    };
    let mut rng = seeds::rng(66, 0x66);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let m = rng.gen_range(1..300);
        let scores: Vec<f64> = (0..m).map(|_| rng.gen_range(-100.0..100.0)).collect();
        for alpha in [0.05, 0.1, 0.5] {
            assert_eq!(
                compute_qhat(&scores, alpha).unwrap(),
                oracle(&scores, alpha),
                "disagreement at m = {m}, alpha = {alpha}"
            );
            checked += 1;
        }
    }
    println!("criterion 06 qhat-oracle: PASS ({checked} exact comparisons)");
}

#[test]
fn criterion_07_gradient_correctness() {
    let started = Instant::now();
    const EPS: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    const KINK: f64 = 1e-3;
    let rel = |a: f64, b: f64| (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()));

    let mut worst: f64 = 0.0;
    let mut instances = 0usize;

    // ten GCN instances (n <= 8), cross-entropy, frozen dropout/noise
    let mut seed = 0u64;
    while instances < 10 {
        seed += 1;
        let n = 5 + (seed as usize % 4); // 5..8
        let g = generate_sbm(n, 2, 0.8, 0.3, seed).unwrap();
        let labels = g.labels().unwrap().to_vec();
        let a_hat = rege::graph::symmetric_normalize(&g);
        let params = GcnParams::init(n, 5, 2, seed + 1);
        let ax = a_hat.matrix() * g.features();
        if (&ax * &params.w1).iter().any(|z| z.abs() <= KINK) {
            continue;
        }
        let radii = if seed % 2 == 0 {
            let mut r = seeds::rng(seed, 0x11);
            Some(
                RadiusVector::new((0..n).map(|_| r.gen_range(0.0..1.0)).collect(), RadiusKind::Ddr)
                    .unwrap(),
            )
        } else {
            None
        };
        let fseed = seed * 31 + 5;
        let mask = vec![true; n];
        let loss_at = |p: &GcnParams| {
            let out =
                gcn_forward(p, &a_hat, g.features(), radii.as_ref(), 0.5, Mode::Train, fseed)
                    .unwrap();
            cross_entropy_loss(&out.logits, &labels, &mask).unwrap()
        };
        let out = gcn_forward(
            &params,
            &a_hat,
            g.features(),
            radii.as_ref(),
            0.5,
            Mode::Train,
            fseed,
        )
        .unwrap();
        let (_, ce) = cross_entropy_grad(&out.logits, &labels, &mask).unwrap();
        let grads = gcn_backward(&params, &out.trace, &ce).unwrap();
        for slot in 0..2 {
            let shape = if slot == 0 { params.w1.shape() } else { params.w2.shape() };
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    {
                        let (p, m) = if slot == 0 {
                            (&mut plus.w1, &mut minus.w1)
                        } else {
                            (&mut plus.w2, &mut minus.w2)
                        };
                        p[(i, j)] += EPS;
                        m[(i, j)] -= EPS;
                    }
                    let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * EPS);
                    let a = if slot == 0 { grads.w1[(i, j)] } else { grads.w2[(i, j)] };
                    worst = worst.max(rel(a, fd));
                }
            }
        }
        instances += 1;
    }

    // ten MLP instances, pinball losses at 0.025 and 0.975
    let mut seed = 500u64;
    while instances < 20 {
        seed += 1;
        let params = MlpParams::init(4, 6, 3, seed);
        let mut rng = seeds::rng(seed, 0x21);
        let x = DMatrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let z = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
        let fseed = seed * 13 + 1;
        // reject kink-adjacent instances (pre-activations and residuals)
        let mut clean = true;
        let mut current = x.clone();
        for (li, w) in params.layers.iter().enumerate() {
            let pre = &current * w;
            if pre.iter().any(|v| v.abs() <= KINK) {
                clean = false;
                break;
            }
            let mut h = pre.map(|v| v.max(0.0));
            if li < 2 {
                let mask = rege::nn::dropout_mask(
                    h.nrows(),
                    h.ncols(),
                    0.5,
                    seeds::derive2(fseed, 0xD0, li as u64),
                );
                h.component_mul_assign(&mask);
            }
            current = h;
        }
        if !clean {
            continue;
        }
        let probe = mlp_forward(&params, &x, 0.5, Mode::Train, fseed).unwrap();
        if z.iter().zip(probe.lower.iter()).any(|(a, b)| (a - b).abs() <= KINK)
            || z.iter().zip(probe.upper.iter()).any(|(a, b)| (a - b).abs() <= KINK)
        {
            continue;
        }
        let loss_at = |p: &MlpParams| {
            let out = mlp_forward(p, &x, 0.5, Mode::Train, fseed).unwrap();
            let (lm, _) = mse_grad(&z, &out.mean).unwrap();
            let (ll, _) = quantile_loss_grad(&z, &out.lower, 0.025).unwrap();
            let (lh, _) = quantile_loss_grad(&z, &out.upper, 0.975).unwrap();
            lm + ll + lh
        };
        let out = mlp_forward(&params, &x, 0.5, Mode::Train, fseed).unwrap();
        let (_, gm) = mse_grad(&z, &out.mean).unwrap();
        let (_, gl) = quantile_loss_grad(&z, &out.lower, 0.025).unwrap();
        let (_, gh) = quantile_loss_grad(&z, &out.upper, 0.975).unwrap();
        let grads = mlp_backward(&params, &out.trace, &gm, &gl, &gh).unwrap();
        let all: Vec<&DMatrix<f64>> = grads.layers.iter().chain(grads.heads.iter()).collect();
        for (slot, grad) in all.iter().enumerate() {
            for i in 0..grad.nrows() {
                for j in 0..grad.ncols() {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    {
                        let (p, m) = if slot < 3 {
                            (&mut plus.layers[slot], &mut minus.layers[slot])
                        } else {
                            (&mut plus.heads[slot - 3], &mut minus.heads[slot - 3])
                        };
                        p[(i, j)] += EPS;
                        m[(i, j)] -= EPS;
                    }
                    let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * EPS);
                    worst = worst.max(rel(grad[(i, j)], fd));
                }
            }
        }
        instances += 1;
    }

    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst < TOL, "max relative error {worst}");
    assert!(elapsed < 120.0, "took {elapsed:.1}s, budget 120s");
    println!(
        "criterion 07 gradient-correctness: PASS (20 instances, max rel err {worst:.2e}, {elapsed:.1}s)"
    );
}

#[test]
fn criterion_08_degeneracy_to_baseline() {
    let g = generate_sbm(40, 2, 0.6, 0.1, 8)
        .unwrap()
        .with_random_split(0.1, 0.1, 8)
        .unwrap();
    let cfg = TrainConfig {
        epochs_per_view: 100,
        baseline_epochs: 100,
        seed: 2024,
        ..TrainConfig::default()
    };
    let views =
        rege::spectral::ViewSequence::new(vec![g.adjacency().clone()], vec![g.n()]).unwrap();
    let zeros = RadiusVector::zeros(g.n(), RadiusKind::Ddr);
    let (pc, _) = curriculum_train(&g, &views, &zeros, &cfg).unwrap();
    let (pb, _) = train_baseline(&g, &cfg).unwrap();
    assert_eq!(pc.w1, pb.w1, "layer-1 weights differ");
    assert_eq!(pc.w2, pb.w2, "layer-2 weights differ");
    println!("criterion 08 degeneracy-to-baseline: PASS (bit-identical parameters)");
}

#[test]
fn criterion_09_robustness_under_attack() {
    let started = Instant::now();
    let graph = generate_sbm(200, 2, 0.10, 0.02, 4242).unwrap();
    let cfg = TrainConfig {
        seed: 0,
        ..TrainConfig::default()
    };
    let methods = [
        Method::Baseline,
        Method::RegeD,
        Method::RegeM,
        Method::NctD,
        Method::NctM,
    ];
    let budgets = [PerturbationBudget::new(0.10).unwrap()];
    let seeds_list: Vec<u64> = (0..10).collect();
    let outcome = run_experiment(
        &graph,
        &methods,
        &[Attack::Heuristic],
        &budgets,
        &seeds_list,
        &cfg,
        2,
    )
    .unwrap();
    assert!(outcome.failures.is_empty(), "cells failed: {:?}", outcome.failures);
    let mean = |m: Method| {
        outcome
            .report
            .mean_for(m, Attack::Heuristic, 0.10)
            .expect("summary row")
    };
    let (base, rege_d, rege_m, nct_d, nct_m) = (
        mean(Method::Baseline),
        mean(Method::RegeD),
        mean(Method::RegeM),
        mean(Method::NctD),
        mean(Method::NctM),
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        rege_d >= base - 0.02,
        "rege-d {rege_d:.4} below baseline {base:.4} - 0.02"
    );
    assert!(
        rege_m >= base - 0.02,
        "rege-m {rege_m:.4} below baseline {base:.4} - 0.02"
    );
    assert!(
        rege_d >= nct_d - 0.02,
        "rege-d {rege_d:.4} below nct-d {nct_d:.4} - 0.02"
    );
    assert!(
        rege_m >= nct_m - 0.02,
        "rege-m {rege_m:.4} below nct-m {nct_m:.4} - 0.02"
    );
    assert!(elapsed < 1800.0, "took {elapsed:.0}s, budget 1800s");
    println!(
        "criterion 09 robustness: PASS (base {base:.4}, rege-d {rege_d:.4}, rege-m {rege_m:.4}, \
         nct-d {nct_d:.4}, nct-m {nct_m:.4}, {elapsed:.0}s)"
    );
}

#[test]
fn criterion_10_cli_determinism() {
    let compare_dirs = |a: &Path, b: &Path| {
        let mut names: Vec<String> = std::fs::read_dir(a)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let fa = std::fs::read(a.join(&name)).unwrap();
            let fb = std::fs::read(b.join(&name)).unwrap();
            assert_eq!(fa, fb, "file {name} differs between identical runs");
        }
    };

    let root = tempfile::tempdir().unwrap();
    let run_twice = |label: &str, args: &[&str]| {
        let d1 = root.path().join(format!("{label}_1"));
        let d2 = root.path().join(format!("{label}_2"));
        for d in [&d1, &d2] {
            run_ok(rege_binary().args(args).arg("--out").arg(d));
        }
        compare_dirs(&d1, &d2);
    };

    run_twice(
        "views",
        &["views", "--dataset", "karate", "--seed", "11"],
    );
    run_twice(
        "radii",
        &["radii", "--dataset", "karate", "--kind", "ddr", "--seed", "11"],
    );
    run_twice(
        "radii_mdr",
        &[
            "radii", "--dataset", "karate", "--kind", "mdr", "--seed", "11",
        ],
    );
    run_twice(
        "train",
        &[
            "train",
            "--dataset",
            "karate",
            "--method",
            "rege-d",
            "--seed",
            "11",
            "--epochs-per-view",
            "20",
        ],
    );
    run_twice(
        "experiment",
        &[
            "experiment",
            "--dataset",
            "karate",
            "--methods",
            "baseline,rege-d",
            "--attacks",
            "heuristic",
            "--budgets",
            "0.1",
            "--seeds",
            "0,1",
            "--jobs",
            "2",
            "--seed",
            "11",
            "--epochs-per-view",
            "20",
        ],
    );
    run_twice(
        "sweep",
        &[
            "sweep",
            "--dataset",
            "karate",
            "--q-values",
            "5,34",
            "--seed",
            "11",
            "--epochs-per-view",
            "10",
        ],
    );
    println!("criterion 10 cli-determinism: PASS (6 commands byte-identical)");
}

//! End-to-end training flows: degeneracy to the baseline, determinism,
//! perturbation budgets, and the model-dependent radii pipeline.

use rege::graph::{generate_sbm, karate};
use rege::mdr;
use rege::perturb::{heuristic_attack, pair_flips, random_flip, PerturbationBudget};
use rege::pipeline::{self, Method};
use rege::radii::{RadiusKind, RadiusVector};
use rege::spectral::ViewSequence;
use rege::trainer::{curriculum_train, evaluate, train_baseline, train_nct, TrainConfig};

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs_per_view: 40,
        baseline_epochs: 40,
        teacher_epochs: 60,
        student_epochs: 40,
        student_hidden: 64,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn curriculum_degenerates_to_baseline_bit_for_bit() {
    let g = generate_sbm(30, 2, 0.7, 0.1, 3)
        .unwrap()
        .with_random_split(0.2, 0.2, 3)
        .unwrap();
    let cfg = quick_config(77);
    let views = ViewSequence::new(vec![g.adjacency().clone()], vec![g.n()]).unwrap();
    let zeros = RadiusVector::zeros(g.n(), RadiusKind::Ddr);
    let (pc, _) = curriculum_train(&g, &views, &zeros, &cfg).unwrap();
    let (pb, _) = train_baseline(&g, &cfg).unwrap();
    assert_eq!(pc.w1, pb.w1);
    assert_eq!(pc.w2, pb.w2);
}

#[test]
fn nct_with_zero_radii_is_noise_free() {
    // zero radii add nothing, so two runs agree and match a run without the
    // radii argument under the same stage budget
    let g = generate_sbm(24, 2, 0.8, 0.1, 5)
        .unwrap()
        .with_random_split(0.2, 0.2, 5)
        .unwrap();
    let mut cfg = quick_config(11);
    cfg.nct_stages = Some(3);
    let zeros = RadiusVector::zeros(g.n(), RadiusKind::Ddr);
    let (p1, _) = train_nct(&g, &zeros, &cfg).unwrap();
    let (p2, _) = train_nct(&g, &zeros, &cfg).unwrap();
    assert_eq!(p1.w1, p2.w1);
    assert_eq!(p1.w2, p2.w2);
}

#[test]
fn rege_d_trains_separable_sbm_to_high_accuracy() {
    let g = generate_sbm(60, 2, 0.9, 0.05, 9)
        .unwrap()
        .with_random_split(0.1, 0.1, 9)
        .unwrap();
    let cfg = quick_config(1);
    let (params, report) = pipeline::train_method(&g, Method::RegeD, &cfg).unwrap();
    let acc = evaluate(&params, &g, &g.masks().unwrap().test).unwrap();
    assert!(acc >= 0.9, "test accuracy {acc}");
    assert!(!report.records.is_empty());
}

#[test]
fn mdr_pipeline_is_deterministic_and_in_range() {
    let g = karate().with_random_split(0.3, 0.2, 4).unwrap();
    let mut cfg = quick_config(21);
    cfg.student_epochs = 30;
    let r1 = mdr::mdr_pipeline(&g, &cfg).unwrap();
    let r2 = mdr::mdr_pipeline(&g, &cfg).unwrap();
    assert_eq!(r1.values(), r2.values());
    assert_eq!(r1.kind(), RadiusKind::Mdr);
    assert!(r1.values().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(r1.len(), 34);
}

#[test]
fn mdr_depends_on_features_not_edges() {
    // with a fixed teacher embedding, permuting the graph's edges leaves the
    // student (and hence the radii) untouched
    let g = karate().with_random_split(0.3, 0.2, 4).unwrap();
    let cfg = quick_config(8);
    let teacher = mdr::train_teacher(&g, &cfg).unwrap();
    let masks = g.masks().unwrap();
    let s1 = mdr::train_student(g.features(), &teacher.embeddings, &masks.train, &cfg).unwrap();
    let c1 = mdr::calibrate(&s1, g.features(), &teacher.embeddings, &masks.train, cfg.alpha)
        .unwrap();
    let i1 = mdr::conformal_intervals(&s1, &c1, g.features()).unwrap();

    // a different graph over the same features/labels
    let permuted = generate_sbm(34, 2, 0.4, 0.2, 99).unwrap();
    let g2 = permuted
        .with_labels(g.labels().unwrap().to_vec())
        .unwrap()
        .with_masks(rege::graph::Masks::new(
            masks.train.clone(),
            masks.val.clone(),
            masks.test.clone(),
        ).unwrap())
        .unwrap();
    let s2 = mdr::train_student(g2.features(), &teacher.embeddings, &masks.train, &cfg).unwrap();
    let c2 = mdr::calibrate(&s2, g2.features(), &teacher.embeddings, &masks.train, cfg.alpha)
        .unwrap();
    let i2 = mdr::conformal_intervals(&s2, &c2, g2.features()).unwrap();
    assert_eq!(mdr::mdr_radii(&i1).values(), mdr::mdr_radii(&i2).values());
}

#[test]
fn teacher_fits_separable_blocks() {
    let g = generate_sbm(60, 2, 0.9, 0.05, 2)
        .unwrap()
        .with_random_split(0.2, 0.2, 2)
        .unwrap();
    let mut cfg = quick_config(6);
    cfg.teacher_epochs = 120;
    let teacher = mdr::train_teacher(&g, &cfg).unwrap();
    assert_eq!(teacher.embeddings.nrows(), 60);
    assert_eq!(teacher.embeddings.ncols(), cfg.hidden);
    let acc = evaluate(&teacher.params, &g, &g.masks().unwrap().train).unwrap();
    assert!(acc >= 0.95, "teacher train accuracy {acc}");
}

#[test]
fn student_reproduces_constant_targets() {
    let features = nalgebra::DMatrix::<f64>::identity(12, 12);
    let z = nalgebra::DMatrix::from_element(12, 4, 0.75);
    let mut cfg = quick_config(13);
    cfg.student_epochs = 600;
    cfg.student_hidden = 32;
    cfg.student_lr = 1e-2;
    // dropout off: with 12 one-hot rows the net would fit the dropout-scaled
    // distribution instead of the eval one
    cfg.dropout = 0.0;
    let mask = vec![true; 12];
    let student = mdr::train_student(&features, &z, &mask, &cfg).unwrap();
    let (mean, lower, upper) = student.predict(&features).unwrap();
    let err = (mean - &z).abs().max();
    assert!(err < 0.1, "mean head error {err}");
    // quantile heads bracket the mean on average
    let avg_lower = lower.sum() / lower.len() as f64;
    let avg_upper = upper.sum() / upper.len() as f64;
    assert!(avg_lower <= avg_upper);
}

#[test]
fn perturbation_budget_is_exact_pair_flips() {
    let g = generate_sbm(40, 2, 0.5, 0.1, 7).unwrap();
    for rate in [0.05, 0.1, 0.25] {
        let budget = PerturbationBudget::new(rate).unwrap();
        let expected = ((rate * g.num_edges() as f64).floor()) as usize;
        let flipped = random_flip(&g, budget, 13).unwrap();
        assert_eq!(pair_flips(&g, &flipped.graph), expected);
        let attacked = heuristic_attack(&g, budget, 13).unwrap();
        assert_eq!(pair_flips(&g, &attacked.graph), expected);
    }
}

#[test]
fn heuristic_attack_degrades_baseline_accuracy() {
    // attack effectiveness: the label-aware perturbation at a 20% budget
    // lowers mean baseline accuracy vs the clean graph; the blocks are kept
    // moderately separable so the attack has something to destroy
    let g = generate_sbm(80, 2, 0.22, 0.05, 31).unwrap();
    let budget = PerturbationBudget::new(0.2).unwrap();
    let mut clean_mean = 0.0;
    let mut attacked_mean = 0.0;
    let runs = 10;
    for seed in 0..runs {
        let split = g.clone().with_random_split(0.1, 0.1, 100 + seed).unwrap();
        let mut cfg = quick_config(seed);
        cfg.baseline_epochs = 60;
        let (p, _) = train_baseline(&split, &cfg).unwrap();
        clean_mean += evaluate(&p, &split, &split.masks().unwrap().test).unwrap();

        let attacked = heuristic_attack(&split, budget, 200 + seed).unwrap().graph;
        let (pa, _) = train_baseline(&attacked, &cfg).unwrap();
        attacked_mean += evaluate(&pa, &attacked, &attacked.masks().unwrap().test).unwrap();
    }
    clean_mean /= runs as f64;
    attacked_mean /= runs as f64;
    assert!(
        attacked_mean < clean_mean,
        "attack did not reduce accuracy: clean {clean_mean} vs attacked {attacked_mean}"
    );
}

#[test]
fn karate_baseline_fits_training_set() {
    let g = karate().with_random_split(0.1, 0.1, 7).unwrap();
    let mut cfg = quick_config(7);
    cfg.baseline_epochs = 200;
    let (params, _) = train_baseline(&g, &cfg).unwrap();
    let acc = evaluate(&params, &g, &g.masks().unwrap().train).unwrap();
    assert_eq!(acc, 1.0, "train accuracy {acc}");
}

#[test]
fn training_loss_trends_downward() {
    // 10-epoch moving average of the train loss: the final window sits well
    // below the first one
    use rege::graph::symmetric_normalize;
    use rege::nn::{
        adam_step, cross_entropy_grad, gcn_backward, gcn_forward, AdamState, GcnParams, Mode,
    };
    let g = karate().with_random_split(0.3, 0.1, 5).unwrap();
    let labels = g.labels().unwrap().to_vec();
    let masks = g.masks().unwrap();
    let a_hat = symmetric_normalize(&g);
    let mut params = GcnParams::init(34, 16, 2, 9);
    let mut adam = AdamState::new(&[params.w1.shape(), params.w2.shape()]);
    let mut losses = Vec::new();
    for epoch in 0..120u64 {
        let fseed = rege::seeds::derive2(9, 0x08, epoch);
        let out = gcn_forward(&params, &a_hat, g.features(), None, 0.5, Mode::Train, fseed)
            .unwrap();
        let (loss, grad) = cross_entropy_grad(&out.logits, &labels, &masks.train).unwrap();
        losses.push(loss);
        let grads = gcn_backward(&params, &out.trace, &grad).unwrap();
        adam_step(
            &mut [&mut params.w1, &mut params.w2],
            &[&grads.w1, &grads.w2],
            &mut adam,
            0.01,
            &[5e-4, 0.0],
        )
        .unwrap();
    }
    let avg = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    let first = avg(&losses[..10]);
    let last = avg(&losses[110..]);
    assert!(
        last < 0.5 * first,
        "loss did not trend down: first window {first}, last window {last}"
    );
}

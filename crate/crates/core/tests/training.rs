mod support;

use labelsmear::dataset::Features;
use labelsmear::experiment::{build_trials, run_grid, summarize, DataSource, ExperimentConfig, MethodConfig};
use labelsmear::losses::{LossKind, LossSpec};
use labelsmear::metrics;
use labelsmear::synthlab::{self, Figure5Config, Figure5Setting};
use labelsmear::training::{
    closed_form_smoothed_least_squares, omega_gradient_at, omega_linear, read_checkpoint, train, write_checkpoint,
    LinearModel, MlpModel, TrainConfig,
};
use labelsmear::{Architecture, Model};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn random_features(r: &mut impl Rng, n: usize, d: usize) -> Features {
    let shift: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
    let scale = r.random_range(0.1..4.0);
    let normal = Normal::new(0.0, scale).unwrap();
    let data = (0..n * d).map(|k| shift[k % d] + normal.sample(r)).collect();
    Features::new(n, d, data).unwrap()
}

fn random_linear(r: &mut impl Rng, l: usize, d: usize, scale: f64) -> LinearModel {
    LinearModel {
        weights: DMatrix::from_fn(l, d, |_, _| r.random_range(-scale..scale)),
        bias: None,
    }
}

#[test]
fn omega_is_minimised_at_zero_weights() {
    let mut r = support::rng(1);
    for case in 0..20 {
        let l = 2 + case % 5;
        let d = 1 + case % 7;
        let x = random_features(&mut r, 60, d);
        let zero = LinearModel::zeros(l, d, false);
        let g = omega_gradient_at(&zero, &x).unwrap();
        assert!(g.amax() < 1e-10, "case {case}: {}", g.amax());
        let base = omega_linear(&zero, &x);
        assert!((base - l as f64 * (l as f64).ln()).abs() < 1e-10);
        for _ in 0..100 {
            let w = random_linear(&mut r, l, d, 1.5);
            assert!(base <= omega_linear(&w, &x));
        }
    }
}

#[test]
fn omega_gradient_matches_finite_differences() {
    let mut r = support::rng(2);
    for _ in 0..20 {
        let (l, d) = (r.random_range(2..6), r.random_range(1..5));
        let x = random_features(&mut r, 25, d);
        let w = random_linear(&mut r, l, d, 0.8);
        let g = omega_gradient_at(&w, &x).unwrap();
        let flat: Vec<f64> = w.weights.iter().copied().collect();
        let num = support::numeric_grad(
            |v| {
                let m = LinearModel {
                    weights: DMatrix::from_column_slice(l, d, v),
                    bias: None,
                };
                omega_linear(&m, &x)
            },
            &flat,
            1e-5,
        );
        for (a, b) in g.iter().zip(&num) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

fn one_hot(labels: &[usize], l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), l, |i, k| if labels[i] == k { 1.0 } else { 0.0 })
}

#[test]
fn smoothed_least_squares_matches_direct_solve() {
    let mut r = support::rng(3);
    for _ in 0..10 {
        let (n, d, l) = (r.random_range(20..60), r.random_range(2..6), r.random_range(2..5));
        let x = random_features(&mut r, n, d).to_matrix();
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..l)).collect();
        let y = one_hot(&labels, l);
        for alpha in [0.0, 0.1, 0.5, 0.9] {
            let smoothed = y.map(|v| (1.0 - alpha) * v + alpha / l as f64);
            let direct = x.clone().svd(true, true).solve(&smoothed, 1e-14).unwrap();
            let w = closed_form_smoothed_least_squares(&x, &y, alpha).unwrap();
            assert!((w - direct.transpose()).amax() < 1e-8);
        }
    }
}

#[test]
fn centred_design_is_pure_shrinkage() {
    let mut r = support::rng(4);
    let (n, d, l) = (50, 4, 3);
    let mut features = random_features(&mut r, n, d);
    features.center();
    let x = features.to_matrix();
    let labels: Vec<usize> = (0..n).map(|i| i % l).collect();
    let y = one_hot(&labels, l);
    let w_star = closed_form_smoothed_least_squares(&x, &y, 0.0).unwrap();
    for alpha in [0.1, 0.5, 0.9] {
        let w = closed_form_smoothed_least_squares(&x, &y, alpha).unwrap();
        assert!((w - &w_star * (1.0 - alpha)).amax() < 1e-10);
    }
}

fn mean_normal_norm(row: &synthlab::Figure5Row) -> f64 {
    let norms: Vec<f64> = row.runs.iter().map(|r| r.normal.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    norms.iter().sum::<f64>() / norms.len() as f64
}

/// Both smoothing and l2 shrink the separator normal on the one-sided
/// noise data, and both pull the boundary back towards the origin.
#[test]
fn smoothing_and_l2_shrink_the_separator() {
    let rows = synthlab::figure5_experiment(&Figure5Config::default()).unwrap();
    for setting in [Figure5Setting::Smoothing, Figure5Setting::L2] {
        let mine: Vec<_> = rows.iter().filter(|r| r.setting == setting).collect();
        let norms: Vec<f64> = mine.iter().map(|r| mean_normal_norm(r)).collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{setting:?}: {norms:?}");
        assert!(mine.last().unwrap().abs_offset_mean() < mine[0].abs_offset_mean());
    }
    let clean = rows.iter().find(|r| r.setting == Figure5Setting::Clean).unwrap();
    assert!(clean.abs_offset_mean() < 0.05);
}

#[test]
fn clean_separator_passes_through_the_origin() {
    let data = synthlab::make_blobs(&synthlab::symmetric_pair(2, 0.01, 2000, 77)).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        weight_decay: 0.0,
        lr_drop_epochs: vec![10, 15],
        ..TrainConfig::default()
    };
    let (model, _) = train(LinearModel::zeros(2, 2, true).into(), &data, &LossSpec::standard(), &cfg).unwrap();
    let offset = synthlab::separator_offset(model.as_linear().unwrap(), &[1.0, 1.0]).unwrap();
    assert!(offset.abs() < 0.05, "{offset}");
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = synthlab::make_blobs(&synthlab::BlobSpec {
        centers: synthlab::random_centers(3, 4, 1.0, 8),
        variance: 0.5,
        samples_per_class: 40,
        seed: 8,
    })
    .unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let spec = LossSpec::smoothing(0.2).unwrap();
    let init = || Model::from(MlpModel::init(3, 4, 8, 5).unwrap());
    let (a, ha) = train(init(), &data, &spec, &cfg).unwrap();
    let (b, hb) = train(init(), &data, &spec, &cfg).unwrap();
    assert_eq!(a.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(ha, hb);
}

#[test]
fn checkpoints_round_trip() {
    for model in [
        Architecture::Mlp { hidden: 6 }.build(3, 4, 1).unwrap(),
        Model::from(LinearModel {
            weights: DMatrix::from_fn(2, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0)),
            bias: Some(vec![0.1, -0.2]),
        }),
    ] {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model).unwrap();
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), model);
    }
}

fn benchmark(methods: Vec<MethodConfig>, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        methods,
        seeds,
        ..ExperimentConfig::default()
    }
}

#[test]
fn smoothing_beats_the_baseline_under_noise() {
    let cfg = benchmark(
        vec![MethodConfig::new(LossKind::Standard, 0.0), MethodConfig::new(LossKind::Smoothing, 0.3)],
        vec![0, 1, 2],
    );
    let summary = summarize(&cfg, &run_grid(&cfg, &build_trials(&cfg).unwrap()).unwrap());
    let base = summary[0].mean("test_acc").unwrap();
    let ls = summary[1].mean("test_acc").unwrap();
    assert!(ls > base + 0.01, "{ls} vs {base}");
}

/// With an MLP, smoothing pulls the pre-logits of mislabelled examples
/// towards their true-class cluster.
#[test]
fn smoothing_tightens_noisy_prelogits() {
    let mut cfg = benchmark(
        vec![MethodConfig::new(LossKind::Standard, 0.0), MethodConfig::new(LossKind::Smoothing, 0.2)],
        vec![0, 1, 2],
    );
    if let DataSource::Blobs(b) = &mut cfg.data {
        b.num_classes = 3;
        b.dim = 10;
        b.train_per_class = 200;
    }
    cfg.model = Architecture::Mlp { hidden: 32 };
    cfg.train.weight_decay = 1e-3;
    let trials = build_trials(&cfg).unwrap();
    let runs = run_grid(&cfg, &trials).unwrap();
    let mut dist = [0.0; 2];
    for run in &runs {
        let trial = trials.iter().find(|t| t.seed == run.seed).unwrap();
        let mlp = run.model.as_ref().unwrap().as_mlp().unwrap();
        let points = metrics::prelogit_projection(mlp, &trial.train, [0, 1, 2]).unwrap();
        let (noisy, _) = metrics::noisy_centroid_distance(&points).unwrap();
        dist[usize::from(run.method.kind == LossKind::Smoothing)] += noisy;
    }
    assert!(dist[1] < dist[0], "{dist:?}");
}

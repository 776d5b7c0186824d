use kqic::data::summarize;
use kqic::harness::{run_benchmark, ExperimentConfig, Method, MethodSettings};
use kqic::rng::stream_rng;
use kqic::simgen::{
    gaussian_copula_pair, gen_dataset, gen_dataset_with_rate, latent_pair, tune_censoring_rate,
    ExpConvention, GeneratorModel, ModelKind,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn copula_sample(rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    (0..100_000)
        .map(|_| gaussian_copula_pair(rho, |u| u, |v| v, &mut rng))
        .unzip()
}

#[test]
fn copula_independence_at_zero() {
    let (u, v) = copula_sample(0.0, 1);
    assert!(pearson(&u, &v).abs() < 0.01);
}

#[test]
fn copula_normal_scores_recover_rho() {
    let (u, v) = copula_sample(0.99, 2);
    let std = Normal::standard();
    let zu: Vec<f64> = u.iter().map(|&p| std.inverse_cdf(p)).collect();
    let zv: Vec<f64> = v.iter().map(|&p| std.inverse_cdf(p)).collect();
    assert!((pearson(&zu, &zv) - 0.99).abs() < 0.01);
}

#[test]
fn copula_is_deterministic() {
    let mut a = stream_rng(3, 4);
    let mut b = stream_rng(3, 4);
    assert_eq!(
        gaussian_copula_pair(0.5, |u| u, |v| v, &mut a),
        gaussian_copula_pair(0.5, |u| u, |v| v, &mut b)
    );
}

#[test]
fn entry_marginals_match_their_cdf() {
    for (kind, conv) in [
        (ModelKind::Monotone, ExpConvention::Rate),
        (ModelKind::Monotone, ExpConvention::Scale),
        (ModelKind::VShape, ExpConvention::Rate),
        (ModelKind::Periodic, ExpConvention::Rate),
        (ModelKind::NullIndependent, ExpConvention::Rate),
    ] {
        let m = GeneratorModel::new(kind, 0.3, 0.0)
            .unwrap()
            .with_convention(conv);
        let mut rng = stream_rng(11, 0);
        let mut xs: Vec<f64> = (0..10_000).map(|_| latent_pair(&m, &mut rng).0).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = m.entry_cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{kind:?} {conv:?}: KS {ks}");
    }
}

#[test]
fn vshape_keeps_uniform_survival_marginal() {
    let m = GeneratorModel::new(ModelKind::VShape, 0.6, 0.0).unwrap();
    let mut rng = stream_rng(5, 0);
    let ys: Vec<f64> = (0..50_000).map(|_| latent_pair(&m, &mut rng).1).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    assert!(ys.iter().all(|&y| (0.0..=1.0).contains(&y)));
    assert!((mean - 0.5).abs() < 0.01);
}

#[test]
fn tuned_null_censoring_fraction() {
    let m = GeneratorModel::new(ModelKind::NullIndependent, 0.0, 0.5).unwrap();
    let rate = tune_censoring_rate(&m, 0.5, 21, 100_000).unwrap();
    let d = gen_dataset_with_rate(&m, rate, 100_000, 22).unwrap();
    let c = summarize(&d).censoring_fraction;
    assert!((c - 0.5).abs() < 0.02, "{c}");
}

#[test]
fn tuning_targets_for_every_model() {
    for kind in [ModelKind::Monotone, ModelKind::VShape, ModelKind::Periodic] {
        let m = GeneratorModel::new(kind, 0.4, 0.4).unwrap();
        let d = gen_dataset(&m, 20_000, 8).unwrap();
        let c = summarize(&d).censoring_fraction;
        assert!((c - 0.4).abs() < 0.025, "{kind:?}: {c}");
    }
}

#[test]
fn serial_and_parallel_runs_agree() {
    let cfg = ExperimentConfig {
        model: GeneratorModel::new(ModelKind::Monotone, 0.0, 0.5).unwrap(),
        n_values: vec![40, 60],
        parameter_values: vec![0.0, 0.4],
        trials: 6,
        methods: vec![Method::KqicGauss, Method::WlrSc, Method::MinP1],
        settings: MethodSettings {
            bootstrap_draws: 99,
            ..Default::default()
        },
        master_seed: 42,
        tuning_mc_size: 5000,
    };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_benchmark(&cfg))
        .unwrap();
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_benchmark(&cfg))
        .unwrap();
    assert_eq!(serial.strip_timings(), parallel.strip_timings());
    let total: usize = serial.cells.iter().map(|c| c.rejections).sum();
    assert!(total <= serial.cells.len() * cfg.trials);
}

#[test]
fn single_trial_rates_are_binary() {
    let cfg = ExperimentConfig {
        model: GeneratorModel::new(ModelKind::Periodic, 0.0, 0.25).unwrap(),
        n_values: vec![50],
        parameter_values: vec![0.0],
        trials: 1,
        methods: vec![Method::KqicImq, Method::Wlr],
        settings: MethodSettings {
            bootstrap_draws: 49,
            ..Default::default()
        },
        master_seed: 0,
        tuning_mc_size: 2000,
    };
    for c in run_benchmark(&cfg).unwrap().cells {
        assert!(matches!(c.rejection_rate, Some(r) if r == 0.0 || r == 1.0));
    }
}

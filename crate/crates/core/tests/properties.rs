use kqic::baselines::km::kaplan_meier;
use kqic::baselines::minp::{minp_statistic, MinPVariant};
use kqic::baselines::wlr::{wlr_statistic, Weight};
use kqic::baselines::{truncation_permutation, two_sample_logrank};
use kqic::data::{load_csv, validate, write_csv, CsvSchema, TruncatedDataset};
use kqic::kernels::KernelSpec;
use kqic::kqic::{build_m, kqic_statistic, kqic_statistic_oracle};
use kqic::selection::{jn_matrix, variance_h1};
use kqic::simgen::{gen_dataset_with_rate, GeneratorModel, ModelKind};
use proptest::prelude::*;

fn dataset(max_n: usize) -> impl Strategy<Value = TruncatedDataset> {
    prop::collection::vec((0.0f64..5.0, 0.01f64..5.0, any::<bool>()), 3..max_n).prop_map(|v| {
        TruncatedDataset::from_triples(
            &v.into_iter()
                .map(|(x, g, d)| (x, x + g, d))
                .collect::<Vec<_>>(),
        )
    })
}

fn kernels() -> impl Strategy<Value = (KernelSpec, KernelSpec)> {
    prop_oneof![
        (0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b)| (
            KernelSpec::gaussian(a).unwrap(),
            KernelSpec::gaussian(b).unwrap()
        )),
        (0.1f64..3.0, 0.1f64..3.0)
            .prop_map(|(a, b)| (KernelSpec::imq(a).unwrap(), KernelSpec::imq(b).unwrap())),
        Just((KernelSpec::constant(), KernelSpec::constant())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_routes_match_oracle(d in dataset(25), (kx, ky) in kernels()) {
        let slow = kqic_statistic_oracle(&d, &kx, &ky).unwrap();
        prop_assert!((kqic_statistic(&d, &kx, &ky) - slow).abs() <= 1e-10);
        prop_assert!((build_m(&d, &kx, &ky).total() - slow).abs() <= 1e-10);
    }

    #[test]
    fn statistic_is_nonnegative(d in dataset(30), (kx, ky) in kernels()) {
        prop_assert!(kqic_statistic(&d, &kx, &ky) >= -1e-12);
    }

    #[test]
    fn statistic_ignores_subject_order(d in dataset(25), (kx, ky) in kernels(), rot in 0usize..25) {
        let n = d.len();
        let idx: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let a = kqic_statistic(&d, &kx, &ky);
        let b = kqic_statistic(&d.subset(&idx), &kx, &ky);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn jn_recombines_to_statistic(d in dataset(25), (kx, ky) in kernels()) {
        let j = jn_matrix(&d, &kx, &ky);
        let n2 = (d.len() * d.len()) as f64;
        prop_assert!((j.sum() / n2 - kqic_statistic(&d, &kx, &ky)).abs() <= 1e-10);
        prop_assert!(variance_h1(&j) >= 0.0);
    }

    #[test]
    fn wlr_bridge(d in dataset(30)) {
        let c = KernelSpec::constant();
        let n2 = (d.len() * d.len()) as f64;
        let l = wlr_statistic(&d, &Weight::Risk);
        prop_assert!(((l / n2).powi(2) - kqic_statistic(&d, &c, &c)).abs() <= 1e-10);
    }

    #[test]
    fn logrank_label_swap(a in dataset(12), b in dataset(12)) {
        let ab = two_sample_logrank(&a, &b).unwrap();
        let ba = two_sample_logrank(&b, &a).unwrap();
        prop_assert!((ab.u + ba.u).abs() <= 1e-10);
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-10);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn km_limits(times in prop::collection::vec(0.01f64..10.0, 1..30), probe in 0.0f64..11.0) {
        let none = kaplan_meier(&times, &vec![false; times.len()]).unwrap();
        prop_assert_eq!(none.eval(probe), 1.0);
        let all = kaplan_meier(&times, &vec![true; times.len()]).unwrap();
        let empirical = times.iter().filter(|&&t| t > probe).count() as f64 / times.len() as f64;
        prop_assert!((all.eval(probe) - empirical).abs() <= 1e-12);
    }

    #[test]
    fn permutation_keeps_validity_and_multiset(d in dataset(15), seed in any::<u64>(), stream in 0u64..100) {
        // identity is always valid, but small windows can still make acceptance rare
        if let Ok(p) = truncation_permutation(&d, seed, stream) {
            prop_assert!(p.samples().iter().all(|s| s.entry < s.observed));
            let mut a = d.entries();
            let mut b = p.entries();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            prop_assert_eq!(p.observed(), d.observed());
            prop_assert_eq!(p.events(), d.events());
            prop_assert_eq!(truncation_permutation(&d, seed, stream).unwrap(), p);
        }
    }

    #[test]
    fn minp_statistic_in_unit_interval(d in dataset(30), e in 1usize..4) {
        for v in [MinPVariant::MinP1, MinPVariant::MinP2] {
            let s = minp_statistic(&d, v, e);
            prop_assert!(s.minp > 0.0 && s.minp <= 1.0);
        }
    }

    #[test]
    fn validate_is_order_preserving_and_idempotent(d in dataset(20)) {
        let raw: Vec<(f64, f64, f64)> =
            d.samples().iter().map(|s| (s.entry, s.observed, if s.event { 1.0 } else { 0.0 })).collect();
        let v = validate(&raw).unwrap();
        prop_assert_eq!(&v, &d);
        let again: Vec<(f64, f64, f64)> =
            v.samples().iter().map(|s| (s.entry, s.observed, if s.event { 1.0 } else { 0.0 })).collect();
        prop_assert_eq!(validate(&again).unwrap(), v);
    }

    #[test]
    fn csv_round_trip(d in dataset(20)) {
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = load_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut buf2 = Vec::new();
        write_csv(&back, &mut buf2).unwrap();
        prop_assert_eq!(buf, buf2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_data_is_valid_and_deterministic(
        kind in prop_oneof![
            Just(ModelKind::Monotone),
            Just(ModelKind::VShape),
            Just(ModelKind::Periodic),
            Just(ModelKind::DependentCensoring),
            Just(ModelKind::NullIndependent),
        ],
        dep in 0.0f64..0.9,
        rate in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let m = GeneratorModel::new(kind, dep, 0.3).unwrap();
        let d = gen_dataset_with_rate(&m, rate, 40, seed).unwrap();
        prop_assert_eq!(d.len(), 40);
        prop_assert!(d.samples().iter().all(|s| s.entry >= 0.0 && s.entry < s.observed && s.observed.is_finite()));
        prop_assert_eq!(gen_dataset_with_rate(&m, rate, 40, seed).unwrap(), d);
    }
}

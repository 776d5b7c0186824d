use kqic::baselines::{mb_test, minp_test, wlr_test, MinPConfig, MinPVariant, WlrVariant};
use kqic::bootstrap::run_test;
use kqic::data::{load_csv, summarize, CsvSchema, DataError};
use kqic::kernels::KernelSpec;
use kqic::selection::{select_bandwidths, SelectionConfig};
use kqic::simgen::{gen_dataset_with_rate, GeneratorModel, ModelKind};

const SMALL: &str = "entry,time,event,group\n\
0.10,2.0,1,a\n0.40,1.5,0,a\n0.20,3.0,1,b\n0.80,2.2,1,b\n0.30,1.1,1,a\n0.50,4.0,0,b\n";

#[test]
fn csv_to_every_test() {
    let d = load_csv(SMALL.as_bytes(), &CsvSchema::default()).unwrap();
    assert_eq!(summarize(&d).n, 6);
    let g = KernelSpec::gaussian(0.5).unwrap();
    let out = run_test(&d, &g, &g, 99, 0.05, 1).unwrap();
    assert!(out.p_value > 0.0 && out.p_value <= 1.0);
    assert_eq!(out.replicates.len(), 99);
    for v in [WlrVariant::RiskWeight, WlrVariant::SurvivalCorrected] {
        assert!(wlr_test(&d, v, 99, 0.05, 1).unwrap().p_value <= 1.0);
    }
    assert!(mb_test(&d, 0.05, 1).unwrap().p_value <= 1.0);
    let cfg = MinPConfig {
        min_events: 1,
        permutations: 19,
    };
    assert!(
        minp_test(&d, MinPVariant::MinP1, &cfg, 0.05, 1)
            .unwrap()
            .p_value
            <= 1.0
    );
}

#[test]
fn bad_rows_carry_line_numbers() {
    let err = load_csv(
        "entry,time,event\n1,4,1\n5,5,0\n".as_bytes(),
        &CsvSchema::default(),
    )
    .unwrap_err();
    assert!(
        matches!(err, DataError::Validation { line: 3, .. }),
        "{err:?}"
    );
    let err = load_csv(
        "entry,time,event\n1,4,2\n".as_bytes(),
        &CsvSchema::default(),
    )
    .unwrap_err();
    assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err:?}");
}

#[test]
fn selection_then_test_on_held_out_part() {
    let m = GeneratorModel::new(ModelKind::Periodic, 3.0, 0.0).unwrap();
    let d = gen_dataset_with_rate(&m, 0.2, 300, 4).unwrap();
    let sel = select_bandwidths(
        &d,
        &SelectionConfig {
            seed: 9,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(sel.candidates.len(), 49);
    assert_eq!(sel.selection_size + sel.test_subset.len(), 300);
    assert_eq!(sel.selection_size, 60);
    let best = sel.proxy_values[sel.chosen_index];
    assert!(sel.proxy_values.iter().all(|&p| p <= best));
    let out = run_test(&sel.test_subset, &sel.chosen.0, &sel.chosen.1, 199, 0.05, 9).unwrap();
    assert_eq!(out.n, 240);
}

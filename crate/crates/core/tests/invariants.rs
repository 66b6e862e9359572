use std::f64::consts::PI;

use bell_wave::inequality::{chsh_from_shared, row_combination, OutcomeColumn, OutcomeDataset, Provenance};
use bell_wave::montecarlo::{empirical_correlation, signed_weight_event, Tally};
use bell_wave::source::Side;
use bell_wave::{
    bell_correlation, run_experiment, AnalyzerSetting, Branch, EmissionEvent, Estimator, Port, RunConfig,
};
use proptest::prelude::*;

fn config(estimator: Estimator, n_events: u64, seed: u64, settings: Vec<AnalyzerSetting>) -> RunConfig {
    RunConfig {
        n_events,
        seed,
        n_partitions: 4,
        estimator,
        settings,
    }
}

#[test]
fn estimators_agree_on_a_grid() {
    let settings: Vec<_> = (0..9)
        .map(|k| AnalyzerSetting::with_delta(0.3, k as f64 * PI / 8.0).unwrap())
        .collect();
    let sw = run_experiment(&config(Estimator::SignedWeight, 400_000, 21, settings.clone())).unwrap();
    let os = run_experiment(&config(Estimator::OutcomeSampling, 400_000, 22, settings.clone())).unwrap();
    for s in &settings {
        let a = empirical_correlation(&sw, s).unwrap();
        let b = empirical_correlation(&os, s).unwrap();
        let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(
            (a.value - b.value).abs() <= 3.0 * combined,
            "Δ = {}: {} vs {} (σ = {combined})",
            s.delta(),
            a.value,
            b.value
        );
    }
}

#[test]
fn standard_error_shrinks_as_inverse_root_n() {
    let s = AnalyzerSetting::with_delta(0.1, PI / 8.0).unwrap();
    for estimator in [Estimator::OutcomeSampling, Estimator::SignedWeight] {
        let se: Vec<f64> = [10_000, 100_000, 1_000_000]
            .iter()
            .map(|&n| {
                let rec = run_experiment(&config(estimator, n, 5, vec![s])).unwrap();
                empirical_correlation(&rec, &s).unwrap().std_error
            })
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 10f64.sqrt()).abs() < 0.2, "{estimator:?}: ratio {ratio}");
        }
    }
}

#[test]
fn partition_count_is_part_of_the_stream_definition() {
    let s = vec![AnalyzerSetting::new(0.2, 0.9).unwrap()];
    let mut a = config(Estimator::OutcomeSampling, 60_000, 3, s.clone());
    let b = a.clone();
    assert_eq!(run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
    a.n_partitions = 6;
    assert_ne!(run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
}

fn dataset_strategy() -> impl Strategy<Value = Vec<[i8; 4]>> {
    prop::collection::vec(prop::array::uniform4(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 })), 1..200)
}

fn to_dataset(rows: &[[i8; 4]]) -> OutcomeDataset {
    let columns = ["a", "a'", "b", "b'"]
        .iter()
        .enumerate()
        .map(|(k, name)| OutcomeColumn {
            name: name.to_string(),
            values: rows.iter().map(|r| r[k]).collect(),
        })
        .collect();
    OutcomeDataset::new(columns, Provenance::External).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shared_rows_never_exceed_two(rows in dataset_strategy()) {
        for r in &rows {
            prop_assert_eq!(row_combination(r[0], r[1], r[2], r[3]).abs(), 2);
        }
        let report = chsh_from_shared(&to_dataset(&rows)).unwrap();
        prop_assert!(report.chsh_value <= 2.0);
        prop_assert!(report.bound_satisfied);
    }

    #[test]
    fn outcome_counts_are_consistent(seed in any::<u64>(), t1 in 0.0..PI, t2 in 0.0..PI, parts in 1u32..6) {
        let n = 600 * u64::from(parts);
        let s = AnalyzerSetting::new(t1, t2).unwrap();
        let rec = run_experiment(&RunConfig {
            n_events: n,
            seed,
            n_partitions: parts,
            estimator: Estimator::OutcomeSampling,
            settings: vec![s],
        }).unwrap();
        let again = run_experiment(&RunConfig {
            n_events: n,
            seed,
            n_partitions: parts,
            estimator: Estimator::OutcomeSampling,
            settings: vec![s],
        }).unwrap();
        prop_assert_eq!(&rec, &again);
        let Tally::OutcomeSampling(t) = &rec.settings[0].tally else { panic!("wrong tally") };
        prop_assert_eq!(t.coincidences.iter().sum::<u64>(), n);
        prop_assert_eq!(t.singles_a.iter().sum::<u64>(), n);
        prop_assert_eq!(t.singles_b.iter().sum::<u64>(), n);
        prop_assert_eq!(t.same_side_a + t.same_side_b, 0);
        let r = &rec.settings[0];
        let total: f64 = Port::ALL.iter().map(|&p| r.singles_rate(Side::A, p)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_average_to_the_analytic_value(t1 in 0.0..PI, t2 in 0.0..PI, b in prop::bool::ANY) {
        // Average over a fine uniform phase grid reproduces the branch's
        // analytic correlation, and the correlation is the same for both branches.
        let branch = if b { Branch::Pair1H2V } else { Branch::Pair1V2H };
        let s = AnalyzerSetting::new(t1, t2).unwrap();
        let n = 64;
        let mut e = 0.0;
        for k in 0..n {
            let w = signed_weight_event(&EmissionEvent::new(branch, 2.0 * PI * k as f64 / n as f64), &s);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            e += w[0] + w[3] - w[1] - w[2];
        }
        prop_assert!((e / n as f64 - bell_correlation(&s)).abs() < 1e-12);
    }
}

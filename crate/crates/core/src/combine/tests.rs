use super::*;
use crate::data::{align, ActualSeries, TimeIndex};
use crate::loss::{loss_table, pinball};
use crate::verify::{grid_search, random_two_model_dataset, TwoModelProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(models: &[&[f64]], q: usize, y: &[f64], grid: QuantileGrid) -> AlignedDataset {
    // `models[n]` lists values time-major, level-minor.
    let t_len = y.len();
    let time = TimeIndex::regular(0, 3600, t_len).unwrap();
    let ids = (0..models.len()).map(|n| format!("m{n}")).collect();
    let panel = ForecastPanel::from_fn(ids, time.clone(), grid, |n, t, qi| models[n][t * q + qi]).unwrap();
    align(panel, ActualSeries::new(time, y.to_vec()).unwrap()).unwrap()
}

fn random_dataset(seed: u64, n: usize, t_len: usize, levels: &[f64]) -> AlignedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = QuantileGrid::new(levels.to_vec()).unwrap();
    let time = TimeIndex::regular(0, 3600, t_len).unwrap();
    let y: Vec<f64> = (0..t_len).map(|_| rng.random_range(80.0..120.0)).collect();
    let bias: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let ids = (0..n).map(|k| format!("m{k}")).collect();
    let noise: Vec<f64> = (0..n * t_len).map(|_| rng.random_range(-15.0..15.0)).collect();
    let panel = ForecastPanel::from_fn(ids, time.clone(), grid.clone(), |k, t, qi| {
        y[t] + bias[k] + noise[k * t_len + t] + 20.0 * (grid.level(qi) - 0.5)
    })
    .unwrap();
    align(panel, ActualSeries::new(time, y).unwrap()).unwrap()
}

fn opts() -> FitOptions {
    FitOptions::default()
}

fn fitted(method: MethodTag, data: &AlignedDataset) -> CombinationModel {
    fit(method, data, &opts()).unwrap()
}

#[test]
fn simple_average_example() {
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    let data = dataset(&[&[10.0], &[20.0]], 1, &[14.0], grid);
    let model = fitted(MethodTag::Sa, &data);
    assert_eq!(model.profile().unwrap().per_level, vec![vec![0.5, 0.5]]);
    assert_eq!(predict(&model, data.panel(), false).unwrap().value(0, 0), 15.0);
}

#[test]
fn naive_sorting_example() {
    let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
    let data = dataset(&[&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]], 3, &[2.0], grid);
    let model = fitted(MethodTag::Ns, &data);
    assert!(model.profile().is_none());
    assert_eq!(predict(&model, data.panel(), false).unwrap().row(0), &[1.0, 2.0, 3.0]);
}

#[test]
fn median_examples() {
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    let data = dataset(&[&[10.0], &[14.0], &[12.0]], 1, &[0.0], grid.clone());
    assert_eq!(
        predict(&fitted(MethodTag::Med, &data), data.panel(), false)
            .unwrap()
            .value(0, 0),
        12.0
    );
    let even = dataset(&[&[10.0], &[14.0], &[12.0], &[40.0]], 1, &[0.0], grid);
    assert_eq!(
        predict(&fitted(MethodTag::Med, &even), even.panel(), false)
            .unwrap()
            .value(0, 0),
        13.0
    );
}

#[test]
fn best_individual_picks_lowest_overall_loss() {
    let grid = QuantileGrid::new(vec![0.3, 0.7]).unwrap();
    let y = [10.0, 12.0, 11.0];
    // Model 1 is closest to the actuals at every cell.
    let m0: Vec<f64> = y.iter().flat_map(|v| [v + 5.0, v + 6.0]).collect();
    let m1: Vec<f64> = y.iter().flat_map(|v| [v - 0.5, v + 0.5]).collect();
    let m2: Vec<f64> = y.iter().flat_map(|v| [v - 3.0, v + 3.0]).collect();
    let data = dataset(&[&m0, &m1, &m2], 2, &y, grid);
    let model = fitted(MethodTag::Bi, &data);
    for w in &model.profile().unwrap().per_level {
        assert_eq!(w, &vec![0.0, 1.0, 0.0]);
    }
    let per_level = fit(
        MethodTag::Bi,
        &data,
        &FitOptions {
            bi_per_level: true,
            ..opts()
        },
    )
    .unwrap();
    let table = loss_table(data.panel(), data.actuals()).unwrap();
    for (qi, w) in per_level.profile().unwrap().per_level.iter().enumerate() {
        assert_eq!(w[table.best_model_at(qi)], 1.0);
    }
}

#[test]
fn inverse_loss_weights() {
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    // Losses per model: |1 - 0| * 0.5 = 0.5 and |3 - 0| * 0.5 = 1.5, ratio 1:3.
    let data = dataset(&[&[1.0], &[3.0]], 1, &[0.0], grid.clone());
    let table = loss_table(data.panel(), data.actuals()).unwrap();
    let w = weights_wa(&table, 0);
    assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);

    let equal = dataset(&[&[1.0], &[-1.0]], 1, &[0.0], grid.clone());
    assert_eq!(
        weights_wa(&loss_table(equal.panel(), equal.actuals()).unwrap(), 0),
        vec![0.5, 0.5]
    );

    let perfect = dataset(&[&[0.0], &[10.0]], 1, &[0.0], grid);
    assert_eq!(
        weights_wa(&loss_table(perfect.panel(), perfect.actuals()).unwrap(), 0),
        vec![1.0, 0.0]
    );
}

#[test]
fn averaged_view_matches_direct_mean() {
    let data = random_dataset(3, 3, 10, &[0.1, 0.4, 0.9]);
    let view = RegressorView::new(data.panel(), RegressorKind::Averaged);
    for t in 0..10 {
        let row = view.row(t, 1);
        for (n, &v) in row.iter().enumerate() {
            let direct = (0..3).map(|qi| data.panel().value(n, t, qi)).sum::<f64>() / 3.0;
            assert!((v - direct).abs() < 1e-12);
        }
    }
    assert_eq!(
        RegressorView::new(data.panel(), RegressorKind::All).row(4, 0),
        data.panel().all_at(4)
    );
}

#[test]
fn cqra_t_prefers_perfect_model() {
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..100.0)).collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 1000.0).collect();
    let data = dataset(&[&y, &shifted], 1, &y, grid);
    let fit = fit_cqra_t(&data, 0, &SolverOptions::default()).unwrap();
    assert!(fit.objective.abs() < 1e-9);
    assert!((fit.coefficients[0] - 1.0).abs() < 1e-9);
}

#[test]
fn duplicated_model_keeps_objective() {
    let two = random_dataset(8, 2, 40, &[0.3]);
    let p = two.panel();
    let three_panel = ForecastPanel::from_fn(
        vec!["a".into(), "b".into(), "b2".into()],
        p.time().clone(),
        p.grid().clone(),
        |n, t, qi| p.value(n.min(1), t, qi),
    )
    .unwrap();
    let three = align(three_panel, two.actuals().clone()).unwrap();
    let a = fit_cqra_t(&two, 0, &SolverOptions::default()).unwrap();
    let b = fit_cqra_t(&three, 0, &SolverOptions::default()).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-9 * a.objective);
}

#[test]
fn cqra_t_matches_grid_oracle() {
    let grid = QuantileGrid::new(vec![0.35]).unwrap();
    for seed in 0..10 {
        let data = random_two_model_dataset(seed, 50, &grid).unwrap();
        let fit = fit_cqra_t(&data, 0, &SolverOptions::default()).unwrap();
        let search = grid_search(&TwoModelProblem::at_level(&data, 0).unwrap(), 1e-4);
        let lp = fit.objective * 50.0;
        assert!(
            (lp - search.refined_min).abs() <= 1e-6 * search.refined_min,
            "seed {seed}"
        );
        assert!(lp <= search.grid_min * (1.0 + 1e-12));
    }
}

#[test]
fn shared_matches_grid_oracle_and_collapses_for_one_level() {
    let grid = QuantileGrid::new(vec![0.2, 0.8]).unwrap();
    for seed in 0..5 {
        let trial = crate::verify::shared_trial(seed, 20, &grid, 1e-4, &SolverOptions::default()).unwrap();
        assert!(trial.passed, "{trial:?}");
    }
    let single = random_dataset(4, 3, 30, &[0.6]);
    let shared = fit_cqra_shared(&single, &SolverOptions::default()).unwrap();
    let targeted = fit_cqra_t(&single, 0, &SolverOptions::default()).unwrap();
    assert!((shared.objective - targeted.objective).abs() <= 1e-9 * targeted.objective);
}

#[test]
fn shared_on_identical_models_equals_individual_loss() {
    let base = random_dataset(5, 1, 25, &[0.25, 0.75]);
    let p = base.panel();
    let panel = ForecastPanel::from_fn(
        vec!["a".into(), "b".into()],
        p.time().clone(),
        p.grid().clone(),
        |_, t, qi| p.value(0, t, qi),
    )
    .unwrap();
    let data = align(panel, base.actuals().clone()).unwrap();
    let shared = fit_cqra_shared(&data, &SolverOptions::default()).unwrap();
    let table = loss_table(data.panel(), data.actuals()).unwrap();
    let total = table.get(0, 0) + table.get(0, 1);
    assert!((shared.objective - total).abs() <= 1e-9 * total);
}

#[test]
fn unconstrained_recovers_exact_scaling() {
    let grid = QuantileGrid::new(vec![0.5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m0: Vec<f64> = (0..20).map(|_| rng.random_range(1.0..50.0)).collect();
    let m1: Vec<f64> = (0..20).map(|_| rng.random_range(1.0..50.0)).collect();
    let y: Vec<f64> = m0.iter().map(|v| 2.0 * v).collect();
    let data = dataset(&[&m0, &m1], 1, &y, grid);
    let fit = fit_qra(RegressorKind::Targeted, false, &data, 0, &opts()).unwrap();
    assert!(fit.objective.abs() < 1e-9);
    assert!((fit.coefficients[0] - 2.0).abs() < 1e-9 && fit.coefficients[1].abs() < 1e-9);
}

#[test]
fn relaxations_dominate() {
    for seed in 0..50 {
        let data = random_dataset(100 + seed, 3, 30, &[0.2, 0.5, 0.9]);
        for qi in 0..3 {
            let c = fit_qra(RegressorKind::Targeted, true, &data, qi, &opts()).unwrap();
            let u = fit_qra(RegressorKind::Targeted, false, &data, qi, &opts()).unwrap();
            let ca = fit_qra(RegressorKind::All, true, &data, qi, &opts()).unwrap();
            let ua = fit_qra(RegressorKind::All, false, &data, qi, &opts()).unwrap();
            assert!(u.objective <= c.objective + 1e-9, "seed {seed}");
            assert!(ca.objective <= c.objective + 1e-9, "seed {seed}");
            assert!(ua.objective <= u.objective + 1e-9, "seed {seed}");
            let best = (0..3)
                .map(|n| {
                    let col: Vec<f64> = (0..30).map(|t| data.panel().value(n, t, qi)).collect();
                    crate::loss::mean_pinball(&col, data.actuals().values(), data.panel().grid().level(qi))
                })
                .fold(f64::INFINITY, f64::min);
            assert!(c.objective <= best + 1e-9);
        }
    }
}

#[test]
fn auxiliary_variables_equal_pinball() {
    let data = random_dataset(9, 4, 60, &[0.1, 0.5, 0.9]);
    for qi in 0..3 {
        let f = fit_cqra_t(&data, qi, &SolverOptions::default()).unwrap();
        let level = data.panel().grid().level(qi);
        for t in 0..60 {
            let p: f64 = data
                .panel()
                .targeted_at(t, qi)
                .zip(&f.coefficients)
                .map(|(a, w)| a * w)
                .sum();
            assert!((f.losses[t] - pinball(p, data.actuals().values()[t], level)).abs() <= 1e-8);
        }
    }
}

#[test]
fn constrained_weights_survive_rescaling() {
    let data = random_dataset(10, 3, 40, &[0.3, 0.7]);
    let scaled = align(
        data.panel().map_values(|v| 3.5 * v).unwrap(),
        data.actuals().map_values(|v| 3.5 * v).unwrap(),
    )
    .unwrap();
    for method in [
        MethodTag::CqraT,
        MethodTag::CqraA,
        MethodTag::CqraE,
        MethodTag::QraT,
        MethodTag::QraE,
    ] {
        let a = fitted(method, &data);
        let b = fitted(method, &scaled);
        for qi in 0..2 {
            let (oa, ob) = (a.diagnostics().in_sample[qi], b.diagnostics().in_sample[qi]);
            assert!((ob - 3.5 * oa).abs() <= 1e-7 * ob, "{method}");
        }
        if a.profile().unwrap().constrained {
            let reused = predict(&a, scaled.panel(), false).unwrap();
            let scores = crate::loss::level_scores(&reused, scaled.actuals()).unwrap();
            for (score, fitted) in scores.iter().zip(&b.diagnostics().in_sample) {
                assert!((score - fitted).abs() <= 1e-7 * score, "{method}");
            }
        }
    }
}

#[test]
fn prediction_is_linear_in_the_panel() {
    let d1 = random_dataset(11, 3, 20, &[0.25, 0.5, 0.75]);
    let d2 = random_dataset(12, 3, 20, &[0.25, 0.5, 0.75]);
    let sum_panel = ForecastPanel::new(
        d1.panel().model_ids().to_vec(),
        d1.panel().time().clone(),
        d1.panel().grid().clone(),
        d1.panel()
            .values()
            .iter()
            .zip(d2.panel().values())
            .map(|(a, b)| a + b)
            .collect(),
    )
    .unwrap();
    for method in [
        MethodTag::Sa,
        MethodTag::Wa,
        MethodTag::Bi,
        MethodTag::CqraT,
        MethodTag::CqraA,
        MethodTag::QraE,
    ] {
        let model = fitted(method, &d1);
        let a = predict(&model, d1.panel(), false).unwrap();
        let b = predict(&model, d2.panel(), false).unwrap();
        let s = predict(&model, &sum_panel, false).unwrap();
        for i in 0..a.values().len() {
            let expect = a.values()[i] + b.values()[i];
            assert!(
                (s.values()[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()),
                "{method}"
            );
        }
    }
}

#[test]
fn every_method_fits_and_predicts() {
    let data = random_dataset(13, 3, 40, &[0.1, 0.5, 0.9]);
    for method in MethodTag::ALL {
        let model = fitted(method, &data);
        assert_eq!(model.method(), method);
        assert_eq!(model.diagnostics().in_sample.len(), 3);
        let raw = predict(&model, data.panel(), false).unwrap();
        let sorted = predict(&model, data.panel(), true).unwrap();
        assert!(sorted.is_rearranged());
        assert_eq!(crate::rearrange::crossing_count(&sorted), 0);
        assert_eq!(raw.values().len(), sorted.values().len());
    }
}

#[test]
fn intercept_option_for_unconstrained_fits() {
    let data = random_dataset(14, 2, 40, &[0.5]);
    let with = fit(
        MethodTag::QraT,
        &data,
        &FitOptions {
            intercept: true,
            ..opts()
        },
    )
    .unwrap();
    let without = fitted(MethodTag::QraT, &data);
    assert!(with.profile().unwrap().intercept_per_level.is_some());
    assert!(without.profile().unwrap().intercept_per_level.is_none());
    assert!(with.diagnostics().in_sample[0] <= without.diagnostics().in_sample[0] + 1e-9);
    let constrained = fit(
        MethodTag::CqraT,
        &data,
        &FitOptions {
            intercept: true,
            ..opts()
        },
    )
    .unwrap();
    assert!(constrained.profile().unwrap().intercept_per_level.is_none());
}

#[test]
fn predict_rejects_foreign_panels() {
    let data = random_dataset(15, 3, 10, &[0.5]);
    let model = fitted(MethodTag::Sa, &data);
    let other = random_dataset(15, 2, 10, &[0.5]);
    assert!(matches!(predict(&model, other.panel(), false), Err(Error::Contract(_))));
    let other_grid = random_dataset(15, 3, 10, &[0.4]);
    assert!(matches!(
        predict(&model, other_grid.panel(), false),
        Err(Error::Contract(_))
    ));
}

#[test]
fn sequential_and_parallel_fits_agree() {
    let data = random_dataset(16, 4, 50, &[0.1, 0.3, 0.5, 0.7, 0.9]);
    let seq = fit(
        MethodTag::CqraT,
        &data,
        &FitOptions {
            execution: Execution::Sequential,
            ..opts()
        },
    )
    .unwrap();
    let par = fitted(MethodTag::CqraT, &data);
    assert_eq!(seq, par);
}

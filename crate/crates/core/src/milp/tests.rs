use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataset::Dataset;
use crate::model::LinearModel;
use crate::multiplicity::{build_pool, filter_level_set, LevelSetSpec, ThresholdMode};
use crate::numeric::{sigmoid, softplus};
use crate::trainer::{train_baseline, TrainConfig};
use crate::MetricSpec;

/// Best objective over the vertices of a 2-variable polytope, or `None`
/// when it is empty.
fn vertex_oracle(model: &MilpModel) -> Option<f64> {
    // Every constraint as a . x <= b.
    let mut halfspaces: Vec<([f64; 2], f64)> = Vec::new();
    for (j, v) in model.vars.iter().enumerate() {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        halfspaces.push((e, v.upper));
        halfspaces.push(([-e[0], -e[1]], -v.lower));
    }
    for r in &model.rows {
        let mut a = [0.0; 2];
        for &(j, c) in &r.coefs {
            a[j] = c;
        }
        match r.sense {
            RowSense::Le => halfspaces.push((a, r.rhs)),
            RowSense::Ge => halfspaces.push(([-a[0], -a[1]], -r.rhs)),
            RowSense::Eq => {
                halfspaces.push((a, r.rhs));
                halfspaces.push(([-a[0], -a[1]], -r.rhs));
            }
        }
    }
    let sign = if model.maximize { 1.0 } else { -1.0 };
    let mut best: Option<f64> = None;
    for p in 0..halfspaces.len() {
        for q in p + 1..halfspaces.len() {
            let (a, b) = halfspaces[p];
            let (c, d) = halfspaces[q];
            let det = a[0] * c[1] - a[1] * c[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(b * c[1] - a[1] * d) / det, (a[0] * d - b * c[0]) / det];
            if halfspaces.iter().all(|(h, r)| h[0] * x[0] + h[1] * x[1] <= r + 1e-9) {
                let v = sign * model.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best.map(|b| sign * b)
}

fn random_lp(seed: u64) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MilpModel::new("LP", rng.random_bool(0.5));
    for j in 0..2 {
        let lo = rng.random_range(-5.0..0.0);
        let hi = rng.random_range(0.5..5.0);
        model.add_var(format!("X{j}"), lo, hi, VarKind::Continuous, rng.random_range(-3.0..3.0));
    }
    for k in 0..rng.random_range(1..5) {
        let sense = match rng.random_range(0..3) {
            0 => RowSense::Le,
            1 => RowSense::Ge,
            _ => RowSense::Eq,
        };
        let coefs = vec![(0, rng.random_range(-2.0..2.0)), (1, rng.random_range(-2.0..2.0))];
        model.add_row(Row::new(format!("R{k}"), sense, rng.random_range(-3.0..3.0), coefs));
    }
    model
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut feasible = 0;
    for seed in 0..300 {
        let model = random_lp(seed);
        let oracle = vertex_oracle(&model);
        let got = lp_solve(&model, &[]).unwrap();
        match (oracle, got) {
            (None, None) => {}
            (Some(o), Some(sol)) => {
                feasible += 1;
                assert!((o - sol.objective).abs() < 1e-9, "seed {seed}: oracle {o}, lp {}", sol.objective);
                for r in &model.rows {
                    assert!(r.violation(&sol.x) < 1e-8, "seed {seed}: row {} violated", r.name);
                }
            }
            (o, g) => panic!("seed {seed}: oracle {o:?} vs lp {g:?}"),
        }
    }
    assert!(feasible > 50);
}

#[test]
fn lp_with_one_cut_matches_oracle() {
    let mut model = MilpModel::new("ONE", true);
    model.add_var("A", -2.0, 3.0, VarKind::Continuous, 1.0);
    model.add_var("B", -1.0, 4.0, VarKind::Continuous, 2.0);
    model.add_row(Row::new("CUT0", RowSense::Le, 2.5, vec![(0, 1.0), (1, 1.5)]));
    let sol = lp_solve(&model, &[]).unwrap().unwrap();
    assert!((sol.objective - vertex_oracle(&model).unwrap()).abs() < 1e-9);
}

fn noisy_data(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut labels: Vec<i8> = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum::<f64>() * 1.5;
            if rng.random::<f64>() < sigmoid(s) { 1 } else { -1 }
        })
        .collect();
    labels[0] = 1;
    labels[1] = -1;
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::from_rows(&rows, labels, names, None).unwrap()
}

/// Draws instances until the baseline sits well inside the default box.
fn instance(n: usize, d: usize, seed: u64) -> (Dataset, LinearModel) {
    let mut s = seed;
    loop {
        let data = noisy_data(n, d, s);
        let base = train_baseline(&data, &TrainConfig::default()).unwrap().model;
        if base.coefficients().iter().all(|c| c.abs() < 4.0) {
            return (data, base);
        }
        s += 10_000;
    }
}

#[test]
fn relaxation_without_cuts_reaches_every_active_example() {
    let rows = vec![vec![0.2], vec![-0.3], vec![0.1], vec![-0.1]];
    let data = Dataset::from_rows(&rows, vec![1, -1, -1, 1], vec!["x".into()], None).unwrap();
    let base = train_baseline(&data, &TrainConfig::default()).unwrap().model;
    let mut problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
    problem.cuts.clear();
    let (model, layout) = problem.to_model(false);
    let sol = lp_solve(&model, &[]).unwrap().unwrap();
    assert!((sol.objective - 4.0).abs() < 1e-9);
    for v in &layout.indicators {
        assert!((sol.x[v.deviation] - 1.0).abs() < 1e-9);
    }
    let fixings: Vec<(usize, f64)> = model.binaries().map(|j| (j, 0.0)).collect();
    assert_eq!(lp_solve(&model, &fixings).unwrap().unwrap().objective, 0.0);
}

#[test]
fn huge_epsilon_moves_every_example() {
    let (data, base) = instance(6, 1, 11);
    let problem = DiscrepancyProblem::build(&data, &base, 1e6, 0.2, None).unwrap();
    assert!(problem.thresholds.iter().all(|t| t.active_plus && t.active_minus));
    let res = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert_eq!(res.objective, 6);
    // Independent check: some box corner moves every example.
    let b = problem.coef_box.upper[0];
    let corner_moves = |w: &[f64]| problem.deviation_count(w);
    let best = [[b, b], [b, -b], [-b, b], [-b, -b]]
        .iter()
        .map(|w| corner_moves(w))
        .max()
        .unwrap();
    assert_eq!(best, 6);
}

/// Exhaustive search: non-intercept coefficients on a grid of step `step`,
/// intercept solved exactly over its loss-feasible interval. Every point it
/// evaluates is loss feasible, so its count never exceeds the optimum.
pub(crate) fn grid_oracle(problem: &DiscrepancyProblem, step: f64) -> usize {
    let train = problem.train();
    let eval = problem.eval();
    let dim = problem.dim();
    let bound = problem.loss_bound();
    let (lo0, hi0) = (problem.coef_box.lower[0], problem.coef_box.upper[0]);
    let n = train.n() as f64;

    let mut best = 0;
    let mut rest = vec![0.0; dim - 1];
    let steps: Vec<usize> = (1..dim)
        .map(|j| ((problem.coef_box.upper[j] - problem.coef_box.lower[j]) / step).floor() as usize)
        .collect();
    let mut idx = vec![0usize; dim - 1];
    loop {
        for j in 0..dim - 1 {
            rest[j] = problem.coef_box.lower[j + 1] + idx[j] as f64 * step;
        }
        let offsets: Vec<f64> = train
            .rows()
            .map(|x| x[1..].iter().zip(&rest).map(|(a, b)| a * b).sum())
            .collect();
        let loss = |w0: f64| -> f64 {
            offsets
                .iter()
                .enumerate()
                .map(|(i, c)| softplus(-train.label(i) * (w0 + c)))
                .sum::<f64>()
                / n
        };
        let slope = |w0: f64| -> f64 {
            offsets
                .iter()
                .enumerate()
                .map(|(i, c)| -train.label(i) * sigmoid(-train.label(i) * (w0 + c)))
                .sum::<f64>()
        };
        // Minimizer of the convex 1-d loss by bisection on the slope.
        let (mut a, mut b) = (lo0, hi0);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if slope(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let m = 0.5 * (a + b);
        if loss(m) <= bound {
            let edge = |outer: f64| -> f64 {
                if loss(outer) <= bound {
                    return outer;
                }
                let (mut inside, mut out) = (m, outer);
                for _ in 0..60 {
                    let mid = 0.5 * (inside + out);
                    if loss(mid) <= bound {
                        inside = mid;
                    } else {
                        out = mid;
                    }
                }
                inside
            };
            let (left, right) = (edge(lo0), edge(hi0));
            let eval_offsets: Vec<f64> = eval
                .rows()
                .map(|x| x[1..].iter().zip(&rest).map(|(a, b)| a * b).sum())
                .collect();
            let mut points = vec![left, right];
            for (t, c) in problem.thresholds.iter().zip(&eval_offsets) {
                for v in [t.v_plus, t.v_minus] {
                    if v.is_finite() {
                        let p = v - c;
                        if left < p && p < right {
                            points.push(p);
                        }
                    }
                }
            }
            for p in points {
                let mut w = vec![p];
                w.extend_from_slice(&rest);
                best = best.max(problem.deviation_count(&w));
            }
        }
        // Advance the odometer.
        let mut k = 0;
        loop {
            if k == dim - 1 {
                return best;
            }
            idx[k] += 1;
            if idx[k] <= steps[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn branch_and_bound_matches_grid_oracle_on_tiny_problems() {
    for seed in 0..6 {
        let (data, base) = instance(6, 1, seed);
        let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
        let res = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
        let oracle = grid_oracle(&problem, 0.01);
        assert_eq!(res.status, SolveStatus::Optimal, "seed {seed}");
        assert!(res.objective >= oracle, "seed {seed}: bnb {} < oracle {oracle}", res.objective);
        assert!(res.objective <= oracle + 1, "seed {seed}: bnb {} vs oracle {oracle}", res.objective);
        let w = res.incumbent.as_ref().unwrap().coefficients();
        assert!(problem.loss(w) <= problem.loss_bound() + 1e-9);
        assert!(res.best_bound >= res.objective as f64);
        assert_eq!(res.gap, 0.0);
    }
}

#[test]
fn relaxation_cut_mode_agrees() {
    for seed in 0..4 {
        let (data, base) = instance(7, 2, seed + 50);
        let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
        let plain = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
        let cfg = MilpConfig {
            cut_mode: CutMode::Relaxation,
            ..MilpConfig::default()
        };
        let eager = solve_discrepancy(&problem, &cfg).unwrap();
        assert_eq!(plain.objective, eager.objective, "seed {seed}");
    }
}

#[test]
fn aggregation_does_not_change_optimum() {
    let rows = vec![vec![0.5], vec![0.5], vec![-0.4], vec![0.9], vec![-0.4], vec![0.1]];
    let data = Dataset::from_rows(&rows, vec![1, -1, -1, 1, 1, -1], vec!["x".into()], None).unwrap();
    let base = train_baseline(&data, &TrainConfig::default()).unwrap().model;
    let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
    let merged = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
    let cfg = MilpConfig {
        aggregate_duplicates: false,
        ..MilpConfig::default()
    };
    let plain = solve_discrepancy(&problem, &cfg).unwrap();
    assert_eq!(merged.objective, plain.objective);
}

#[test]
fn every_intermediate_model_is_loss_feasible_and_cuts_stay_valid() {
    let (data, base) = instance(8, 2, 7);
    let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
    let res = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
    assert!(!res.intermediate_models.is_empty());
    for m in &res.intermediate_models {
        assert!(problem.loss(m.coefficients()) <= problem.loss_bound() + 1e-9);
        for cut in &res.cuts {
            assert!(cut.violation(m.coefficients()) <= 1e-9);
        }
    }
}

#[test]
fn node_limit_reports_bound_and_gap() {
    let (data, base) = instance(8, 2, 3);
    let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
    let cfg = MilpConfig {
        node_limit: Some(1),
        ..MilpConfig::default()
    };
    let res = solve_discrepancy(&problem, &cfg).unwrap();
    if res.status == SolveStatus::NodeLimit {
        assert!(res.best_bound >= res.objective as f64);
        let expected = (res.best_bound - res.objective as f64) / (res.objective as f64).max(1.0);
        assert_eq!(res.gap, expected);
    } else {
        assert_eq!(res.status, SolveStatus::Optimal);
    }
}

#[test]
fn harvest_extends_pool_and_bounds_hold() {
    let (data, base) = instance(8, 1, 21);
    let pool = build_pool(&data, &base, &ThresholdMode::aligned(0.2), &TrainConfig::default()).unwrap();
    let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
    let res = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();

    let empty = BnbResult {
        intermediate_models: Vec::new(),
        ..res.clone()
    };
    let same = harvest_candidates(&empty, pool.clone(), &data, &data).unwrap();
    assert_eq!(same, pool);

    let before = pool.len();
    let grown = harvest_candidates(&res, pool, &data, &data).unwrap();
    assert!(grown.len() > before);
    let spec = LevelSetSpec::for_pool(&grown, MetricSpec::log_loss(), 0.05).unwrap();
    let members = filter_level_set(&grown, &spec);
    for idx in before..grown.len() {
        assert!(members.contains(&idx), "harvested model {idx} outside the level set");
    }
    let amb = crate::multiplicity::ambiguity(&grown, &spec, 0.2).unwrap();
    assert!(res.discrepancy() <= amb.value + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_equivalence_on_small_instances(seed in 0u64..10_000, n in 4usize..=8) {
        let (data, base) = instance(n, 1, seed);
        let problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
        let res = solve_discrepancy(&problem, &MilpConfig::default()).unwrap();
        let oracle = grid_oracle(&problem, 0.01);
        prop_assert!(res.objective >= oracle);
        let w = res.incumbent.unwrap();
        prop_assert!(problem.loss(w.coefficients()) <= problem.loss_bound() + 1e-9);
    }

    #[test]
    fn mps_round_trip(seed in 0u64..10_000) {
        let (data, base) = instance(6, 2, seed);
        let mut problem = DiscrepancyProblem::build(&data, &base, 0.05, 0.2, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            problem.cuts.push(problem.cut_at(&w).1);
        }
        let (model, _) = problem.to_model(false);
        let back = parse_mps(&to_mps_string(&model)).unwrap();
        prop_assert_eq!(back, model);
    }
}

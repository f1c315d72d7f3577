mod common;

use adamkl::kernels::{compute_base_kernels, KernelKind, KernelMatrix, KernelSpec};
use adamkl::svm::{decision_value, predict_multiclass, solve_svm_dual, BinaryModel, SmoOptions};
use ndarray::Array2;

use common::{check_kkt, qp_oracle, random_instance, random_points, rng};

#[test]
fn smo_matches_qp_oracle_on_random_instances() {
    let opts = SmoOptions::default();
    let mut worst: f64 = 0.0;
    for seed in 0..40 {
        let (k, y, c) = random_instance(seed);
        let sol = solve_svm_dual(k.view(), &y, c, &opts).unwrap();
        let (_, reference) = qp_oracle(k.view(), &y, c, 20_000);
        worst = worst.max((sol.objective - reference).abs());
        check_kkt(k.view(), &y, &sol, 10.0 * opts.tol);
    }
    assert!(worst < 1e-4, "worst objective gap {worst}");
}

#[test]
fn rbf_ten_points_c_one() {
    let mut r = rng(77);
    let x = random_points(&mut r, 10, 2, 1.5);
    let y: Vec<f64> = (0..10).map(|i| if x[[i, 0]] + 0.3 * x[[i, 1]] > 0.0 { 1.0 } else { -1.0 }).collect();
    assert!(y.contains(&1.0) && y.contains(&-1.0));
    let spec = KernelSpec::new(KernelKind::Gaussian, 1.0).unwrap();
    let k = compute_base_kernels(x.view(), &(0..10).collect::<Vec<_>>(), &[spec]).unwrap().remove(0);
    let sol = solve_svm_dual(k.values().view(), &y, 1.0, &SmoOptions::default()).unwrap();
    let (_, reference) = qp_oracle(k.values().view(), &y, 1.0, 50_000);
    assert!((sol.objective - reference).abs() < 1e-4);
}

#[test]
fn solver_is_deterministic() {
    let (k, y, c) = random_instance(5);
    let a = solve_svm_dual(k.view(), &y, c, &SmoOptions::default()).unwrap();
    let b = solve_svm_dual(k.view(), &y, c, &SmoOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decision_is_linear_in_the_kernel_weights() {
    let mut r = rng(9);
    let x = random_points(&mut r, 8, 2, 1.0);
    let ids: Vec<usize> = (0..8).collect();
    let specs: Vec<KernelSpec> = [KernelKind::Gaussian, KernelKind::Laplacian]
        .into_iter()
        .map(|k| KernelSpec::new(k, 0.8).unwrap())
        .collect();
    let grams = compute_base_kernels(x.view(), &ids, &specs).unwrap();
    let d = [0.3, 0.7];
    let combined = adamkl::kernels::combined_kernel(&d, &grams).unwrap();
    let train: Vec<usize> = (0..6).collect();
    let y = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let block = Array2::from_shape_fn((6, 6), |(i, j)| combined.values()[[i, j]]);
    let sol = solve_svm_dual(block.view(), &y, 2.0, &SmoOptions::default()).unwrap();
    let model = BinaryModel::new(sol.clone(), y.clone(), 0).unwrap();
    for x_pos in 6..8 {
        let rows = Array2::from_shape_fn((2, 6), |(m, j)| grams[m].values()[[train[j], x_pos]]);
        let via_rows = decision_value(&model, &d, rows.view()).unwrap();
        let single_row = Array2::from_shape_fn((1, 6), |(_, j)| combined.values()[[train[j], x_pos]]);
        let via_combined = decision_value(&model, &[1.0], single_row.view()).unwrap();
        assert!((via_rows - via_combined).abs() < 1e-12);
    }
}

#[test]
fn multiclass_prediction_agrees_with_brute_force() {
    let mut r = rng(21);
    let classes = 5;
    let n = 15;
    let x = random_points(&mut r, n + 6, 2, 3.0);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let spec = KernelSpec::new(KernelKind::Gaussian, 0.5).unwrap();
    let all: Vec<usize> = (0..n + 6).collect();
    let gram: KernelMatrix = compute_base_kernels(x.view(), &all, &[spec]).unwrap().remove(0);
    let block = Array2::from_shape_fn((n, n), |(i, j)| gram.values()[[i, j]]);
    let models: Vec<BinaryModel> = (0..classes)
        .map(|c| {
            let y = adamkl::svm::one_vs_all_labels(&labels, c);
            let sol = solve_svm_dual(block.view(), &y, 1.0, &SmoOptions::default()).unwrap();
            BinaryModel::new(sol, y, c).unwrap()
        })
        .collect();
    for x_pos in n..n + 6 {
        let rows = Array2::from_shape_fn((1, n), |(_, j)| gram.values()[[j, x_pos]]);
        let predicted = predict_multiclass(&models, &[1.0], rows.view()).unwrap();
        let values: Vec<f64> = models
            .iter()
            .map(|m| {
                common::decision_reference(
                    &[gram.values().clone()],
                    &[1.0],
                    &m.dual.alpha,
                    &m.labels,
                    m.dual.b,
                    &(0..n).collect::<Vec<_>>(),
                    x_pos,
                )
            })
            .collect();
        let mut best = 0;
        for c in 1..classes {
            if values[c] > values[best] {
                best = c;
            }
        }
        assert_eq!(predicted, best);
    }
}

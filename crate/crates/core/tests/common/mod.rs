//! Independent reference implementations used only by the test suites.
//!
//! Every oracle here recomputes a quantity from its textbook definition
//! (explicit matrices, dense grids, generic QP iterations) without calling
//! into the library routine it checks.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use adamkl::kernels::{compute_base_kernels, FormVariant, KernelKind, KernelSpec};
use adamkl::svm::DualSolution;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0ac1e)
}

pub fn random_points(rng: &mut impl Rng, n: usize, d: usize, spread: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-spread..spread))
}

/// Kernel value straight from the closed forms, independent of the library.
pub fn kernel_reference(kind: KernelKind, variant: FormVariant, gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let d = d2.sqrt();
    match (kind, variant) {
        (KernelKind::Gaussian, _) => (-gamma * d2).exp(),
        (KernelKind::Laplacian, _) => (-(gamma * d2).sqrt()).exp(),
        (KernelKind::InverseSquareDistance, FormVariant::Rational) => 1.0 / (1.0 + gamma * d2),
        (KernelKind::InverseDistance, FormVariant::Rational) => 1.0 / (1.0 + (gamma * d2).sqrt()),
        (KernelKind::InverseSquareDistance, FormVariant::AsPrinted) => (1.0 / (1.0 + gamma * d2)).exp(),
        (KernelKind::InverseDistance, FormVariant::AsPrinted) => (1.0 / (1.0 + gamma.sqrt() * d)).exp(),
    }
}

pub fn gram_reference(spec: &KernelSpec, x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        kernel_reference(
            spec.kind(),
            spec.variant(),
            spec.gamma(),
            x.row(i).as_slice().unwrap(),
            x.row(j).as_slice().unwrap(),
        )
    })
}

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn min_eigenvalue(a: ArrayView2<f64>) -> f64 {
    SymmetricEigen::new(to_dmatrix(a)).eigenvalues.min()
}

pub fn max_eigenvalue(a: ArrayView2<f64>) -> f64 {
    SymmetricEigen::new(to_dmatrix(a)).eigenvalues.max()
}

/// `Σ_ij L_ij K_ij` with the coefficient matrix `L` built explicitly.
/// `source`/`target` are positions into `k`.
pub fn mmd_explicit_l(k: ArrayView2<f64>, source: &[usize], target: &[usize]) -> f64 {
    let n = k.nrows();
    let (ns, nt) = (source.len() as f64, target.len() as f64);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &i in source {
        for &j in source {
            l[(i, j)] = 1.0 / (ns * ns);
        }
        for &j in target {
            l[(i, j)] = -1.0 / (ns * nt);
            l[(j, i)] = -1.0 / (ns * nt);
        }
    }
    for &i in target {
        for &j in target {
            l[(i, j)] = 1.0 / (nt * nt);
        }
    }
    let km = to_dmatrix(k);
    (&km * &l).trace()
}

/// `‖mean φ(S) − mean φ(T)‖²` expanded as explicit pairwise kernel sums
/// over the raw samples.
pub fn mmd_mean_embedding(
    f: impl Fn(&[f64], &[f64]) -> f64,
    source: &[Vec<f64>],
    target: &[Vec<f64>],
) -> f64 {
    let avg = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += f(x, y);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    avg(source, source) + avg(target, target) - 2.0 * avg(source, target)
}

/// Euclidean projection onto `{yᵀx = 0, 0 ≤ x ≤ C}` via bisection on the shift.
fn project_box_hyperplane(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let clip = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { clip(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

pub fn dual_objective(k: ArrayView2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximizes the SVM dual by accelerated projected gradient ascent onto
/// `{yᵀα = 0, 0 ≤ α ≤ C}`. Returns `(α, objective)`.
pub fn qp_oracle(k: ArrayView2<f64>, y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * k[[i, j]]);
    let lip = max_eigenvalue(q.view()).max(1e-12);
    let step = 1.0 / lip;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[[i, j]] * a[j]).sum::<f64>())
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let g = grad(&z);
        let moved: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a + step * b).collect();
        let next = project_box_hyperplane(&moved, y, c);
        let residual = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < 1e-13 {
            x = next;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        z = next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = next;
        t = t_next;
    }
    let obj = dual_objective(k, y, &x);
    (x, obj)
}

/// `(d'k)² − λ p'd` minimized over `d = (t, 1 − t)` on a uniform grid.
pub fn d_grid_min(k: &[f64], p: &[f64], lambda: f64, step: f64) -> f64 {
    let steps = (1.0 / step).round() as usize;
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let kd = t * k[0] + (1.0 - t) * k[1];
            kd * kd - lambda * (t * p[0] + (1.0 - t) * p[1])
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn d_objective(d: &[f64], k: &[f64], p: &[f64], lambda: f64) -> f64 {
    let kd: f64 = d.iter().zip(k).map(|(a, b)| a * b).sum();
    kd * kd - lambda * d.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
}

/// Closest point to `v` among simplex points with coordinates on a
/// `1/resolution` lattice (three dimensions).
pub fn simplex_grid_nearest(v: &[f64; 3], resolution: usize) -> ([f64; 3], f64) {
    let mut best = ([0.0; 3], f64::INFINITY);
    for i in 0..=resolution {
        for j in 0..=resolution - i {
            let p = [
                i as f64 / resolution as f64,
                j as f64 / resolution as f64,
                (resolution - i - j) as f64 / resolution as f64,
            ];
            let dist: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (p, dist);
            }
        }
    }
    best
}

/// `Σ_m d_m Σ_j α_j y_j K_m(x_j, x) + b` from full Gram matrices.
pub fn decision_reference(
    kernels: &[Array2<f64>],
    d: &[f64],
    alpha: &[f64],
    y: &[f64],
    b: f64,
    labeled_pos: &[usize],
    x_pos: usize,
) -> f64 {
    let mut v = b;
    for (m, km) in kernels.iter().enumerate() {
        for (j, &pj) in labeled_pos.iter().enumerate() {
            v += d[m] * alpha[j] * y[j] * km[[pj, x_pos]];
        }
    }
    v
}

/// Random binary problem with `n ≤ 10` points and both labels present.
pub fn random_instance(seed: u64) -> (Array2<f64>, Vec<f64>, f64) {
    let mut r = rng(seed);
    let n = r.random_range(2..=10);
    let x = random_points(&mut r, n, 3, 2.0);
    let mut y: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let gamma = r.random_range(0.1..2.0);
    let kind = KernelKind::ALL[r.random_range(0..4)];
    let spec = KernelSpec::with_variant(kind, gamma, FormVariant::Rational).unwrap();
    let ids: Vec<usize> = (0..n).collect();
    let k = compute_base_kernels(x.view(), &ids, &[spec]).unwrap().remove(0).into_values();
    let c = r.random_range(0.1..10.0);
    (k, y, c)
}

/// First violated box, equality or KKT condition (within `tol`) of a dual solution.
pub fn kkt_violation(k: ArrayView2<f64>, y: &[f64], sol: &DualSolution, tol: f64) -> Option<String> {
    let n = y.len();
    let c = sol.c;
    let sum: f64 = sol.alpha.iter().zip(y).map(|(a, yi)| a * yi).sum();
    if sum.abs() >= 1e-9 * c.max(1.0) * n as f64 {
        return Some(format!("yᵀα = {sum}"));
    }
    let floor = 1e-8 * c;
    for i in 0..n {
        let a = sol.alpha[i];
        if !(0.0..=c).contains(&a) {
            return Some(format!("α_{i} = {a} outside [0, {c}]"));
        }
        let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k[[i, j]]).sum::<f64>() + sol.b;
        let margin = y[i] * f;
        let ok = if a <= floor {
            margin >= 1.0 - tol
        } else if a >= c - floor {
            margin <= 1.0 + tol
        } else {
            (margin - 1.0).abs() <= tol
        };
        if !ok {
            return Some(format!("α_{i} = {a} with margin {margin}"));
        }
    }
    let support: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > floor).collect();
    if sol.support_indices != support {
        return Some(format!("support {:?} != {support:?}", sol.support_indices));
    }
    let direct = dual_objective(k, y, &sol.alpha);
    if (sol.objective - direct).abs() >= 1e-9 {
        return Some(format!("reported objective {} != {direct}", sol.objective));
    }
    None
}

pub fn check_kkt(k: ArrayView2<f64>, y: &[f64], sol: &DualSolution, tol: f64) {
    if let Some(v) = kkt_violation(k, y, sol, tol) {
        panic!("{v}");
    }
}

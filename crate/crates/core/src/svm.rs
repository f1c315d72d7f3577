//! Binary soft-margin SVM on a precomputed kernel.
//!
//! The dual
//!
//! ```text
//! max  Σ α_i − ½ (α∘y)ᵀ K (α∘y)   s.t.  αᵀy = 0,  0 ≤ α_i ≤ C
//! ```
//!
//! is solved by sequential minimal optimization with second-order working
//! set selection: the first index is the maximal KKT violator, the second
//! maximizes the guaranteed objective decrease `b² / a` over the violating
//! partners. The offset is averaged over free support vectors.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Curvature floor used when `K_ii + K_jj − 2K_ij ≤ 0`.
const TAU: f64 = 1e-12;

/// `α_i > SUPPORT_FACTOR · C` marks a support vector.
pub const SUPPORT_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation `m(α) − M(α)` drops below this.
    pub tol: f64,
    /// Iteration cap; `None` means `10_000 · n`.
    pub max_iter: Option<usize>,
    /// Run the Cholesky positive-semidefiniteness guard before solving.
    pub psd_check: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: None,
            psd_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub support_indices: Vec<usize>,
    /// Dual objective `Σ α − ½ (α∘y)ᵀK(α∘y)` at `alpha`.
    pub objective: f64,
    pub iterations: usize,
    /// Box bound used for this solve.
    pub c: f64,
}

impl DualSolution {
    /// A solution with no support vectors and a constant offset.
    pub fn constant(n: usize, b: f64, c: f64) -> Self {
        Self {
            alpha: vec![0.0; n],
            b,
            support_indices: Vec::new(),
            objective: 0.0,
            iterations: 0,
            c,
        }
    }
}

/// One one-versus-all classifier: `class_tag` is the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub dual: DualSolution,
    pub labels: Vec<f64>,
    pub class_tag: usize,
}

impl BinaryModel {
    pub fn new(dual: DualSolution, labels: Vec<f64>, class_tag: usize) -> Result<Self> {
        if labels.len() != dual.alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: dual.alpha.len(),
                found: labels.len(),
            });
        }
        Ok(Self {
            dual,
            labels,
            class_tag,
        })
    }

    /// `α_j y_j` for every labeled sample.
    pub fn coefficients(&self) -> Vec<f64> {
        self.dual
            .alpha
            .iter()
            .zip(&self.labels)
            .map(|(a, y)| a * y)
            .collect()
    }
}

/// `+1` for samples of `class`, `−1` otherwise.
pub fn one_vs_all_labels(labels: &[usize], class: usize) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect()
}

/// Whether `k` admits a Cholesky factorization (all pivots strictly positive).
pub fn cholesky_ok(k: ArrayView2<f64>) -> bool {
    let n = k.nrows();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = k[[j, j]];
        for p in 0..j {
            diag -= l[j * n + p] * l[j * n + p];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = k[[i, j]];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            for p in 0..j {
                s -= ri[p] * rj[p];
            }
            l[i * n + j] = s / ljj;
        }
    }
    true
}

/// The diagonal jitter added when a kernel fails the Cholesky guard.
pub fn psd_jitter(k: ArrayView2<f64>) -> f64 {
    let n = k.nrows().max(1) as f64;
    1e-10 * k.diag().sum() / n
}

/// Applies the PSD guard: `None` if `k` factors as is, otherwise a copy
/// with `psd_jitter` added to the diagonal, or `NotPsd` if that still fails.
pub fn ensure_psd(k: ArrayView2<f64>) -> Result<Option<Array2<f64>>> {
    if cholesky_ok(k) {
        return Ok(None);
    }
    let jitter = psd_jitter(k);
    let mut fixed = k.to_owned();
    fixed.diag_mut().mapv_inplace(|v| v + jitter);
    if cholesky_ok(fixed.view()) {
        log::debug!("kernel needed diagonal jitter {jitter:e}");
        Ok(Some(fixed))
    } else {
        Err(Error::NotPsd)
    }
}

fn validate_labels(y: &[f64]) -> Result<()> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: "labels must be +1 or -1".into(),
        });
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateClasses(
            "both +1 and -1 labels are required".into(),
        ));
    }
    Ok(())
}

/// Solves the SVM dual for a fixed kernel.
pub fn solve_svm_dual(
    k: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    opts: &SmoOptions,
) -> Result<DualSolution> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter {
            name: "C",
            reason: format!("must be positive, got {c}"),
        });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {}", opts.tol),
        });
    }
    validate_labels(y)?;
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix"));
    }
    let jittered = if opts.psd_check { ensure_psd(k)? } else { None };
    let standard = k.as_standard_layout();
    let values = match &jittered {
        Some(j) => j.as_slice(),
        None => standard.as_slice(),
    }
    .expect("standard layout");
    Smo::new(values, y, c).run(opts)
}

struct Smo<'a> {
    k: &'a [f64],
    y: &'a [f64],
    c: f64,
    n: usize,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(k: &'a [f64], y: &'a [f64], c: f64) -> Self {
        let n = y.len();
        Self {
            k,
            y,
            c,
            n,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
        }
    }

    #[inline]
    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    #[inline]
    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    #[inline]
    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Returns the working pair and the current violation `m − M`.
    fn select(&self) -> (Option<(usize, usize)>, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut first = None;
        for t in 0..self.n {
            let up = if self.y[t] > 0.0 {
                !self.at_upper(t)
            } else {
                !self.at_lower(t)
            };
            if up {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    first = Some(t);
                }
            }
        }
        let Some(i) = first else {
            return (None, 0.0);
        };

        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = None;
        let mut best_obj = f64::INFINITY;
        let kii = self.kij(i, i);
        for t in 0..self.n {
            let low = if self.y[t] > 0.0 {
                !self.at_lower(t)
            } else {
                !self.at_upper(t)
            };
            if !low {
                continue;
            }
            let v = self.y[t] * self.grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let a = kii + self.kij(t, t) - 2.0 * self.kij(i, t);
                let obj = -(diff * diff) / if a > 0.0 { a } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    best = Some(t);
                }
            }
        }
        let violation = gmax + gmax2;
        (best.map(|j| (i, j)), violation)
    }

    fn update(&mut self, i: usize, j: usize) {
        let (yi, yj) = (self.y[i], self.y[j]);
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qij = yi * yj * self.kij(i, j);
        let (kii, kjj) = (self.kij(i, i), self.kij(j, j));

        if yi != yj {
            let mut quad = kii + kjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        let (di, dj) = (ai - old_i, aj - old_j);

        #[cfg(debug_assertions)]
        {
            // Change of ½αᵀQα − eᵀα restricted to the pair; SMO never increases it.
            let change = 0.5 * (kii * di * di + kjj * dj * dj + 2.0 * qij * di * dj)
                + self.grad[i] * di
                + self.grad[j] * dj;
            let curvature = kii + kjj - 2.0 * self.kij(i, j);
            debug_assert!(
                curvature <= 0.0 || change <= 1e-9 * (1.0 + di.abs() + dj.abs()),
                "SMO step increased the objective by {change}"
            );
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let n = self.n;
        let (ri, rj) = (&self.k[i * n..(i + 1) * n], &self.k[j * n..(j + 1) * n]);
        let (si, sj) = (yi * di, yj * dj);
        for t in 0..n {
            self.grad[t] += self.y[t] * (ri[t] * si + rj[t] * sj);
        }
    }

    fn offset(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            if self.at_upper(t) {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }

    fn solution(&self, iterations: usize) -> DualSolution {
        // Qα = ∇ + 1, so αᵀQα = αᵀ(∇ + 1).
        let sum_alpha: f64 = self.alpha.iter().sum();
        let quad: f64 = self
            .alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| a * (g + 1.0))
            .sum();
        let threshold = SUPPORT_FACTOR * self.c;
        DualSolution {
            alpha: self.alpha.clone(),
            b: self.offset(),
            support_indices: (0..self.n)
                .filter(|&t| self.alpha[t] > threshold)
                .collect(),
            objective: sum_alpha - 0.5 * quad,
            iterations,
            c: self.c,
        }
    }

    fn run(mut self, opts: &SmoOptions) -> Result<DualSolution> {
        let max_iter = opts.max_iter.unwrap_or(10_000 * self.n.max(1));
        let mut violation = f64::INFINITY;
        for iter in 0..max_iter {
            let (pair, v) = self.select();
            violation = v;
            match pair {
                Some((i, j)) if v >= opts.tol => self.update(i, j),
                _ => return Ok(self.solution(iter)),
            }
        }
        let (_, v) = self.select();
        if v < opts.tol {
            return Ok(self.solution(max_iter));
        }
        violation = violation.max(v);
        Err(Error::SolverFailure {
            iterations: max_iter,
            violation,
            best: Box::new(self.solution(max_iter)),
        })
    }
}

/// `Σ_j α_j y_j Σ_m d_m k_m(x_j, x) + b` from per-kernel rows
/// (`rows[m][j] = k_m(x_j, x)`, shape `M × N_L`).
pub fn decision_value(model: &BinaryModel, d: &[f64], rows: ArrayView2<f64>) -> Result<f64> {
    let nl = model.labels.len();
    if rows.nrows() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            found: rows.nrows(),
        });
    }
    if rows.ncols() != nl {
        return Err(Error::DimensionMismatch {
            expected: nl,
            found: rows.ncols(),
        });
    }
    let coef = model.coefficients();
    let mut value = 0.0;
    for (m, &dm) in d.iter().enumerate() {
        if dm == 0.0 {
            continue;
        }
        let row = rows.row(m);
        let s: f64 = coef.iter().zip(row.iter()).map(|(w, k)| w * k).sum();
        value += dm * s;
    }
    Ok(value + model.dual.b)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// One-versus-all prediction with a shared weight vector. Models must be
/// ordered by class; the returned value is the winning `class_tag`.
pub fn predict_multiclass(models: &[BinaryModel], d: &[f64], rows: ArrayView2<f64>) -> Result<usize> {
    if models.len() < 2 {
        return Err(Error::DegenerateClasses(
            "one-versus-all prediction needs at least 2 models".into(),
        ));
    }
    let values = models
        .iter()
        .map(|m| decision_value(m, d, rows))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax_first(&values).ok_or(Error::Untrained)?;
    Ok(models[best].class_tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn two_point_identity() {
        let k = Array2::<f64>::eye(2);
        let sol = solve_svm_dual(k.view(), &[1.0, -1.0], 10.0, &SmoOptions::default()).unwrap();
        assert!((sol.alpha[0] - 1.0).abs() < 1e-9);
        assert!((sol.alpha[1] - 1.0).abs() < 1e-9);
        assert!(sol.b.abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert_eq!(sol.support_indices, vec![0, 1]);
    }

    #[test]
    fn single_class_rejected() {
        let k = Array2::<f64>::eye(2);
        assert!(matches!(
            solve_svm_dual(k.view(), &[1.0, 1.0], 1.0, &SmoOptions::default()),
            Err(Error::DegenerateClasses(_))
        ));
    }

    #[test]
    fn bad_labels_and_shapes() {
        let k = Array2::<f64>::eye(2);
        assert!(solve_svm_dual(k.view(), &[1.0, 0.0], 1.0, &SmoOptions::default()).is_err());
        assert!(solve_svm_dual(k.view(), &[1.0, -1.0, 1.0], 1.0, &SmoOptions::default()).is_err());
        assert!(solve_svm_dual(k.view(), &[1.0, -1.0], 0.0, &SmoOptions::default()).is_err());
    }

    #[test]
    fn iteration_budget_exhaustion_carries_iterate() {
        let k = array![[1.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 1.0]];
        let opts = SmoOptions {
            tol: 1e-12,
            max_iter: Some(1),
            psd_check: true,
        };
        match solve_svm_dual(k.view(), &[1.0, -1.0, 1.0], 10.0, &opts) {
            Err(Error::SolverFailure { best, .. }) => assert_eq!(best.alpha.len(), 3),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_kernel_rejected() {
        let k = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            solve_svm_dual(k.view(), &[1.0, -1.0], 1.0, &SmoOptions::default()),
            Err(Error::NotPsd)
        ));
    }

    #[test]
    fn singular_kernel_gets_jitter() {
        // Duplicated point: exactly singular Gram matrix.
        let k = array![[1.0, 1.0, 0.2], [1.0, 1.0, 0.2], [0.2, 0.2, 1.0]];
        assert!(ensure_psd(k.view()).is_ok());
        let sol = solve_svm_dual(k.view(), &[1.0, 1.0, -1.0], 1.0, &SmoOptions::default()).unwrap();
        let s: f64 = sol.alpha[0] + sol.alpha[1] - sol.alpha[2];
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn empty_expansion_returns_offset() {
        let model = BinaryModel::new(DualSolution::constant(3, 0.7, 1.0), vec![1.0, -1.0, 1.0], 0)
            .unwrap();
        let rows = array![[0.3, 0.2, 0.9], [0.1, 0.5, 0.4]];
        assert_eq!(decision_value(&model, &[0.5, 0.5], rows.view()).unwrap(), 0.7);
    }

    #[test]
    fn decision_row_mismatch() {
        let model = BinaryModel::new(DualSolution::constant(2, 0.0, 1.0), vec![1.0, -1.0], 0).unwrap();
        let rows = array![[0.3, 0.2, 0.9]];
        assert!(decision_value(&model, &[1.0], rows.view()).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax_first(&[0.5, -0.5]), Some(0));
        assert_eq!(argmax_first(&[0.3, 0.3]), Some(0));
        assert_eq!(argmax_first(&[0.1, 0.3, 0.3]), Some(1));
        assert_eq!(argmax_first(&[]), None);
    }

    #[test]
    fn predict_two_classes() {
        // Constant models: decision values are their offsets.
        let m0 = BinaryModel::new(DualSolution::constant(1, 0.5, 1.0), vec![1.0], 0).unwrap();
        let m1 = BinaryModel::new(DualSolution::constant(1, -0.5, 1.0), vec![-1.0], 1).unwrap();
        let rows = array![[1.0]];
        assert_eq!(predict_multiclass(&[m0.clone(), m1.clone()], &[1.0], rows.view()).unwrap(), 0);
        let t0 = BinaryModel::new(DualSolution::constant(1, 0.3, 1.0), vec![1.0], 0).unwrap();
        let t1 = BinaryModel::new(DualSolution::constant(1, 0.3, 1.0), vec![-1.0], 1).unwrap();
        assert_eq!(predict_multiclass(&[t0, t1], &[1.0], rows.view()).unwrap(), 0);
        assert!(predict_multiclass(&[m0], &[1.0], rows.view()).is_err());
    }

    #[test]
    fn cholesky_detects_indefinite() {
        assert!(cholesky_ok(Array2::<f64>::eye(3).view()));
        assert!(!cholesky_ok(array![[1.0, 2.0], [2.0, 1.0]].view()));
    }
}

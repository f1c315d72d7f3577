use std::borrow::Cow;

use ndarray::{Array2, ArrayView2};

use super::dstep::{solve_d_step_from, DStepOptions};
use super::mmd::compute_p;
use super::{ClassModel, MklModel, MmdContext};
use crate::error::{Error, Result};
use crate::kernels::weighted_sum;
use crate::par;
use crate::svm::{ensure_psd, one_vs_all_labels, solve_svm_dual, BinaryModel, DualSolution, SmoOptions};

/// How kernel weights are shared across the one-versus-all classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Each binary problem learns its own `d`.
    #[default]
    PerClass,
    /// One `d` for all classes; the SVM term sums over classes.
    Shared,
}

impl WeightMode {
    pub fn name(self) -> &'static str {
        match self {
            WeightMode::PerClass => "per-class",
            WeightMode::Shared => "shared",
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "per-class" => Ok(WeightMode::PerClass),
            "shared" => Ok(WeightMode::Shared),
            _ => Err(format!("unknown weight mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MklOptions {
    pub max_outer: usize,
    /// Stop when no weight moves by more than this (sup norm).
    pub d_tol: f64,
    pub mode: WeightMode,
    pub smo: SmoOptions,
    pub dstep: DStepOptions,
    /// Halvings of the step toward the d-step target before giving up.
    pub max_line_search: usize,
}

impl Default for MklOptions {
    fn default() -> Self {
        Self {
            max_outer: 10,
            d_tol: 1e-4,
            mode: WeightMode::PerClass,
            smo: SmoOptions::default(),
            dstep: DStepOptions::default(),
            max_line_search: 8,
        }
    }
}

/// Trains one-versus-all domain-adaptive MKL classifiers.
///
/// `kernels[m]` is the labeled block `K_m^{L,L}` ordered like `labels` and
/// `labeled_ids`. Starting from uniform weights, each round solves the SVM
/// dual for the current combined kernel, solves the weight subproblem for
/// the resulting `p`, and moves toward that target while the true
/// objective `½(dᵀk)² + λG(d)` does not increase (halving the move
/// otherwise). Rounds stop once the weights settle within `d_tol`, after
/// `max_outer` rounds, or when no non-increasing move exists.
pub fn train_mkl_da(
    kernels: &[Array2<f64>],
    labels: &[usize],
    labeled_ids: Vec<usize>,
    ctx: &MmdContext,
    c: f64,
    lambda: f64,
    opts: &MklOptions,
) -> Result<MklModel> {
    let n = labels.len();
    if kernels.is_empty() {
        return Err(Error::Empty("base kernels"));
    }
    if ctx.len() != kernels.len() {
        return Err(Error::DimensionMismatch {
            expected: kernels.len(),
            found: ctx.len(),
        });
    }
    if labeled_ids.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labeled_ids.len(),
        });
    }
    if let Some(k) = kernels.iter().find(|k| k.dim() != (n, n)) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must be finite and non-negative, got {lambda}"),
        });
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateClasses(format!(
            "need at least 2 classes in the labeled set, found {}",
            classes.len()
        )));
    }

    // Guard each base kernel once; any convex combination of the guarded
    // kernels then factors too.
    let guarded: Vec<Cow<'_, Array2<f64>>> = if opts.smo.psd_check {
        kernels
            .iter()
            .map(|k| Ok(ensure_psd(k.view())?.map_or(Cow::Borrowed(k), Cow::Owned)))
            .collect::<Result<_>>()?
    } else {
        kernels.iter().map(Cow::Borrowed).collect()
    };
    let views: Vec<ArrayView2<f64>> = guarded.iter().map(|k| k.view()).collect();
    let inner = MklOptions {
        smo: SmoOptions {
            psd_check: false,
            ..opts.smo.clone()
        },
        ..opts.clone()
    };

    let problem = Problem {
        kernels: &views,
        k: ctx.k(),
        c,
        lambda,
        opts: &inner,
    };
    let ys: Vec<Vec<f64>> = classes.iter().map(|&cl| one_vs_all_labels(labels, cl)).collect();

    let class_models = match opts.mode {
        WeightMode::PerClass => par::map_range(classes.len(), |i| {
            let fit = problem.alternate(std::slice::from_ref(&ys[i]))?;
            let sol = fit.solutions.into_iter().next().expect("one class");
            Ok(ClassModel {
                binary: BinaryModel::new(sol, ys[i].clone(), classes[i])?,
                weights: fit.weights,
                history: fit.history,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?,
        WeightMode::Shared => {
            let fit = problem.alternate(&ys)?;
            fit.solutions
                .into_iter()
                .zip(ys.iter().zip(&classes))
                .map(|(sol, (y, &cl))| {
                    Ok(ClassModel {
                        binary: BinaryModel::new(sol, y.clone(), cl)?,
                        weights: fit.weights.clone(),
                        history: fit.history.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    Ok(MklModel {
        classes: class_models,
        labeled_indices: labeled_ids,
        lambda,
        c,
        mode: opts.mode,
    })
}

struct Problem<'a> {
    kernels: &'a [ArrayView2<'a, f64>],
    k: &'a [f64],
    c: f64,
    lambda: f64,
    opts: &'a MklOptions,
}

struct Fit {
    weights: Vec<f64>,
    solutions: Vec<DualSolution>,
    history: Vec<f64>,
}

impl Problem<'_> {
    fn solve_all(&self, d: &[f64], ys: &[Vec<f64>]) -> Result<Vec<DualSolution>> {
        let combined = weighted_sum(d, self.kernels);
        par::map_slice(ys, |y| solve_svm_dual(combined.view(), y, self.c, &self.opts.smo))
            .into_iter()
            .collect()
    }

    fn objective(&self, d: &[f64], sols: &[DualSolution]) -> f64 {
        let omega: f64 = d.iter().zip(self.k).map(|(a, b)| a * b).sum();
        let g: f64 = sols.iter().map(|s| s.objective).sum();
        0.5 * omega * omega + self.lambda * g
    }

    fn p_vector(&self, sols: &[DualSolution], ys: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.kernels.len()];
        for (sol, y) in sols.iter().zip(ys) {
            for (acc, v) in p.iter_mut().zip(compute_p(&sol.alpha, y, self.kernels)?) {
                *acc += v;
            }
        }
        Ok(p)
    }

    /// Alternating optimization over the classes in `ys` sharing one `d`.
    fn alternate(&self, ys: &[Vec<f64>]) -> Result<Fit> {
        let m = self.kernels.len();
        let mut d = vec![1.0 / m as f64; m];
        let mut sols = self.solve_all(&d, ys)?;
        let mut f = self.objective(&d, &sols);
        let mut history = vec![f];

        if m > 1 {
            for _ in 0..self.opts.max_outer {
                let p = self.p_vector(&sols, ys)?;
                let target = solve_d_step_from(&d, self.k, &p, self.lambda, &self.opts.dstep)?;
                let dir: Vec<f64> = target.weights.iter().zip(&d).map(|(t, c)| t - c).collect();
                if sup_norm(&dir) < self.opts.d_tol {
                    break;
                }
                let mut step = 1.0;
                let mut accepted = None;
                for _ in 0..=self.opts.max_line_search {
                    let trial = simplex_combination(&d, &dir, step);
                    let trial_sols = self.solve_all(&trial, ys)?;
                    let ft = self.objective(&trial, &trial_sols);
                    if ft <= f {
                        accepted = Some((trial, trial_sols, ft));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((trial, trial_sols, ft)) = accepted else {
                    break;
                };
                let moved = sup_norm(
                    &trial.iter().zip(&d).map(|(a, b)| a - b).collect::<Vec<_>>(),
                );
                d = trial;
                sols = trial_sols;
                f = ft;
                history.push(f);
                if moved < self.opts.d_tol {
                    break;
                }
            }
        }
        Ok(Fit {
            weights: d,
            solutions: sols,
            history,
        })
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `d + step·dir` for simplex points `d` and `d + dir`, with rounding
/// residue clamped and renormalized.
fn simplex_combination(d: &[f64], dir: &[f64], step: f64) -> Vec<f64> {
    let mut out: Vec<f64> = d
        .iter()
        .zip(dir)
        .map(|(a, b)| (a + step * b).max(0.0))
        .collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

//! Kernel-weight update on the probability simplex.
//!
//! Minimizes `φ(d) = (dᵀk)² − λ pᵀd` subject to `Σ d = 1, d ≥ 0` by
//! projected gradient with Armijo backtracking. The first trial step is
//! 1.0; later trial steps use the Barzilai–Borwein length of the previous
//! move. Iteration stops once an accepted step changes the objective by
//! less than the tolerance while the projected gradient residual is also
//! below it, so a tiny `λp` does not end the search prematurely.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DStepOptions {
    pub max_iter: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub obj_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
}

impl Default for DStepOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            obj_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DStep {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Objective after every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Euclidean projection onto `{d : Σ d = 1, d ≥ 0}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

pub(crate) fn d_objective(d: &[f64], k: &[f64], p: &[f64], lambda: f64) -> f64 {
    let kd: f64 = dot(d, k);
    kd * kd - lambda * dot(p, d)
}

fn d_gradient(d: &[f64], k: &[f64], p: &[f64], lambda: f64) -> Vec<f64> {
    let kd = dot(d, k);
    k.iter()
        .zip(p)
        .map(|(km, pm)| 2.0 * kd * km - lambda * pm)
        .collect()
}

/// `‖P(d − g) − d‖∞`, zero exactly at a minimizer over the simplex.
fn stationarity(d: &[f64], g: &[f64]) -> f64 {
    let moved: Vec<f64> = d.iter().zip(g).map(|(di, gi)| di - gi).collect();
    project_simplex(&moved)
        .iter()
        .zip(d)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the weight update from the uniform starting point.
pub fn solve_d_step(k: &[f64], p: &[f64], lambda: f64) -> Result<DStep> {
    let m = k.len();
    let start = vec![1.0 / m.max(1) as f64; m];
    solve_d_step_from(&start, k, p, lambda, &DStepOptions::default())
}

/// Solves the weight update warm-started at `start`.
pub fn solve_d_step_from(
    start: &[f64],
    k: &[f64],
    p: &[f64],
    lambda: f64,
    opts: &DStepOptions,
) -> Result<DStep> {
    let m = k.len();
    if m == 0 {
        return Err(Error::Empty("kernel weights"));
    }
    if p.len() != m || start.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: if p.len() != m { p.len() } else { start.len() },
        });
    }
    if k.iter().chain(p).chain(start).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("d-step inputs"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::NonFinite("lambda"));
    }

    let mut d = project_simplex(start);
    let mut f = d_objective(&d, k, p, lambda);
    let mut trace = vec![f];
    let mut trial = 1.0;

    for _ in 0..opts.max_iter {
        let g = d_gradient(&d, k, p, lambda);
        let mut t = trial;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = project_simplex(
                &d.iter().zip(&g).map(|(di, gi)| di - t * gi).collect::<Vec<_>>(),
            );
            let step: Vec<f64> = cand.iter().zip(&d).map(|(a, b)| a - b).collect();
            let fc = d_objective(&cand, k, p, lambda);
            if fc <= f + opts.armijo_c * dot(&g, &step) {
                accepted = Some((cand, step, fc));
                break;
            }
            t *= opts.backtrack;
        }
        let Some((cand, step, fc)) = accepted else {
            break;
        };
        if step.iter().all(|s| *s == 0.0) || fc > f {
            break;
        }
        let change = f - fc;
        let g_new = d_gradient(&cand, k, p, lambda);
        let sy: f64 = step
            .iter()
            .zip(g_new.iter().zip(&g))
            .map(|(s, (a, b))| s * (a - b))
            .sum();
        let ss = dot(&step, &step);
        trial = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (2.0 * t).min(1e12)
        };
        d = cand;
        f = fc;
        trace.push(f);
        if change < opts.obj_tol && stationarity(&d, &g_new) < opts.obj_tol {
            break;
        }
    }
    Ok(DStep {
        weights: d,
        objective: f,
        trace,
    })
}

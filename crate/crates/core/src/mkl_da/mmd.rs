use ndarray::ArrayView2;

use super::{DomainSplit, MmdContext};
use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

/// `k_m = tr(K_m L)` for every base kernel, where
/// `L_ij = 1/N_S²` on source pairs, `1/N_T²` on target pairs and
/// `−1/(N_S N_T)` across domains. `L` is never materialized; the trace is
/// assembled from the three block sums.
pub fn mmd_vector(base_kernels: &[KernelMatrix], split: &DomainSplit) -> Result<MmdContext> {
    let first = base_kernels.first().ok_or(Error::Empty("kernel matrices"))?;
    if base_kernels.iter().any(|m| m.index_map() != first.index_map()) {
        return Err(Error::IndexMapMismatch);
    }
    let index_map = first.index_map();
    let n = index_map.len();
    if n != split.source().len() + split.target().len() {
        return Err(Error::Coverage(format!(
            "kernel covers {n} samples, split has {} source + {} target",
            split.source().len(),
            split.target().len()
        )));
    }
    // Role per kernel position: Some(true) = source, Some(false) = target.
    let mut role: Vec<Option<bool>> = vec![None; n];
    let position: std::collections::HashMap<usize, usize> =
        index_map.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    for (ids, is_source) in [(split.source(), true), (split.target(), false)] {
        for id in ids {
            let p = *position.get(id).ok_or_else(|| {
                Error::Coverage(format!("identifier {id} is not in the kernel index map"))
            })?;
            if role[p].replace(is_source).is_some() {
                return Err(Error::Coverage(format!("identifier {id} listed twice")));
            }
        }
    }
    let is_source: Vec<bool> = role.into_iter().map(|r| r.expect("all covered")).collect();
    let ns = split.source().len() as f64;
    let nt = split.target().len() as f64;

    let k = base_kernels
        .iter()
        .map(|m| {
            let (ss, tt, st) = block_sums(m.values().view(), &is_source);
            ss / (ns * ns) + tt / (nt * nt) - 2.0 * st / (ns * nt)
        })
        .collect();
    Ok(MmdContext::new(k))
}

/// Sums of the source–source, target–target and source–target blocks.
fn block_sums(k: ArrayView2<f64>, is_source: &[bool]) -> (f64, f64, f64) {
    let (mut ss, mut tt, mut st) = (0.0, 0.0, 0.0);
    for (i, row) in k.outer_iter().enumerate() {
        let (mut to_s, mut to_t) = (0.0, 0.0);
        for (v, &s) in row.iter().zip(is_source) {
            if s {
                to_s += v;
            } else {
                to_t += v;
            }
        }
        if is_source[i] {
            ss += to_s;
            st += to_t;
        } else {
            tt += to_t;
        }
    }
    (ss, tt, st)
}

/// `Ω(d) = dᵀk`.
pub fn mmd_value(d: &[f64], ctx: &MmdContext) -> Result<f64> {
    if d.len() != ctx.k().len() {
        return Err(Error::DimensionMismatch {
            expected: ctx.k().len(),
            found: d.len(),
        });
    }
    Ok(d.iter().zip(ctx.k()).map(|(a, b)| a * b).sum())
}

/// `p_m = (α∘y)ᵀ K_m (α∘y)` over the labeled blocks.
pub fn compute_p(alpha: &[f64], y: &[f64], kernels: &[ArrayView2<f64>]) -> Result<Vec<f64>> {
    if alpha.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: alpha.len(),
        });
    }
    let w: Vec<f64> = alpha.iter().zip(y).map(|(a, b)| a * b).collect();
    kernels
        .iter()
        .map(|k| {
            if k.nrows() != w.len() || k.ncols() != w.len() {
                return Err(Error::DimensionMismatch {
                    expected: w.len(),
                    found: k.nrows(),
                });
            }
            Ok(quad_form(&w, *k))
        })
        .collect()
}

pub(crate) fn quad_form(w: &[f64], k: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for (i, row) in k.outer_iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        let s: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
        total += w[i] * s;
    }
    total
}

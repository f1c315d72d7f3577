//! Domain-adaptive multiple kernel learning.
//!
//! Each one-versus-all classifier minimizes
//!
//! ```text
//! ½ Ω(d)² + λ G(d),   Ω(d) = dᵀk,   d on the probability simplex
//! ```
//!
//! where `k_m = tr(K_m L)` is the per-kernel maximum mean discrepancy
//! between source and target samples and `G(d)` is the SVM dual optimum
//! for the combined kernel `Σ d_m K_m`. Training alternates an SVM solve
//! for fixed `d` with a simplex-constrained weight update.

mod dstep;
mod mmd;
mod train;

pub use dstep::{project_simplex, solve_d_step, solve_d_step_from, DStep, DStepOptions};
pub use mmd::{compute_p, mmd_value, mmd_vector};
pub use train::{train_mkl_da, MklOptions, WeightMode};

use std::collections::HashSet;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::svm::{argmax_first, BinaryModel};

/// Disjoint, non-empty source and target identifier lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSplit {
    source: Vec<usize>,
    target: Vec<usize>,
}

impl DomainSplit {
    pub fn new(source: Vec<usize>, target: Vec<usize>) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Empty("domain split"));
        }
        let seen: HashSet<usize> = source.iter().copied().collect();
        if let Some(&dup) = target.iter().find(|id| seen.contains(id)) {
            return Err(Error::Coverage(format!(
                "identifier {dup} is both source and target"
            )));
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    /// Source identifiers followed by target identifiers.
    pub fn ordered_ids(&self) -> Vec<usize> {
        self.source.iter().chain(&self.target).copied().collect()
    }
}

/// The per-kernel discrepancy vector `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdContext {
    k: Vec<f64>,
}

impl MmdContext {
    pub fn new(k: Vec<f64>) -> Self {
        Self { k }
    }

    /// A context with no discrepancy, for training without adaptation.
    pub fn zeros(m: usize) -> Self {
        Self { k: vec![0.0; m] }
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }
}

/// One one-versus-all classifier with its own kernel weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub binary: BinaryModel,
    pub weights: Vec<f64>,
    /// `½(dᵀk)² + λ G(d)` after the initial solve and every accepted update.
    pub history: Vec<f64>,
}

impl ClassModel {
    /// Decision value from per-kernel rows (`M × N_L`).
    pub fn decision(&self, rows: ArrayView2<f64>) -> Result<f64> {
        crate::svm::decision_value(&self.binary, &self.weights, rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MklModel {
    /// Ordered by ascending class tag.
    pub classes: Vec<ClassModel>,
    pub labeled_indices: Vec<usize>,
    pub lambda: f64,
    pub c: f64,
    pub mode: WeightMode,
}

impl MklModel {
    pub fn num_kernels(&self) -> usize {
        self.classes.first().map_or(0, |c| c.weights.len())
    }

    /// Mean kernel weights across classes (identical per class in shared mode).
    pub fn mean_weights(&self) -> Vec<f64> {
        let m = self.num_kernels();
        let mut out = vec![0.0; m];
        for c in &self.classes {
            for (o, w) in out.iter_mut().zip(&c.weights) {
                *o += w;
            }
        }
        let n = self.classes.len().max(1) as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }

    /// Per-class decision values for one sample.
    pub fn decision_values(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        if self.classes.is_empty() {
            return Err(Error::Untrained);
        }
        self.classes.iter().map(|c| c.decision(rows)).collect()
    }

    /// Class tag with the largest decision value; ties go to the lowest tag.
    pub fn predict(&self, rows: ArrayView2<f64>) -> Result<usize> {
        let values = self.decision_values(rows)?;
        Ok(self.classes[argmax_first(&values).ok_or(Error::Untrained)?]
            .binary
            .class_tag)
    }

    /// Packs `d_{c,m} α_{c,j} y_{c,j}` for fast batch evaluation.
    pub(crate) fn packed(&self) -> PackedModel {
        let m = self.num_kernels();
        let nl = self.labeled_indices.len();
        let mut coef = Vec::with_capacity(self.classes.len() * m * nl);
        for c in &self.classes {
            let ay = c.binary.coefficients();
            for &dm in &c.weights {
                coef.extend(ay.iter().map(|v| dm * v));
            }
        }
        PackedModel {
            coef,
            offsets: self.classes.iter().map(|c| c.binary.dual.b).collect(),
            m,
            nl,
        }
    }
}

/// Flattened coefficients, `coef[(c·M + m)·N_L + j]`.
pub(crate) struct PackedModel {
    coef: Vec<f64>,
    offsets: Vec<f64>,
    m: usize,
    nl: usize,
}

impl PackedModel {
    /// Decision values for one sample given its gathered rows
    /// (`rows[m·N_L + j] = k_m(x_j, x)`).
    pub(crate) fn decisions(&self, rows: &[f64]) -> Vec<f64> {
        let width = self.m * self.nl;
        self.offsets
            .iter()
            .enumerate()
            .map(|(c, b)| {
                let w = &self.coef[c * width..(c + 1) * width];
                let mut acc = 0.0;
                for m in 0..self.m {
                    let (wm, rm) = (
                        &w[m * self.nl..(m + 1) * self.nl],
                        &rows[m * self.nl..(m + 1) * self.nl],
                    );
                    acc += wm.iter().zip(rm).map(|(a, b)| a * b).sum::<f64>();
                }
                acc + b
            })
            .collect()
    }
}

//! Base kernel families and Gram-matrix construction.
//!
//! Four radial kernels are supported, all functions of the Euclidean
//! distance `d = ‖x − y‖` and a bandwidth `γ > 0`:
//!
//! | kind                      | rational form      | as-printed form        |
//! |---------------------------|--------------------|------------------------|
//! | `Gaussian`                | `exp(−γ d²)`       | same                   |
//! | `Laplacian`               | `exp(−√γ d)`       | same                   |
//! | `InverseSquareDistance`   | `1 / (γ d² + 1)`   | `exp(1 / (γ d² + 1))`  |
//! | `InverseDistance`         | `1 / (√γ d + 1)`   | `exp(1 / (√γ d + 1))`  |
//!
//! The rational forms have unit diagonal and are the default. The
//! as-printed forms are kept selectable for fidelity experiments; their
//! diagonal is `e`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Gaussian,
    Laplacian,
    InverseSquareDistance,
    InverseDistance,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::Gaussian,
        KernelKind::Laplacian,
        KernelKind::InverseSquareDistance,
        KernelKind::InverseDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Laplacian => "laplacian",
            KernelKind::InverseSquareDistance => "inverse_square_distance",
            KernelKind::InverseDistance => "inverse_distance",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown kernel kind `{s}`"))
    }
}

/// Which closed form the two inverse-distance kernels use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FormVariant {
    AsPrinted,
    #[default]
    Rational,
}

impl FormVariant {
    pub fn name(self) -> &'static str {
        match self {
            FormVariant::AsPrinted => "as_printed",
            FormVariant::Rational => "rational",
        }
    }
}

impl fmt::Display for FormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "as_printed" => Ok(FormVariant::AsPrinted),
            "rational" => Ok(FormVariant::Rational),
            _ => Err(format!("unknown form variant `{s}`")),
        }
    }
}

/// A base kernel with a fixed bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: f64,
    variant: FormVariant,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, gamma: f64) -> Result<Self> {
        Self::with_variant(kind, gamma, FormVariant::default())
    }

    pub fn with_variant(kind: KernelKind, gamma: f64, variant: FormVariant) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be a positive finite number, got {gamma}"),
            });
        }
        Ok(Self {
            kind,
            gamma,
            variant,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The effective variant; gaussian and laplacian ignore the setting.
    pub fn variant(&self) -> FormVariant {
        match self.kind {
            KernelKind::Gaussian | KernelKind::Laplacian => FormVariant::Rational,
            _ => self.variant,
        }
    }

    /// Evaluates the kernel from a squared distance.
    #[inline]
    pub fn eval_sq_dist(&self, d2: f64) -> f64 {
        let g = self.gamma;
        match (self.kind, self.variant) {
            (KernelKind::Gaussian, _) => (-g * d2).exp(),
            (KernelKind::Laplacian, _) => (-(g * d2).sqrt()).exp(),
            (KernelKind::InverseSquareDistance, FormVariant::Rational) => 1.0 / (g * d2 + 1.0),
            (KernelKind::InverseSquareDistance, FormVariant::AsPrinted) => {
                (1.0 / (g * d2 + 1.0)).exp()
            }
            (KernelKind::InverseDistance, FormVariant::Rational) => 1.0 / ((g * d2).sqrt() + 1.0),
            (KernelKind::InverseDistance, FormVariant::AsPrinted) => {
                (1.0 / ((g * d2).sqrt() + 1.0)).exp()
            }
        }
    }
}

/// Symmetric Gram matrix over an ordered list of sample identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Array2<f64>,
    index_map: Vec<usize>,
}

impl KernelMatrix {
    pub fn new(values: Array2<f64>, index_map: Vec<usize>) -> Result<Self> {
        let n = index_map.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.nrows().max(values.ncols()),
            });
        }
        Ok(Self { values, index_map })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

#[inline]
pub(crate) fn sq_dist(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 / dist*`, where `dist*` is the mean squared Euclidean distance over
/// all unordered pairs of distinct samples.
pub fn gamma_heuristic(samples: ArrayView2<f64>) -> Result<f64> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "gamma heuristic needs at least 2 samples, got {n}"
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += sq_dist(samples.row(i), samples.row(j));
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mean = total / pairs;
    if mean <= 0.0 || !mean.is_finite() {
        return Err(Error::DegenerateInput(
            "mean squared pairwise distance is zero".into(),
        ));
    }
    Ok(1.0 / mean)
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(spec.eval_sq_dist(d2))
}

/// Pairwise squared distances between the rows of `features` listed in `ids`.
///
/// Every entry is computed in full (not mirrored), which is still exactly
/// symmetric because `(a − b)² == (b − a)²` in IEEE arithmetic.
pub fn pairwise_sq_dists(features: ArrayView2<f64>, ids: &[usize]) -> Array2<f64> {
    let n = ids.len();
    let mut out = vec![0.0; n * n];
    par::for_each_row(&mut out, n, |i, row| {
        let xi = features.row(ids[i]);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = sq_dist(xi, features.row(ids[j]));
        }
    });
    Array2::from_shape_vec((n, n), out).expect("n*n buffer")
}

/// One Gram matrix per spec over the rows `ids` of `features`.
///
/// When `ids` lists source samples before target samples the result has
/// the `[[SS, ST], [TS, TT]]` block layout.
pub fn compute_base_kernels(
    features: ArrayView2<f64>,
    ids: &[usize],
    specs: &[KernelSpec],
) -> Result<Vec<KernelMatrix>> {
    if specs.is_empty() {
        return Err(Error::Empty("kernel specs"));
    }
    if ids.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= features.nrows()) {
        return Err(Error::UnknownIdentifier(bad));
    }
    let d2 = pairwise_sq_dists(features, ids);
    Ok(gram_from_sq_dists(&d2, ids, specs))
}

pub(crate) fn gram_from_sq_dists(
    d2: &Array2<f64>,
    ids: &[usize],
    specs: &[KernelSpec],
) -> Vec<KernelMatrix> {
    let n = ids.len();
    let src = d2.as_slice().expect("standard layout");
    specs
        .iter()
        .map(|spec| {
            let mut out = vec![0.0; n * n];
            par::for_each_row(&mut out, n, |i, row| {
                let drow = &src[i * n..(i + 1) * n];
                for (slot, &v) in row.iter_mut().zip(drow) {
                    *slot = spec.eval_sq_dist(v);
                }
            });
            KernelMatrix {
                values: Array2::from_shape_vec((n, n), out).expect("n*n buffer"),
                index_map: ids.to_vec(),
            }
        })
        .collect()
}

pub(crate) const SIMPLEX_TOL: f64 = 1e-9;

pub(crate) fn check_simplex(d: &[f64]) -> Result<()> {
    let sum: f64 = d.iter().sum();
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if d.iter().any(|v| !v.is_finite()) || (sum - 1.0).abs() > SIMPLEX_TOL || min < -SIMPLEX_TOL {
        return Err(Error::OffSimplex { sum, min });
    }
    Ok(())
}

/// Entrywise `Σ d_m K_m`.
pub fn combined_kernel(d: &[f64], matrices: &[KernelMatrix]) -> Result<KernelMatrix> {
    if d.len() != matrices.len() {
        return Err(Error::DimensionMismatch {
            expected: matrices.len(),
            found: d.len(),
        });
    }
    let first = matrices.first().ok_or(Error::Empty("kernel matrices"))?;
    if matrices.iter().any(|m| m.index_map != first.index_map) {
        return Err(Error::IndexMapMismatch);
    }
    check_simplex(d)?;
    let views: Vec<ArrayView2<f64>> = matrices.iter().map(|m| m.values.view()).collect();
    Ok(KernelMatrix {
        values: weighted_sum(d, &views),
        index_map: first.index_map.clone(),
    })
}

/// `Σ w_m A_m` over equally shaped matrices, accumulated in kernel order.
pub(crate) fn weighted_sum(w: &[f64], mats: &[ArrayView2<f64>]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(mats[0].raw_dim());
    for (&wm, m) in w.iter().zip(mats) {
        if wm != 0.0 {
            out.scaled_add(wm, m);
        }
    }
    out
}

/// Base Gram matrices over one shared index map, with identifier lookup.
#[derive(Debug, Clone)]
pub struct KernelBank {
    specs: Vec<KernelSpec>,
    matrices: Vec<KernelMatrix>,
    position: HashMap<usize, usize>,
}

impl KernelBank {
    pub fn build(features: ArrayView2<f64>, ids: &[usize], specs: &[KernelSpec]) -> Result<Self> {
        let matrices = compute_base_kernels(features, ids, specs)?;
        Self::from_matrices(specs.to_vec(), matrices)
    }

    pub fn from_matrices(specs: Vec<KernelSpec>, matrices: Vec<KernelMatrix>) -> Result<Self> {
        let first = matrices.first().ok_or(Error::Empty("kernel matrices"))?;
        if matrices.iter().any(|m| m.index_map != first.index_map) {
            return Err(Error::IndexMapMismatch);
        }
        if specs.len() != matrices.len() {
            return Err(Error::DimensionMismatch {
                expected: matrices.len(),
                found: specs.len(),
            });
        }
        let position: HashMap<usize, usize> = first
            .index_map
            .iter()
            .enumerate()
            .map(|(p, &id)| (id, p))
            .collect();
        if position.len() != first.index_map.len() {
            return Err(Error::Coverage("duplicate identifiers in index map".into()));
        }
        Ok(Self {
            specs,
            matrices,
            position,
        })
    }

    pub fn specs(&self) -> &[KernelSpec] {
        &self.specs
    }

    pub fn matrices(&self) -> &[KernelMatrix] {
        &self.matrices
    }

    pub fn num_kernels(&self) -> usize {
        self.matrices.len()
    }

    pub fn index_map(&self) -> &[usize] {
        &self.matrices[0].index_map
    }

    pub fn position(&self, id: usize) -> Result<usize> {
        self.position
            .get(&id)
            .copied()
            .ok_or(Error::UnknownIdentifier(id))
    }

    pub fn positions(&self, ids: &[usize]) -> Result<Vec<usize>> {
        ids.iter().map(|&id| self.position(id)).collect()
    }

    /// Per-kernel square blocks `K_m[ids, ids]`.
    pub fn square_blocks(&self, ids: &[usize]) -> Result<Vec<Array2<f64>>> {
        let pos = self.positions(ids)?;
        let n = pos.len();
        Ok(self
            .matrices
            .iter()
            .map(|m| Array2::from_shape_fn((n, n), |(i, j)| m.values[[pos[i], pos[j]]]))
            .collect())
    }

    /// Per-kernel rows `k_m(x_j, x)` for one sample against `cols`
    /// (given as bank positions), shape `M × cols.len()`.
    pub fn rows_at(&self, x: usize, cols: &[usize]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.matrices.len(), cols.len()));
        for (m, mat) in self.matrices.iter().enumerate() {
            let row = mat.values.row(x);
            for (slot, &c) in out.row_mut(m).iter_mut().zip(cols) {
                *slot = row[c];
            }
        }
        out
    }
}

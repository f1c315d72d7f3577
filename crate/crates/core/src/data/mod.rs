//! Datasets, sampling and preprocessing.

mod format;
mod synth;

pub use format::{load_dataset, parse_dataset, save_dataset, write_dataset, ParseError};
pub use synth::{synth_shifted, SynthConfig};

use ndarray::{Array2, ArrayView2};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn token(self) -> &'static str {
        match self {
            Domain::Source => "S",
            Domain::Target => "T",
        }
    }
}

/// Samples with optional labels, each tagged as source or target.
///
/// Unlabeled samples carry `None`; class indices are in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    domains: Vec<Domain>,
    num_classes: usize,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        domains: Vec<Domain>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || domains.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if labels.len() != n { labels.len() } else { domains.len() },
            });
        }
        if num_classes == 0 {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                reason: "must be positive".into(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if let Some(l) = labels.iter().flatten().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("label {l} out of range for {num_classes} classes"),
            });
        }
        if let Some(i) = (0..n).find(|&i| domains[i] == Domain::Source && labels[i].is_none()) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: format!("source sample {i} is unlabeled"),
            });
        }
        Ok(Self {
            features,
            labels,
            domains,
            num_classes,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                found: names.len(),
            });
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> Option<usize> {
        self.labels.get(id).copied().flatten()
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn ids_in(&self, domain: Domain) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.domains[i] == domain).collect()
    }

    pub fn source_ids(&self) -> Vec<usize> {
        self.ids_in(Domain::Source)
    }

    pub fn target_ids(&self) -> Vec<usize> {
        self.ids_in(Domain::Target)
    }

    /// Feature rows for `ids`, in order.
    pub fn select_rows(&self, ids: &[usize]) -> Array2<f64> {
        self.features.select(ndarray::Axis(0), ids)
    }
}

/// `per_class` source samples per class, drawn uniformly without
/// replacement. Output is grouped by class, ascending identifiers within
/// each class.
pub fn stratified_initial_sample(dataset: &Dataset, per_class: usize, seed: u64) -> Result<Vec<usize>> {
    if per_class == 0 {
        return Err(Error::InvalidParameter {
            name: "per_class",
            reason: "must be positive".into(),
        });
    }
    let mut rng = seeded_rng(seed, Stream::Stratified);
    let source = dataset.source_ids();
    let mut out = Vec::with_capacity(per_class * dataset.num_classes());
    for class in 0..dataset.num_classes() {
        let members: Vec<usize> = source
            .iter()
            .copied()
            .filter(|&i| dataset.label(i) == Some(class))
            .collect();
        if members.len() < per_class {
            return Err(Error::InsufficientClass {
                class,
                needed: per_class,
                available: members.len(),
            });
        }
        let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), per_class)
            .into_iter()
            .map(|k| members[k])
            .collect();
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}

/// Per-band mean and standard deviation (population estimator).
#[derive(Debug, Clone, PartialEq)]
pub struct BandStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BandStats {
    pub fn from_rows(rows: ArrayView2<f64>) -> Result<Self> {
        let n = rows.nrows();
        if n == 0 {
            return Err(Error::Empty("rows for band statistics"));
        }
        let mean: Vec<f64> = rows.columns().into_iter().map(|c| c.sum() / n as f64).collect();
        let std = rows
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt())
            .collect();
        Ok(Self { mean, std })
    }

    /// Statistics over the source-tagged samples only.
    pub fn from_source(dataset: &Dataset) -> Result<Self> {
        Self::from_rows(dataset.select_rows(&dataset.source_ids()).view())
    }
}

/// Z-scores every sample with the given statistics. Bands with zero (or
/// non-finite) deviation pass through unchanged.
pub fn standardize(dataset: &Dataset, stats: &BandStats) -> Result<Dataset> {
    if stats.mean.len() != dataset.dimension() || stats.std.len() != dataset.dimension() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dimension(),
            found: stats.mean.len(),
        });
    }
    let mut features = dataset.features.clone();
    for (b, mut col) in features.columns_mut().into_iter().enumerate() {
        let (m, s) = (stats.mean[b], stats.std[b]);
        if s > 0.0 && s.is_finite() {
            col.mapv_inplace(|v| (v - m) / s);
        }
    }
    Ok(Dataset {
        features,
        ..dataset.clone()
    })
}

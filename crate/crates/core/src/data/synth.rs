//! Synthetic Gaussian clusters with a source/target domain shift.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub dimension: usize,
    pub per_class_source: usize,
    pub per_class_target: usize,
    /// Distance between any two class means.
    pub class_separation: f64,
    /// Scales the per-band standard deviations, which span `0.5..=1.5`.
    pub covariance_scale: f64,
    /// Length of the translation applied to every target cluster.
    pub shift_magnitude: f64,
    /// Rotation (radians) of the target covariance within a random plane.
    pub rotation_angle: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            dimension: 10,
            per_class_source: 100,
            per_class_target: 100,
            class_separation: 3.0,
            covariance_scale: 1.0,
            shift_magnitude: 10.0,
            rotation_angle: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_classes", self.num_classes),
            ("dimension", self.dimension),
            ("per_class_source", self.per_class_source),
            ("per_class_target", self.per_class_target),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be positive".into(),
            });
        }
        let reals = [
            ("class_separation", self.class_separation),
            ("covariance_scale", self.covariance_scale),
            ("shift_magnitude", self.shift_magnitude),
            ("rotation_angle", self.rotation_angle),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be finite".into(),
            });
        }
        if self.class_separation < 0.0 || self.shift_magnitude < 0.0 {
            return Err(Error::InvalidParameter {
                name: if self.class_separation < 0.0 { "class_separation" } else { "shift_magnitude" },
                reason: "must be non-negative".into(),
            });
        }
        if self.covariance_scale <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "covariance_scale",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn normal_vector(rng: &mut impl Rng, d: usize) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.sample(StandardNormal))
}

fn unit_vector(rng: &mut impl Rng, d: usize) -> Array1<f64> {
    loop {
        let v = normal_vector(rng, d);
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Rotation by `angle` within the plane spanned by two random orthonormal
/// directions, identity elsewhere. One-dimensional data is left unrotated.
fn random_plane_rotation(rng: &mut impl Rng, d: usize, angle: f64) -> Array2<f64> {
    let mut r = Array2::eye(d);
    if d < 2 || angle == 0.0 {
        return r;
    }
    let a = unit_vector(rng, d);
    let b = loop {
        let v = normal_vector(rng, d);
        let w = &v - &(&a * a.dot(&v));
        let n = w.dot(&w).sqrt();
        if n > 1e-9 {
            break w / n;
        }
    };
    let (s, c) = angle.sin_cos();
    for i in 0..d {
        for j in 0..d {
            r[[i, j]] += (c - 1.0) * (a[i] * a[j] + b[i] * b[j]) + s * (b[i] * a[j] - a[i] * b[j]);
        }
    }
    r
}

/// Draws labeled source and target clusters.
///
/// Class means sit `class_separation` apart (on scaled axes when there are
/// no more classes than dimensions, otherwise at random). Target samples
/// share the class means translated by `shift_magnitude` along one random
/// direction, with the noise rotated by `rotation_angle`. Source rows come
/// first, each domain shuffled.
pub fn synth_shifted(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let (k, d) = (config.num_classes, config.dimension);
    let mut rng = seeded_rng(config.seed, Stream::Synth);

    let means: Vec<Array1<f64>> = if k <= d {
        let scale = config.class_separation / std::f64::consts::SQRT_2;
        (0..k)
            .map(|c| Array1::from_shape_fn(d, |i| if i == c { scale } else { 0.0 }))
            .collect()
    } else {
        (0..k)
            .map(|_| normal_vector(&mut rng, d) * (config.class_separation / std::f64::consts::SQRT_2))
            .collect()
    };
    let sd: Array1<f64> = Array1::from_shape_fn(d, |i| {
        let t = if d == 1 { 0.5 } else { i as f64 / (d - 1) as f64 };
        (0.5 + t) * config.covariance_scale
    });
    let shift = unit_vector(&mut rng, d) * config.shift_magnitude;
    let rotation = random_plane_rotation(&mut rng, d, config.rotation_angle);

    let mut draw = |domain: Domain, per_class: usize| -> Vec<(Array1<f64>, usize)> {
        let mut rows = Vec::with_capacity(per_class * k);
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                let noise = normal_vector(&mut rng, d) * &sd;
                let x = match domain {
                    Domain::Source => mean + &noise,
                    Domain::Target => mean + &shift + &rotation.dot(&noise),
                };
                rows.push((x, c));
            }
        }
        rows.shuffle(&mut rng);
        rows
    };
    let source = draw(Domain::Source, config.per_class_source);
    let target = draw(Domain::Target, config.per_class_target);

    let n = source.len() + target.len();
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut domains = Vec::with_capacity(n);
    for (i, ((x, c), dom)) in source
        .into_iter()
        .map(|r| (r, Domain::Source))
        .chain(target.into_iter().map(|r| (r, Domain::Target)))
        .enumerate()
    {
        features.row_mut(i).assign(&x);
        labels.push(Some(c));
        domains.push(dom);
    }
    Dataset::new(features, labels, domains, k)
}

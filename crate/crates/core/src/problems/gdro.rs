//! CVaR group DRO with logistic losses:
//!
//! ```text
//! min_{theta, s}  s + (1/n) sum_g (1/r) [L_g(theta) - s]_+
//! ```
//!
//! where `L_g` is the mean logistic loss of group `g`. Component `g` has inner
//! map `L_g(theta) - s`, outer `CvarHinge(r)`, and `s` enters as the additive
//! term. The decision vector is `(theta, s)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{FccoProblem, Regularity};
use crate::rng::{tag, SeededRng};
use crate::smoothing::OuterFunction;

fn default_groups() -> usize {
    8
}
fn default_samples() -> usize {
    200
}
fn default_features() -> usize {
    2
}
fn default_ratio() -> f64 {
    0.15
}
fn default_shift() -> f64 {
    1.0
}
fn default_label_noise() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct GdroSpec {
    #[cfg_attr(feature = "serde", serde(default = "default_groups"))]
    pub groups: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_samples"))]
    pub samples_per_group: usize,
    /// Feature dimension `p`; `theta` has `p` entries.
    #[cfg_attr(feature = "serde", serde(default = "default_features"))]
    pub features: usize,
    /// Tail fraction `r`.
    #[cfg_attr(feature = "serde", serde(default = "default_ratio"))]
    pub ratio: f64,
    /// Scale of the per-group feature mean and labelling direction shifts.
    #[cfg_attr(feature = "serde", serde(default = "default_shift"))]
    pub group_shift: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_label_noise"))]
    pub label_noise: f64,
    pub seed: u64,
}

impl GdroSpec {
    pub fn new(seed: u64) -> Self {
        GdroSpec {
            groups: default_groups(),
            samples_per_group: default_samples(),
            features: default_features(),
            ratio: default_ratio(),
            group_shift: default_shift(),
            label_noise: default_label_noise(),
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GdroCvar {
    spec: GdroSpec,
    /// `x[(g * m + k) * p ..]`
    x: Vec<f64>,
    /// Labels in `{-1, +1}`.
    y: Vec<f64>,
    regularity: Regularity,
}

pub fn make_gdro_cvar(spec: &GdroSpec) -> Result<GdroCvar> {
    let GdroSpec {
        groups: n,
        samples_per_group: m,
        features: p,
        ratio,
        ..
    } = *spec;
    if n == 0 || p == 0 {
        return Err(Error::config("group DRO needs at least one group and one feature"));
    }
    if m == 0 {
        return Err(Error::config("empty group"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::config("CVaR ratio must lie in (0, 1]"));
    }
    if ratio * (n as f64) < 1.0 - 1e-12 {
        return Err(Error::config(alloc::format!("CVaR ratio {ratio} with {n} groups covers less than one group")));
    }
    if !(spec.group_shift >= 0.0 && spec.label_noise >= 0.0) {
        return Err(Error::config("group shift and label noise must be nonnegative"));
    }
    let root = SeededRng::new(spec.seed, tag::PROBLEM_DATA);
    let mut rng = root.derive(&[1]);
    let base: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
    let mut x = Vec::with_capacity(n * m * p);
    let mut y = Vec::with_capacity(n * m);
    for g in 0..n {
        let mut grng = root.derive(&[2, g as u64]);
        let mean: Vec<f64> = (0..p).map(|_| spec.group_shift * grng.normal()).collect();
        let dir: Vec<f64> = base.iter().map(|b| b + spec.group_shift * grng.normal()).collect();
        for _ in 0..m {
            let row: Vec<f64> = mean.iter().map(|mu| mu + grng.normal()).collect();
            let score = linalg::dot(&dir, &row) + spec.label_noise * grng.normal();
            y.push(if score >= 0.0 { 1.0 } else { -1.0 });
            x.extend_from_slice(&row);
        }
    }
    let x_max = x.chunks(p).map(linalg::norm).fold(0.0, f64::max);
    let regularity = Regularity {
        lipschitz: libm::sqrt(x_max * x_max + 1.0),
        smoothness: Some(0.25 * x_max * x_max),
        weak_convexity: Some(0.0),
        additive_weak_convexity: 0.0,
    };
    Ok(GdroCvar {
        spec: *spec,
        x,
        y,
        regularity,
    })
}

/// `log(1 + exp(-m))` without overflow.
fn logistic_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        libm::log1p(libm::exp(-margin))
    } else {
        -margin + libm::log1p(libm::exp(margin))
    }
}

impl GdroCvar {
    pub fn spec(&self) -> &GdroSpec {
        &self.spec
    }

    fn sample(&self, g: usize, k: usize) -> (&[f64], f64) {
        let (m, p) = (self.spec.samples_per_group, self.spec.features);
        let idx = g * m + k;
        (&self.x[idx * p..(idx + 1) * p], self.y[idx])
    }

    fn check(&self, g: usize, w: &[f64], batch: &[usize]) -> Result<()> {
        if g >= self.spec.groups || w.len() != self.spec.features + 1 {
            return Err(Error::Oracle(alloc::format!("bad group {g} or dimension {}", w.len())));
        }
        if batch.is_empty() || batch.iter().any(|&k| k >= self.spec.samples_per_group) {
            return Err(Error::Oracle("batch indices out of range".into()));
        }
        Ok(())
    }

    /// Mean logistic loss of group `g` at `theta`.
    pub fn group_loss(&self, g: usize, theta: &[f64]) -> f64 {
        let m = self.spec.samples_per_group;
        (0..m)
            .map(|k| {
                let (xk, yk) = self.sample(g, k);
                logistic_loss(yk * linalg::dot(xk, theta))
            })
            .sum::<f64>()
            / m as f64
    }
}

impl FccoProblem for GdroCvar {
    fn num_components(&self) -> usize {
        self.spec.groups
    }

    fn dim(&self) -> usize {
        self.spec.features + 1
    }

    fn inner_dim(&self) -> usize {
        1
    }

    fn outer(&self, _i: usize) -> OuterFunction {
        OuterFunction::CvarHinge { ratio: self.spec.ratio }
    }

    fn population(&self, _i: usize) -> usize {
        self.spec.samples_per_group
    }

    fn inner_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.check(i, w, batch)?;
        let p = self.spec.features;
        let loss: f64 = batch
            .iter()
            .map(|&k| {
                let (xk, yk) = self.sample(i, k);
                logistic_loss(yk * linalg::dot(xk, &w[..p]))
            })
            .sum();
        out[0] = loss / batch.len() as f64 - w[p];
        Ok(())
    }

    fn inner_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(i, w, batch)?;
        let p = self.spec.features;
        out.iter_mut().for_each(|v| *v = 0.0);
        let c = y[0] / batch.len() as f64;
        for &k in batch {
            let (xk, yk) = self.sample(i, k);
            // d/dtheta log(1 + exp(-y x^T theta)) = -y sigmoid(-y x^T theta) x
            let s = super::sigmoid(-yk * linalg::dot(xk, &w[..p]));
            linalg::axpy(-c * yk * s, xk, &mut out[..p]);
        }
        out[p] = -y[0];
        Ok(())
    }

    fn inner_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.spec.samples_per_group).collect();
        self.inner_value(i, w, &all, out)
    }

    fn inner_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let all: Vec<usize> = (0..self.spec.samples_per_group).collect();
        self.inner_vjp(i, w, &all, &[1.0], out)
    }

    fn regularity(&self) -> Regularity {
        self.regularity
    }

    fn has_additive(&self) -> bool {
        true
    }

    fn additive_value_exact(&self, w: &[f64]) -> Result<f64> {
        Ok(w[self.spec.features])
    }

    fn additive_grad(&self, w: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[w.len() - 1] = 1.0;
        Ok(())
    }
}

//! ROC-fairness toy: a linear scorer `h(x) = w^T x` trained with a pairwise
//! AUC surrogate, subject to bounded gaps between two demographic groups in
//! the soft true- and false-positive rates at each threshold `tau`:
//!
//! ```text
//! | mean_{x in D_0^+} sigmoid(h(x) - tau) - mean_{x in D_1^+} sigmoid(h(x) - tau) | <= kappa
//! ```
//!
//! and likewise over negatives. Constraint `2j` is the TPR gap at threshold
//! `j`, constraint `2j + 1` the FPR gap. Each constraint's inner map returns
//! both group means; its sample population is the set of cross-group pairs
//! so a single index draws one example from each group.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::penalty::{ConstrainedProblem, ConstraintKind};
use crate::problem::Regularity;
use crate::rng::{tag, SeededRng};

use super::{sigmoid, SIGMOID_CURVATURE};

fn default_features() -> usize {
    2
}
fn default_per_class() -> usize {
    40
}
#[cfg(feature = "serde")]
fn default_thresholds() -> Vec<f64> {
    alloc::vec![0.0]
}
#[cfg(feature = "serde")]
fn default_kappa() -> f64 {
    0.05
}
fn default_shift() -> f64 {
    0.75
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct RocSpec {
    #[cfg_attr(feature = "serde", serde(default = "default_features"))]
    pub features: usize,
    /// Positives and negatives per group.
    #[cfg_attr(feature = "serde", serde(default = "default_per_class"))]
    pub per_class: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_thresholds"))]
    pub thresholds: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default = "default_kappa"))]
    pub kappa: f64,
    /// Offset between the two groups' feature means.
    #[cfg_attr(feature = "serde", serde(default = "default_shift"))]
    pub group_shift: f64,
    /// Give both groups the same samples.
    #[cfg_attr(feature = "serde", serde(default))]
    pub identical_groups: bool,
    pub seed: u64,
}

impl RocSpec {
    pub fn new(thresholds: Vec<f64>, kappa: f64, seed: u64) -> Self {
        RocSpec {
            features: default_features(),
            per_class: default_per_class(),
            thresholds,
            kappa,
            group_shift: default_shift(),
            identical_groups: false,
            seed,
        }
    }
}

/// Labelled examples of one group, features row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupData {
    pub features: Vec<f64>,
    pub labels: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct RocFairness {
    p: usize,
    thresholds: Vec<f64>,
    kappa: f64,
    /// `pos[g]`, `neg[g]`: row-major feature blocks.
    pos: [Vec<f64>; 2],
    neg: [Vec<f64>; 2],
    all_pos: Vec<f64>,
    all_neg: Vec<f64>,
    regularity: Regularity,
}

pub fn make_roc_fairness_toy(spec: &RocSpec) -> Result<RocFairness> {
    let p = spec.features;
    if p == 0 || spec.per_class == 0 {
        return Err(Error::config("ROC toy needs features and samples"));
    }
    let root = SeededRng::new(spec.seed, tag::PROBLEM_DATA);
    let mut rng = root.derive(&[1]);
    let dir: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
    let unit = linalg::norm(&dir).max(f64::MIN_POSITIVE);
    let shift: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
    let make_group = |g: usize| {
        let mut grng = root.derive(&[2, g as u64]);
        let offset = if g == 0 { 0.0 } else { spec.group_shift };
        let mut features = Vec::with_capacity(2 * spec.per_class * p);
        let mut labels = Vec::with_capacity(2 * spec.per_class);
        for label in [true, false] {
            let sign = if label { 0.5 } else { -0.5 };
            for _ in 0..spec.per_class {
                for c in 0..p {
                    features.push(sign * dir[c] / unit + offset * shift[c] + grng.normal());
                }
                labels.push(label);
            }
        }
        GroupData { features, labels }
    };
    let g0 = make_group(0);
    let g1 = if spec.identical_groups { g0.clone() } else { make_group(1) };
    RocFairness::from_groups(p, [g0, g1], spec.thresholds.clone(), spec.kappa)
}

impl RocFairness {
    /// Builds the toy from explicit data. Every group needs at least one
    /// positive and one negative example.
    pub fn from_groups(p: usize, groups: [GroupData; 2], thresholds: Vec<f64>, kappa: f64) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("ROC toy needs at least one finite threshold"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::config("kappa must be positive"));
        }
        let mut pos: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut neg: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (g, data) in groups.iter().enumerate() {
            if p == 0 || data.features.len() != data.labels.len() * p {
                return Err(Error::config(alloc::format!("group {g}: feature block does not match labels")));
            }
            for (row, &label) in data.features.chunks(p).zip(&data.labels) {
                if label {
                    pos[g].extend_from_slice(row);
                } else {
                    neg[g].extend_from_slice(row);
                }
            }
            if pos[g].is_empty() || neg[g].is_empty() {
                return Err(Error::config(alloc::format!("group {g} has no positive or no negative examples")));
            }
        }
        let all_pos = [pos[0].as_slice(), pos[1].as_slice()].concat();
        let all_neg = [neg[0].as_slice(), neg[1].as_slice()].concat();
        let x_max = all_pos.chunks(p).chain(all_neg.chunks(p)).map(linalg::norm).fold(0.0, f64::max);
        let curv = core::f64::consts::SQRT_2 * SIGMOID_CURVATURE * x_max * x_max;
        let regularity = Regularity {
            lipschitz: core::f64::consts::SQRT_2 * 0.25 * x_max,
            smoothness: Some(curv),
            weak_convexity: Some(curv),
            additive_weak_convexity: SIGMOID_CURVATURE * 4.0 * x_max * x_max,
        };
        Ok(RocFairness {
            p,
            thresholds,
            kappa,
            pos,
            neg,
            all_pos,
            all_neg,
            regularity,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn blocks(&self, i: usize) -> (&[f64], &[f64], f64) {
        let tau = self.thresholds[i / 2];
        if i % 2 == 0 {
            (&self.pos[0], &self.pos[1], tau)
        } else {
            (&self.neg[0], &self.neg[1], tau)
        }
    }

    fn rows(&self, block: &[f64]) -> usize {
        block.len() / self.p
    }

    fn pair(&self, xi: usize, n1: usize) -> (usize, usize) {
        (xi / n1, xi % n1)
    }

    fn check(&self, w: &[f64], batch: &[usize], population: usize) -> Result<()> {
        if w.len() != self.p {
            return Err(Error::Oracle(alloc::format!("expected dimension {}, got {}", self.p, w.len())));
        }
        if batch.is_empty() || batch.iter().any(|&k| k >= population) {
            return Err(Error::Oracle("batch indices out of range".into()));
        }
        Ok(())
    }
}

impl ConstrainedProblem for RocFairness {
    fn dim(&self) -> usize {
        self.p
    }

    fn num_constraints(&self) -> usize {
        2 * self.thresholds.len()
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::AbsGap { kappa: self.kappa }
    }

    fn objective_population(&self) -> usize {
        self.rows(&self.all_pos) * self.rows(&self.all_neg)
    }

    fn objective_value_exact(&self, w: &[f64]) -> Result<f64> {
        let p = self.p;
        let scores_p: Vec<f64> = self.all_pos.chunks(p).map(|x| linalg::dot(x, w)).collect();
        let scores_n: Vec<f64> = self.all_neg.chunks(p).map(|x| linalg::dot(x, w)).collect();
        let mut sum = 0.0;
        for sp in &scores_p {
            for sn in &scores_n {
                sum += sigmoid(sn - sp);
            }
        }
        Ok(sum / (scores_p.len() * scores_n.len()) as f64)
    }

    fn objective_grad(&self, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.check(w, batch, self.objective_population())?;
        let p = self.p;
        let nn = self.rows(&self.all_neg);
        out.iter_mut().for_each(|v| *v = 0.0);
        let c = 1.0 / batch.len() as f64;
        for &xi in batch {
            let (a, b) = self.pair(xi, nn);
            let xp = &self.all_pos[a * p..(a + 1) * p];
            let xn = &self.all_neg[b * p..(b + 1) * p];
            let s = sigmoid(linalg::dot(xn, w) - linalg::dot(xp, w));
            let scale = c * s * (1.0 - s);
            for j in 0..p {
                out[j] += scale * (xn[j] - xp[j]);
            }
        }
        Ok(())
    }

    fn constraint_population(&self, i: usize) -> usize {
        let (b0, b1, _) = self.blocks(i);
        self.rows(b0) * self.rows(b1)
    }

    fn constraint_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.check(w, batch, self.constraint_population(i))?;
        let p = self.p;
        let (b0, b1, tau) = self.blocks(i);
        let n1 = self.rows(b1);
        out[0] = 0.0;
        out[1] = 0.0;
        for &xi in batch {
            let (a, b) = self.pair(xi, n1);
            out[0] += sigmoid(linalg::dot(&b0[a * p..(a + 1) * p], w) - tau);
            out[1] += sigmoid(linalg::dot(&b1[b * p..(b + 1) * p], w) - tau);
        }
        out[0] /= batch.len() as f64;
        out[1] /= batch.len() as f64;
        Ok(())
    }

    fn constraint_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(w, batch, self.constraint_population(i))?;
        let p = self.p;
        let (b0, b1, tau) = self.blocks(i);
        let n1 = self.rows(b1);
        out.iter_mut().for_each(|v| *v = 0.0);
        let c = 1.0 / batch.len() as f64;
        for &xi in batch {
            let (a, b) = self.pair(xi, n1);
            let x0 = &b0[a * p..(a + 1) * p];
            let x1 = &b1[b * p..(b + 1) * p];
            let s0 = sigmoid(linalg::dot(x0, w) - tau);
            let s1 = sigmoid(linalg::dot(x1, w) - tau);
            linalg::axpy(c * y[0] * s0 * (1.0 - s0), x0, out);
            linalg::axpy(c * y[1] * s1 * (1.0 - s1), x1, out);
        }
        Ok(())
    }

    fn constraint_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let (b0, b1, tau) = self.blocks(i);
        let p = self.p;
        let mean = |block: &[f64]| {
            block.chunks(p).map(|x| sigmoid(linalg::dot(x, w) - tau)).sum::<f64>() / self.rows(block) as f64
        };
        out[0] = mean(b0);
        out[1] = mean(b1);
        Ok(())
    }

    fn constraint_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        let (b0, b1, tau) = self.blocks(i);
        let p = self.p;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, block) in [b0, b1].into_iter().enumerate() {
            let c = 1.0 / self.rows(block) as f64;
            for x in block.chunks(p) {
                let s = sigmoid(linalg::dot(x, w) - tau);
                linalg::axpy(c * s * (1.0 - s), x, &mut out[r * p..(r + 1) * p]);
            }
        }
        Ok(())
    }

    fn regularity(&self) -> Regularity {
        self.regularity
    }
}

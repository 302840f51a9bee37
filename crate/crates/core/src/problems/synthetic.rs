//! Synthetic FCCO instances with affine, diagonal-quadratic or sigmoid inner
//! maps and finite noisy populations.
//!
//! Sample `k` of component `i`, output `j`, evaluates
//! `g_ij(w) + sigma0 eps_ijk + sigma1 delta_ijk^T w`, where `eps` and every
//! coordinate of `delta` are centered and scaled to unit variance over the
//! population. Population means are therefore exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{FccoProblem, Regularity};
use crate::rng::{tag, SeededRng};
use crate::smoothing::OuterFunction;

use super::{sigmoid, SIGMOID_CURVATURE};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum InnerFamily {
    /// `a^T w + b`.
    Affine,
    /// `0.5 w^T diag(q) w + a^T w + b`, `q` uniform in `curvature`.
    Quadratic {
        #[cfg_attr(feature = "serde", serde(default = "default_curvature"))]
        curvature: [f64; 2],
    },
    /// `sigmoid(a^T w + b)`.
    SigmoidComposite,
}

fn default_curvature() -> [f64; 2] {
    [0.5, 1.5]
}

impl InnerFamily {
    pub fn quadratic() -> Self {
        InnerFamily::Quadratic {
            curvature: default_curvature(),
        }
    }
}

fn default_population() -> usize {
    64
}

fn default_radius() -> f64 {
    2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(deny_unknown_fields)
)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub d1: usize,
    pub family: InnerFamily,
    pub outer: OuterFunction,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sigma0: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sigma1: f64,
    /// Samples per component.
    #[cfg_attr(feature = "serde", serde(default = "default_population"))]
    pub population: usize,
    pub seed: u64,
    /// Added to every offset `b`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub value_shift: f64,
    /// Radius of the ball on which the declared constants hold.
    #[cfg_attr(feature = "serde", serde(default = "default_radius"))]
    pub radius: f64,
}

impl SyntheticSpec {
    /// Noiseless spec with the defaults above.
    pub fn new(n: usize, d: usize, d1: usize, family: InnerFamily, outer: OuterFunction, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            d1,
            family,
            outer,
            sigma0: 0.0,
            sigma1: 0.0,
            population: default_population(),
            seed,
            value_shift: 0.0,
            radius: default_radius(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticFcco {
    spec: SyntheticSpec,
    /// `a[(i * d1 + j) * d ..]`
    a: Vec<f64>,
    b: Vec<f64>,
    /// Same layout as `a`; unused for the other families.
    q: Vec<f64>,
    /// `eps[(i * d1 + j) * p + k]`
    eps: Vec<f64>,
    /// `delta[((i * d1 + j) * p + k) * d ..]`
    delta: Vec<f64>,
    regularity: Regularity,
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter_mut().for_each(|v| *v -= mean);
    let var = values.iter().map(|v| v * v).sum::<f64>() / n;
    if var > 0.0 {
        let s = 1.0 / libm::sqrt(var);
        values.iter_mut().for_each(|v| *v *= s);
    }
}

pub fn make_synthetic_fcco(spec: &SyntheticSpec) -> Result<SyntheticFcco> {
    let SyntheticSpec { n, d, d1, population: p, .. } = *spec;
    if n == 0 || d == 0 || d1 == 0 || p == 0 {
        return Err(Error::config("synthetic problem dimensions and population must be positive"));
    }
    spec.outer.validate()?;
    if spec.outer.input_dim() != d1 {
        return Err(Error::config(alloc::format!(
            "outer function takes {} inputs but d1 = {d1}",
            spec.outer.input_dim()
        )));
    }
    if !(spec.sigma0 >= 0.0 && spec.sigma1 >= 0.0) || !(spec.radius > 0.0) || !spec.value_shift.is_finite() {
        return Err(Error::config("noise levels must be nonnegative and the radius positive"));
    }
    if (spec.sigma0 > 0.0 || spec.sigma1 > 0.0) && p < 2 {
        return Err(Error::config("noisy oracles need a population of at least 2"));
    }
    if let InnerFamily::Quadratic { curvature: [lo, hi] } = spec.family {
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::config("curvature range must satisfy lo <= hi"));
        }
    }

    let root = SeededRng::new(spec.seed, tag::PROBLEM_DATA);
    let rows = n * d1;
    let mut rng = root.derive(&[1]);
    let inv_sqrt_d = 1.0 / libm::sqrt(d as f64);
    let a: Vec<f64> = (0..rows * d).map(|_| rng.normal() * inv_sqrt_d).collect();
    let b: Vec<f64> = (0..rows).map(|_| rng.normal() + spec.value_shift).collect();
    let q: Vec<f64> = match spec.family {
        InnerFamily::Quadratic { curvature: [lo, hi] } => (0..rows * d).map(|_| lo + (hi - lo) * rng.uniform()).collect(),
        _ => Vec::new(),
    };

    let mut eps = Vec::new();
    let mut delta = Vec::new();
    if spec.sigma0 > 0.0 || spec.sigma1 > 0.0 {
        let mut rng = root.derive(&[2]);
        eps = vec![0.0; rows * p];
        delta = vec![0.0; rows * p * d];
        let mut column = vec![0.0; p];
        for r in 0..rows {
            column.iter_mut().for_each(|c| *c = rng.normal());
            standardize(&mut column);
            eps[r * p..(r + 1) * p].copy_from_slice(&column);
            for c in 0..d {
                column.iter_mut().for_each(|x| *x = rng.normal());
                standardize(&mut column);
                for k in 0..p {
                    delta[(r * p + k) * d + c] = column[k] * inv_sqrt_d;
                }
            }
        }
    }

    let regularity = declared_constants(spec, &a, &q);
    let problem = SyntheticFcco {
        spec: *spec,
        a,
        b,
        q,
        eps,
        delta,
        regularity,
    };
    super::validate_declared_lipschitz(&problem, spec.radius, 100, spec.seed)?;
    Ok(problem)
}

fn declared_constants(spec: &SyntheticSpec, a: &[f64], q: &[f64]) -> Regularity {
    let SyntheticSpec { n, d, d1, radius, .. } = *spec;
    let row_norm = |r: usize| linalg::norm(&a[r * d..(r + 1) * d]);
    let q_max = |r: usize| q[r * d..(r + 1) * d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let q_neg = |r: usize| q[r * d..(r + 1) * d].iter().fold(0.0f64, |m, v| m.max(-v));
    let per_component = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..n)
            .map(|i| libm::sqrt((0..d1).map(|j| {
                let v = f(i * d1 + j);
                v * v
            }).sum::<f64>()))
            .fold(0.0, f64::max)
    };
    let (lipschitz, smooth, weak) = match spec.family {
        InnerFamily::Affine => (per_component(&row_norm), 0.0, 0.0),
        InnerFamily::Quadratic { .. } => (
            per_component(&|r| q_max(r) * radius + row_norm(r)),
            per_component(&q_max),
            per_component(&q_neg),
        ),
        InnerFamily::SigmoidComposite => {
            let curv = per_component(&|r| SIGMOID_CURVATURE * row_norm(r) * row_norm(r));
            (0.25 * per_component(&row_norm), curv, curv)
        }
    };
    Regularity {
        lipschitz,
        smoothness: Some(smooth),
        weak_convexity: Some(weak),
        additive_weak_convexity: 0.0,
    }
}

impl SyntheticFcco {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    fn check(&self, i: usize, w: &[f64]) -> Result<()> {
        if i >= self.spec.n || w.len() != self.spec.d {
            return Err(Error::Oracle(alloc::format!("bad component {i} or dimension {}", w.len())));
        }
        Ok(())
    }

    /// Noiseless value of row `r`.
    fn row_value(&self, r: usize, w: &[f64]) -> f64 {
        let d = self.spec.d;
        let a = &self.a[r * d..(r + 1) * d];
        let lin = linalg::dot(a, w) + self.b[r];
        match self.spec.family {
            InnerFamily::Affine => lin,
            InnerFamily::Quadratic { .. } => {
                let q = &self.q[r * d..(r + 1) * d];
                lin + 0.5 * (0..d).map(|c| q[c] * w[c] * w[c]).sum::<f64>()
            }
            InnerFamily::SigmoidComposite => sigmoid(lin),
        }
    }

    /// `out += y * grad g_r(w)` (noiseless).
    fn row_grad_axpy(&self, r: usize, w: &[f64], y: f64, out: &mut [f64]) {
        let d = self.spec.d;
        let a = &self.a[r * d..(r + 1) * d];
        match self.spec.family {
            InnerFamily::Affine => linalg::axpy(y, a, out),
            InnerFamily::Quadratic { .. } => {
                let q = &self.q[r * d..(r + 1) * d];
                for c in 0..d {
                    out[c] += y * (a[c] + q[c] * w[c]);
                }
            }
            InnerFamily::SigmoidComposite => {
                let s = sigmoid(linalg::dot(a, w) + self.b[r]);
                linalg::axpy(y * s * (1.0 - s), a, out);
            }
        }
    }

    fn noisy(&self) -> bool {
        !self.eps.is_empty()
    }
}

impl FccoProblem for SyntheticFcco {
    fn num_components(&self) -> usize {
        self.spec.n
    }

    fn dim(&self) -> usize {
        self.spec.d
    }

    fn inner_dim(&self) -> usize {
        self.spec.d1
    }

    fn outer(&self, _i: usize) -> OuterFunction {
        self.spec.outer
    }

    fn population(&self, _i: usize) -> usize {
        self.spec.population
    }

    fn inner_value(&self, i: usize, w: &[f64], batch: &[usize], out: &mut [f64]) -> Result<()> {
        self.check(i, w)?;
        let (d, d1, p) = (self.spec.d, self.spec.d1, self.spec.population);
        for j in 0..d1 {
            let r = i * d1 + j;
            let mut v = self.row_value(r, w);
            if self.noisy() && !batch.is_empty() {
                let mut noise = 0.0;
                for &k in batch {
                    noise += self.spec.sigma0 * self.eps[r * p + k];
                    noise += self.spec.sigma1 * linalg::dot(&self.delta[(r * p + k) * d..(r * p + k + 1) * d], w);
                }
                v += noise / batch.len() as f64;
            }
            out[j] = v;
        }
        Ok(())
    }

    fn inner_vjp(&self, i: usize, w: &[f64], batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(i, w)?;
        let (d, d1, p) = (self.spec.d, self.spec.d1, self.spec.population);
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d1 {
            let r = i * d1 + j;
            self.row_grad_axpy(r, w, y[j], out);
            if self.noisy() && self.spec.sigma1 > 0.0 && !batch.is_empty() {
                let c = self.spec.sigma1 * y[j] / batch.len() as f64;
                for &k in batch {
                    linalg::axpy(c, &self.delta[(r * p + k) * d..(r * p + k + 1) * d], out);
                }
            }
        }
        Ok(())
    }

    fn inner_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(i, w)?;
        for j in 0..self.spec.d1 {
            out[j] = self.row_value(i * self.spec.d1 + j, w);
        }
        Ok(())
    }

    fn inner_jacobian_exact(&self, i: usize, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(i, w)?;
        let d = self.spec.d;
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.spec.d1 {
            self.row_grad_axpy(i * self.spec.d1 + j, w, 1.0, &mut out[j * d..(j + 1) * d]);
        }
        Ok(())
    }

    fn regularity(&self) -> Regularity {
        self.regularity
    }
}

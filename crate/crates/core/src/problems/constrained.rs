//! Small inequality-constrained problems with known KKT points.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::penalty::{ConstrainedProblem, ConstraintKind};
use crate::problem::Regularity;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum ToyKind {
    /// `min |w - c|^2  s.t.  a_i^T w <= b_i`. Rows of `a` are the `a_i`.
    QpBox { c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `min |w - c|^2  s.t.  |w|^2 <= 1`.
    Circle { c: Vec<f64> },
    /// `min (w - 2)^2 - 0.3 cos(3w)  s.t.  w - 1 - 0.05 cos(4w) <= 0`.
    /// Objective 0.7-weakly convex, constraint 0.8-weakly convex.
    WeaklyConvex1d,
}

impl ToyKind {
    /// One-dimensional box: `min (w - 2)^2  s.t.  w <= 1`.
    pub fn qp_box_1d() -> Self {
        ToyKind::QpBox {
            c: vec![2.0],
            a: vec![vec![1.0]],
            b: vec![1.0],
        }
    }

    pub fn circle() -> Self {
        ToyKind::Circle { c: vec![2.0, 0.0] }
    }
}

/// Radius of the ball on which the circle toy's declared Lipschitz constant holds.
pub const CIRCLE_RADIUS: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct ToyConstrained {
    kind: ToyKind,
    dim: usize,
}

pub fn make_toy_constrained(kind: &ToyKind) -> Result<ToyConstrained> {
    let dim = match kind {
        ToyKind::QpBox { c, a, b } => {
            if c.is_empty() || a.is_empty() || a.len() != b.len() || a.iter().any(|r| r.len() != c.len()) {
                return Err(Error::config("qp_box needs nonempty c and one row of a per entry of b"));
            }
            c.len()
        }
        ToyKind::Circle { c } => {
            if c.is_empty() {
                return Err(Error::config("circle needs a nonempty center"));
            }
            c.len()
        }
        ToyKind::WeaklyConvex1d => 1,
    };
    Ok(ToyConstrained { kind: kind.clone(), dim })
}

impl ToyConstrained {
    pub fn toy(&self) -> &ToyKind {
        &self.kind
    }

    fn center(&self) -> Option<&[f64]> {
        match &self.kind {
            ToyKind::QpBox { c, .. } | ToyKind::Circle { c } => Some(c),
            ToyKind::WeaklyConvex1d => None,
        }
    }
}

impl ConstrainedProblem for ToyConstrained {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_constraints(&self) -> usize {
        match &self.kind {
            ToyKind::QpBox { b, .. } => b.len(),
            _ => 1,
        }
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Hinge
    }

    fn objective_value_exact(&self, w: &[f64]) -> Result<f64> {
        Ok(match self.center() {
            Some(c) => {
                let d = linalg::dist(w, c);
                d * d
            }
            None => (w[0] - 2.0) * (w[0] - 2.0) - 0.3 * libm::cos(3.0 * w[0]),
        })
    }

    fn objective_grad(&self, w: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        match self.center() {
            Some(c) => {
                for j in 0..w.len() {
                    out[j] = 2.0 * (w[j] - c[j]);
                }
            }
            None => out[0] = 2.0 * (w[0] - 2.0) + 0.9 * libm::sin(3.0 * w[0]),
        }
        Ok(())
    }

    fn constraint_value(&self, i: usize, w: &[f64], _batch: &[usize], out: &mut [f64]) -> Result<()> {
        out[0] = match &self.kind {
            ToyKind::QpBox { a, b, .. } => linalg::dot(&a[i], w) - b[i],
            ToyKind::Circle { .. } => linalg::dot(w, w) - 1.0,
            ToyKind::WeaklyConvex1d => w[0] - 1.0 - 0.05 * libm::cos(4.0 * w[0]),
        };
        Ok(())
    }

    fn constraint_vjp(&self, i: usize, w: &[f64], _batch: &[usize], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            ToyKind::QpBox { a, .. } => {
                for j in 0..w.len() {
                    out[j] = y[0] * a[i][j];
                }
            }
            ToyKind::Circle { .. } => {
                for j in 0..w.len() {
                    out[j] = 2.0 * y[0] * w[j];
                }
            }
            ToyKind::WeaklyConvex1d => out[0] = y[0] * (1.0 + 0.2 * libm::sin(4.0 * w[0])),
        }
        Ok(())
    }

    fn regularity(&self) -> Regularity {
        match &self.kind {
            ToyKind::QpBox { a, .. } => Regularity {
                lipschitz: a.iter().map(|r| linalg::norm(r)).fold(0.0, f64::max),
                smoothness: Some(0.0),
                weak_convexity: Some(0.0),
                additive_weak_convexity: 0.0,
            },
            ToyKind::Circle { .. } => Regularity {
                lipschitz: 2.0 * CIRCLE_RADIUS,
                smoothness: Some(2.0),
                weak_convexity: Some(0.0),
                additive_weak_convexity: 0.0,
            },
            // Treated as merely weakly convex so the monotone-outer path is used.
            ToyKind::WeaklyConvex1d => Regularity {
                lipschitz: 1.2,
                smoothness: None,
                weak_convexity: Some(0.8),
                additive_weak_convexity: 0.7,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_checked() {
        assert!(make_toy_constrained(&ToyKind::QpBox {
            c: vec![1.0],
            a: vec![vec![1.0, 2.0]],
            b: vec![0.0]
        })
        .is_err());
        assert!(make_toy_constrained(&ToyKind::Circle { c: vec![] }).is_err());
        assert_eq!(make_toy_constrained(&ToyKind::circle()).unwrap().dim(), 2);
    }

    #[test]
    fn weakly_convex_toy_derivatives() {
        let p = make_toy_constrained(&ToyKind::WeaklyConvex1d).unwrap();
        let h = 1e-6;
        for &w in &[-1.0, 0.3, 0.97, 2.5] {
            let mut g = [0.0];
            p.objective_grad(&[w], &[0], &mut g).unwrap();
            let fd = (p.objective_value_exact(&[w + h]).unwrap() - p.objective_value_exact(&[w - h]).unwrap()) / (2.0 * h);
            assert!((g[0] - fd).abs() < 1e-7);
            let (mut a, mut b) = ([0.0], [0.0]);
            p.constraint_value(0, &[w + h], &[0], &mut a).unwrap();
            p.constraint_value(0, &[w - h], &[0], &mut b).unwrap();
            let mut j = [0.0];
            p.constraint_vjp(0, &[w], &[0], &[1.0], &mut j).unwrap();
            assert!((j[0] - (a[0] - b[0]) / (2.0 * h)).abs() < 1e-7);
        }
    }
}

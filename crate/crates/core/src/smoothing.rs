//! Outer functions with closed-form proximal maps, their Moreau envelopes
//! `f_lambda(t) = min_v f(v) + |v - t|^2 / (2 lambda)` and envelope gradients
//! `(t - prox_{lambda f}(t)) / lambda`.

use core::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Largest input dimension in the catalog.
pub const MAX_INPUT_DIM: usize = 2;

/// The outer-function catalog.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "snake_case")
)]
pub enum OuterFunction {
    /// `rho * max(z, 0)`, scalar input.
    ScaledHinge { rho: f64 },
    /// `max(z, 0) / ratio`, the CVaR hinge with tail fraction `ratio`.
    CvarHinge { ratio: f64 },
    /// `scale * max(|z1 - z2| - kappa, 0)`, two inputs.
    GapHinge { kappa: f64, scale: f64 },
    /// `z`, scalar input; used for components that are already smooth.
    Identity,
    /// `rho * ln(1 + max(z, 0))`: monotone, `rho`-Lipschitz and `rho`-weakly
    /// convex. Exercises the weakly convex paths.
    LogHinge { rho: f64 },
}

impl OuterFunction {
    pub fn gap_hinge(kappa: f64) -> Self {
        OuterFunction::GapHinge { kappa, scale: 1.0 }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            OuterFunction::GapHinge { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OuterFunction::ScaledHinge { rho } | OuterFunction::LogHinge { rho } => rho > 0.0 && rho.is_finite(),
            OuterFunction::CvarHinge { ratio } => ratio > 0.0 && ratio <= 1.0,
            OuterFunction::GapHinge { kappa, scale } => kappa >= 0.0 && kappa.is_finite() && scale > 0.0 && scale.is_finite(),
            OuterFunction::Identity => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(alloc::format!("invalid outer function parameters: {self:?}")))
        }
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.input_dim());
        match *self {
            OuterFunction::ScaledHinge { rho } => rho * t[0].max(0.0),
            OuterFunction::CvarHinge { ratio } => t[0].max(0.0) / ratio,
            OuterFunction::GapHinge { kappa, scale } => scale * (libm::fabs(t[0] - t[1]) - kappa).max(0.0),
            OuterFunction::Identity => t[0],
            OuterFunction::LogHinge { rho } => rho * libm::log1p(t[0].max(0.0)),
        }
    }

    /// Lipschitz constant `C_f`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            OuterFunction::ScaledHinge { rho } | OuterFunction::LogHinge { rho } => rho,
            OuterFunction::CvarHinge { ratio } => 1.0 / ratio,
            OuterFunction::GapHinge { scale, .. } => SQRT_2 * scale,
            OuterFunction::Identity => 1.0,
        }
    }

    /// Weak-convexity modulus `rho_f` (0 for convex members).
    pub fn weak_convexity(&self) -> f64 {
        match *self {
            OuterFunction::LogHinge { rho } => rho,
            _ => 0.0,
        }
    }

    pub fn is_convex(&self) -> bool {
        self.weak_convexity() == 0.0
    }

    pub fn is_monotone_nondecreasing(&self) -> bool {
        !matches!(self, OuterFunction::GapHinge { .. })
    }

    /// The envelope exists only for `lambda < 1 / rho_f`.
    pub fn check_smoothing(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::config(alloc::format!("smoothing parameter must be positive, got {lambda}")));
        }
        let rho = self.weak_convexity();
        if rho > 0.0 && lambda * rho >= 1.0 {
            return Err(Error::config(alloc::format!(
                "smoothing parameter {lambda} must be below 1/rho_f = {}",
                1.0 / rho
            )));
        }
        Ok(())
    }

    /// `prox_{lambda f}(t)` written into `out`.
    pub fn prox(&self, lambda: f64, t: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_smoothing(lambda)?;
        self.prox_unchecked(lambda, t, out);
        Ok(())
    }

    fn prox_unchecked(&self, lambda: f64, t: &[f64], out: &mut [f64]) {
        debug_assert_eq!(t.len(), self.input_dim());
        match *self {
            OuterFunction::ScaledHinge { rho } => out[0] = hinge_prox(t[0], lambda * rho),
            OuterFunction::CvarHinge { ratio } => out[0] = hinge_prox(t[0], lambda / ratio),
            OuterFunction::Identity => out[0] = t[0] - lambda,
            OuterFunction::GapHinge { kappa, scale } => {
                // The objective only sees d = t1 - t2; the sum t1 + t2 is kept.
                // In d, this is a hinge on |d| - kappa with slope 2 * lambda * scale.
                let d = t[0] - t[1];
                let shrink = 2.0 * lambda * scale;
                let mag = libm::fabs(d);
                let new_mag = if mag <= kappa { mag } else { (mag - shrink).max(kappa) };
                let delta = (mag - new_mag).copysign(d);
                out[0] = t[0] - 0.5 * delta;
                out[1] = t[1] + 0.5 * delta;
            }
            OuterFunction::LogHinge { rho } => {
                let z = t[0];
                let c = lambda * rho;
                out[0] = if z <= 0.0 {
                    z
                } else if z <= c {
                    0.0
                } else {
                    // Positive root of v^2 + (1 - z) v + (c - z) = 0.
                    0.5 * ((z - 1.0) + libm::sqrt((1.0 + z) * (1.0 + z) - 4.0 * c))
                };
            }
        }
    }
}

#[inline]
fn hinge_prox(t: f64, cap: f64) -> f64 {
    if t > cap {
        t - cap
    } else if t >= 0.0 {
        0.0
    } else {
        t
    }
}

/// `min(max(z, 0), lambda * rho) / lambda`: the envelope gradient of `rho * max(z, 0)`.
pub fn hinge_moreau_grad_closed_form(z: f64, lambda: f64, rho: f64) -> Result<f64> {
    if !(lambda > 0.0 && rho > 0.0) {
        return Err(Error::config("hinge envelope needs lambda > 0 and rho > 0"));
    }
    Ok(z.max(0.0).min(lambda * rho) / lambda)
}

/// `grad f_lambda(t) = (t - prox_{lambda f}(t)) / lambda`, an element of
/// `partial f(prox_{lambda f}(t))`.
pub fn moreau_grad(outer: &OuterFunction, lambda: f64, t: &[f64], out: &mut [f64]) -> Result<()> {
    outer.check_smoothing(lambda)?;
    match *outer {
        // Hinge members use the capped form directly so the result is
        // bit-identical to the closed form.
        OuterFunction::ScaledHinge { rho } => out[0] = t[0].max(0.0).min(lambda * rho) / lambda,
        OuterFunction::CvarHinge { ratio } => out[0] = t[0].max(0.0).min(lambda / ratio) / lambda,
        _ => {
            let mut p = [0.0; MAX_INPUT_DIM];
            let k = outer.input_dim();
            outer.prox_unchecked(lambda, t, &mut p[..k]);
            for j in 0..k {
                out[j] = (t[j] - p[j]) / lambda;
            }
        }
    }
    Ok(())
}

/// `f_lambda(t) = f(p) + |t - p|^2 / (2 lambda)` with `p = prox_{lambda f}(t)`.
pub fn moreau_value(outer: &OuterFunction, lambda: f64, t: &[f64]) -> Result<f64> {
    outer.check_smoothing(lambda)?;
    let mut p = [0.0; MAX_INPUT_DIM];
    let k = outer.input_dim();
    outer.prox_unchecked(lambda, t, &mut p[..k]);
    let sq: f64 = (0..k).map(|j| (t[j] - p[j]) * (t[j] - p[j])).sum();
    Ok(outer.value(&p[..k]) + sq / (2.0 * lambda))
}

/// Dual mixing weight `gamma / (1 + gamma)`.
pub fn dual_mixing(gamma: f64) -> f64 {
    gamma / (1.0 + gamma)
}

/// Dual step of the primal-dual inner solver, carried out on a tracker `u`
/// instead of on the conjugate:
///
/// `u_new = (1 - mix) u_prev + mix g_tilde`, `y_new = grad f_lambda(u_new)`,
///
/// where `g_tilde` already contains the extrapolation and `mix` is
/// [`dual_mixing`] of the dual step size.
pub fn dual_tracker_update(
    outer: &OuterFunction,
    lambda: f64,
    u_prev: &[f64],
    g_tilde: &[f64],
    mix: f64,
    u_new: &mut [f64],
    y_new: &mut [f64],
) -> Result<()> {
    if !outer.is_convex() {
        return Err(Error::unsupported(alloc::format!(
            "dual tracker update needs a convex outer function, got {outer:?}"
        )));
    }
    if !(mix > 0.0 && mix <= 1.0) {
        return Err(Error::config(alloc::format!("dual mixing weight {mix} outside (0, 1]")));
    }
    for j in 0..u_prev.len() {
        u_new[j] = (1.0 - mix) * u_prev[j] + mix * g_tilde[j];
    }
    moreau_grad(outer, lambda, u_new, y_new)
}

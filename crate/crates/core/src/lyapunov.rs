//! Truncated Lyapunov exponents `(1/t)∫₀ᵗ ∂ₓp(r, x(r)) dr` along branches.
//!
//! The branch is regenerated at the integration step and the integrand is
//! integrated by composite Simpson on that same grid, so nothing is
//! interpolated from the decimated report grid.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{Branch, BranchSet, Source, Stability};
use crate::field::CubicField;
use crate::integrate::{Direction, IntegrateError, Rk4, ScalarOde, Status};
use crate::numerics::Numerics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("need 0 < tau < T, got tau = {tau}, T = {t}")]
    BadWindow { tau: f64, t: f64 },
    #[error("regenerated solution escaped at t = {0}; the branch does not cover the window")]
    InsufficientCoverage(f64),
    #[error("origin {0} is outside the branch window")]
    OriginOutside(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Negative,
    Positive,
    StraddlesZero,
}

impl Sign {
    pub fn of(gamma_l: f64, gamma_u: f64) -> Self {
        if gamma_u < 0.0 {
            Sign::Negative
        } else if gamma_l > 0.0 {
            Sign::Positive
        } else {
            Sign::StraddlesZero
        }
    }

    pub fn stability(self) -> Stability {
        match self {
            Sign::Negative => Stability::Attractive,
            Sign::Positive => Stability::Repulsive,
            Sign::StraddlesZero => Stability::Undetermined,
        }
    }
}

/// Min and max of the truncated exponent over `t ∈ [tau, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapBounds {
    pub gamma_l: f64,
    #[serde(alias = "gamma_r")]
    pub gamma_u: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub tau: f64,
    pub sign: Sign,
    /// Time the integral starts from.
    pub origin: f64,
    pub direction: Direction,
}

/// Integrates `ode` from `(origin, x0)` for `span` time units and calls
/// `visit(elapsed, exponent)` every `every` steps (`every` must be even).
pub fn exponent_scan<O, V>(
    ode: &O,
    rk4: Rk4,
    origin: f64,
    x0: f64,
    direction: Direction,
    span: f64,
    every: u64,
    mut visit: V,
) -> Result<(), LyapError>
where
    O: ScalarOde,
    V: FnMut(f64, f64),
{
    assert!(every > 0 && every % 2 == 0, "Simpson needs an even sample spacing");
    let h = rk4.h;
    let steps = (span / h).round() as u64;
    let t_end = origin + direction.sign() * steps as f64 * h;
    let (mut integral, mut f_even, mut f_odd) = (0.0, 0.0, 0.0);
    let end = rk4.run(ode, origin, x0, t_end, |p| {
        let fx = ode.slope(&p.frame, p.x);
        if p.index == 0 {
            f_even = fx;
        } else if p.index % 2 == 1 {
            f_odd = fx;
        } else {
            integral += h / 3.0 * (f_even + 4.0 * f_odd + fx);
            f_even = fx;
            if p.index % every == 0 {
                let elapsed = p.index as f64 * h;
                visit(elapsed, integral / elapsed);
            }
        }
        ControlFlow::Continue(())
    })?;
    match end.status {
        Status::Escaped { at_time, .. } => Err(LyapError::InsufficientCoverage(at_time)),
        _ => Ok(()),
    }
}

/// Where a branch's exponent run starts and which way it goes. Attractive
/// and exact branches run forward from `origin` (default: the window's left
/// end); the repulsive branch runs backward from the window's right end.
fn start_of(branch: &Branch, origin: Option<f64>) -> Result<(f64, f64, Direction), LyapError> {
    let direction = match branch.source {
        Source::BackwardMid => Direction::Backward,
        _ => Direction::Forward,
    };
    let t = origin.unwrap_or(match direction {
        Direction::Forward => branch.t_start,
        Direction::Backward => branch.t_end(),
    });
    let x = branch.at(t).ok_or(LyapError::OriginOutside(t))?;
    Ok((t, x, direction))
}

/// The truncated exponent at elapsed time `t` (rounded to an even number of
/// steps).
pub fn truncated_exponent(
    field: &CubicField,
    eps: f64,
    branch: &Branch,
    t: f64,
    num: &Numerics,
) -> Result<f64, LyapError> {
    if !(t > 0.0) {
        return Err(LyapError::BadWindow { tau: t, t });
    }
    let (origin, x0, dir) = start_of(branch, None)?;
    let steps = ((t / num.h / 2.0).round() as u64).max(1) * 2;
    let mut out = f64::NAN;
    exponent_scan(&field.at(eps), num.rk4(), origin, x0, dir, steps as f64 * num.h, steps, |_, g| {
        out = g
    })?;
    Ok(out)
}

pub fn lyap_bounds(
    field: &CubicField,
    eps: f64,
    branch: &Branch,
    t_max: f64,
    tau: f64,
    num: &Numerics,
) -> Result<LyapBounds, LyapError> {
    lyap_bounds_from(field, eps, branch, None, t_max, tau, num)
}

/// [`lyap_bounds`] with an explicit time origin for forward runs.
pub fn lyap_bounds_from(
    field: &CubicField,
    eps: f64,
    branch: &Branch,
    origin: Option<f64>,
    t_max: f64,
    tau: f64,
    num: &Numerics,
) -> Result<LyapBounds, LyapError> {
    let (origin, x0, direction) = start_of(branch, origin)?;
    bounds_along(&field.at(eps), num, origin, x0, direction, t_max, tau)
}

/// Min/max of the exponent along the solution of `ode` through `(origin, x0)`,
/// sampled every report step in `[tau, t_max]`.
pub fn bounds_along<O: ScalarOde>(
    ode: &O,
    num: &Numerics,
    origin: f64,
    x0: f64,
    direction: Direction,
    t_max: f64,
    tau: f64,
) -> Result<LyapBounds, LyapError> {
    if !(tau > 0.0 && tau < t_max) {
        return Err(LyapError::BadWindow { tau, t: t_max });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let slack = 1e-9 * num.h;
    exponent_scan(ode, num.rk4(), origin, x0, direction, t_max, num.report_stride, |s, g| {
        if s >= tau - slack && s <= t_max + slack {
            lo = lo.min(g);
            hi = hi.max(g);
        }
    })?;
    if lo > hi {
        return Err(LyapError::BadWindow { tau, t: t_max });
    }
    Ok(LyapBounds {
        gamma_l: lo,
        gamma_u: hi,
        t_max,
        tau,
        sign: Sign::of(lo, hi),
        origin,
        direction,
    })
}

/// Attaches Lyapunov bounds over the evaluation window (`T = 2·t_eval`,
/// `tau = T/10`) to every branch and sets its stability from their sign.
pub fn annotate(field: &CubicField, set: &mut BranchSet, num: &Numerics) -> Result<(), LyapError> {
    let t_max = 2.0 * num.t_eval;
    let eps = set.epsilon;
    for b in set.branches_mut() {
        let lb = lyap_bounds(field, eps, b, t_max, t_max / 10.0, num)?;
        b.stability = lb.sign.stability();
        b.lyap = Some(lb);
    }
    Ok(())
}

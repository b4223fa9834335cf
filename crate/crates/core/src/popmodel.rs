//! The population model `x' = r(t)x²(1 − x/k(t)) + ε b(t)(x − s)`:
//! a single-species Allee-type growth law with migration of intensity ε.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcate::{bisect_with, BifurcationError, BifurcationReport, Bisection, Predicate, Probe};
use crate::branches::crossing_in;
use crate::coeffs::{Coeff, TrigPoly};
use crate::field::{ConstantTerm, CubicField, FieldError};
use crate::integrate::{IntegrateError, Status, Trajectory};
use crate::numerics::Numerics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopScenario {
    /// Growth rate.
    pub r: TrigPoly,
    /// Carrying capacity.
    pub k: TrigPoly,
    /// Migration profile.
    pub b: TrigPoly,
    pub s: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn default_x0() -> f64 {
    0.9
}

fn default_horizon() -> f64 {
    2e4
}

impl PopScenario {
    /// `r ≡ 1`, `k = 2 + 0.5 sin(√3 t)`, `b = 2.1 + 0.3 cos t`, `s = 2.6`.
    pub fn reference(eps: f64, x0: f64) -> Self {
        PopScenario {
            r: TrigPoly::constant(1.0),
            k: TrigPoly::constant(2.0).sine(0.5, 3f64.sqrt(), 0.0),
            b: TrigPoly::constant(2.1).cosine(0.3, 1.0, 0.0),
            s: 2.6,
            eps,
            x0,
            horizon: default_horizon(),
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        PopScenario { eps, ..self.clone() }
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        PopScenario { x0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), PopError> {
        let bad = |m: String| Err(PopError::Invalid(m));
        for (name, p) in [("r", &self.r), ("k", &self.k), ("b", &self.b)] {
            p.validate().map_err(|e| PopError::Invalid(format!("{name}: {e}")))?;
            if p.lower_bound() <= 0.0 {
                return bad(format!("{name} must be bounded below by a positive number"));
            }
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps must be nonnegative, got {}", self.eps));
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0) {
            return bad(format!("x0 must be nonnegative, got {}", self.x0));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        Ok(())
    }

    /// The same equation in cubic form:
    /// `x' = (r/k)(−x³ + k x² + ε (k b / r)(x − s))`.
    pub fn field(&self) -> Result<CubicField, PopError> {
        self.validate()?;
        let scale = Coeff::new(1.0, vec![self.r.clone()], vec![self.k.clone()])
            .map_err(FieldError::from)?;
        let b = Coeff::new(1.0, vec![self.k.clone(), self.b.clone()], vec![self.r.clone()])
            .map_err(FieldError::from)?;
        Ok(CubicField::new(
            self.k.clone(),
            b,
            ConstantTerm::RatioOfB(self.s),
            Some(scale),
        )?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutcomeKind {
    Survival,
    Extinction { time: f64 },
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attained {
    Upper,
    Lower,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub eps: f64,
    pub x0: f64,
    pub kind: OutcomeKind,
    pub attained_branch: Attained,
    /// `x(horizon)` for a survival, absent otherwise.
    pub attained_level: Option<f64>,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self.kind {
            OutcomeKind::Survival => "survival",
            OutcomeKind::Extinction { .. } => "extinction",
            OutcomeKind::Undetermined => "undetermined",
        }
    }

    pub fn extinction_time(&self) -> Option<f64> {
        match self.kind {
            OutcomeKind::Extinction { time } => Some(time),
            _ => None,
        }
    }
}

pub fn simulate_population(sc: &PopScenario, num: &Numerics) -> Result<Outcome, PopError> {
    simulate_with_trajectory(sc, num).map(|(o, _)| o)
}

/// Runs from `(0, x0)` until the first crossing of 0 or the horizon. The
/// trajectory is sampled on the report grid (plus the stopping point).
pub fn simulate_with_trajectory(
    sc: &PopScenario,
    num: &Numerics,
) -> Result<(Outcome, Trajectory), PopError> {
    num.validate().map_err(|e| PopError::Invalid(e.to_string()))?;
    let field = sc.field()?;
    let ode = field.at(sc.eps);
    let rk4 = num.rk4();
    let stride = num.report_stride;
    let tail_from = 0.9 * sc.horizon;
    let mut samples = Vec::new();
    let mut tail = Vec::new();
    let mut prev = (0.0, sc.x0);
    let mut crossing = None;
    let end = rk4.run(&ode, 0.0, sc.x0, sc.horizon, |p| {
        if p.index > 0 {
            if let Some(t) = crossing_in(&[prev, (p.t, p.x)], 0.0) {
                crossing = Some(t);
                samples.push(p.x);
                return ControlFlow::Break(());
            }
        }
        prev = (p.t, p.x);
        if p.index % stride == 0 {
            samples.push(p.x);
            if p.t >= tail_from {
                tail.push((p.t, p.x));
            }
        }
        ControlFlow::Continue(())
    })?;
    let traj = Trajectory {
        t0: 0.0,
        h: num.h,
        stride,
        direction: crate::integrate::Direction::Forward,
        samples,
        t_last: end.t,
        x_last: end.x,
        status: end.status,
    };
    let outcome = |kind, attained_branch, attained_level| Outcome {
        eps: sc.eps,
        x0: sc.x0,
        kind,
        attained_branch,
        attained_level,
    };
    if let Some(time) = crossing {
        return Ok((
            outcome(OutcomeKind::Extinction { time }, Attained::Lower, None),
            traj,
        ));
    }
    if matches!(end.status, Status::Escaped { .. }) {
        return Ok((outcome(OutcomeKind::Undetermined, Attained::None, None), traj));
    }
    // the upper branch over the tail, located like `branch_set` does: a
    // pullback from r2 started t_run before the tail
    let (_, r2) = field.bracket_constants(sc.eps)?;
    let first = tail.first().map_or(tail_from, |p| p.0);
    let mut upper = Vec::with_capacity(tail.len());
    rk4.run(&ode, first - num.t_run, r2, sc.horizon, |p| {
        if p.index % stride == 0 && p.t >= tail_from {
            upper.push((p.t, p.x));
        }
        ControlFlow::Continue(())
    })?;
    let on_upper = !tail.is_empty()
        && upper.len() == tail.len()
        && tail.iter().zip(&upper).all(|(&(t, x), &(tu, u))| {
            (t - tu).abs() < 1e-6 && (x - u).abs() <= num.delta_track
        });
    Ok(if on_upper {
        (
            outcome(OutcomeKind::Survival, Attained::Upper, Some(end.x)),
            traj,
        )
    } else {
        (outcome(OutcomeKind::Undetermined, Attained::None, None), traj)
    })
}

/// Bisection for the migration intensity at which the initial population
/// `sc.x0` stops surviving. Undetermined outcomes count as "not survival"
/// and are flagged.
pub fn critical_intensity(
    sc: &PopScenario,
    eps_lo: f64,
    eps_hi: f64,
    num: &Numerics,
) -> Result<BifurcationReport, BifurcationError> {
    let cfg = Bisection {
        reduced_until: None,
        ..Bisection::from_numerics(num)
    };
    bisect_with(Predicate::Survival, eps_lo, eps_hi, cfg, |eps, _| {
        let o = simulate_population(&sc.with_eps(eps), num)?;
        Ok(Probe {
            value: o.kind == OutcomeKind::Survival,
            flagged: o.kind == OutcomeKind::Undetermined,
            witness: None,
        })
    })
}

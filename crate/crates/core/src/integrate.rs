//! Fixed-step classical RK4, forward or backward in time, with escape
//! detection. No adaptive stepping anywhere: identical inputs give identical
//! bits.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default step, `2⁻¹⁰`.
pub const DEFAULT_STEP: f64 = 1.0 / 1024.0;
/// Escape guard on `|x|`.
pub const X_MAX: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("initial value {0} is outside the escape guard")]
    OutsideGuard(f64),
    #[error("zero-length integration window")]
    EmptyWindow,
    #[error("solution escaped at t = {t} (last finite x = {x})")]
    Escaped { t: f64, x: f64 },
    #[error("step-halving differences vanished; order is undefined")]
    DegenerateOrder,
}

/// A scalar nonautonomous ODE `x' = f(t, x)` split into a time-only "frame"
/// (coefficients frozen at `t`) and cheap evaluations at that frame.
pub trait ScalarOde {
    type Frame: Copy;
    type Frames<'s>: Iterator<Item = Self::Frame>
    where
        Self: 's;

    fn frame(&self, t: f64) -> Self::Frame;
    fn value(&self, frame: &Self::Frame, x: f64) -> f64;
    /// `∂f/∂x`.
    fn slope(&self, frame: &Self::Frame, x: f64) -> f64;
    /// Frames at `t0 + j·dt` for `j = 0, 1, 2, …`.
    fn frames(&self, t0: f64, dt: f64) -> Self::Frames<'_>;
}

/// `x' = rate·x + offset`, a surrogate with closed-form solutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub rate: f64,
    pub offset: f64,
}

impl ScalarOde for Affine {
    type Frame = ();
    type Frames<'s> = std::iter::Repeat<()>;

    fn frame(&self, _t: f64) {}

    fn value(&self, _: &(), x: f64) -> f64 {
        self.rate * x + self.offset
    }

    fn slope(&self, _: &(), _x: f64) -> f64 {
        self.rate
    }

    fn frames(&self, _t0: f64, _dt: f64) -> Self::Frames<'_> {
        std::iter::repeat(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum Status {
    Completed,
    /// `|x|` reached the guard (or went non-finite) at `at_time`; `last_x` is
    /// the last value inside the guard.
    Escaped { at_time: f64, last_x: f64 },
    /// The visitor asked to stop.
    Stopped,
}

/// A grid point handed to a run visitor.
#[derive(Clone, Copy, Debug)]
pub struct StepPoint<F> {
    /// Full steps taken so far; the shortened final step counts as one.
    pub index: u64,
    pub t: f64,
    pub x: f64,
    pub frame: F,
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunEnd {
    pub status: Status,
    pub t: f64,
    pub x: f64,
    pub steps: u64,
}

/// Fixed-step RK4 settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rk4 {
    pub h: f64,
    pub x_max: f64,
    /// Keep every `stride`-th step in returned trajectories.
    pub stride: u64,
}

impl Default for Rk4 {
    fn default() -> Self {
        Rk4 {
            h: DEFAULT_STEP,
            x_max: X_MAX,
            stride: 1,
        }
    }
}

#[inline(always)]
fn rk4_step<O: ScalarOde>(
    ode: &O,
    f0: &O::Frame,
    fm: &O::Frame,
    f1: &O::Frame,
    x: f64,
    dt: f64,
) -> f64 {
    let k1 = ode.value(f0, x);
    let k2 = ode.value(fm, x + 0.5 * dt * k1);
    let k3 = ode.value(fm, x + 0.5 * dt * k2);
    let k4 = ode.value(f1, x + dt * k3);
    x + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
}

impl Rk4 {
    pub fn new(h: f64) -> Self {
        Rk4 {
            h,
            ..Rk4::default()
        }
    }

    pub fn decimate(mut self, stride: u64) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn guard(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }

    fn check(&self, t0: f64, x0: f64, t_end: f64) -> Result<(), IntegrateError> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(IntegrateError::InvalidStep(self.h));
        }
        if !t0.is_finite() || !t_end.is_finite() {
            return Err(IntegrateError::NonFinite("time"));
        }
        if !x0.is_finite() {
            return Err(IntegrateError::NonFinite("initial value"));
        }
        if x0.abs() >= self.x_max {
            return Err(IntegrateError::OutsideGuard(x0));
        }
        Ok(())
    }

    /// Integrates from `(t0, x0)` to `t_end` (either direction), calling
    /// `visit` at the start point and after every step. The last step is
    /// shortened to land exactly on `t_end`.
    pub fn run<O, V>(
        &self,
        ode: &O,
        t0: f64,
        x0: f64,
        t_end: f64,
        mut visit: V,
    ) -> Result<RunEnd, IntegrateError>
    where
        O: ScalarOde,
        V: FnMut(&StepPoint<O::Frame>) -> ControlFlow<()>,
    {
        self.check(t0, x0, t_end)?;
        let span = (t_end - t0).abs();
        let sign = if t_end >= t0 { 1.0 } else { -1.0 };
        let dt = sign * self.h;
        let mut full = (span / self.h).floor() as u64;
        let mut rest = span - full as f64 * self.h;
        if rest < 1e-9 * self.h {
            rest = 0.0;
        } else if self.h - rest < 1e-9 * self.h {
            full += 1;
            rest = 0.0;
        }

        let mut frames = ode.frames(t0, 0.5 * dt);
        let mut f0 = frames.next().expect("frame iterators are infinite");
        let mut x = x0;
        let mut t = t0;
        let stop = |status| RunEnd {
            status,
            t,
            x,
            steps: 0,
        };
        if visit(&StepPoint {
            index: 0,
            t,
            x,
            frame: f0,
        })
        .is_break()
        {
            return Ok(stop(Status::Stopped));
        }

        let escaped = |v: f64| !v.is_finite() || v.abs() >= self.x_max;
        for i in 0..full {
            let fm = frames.next().expect("frame iterators are infinite");
            let f1 = frames.next().expect("frame iterators are infinite");
            let next = rk4_step(ode, &f0, &fm, &f1, x, dt);
            let t_next = t0 + (i + 1) as f64 * dt;
            if escaped(next) {
                return Ok(RunEnd {
                    status: Status::Escaped {
                        at_time: t_next,
                        last_x: x,
                    },
                    t,
                    x,
                    steps: i,
                });
            }
            x = next;
            t = t_next;
            f0 = f1;
            if visit(&StepPoint {
                index: i + 1,
                t,
                x,
                frame: f0,
            })
            .is_break()
            {
                return Ok(RunEnd {
                    status: Status::Stopped,
                    t,
                    x,
                    steps: i + 1,
                });
            }
        }

        let mut steps = full;
        if rest > 0.0 {
            let dt_rest = sign * rest;
            let fm = ode.frame(t + 0.5 * dt_rest);
            let f1 = ode.frame(t_end);
            let next = rk4_step(ode, &f0, &fm, &f1, x, dt_rest);
            if escaped(next) {
                return Ok(RunEnd {
                    status: Status::Escaped {
                        at_time: t_end,
                        last_x: x,
                    },
                    t,
                    x,
                    steps,
                });
            }
            x = next;
            t = t_end;
            steps += 1;
            if visit(&StepPoint {
                index: steps,
                t,
                x,
                frame: f1,
            })
            .is_break()
            {
                return Ok(RunEnd {
                    status: Status::Stopped,
                    t,
                    x,
                    steps,
                });
            }
        }
        Ok(RunEnd {
            status: Status::Completed,
            t,
            x,
            steps,
        })
    }

    /// Integrates `M` initial values in lockstep on one time grid, sharing
    /// the coefficient frames. Independent lanes also give the CPU independent
    /// dependency chains, so this is markedly faster than `M` separate runs.
    /// `visit(index, t, xs)` sees every grid point; a lane that escapes is
    /// frozen at its last value and reported in its own [`RunEnd`].
    pub fn run_lanes<O, V, const M: usize>(
        &self,
        ode: &O,
        t0: f64,
        x0: [f64; M],
        t_end: f64,
        mut visit: V,
    ) -> Result<[RunEnd; M], IntegrateError>
    where
        O: ScalarOde,
        V: FnMut(u64, f64, &[f64; M]),
    {
        for &x in &x0 {
            self.check(t0, x, t_end)?;
        }
        let span = (t_end - t0).abs();
        let sign = if t_end >= t0 { 1.0 } else { -1.0 };
        let dt = sign * self.h;
        let mut full = (span / self.h).floor() as u64;
        let mut rest = span - full as f64 * self.h;
        if rest < 1e-9 * self.h {
            rest = 0.0;
        } else if self.h - rest < 1e-9 * self.h {
            full += 1;
            rest = 0.0;
        }
        let mut ends = x0.map(|x| RunEnd {
            status: Status::Completed,
            t: t0,
            x,
            steps: 0,
        });
        let mut live = [true; M];
        let mut xs = x0;
        let mut t = t0;
        visit(0, t, &xs);

        let mut step = |xs: &mut [f64; M], f0: &O::Frame, fm: &O::Frame, f1: &O::Frame, dt: f64, t_next: f64, i: u64| {
            let half = 0.5 * dt;
            let k1 = xs.map(|x| ode.value(f0, x));
            let mut k2 = [0.0; M];
            for j in 0..M {
                k2[j] = ode.value(fm, xs[j] + half * k1[j]);
            }
            let mut k3 = [0.0; M];
            for j in 0..M {
                k3[j] = ode.value(fm, xs[j] + half * k2[j]);
            }
            let mut k4 = [0.0; M];
            for j in 0..M {
                k4[j] = ode.value(f1, xs[j] + dt * k3[j]);
            }
            for j in 0..M {
                if !live[j] {
                    continue;
                }
                let next = xs[j] + dt / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
                if !next.is_finite() || next.abs() >= self.x_max {
                    live[j] = false;
                    ends[j].status = Status::Escaped {
                        at_time: t_next,
                        last_x: xs[j],
                    };
                } else {
                    xs[j] = next;
                    ends[j].t = t_next;
                    ends[j].x = next;
                    ends[j].steps = i + 1;
                }
            }
        };

        let mut frames = ode.frames(t0, 0.5 * dt);
        let mut f0 = frames.next().expect("frame iterators are infinite");
        for i in 0..full {
            let fm = frames.next().expect("frame iterators are infinite");
            let f1 = frames.next().expect("frame iterators are infinite");
            t = t0 + (i + 1) as f64 * dt;
            step(&mut xs, &f0, &fm, &f1, dt, t, i);
            f0 = f1;
            visit(i + 1, t, &xs);
        }
        if rest > 0.0 {
            let dt_rest = sign * rest;
            let fm = ode.frame(t + 0.5 * dt_rest);
            let f1 = ode.frame(t_end);
            step(&mut xs, &f0, &fm, &f1, dt_rest, t_end, full);
            visit(full + 1, t_end, &xs);
        }
        Ok(ends)
    }

    /// Runs and stores every `stride`-th step.
    pub fn integrate<O: ScalarOde>(
        &self,
        ode: &O,
        t0: f64,
        x0: f64,
        t_end: f64,
    ) -> Result<Trajectory, IntegrateError> {
        let mut samples = Vec::new();
        let stride = self.stride.max(1);
        let end = self.run(ode, t0, x0, t_end, |p| {
            let on_grid =
                ((t0 - p.t).abs() - p.index as f64 * self.h).abs() <= 1e-9 * self.h.max(1.0);
            if p.index % stride == 0 && on_grid {
                samples.push(p.x);
            }
            ControlFlow::Continue(())
        })?;
        Ok(Trajectory {
            t0,
            h: self.h,
            stride,
            direction: if t_end >= t0 {
                Direction::Forward
            } else {
                Direction::Backward
            },
            samples,
            t_last: end.t,
            x_last: end.x,
            status: end.status,
        })
    }
}

/// `rk4_integrate` with the default guard and no decimation.
pub fn rk4_integrate<O: ScalarOde>(
    ode: &O,
    t0: f64,
    x0: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, IntegrateError> {
    Rk4::new(h).integrate(ode, t0, x0, t_end)
}

/// A sampled solution path on the grid `t0 + i·stride·h·(±1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub h: f64,
    pub stride: u64,
    pub direction: Direction,
    pub samples: Vec<f64>,
    /// Last point reached, which need not be on the sample grid.
    pub t_last: f64,
    pub x_last: f64,
    pub status: Status,
}

impl Trajectory {
    pub fn sample_step(&self) -> f64 {
        self.direction.sign() * self.h * self.stride as f64
    }

    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.sample_step()
    }

    /// `(t, x)` pairs: the sample grid, then the final point if it is off-grid.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &x)| (self.time_of(i), x))
            .collect();
        if let Some(&(t, _)) = pts.last() {
            if (t - self.t_last).abs() > 1e-12 * self.h {
                pts.push((self.t_last, self.x_last));
            }
        }
        pts
    }

    pub fn escaped(&self) -> bool {
        matches!(self.status, Status::Escaped { .. })
    }
}

/// Richardson estimate of the convergence order from runs at steps `h`,
/// `h/2`, `h/4`, comparing the three on the coarse grid in the max norm (an
/// end-point comparison can be fooled by error cancellation). `h` defaults
/// to `min(0.1, span/16)`.
pub fn order_check<O: ScalarOde>(
    ode: &O,
    t0: f64,
    x0: f64,
    t_end: f64,
    h: Option<f64>,
) -> Result<f64, IntegrateError> {
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Err(IntegrateError::EmptyWindow);
    }
    let h = h.unwrap_or_else(|| (span / 16.0).min(0.1));
    let coarse = (span / h).floor() as u64;
    let path = |k: u64| -> Result<Vec<f64>, IntegrateError> {
        let mut xs = Vec::with_capacity(coarse as usize + 1);
        let r = Rk4::new(h / k as f64).run(ode, t0, x0, t_end, |p| {
            if p.index % k == 0 && p.index / k <= coarse {
                xs.push(p.x);
            }
            ControlFlow::Continue(())
        })?;
        match r.status {
            Status::Escaped { at_time, last_x } => Err(IntegrateError::Escaped {
                t: at_time,
                x: last_x,
            }),
            _ => Ok(xs),
        }
    };
    let (a, b, c) = (path(1)?, path(2)?, path(4)?);
    let sup = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (d1, d2) = (sup(&a, &b), sup(&b, &c));
    if d1 == 0.0 || d2 == 0.0 {
        return Err(IntegrateError::DegenerateOrder);
    }
    Ok((d1 / d2).log2())
}

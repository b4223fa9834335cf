//! Attractive and repulsive branches over an evaluation window.
//!
//! Attractive branches are pullback limits: a forward run from a certified
//! bracket value at `−t_run` has forgotten its start by `−t_eval`. The
//! repulsive branch is the same construction in backward time, started
//! between the two attractive ones at `+t_run`.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{CubicField, FieldError};
use crate::integrate::{IntegrateError, RunEnd, Status, Trajectory};
use crate::lyapunov::LyapBounds;
use crate::numerics::{Numerics, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Attractive,
    Repulsive,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ForwardUpper,
    ForwardLower,
    BackwardMid,
    /// Known in closed form (a constant solution).
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Error, Clone)]
pub enum BranchError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("forward run from the {side:?} bracket escaped at t = {t}")]
    Escaped { side: Side, t: f64 },
    #[error("{side:?} branch not converged: two starts differ by {disagreement:e}")]
    Unconverged {
        side: Side,
        disagreement: f64,
        branch: Box<Branch>,
    },
    #[error("branches at ε = {} not converged: two starts differ by {disagreement:e}", set.epsilon)]
    NotConverged {
        set: Box<BranchSet>,
        disagreement: f64,
    },
}

/// A bounded solution sampled on the report grid `t_start + i·dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub t_start: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub stability: Stability,
    pub source: Source,
    pub lyap: Option<LyapBounds>,
    /// Max gap to the run from a second start (attractive branches only).
    pub disagreement: Option<f64>,
    /// Where the generating run ended, `(t, x)`.
    pub run_end: Option<(f64, f64)>,
}

impl Branch {
    pub fn constant(value: f64, t_start: f64, dt: f64, len: usize, stability: Stability) -> Self {
        Branch {
            t_start,
            dt,
            samples: vec![value; len],
            stability,
            source: Source::Exact,
            lyap: None,
            disagreement: None,
            run_end: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time_of(self.samples.len().saturating_sub(1))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &x)| (self.time_of(i), x))
    }

    /// Linear interpolation on the report grid; `None` outside the window.
    pub fn at(&self, t: f64) -> Option<f64> {
        let u = (t - self.t_start) / self.dt;
        let last = self.samples.len().checked_sub(1)? as f64;
        if !(-1e-9..=last + 1e-9).contains(&u) {
            return None;
        }
        let u = u.clamp(0.0, last);
        let i = (u.floor() as usize).min(self.samples.len().saturating_sub(2));
        if self.samples.len() == 1 {
            return Some(self.samples[0]);
        }
        let w = u - i as f64;
        Some(self.samples[i] * (1.0 - w) + self.samples[i + 1] * w)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `min_t (above(t) − below(t))` over the shared window.
pub fn min_gap(above: &Branch, below: &Branch) -> f64 {
    above
        .samples
        .iter()
        .zip(&below.samples)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub epsilon: f64,
    pub lower: Option<Branch>,
    pub middle: Option<Branch>,
    pub upper: Option<Branch>,
    pub count: u8,
    /// Min over the window of `upper − middle` and `middle − lower`, or of
    /// `upper − lower` when there is no middle branch. `None` for one branch.
    pub separation: Option<f64>,
}

impl BranchSet {
    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        [&self.lower, &self.middle, &self.upper]
            .into_iter()
            .flatten()
    }

    pub fn branches_mut(&mut self) -> impl Iterator<Item = &mut Branch> {
        [&mut self.lower, &mut self.middle, &mut self.upper]
            .into_iter()
            .flatten()
    }

    pub fn max_disagreement(&self) -> f64 {
        self.branches()
            .filter_map(|b| b.disagreement)
            .fold(0.0, f64::max)
    }
}

/// Sample indices `[lo, hi]` kept from a run, every `stride` steps.
#[derive(Clone, Copy)]
struct Keep {
    lo: u64,
    hi: u64,
    stride: u64,
}

impl Keep {
    fn steps(from: f64, to: f64, h: f64) -> u64 {
        ((to - from).abs() / h).round() as u64
    }

    /// The report window as seen by a run starting at `t0`.
    fn window(t0: f64, num: &Numerics) -> Self {
        let a = Self::steps(t0, -num.t_eval, num.h);
        let b = Self::steps(t0, num.t_eval, num.h);
        Keep {
            lo: a.min(b),
            hi: a.max(b),
            stride: num.report_stride,
        }
    }
}

fn sampled_run(
    field: &CubicField,
    eps: f64,
    num: &Numerics,
    t0: f64,
    x0: f64,
    t_end: f64,
    keep: Keep,
) -> Result<(Vec<f64>, RunEnd), IntegrateError> {
    let mut samples = Vec::with_capacity(((keep.hi - keep.lo) / keep.stride + 1) as usize);
    let end = num.rk4().run(&field.at(eps), t0, x0, t_end, |p| {
        if p.index >= keep.lo && p.index <= keep.hi && (p.index - keep.lo) % keep.stride == 0 {
            samples.push(p.x);
        }
        ControlFlow::Continue(())
    })?;
    Ok((samples, end))
}

fn check_hypotheses(field: &CubicField, num: &Numerics) -> Result<(), BranchError> {
    num.validate()?;
    if num.check_hypotheses {
        field.classify().require_basic()?;
    }
    Ok(())
}

/// Forward runs from `−t_run` to `t_run` for several starts at once, keeping
/// the window samples of each.
fn pullback_lanes<const M: usize>(
    field: &CubicField,
    eps: f64,
    num: &Numerics,
    starts: [f64; M],
) -> Result<[(Vec<f64>, RunEnd); M], IntegrateError> {
    let t0 = -num.t_run;
    let keep = Keep::window(t0, num);
    let mut samples: [Vec<f64>; M] = std::array::from_fn(|_| Vec::new());
    let ends = num.rk4().run_lanes(&field.at(eps), t0, starts, num.t_run, |i, _, xs| {
        if i >= keep.lo && i <= keep.hi && (i - keep.lo) % keep.stride == 0 {
            for (s, &x) in samples.iter_mut().zip(xs) {
                s.push(x);
            }
        }
    })?;
    let mut samples = samples.into_iter();
    Ok(ends.map(|e| (samples.next().expect("one sample vector per lane"), e)))
}

fn starts(field: &CubicField, eps: f64, side: Side) -> Result<[f64; 2], FieldError> {
    let (r1, r2) = field.bracket_constants(eps)?;
    Ok(match side {
        Side::Upper => [r2, r2 + 1.0],
        Side::Lower => [r1, r1 - 1.0],
    })
}

/// Builds the branch from the main run and the second-start check run.
fn attractive_from(
    side: Side,
    num: &Numerics,
    (samples, end): (Vec<f64>, RunEnd),
    (check, check_end): (Vec<f64>, RunEnd),
) -> Result<Branch, BranchError> {
    for e in [&end, &check_end] {
        if let Status::Escaped { at_time, .. } = e.status {
            return Err(BranchError::Escaped { side, t: at_time });
        }
    }
    let disagreement = samples
        .iter()
        .zip(&check)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Branch {
        t_start: -num.t_eval,
        dt: num.report_step(),
        samples,
        stability: Stability::Attractive,
        source: match side {
            Side::Upper => Source::ForwardUpper,
            Side::Lower => Source::ForwardLower,
        },
        lyap: None,
        disagreement: Some(disagreement),
        run_end: Some((end.t, end.x)),
    })
}

fn attractive(
    field: &CubicField,
    eps: f64,
    side: Side,
    num: &Numerics,
) -> Result<Branch, BranchError> {
    let [main, check] = pullback_lanes(field, eps, num, starts(field, eps, side)?)?;
    attractive_from(side, num, main, check)
}

/// Lower and upper branches from one four-lane run.
fn attractive_pair(
    field: &CubicField,
    eps: f64,
    num: &Numerics,
) -> Result<(Branch, Branch), BranchError> {
    let [l, l2] = starts(field, eps, Side::Lower)?;
    let [u, u2] = starts(field, eps, Side::Upper)?;
    let [lower, upper, lower2, upper2] = pullback_lanes(field, eps, num, [l, u, l2, u2])?;
    Ok((
        attractive_from(Side::Lower, num, lower, lower2)?,
        attractive_from(Side::Upper, num, upper, upper2)?,
    ))
}

/// Pullback limit from the upper (`r2`) or lower (`r1`) bracket constant.
pub fn locate_attractive(
    field: &CubicField,
    eps: f64,
    side: Side,
    num: &Numerics,
) -> Result<Branch, BranchError> {
    check_hypotheses(field, num)?;
    let branch = attractive(field, eps, side, num)?;
    match branch.disagreement {
        Some(d) if d > num.delta_match => Err(BranchError::Unconverged {
            side,
            disagreement: d,
            branch: Box::new(branch),
        }),
        _ => Ok(branch),
    }
}

/// Backward run from the midpoint of `lower` and `upper` at the end of their
/// runs. `None` when the two are not separated or the run escapes.
pub fn locate_repulsive(
    field: &CubicField,
    eps: f64,
    lower: &Branch,
    upper: &Branch,
    num: &Numerics,
) -> Result<Option<Branch>, BranchError> {
    if min_gap(upper, lower) <= num.delta_sep {
        return Ok(None);
    }
    let (t0, x0) = match (lower.run_end, upper.run_end) {
        (Some((tl, xl)), Some((tu, xu))) if tl == tu => (tl, 0.5 * (xl + xu)),
        _ => {
            let t = lower.t_end().min(upper.t_end());
            let (l, u) = (lower.at(t).unwrap_or(f64::NAN), upper.at(t).unwrap_or(f64::NAN));
            (t, 0.5 * (l + u))
        }
    };
    if !x0.is_finite() {
        return Ok(None);
    }
    let keep = Keep::window(t0, num);
    let (mut samples, end) = sampled_run(field, eps, num, t0, x0, -num.t_eval, keep)?;
    if matches!(end.status, Status::Escaped { .. }) {
        return Ok(None);
    }
    samples.reverse();
    Ok(Some(Branch {
        t_start: -num.t_eval,
        dt: num.report_step(),
        samples,
        stability: Stability::Repulsive,
        source: Source::BackwardMid,
        lyap: None,
        disagreement: None,
        run_end: Some((end.t, end.x)),
    }))
}

/// All branches at `eps`. At `ε = 0` the lower branch is the constant
/// solution 0, which is nonhyperbolic and attracts only algebraically.
pub fn branch_set(field: &CubicField, eps: f64, num: &Numerics) -> Result<BranchSet, BranchError> {
    check_hypotheses(field, num)?;
    let set = if eps == 0.0 {
        let upper = attractive(field, eps, Side::Upper, num)?;
        let lower = Branch::constant(
            0.0,
            upper.t_start,
            upper.dt,
            upper.len(),
            Stability::Undetermined,
        );
        let gap = min_gap(&upper, &lower);
        let (count, separation) = if gap > num.delta_sep {
            (2, Some(gap))
        } else {
            (1, None)
        };
        BranchSet {
            epsilon: eps,
            lower: (count == 2).then_some(lower),
            middle: None,
            upper: Some(upper),
            count,
            separation,
        }
    } else {
        let (lower, upper) = attractive_pair(field, eps, num)?;
        compose(field, eps, lower, upper, num)?
    };
    let disagreement = set.max_disagreement();
    if disagreement > num.delta_match {
        return Err(BranchError::NotConverged {
            set: Box::new(set),
            disagreement,
        });
    }
    Ok(set)
}

fn compose(
    field: &CubicField,
    eps: f64,
    lower: Branch,
    upper: Branch,
    num: &Numerics,
) -> Result<BranchSet, BranchError> {
    let gap = min_gap(&upper, &lower);
    if gap <= num.delta_sep {
        return Ok(BranchSet {
            epsilon: eps,
            lower: None,
            middle: None,
            upper: Some(upper),
            count: 1,
            separation: None,
        });
    }
    let middle = locate_repulsive(field, eps, &lower, &upper, num)?.and_then(|m| {
        let sep = min_gap(&upper, &m).min(min_gap(&m, &lower));
        (sep > num.delta_sep).then_some((m, sep))
    });
    Ok(match middle {
        Some((m, sep)) => BranchSet {
            epsilon: eps,
            lower: Some(lower),
            middle: Some(m),
            upper: Some(upper),
            count: 3,
            separation: Some(sep),
        },
        None => BranchSet {
            epsilon: eps,
            lower: Some(lower),
            middle: None,
            upper: Some(upper),
            count: 2,
            separation: Some(gap),
        },
    })
}

/// Earliest time the trajectory crosses `level`, by linear interpolation
/// between adjacent points.
pub fn first_crossing(traj: &Trajectory, level: f64) -> Option<f64> {
    crossing_in(&traj.points(), level)
}

pub(crate) fn crossing_in(points: &[(f64, f64)], level: f64) -> Option<f64> {
    for w in points.windows(2) {
        let ((t0, x0), (t1, x1)) = (w[0], w[1]);
        let (d0, d1) = (x0 - level, x1 - level);
        if d0 == 0.0 && d1 == 0.0 {
            continue;
        }
        if d0 * d1 <= 0.0 {
            return Some(t0 + d0 / (d0 - d1) * (t1 - t0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::frozen_roots;
    use crate::integrate::{Affine, Rk4};
    use crate::popmodel::PopScenario;

    fn quick() -> Numerics {
        Numerics {
            t_run: 2e3,
            t_eval: 200.0,
            ..Numerics::default()
        }
    }

    fn allee() -> CubicField {
        PopScenario::reference(0.0, 1.0).field().unwrap()
    }

    #[test]
    fn autonomous_eps0_has_constant_branches() {
        let f = CubicField::autonomous(1.0, 0.0, -1.0);
        let set = branch_set(&f, 0.0, &quick()).unwrap();
        assert_eq!(set.count, 2);
        let u = set.upper.as_ref().unwrap();
        assert!(u.samples.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let l = set.lower.as_ref().unwrap();
        assert!(l.samples.iter().all(|&x| x == 0.0));
        assert_eq!(l.stability, Stability::Undetermined);
        assert!(set.middle.is_none());
    }

    #[test]
    fn autonomous_middle_is_middle_root() {
        let f = CubicField::autonomous(1.0, 0.0, -1.0);
        let set = branch_set(&f, 0.1, &quick()).unwrap();
        assert_eq!(set.count, 3);
        let roots = frozen_roots(1.0, 0.0, -1.0, 0.1);
        for (b, r) in [&set.lower, &set.middle, &set.upper].iter().zip(&roots) {
            let b = b.as_ref().unwrap();
            assert!(b.samples.iter().all(|x| (x - r).abs() < 1e-10), "{r}");
        }
    }

    #[test]
    fn allee_at_zero_oscillates_around_c() {
        let f = allee();
        let set = branch_set(&f, 0.0, &quick()).unwrap();
        let u = set.upper.unwrap();
        assert!(u.min() > 1.5 && u.max() < 2.5);
        let sign_changes = u
            .points()
            .map(|(t, x)| x - f.c().eval(t))
            .collect::<Vec<_>>()
            .windows(2)
            .filter(|w| w[0] * w[1] < 0.0)
            .count();
        assert!(sign_changes > 10, "{sign_changes}");
    }

    #[test]
    fn allee_three_branches_at_small_eps() {
        let f = allee();
        let set = branch_set(&f, 0.1, &quick()).unwrap();
        assert_eq!(set.count, 3);
        let (l, m, u) = (
            set.lower.as_ref().unwrap(),
            set.middle.as_ref().unwrap(),
            set.upper.as_ref().unwrap(),
        );
        assert!(l.max() < 0.0);
        assert!(m.min() > 0.0 && m.max() < 2.6);
        assert!(m.at(0.0).unwrap() < 0.9);
        for i in 0..l.len() {
            assert!(l.samples[i] < m.samples[i] && m.samples[i] < u.samples[i]);
        }
    }

    #[test]
    fn allee_single_branch_between_folds() {
        let f = allee();
        let set = branch_set(&f, 0.21, &quick()).unwrap();
        assert_eq!(set.count, 1);
        assert!(set.middle.is_none() && set.lower.is_none());
        assert_eq!(set.upper.as_ref().unwrap().source, Source::ForwardUpper);
        assert!(set.upper.unwrap().max() < 0.0);
    }

    #[test]
    fn samples_satisfy_residual_check() {
        let f = allee();
        let num = quick();
        let set = branch_set(&f, 0.1, &num).unwrap();
        let rk = num.rk4();
        for b in set.branches() {
            for i in (0..b.len() - 1).step_by(37) {
                let dir = if b.source == Source::BackwardMid { -1 } else { 1 };
                let (from, to) = if dir > 0 { (i, i + 1) } else { (i + 1, i) };
                let end = rk
                    .run(&f.at(0.1), b.time_of(from), b.samples[from], b.time_of(to), |_| {
                        ControlFlow::Continue(())
                    })
                    .unwrap();
                assert!((end.x - b.samples[to]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unconverged_branch_is_reported() {
        // far too short a transient for the slow approach at ε = 0
        let f = CubicField::autonomous(1.0, 0.0, -1.0);
        let num = Numerics {
            t_run: 8.0,
            t_eval: 4.0,
            ..Numerics::default()
        };
        assert!(matches!(
            locate_attractive(&f, 0.0, Side::Lower, &num),
            Err(BranchError::Unconverged { .. })
        ));
    }

    #[test]
    fn hypotheses_are_checked() {
        let f = CubicField::autonomous(1.0, 0.0, 1.0);
        assert!(matches!(
            branch_set(&f, 0.1, &quick()),
            Err(BranchError::Field(FieldError::Hypothesis("a_neg")))
        ));
        let num = Numerics {
            check_hypotheses: false,
            ..quick()
        };
        assert!(branch_set(&f, 0.1, &num).is_ok());
    }

    #[test]
    fn crossing_examples() {
        let flat = Rk4::new(0.01)
            .integrate(&Affine { rate: 0.0, offset: 0.0 }, 0.0, 1.0, 5.0)
            .unwrap();
        assert_eq!(first_crossing(&flat, 0.0), None);
        let h = 1.0 / 64.0;
        let fall = Rk4::new(h)
            .integrate(&Affine { rate: 0.0, offset: -1.0 }, 0.0, 1.0, 3.0)
            .unwrap();
        let t = first_crossing(&fall, 0.0).unwrap();
        assert!((t - 1.0).abs() <= h);
        assert_eq!(crossing_in(&[(0.0, 0.0), (1.0, 0.0)], 0.0), None);
        assert_eq!(crossing_in(&[(0.0, 0.0), (1.0, -1.0)], 0.0), Some(0.0));
    }

    #[test]
    fn branch_interpolation() {
        let b = Branch {
            samples: vec![0.0, 2.0, 4.0],
            ..Branch::constant(0.0, -1.0, 1.0, 3, Stability::Attractive)
        };
        assert_eq!(b.at(-0.5), Some(1.0));
        assert_eq!(b.at(1.0), Some(4.0));
        assert_eq!(b.at(1.5), None);
        assert_eq!(b.t_end(), 1.0);
    }
}

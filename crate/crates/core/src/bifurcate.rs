//! Bifurcation values by bisection on branch predicates, ε-sweeps, and the
//! closed-form oracle for constant coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branches::{branch_set, Branch, BranchError, BranchSet, Source, Stability};
use crate::field::{discriminant, CubicField, FieldError};
use crate::lyapunov::{annotate, lyap_bounds, LyapBounds, LyapError, Sign};
use crate::numerics::Numerics;
use crate::popmodel::PopError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    ThreeBranches,
    /// Branch separation above `delta_sep`; the fallback used when a
    /// midpoint did not converge.
    BranchSeparation,
    /// Upper Lyapunov bound of a known constant branch is negative.
    LyapunovSign,
    Survival,
}

#[derive(Debug, Error, Clone)]
pub enum BifurcationError {
    #[error("predicate is {value} at both ε = {lo} and ε = {hi}")]
    SamePredicate { lo: f64, hi: f64, value: bool },
    #[error("bisection budget of {iterations} iterations exhausted at bracket [{lo}, {hi}]")]
    BudgetExceeded { iterations: u32, lo: f64, hi: f64 },
    #[error("invalid bracket [{0}, {1}]")]
    BadBracket(f64, f64),
    #[error(transparent)]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Lyapunov(#[from] LyapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Population(#[from] PopError),
}

/// Branch values at `t = 0` and the separation of one [`BranchSet`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub epsilon: f64,
    pub count: u8,
    pub lower0: Option<f64>,
    pub middle0: Option<f64>,
    pub upper0: Option<f64>,
    pub separation: Option<f64>,
}

impl SetSummary {
    pub fn of(set: &BranchSet) -> Self {
        let at0 = |b: &Option<Branch>| b.as_ref().and_then(|b| b.at(0.0));
        SetSummary {
            epsilon: set.epsilon,
            count: set.count,
            lower0: at0(&set.lower),
            middle0: at0(&set.middle),
            upper0: at0(&set.upper),
            separation: set.separation,
        }
    }
}

/// One predicate evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub value: bool,
    /// Decided by a fallback rule rather than a converged computation.
    pub flagged: bool,
    pub witness: Option<SetSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Shortened windows while the bracket is wide.
    Reduced,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub predicate: Predicate,
    pub bracket: (f64, f64),
    /// Predicate value at the lower end of the bracket.
    pub value_lo: bool,
    pub iterations: u32,
    /// Predicate evaluations including endpoint checks.
    pub evaluations: u32,
    pub witness_lo: Option<SetSummary>,
    pub witness_hi: Option<SetSummary>,
    pub target_width: f64,
    /// Midpoints decided by a fallback rule.
    pub flagged: Vec<f64>,
    /// Times an endpoint had to be moved outward after switching to full windows.
    pub rebrackets: u32,
}

impl BifurcationReport {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.bracket.0 + self.bracket.1)
    }

    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// Bisection settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection {
    pub target_width: f64,
    pub max_iterations: u32,
    /// Width below which probes switch from [`Phase::Reduced`] to
    /// [`Phase::Full`]; `None` means every probe is full. The switch happens
    /// no later than width `4·target_width`, so the last two halvings are
    /// always full.
    pub reduced_until: Option<f64>,
}

impl Bisection {
    pub fn from_numerics(num: &Numerics) -> Self {
        Bisection {
            target_width: num.target_width,
            max_iterations: num.max_iterations,
            reduced_until: num.reduced().map(|_| num.reduced_until),
        }
    }
}

/// Bisects `[lo, hi]` on `probe`, which must take different values at the
/// ends.
pub fn bisect_with<F>(
    predicate: Predicate,
    lo: f64,
    hi: f64,
    cfg: Bisection,
    mut probe: F,
) -> Result<BifurcationReport, BifurcationError>
where
    F: FnMut(f64, Phase) -> Result<Probe, BifurcationError>,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(BifurcationError::BadBracket(lo, hi));
    }
    let (lo0, hi0) = (lo, hi);
    let (mut lo, mut hi) = (lo, hi);
    let switch = cfg.reduced_until.map(|w| w.max(4.0 * cfg.target_width));
    let mut phase = match switch {
        Some(w) if hi - lo > w => Phase::Reduced,
        _ => Phase::Full,
    };
    let mut evaluations = 2;
    let mut p_lo = probe(lo, phase)?;
    let mut p_hi = probe(hi, phase)?;
    if p_lo.value == p_hi.value {
        return Err(BifurcationError::SamePredicate {
            lo,
            hi,
            value: p_lo.value,
        });
    }
    let v_lo = p_lo.value;
    let mut flagged = Vec::new();
    let mut iterations = 0;
    let mut rebrackets = 0;
    loop {
        if phase == Phase::Reduced && switch.is_some_and(|w| hi - lo <= w) {
            phase = Phase::Full;
            // the reduced predicate may be off near the crossing
            let mut step = hi - lo;
            loop {
                p_lo = probe(lo, phase)?;
                evaluations += 1;
                if p_lo.value == v_lo {
                    break;
                }
                if lo == lo0 {
                    return Err(BifurcationError::SamePredicate { lo, hi, value: !v_lo });
                }
                hi = lo;
                lo = (lo - step).max(lo0);
                step *= 2.0;
                rebrackets += 1;
            }
            let mut step = hi - lo;
            loop {
                p_hi = probe(hi, phase)?;
                evaluations += 1;
                if p_hi.value != v_lo {
                    break;
                }
                if hi == hi0 {
                    return Err(BifurcationError::SamePredicate { lo, hi, value: v_lo });
                }
                lo = hi;
                p_lo = p_hi;
                hi = (hi + step).min(hi0);
                step *= 2.0;
                rebrackets += 1;
            }
        }
        if hi - lo <= cfg.target_width {
            break;
        }
        if iterations >= cfg.max_iterations {
            return Err(BifurcationError::BudgetExceeded {
                iterations,
                lo,
                hi,
            });
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = probe(mid, phase)?;
        iterations += 1;
        evaluations += 1;
        if p.flagged {
            flagged.push(mid);
        }
        if p.value == v_lo {
            lo = mid;
            p_lo = p;
        } else {
            hi = mid;
            p_hi = p;
        }
    }
    Ok(BifurcationReport {
        predicate,
        bracket: (lo, hi),
        value_lo: v_lo,
        iterations,
        evaluations,
        witness_lo: p_lo.witness,
        witness_hi: p_hi.witness,
        target_width: cfg.target_width,
        flagged,
        rebrackets,
    })
}

fn three_of(set: &BranchSet, num: &Numerics) -> bool {
    set.count == 3 && set.separation.is_some_and(|s| s > num.delta_sep)
}

/// `branch_set(...).count == 3` with both separations above `delta_sep`.
pub fn has_three_branches(
    field: &CubicField,
    eps: f64,
    num: &Numerics,
) -> Result<bool, BifurcationError> {
    Ok(three_of(&branch_set(field, eps, num)?, num))
}

/// The three-branch predicate, falling back on the separation when the
/// branches did not converge.
pub fn probe_three(field: &CubicField, eps: f64, num: &Numerics) -> Result<Probe, BifurcationError> {
    match branch_set(field, eps, num) {
        Ok(set) => Ok(Probe {
            value: three_of(&set, num),
            flagged: false,
            witness: Some(SetSummary::of(&set)),
        }),
        Err(BranchError::NotConverged { set, .. }) => Ok(Probe {
            value: three_of(&set, num),
            flagged: true,
            witness: Some(SetSummary::of(&set)),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Bisection on the number of branches.
pub fn bisect_bifurcation(
    field: &CubicField,
    eps_a: f64,
    eps_b: f64,
    num: &Numerics,
) -> Result<BifurcationReport, BifurcationError> {
    let reduced = num.reduced();
    bisect_with(
        Predicate::ThreeBranches,
        eps_a,
        eps_b,
        Bisection::from_numerics(num),
        |eps, phase| match (phase, &reduced) {
            (Phase::Reduced, Some(r)) => probe_three(field, eps, r),
            _ => probe_three(field, eps, num),
        },
    )
}

/// Bisection on the sign of the exponent of the constant solution `s` of a
/// field with `c ≡ s` and `a = −s·b`. The predicate is `γᵘ < 0` over
/// `[tau, t_max]`.
pub fn bisect_transcritical(
    field: &CubicField,
    eps_a: f64,
    eps_b: f64,
    t_max: f64,
    tau: f64,
    num: &Numerics,
) -> Result<BifurcationReport, BifurcationError> {
    let s = match (field.ratio(), field.c().constant_value()) {
        (Some(s), Some(c)) if s == c => s,
        _ => {
            return Err(FieldError::Precondition("constant branch needs c ≡ s and a = −s·b").into())
        }
    };
    let branch = Branch::constant(s, 0.0, num.report_step(), 2, Stability::Undetermined);
    let cfg = Bisection {
        reduced_until: None,
        ..Bisection::from_numerics(num)
    };
    bisect_with(Predicate::LyapunovSign, eps_a, eps_b, cfg, |eps, _| {
        let lb = lyap_bounds(field, eps, &branch, t_max, tau, num)?;
        Ok(Probe {
            value: lb.sign == Sign::Negative,
            flagged: lb.sign == Sign::StraddlesZero,
            witness: None,
        })
    })
}

/// One row of an ε-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub count: u8,
    pub lower0: Option<f64>,
    pub middle0: Option<f64>,
    pub upper0: Option<f64>,
    /// `min(upper − middle)` over the window.
    pub sep_upper_middle: Option<f64>,
    /// `min(middle − lower)` over the window.
    pub sep_middle_lower: Option<f64>,
    /// `min(upper − lower)` over the window.
    pub sep_upper_lower: Option<f64>,
    pub lyap_lower: Option<LyapBounds>,
    pub lyap_middle: Option<LyapBounds>,
    pub lyap_upper: Option<LyapBounds>,
    pub stability: [Option<Stability>; 3],
    pub sources: [Option<Source>; 3],
    pub converged: bool,
    pub error: Option<String>,
}

impl ScanRow {
    fn failed(eps: f64, err: String) -> Self {
        ScanRow {
            epsilon: eps,
            count: 0,
            lower0: None,
            middle0: None,
            upper0: None,
            sep_upper_middle: None,
            sep_middle_lower: None,
            sep_upper_lower: None,
            lyap_lower: None,
            lyap_middle: None,
            lyap_upper: None,
            stability: [None; 3],
            sources: [None; 3],
            converged: false,
            error: Some(err),
        }
    }

    fn of(set: &BranchSet, converged: bool) -> Self {
        use crate::branches::min_gap;
        let gap = |a: &Option<Branch>, b: &Option<Branch>| match (a, b) {
            (Some(a), Some(b)) => Some(min_gap(a, b)),
            _ => None,
        };
        let s = SetSummary::of(set);
        let slots = [&set.lower, &set.middle, &set.upper];
        ScanRow {
            epsilon: set.epsilon,
            count: set.count,
            lower0: s.lower0,
            middle0: s.middle0,
            upper0: s.upper0,
            sep_upper_middle: gap(&set.upper, &set.middle),
            sep_middle_lower: gap(&set.middle, &set.lower),
            sep_upper_lower: gap(&set.upper, &set.lower),
            lyap_lower: set.lower.as_ref().and_then(|b| b.lyap),
            lyap_middle: set.middle.as_ref().and_then(|b| b.lyap),
            lyap_upper: set.upper.as_ref().and_then(|b| b.lyap),
            stability: slots.map(|b| b.as_ref().map(|b| b.stability)),
            sources: slots.map(|b| b.as_ref().map(|b| b.source)),
            converged,
            error: None,
        }
    }
}

/// Branch set plus Lyapunov annotation at one ε. A set that did not converge
/// is still reported, with `converged = false`.
pub fn scan_row(field: &CubicField, eps: f64, num: &Numerics) -> ScanRow {
    let (mut set, converged) = match branch_set(field, eps, num) {
        Ok(set) => (set, true),
        Err(BranchError::NotConverged { set, .. }) => (*set, false),
        Err(e) => return ScanRow::failed(eps, e.to_string()),
    };
    match annotate(field, &mut set, num) {
        Ok(()) => ScanRow::of(&set, converged),
        Err(e) => {
            let mut row = ScanRow::of(&set, converged);
            row.error = Some(e.to_string());
            row
        }
    }
}

/// One row per ε, computed in parallel and returned in input order.
pub fn sweep(field: &CubicField, grid: &[f64], num: &Numerics) -> Vec<ScanRow> {
    grid.par_iter().map(|&eps| scan_row(field, eps, num)).collect()
}

/// Values of ε ≥ 0 where the constant-coefficient cubic has a multiple real
/// root: 0, plus the nonnegative roots of `Δ/ε`, a polynomial of degree ≤ 2
/// in ε. Sorted ascending, duplicates removed.
pub fn autonomous_bifurcations(c: f64, b: f64, a: f64) -> Vec<f64> {
    // Δ/ε = q0 + q1 ε + q2 ε²
    let q0 = -4.0 * a * c * c * c;
    let q1 = b * b * c * c - 18.0 * a * b * c - 27.0 * a * a;
    let q2 = 4.0 * b * b * b;
    let mut out = vec![0.0];
    let roots: Vec<f64> = if q2 == 0.0 {
        if q1 != 0.0 {
            vec![-q0 / q1]
        } else {
            vec![]
        }
    } else {
        let d = q1 * q1 - 4.0 * q2 * q0;
        if d < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (q1 + q1.signum() * d.sqrt());
            if q == 0.0 {
                vec![0.0]
            } else {
                vec![q / q2, q0 / q]
            }
        }
    };
    out.extend(roots.into_iter().filter(|&e| e.is_finite() && e >= 0.0));
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs().max(1.0));
    // polish against the discriminant itself
    out.into_iter()
        .map(|e| {
            if e == 0.0 {
                return e;
            }
            let g = |e: f64| discriminant(c, b, a, e) / e;
            let dg = |e: f64| q1 + 2.0 * q2 * e;
            let step = g(e) / dg(e);
            if step.is_finite() {
                e - step
            } else {
                e
            }
        })
        .collect()
}

//! The parametric cubic field
//! `p_ε(t, x) = scale(t)·(−x³ + c(t)x² + ε(b(t)x + a(t)))`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{Coeff, CoeffBank, CoeffError, GridSampler};
use crate::integrate::ScalarOde;

/// Band on `|Δ|` inside which frozen-time roots are reported with multiplicity.
pub const DISCRIMINANT_TIE: f64 = 1e-12;

/// Escape bound for the bracket search.
const BRACKET_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("scale factor must be certified positive (lower bound {0})")]
    ScaleNotPositive(f64),
    #[error("hypothesis `{0}` does not hold for these coefficients")]
    Hypothesis(&'static str),
    #[error("bracket search exceeded |r| = {BRACKET_LIMIT:e} at ε = {0}")]
    BracketSearch(f64),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}

/// The `a` coefficient, either free or structurally tied to `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantTerm {
    Free(Coeff),
    /// `a(t) = −s·b(t)`.
    RatioOfB(f64),
}

/// Coefficients frozen at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frozen {
    pub c: f64,
    pub b: f64,
    pub a: f64,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct CubicField {
    c: Coeff,
    b: Coeff,
    a: ConstantTerm,
    a_coeff: Coeff,
    scale: Coeff,
    bank: CoeffBank<4>,
}

impl PartialEq for CubicField {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c && self.b == other.b && self.a == other.a && self.scale == other.scale
    }
}

impl CubicField {
    pub fn new(
        c: impl Into<Coeff>,
        b: impl Into<Coeff>,
        a: ConstantTerm,
        scale: Option<Coeff>,
    ) -> Result<Self, FieldError> {
        let c = c.into();
        let b = b.into();
        let scale = scale.unwrap_or_else(|| Coeff::from(1.0));
        c.validate()?;
        b.validate()?;
        scale.validate()?;
        let a_coeff = match &a {
            ConstantTerm::Free(coeff) => {
                coeff.validate()?;
                coeff.clone()
            }
            ConstantTerm::RatioOfB(s) => {
                if !s.is_finite() {
                    return Err(CoeffError::NonFinite("ratio").into());
                }
                b.scaled(-s)
            }
        };
        if scale.lower_bound() <= 0.0 {
            return Err(FieldError::ScaleNotPositive(scale.lower_bound()));
        }
        let bank = CoeffBank::compile([&c, &b, &a_coeff, &scale]);
        Ok(CubicField {
            c,
            b,
            a,
            a_coeff,
            scale,
            bank,
        })
    }

    /// Constant coefficients, unit scale.
    pub fn autonomous(c: f64, b: f64, a: f64) -> Self {
        Self::new(c, b, ConstantTerm::Free(a.into()), None)
            .expect("finite constant coefficients are always valid")
    }

    pub fn with_scale(&self, scale: impl Into<Coeff>) -> Result<Self, FieldError> {
        Self::new(
            self.c.clone(),
            self.b.clone(),
            self.a.clone(),
            Some(scale.into()),
        )
    }

    pub fn c(&self) -> &Coeff {
        &self.c
    }

    pub fn b(&self) -> &Coeff {
        &self.b
    }

    pub fn a(&self) -> &ConstantTerm {
        &self.a
    }

    /// `a` as a coefficient, whichever way it was specified.
    pub fn a_coeff(&self) -> &Coeff {
        &self.a_coeff
    }

    pub fn scale(&self) -> &Coeff {
        &self.scale
    }

    pub fn ratio(&self) -> Option<f64> {
        match self.a {
            ConstantTerm::RatioOfB(s) => Some(s),
            ConstantTerm::Free(_) => None,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        self.bank.is_autonomous()
    }

    /// Sorted, deduplicated list of every frequency in the coefficients.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f: Vec<f64> = [&self.c, &self.b, &self.a_coeff, &self.scale]
            .iter()
            .flat_map(|c| c.frequencies())
            .collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }

    pub fn frozen(&self, t: f64) -> Frozen {
        let [c, b, a, scale] = self.bank.eval(t);
        Frozen { c, b, a, scale }
    }

    /// Binds a parameter value, giving an ODE the integrator can run.
    pub fn at(&self, eps: f64) -> FieldAt<'_> {
        FieldAt { field: self, eps }
    }

    pub fn eval(&self, eps: f64, t: f64, x: f64) -> f64 {
        self.at(eps).value(&self.frozen(t), x)
    }

    pub fn eval_dfdx(&self, eps: f64, t: f64, x: f64) -> f64 {
        self.at(eps).slope(&self.frozen(t), x)
    }

    /// Discriminant of the frozen cubic `x ↦ −x³ + c x² + ε(b x + a)`.
    /// The scale factor does not move roots and is left out.
    pub fn discriminant(&self, eps: f64, t: f64) -> f64 {
        let Frozen { c, b, a, .. } = self.frozen(t);
        discriminant(c, b, a, eps)
    }

    /// Real roots of the frozen cubic at time `t`, ascending, with multiplicity.
    pub fn real_roots(&self, eps: f64, t: f64) -> Vec<f64> {
        let Frozen { c, b, a, .. } = self.frozen(t);
        frozen_roots(c, b, a, eps)
    }

    pub fn classify(&self) -> RegimeClass {
        RegimeClass::of(self)
    }

    /// Interval enclosure of the unscaled cubic at `x` over all times.
    fn inner_enclosure(&self, eps: f64, x: f64) -> (f64, f64) {
        let (c_lo, c_hi) = self.c.bounds();
        let (b_lo, b_hi) = self.b.bounds();
        let x2 = x * x;
        let cubic = (x2 * (c_lo - x), x2 * (c_hi - x));
        let lin = match self.a {
            ConstantTerm::RatioOfB(s) => mul_interval((b_lo, b_hi), x - s),
            ConstantTerm::Free(ref a) => {
                let (a_lo, a_hi) = a.bounds();
                let bx = mul_interval((b_lo, b_hi), x);
                (bx.0 + a_lo, bx.1 + a_hi)
            }
        };
        let lin = mul_interval(lin, eps);
        (cubic.0 + lin.0, cubic.1 + lin.1)
    }

    /// `(r1, r2)` with `p_ε(t, r1) > 0 > p_ε(t, r2)` certified for every `t`,
    /// so every bounded solution stays inside `(r1, r2)`.
    pub fn bracket_constants(&self, eps: f64) -> Result<(f64, f64), FieldError> {
        let c_hi = self.c.upper_bound();
        let mut r2 = c_hi.max(1.0) + 1.0;
        while self.inner_enclosure(eps, r2).1 >= 0.0 {
            r2 *= 1.25;
            if r2 > BRACKET_LIMIT {
                return Err(FieldError::BracketSearch(eps));
            }
        }
        let mut r1 = -1.0;
        while self.inner_enclosure(eps, r1).0 <= 0.0 {
            r1 *= 1.25;
            if r1 < -BRACKET_LIMIT {
                return Err(FieldError::BracketSearch(eps));
            }
        }
        Ok((r1, r2))
    }

    /// `(c₋ + √(c₋² + 3ε b₋))/3`, a global lower solution between the middle
    /// and upper branches for large ε.
    pub fn x_plus(&self, eps: f64) -> Result<f64, FieldError> {
        let c_lo = self.c.lower_bound();
        let b_lo = self.b.lower_bound();
        if eps < 0.0 {
            return Err(FieldError::Precondition("x_plus needs ε ≥ 0"));
        }
        if b_lo < 0.0 {
            return Err(FieldError::Precondition("x_plus needs b₋ ≥ 0"));
        }
        Ok((c_lo + (c_lo * c_lo + 3.0 * eps * b_lo).sqrt()) / 3.0)
    }
}

fn mul_interval((lo, hi): (f64, f64), k: f64) -> (f64, f64) {
    if k >= 0.0 {
        (lo * k, hi * k)
    } else {
        (hi * k, lo * k)
    }
}

/// `ε(−4ac³ + εb²c² − 18εabc − 27εa² + 4ε²b³)`.
pub fn discriminant(c: f64, b: f64, a: f64, eps: f64) -> f64 {
    eps * (-4.0 * a * c.powi(3) + eps * b * b * c * c - 18.0 * eps * a * b * c
        - 27.0 * eps * a * a
        + 4.0 * eps * eps * b.powi(3))
}

/// Real roots of `−x³ + c x² + ε(b x + a)`, ascending, with multiplicity.
///
/// Trigonometric formula in the three-root case, Cardano otherwise, then one
/// Newton step for each simple root.
pub fn frozen_roots(c: f64, b: f64, a: f64, eps: f64) -> Vec<f64> {
    // monic form x³ + A x² + B x + C
    let (ca, cb, cc) = (-c, -eps * b, -eps * a);
    let shift = -ca / 3.0;
    let p = cb - ca * ca / 3.0;
    let q = 2.0 * ca.powi(3) / 27.0 - ca * cb / 3.0 + cc;
    let disc = discriminant(c, b, a, eps);

    let f = |x: f64| -x * x * x + c * x * x + eps * (b * x + a);
    let df = |x: f64| -3.0 * x * x + 2.0 * c * x + eps * b;
    let polish = |x: f64| {
        let d = df(x);
        if d != 0.0 {
            let y = x - f(x) / d;
            if y.is_finite() && f(y).abs() <= f(x).abs() {
                return y;
            }
        }
        x
    };

    let mut roots = if disc.abs() < DISCRIMINANT_TIE {
        if p.abs() < 1e-14 {
            vec![shift; 3]
        } else {
            let single = 3.0 * q / p + shift;
            let double = -1.5 * q / p + shift;
            vec![polish(single), double, double]
        }
    } else if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| polish(m * (theta - 2.0 * PI * k as f64 / 3.0).cos() + shift))
            .collect()
    } else {
        let half_q = q / 2.0;
        let root = (half_q * half_q + p.powi(3) / 27.0).max(0.0).sqrt();
        let u = (-half_q + root.copysign(-half_q)).cbrt();
        let y = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
        vec![polish(y + shift)]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

/// A parameter-bound cubic field.
#[derive(Clone, Copy, Debug)]
pub struct FieldAt<'a> {
    pub field: &'a CubicField,
    pub eps: f64,
}

impl FieldAt<'_> {
    #[inline]
    fn linear_part(&self, fr: &Frozen, x: f64) -> f64 {
        match self.field.a {
            ConstantTerm::RatioOfB(s) => fr.b * (x - s),
            ConstantTerm::Free(_) => fr.b * x + fr.a,
        }
    }
}

impl ScalarOde for FieldAt<'_> {
    type Frame = Frozen;
    type Frames<'s>
        = FrozenGrid<'s>
    where
        Self: 's;

    fn frame(&self, t: f64) -> Frozen {
        self.field.frozen(t)
    }

    #[inline]
    fn value(&self, fr: &Frozen, x: f64) -> f64 {
        fr.scale * (x * x * (fr.c - x) + self.eps * self.linear_part(fr, x))
    }

    #[inline]
    fn slope(&self, fr: &Frozen, x: f64) -> f64 {
        fr.scale * (x * (2.0 * fr.c - 3.0 * x) + self.eps * fr.b)
    }

    fn frames(&self, t0: f64, dt: f64) -> FrozenGrid<'_> {
        FrozenGrid(self.field.bank.grid(t0, dt))
    }
}

pub struct FrozenGrid<'a>(GridSampler<'a, 4>);

impl Iterator for FrozenGrid<'_> {
    type Item = Frozen;

    #[inline]
    fn next(&mut self) -> Option<Frozen> {
        self.0.next().map(|[c, b, a, scale]| Frozen { c, b, a, scale })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `sup c < inf(−a/b)`.
    Case1Below,
    /// `inf c > sup(−a/b)`.
    Case2Above,
    /// `c ≡ s` and `a = −s·b`.
    Case3Transcritical,
    Unclassified,
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeKind::Case1Below => "case1_below",
            RegimeKind::Case2Above => "case2_above",
            RegimeKind::Case3Transcritical => "case3_transcritical",
            RegimeKind::Unclassified => "unclassified",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub c_pos: bool,
    pub a_neg: bool,
    pub b_nonneg: bool,
    pub b_pos: bool,
    pub c_plus_lt_3c_minus: bool,
    pub c_plus_lt_3s_minus: bool,
    pub a_is_const_multiple_of_b: bool,
}

impl RegimeFlags {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, bool)> {
        [
            ("c_pos", self.c_pos),
            ("a_neg", self.a_neg),
            ("b_nonneg", self.b_nonneg),
            ("b_pos", self.b_pos),
            ("c_plus_lt_3c_minus", self.c_plus_lt_3c_minus),
            ("c_plus_lt_3s_minus", self.c_plus_lt_3s_minus),
            ("a_is_const_multiple_of_b", self.a_is_const_multiple_of_b),
        ]
        .into_iter()
    }
}

/// Which bifurcation-diagram hypotheses hold, decided from certified bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub kind: RegimeKind,
    pub flags: RegimeFlags,
    /// Bounds of `−a/b`, when `b` is certified positive or `a = −s·b`.
    pub s_minus: Option<f64>,
    pub s_plus: Option<f64>,
    pub c_bounds: (f64, f64),
    pub b_bounds: (f64, f64),
    pub a_bounds: (f64, f64),
    pub b_mean: f64,
    pub frequencies: Vec<f64>,
}

impl RegimeClass {
    fn of(field: &CubicField) -> Self {
        let (c_lo, c_hi) = field.c.bounds();
        let (b_lo, b_hi) = field.b.bounds();
        let (a_lo, a_hi) = field.a_coeff.bounds();
        let ratio = field.ratio();
        let (s_minus, s_plus) = match ratio {
            Some(s) => (Some(s), Some(s)),
            None if b_lo > 0.0 => {
                // −a/b over [−a_hi, −a_lo] / [b_lo, b_hi]
                let (n_lo, n_hi) = (-a_hi, -a_lo);
                let cands = [n_lo / b_lo, n_lo / b_hi, n_hi / b_lo, n_hi / b_hi];
                (
                    Some(cands.iter().copied().fold(f64::INFINITY, f64::min)),
                    Some(cands.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                )
            }
            None => (None, None),
        };
        let flags = RegimeFlags {
            c_pos: c_lo > 0.0,
            a_neg: a_hi < 0.0,
            b_nonneg: b_lo >= 0.0,
            b_pos: b_lo > 0.0,
            c_plus_lt_3c_minus: c_hi < 3.0 * c_lo,
            c_plus_lt_3s_minus: s_minus.is_some_and(|s| c_hi < 3.0 * s),
            a_is_const_multiple_of_b: ratio.is_some(),
        };
        let b_mean = field.b.mean();
        let basic = flags.c_pos && flags.a_neg;
        let kind = match (ratio, field.c.constant_value()) {
            (Some(s), Some(c)) if c == s && basic && flags.b_nonneg && b_mean > 0.0 => {
                RegimeKind::Case3Transcritical
            }
            _ if !(basic && flags.b_pos) => RegimeKind::Unclassified,
            _ => match (s_minus, s_plus) {
                (Some(sm), _) if c_hi < sm => RegimeKind::Case1Below,
                (_, Some(sp)) if c_lo > sp => RegimeKind::Case2Above,
                _ => RegimeKind::Unclassified,
            },
        };
        RegimeClass {
            kind,
            flags,
            s_minus,
            s_plus,
            c_bounds: (c_lo, c_hi),
            b_bounds: (b_lo, b_hi),
            a_bounds: (a_lo, a_hi),
            b_mean,
            frequencies: field.frequencies(),
        }
    }

    /// `c > 0` and `a < 0` everywhere: the standing assumptions for locating
    /// branches.
    pub fn require_basic(&self) -> Result<(), FieldError> {
        if !self.flags.c_pos {
            return Err(FieldError::Hypothesis("c_pos"));
        }
        if !self.flags.a_neg {
            return Err(FieldError::Hypothesis("a_neg"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::TrigPoly;
    use crate::popmodel::PopScenario;

    fn allee() -> CubicField {
        PopScenario::reference(0.0, 1.0).field().unwrap()
    }

    /// Independent expansion of the original population equation.
    fn allee_direct(eps: f64, t: f64, x: f64) -> f64 {
        let k = 2.0 + 0.5 * (3f64.sqrt() * t).sin();
        let b = 2.1 + 0.3 * t.cos();
        -x * x * x / k + x * x + eps * b * (x - 2.6)
    }

    #[test]
    fn eval_examples() {
        let f = CubicField::autonomous(1.0, 1.0, -1.0);
        assert_eq!(f.eval(0.0, 7.0, 1.0), 0.0);
        let g = allee();
        for &(eps, t) in &[(0.3, 1.7), (-2.0, 40.0)] {
            let fr = g.frozen(t);
            assert!((g.eval(eps, t, 0.0) - fr.scale * eps * fr.a).abs() < 1e-12);
        }
        // at x = s the migration term vanishes: 0.5·(−2.6³ + 2·2.6²)
        let v = g.eval(1.0, 0.0, 2.6);
        assert!((v - (-2.028)).abs() < 1e-12, "{v}");
        for &(eps, t, x) in &[(1.0, 0.0, 2.6), (0.2, 13.1, 1.1), (9.2, -77.0, -6.0)] {
            assert!((g.eval(eps, t, x) - allee_direct(eps, t, x)).abs() < 1e-11);
        }
    }

    #[test]
    fn derivative_examples() {
        let g = allee();
        let fr = g.frozen(2.0);
        assert!((g.eval_dfdx(0.4, 2.0, 0.0) - fr.scale * 0.4 * fr.b).abs() < 1e-14);

        let s = 2.6;
        let case3 = CubicField::new(s, TrigPoly::constant(2.1).cosine(0.3, 1.0, 0.0), ConstantTerm::RatioOfB(s), None).unwrap();
        for &t in &[0.0, 1.0, 5.5] {
            let eps = 1.7;
            let b = 2.1 + 0.3 * f64::cos(t);
            assert!((case3.eval_dfdx(eps, t, s) - (-s * s + eps * b)).abs() < 1e-12);
            assert_eq!(case3.eval(eps, t, s), 0.0);
        }

        let h = 1e-6;
        for &(eps, t, x) in &[(0.1, 0.3, 2.0), (5.0, -3.0, -1.5), (-1.0, 10.0, 0.7)] {
            let fd = (g.eval(eps, t, x + h) - g.eval(eps, t, x - h)) / (2.0 * h);
            let an = g.eval_dfdx(eps, t, x);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn discriminant_examples() {
        let f = CubicField::autonomous(1.0, 0.0, -1.0);
        assert_eq!(f.discriminant(0.0, 0.0), 0.0);
        assert!(f.discriminant(4.0 / 27.0, 0.0).abs() < 1e-15);
        assert!(f.discriminant(0.1, 0.0) > 0.0);
        assert!(f.discriminant(0.2, 0.0) < 0.0);
    }

    #[test]
    fn roots_at_zero_eps() {
        let g = allee();
        let c = g.frozen(1.3).c;
        let r = g.real_roots(0.0, 1.3);
        assert_eq!(r.len(), 3);
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12);
        assert!((r[2] - c).abs() < 1e-12);
    }

    #[test]
    fn roots_match_bisection_oracle() {
        // −x³ + x² − 0.1 : bracket sign changes on a fine grid, then bisect
        let f = |x: f64| -x * x * x + x * x - 0.1;
        let mut oracle = Vec::new();
        let grid: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).collect();
        for w in grid.windows(2) {
            if f(w[0]).signum() != f(w[1]).signum() {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid).signum() == f(lo).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                oracle.push(0.5 * (lo + hi));
            }
        }
        let roots = CubicField::autonomous(1.0, 0.0, -1.0).real_roots(0.1, 0.0);
        assert_eq!(roots.len(), 3);
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r - o).abs() < 1e-12, "{r} vs {o}");
        }
    }

    #[test]
    fn negative_eps_has_one_positive_root() {
        let r = CubicField::autonomous(1.0, 0.0, -1.0).real_roots(-0.1, 0.0);
        assert_eq!(r.len(), 1);
        assert!(r[0] > 0.0);
    }

    #[test]
    fn double_root_reported_with_multiplicity() {
        let r = frozen_roots(1.0, 0.0, -1.0, 4.0 / 27.0);
        assert_eq!(r.len(), 3);
        assert!((r[1] - 2.0 / 3.0).abs() < 1e-7 && (r[2] - 2.0 / 3.0).abs() < 1e-7);
        assert!((r[0] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn classify_reference_population() {
        let rc = allee().classify();
        assert_eq!(rc.kind, RegimeKind::Case1Below);
        assert_eq!(rc.c_bounds, (1.5, 2.5));
        assert_eq!(rc.s_minus, Some(2.6));
        assert_eq!(rc.s_plus, Some(2.6));
        assert!(rc.flags.c_plus_lt_3c_minus);
        assert!(rc.flags.c_pos && rc.flags.a_neg && rc.flags.b_pos);
    }

    #[test]
    fn classify_cases() {
        let b = TrigPoly::constant(2.1).cosine(0.3, 1.0, 0.0);
        let k = TrigPoly::constant(2.0).sine(0.5, 3f64.sqrt(), 0.0);
        let case3 = CubicField::new(2.6, b.clone(), ConstantTerm::RatioOfB(2.6), None).unwrap();
        assert_eq!(case3.classify().kind, RegimeKind::Case3Transcritical);

        let edge = CubicField::new(k.clone(), b.clone(), ConstantTerm::RatioOfB(1.5), None).unwrap();
        assert_eq!(edge.classify().kind, RegimeKind::Unclassified);
        let above = CubicField::new(k.clone(), b.clone(), ConstantTerm::RatioOfB(1.4), None).unwrap();
        assert_eq!(above.classify().kind, RegimeKind::Case2Above);

        let sign_change = TrigPoly::constant(0.5).cosine(1.0, 1.0, 0.0);
        let bad = CubicField::new(k, sign_change, ConstantTerm::Free((-1.0).into()), None).unwrap();
        let rc = bad.classify();
        assert!(!rc.flags.b_nonneg);
        assert_eq!(rc.kind, RegimeKind::Unclassified);
    }

    #[test]
    fn classify_ignores_positive_scale() {
        let g = allee();
        let scaled = g.with_scale(Coeff::new(3.0, g.scale().num.clone(), g.scale().den.clone()).unwrap()).unwrap();
        assert_eq!(g.classify(), scaled.classify());
    }

    #[test]
    fn bracket_constants_are_certified() {
        let g = allee();
        for &eps in &[0.0, 0.1, 0.2019, 1.0, 9.2, -10.0, 50.0] {
            let (r1, r2) = g.bracket_constants(eps).unwrap();
            assert!(r1 < r2);
            for i in 0..10_000 {
                let t = -5000.0 + i as f64 * 1.0001;
                assert!(g.eval(eps, t, r1) > 0.0, "eps={eps} t={t}");
                assert!(g.eval(eps, t, r2) < 0.0, "eps={eps} t={t}");
            }
        }
        // ε = 0 with c₊ = 2.5: the first guess c₊ + 1 is already certified
        let (r1, r2) = g.bracket_constants(0.0).unwrap();
        assert_eq!(r2, 3.5);
        assert_eq!(r1, -1.0);
    }

    #[test]
    fn x_plus_values() {
        let g = allee(); // c₋ = 1.5
        assert!((g.x_plus(0.0).unwrap() - 1.0).abs() < 1e-15);
        let f = CubicField::autonomous(1.5, 1.8, -1.0);
        let want = (1.5 + 67.05f64.sqrt()) / 3.0;
        assert!((f.x_plus(12.0).unwrap() - want).abs() < 1e-14);
        let mut last = f64::NEG_INFINITY;
        for i in 0..50 {
            let v = f.x_plus(i as f64 * 0.5).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(f.x_plus(-1.0).is_err());
    }
}

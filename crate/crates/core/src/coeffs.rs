//! Quasiperiodic coefficient functions.
//!
//! A [`TrigPoly`] is a constant plus finitely many sinusoids. Its time-mean is
//! the constant term and its certified bounds are `constant ± Σ|amp|`.
//! A [`Coeff`] is a gain times a product of trig polynomials divided by another
//! product; this is closed under the rewriting used by the population model
//! (`r/k`, `k·b/r`, ...) and keeps interval bounds tight for positive factors.
//!
//! [`CoeffBank`] compiles a fixed set of coefficients into shared sinusoid
//! "atoms" so that integrators can sample every coefficient on a uniform time
//! grid with a rotation recurrence instead of calling `sin`/`cos` per point.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("harmonic frequency must be finite and > 0, got {0}")]
    BadFrequency(f64),
    #[error("non-finite coefficient value in {0}")]
    NonFinite(&'static str),
    #[error("denominator is not certified positive (lower bound {0})")]
    DenominatorNotPositive(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    #[serde(alias = "sin")]
    Sine,
    #[serde(alias = "cos")]
    Cosine,
}

/// `amp · trig(freq · t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amp: f64,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
    pub kind: Wave,
}

impl Harmonic {
    pub fn eval(&self, t: f64) -> f64 {
        let arg = self.freq * t + self.phase;
        match self.kind {
            Wave::Sine => self.amp * arg.sin(),
            Wave::Cosine => self.amp * arg.cos(),
        }
    }

    /// Same harmonic written as `amp · cos(freq · t + phase)`.
    fn as_cosine(&self) -> (f64, f64, f64) {
        match self.kind {
            Wave::Cosine => (self.amp, self.freq, self.phase),
            Wave::Sine => (self.amp, self.freq, self.phase - FRAC_PI_2),
        }
    }
}

/// Trigonometric polynomial `constant + Σ amp·trig(freq·t + phase)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<Harmonic>,
}

impl TrigPoly {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            harmonics: Vec::new(),
        }
    }

    pub fn sine(mut self, amp: f64, freq: f64, phase: f64) -> Self {
        self.harmonics.push(Harmonic {
            amp,
            freq,
            phase,
            kind: Wave::Sine,
        });
        self
    }

    pub fn cosine(mut self, amp: f64, freq: f64, phase: f64) -> Self {
        self.harmonics.push(Harmonic {
            amp,
            freq,
            phase,
            kind: Wave::Cosine,
        });
        self
    }

    pub fn validate(&self) -> Result<(), CoeffError> {
        if !self.constant.is_finite() {
            return Err(CoeffError::NonFinite("constant"));
        }
        for h in &self.harmonics {
            if !(h.freq.is_finite() && h.freq > 0.0) {
                return Err(CoeffError::BadFrequency(h.freq));
            }
            if !h.amp.is_finite() || !h.phase.is_finite() {
                return Err(CoeffError::NonFinite("harmonic"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.constant + self.harmonics.iter().map(|h| h.eval(t)).sum::<f64>()
    }

    /// Time-mean; every harmonic has zero mean.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    fn amplitude_sum(&self) -> f64 {
        self.harmonics.iter().map(|h| h.amp.abs()).sum()
    }

    pub fn lower_bound(&self) -> f64 {
        self.constant - self.amplitude_sum()
    }

    pub fn upper_bound(&self) -> f64 {
        self.constant + self.amplitude_sum()
    }

    /// Certified `(inf, sup)` bounds.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lower_bound(), self.upper_bound())
    }

    /// Min/max over a uniform grid on `[0, span]`. For reporting only: this is
    /// an estimate of the true range, not a guarantee.
    pub fn sampled_bounds(&self, step: f64, span: f64) -> (f64, f64) {
        let n = (span / step).ceil() as usize;
        (0..=n)
            .map(|i| self.eval(i as f64 * step))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_constant(&self) -> bool {
        self.harmonics.iter().all(|h| h.amp == 0.0)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.harmonics.iter().map(|h| h.freq).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            constant: self.constant * factor,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    amp: h.amp * factor,
                    ..h.clone()
                })
                .collect(),
        }
    }

    /// Exact product expanded with the product-to-sum identities.
    pub fn product(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::constant(self.constant * other.constant);
        for h in &self.harmonics {
            out.harmonics.push(Harmonic {
                amp: h.amp * other.constant,
                ..h.clone()
            });
        }
        for h in &other.harmonics {
            out.harmonics.push(Harmonic {
                amp: h.amp * self.constant,
                ..h.clone()
            });
        }
        for h1 in &self.harmonics {
            let (a1, w1, p1) = h1.as_cosine();
            for h2 in &other.harmonics {
                let (a2, w2, p2) = h2.as_cosine();
                let half = 0.5 * a1 * a2;
                // cos(A)cos(B) = ½cos(A−B) + ½cos(A+B)
                if w1 == w2 {
                    out.constant += half * (p1 - p2).cos();
                } else if w1 > w2 {
                    out = out.cosine(half, w1 - w2, p1 - p2);
                } else {
                    out = out.cosine(half, w2 - w1, p2 - p1);
                }
                out = out.cosine(half, w1 + w2, p1 + p2);
            }
        }
        out.harmonics.retain(|h| h.amp != 0.0);
        out
    }
}

impl From<f64> for TrigPoly {
    fn from(value: f64) -> Self {
        TrigPoly::constant(value)
    }
}

/// `gain · Π num / Π den`, every denominator factor certified positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coeff {
    pub gain: f64,
    pub num: Vec<TrigPoly>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub den: Vec<TrigPoly>,
}

impl From<TrigPoly> for Coeff {
    fn from(p: TrigPoly) -> Self {
        Coeff {
            gain: 1.0,
            num: vec![p],
            den: Vec::new(),
        }
    }
}

impl From<f64> for Coeff {
    fn from(value: f64) -> Self {
        Coeff::from(TrigPoly::constant(value))
    }
}

fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

impl Coeff {
    pub fn new(gain: f64, num: Vec<TrigPoly>, den: Vec<TrigPoly>) -> Result<Self, CoeffError> {
        let c = Coeff { gain, num, den };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CoeffError> {
        if !self.gain.is_finite() {
            return Err(CoeffError::NonFinite("gain"));
        }
        for p in self.num.iter().chain(&self.den) {
            p.validate()?;
        }
        for p in &self.den {
            if p.lower_bound() <= 0.0 {
                return Err(CoeffError::DenominatorNotPositive(p.lower_bound()));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let num: f64 = self.num.iter().map(|p| p.eval(t)).product();
        let den: f64 = self.den.iter().map(|p| p.eval(t)).product();
        self.gain * num / den
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Coeff {
            gain: self.gain * factor,
            ..self.clone()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.num.iter().chain(&self.den).all(TrigPoly::is_constant)
    }

    /// The value when [`Coeff::is_constant`] holds.
    pub fn constant_value(&self) -> Option<f64> {
        self.is_constant().then(|| self.eval(0.0))
    }

    /// Certified `(inf, sup)` via interval arithmetic over the factors.
    pub fn bounds(&self) -> (f64, f64) {
        let mut acc = (self.gain, self.gain);
        for p in &self.num {
            acc = interval_mul(acc, p.bounds());
        }
        for p in &self.den {
            let (lo, hi) = p.bounds();
            acc = interval_mul(acc, (1.0 / hi, 1.0 / lo));
        }
        acc
    }

    pub fn lower_bound(&self) -> f64 {
        self.bounds().0
    }

    pub fn upper_bound(&self) -> f64 {
        self.bounds().1
    }

    /// Whether [`Coeff::mean`] is exact rather than a long time average.
    pub fn mean_is_exact(&self) -> bool {
        self.den.iter().all(TrigPoly::is_constant)
    }

    /// Time-mean. Exact (constant term of the expanded numerator) when every
    /// denominator factor is constant; otherwise a composite-Simpson time
    /// average over `[0, 10⁴]`.
    pub fn mean(&self) -> f64 {
        if self.mean_is_exact() {
            let expanded = self
                .num
                .iter()
                .fold(TrigPoly::constant(1.0), |acc, p| acc.product(p));
            let den: f64 = self.den.iter().map(|p| p.constant).product();
            self.gain * expanded.constant / den
        } else {
            time_average(|t| self.eval(t), 1.0e4, 1.0e-2)
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self
            .num
            .iter()
            .chain(&self.den)
            .flat_map(|p| p.frequencies())
            .collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }
}

/// `(1/span) ∫₀^span f` by composite Simpson.
pub fn time_average(f: impl Fn(f64) -> f64, span: f64, step: f64) -> f64 {
    let mut n = (span / step).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = span / n as f64;
    let mut acc = f(0.0) + f(span);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0 / span
}

// ---------------------------------------------------------------------------
// Compiled sampling.

#[derive(Clone, Copy, Debug, PartialEq)]
struct Atom {
    freq: f64,
    phase: f64,
}

#[derive(Clone, Copy, Debug)]
struct Term {
    amp: f64,
    atom: usize,
    sine: bool,
}

/// A trigonometric polynomial as a constant plus `terms[range]`.
#[derive(Clone, Debug)]
struct PolyProgram {
    constant: f64,
    terms: std::ops::Range<usize>,
}

/// `gain · Π polys[num] / Π polys[den]`, with constant factors folded into
/// the gain at compile time.
#[derive(Clone, Debug)]
struct CoeffProgram {
    gain: f64,
    num: std::ops::Range<usize>,
    den: std::ops::Range<usize>,
}

#[derive(Default)]
struct BankBuilder {
    atoms: Vec<Atom>,
    sources: Vec<TrigPoly>,
    polys: Vec<PolyProgram>,
    terms: Vec<Term>,
    factors: Vec<usize>,
}

impl BankBuilder {
    fn atom(&mut self, atom: Atom) -> usize {
        match self.atoms.iter().position(|a| *a == atom) {
            Some(i) => i,
            None => {
                self.atoms.push(atom);
                self.atoms.len() - 1
            }
        }
    }

    fn poly(&mut self, p: &TrigPoly) -> usize {
        if let Some(i) = self.sources.iter().position(|q| q == p) {
            return i;
        }
        let first = self.terms.len();
        for h in p.harmonics.iter().filter(|h| h.amp != 0.0) {
            let atom = self.atom(Atom {
                freq: h.freq,
                phase: h.phase,
            });
            self.terms.push(Term {
                amp: h.amp,
                atom,
                sine: h.kind == Wave::Sine,
            });
        }
        self.sources.push(p.clone());
        self.polys.push(PolyProgram {
            constant: p.constant,
            terms: first..self.terms.len(),
        });
        self.polys.len() - 1
    }

    fn coeff(&mut self, c: &Coeff) -> CoeffProgram {
        let mut gain = c.gain;
        let mut factors = |list: &[TrigPoly], gain: &mut f64, invert: bool| {
            let mut idx = Vec::new();
            for p in list {
                if p.is_constant() {
                    if invert {
                        *gain /= p.constant;
                    } else {
                        *gain *= p.constant;
                    }
                } else {
                    idx.push(self.poly(p));
                }
            }
            let first = self.factors.len();
            self.factors.extend(idx);
            first..self.factors.len()
        };
        let num = factors(&c.num, &mut gain, false);
        let den = factors(&c.den, &mut gain, true);
        CoeffProgram { gain, num, den }
    }
}

/// A fixed set of `N` coefficients compiled for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CoeffBank<const N: usize> {
    atoms: Vec<Atom>,
    polys: Vec<PolyProgram>,
    terms: Vec<Term>,
    factors: Vec<usize>,
    coeffs: [CoeffProgram; N],
}

impl<const N: usize> CoeffBank<N> {
    pub fn compile(coeffs: [&Coeff; N]) -> Self {
        let mut builder = BankBuilder::default();
        let coeffs = coeffs.map(|c| builder.coeff(c));
        CoeffBank {
            atoms: builder.atoms,
            polys: builder.polys,
            terms: builder.terms,
            factors: builder.factors,
            coeffs,
        }
    }

    #[inline]
    fn combine(&self, atom_cs: &[(f64, f64)], poly_buf: &mut [f64]) -> [f64; N] {
        for (slot, p) in poly_buf.iter_mut().zip(&self.polys) {
            let mut v = p.constant;
            for t in &self.terms[p.terms.clone()] {
                let (c, s) = atom_cs[t.atom];
                v += t.amp * if t.sine { s } else { c };
            }
            *slot = v;
        }
        let mut out = [0.0; N];
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            let mut v = c.gain;
            for &i in &self.factors[c.num.clone()] {
                v *= poly_buf[i];
            }
            if !c.den.is_empty() {
                let mut d = 1.0;
                for &i in &self.factors[c.den.clone()] {
                    d *= poly_buf[i];
                }
                v /= d;
            }
            *o = v;
        }
        out
    }

    /// All coefficients at time `t`, evaluated directly.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let cs: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| {
                let (s, c) = (a.freq * t + a.phase).sin_cos();
                (c, s)
            })
            .collect();
        let mut buf = vec![0.0; self.polys.len()];
        self.combine(&cs, &mut buf)
    }

    /// Iterator over the coefficients at `t0 + j·dt`, `j = 0, 1, 2, …`.
    pub fn grid(&self, t0: f64, dt: f64) -> GridSampler<'_, N> {
        let m = self.atoms.len();
        let mut rot_cos = vec![0.0; m * BLOCK];
        let mut rot_sin = vec![0.0; m * BLOCK];
        for (k, a) in self.atoms.iter().enumerate() {
            for i in 0..BLOCK {
                let (s, c) = (a.freq * dt * i as f64).sin_cos();
                rot_cos[k * BLOCK + i] = c;
                rot_sin[k * BLOCK + i] = s;
            }
        }
        GridSampler {
            bank: self,
            t0,
            dt,
            next_block: 0,
            rot_cos,
            rot_sin,
            cos: vec![0.0; m * BLOCK],
            sin: vec![0.0; m * BLOCK],
            polys: vec![0.0; self.polys.len() * BLOCK],
            out: std::array::from_fn(|_| vec![0.0; BLOCK]),
            pos: BLOCK,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Points evaluated per batch by [`GridSampler`].
const BLOCK: usize = 256;

/// Uniform-grid coefficient sampler. Each batch of points starts from an
/// exact evaluation of every sinusoid and rotates it by precomputed angles,
/// so rounding does not accumulate along the grid.
pub struct GridSampler<'a, const N: usize> {
    bank: &'a CoeffBank<N>,
    t0: f64,
    dt: f64,
    next_block: u64,
    rot_cos: Vec<f64>,
    rot_sin: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    polys: Vec<f64>,
    out: [Vec<f64>; N],
    pos: usize,
}

impl<const N: usize> GridSampler<'_, N> {
    fn refill(&mut self) {
        let bank = self.bank;
        let t = self.t0 + (self.next_block * BLOCK as u64) as f64 * self.dt;
        for (k, atom) in bank.atoms.iter().enumerate() {
            let (s0, c0) = (atom.freq * t + atom.phase).sin_cos();
            let r = k * BLOCK..(k + 1) * BLOCK;
            let (rc, rs) = (&self.rot_cos[r.clone()], &self.rot_sin[r.clone()]);
            let (cos, sin) = (&mut self.cos[r.clone()], &mut self.sin[r]);
            for i in 0..BLOCK {
                cos[i] = c0 * rc[i] - s0 * rs[i];
                sin[i] = s0 * rc[i] + c0 * rs[i];
            }
        }
        for (p, prog) in bank.polys.iter().enumerate() {
            let v = &mut self.polys[p * BLOCK..(p + 1) * BLOCK];
            v.fill(prog.constant);
            for t in &bank.terms[prog.terms.clone()] {
                let src = if t.sine { &self.sin } else { &self.cos };
                let src = &src[t.atom * BLOCK..(t.atom + 1) * BLOCK];
                for (v, x) in v.iter_mut().zip(src) {
                    *v += t.amp * x;
                }
            }
        }
        for (out, c) in self.out.iter_mut().zip(&bank.coeffs) {
            out.fill(c.gain);
            for &f in &bank.factors[c.num.clone()] {
                let src = &self.polys[f * BLOCK..(f + 1) * BLOCK];
                for (o, x) in out.iter_mut().zip(src) {
                    *o *= x;
                }
            }
            for &f in &bank.factors[c.den.clone()] {
                let src = &self.polys[f * BLOCK..(f + 1) * BLOCK];
                for (o, x) in out.iter_mut().zip(src) {
                    *o /= x;
                }
            }
        }
        self.next_block += 1;
        self.pos = 0;
    }
}

impl<const N: usize> Iterator for GridSampler<'_, N> {
    type Item = [f64; N];

    #[inline]
    fn next(&mut self) -> Option<[f64; N]> {
        if self.pos == BLOCK {
            self.refill();
        }
        let i = self.pos;
        self.pos += 1;
        Some(std::array::from_fn(|n| self.out[n][i]))
    }
}

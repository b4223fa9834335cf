//! Numerical settings shared by the branch, Lyapunov and bisection machinery.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{Rk4, DEFAULT_STEP, X_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid numerics: {0}")]
pub struct NumericsError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// RK4 step.
    pub h: f64,
    /// Runs cover `[−t_run, t_run]`.
    pub t_run: f64,
    /// Branches are reported on `[−t_eval, t_eval]`.
    pub t_eval: f64,
    pub x_max: f64,
    /// Minimum window gap for two branches to count as distinct.
    pub delta_sep: f64,
    /// Maximum two-start disagreement for an attractive branch to count as converged.
    pub delta_match: f64,
    pub target_width: f64,
    /// Steps between stored samples; the report grid step is `h·report_stride`.
    pub report_stride: u64,
    pub max_iterations: u32,
    /// Shorter `t_run` used by bisection while the bracket is wide. `None`
    /// disables the shortcut.
    pub reduced_t_run: Option<f64>,
    /// Bracket width below which bisection switches to full windows.
    pub reduced_until: f64,
    /// Tail tolerance for calling a population run "on the upper branch".
    pub delta_track: f64,
    pub horizon: f64,
    /// Refuse to locate branches unless `c > 0` and `a < 0` are certified.
    pub check_hypotheses: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            h: DEFAULT_STEP,
            t_run: 1e4,
            t_eval: 1e3,
            x_max: X_MAX,
            delta_sep: 1e-6,
            delta_match: 1e-8,
            target_width: 1e-12,
            report_stride: 1024,
            max_iterations: 60,
            reduced_t_run: Some(2e3),
            reduced_until: 1e-6,
            delta_track: 1e-3,
            horizon: 2e4,
            check_hypotheses: true,
        }
    }
}

impl Numerics {
    /// Same settings with shorter windows (`t_eval` capped at half of `t_run`).
    pub fn with_windows(&self, t_run: f64, t_eval: f64) -> Self {
        Numerics {
            t_run,
            t_eval: t_eval.min(t_run / 2.0),
            ..self.clone()
        }
    }

    /// Settings used during the wide-bracket phase of a bisection.
    pub fn reduced(&self) -> Option<Self> {
        self.reduced_t_run
            .filter(|&t| t < self.t_run)
            .map(|t| self.with_windows(t, self.t_eval))
    }

    pub fn report_step(&self) -> f64 {
        self.h * self.report_stride as f64
    }

    pub fn rk4(&self) -> Rk4 {
        Rk4::new(self.h).guard(self.x_max)
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        let positive = [
            ("h", self.h),
            ("t_run", self.t_run),
            ("t_eval", self.t_eval),
            ("x_max", self.x_max),
            ("delta_sep", self.delta_sep),
            ("delta_match", self.delta_match),
            ("target_width", self.target_width),
            ("reduced_until", self.reduced_until),
            ("delta_track", self.delta_track),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(NumericsError(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.reduced_t_run {
            if !(t.is_finite() && t > 0.0) {
                return Err(NumericsError(format!("reduced_t_run must be positive, got {t}")));
            }
        }
        if self.report_stride == 0 || self.report_stride % 2 == 1 {
            return Err(NumericsError("report_stride must be even and nonzero".into()));
        }
        if self.t_eval > self.t_run {
            return Err(NumericsError("t_eval must not exceed t_run".into()));
        }
        let step = self.report_step();
        for (name, v) in [("t_run", self.t_run), ("t_eval", self.t_eval)] {
            let k = v / step;
            if (k - k.round()).abs() > 1e-9 {
                return Err(NumericsError(format!(
                    "{name} = {v} is not a multiple of the report step {step}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(NumericsError("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let n = Numerics::default();
        n.validate().unwrap();
        assert_eq!(n.report_step(), 1.0);
        assert_eq!(n.reduced().unwrap().t_run, 2e3);
        assert_eq!(n.reduced().unwrap().t_eval, 1e3);
    }

    #[test]
    fn rejects_bad_values() {
        let mut n = Numerics::default();
        n.t_eval = 2e4;
        assert!(n.validate().is_err());
        let mut n = Numerics::default();
        n.t_run = 100.5;
        assert!(n.validate().is_err());
        let mut n = Numerics::default();
        n.report_stride = 3;
        assert!(n.validate().is_err());
    }
}

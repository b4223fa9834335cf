//! Experiment configuration files (TOML).

use std::path::Path;

use qpcubic::{Coeff, ConstantTerm, CubicField, Numerics, PopScenario, TrigPoly};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A coefficient written as a number, a trigonometric polynomial or a full
/// `gain · Π num / Π den` ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Number(f64),
    Poly(TrigPoly),
    Ratio(Coeff),
}

impl CoeffSpec {
    pub fn to_coeff(&self) -> Result<Coeff, CliError> {
        let c = match self {
            CoeffSpec::Number(v) => Coeff::from(*v),
            CoeffSpec::Poly(p) => Coeff::from(p.clone()),
            CoeffSpec::Ratio(c) => c.clone(),
        };
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

/// `x' = d(t)(−x³ + c x² + ε(b x + a))`, with `a` given either directly or as
/// `a = −s·b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientForm {
    pub c: CoeffSpec,
    pub b: CoeffSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<CoeffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<CoeffSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopScenario>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTask {
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectKind {
    /// Number of bounded solutions.
    #[default]
    Branches,
    /// Sign of the exponent of the constant solution `s`.
    Transcritical,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectTask {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    #[serde(default)]
    pub kind: BisectKind,
    /// Exponent window for the transcritical predicate.
    pub t_max: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    Lower,
    Middle,
    #[default]
    Upper,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapTask {
    pub eps: Option<f64>,
    pub branch: Option<BranchName>,
    /// `[T, tau]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x0: Vec<f64>,
    pub horizon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationTask {
    pub x0: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldDef,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub scan: ScanTask,
    #[serde(default)]
    pub bisect: BisectTask,
    #[serde(default)]
    pub lyap: LyapTask,
    #[serde(default)]
    pub simulate: SimulateTask,
    #[serde(default)]
    pub population: PopulationTask,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.numerics
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        match (&self.field.coefficients, &self.field.population) {
            (Some(f), None) => {
                if f.a.is_some() == f.s.is_some() {
                    return Err(CliError::Config(
                        "coefficient form needs exactly one of `a` and `s`".into(),
                    ));
                }
            }
            (None, Some(p)) => p.validate().map_err(|e| CliError::Config(e.to_string()))?,
            _ => {
                return Err(CliError::Config(
                    "[field] needs exactly one of `coefficients` and `population`".into(),
                ))
            }
        }
        self.build_field().map(|_| ())
    }

    pub fn build_field(&self) -> Result<CubicField, CliError> {
        let cfg_err = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        if let Some(p) = &self.field.population {
            return p.field().map_err(|e| cfg_err(&e));
        }
        let f = self.field.coefficients.as_ref().expect("validated field form");
        let a = match (&f.a, f.s) {
            (Some(a), _) => ConstantTerm::Free(a.to_coeff()?),
            (None, Some(s)) => ConstantTerm::RatioOfB(s),
            (None, None) => return Err(CliError::Config("missing `a` or `s`".into())),
        };
        let scale = f.scale.as_ref().map(CoeffSpec::to_coeff).transpose()?;
        CubicField::new(f.c.to_coeff()?, f.b.to_coeff()?, a, scale).map_err(|e| cfg_err(&e))
    }

    /// The population scenario, for subcommands that need one.
    pub fn scenario(&self) -> Result<&PopScenario, CliError> {
        self.field
            .population
            .as_ref()
            .ok_or_else(|| CliError::Config("this subcommand needs a [field.population] form".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALLEE: &str = r#"
[field.population]
r = { constant = 1.0 }
k = { constant = 2.0, harmonics = [{ amp = 0.5, freq = 1.7320508075688772, kind = "sin" }] }
b = { constant = 2.1, harmonics = [{ amp = 0.3, freq = 1.0, kind = "cos" }] }
s = 2.6

[numerics]
t_run = 2000.0
t_eval = 200.0
"#;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::parse(ALLEE).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.numerics.h, Numerics::default().h);
    }

    #[test]
    fn coefficient_forms() {
        let cfg = ExperimentConfig::parse(
            r#"
[field.coefficients]
c = 2.6
b = { constant = 2.1, harmonics = [{ amp = 0.3, freq = 1.0, kind = "cosine" }] }
s = 2.6
scale = { gain = 2.0, num = [{ constant = 1.0 }] }
"#,
        )
        .unwrap();
        assert_eq!(cfg, ExperimentConfig::parse(&cfg.to_toml()).unwrap());
        assert_eq!(cfg.build_field().unwrap().ratio(), Some(2.6));
    }

    #[test]
    fn exactly_one_form() {
        let both = format!("{ALLEE}\n[field.coefficients]\nc = 1.0\nb = 0.0\na = -1.0\n");
        assert!(matches!(ExperimentConfig::parse(&both), Err(CliError::Config(_))));
        assert!(ExperimentConfig::parse("[field]\n").is_err());
        let no_a = "[field.coefficients]\nc = 1.0\nb = 0.0\n";
        assert!(ExperimentConfig::parse(no_a).is_err());
    }

    #[test]
    fn rejects_bad_numerics() {
        let bad = ALLEE.replace("t_eval = 200.0", "t_eval = -1.0");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let unknown = format!("{ALLEE}\nfoo = 1\n");
        assert!(ExperimentConfig::parse(&unknown).is_err());
    }
}

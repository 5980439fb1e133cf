//! Flat `section.key` configuration. Files are TOML; tables are flattened so
//! `[model] a = 0.7` and a command-line `--model.a 0.7` address the same key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dynamics::Model;
use crate::estimators::{
    CtGradLstd, Estimator, GradLstd, Lstd, NonlinearTd, RegenLstd, StepSize, TdK, TdKConfig,
};
use crate::features::{basis_by_name, Basis, LinearFamily, NonlinearFamily, SoftQuadraticFamily};
use crate::models::{Ar1, Arrivals, BranchPoint, Ou, SpeedScaling};
use crate::{Error, Result, Vector};

/// Every accepted key. Anything else is rejected.
pub const KEYS: &[&str] = &[
    "model.name",
    "model.a",
    "model.epsilon",
    "model.p_a",
    "model.delta_a",
    "model.branch",
    "model.beta",
    "model.dt",
    "basis",
    "algorithm.name",
    "algorithm.alpha",
    "algorithm.lambda",
    "algorithm.gamma",
    "algorithm.step_exponent",
    "algorithm.gain_offset",
    "algorithm.refresh",
    "algorithm.warmup",
    "algorithm.cond_max",
    "algorithm.family",
    "algorithm.theta0",
    "run.T",
    "run.replicas",
    "run.seed",
    "run.burn_in",
    "run.x0",
    "run.checkpoints",
    "run.parallel",
    "output.dir",
];

/// Raw key/value pairs, ordered by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(pub BTreeMap<String, String>);

impl KeyValues {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut out = KeyValues::default();
        flatten("", &toml::Value::Table(table), &mut out)?;
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(unknown_key(key));
        }
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `--section.key value` and `--section.key=value` pairs.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, args: &[S]) -> Result<()> {
        let mut it = args.iter().map(AsRef::as_ref);
        while let Some(arg) = it.next() {
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(Error::Parse(format!("expected --section.key, found '{arg}'")));
            };
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Parse(format!("missing value for --{flag}")))?;
                    (flag.to_string(), v.to_string())
                }
            };
            self.set(&key, value)?;
        }
        Ok(())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("key '{key}': cannot parse '{v}'")))
            })
            .transpose()
    }

    fn num_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn num_required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.num(key)?.expect("checked above"))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|_| Error::Parse(format!("key '{key}': cannot parse '{s}'")))
                    })
                    .collect()
            })
            .transpose()
    }
}

fn unknown_key(key: &str) -> Error {
    Error::Config(format!("unknown configuration key '{key}'"))
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut KeyValues) -> Result<()> {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            Ok(())
        }
        toml::Value::Array(items) => {
            let parts: Result<Vec<String>> = items.iter().map(scalar_string).collect();
            out.set(prefix, parts?.join(","))
        }
        other => out.set(prefix, scalar_string(other)?),
    }
}

fn scalar_string(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => return Err(Error::Parse(format!("unsupported value {other}"))),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    Ar1 { a: f64 },
    SpeedScaling { epsilon: f64, branch: BranchPoint },
    SpeedScalingLattice { epsilon: f64, p: f64, delta: f64, branch: BranchPoint },
    Ou { beta: f64, dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    Lstd,
    GradLstd,
    TdK,
    RegenLstd,
    NonlinearTd,
    CtGradLstd,
}

impl AlgorithmKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "lstd" => Self::Lstd,
            "grad_lstd" => Self::GradLstd,
            "tdk" => Self::TdK,
            "regen_lstd" => Self::RegenLstd,
            "nonlinear_dtd" => Self::NonlinearTd,
            "ct_grad_lstd" => Self::CtGradLstd,
            other => {
                return Err(Error::Config(format!(
                    "unknown algorithm.name '{other}' (expected lstd, grad_lstd, tdk, regen_lstd, \
                     nonlinear_dtd or ct_grad_lstd)"
                )))
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lstd => "lstd",
            Self::GradLstd => "grad_lstd",
            Self::TdK => "tdk",
            Self::RegenLstd => "regen_lstd",
            Self::NonlinearTd => "nonlinear_dtd",
            Self::CtGradLstd => "ct_grad_lstd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub alpha: f64,
    pub lambda: f64,
    /// Discount rate of the continuous-time estimator.
    pub gamma: f64,
    pub schedule: StepSize,
    pub gain_offset: u64,
    pub refresh: u64,
    pub warmup: Option<u64>,
    pub cond_max: f64,
    pub family: Option<String>,
    pub theta0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Steps per replica after burn-in.
    pub horizon: u64,
    pub replicas: u64,
    pub seed: u64,
    pub burn_in: u64,
    pub x0: f64,
    /// Additional reporting times, each `≤ horizon`. The horizon is always reported.
    pub checkpoints: Vec<u64>,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub basis: Option<String>,
    pub algorithm: AlgorithmConfig,
    pub run: RunConfig,
    pub output_dir: Option<PathBuf>,
    /// The key/value pairs this config was built from.
    pub raw: KeyValues,
}

impl ModelConfig {
    /// Reads the `model.*` keys only.
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        let branch = match kv.get("model.branch").unwrap_or("corrected") {
            "corrected" => BranchPoint::Corrected,
            "literal" => BranchPoint::Literal,
            other => {
                return Err(Error::Config(format!(
                    "model.branch '{other}' (expected corrected or literal)"
                )))
            }
        };
        Ok(match kv.require("model.name")? {
            "ar1" => ModelConfig::Ar1 { a: kv.num_required("model.a")? },
            "speedscale" => ModelConfig::SpeedScaling {
                epsilon: kv.num_required("model.epsilon")?,
                branch,
            },
            "speedscale_lattice" => ModelConfig::SpeedScalingLattice {
                epsilon: kv.num_required("model.epsilon")?,
                p: kv.num_or("model.p_a", 0.04)?,
                delta: kv.num_or("model.delta_a", 1.0 / 24.0)?,
                branch,
            },
            "ou" => ModelConfig::Ou {
                beta: kv.num_required("model.beta")?,
                dt: kv.num_or("model.dt", 1e-3)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown model.name '{other}' (expected ar1, speedscale, speedscale_lattice or ou)"
                )))
            }
        })
    }

    /// `gamma` is the discount rate, used by the OU model only.
    pub fn build(&self, gamma: f64) -> Result<Box<dyn Model>> {
        Ok(match *self {
            ModelConfig::Ar1 { a } => Box::new(Ar1::new(a)?),
            ModelConfig::SpeedScaling { epsilon, branch } => {
                Box::new(SpeedScaling::new(epsilon, Arrivals::Exponential, branch)?)
            }
            ModelConfig::SpeedScalingLattice { epsilon, p, delta, branch } => {
                Box::new(SpeedScaling::new(epsilon, Arrivals::Lattice { p, delta }, branch)?)
            }
            ModelConfig::Ou { beta, dt } => Box::new(Ou::new(beta, gamma, dt)?),
        })
    }
}

impl ExperimentConfig {
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        for k in kv.0.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(unknown_key(k));
            }
        }
        let model = ModelConfig::from_keys(kv)?;
        let kind = AlgorithmKind::parse(kv.require("algorithm.name")?)?;
        let schedule = match kv.num::<f64>("algorithm.step_exponent")? {
            None => StepSize::Harmonic,
            Some(r) if r == 1.0 => StepSize::Harmonic,
            Some(r) => StepSize::Power(r),
        };
        schedule.validate()?;
        let algorithm = AlgorithmConfig {
            kind,
            alpha: kv.num_or("algorithm.alpha", if kind == AlgorithmKind::RegenLstd { 1.0 } else { 0.9 })?,
            lambda: kv.num_or("algorithm.lambda", 0.0)?,
            gamma: kv.num_or("algorithm.gamma", 1.0)?,
            schedule,
            gain_offset: kv.num_or("algorithm.gain_offset", 0)?,
            refresh: kv.num_or("algorithm.refresh", 1)?,
            warmup: kv.num("algorithm.warmup")?,
            cond_max: kv.num_or("algorithm.cond_max", 1e8)?,
            family: kv.get("algorithm.family").map(str::to_string),
            theta0: kv.list("algorithm.theta0")?,
        };
        let run = RunConfig {
            horizon: kv.num_required("run.T")?,
            replicas: kv.num_or("run.replicas", 1)?,
            seed: kv.num_or("run.seed", 0)?,
            burn_in: kv.num_or("run.burn_in", 1000)?,
            x0: kv.num_or("run.x0", 0.0)?,
            checkpoints: kv.list("run.checkpoints")?.unwrap_or_default(),
            parallel: kv.num_or("run.parallel", true)?,
        };
        if run.horizon < 1 {
            return Err(Error::Config("run.T must be at least 1".into()));
        }
        if run.replicas < 1 {
            return Err(Error::Config("run.replicas must be at least 1".into()));
        }
        if let Some(&c) = run.checkpoints.iter().find(|&&c| c == 0 || c > run.horizon) {
            return Err(Error::Config(format!("checkpoint {c} outside 1..={}", run.horizon)));
        }
        let cfg = Self {
            model,
            basis: kv.get("basis").map(str::to_string),
            algorithm,
            run,
            output_dir: kv.get("output.dir").map(PathBuf::from),
            raw: kv.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves every name and builds one estimator as a dry run.
    fn validate(&self) -> Result<()> {
        let is_ou = matches!(self.model, ModelConfig::Ou { .. });
        let is_ct = self.algorithm.kind == AlgorithmKind::CtGradLstd;
        if is_ou != is_ct {
            return Err(Error::Config(
                "algorithm ct_grad_lstd runs on model ou, and model ou only with ct_grad_lstd".into(),
            ));
        }
        let model = self.build_model()?;
        if is_ct {
            self.build_ct()?;
        } else {
            self.build_estimator(model.as_ref())?;
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn Model>> {
        self.model.build(self.algorithm.gamma)
    }

    pub fn build_basis(&self) -> Result<Arc<dyn Basis>> {
        let name = self
            .basis
            .as_deref()
            .ok_or_else(|| Error::Config("missing required key 'basis'".into()))?;
        basis_by_name(name)
    }

    /// Length of the fitted θ.
    pub fn param_len(&self, model: &dyn Model) -> Result<usize> {
        match self.algorithm.kind {
            AlgorithmKind::NonlinearTd => Ok(self.build_estimator(model)?.fit()?.estimate.theta.len()),
            _ => Ok(self.build_basis()?.len()),
        }
    }

    fn build_family(&self) -> Result<Arc<dyn NonlinearFamily>> {
        match self.algorithm.family.as_deref().unwrap_or("linear") {
            "linear" => Ok(Arc::new(LinearFamily::new(self.build_basis()?))),
            "softquad" => Ok(Arc::new(SoftQuadraticFamily)),
            other => Err(Error::Config(format!(
                "unknown algorithm.family '{other}' (expected linear or softquad)"
            ))),
        }
    }

    /// Estimator for the discrete-time algorithms.
    pub fn build_estimator(&self, model: &dyn Model) -> Result<Box<dyn Estimator>> {
        let a = &self.algorithm;
        Ok(match a.kind {
            AlgorithmKind::Lstd => Box::new(Lstd::new(self.build_basis()?, a.alpha, a.schedule)?),
            AlgorithmKind::GradLstd => Box::new(
                GradLstd::new(self.build_basis()?, a.alpha, a.schedule)?.with_refresh(a.refresh),
            ),
            AlgorithmKind::TdK => Box::new(TdK::new(
                self.build_basis()?,
                TdKConfig { lambda: a.lambda, cond_max: a.cond_max, warmup: a.warmup },
                a.schedule,
            )?),
            AlgorithmKind::RegenLstd => Box::new(RegenLstd::new(self.build_basis()?, model, a.schedule)?),
            AlgorithmKind::NonlinearTd => {
                let family = self.build_family()?;
                let theta0 = match &a.theta0 {
                    Some(v) => Vector::from_vec(v.clone()),
                    None => Vector::zeros(family.param_len()),
                };
                Box::new(NonlinearTd::new(family, theta0, a.alpha, a.schedule)?.with_gain_offset(a.gain_offset))
            }
            AlgorithmKind::CtGradLstd => {
                return Err(Error::Config("ct_grad_lstd is built with build_ct".into()))
            }
        })
    }

    pub fn build_ct(&self) -> Result<CtGradLstd> {
        match self.model {
            ModelConfig::Ou { beta, dt } => CtGradLstd::new(Ou::new(beta, self.algorithm.gamma, dt)?, self.build_basis()?),
            _ => Err(Error::Config("ct_grad_lstd needs model.name = ou".into())),
        }
    }

    /// Reporting times in increasing order, always ending at the horizon.
    pub fn report_times(&self) -> Vec<u64> {
        let mut t = self.run.checkpoints.clone();
        t.push(self.run.horizon);
        t.sort_unstable();
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AR1: &str = r#"
basis = "quadratic_noconst"
[model]
name = "ar1"
a = 0.7
[algorithm]
name = "grad_lstd"
alpha = 0.9
[run]
T = 1000
replicas = 4
checkpoints = [10, 100]
"#;

    #[test]
    fn toml_is_flattened() {
        let kv = KeyValues::from_toml_str(AR1).unwrap();
        assert_eq!(kv.get("model.a"), Some("0.7"));
        assert_eq!(kv.get("run.checkpoints"), Some("10,100"));
        let cfg = ExperimentConfig::from_keys(&kv).unwrap();
        assert_eq!(cfg.model, ModelConfig::Ar1 { a: 0.7 });
        assert_eq!(cfg.report_times(), vec![10, 100, 1000]);
        assert_eq!(cfg.run.burn_in, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = KeyValues::from_toml_str("[model]\nnmae = \"ar1\"").unwrap_err();
        assert!(err.to_string().contains("model.nmae"));
        let mut kv = KeyValues::from_toml_str(AR1).unwrap();
        assert!(kv.apply_overrides(&["--run.TT", "5"]).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut kv = KeyValues::from_toml_str(AR1).unwrap();
        kv.apply_overrides(&["--algorithm.alpha", "0.99", "--run.T=500"]).unwrap();
        let cfg = ExperimentConfig::from_keys(&kv).unwrap();
        assert_eq!(cfg.algorithm.alpha, 0.99);
        assert_eq!(cfg.run.horizon, 500);
    }

    #[test]
    fn missing_model_name_is_named() {
        let kv = KeyValues::from_toml_str("basis = \"quadratic\"\n[run]\nT = 5").unwrap();
        let err = ExperimentConfig::from_keys(&kv).unwrap_err();
        assert!(err.to_string().contains("model.name"));
    }

    #[test]
    fn invalid_combinations_fail_early() {
        let mut kv = KeyValues::from_toml_str(AR1).unwrap();
        kv.set("basis", "quadratic").unwrap();
        // constant feature with ∇-LSTD
        assert!(ExperimentConfig::from_keys(&kv).is_err());
        kv.set("algorithm.name", "regen_lstd").unwrap();
        // AR(1) has no regeneration state
        assert!(ExperimentConfig::from_keys(&kv).is_err());
        kv.set("algorithm.name", "ct_grad_lstd").unwrap();
        assert!(ExperimentConfig::from_keys(&kv).is_err());
        kv.set("run.checkpoints", "2000").unwrap();
        kv.set("algorithm.name", "lstd").unwrap();
        assert!(ExperimentConfig::from_keys(&kv).is_err());
    }
}

//! Run configuration: TOML with one section per module.
//!
//! Every field has a default, unknown keys are rejected, and `--set
//! section.key=value` overrides are applied to the parsed table before it is
//! deserialized, so a typo in an override is caught the same way as a typo in
//! the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::booster::{BoostSettings, CoverSettings};
use crate::distributions::{LabeledSource, SourceSpec};
use crate::error::{Error, Result};
use crate::learner::{ParamOverrides, RegionSettings, WalkSettings};

/// Environment variable overriding `run.output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "INTERSECT_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gen,
    LearnBoost,
    LearnCover,
    SampleDiag,
    PaperCheck,
    Eval,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Gen => "gen",
            ExperimentKind::LearnBoost => "learn-boost",
            ExperimentKind::LearnCover => "learn-cover",
            ExperimentKind::SampleDiag => "sample-diag",
            ExperimentKind::PaperCheck => "paper-check",
            ExperimentKind::Eval => "eval",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Not echoed into artifacts, so identical runs into different
    /// directories produce identical files.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { kind: ExperimentKind::LearnCover, seed: 1, output_dir: PathBuf::from("out") }
    }
}

/// Weak learner and region learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSection {
    pub epsilon: f64,
    pub gamma: f64,
    /// Margin used by the parameter formulas; unset means "take it from the source".
    pub rho: Option<f64>,
    /// Number of target halfspaces assumed; unset means "take it from the source".
    pub k: Option<usize>,
    pub attempt_budget: usize,
    pub m_check: Option<usize>,
    /// Desk-scale overrides of the sample sizes. Unset keeps the formula,
    /// which for `M₊` is far beyond anything that runs.
    pub m_minus: Option<usize>,
    pub m_plus: Option<usize>,
    pub steps_per_sample: Option<usize>,
    pub slack_target: Option<f64>,
}

impl Default for LearnerSection {
    fn default() -> Self {
        LearnerSection {
            epsilon: 0.05,
            gamma: 0.05,
            rho: None,
            k: None,
            attempt_budget: 300,
            m_check: None,
            m_minus: Some(8),
            m_plus: Some(2000),
            steps_per_sample: None,
            slack_target: None,
        }
    }
}

impl LearnerSection {
    pub fn overrides(&self) -> ParamOverrides {
        ParamOverrides { m_minus: self.m_minus, m_plus: self.m_plus }
    }

    pub fn walk(&self) -> WalkSettings {
        WalkSettings { steps_per_sample: self.steps_per_sample, slack_target: self.slack_target }
    }

    pub fn region_settings(&self) -> RegionSettings {
        RegionSettings {
            epsilon: self.epsilon,
            gamma: self.gamma,
            attempt_budget: self.attempt_budget,
            m_check: self.m_check,
            walk: self.walk(),
        }
    }

    pub fn cover_settings(&self) -> CoverSettings {
        CoverSettings { epsilon: self.epsilon, gamma: self.gamma, m_check: self.region_settings().m_check() }
    }

    /// Margin for the formulas: explicit value, else the source's own.
    pub fn resolve_rho(&self, src: &LabeledSource) -> Result<f64> {
        if let Some(r) = self.rho {
            return Ok(r);
        }
        match src.spec() {
            SourceSpec::Sphere { rho, .. } => Ok(*rho),
            SourceSpec::Cube { .. } => Ok(src.cube_margin_bound().unwrap_or(0.01)),
            SourceSpec::Pancake { .. } => Err(Error::Config(
                "learner.rho must be set for a pancake source (it has no hard margin)".into(),
            )),
        }
    }

    pub fn resolve_k(&self, src: &LabeledSource) -> usize {
        self.k.unwrap_or_else(|| match src.spec() {
            SourceSpec::Sphere { k, .. } | SourceSpec::Cube { k, .. } => *k,
            SourceSpec::Pancake { .. } => 1,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    /// Independent runs; the one with the lowest validation error is kept.
    pub repetitions: usize,
    pub validation_size: usize,
}

impl Default for CoverSection {
    fn default() -> Self {
        CoverSection { repetitions: 1, validation_size: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostSection {
    pub epsilon: f64,
    pub rounds_budget: usize,
    pub attempts_per_round: usize,
    pub pool_size: usize,
    pub multiset_size: usize,
    pub holdout_size: usize,
    /// Region-learner settings used inside each boosting round.
    pub region_epsilon: f64,
    pub region_gamma: f64,
    pub region_attempt_budget: usize,
}

impl Default for BoostSection {
    fn default() -> Self {
        BoostSection {
            epsilon: 0.05,
            rounds_budget: 200,
            attempts_per_round: 3,
            pool_size: 4000,
            multiset_size: 4000,
            holdout_size: 10_000,
            region_epsilon: 0.1,
            region_gamma: 0.05,
            region_attempt_budget: 20,
        }
    }
}

impl BoostSection {
    pub fn settings(&self) -> BoostSettings {
        BoostSettings {
            epsilon: self.epsilon,
            rounds_budget: self.rounds_budget,
            attempts_per_round: self.attempts_per_round,
            pool_size: self.pool_size,
            multiset_size: self.multiset_size,
            holdout_size: self.holdout_size,
        }
    }

    pub fn region_settings(&self, learner: &LearnerSection) -> RegionSettings {
        RegionSettings {
            epsilon: self.region_epsilon,
            gamma: self.region_gamma,
            attempt_budget: self.region_attempt_budget,
            m_check: learner.m_check,
            walk: learner.walk(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub samples: usize,
}

impl Default for GenSection {
    fn default() -> Self {
        GenSection { samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagSection {
    /// Walk samples emitted.
    pub samples: usize,
}

impl Default for DiagSection {
    fn default() -> Self {
        DiagSection { samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Fresh held-out draws for learn-* and for eval without `data`.
    pub holdout: usize,
    /// Hypothesis record to evaluate (eval only).
    pub hypothesis: Option<PathBuf>,
    /// Labeled CSV to evaluate on; unset means fresh draws from the source.
    pub data: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { holdout: 10_000, hypothesis: None, data: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub source: SourceSpec,
    pub learner: LearnerSection,
    pub cover: CoverSection,
    pub boost: BoostSection,
    pub gen: GenSection,
    pub diag: DiagSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run: RunSection::default(),
            source: SourceSpec::sphere(3, 2, 0.2, 0.3),
            learner: LearnerSection::default(),
            cover: CoverSection::default(),
            boost: BoostSection::default(),
            gen: GenSection::default(),
            diag: DiagSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text`, applies `section.key=value` overrides, then validates.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if !table.contains_key("source") && overrides.iter().any(|o| o.trim_start().starts_with("source.")) {
            // overriding one source field keeps the default source's other fields
            let default = toml::Value::try_from(RunConfig::default().source).expect("source serializes");
            table.insert("source".into(), default);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.source.validate().map_err(cfg_err)?;
        let l = &self.learner;
        if !(l.epsilon > 0.0 && l.epsilon < 0.5) {
            return Err(Error::Config(format!("learner.epsilon must lie in (0, 1/2), got {}", l.epsilon)));
        }
        if !(l.gamma > 0.0 && l.gamma <= 1.0) {
            return Err(Error::Config(format!("learner.gamma must lie in (0, 1], got {}", l.gamma)));
        }
        if let Some(r) = l.rho {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("learner.rho must lie in (0, 1), got {r}")));
            }
        }
        if l.k == Some(0) || l.attempt_budget == 0 || l.m_minus == Some(0) || l.m_plus == Some(0) {
            return Err(Error::Config("learner.k, attempt_budget, m_minus and m_plus must be positive".into()));
        }
        if l.steps_per_sample == Some(0) {
            return Err(Error::Config("learner.steps_per_sample must be at least 1".into()));
        }
        if let Some(t) = l.slack_target {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("learner.slack_target must lie in (0, 1), got {t}")));
            }
        }
        if let Some(m) = l.m_check {
            let need = crate::learner::min_check_samples(l.epsilon, l.gamma);
            if m < need {
                return Err(Error::Config(format!("learner.m_check = {m} is below the required {need}")));
            }
        }
        if self.cover.repetitions == 0 || self.cover.validation_size == 0 {
            return Err(Error::Config("cover.repetitions and cover.validation_size must be positive".into()));
        }
        let b = &self.boost;
        if !(b.epsilon > 0.0 && b.epsilon < 1.0)
            || !(b.region_epsilon > 0.0 && b.region_epsilon < 1.0)
            || !(b.region_gamma > 0.0 && b.region_gamma <= 1.0)
        {
            return Err(Error::Config("boost epsilons must lie in (0, 1) and region_gamma in (0, 1]".into()));
        }
        if b.rounds_budget == 0
            || b.attempts_per_round == 0
            || b.pool_size == 0
            || b.multiset_size == 0
            || b.holdout_size == 0
            || b.region_attempt_budget == 0
        {
            return Err(Error::Config("boost budgets and sample sizes must be positive".into()));
        }
        if self.gen.samples == 0 || self.diag.samples == 0 || self.eval.holdout == 0 {
            return Err(Error::Config("gen.samples, diag.samples and eval.holdout must be positive".into()));
        }
        Ok(())
    }
}

/// Applies one `section.key=value` override. The value is read as a TOML
/// literal when it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form section.key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.len() != 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key {path:?} must be section.key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let section = table
        .entry(keys[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(section) = section else {
        return Err(Error::Config(format!("{} is not a section", keys[0])));
    };
    section.insert(keys[1].to_string(), value);
    Ok(())
}

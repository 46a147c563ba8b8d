//! Pipeline configuration file (TOML).
//!
//! Every numeric knob lives here so experiments never need a rebuild.
//! Precedence is command-line overrides, then the file, then built-in
//! defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal::{CausalityTable, DEFAULT_THETA, DEFAULT_UNLISTED_WEIGHT, DEFAULT_WEIGHTS};
use crate::enhancer::EnhancerConfig;
use crate::llm::{ModelAssignment, DEFAULT_MAX_IN_FLIGHT};
use crate::prompt::{
    PromptTemplate, DEFAULT_COT_TEMPLATE, DEFAULT_ENHANCE_TEMPLATE, DEFAULT_INFER_TEMPLATE,
};
use crate::retrieval::RetrievalConfig;
use crate::scalar::{convert, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub theta: f64,
    pub causality: CausalitySection,
    pub retrieval: RetrievalConfig,
    pub enhancer: EnhancerSection,
    pub models: ModelAssignment,
    pub prompts: PromptPaths,
    /// Optional `cui<TAB>alias` file merged into the linker index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alias_file: Option<PathBuf>,
    pub worker_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalitySection {
    pub default_weight: f64,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhancerSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub keep_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cot: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhance: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infer: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            causality: CausalitySection::default(),
            retrieval: RetrievalConfig::default(),
            enhancer: EnhancerSection::default(),
            models: ModelAssignment::default(),
            prompts: PromptPaths::default(),
            alias_file: None,
            worker_limit: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl Default for CausalitySection {
    fn default() -> Self {
        Self {
            default_weight: DEFAULT_UNLISTED_WEIGHT,
            weights: DEFAULT_WEIGHTS
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

impl Default for EnhancerSection {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.3,
            gamma: 0.3,
            keep_ratio: 0.4,
        }
    }
}

/// Values supplied on the command line; `None` leaves the file value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub theta: Option<f64>,
    pub k: Option<usize>,
    pub max_hops: Option<usize>,
    pub keep_ratio: Option<f64>,
    pub cot_model: Option<String>,
    pub enhance_model: Option<String>,
    pub infer_model: Option<String>,
}

/// Prompt templates resolved from files or defaults.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub cot: PromptTemplate,
    pub enhance: PromptTemplate,
    pub infer: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            cot: PromptTemplate::new(DEFAULT_COT_TEMPLATE),
            enhance: PromptTemplate::new(DEFAULT_ENHANCE_TEMPLATE),
            infer: PromptTemplate::new(DEFAULT_INFER_TEMPLATE),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| Error::validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config file. Relative template and alias paths
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            let fix = |p: &mut Option<PathBuf>| {
                if let Some(inner) = p.as_mut() {
                    if inner.is_relative() {
                        *inner = dir.join(&*inner);
                    }
                }
            };
            fix(&mut cfg.prompts.cot);
            fix(&mut cfg.prompts.enhance);
            fix(&mut cfg.prompts.infer);
            fix(&mut cfg.alias_file);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &ConfigOverrides) -> Result<()> {
        if let Some(t) = o.theta {
            self.theta = t;
        }
        if let Some(k) = o.k {
            self.retrieval.k = k;
        }
        if let Some(h) = o.max_hops {
            self.retrieval.max_hops = h;
        }
        if let Some(r) = o.keep_ratio {
            self.enhancer.keep_ratio = r;
        }
        if let Some(m) = &o.cot_model {
            self.models.cot_model = m.clone();
        }
        if let Some(m) = &o.enhance_model {
            self.models.enhance_model = m.clone();
        }
        if let Some(m) = &o.infer_model {
            self.models.infer_model = m.clone();
        }
        self.validate()
    }

    /// Runs every component validation.
    pub fn validate(&self) -> Result<()> {
        self.table::<f64>()?;
        self.theta_as::<f64>()?;
        self.retrieval.validate()?;
        self.enhancer_config::<f64>()?;
        self.models.validate()?;
        if self.worker_limit == 0 {
            return Err(Error::validation("worker_limit must be at least 1"));
        }
        Ok(())
    }

    pub fn table<S: Scalar>(&self) -> Result<CausalityTable<S>> {
        CausalityTable::from_f64(
            self.causality.weights.iter().map(|(k, v)| (k.as_str(), *v)),
            self.causality.default_weight,
        )
    }

    pub fn theta_as<S: Scalar>(&self) -> Result<S> {
        let t: S = convert(self.theta, "theta")?;
        if !t.in_unit_interval() {
            return Err(Error::validation(format!(
                "theta {} outside [0,1]",
                self.theta
            )));
        }
        Ok(t)
    }

    pub fn enhancer_config<S: Scalar>(&self) -> Result<EnhancerConfig<S>> {
        let e = &self.enhancer;
        EnhancerConfig::from_f64(e.alpha, e.beta, e.gamma, e.keep_ratio)
    }

    pub fn templates(&self) -> Result<Templates> {
        let load =
            |p: &Option<PathBuf>, default: &str, required: &[&str]| -> Result<PromptTemplate> {
                let t = match p {
                    Some(path) => PromptTemplate::load(path)?,
                    None => PromptTemplate::new(default),
                };
                t.require(required)?;
                Ok(t)
            };
        Ok(Templates {
            cot: load(
                &self.prompts.cot,
                DEFAULT_COT_TEMPLATE,
                &["question", "options"],
            )?,
            enhance: load(
                &self.prompts.enhance,
                DEFAULT_ENHANCE_TEMPLATE,
                &["question", "options", "cot", "paths"],
            )?,
            infer: load(
                &self.prompts.infer,
                DEFAULT_INFER_TEMPLATE,
                &["question", "options"],
            )?,
        })
    }
}

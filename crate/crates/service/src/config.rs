//! Settings file (TOML) with command-line overrides on top.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! mappings = "data/mappings.jsonl"
//!
//! [mining]
//! min_support = 5
//! min_confidence = 0.3
//!
//! [recommend]
//! max_results = 10
//!
//! [evaluation]
//! train_fraction = 0.85
//! seed = 42
//! eval_fields = ["sex", "tissue", "disease"]
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Deserialize;
use valrec_core::eval::{EvalFields, SplitSpec};
use valrec_core::mining::MiningParams;
use valrec_core::recommend::RecommendOptions;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSection {
    pub min_support: Option<u64>,
    pub min_confidence: Option<f64>,
    pub max_antecedent_size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommendSection {
    pub score_cutoff: Option<f64>,
    pub max_results: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub train_fraction: Option<f64>,
    pub seed: Option<u64>,
    /// Field labels; the standard sample fields when absent, `["*"]` for all.
    pub eval_fields: Option<Vec<String>>,
    pub max_context_size: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub bind: Option<String>,
    pub mappings: Option<PathBuf>,
    pub mining: MiningSection,
    pub recommend: RecommendSection,
    pub evaluation: EvaluationSection,
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut settings: Settings = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths in the file are relative to the file.
        if let (Some(m), Some(dir)) = (&settings.mappings, path.parent()) {
            if m.is_relative() {
                settings.mappings = Some(dir.join(m));
            }
        }
        Ok(settings)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Settings::default()), Settings::load)
    }

    pub fn mining_params(&self) -> MiningParams {
        let d = MiningParams::default();
        MiningParams {
            min_support: self.mining.min_support.unwrap_or(d.min_support),
            min_confidence: self.mining.min_confidence.unwrap_or(d.min_confidence),
            max_antecedent_size: self.mining.max_antecedent_size.or(d.max_antecedent_size),
        }
    }

    pub fn recommend_options(&self) -> RecommendOptions {
        RecommendOptions { score_cutoff: self.recommend.score_cutoff, max_results: self.recommend.max_results }
    }

    pub fn split(&self) -> SplitSpec {
        let d = SplitSpec::default();
        SplitSpec {
            train_fraction: self.evaluation.train_fraction.unwrap_or(d.train_fraction),
            seed: self.evaluation.seed.unwrap_or(d.seed),
        }
    }

    pub fn eval_fields(&self) -> EvalFields {
        match &self.evaluation.eval_fields {
            None => EvalFields::Standard,
            Some(labels) if labels.iter().any(|l| l == "*") => EvalFields::All,
            Some(labels) => EvalFields::labels(labels),
        }
    }

    pub fn bind(&self) -> &str {
        self.bind.as_deref().unwrap_or(DEFAULT_BIND)
    }
}

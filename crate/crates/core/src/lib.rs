//! Context-sensitive value recommendations for metadata templates.
//!
//! Association rules are mined per template from existing field-value
//! records, stored in an index keyed by the consequent field, and matched
//! against the values a user has already entered. Fields and values from
//! structurally different templates are aligned through equivalence classes
//! of ontology term URIs.
//!
//! ```
//! use valrec_core::prelude::*;
//!
//! let m = MappingRepository::default();
//! let pair = |f: &str, v: &str| FieldValuePair::text(f, v).unwrap();
//! let mut repo = InstanceRepository::default();
//! for _ in 0..3 {
//!     repo.push(TemplateInstance::new("Experiment", vec![
//!         pair("disease", "meningitis"),
//!         pair("tissue", "brain"),
//!     ]).unwrap());
//! }
//! let params = MiningParams { min_support: 1, min_confidence: 0.5, ..Default::default() };
//! let rules = mine_rules(&repo, "Experiment", &params, &m).unwrap();
//! let index = RuleIndex::build(rules, m).with_train_counts(repo.template_counts());
//!
//! let context = Context::new(vec![pair("disease", "meningitis")]).unwrap();
//! let target = FieldSlot::text("tissue").unwrap();
//! let recs = recommend(&context, &target, &index, &RecommendOptions::default()).unwrap();
//! assert_eq!(recs[0].value.label(), "brain");
//! assert_eq!(recs[0].score, 1.0);
//! ```

pub mod error;
pub mod eval;
pub mod index;
pub mod io;
pub mod mapping;
pub mod mining;
pub mod model;
pub mod recommend;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::index::{context_matching_score, RuleIndex};
    pub use crate::mapping::{field_key, value_key, KeyKind, MappingRepository, MatchKey, PairKey};
    pub use crate::mining::{mine_rules, AssociationRule, MiningParams};
    pub use crate::model::{
        normalize_label, Context, FieldSlot, FieldValuePair, InstanceRepository, TemplateInstance, TermRef, ValueAtom,
    };
    pub use crate::recommend::{recommend, RecommendOptions, Recommendation};
}

//! Ranked value suggestions for a target field.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{context_matching_score, RuleIndex};
use crate::mapping::{field_key, MappingRepository, MatchKey};
use crate::mining::AssociationRule;
use crate::model::{normalize_label, Context, FieldSlot, ValueAtom};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecommendOptions {
    /// Values scoring below this are dropped.
    #[serde(default)]
    pub score_cutoff: Option<f64>,
    #[serde(default)]
    pub max_results: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub value: ValueAtom,
    pub score: f64,
    /// Support of the rule that produced the score.
    pub support: u64,
    pub rank: usize,
}

impl Recommendation {
    /// Score as a whole percentage, rounded to nearest.
    pub fn percent(&self) -> u32 {
        percent(self.score)
    }
}

pub fn percent(score: f64) -> u32 {
    (score * 100.0).round() as u32
}

pub fn recommendation_score(rule: &AssociationRule, c: &Context, m: &MappingRepository) -> f64 {
    context_matching_score(rule, c, m) * rule.confidence
}

/// Rule support relative to the training size of the rule's template.
pub fn no_context_score(rule: &AssociationRule, train_count: u64) -> Result<f64> {
    if train_count < rule.support || train_count == 0 {
        return Err(Error::InvalidCount { support: rule.support, train_count });
    }
    Ok(rule.support as f64 / train_count as f64)
}

struct Candidate<'a> {
    score: f64,
    support: u64,
    rule_id: usize,
    value: &'a ValueAtom,
    sort_label: String,
    key: &'a MatchKey,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.score
        .total_cmp(&b.score)
        .then(a.support.cmp(&b.support))
        .then_with(|| b.sort_label.cmp(&a.sort_label))
        .then(b.rule_id.cmp(&a.rule_id))
        == Ordering::Greater
}

/// Selects the rules concluding `target`, scores them against `c`, keeps the
/// best-scoring rule per value, drops zero scores and ranks by score, then
/// support, then normalized label.
///
/// With an empty context each rule scores its support over the training
/// size of its template.
pub fn recommend(
    c: &Context,
    target: &FieldSlot,
    idx: &RuleIndex,
    opts: &RecommendOptions,
) -> Result<Vec<Recommendation>> {
    let m = idx.mappings();
    let target_key = field_key(target, m);
    if c.pairs().iter().any(|p| field_key(&p.field, m) == target_key) {
        return Err(Error::TargetInContext(target.label().to_string()));
    }

    let probe = idx.probe(c);
    let mut best: HashMap<&MatchKey, Candidate> = HashMap::new();
    for &id in idx.select_ids(target) {
        let rule = idx.rule(id);
        let score = if probe.is_empty() {
            let count =
                idx.train_count(&rule.template_id).ok_or_else(|| Error::MissingTrainCount(rule.template_id.clone()))?;
            no_context_score(rule, count)?
        } else {
            idx.matching_score(id, &probe) * rule.confidence
        };
        if score <= 0.0 {
            continue;
        }
        let key = &idx.consequent_key(id).value;
        let cand = Candidate {
            score,
            support: rule.support,
            rule_id: id,
            value: &rule.consequent.value,
            sort_label: normalize_label(rule.consequent.value.label()),
            key,
        };
        match best.get(key) {
            Some(existing) if !better(&cand, existing) => {}
            _ => {
                best.insert(key, cand);
            }
        }
    }

    let mut ranked: Vec<Candidate> = best.into_values().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.support.cmp(&a.support))
            .then_with(|| a.sort_label.cmp(&b.sort_label))
            .then_with(|| a.key.cmp(b.key))
    });
    if let Some(cutoff) = opts.score_cutoff {
        ranked.retain(|c| c.score >= cutoff);
    }
    if let Some(max) = opts.max_results {
        ranked.truncate(max);
    }
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(i, c)| Recommendation { value: c.value.clone(), score: c.score, support: c.support, rank: i + 1 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldValuePair;
    use std::collections::BTreeMap;

    fn p(f: &str, v: &str) -> FieldValuePair {
        FieldValuePair::text(f, v).unwrap()
    }

    fn rule(antecedent: &[(&str, &str)], consequent: (&str, &str), support: u64, confidence: f64) -> AssociationRule {
        AssociationRule {
            antecedent: antecedent.iter().map(|(f, v)| p(f, v)).collect(),
            consequent: p(consequent.0, consequent.1),
            support,
            confidence,
            template_id: "Experiment".into(),
        }
    }

    /// The rules of Table 2 that conclude `tissue` (r1, r3, r4, r6, r8, r9, r11, r14).
    fn tissue_rules() -> Vec<AssociationRule> {
        vec![
            rule(&[("disease", "meningitis")], ("tissue", "brain"), 3, 1.0),
            rule(&[("disease", "liver cancer")], ("tissue", "liver"), 2, 1.0),
            rule(&[("sex", "male"), ("disease", "meningitis")], ("tissue", "brain"), 2, 1.0),
            rule(&[("sex", "female")], ("tissue", "brain"), 1, 1.0),
            rule(&[("disease", "cirrhosis")], ("tissue", "liver"), 1, 1.0),
            rule(&[("sex", "male"), ("disease", "liver cancer")], ("tissue", "liver"), 1, 1.0),
            rule(&[("sex", "female"), ("disease", "meningitis")], ("tissue", "brain"), 1, 1.0),
            rule(&[("sex", "male")], ("tissue", "brain"), 2, 2.0 / 3.0),
        ]
    }

    fn index() -> RuleIndex {
        RuleIndex::build(tissue_rules(), MappingRepository::default())
            .with_train_counts(BTreeMap::from([("Experiment".to_string(), 6)]))
    }

    fn tissue() -> FieldSlot {
        FieldSlot::text("tissue").unwrap()
    }

    #[test]
    fn scores_of_table4() {
        let m = MappingRepository::default();
        let c = Context::new(vec![p("disease", "meningitis")]).unwrap();
        let rules = tissue_rules();
        assert_eq!(recommendation_score(&rules[0], &c, &m), 1.0);
        assert_eq!(recommendation_score(&rules[2], &c, &m), 0.5);
        assert_eq!(recommendation_score(&rules[7], &c, &m), 0.0);
    }

    #[test]
    fn meningitis_context_yields_only_brain() {
        let c = Context::new(vec![p("disease", "meningitis")]).unwrap();
        let recs = recommend(&c, &tissue(), &index(), &RecommendOptions::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].value.label(), "brain");
        assert_eq!(recs[0].score, 1.0);
        assert_eq!(recs[0].support, 3);
        assert_eq!(recs[0].rank, 1);
        assert_eq!(recs[0].percent(), 100);
    }

    #[test]
    fn empty_context_uses_relative_support() {
        let recs = recommend(&Context::empty(), &tissue(), &index(), &RecommendOptions::default()).unwrap();
        let labels: Vec<_> = recs.iter().map(|r| r.value.label()).collect();
        assert_eq!(labels, ["brain", "liver"]);
        assert_eq!(recs[0].score, 0.5);
        assert_eq!(recs[1].score, 2.0 / 6.0);
    }

    #[test]
    fn no_context_score_bounds() {
        let r = &tissue_rules()[0];
        assert_eq!(no_context_score(r, 6).unwrap(), 0.5);
        assert_eq!(no_context_score(r, 3).unwrap(), 1.0);
        assert!(matches!(no_context_score(r, 2), Err(Error::InvalidCount { .. })));
    }

    #[test]
    fn missing_train_count() {
        let idx = RuleIndex::build(tissue_rules(), MappingRepository::default());
        let err = recommend(&Context::empty(), &tissue(), &idx, &RecommendOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingTrainCount(_)));
    }

    #[test]
    fn target_in_context_is_rejected() {
        let c = Context::new(vec![p("Tissue", "brain")]).unwrap();
        let err = recommend(&c, &tissue(), &index(), &RecommendOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TargetInContext(_)));
    }

    #[test]
    fn unknown_target_is_empty() {
        let c = Context::new(vec![p("disease", "meningitis")]).unwrap();
        let recs =
            recommend(&c, &FieldSlot::text("karyotype").unwrap(), &index(), &RecommendOptions::default()).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn cutoff_and_max_results() {
        let c = Context::new(vec![p("sex", "male")]).unwrap();
        let all = recommend(&c, &tissue(), &index(), &RecommendOptions::default()).unwrap();
        // brain via r14 (2/3) beats brain via r4 (1/2); liver via r9 scores 1/2
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].value.label(), "brain");
        assert_eq!(all[0].score, 2.0 / 3.0);
        assert_eq!(all[1].value.label(), "liver");
        assert_eq!(all[1].score, 0.5);

        let cut = RecommendOptions { score_cutoff: Some(0.6), max_results: None };
        assert_eq!(recommend(&c, &tissue(), &index(), &cut).unwrap().len(), 1);
        let top = RecommendOptions { score_cutoff: None, max_results: Some(1) };
        assert_eq!(recommend(&c, &tissue(), &index(), &top).unwrap().len(), 1);
    }

    #[test]
    fn equal_scores_break_ties_by_support_then_label() {
        let rules = vec![
            rule(&[("a", "1")], ("t", "zeta"), 4, 1.0),
            rule(&[("a", "1")], ("t", "alpha"), 4, 1.0),
            rule(&[("a", "1")], ("t", "mid"), 9, 1.0),
        ];
        let idx = RuleIndex::build(rules, MappingRepository::default());
        let c = Context::new(vec![p("a", "1")]).unwrap();
        let recs = recommend(&c, &FieldSlot::text("t").unwrap(), &idx, &RecommendOptions::default()).unwrap();
        let labels: Vec<_> = recs.iter().map(|r| r.value.label()).collect();
        assert_eq!(labels, ["mid", "alpha", "zeta"]);
        assert_eq!(recs.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent(0.28), 28);
        assert_eq!(percent(1.0), 100);
        assert_eq!(percent(2.0 / 3.0), 67);
        assert_eq!(percent(0.005), 1);
    }
}

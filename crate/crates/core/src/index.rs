//! In-memory rule store: an inverted map from consequent field to rules, and
//! Jaccard scoring of rule antecedents against a context.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::mapping::{field_key, pair_key, MappingRepository, MatchKey, PairKey};
use crate::mining::AssociationRule;
use crate::model::{Context, FieldSlot};

/// `|a ∩ b| / |a ∪ b|`; two empty sets are identical and score 1.
pub fn jaccard(a: &BTreeSet<PairKey>, b: &BTreeSet<PairKey>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return 1.0;
    }
    inter as f64 / union as f64
}

/// Jaccard index between the rule antecedent and the context, over pair
/// identities. Field and value must both match for a pair to intersect.
pub fn context_matching_score(rule: &AssociationRule, c: &Context, m: &MappingRepository) -> f64 {
    let antecedent: BTreeSet<PairKey> = rule.antecedent.iter().map(|p| pair_key(p, m)).collect();
    let context: BTreeSet<PairKey> = c.pairs().iter().map(|p| pair_key(p, m)).collect();
    jaccard(&antecedent, &context)
}

#[derive(Clone, Debug)]
struct KeyedRule {
    consequent: PairKey,
    antecedent: Vec<u32>,
}

/// A context resolved against an index's pair vocabulary.
#[derive(Clone, Debug)]
pub struct ContextProbe {
    known: Vec<u32>,
    size: usize,
}

impl ContextProbe {
    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}

/// Immutable after [`RuleIndex::build`]; lookups never mutate.
#[derive(Clone, Debug)]
pub struct RuleIndex {
    rules: Vec<AssociationRule>,
    keyed: Vec<KeyedRule>,
    by_consequent_field: HashMap<MatchKey, Vec<usize>>,
    pair_ids: HashMap<PairKey, u32>,
    mappings: Arc<MappingRepository>,
    train_counts: BTreeMap<String, u64>,
}

impl RuleIndex {
    pub fn build(rules: Vec<AssociationRule>, m: MappingRepository) -> Self {
        Self::build_shared(rules, Arc::new(m))
    }

    pub fn build_shared(rules: Vec<AssociationRule>, m: Arc<MappingRepository>) -> Self {
        let mut pair_ids: HashMap<PairKey, u32> = HashMap::new();
        let mut by_consequent_field: HashMap<MatchKey, Vec<usize>> = HashMap::new();
        let mut keyed = Vec::with_capacity(rules.len());
        for (i, rule) in rules.iter().enumerate() {
            let mut antecedent: Vec<u32> = rule
                .antecedent
                .iter()
                .map(|p| {
                    let next = pair_ids.len() as u32;
                    *pair_ids.entry(pair_key(p, &m)).or_insert(next)
                })
                .collect();
            antecedent.sort_unstable();
            antecedent.dedup();
            let consequent = pair_key(&rule.consequent, &m);
            by_consequent_field.entry(consequent.field.clone()).or_default().push(i);
            keyed.push(KeyedRule { consequent, antecedent });
        }
        RuleIndex { rules, keyed, by_consequent_field, pair_ids, mappings: m, train_counts: BTreeMap::new() }
    }

    /// Training-instance counts per template, used for no-context scoring.
    pub fn with_train_counts(mut self, counts: BTreeMap<String, u64>) -> Self {
        self.train_counts = counts;
        self
    }

    pub fn train_counts(&self) -> &BTreeMap<String, u64> {
        &self.train_counts
    }

    pub fn train_count(&self, template_id: &str) -> Option<u64> {
        self.train_counts.get(template_id).copied()
    }

    pub fn mappings(&self) -> &MappingRepository {
        &self.mappings
    }

    pub fn shared_mappings(&self) -> Arc<MappingRepository> {
        Arc::clone(&self.mappings)
    }

    pub fn rules(&self) -> &[AssociationRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn consequent_fields(&self) -> impl Iterator<Item = &MatchKey> {
        self.by_consequent_field.keys()
    }

    /// Positions of the rules whose consequent field matches `target`.
    pub fn select_ids(&self, target: &FieldSlot) -> &[usize] {
        let key = field_key(target, &self.mappings);
        self.by_consequent_field.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn select_rules(&self, target: &FieldSlot) -> Vec<&AssociationRule> {
        self.select_ids(target).iter().map(|&i| &self.rules[i]).collect()
    }

    pub fn rule(&self, id: usize) -> &AssociationRule {
        &self.rules[id]
    }

    pub fn consequent_key(&self, id: usize) -> &PairKey {
        &self.keyed[id].consequent
    }

    pub fn probe(&self, c: &Context) -> ContextProbe {
        let keys: BTreeSet<PairKey> = c.pairs().iter().map(|p| pair_key(p, &self.mappings)).collect();
        let mut known: Vec<u32> = keys.iter().filter_map(|k| self.pair_ids.get(k).copied()).collect();
        known.sort_unstable();
        ContextProbe { known, size: keys.len() }
    }

    /// [`context_matching_score`] via the precomputed pair ids.
    pub fn matching_score(&self, id: usize, probe: &ContextProbe) -> f64 {
        let antecedent = &self.keyed[id].antecedent;
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < antecedent.len() && j < probe.known.len() {
            match antecedent[i].cmp(&probe.known[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = antecedent.len() + probe.size - inter;
        if union == 0 {
            return 1.0;
        }
        inter as f64 / union as f64
    }

    /// Field inventory per template, from the fields that appear in its rules.
    pub fn templates(&self) -> BTreeMap<String, Vec<FieldSlot>> {
        let mut out: BTreeMap<String, BTreeMap<MatchKey, FieldSlot>> = BTreeMap::new();
        for (rule, keyed) in self.rules.iter().zip(&self.keyed) {
            let fields = out.entry(rule.template_id.clone()).or_default();
            fields.entry(keyed.consequent.field.clone()).or_insert_with(|| rule.consequent.field.clone());
            for p in &rule.antecedent {
                fields.entry(field_key(&p.field, &self.mappings)).or_insert_with(|| p.field.clone());
            }
        }
        for t in self.train_counts.keys() {
            out.entry(t.clone()).or_default();
        }
        out.into_iter()
            .map(|(t, fields)| {
                let mut slots: Vec<FieldSlot> = fields.into_values().collect();
                slots.sort_by(|a, b| a.label().cmp(b.label()).then_with(|| a.term().cmp(&b.term())));
                (t, slots)
            })
            .collect()
    }
}

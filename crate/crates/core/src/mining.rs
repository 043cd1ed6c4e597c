//! Level-wise (Apriori) frequent-itemset mining and single-consequent rule
//! generation, one template at a time.
//!
//! Items are field-value pair identities under a [`MappingRepository`], so
//! synonymous annotated values pool their support. Item ids are assigned in
//! [`PairKey`] order, which makes every output independent of the order of
//! the instances.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapping::{pair_key, MappingRepository, MatchKey, PairKey};
use crate::model::{FieldSlot, FieldValuePair, InstanceRepository, ValueAtom};

pub type ItemId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct MiningParams {
    /// Absolute instance count.
    pub min_support: u64,
    pub min_confidence: f64,
    pub max_antecedent_size: Option<usize>,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { min_support: 5, min_confidence: 0.3, max_antecedent_size: None }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_support == 0 {
            return Err(Error::InvalidParams("min_support must be at least 1".into()));
        }
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(Error::InvalidParams(format!("min_confidence must be in (0, 1], got {}", self.min_confidence)));
        }
        if self.max_antecedent_size == Some(0) {
            return Err(Error::InvalidParams("max_antecedent_size must be positive".into()));
        }
        Ok(())
    }
}

/// `antecedent → consequent` with absolute support and confidence.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationRule {
    pub antecedent: Vec<FieldValuePair>,
    pub consequent: FieldValuePair,
    pub support: u64,
    pub confidence: f64,
    pub template_id: String,
}

/// Pair identities seen in one template, with the representative pair
/// (most frequent field slot and value atom) stored for each.
#[derive(Clone, Debug, Default)]
pub struct ItemCatalog {
    keys: Vec<PairKey>,
    pairs: Vec<FieldValuePair>,
    field_of: Vec<u32>,
    index: HashMap<PairKey, ItemId>,
}

impl ItemCatalog {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, id: ItemId) -> &PairKey {
        &self.keys[id as usize]
    }

    pub fn pair(&self, id: ItemId) -> &FieldValuePair {
        &self.pairs[id as usize]
    }

    pub fn id(&self, key: &PairKey) -> Option<ItemId> {
        self.index.get(key).copied()
    }
}

/// Output of [`frequent_itemsets`]: every itemset meeting the support
/// threshold, as sorted item ids.
#[derive(Clone, Debug)]
pub struct FrequentItemsets {
    pub template_id: String,
    pub transactions: usize,
    pub catalog: ItemCatalog,
    pub supports: BTreeMap<Vec<ItemId>, u64>,
}

impl FrequentItemsets {
    pub fn support(&self, itemset: &[ItemId]) -> Option<u64> {
        self.supports.get(itemset).copied()
    }

    /// Support looked up by pair identities, in any order.
    pub fn support_of(&self, keys: &[PairKey]) -> Option<u64> {
        let mut ids = keys.iter().map(|k| self.catalog.id(k)).collect::<Option<Vec<_>>>()?;
        ids.sort_unstable();
        self.support(&ids)
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }
}

fn most_frequent<T: Ord + Clone>(counts: &HashMap<T, u64>) -> T {
    // highest count, then smallest value
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(v, _)| v.clone())
        .expect("non-empty tally")
}

/// Encodes the template's instances as sorted item-id transactions.
fn encode(
    repo: &InstanceRepository,
    template_id: &str,
    m: &MappingRepository,
) -> Result<(ItemCatalog, Vec<Vec<ItemId>>)> {
    let mut keyed: Vec<Vec<(PairKey, &FieldValuePair)>> = Vec::new();
    for inst in repo.of_template(template_id) {
        let mut seen: HashSet<MatchKey> = HashSet::new();
        let mut row = Vec::with_capacity(inst.pairs().len());
        for p in inst.pairs() {
            let key = pair_key(p, m);
            if !seen.insert(key.field.clone()) {
                warn!(
                    "template {template_id:?}: field {:?} repeats under the loaded mappings; keeping the first value",
                    p.field.label()
                );
                continue;
            }
            row.push((key, p));
        }
        keyed.push(row);
    }
    if keyed.is_empty() {
        return Err(Error::UnknownTemplate(template_id.to_string()));
    }

    let distinct: BTreeSet<&PairKey> = keyed.iter().flatten().map(|(k, _)| k).collect();
    let keys: Vec<PairKey> = distinct.into_iter().cloned().collect();
    let index: HashMap<PairKey, ItemId> = keys.iter().enumerate().map(|(i, k)| (k.clone(), i as ItemId)).collect();

    let field_keys: BTreeSet<&MatchKey> = keys.iter().map(|k| &k.field).collect();
    let field_ids: HashMap<&MatchKey, u32> = field_keys.into_iter().enumerate().map(|(i, k)| (k, i as u32)).collect();
    let field_of = keys.iter().map(|k| field_ids[&k.field]).collect();

    let mut slot_tally: HashMap<&MatchKey, HashMap<FieldSlot, u64>> = HashMap::new();
    let mut atom_tally: HashMap<&PairKey, HashMap<ValueAtom, u64>> = HashMap::new();
    for (key, pair) in keyed.iter().flatten() {
        *slot_tally.entry(&key.field).or_default().entry(pair.field.clone()).or_default() += 1;
        *atom_tally.entry(key).or_default().entry(pair.value.clone()).or_default() += 1;
    }
    let pairs = keys
        .iter()
        .map(|k| FieldValuePair::new(most_frequent(&slot_tally[&k.field]), most_frequent(&atom_tally[k])))
        .collect();

    let transactions = keyed
        .iter()
        .map(|row| {
            let mut t: Vec<ItemId> = row.iter().map(|(k, _)| index[k]).collect();
            t.sort_unstable();
            t
        })
        .collect();

    Ok((ItemCatalog { keys, pairs, field_of, index }, transactions))
}

fn binomial_exceeds(n: usize, k: usize, bound: usize) -> bool {
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
        if acc > bound {
            return true;
        }
    }
    false
}

fn is_subset(small: &[ItemId], big: &[ItemId]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.by_ref().any(|b| b == s))
}

/// Counts each candidate (sorted, all of length `k`) against the transactions.
fn count_candidates(transactions: &[Vec<ItemId>], candidates: &[Vec<ItemId>], n_items: usize, k: usize) -> Vec<u64> {
    let mut active = vec![false; n_items];
    for c in candidates {
        for &i in c {
            active[i as usize] = true;
        }
    }
    let lookup: HashMap<&[ItemId], usize> = candidates.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();

    transactions
        .par_chunks(1024)
        .fold(
            || vec![0u64; candidates.len()],
            |mut counts, chunk| {
                let mut row = Vec::new();
                for t in chunk {
                    row.clear();
                    row.extend(t.iter().copied().filter(|&i| active[i as usize]));
                    if row.len() < k {
                        continue;
                    }
                    if binomial_exceeds(row.len(), k, candidates.len()) {
                        for (ci, c) in candidates.iter().enumerate() {
                            if is_subset(c, &row) {
                                counts[ci] += 1;
                            }
                        }
                    } else {
                        for combo in row.iter().copied().combinations(k) {
                            if let Some(&ci) = lookup.get(combo.as_slice()) {
                                counts[ci] += 1;
                            }
                        }
                    }
                }
                counts
            },
        )
        .reduce(
            || vec![0u64; candidates.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Joins frequent `(k-1)`-itemsets sharing a `(k-2)`-prefix and keeps only
/// candidates whose every `(k-1)`-subset is frequent. `prev` must be sorted.
fn next_candidates(prev: &[Vec<ItemId>], field_of: &[u32]) -> Vec<Vec<ItemId>> {
    let frequent: HashSet<&[ItemId]> = prev.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    let mut probe = Vec::new();
    for (i, a) in prev.iter().enumerate() {
        let (prefix, &last_a) = a.split_last().map(|(l, p)| (p, l)).unwrap();
        for b in &prev[i + 1..] {
            if &b[..prefix.len()] != prefix {
                break;
            }
            let last_b = b[prefix.len()];
            // a single instance never holds two values of one field
            if field_of[last_a as usize] == field_of[last_b as usize] {
                continue;
            }
            let mut cand = a.clone();
            cand.push(last_b);
            let pruned = (0..prefix.len()).any(|drop| {
                probe.clear();
                probe.extend(cand.iter().enumerate().filter(|&(j, _)| j != drop).map(|(_, &x)| x));
                !frequent.contains(probe.as_slice())
            });
            if !pruned {
                out.push(cand);
            }
        }
    }
    out
}

fn apriori(
    transactions: &[Vec<ItemId>],
    field_of: &[u32],
    min_support: u64,
    max_len: Option<usize>,
) -> BTreeMap<Vec<ItemId>, u64> {
    let mut result = BTreeMap::new();
    let mut singles = vec![0u64; field_of.len()];
    for t in transactions {
        for &i in t {
            singles[i as usize] += 1;
        }
    }
    let mut level: Vec<Vec<ItemId>> = Vec::new();
    for (i, &c) in singles.iter().enumerate() {
        if c >= min_support {
            level.push(vec![i as ItemId]);
            result.insert(vec![i as ItemId], c);
        }
    }

    let mut k = 2;
    while !level.is_empty() && max_len.is_none_or(|m| k <= m) {
        let candidates = next_candidates(&level, field_of);
        if candidates.is_empty() {
            break;
        }
        let counts = count_candidates(transactions, &candidates, field_of.len(), k);
        level = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| c >= min_support)
            .map(|(cand, c)| {
                result.insert(cand.clone(), c);
                cand
            })
            .collect();
        k += 1;
    }
    result
}

/// Every itemset of `template_id`'s instances with support ≥ `min_support`.
pub fn frequent_itemsets(
    repo: &InstanceRepository,
    template_id: &str,
    min_support: u64,
    m: &MappingRepository,
) -> Result<FrequentItemsets> {
    frequent_itemsets_bounded(repo, template_id, min_support, None, m)
}

/// As [`frequent_itemsets`], stopping at itemsets of `max_len` items.
pub fn frequent_itemsets_bounded(
    repo: &InstanceRepository,
    template_id: &str,
    min_support: u64,
    max_len: Option<usize>,
    m: &MappingRepository,
) -> Result<FrequentItemsets> {
    if min_support == 0 {
        return Err(Error::InvalidParams("min_support must be at least 1".into()));
    }
    let (catalog, transactions) = encode(repo, template_id, m)?;
    let supports = apriori(&transactions, &catalog.field_of, min_support, max_len);
    Ok(FrequentItemsets { template_id: template_id.to_string(), transactions: transactions.len(), catalog, supports })
}

/// Emits `S \ {p} → p` for every frequent `S` with at least two items and
/// every `p ∈ S` whose confidence reaches `min_confidence`.
pub fn generate_rules(itemsets: &FrequentItemsets, min_confidence: f64) -> Vec<AssociationRule> {
    let catalog = &itemsets.catalog;
    let mut rules = Vec::new();
    let mut antecedent = Vec::new();
    for (set, &support) in itemsets.supports.iter().filter(|(s, _)| s.len() >= 2) {
        for (drop, &consequent) in set.iter().enumerate() {
            antecedent.clear();
            antecedent.extend(set.iter().enumerate().filter(|&(j, _)| j != drop).map(|(_, &x)| x));
            let Some(base) = itemsets.support(&antecedent) else {
                debug_assert!(false, "itemsets not closed under subsets");
                continue;
            };
            let confidence = support as f64 / base as f64;
            if confidence >= min_confidence {
                rules.push((consequent, antecedent.clone(), support, confidence));
            }
        }
    }
    rules.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    rules
        .into_iter()
        .map(|(consequent, antecedent, support, confidence)| AssociationRule {
            antecedent: antecedent.iter().map(|&i| catalog.pair(i).clone()).collect(),
            consequent: catalog.pair(consequent).clone(),
            support,
            confidence,
            template_id: itemsets.template_id.clone(),
        })
        .collect()
}

/// Mines the rules of one template.
pub fn mine_rules(
    repo: &InstanceRepository,
    template_id: &str,
    params: &MiningParams,
    m: &MappingRepository,
) -> Result<Vec<AssociationRule>> {
    params.validate()?;
    let max_len = params.max_antecedent_size.map(|a| a + 1);
    let itemsets = frequent_itemsets_bounded(repo, template_id, params.min_support, max_len, m)?;
    Ok(generate_rules(&itemsets, params.min_confidence))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSummary {
    pub instances: u64,
    pub frequent_itemsets: usize,
    pub rules: usize,
}

#[derive(Clone, Debug)]
pub struct MinedRepository {
    pub rules: Vec<AssociationRule>,
    pub templates: BTreeMap<String, TemplateSummary>,
}

/// Mines every template in the repository, in parallel, ordered by template id.
pub fn mine_repository(
    repo: &InstanceRepository,
    params: &MiningParams,
    m: &MappingRepository,
) -> Result<MinedRepository> {
    params.validate()?;
    let max_len = params.max_antecedent_size.map(|a| a + 1);
    let per_template = repo
        .template_ids()
        .into_par_iter()
        .map(|tid| {
            let itemsets = frequent_itemsets_bounded(repo, &tid, params.min_support, max_len, m)?;
            let rules = generate_rules(&itemsets, params.min_confidence);
            let summary = TemplateSummary {
                instances: itemsets.transactions as u64,
                frequent_itemsets: itemsets.len(),
                rules: rules.len(),
            };
            Ok((tid, summary, rules))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = MinedRepository { rules: Vec::new(), templates: BTreeMap::new() };
    for (tid, summary, rules) in per_template {
        out.rules.extend(rules);
        out.templates.insert(tid, summary);
    }
    Ok(out)
}

//! Equivalence classes of ontology terms and the match keys derived from them.
//!
//! Two fields (or two values) are considered the same when their match keys
//! are equal. Annotated slots key on the canonical member of their term's
//! class; unannotated slots key on their normalized label. The two regimes
//! never compare equal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_label, FieldSlot, FieldValuePair, TermRef, ValueAtom};

/// Disjoint classes of equivalent term URIs.
///
/// Built once by [`MappingRepository::load`]; read-only afterwards. Each
/// class is stored sorted, so its first member is the canonical
/// representative.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MappingRepository {
    class_of: HashMap<TermRef, usize>,
    classes: Vec<Vec<TermRef>>,
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new() -> Self {
        DisjointSets { parent: Vec::new(), rank: Vec::new() }
    }

    fn make(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.rank.push(0);
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

impl MappingRepository {
    /// Closes the given records under union: overlapping records merge.
    pub fn load<I, R>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[TermRef]>,
    {
        let mut ids: HashMap<TermRef, usize> = HashMap::new();
        let mut terms: Vec<TermRef> = Vec::new();
        let mut sets = DisjointSets::new();
        for (n, record) in records.into_iter().enumerate() {
            let record = record.as_ref();
            if record.len() < 2 {
                return Err(Error::MalformedRecord(format!(
                    "record {} has {} term(s); at least 2 are required",
                    n + 1,
                    record.len()
                )));
            }
            let mut first = None;
            for t in record {
                let id = *ids.entry(t.clone()).or_insert_with(|| {
                    terms.push(t.clone());
                    sets.make()
                });
                match first {
                    None => first = Some(id),
                    Some(f) => sets.union(f, id),
                }
            }
        }

        let mut grouped: BTreeMap<usize, Vec<TermRef>> = BTreeMap::new();
        for (id, term) in terms.into_iter().enumerate() {
            grouped.entry(sets.find(id)).or_default().push(term);
        }
        let mut classes: Vec<Vec<TermRef>> = grouped
            .into_values()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        classes.sort();
        let class_of = classes.iter().enumerate().flat_map(|(i, c)| c.iter().map(move |t| (t.clone(), i))).collect();
        Ok(MappingRepository { class_of, classes })
    }

    /// Parses raw URI strings first; any non-IRI entry is a malformed record.
    pub fn load_strings<I, R, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let parsed = records
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|s| TermRef::new(s.as_ref()).map_err(|e| Error::MalformedRecord(e.to_string())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::load(parsed)
    }

    /// The full class containing `t`, itself included; `{t}` when unmapped.
    pub fn equivalent_terms(&self, t: &TermRef) -> Vec<TermRef> {
        match self.class_of.get(t) {
            Some(&i) => self.classes[i].clone(),
            None => vec![t.clone()],
        }
    }

    /// Lexicographically smallest member of `t`'s class.
    pub fn representative<'a>(&'a self, t: &'a TermRef) -> &'a TermRef {
        match self.class_of.get(t) {
            Some(&i) => &self.classes[i][0],
            None => t,
        }
    }

    pub fn classes(&self) -> &[Vec<TermRef>] {
        &self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.class_of.len()
    }
}

/// Free-function form of [`MappingRepository::equivalent_terms`].
pub fn equivalent_terms(t: &TermRef, m: &MappingRepository) -> Vec<TermRef> {
    m.equivalent_terms(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    TermClass,
    Label,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchKey {
    pub kind: KeyKind,
    pub key: String,
}

impl MatchKey {
    fn resolve(label: &str, term: Option<&TermRef>, m: &MappingRepository) -> Self {
        match term {
            Some(t) => MatchKey { kind: KeyKind::TermClass, key: m.representative(t).as_str().to_string() },
            None => MatchKey { kind: KeyKind::Label, key: normalize_label(label) },
        }
    }
}

impl fmt::Display for MatchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KeyKind::TermClass => write!(f, "<{}>", self.key),
            KeyKind::Label => write!(f, "{:?}", self.key),
        }
    }
}

pub fn field_key(f: &FieldSlot, m: &MappingRepository) -> MatchKey {
    MatchKey::resolve(f.label(), f.term(), m)
}

pub fn value_key(v: &ValueAtom, m: &MappingRepository) -> MatchKey {
    MatchKey::resolve(v.label(), v.term(), m)
}

/// Identity of a field-value pair for set operations.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub field: MatchKey,
    pub value: MatchKey,
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.field, self.value)
    }
}

pub fn pair_key(p: &FieldValuePair, m: &MappingRepository) -> PairKey {
    PairKey { field: field_key(&p.field, m), value: value_key(&p.value, m) }
}

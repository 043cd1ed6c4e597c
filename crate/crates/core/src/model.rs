//! Templates, instances, field-value pairs and contexts.
//!
//! Everything here is immutable once constructed. Labels keep the exact text
//! they were created with; comparisons go through [`normalize_label`] or, for
//! annotated slots, through the term URI (see [`crate::mapping`]).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{field_key, MappingRepository, MatchKey};

/// Trims, collapses internal whitespace runs to a single space and
/// case-folds.
pub fn normalize_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for word in label.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// An ontology term identifier. Compared verbatim after trimming.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct TermRef(String);

impl TermRef {
    pub fn new(uri: impl AsRef<str>) -> Result<Self> {
        let uri = uri.as_ref().trim();
        if uri.is_empty() || !uri.contains(':') {
            return Err(Error::InvalidTerm(uri.to_string()));
        }
        Ok(TermRef(uri.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TermRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for TermRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TermRef::new(s).map_err(serde::de::Error::custom)
    }
}

fn checked_label(label: String) -> Result<String> {
    if label.trim().is_empty() {
        Err(Error::EmptyLabel)
    } else {
        Ok(label)
    }
}

/// A template field: its display label and optional ontology annotation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSlot {
    label: String,
    term: Option<TermRef>,
}

impl FieldSlot {
    pub fn new(label: impl Into<String>, term: Option<TermRef>) -> Result<Self> {
        Ok(FieldSlot { label: checked_label(label.into())?, term })
    }

    pub fn text(label: impl Into<String>) -> Result<Self> {
        Self::new(label, None)
    }

    pub fn annotated(label: impl Into<String>, term: &str) -> Result<Self> {
        Self::new(label, Some(TermRef::new(term)?))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn term(&self) -> Option<&TermRef> {
        self.term.as_ref()
    }
}

/// A field value: display label plus optional ontology term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueAtom {
    label: String,
    term: Option<TermRef>,
}

impl ValueAtom {
    pub fn new(label: impl Into<String>, term: Option<TermRef>) -> Result<Self> {
        Ok(ValueAtom { label: checked_label(label.into())?, term })
    }

    pub fn text(label: impl Into<String>) -> Result<Self> {
        Self::new(label, None)
    }

    pub fn annotated(label: impl Into<String>, term: &str) -> Result<Self> {
        Self::new(label, Some(TermRef::new(term)?))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn term(&self) -> Option<&TermRef> {
        self.term.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldValuePair {
    pub field: FieldSlot,
    pub value: ValueAtom,
}

impl FieldValuePair {
    pub fn new(field: FieldSlot, value: ValueAtom) -> Self {
        FieldValuePair { field, value }
    }

    /// Plain-text pair.
    pub fn text(field: &str, value: &str) -> Result<Self> {
        Ok(Self::new(FieldSlot::text(field)?, ValueAtom::text(value)?))
    }

    pub fn annotated(field: &str, field_term: &str, value: &str, value_term: &str) -> Result<Self> {
        Ok(Self::new(FieldSlot::annotated(field, field_term)?, ValueAtom::annotated(value, value_term)?))
    }

    pub fn to_raw(&self) -> RawPair {
        RawPair {
            field_label: self.field.label.clone(),
            field_type: self.field.term.as_ref().map(|t| t.0.clone()),
            value_label: self.value.label.clone(),
            value_type: self.value.term.as_ref().map(|t| t.0.clone()),
        }
    }
}

impl fmt::Display for FieldValuePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.field.label, self.value.label)
    }
}

/// Returns the label of the first field whose identity repeats.
fn first_duplicate_field<'a>(pairs: impl IntoIterator<Item = &'a FieldValuePair>) -> Option<&'a str> {
    let bare = MappingRepository::default();
    let mut seen: HashSet<MatchKey> = HashSet::new();
    pairs.into_iter().find(|p| !seen.insert(field_key(&p.field, &bare))).map(|p| p.field.label())
}

/// One filled-in record of a template. Fields are single-valued.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TemplateInstance {
    template_id: String,
    pairs: Vec<FieldValuePair>,
}

impl TemplateInstance {
    pub fn new(template_id: impl Into<String>, pairs: Vec<FieldValuePair>) -> Result<Self> {
        let template_id = template_id.into();
        if template_id.trim().is_empty() {
            return Err(Error::MissingTemplate);
        }
        if let Some(dup) = first_duplicate_field(&pairs) {
            return Err(Error::DuplicateField(dup.to_string()));
        }
        Ok(TemplateInstance { template_id, pairs })
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    pub fn pairs(&self) -> &[FieldValuePair] {
        &self.pairs
    }

    /// The pair whose field has the same identity as `field` under `m`.
    pub fn value_for(&self, field: &FieldSlot, m: &MappingRepository) -> Option<&FieldValuePair> {
        let key = field_key(field, m);
        self.pairs.iter().find(|p| field_key(&p.field, m) == key)
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            template_id: self.template_id.clone(),
            fields: self.pairs.iter().map(FieldValuePair::to_raw).collect(),
        }
    }
}

/// Wire form of a pair, as it appears in instance files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawPair {
    pub field_label: String,
    #[serde(default)]
    pub field_type: Option<String>,
    pub value_label: String,
    #[serde(default)]
    pub value_type: Option<String>,
}

/// Wire form of an instance, before validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawInstance {
    pub template_id: String,
    pub fields: Vec<RawPair>,
}

fn optional_term(uri: &Option<String>) -> Result<Option<TermRef>> {
    match uri {
        Some(u) if !u.trim().is_empty() => TermRef::new(u).map(Some),
        _ => Ok(None),
    }
}

/// Drops pairs with empty values and rejects repeated fields.
pub fn validate_instance(raw: RawInstance) -> Result<TemplateInstance> {
    let mut pairs = Vec::with_capacity(raw.fields.len());
    for p in raw.fields {
        let field = FieldSlot::new(p.field_label, optional_term(&p.field_type)?)?;
        if p.value_label.trim().is_empty() {
            continue;
        }
        let value = ValueAtom::new(p.value_label, optional_term(&p.value_type)?)?;
        pairs.push(FieldValuePair::new(field, value));
    }
    TemplateInstance::new(raw.template_id, pairs)
}

/// The values a user has already entered. May be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Context {
    pairs: Vec<FieldValuePair>,
}

impl Context {
    pub fn new(pairs: Vec<FieldValuePair>) -> Result<Self> {
        if let Some(dup) = first_duplicate_field(&pairs) {
            return Err(Error::DuplicateField(dup.to_string()));
        }
        Ok(Context { pairs })
    }

    pub fn empty() -> Self {
        Context::default()
    }

    pub fn pairs(&self) -> &[FieldValuePair] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InstanceRepository {
    instances: Vec<TemplateInstance>,
}

impl InstanceRepository {
    pub fn new(instances: Vec<TemplateInstance>) -> Self {
        InstanceRepository { instances }
    }

    pub fn push(&mut self, instance: TemplateInstance) {
        self.instances.push(instance);
    }

    pub fn instances(&self) -> &[TemplateInstance] {
        &self.instances
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TemplateInstance> {
        self.instances.iter()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn of_template<'a>(&'a self, template_id: &'a str) -> impl Iterator<Item = &'a TemplateInstance> + 'a {
        self.instances.iter().filter(move |i| i.template_id == template_id)
    }

    /// Instance count per template, ordered by template id.
    pub fn template_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for i in &self.instances {
            *counts.entry(i.template_id.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn template_ids(&self) -> Vec<String> {
        self.template_counts().into_keys().collect()
    }
}

impl FromIterator<TemplateInstance> for InstanceRepository {
    fn from_iter<T: IntoIterator<Item = TemplateInstance>>(iter: T) -> Self {
        InstanceRepository { instances: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a InstanceRepository {
    type Item = &'a TemplateInstance;
    type IntoIter = std::slice::Iter<'a, TemplateInstance>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}

//! JSON-lines formats: instance files, mapping files and the rule store.
//!
//! Each `parse_*_line` function handles a single untrusted line and never
//! panics; the `read_*` functions add line numbers and file handling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{field_key, MappingRepository};
use crate::mining::{AssociationRule, MiningParams};
use crate::model::{
    validate_instance, FieldSlot, FieldValuePair, InstanceRepository, RawInstance, TemplateInstance, TermRef, ValueAtom,
};

pub const RULES_FILE: &str = "rules.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Calls `f` on each non-blank line with its 1-based number.
fn for_each_line<R: BufRead>(reader: R, path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        f(n + 1, &line)?;
    }
    Ok(())
}

// ---- instances -------------------------------------------------------------

/// A parsed instance line. `dropped_pairs` counts empty values removed.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedInstance {
    pub instance: TemplateInstance,
    pub dropped_pairs: usize,
}

#[derive(Debug)]
pub enum InstanceLineError {
    /// The record is well-formed but violates an instance invariant.
    Rejected(Error),
    Malformed(String),
}

pub fn parse_instance_line(line: &str) -> Result<ParsedInstance, InstanceLineError> {
    let raw: RawInstance = serde_json::from_str(line).map_err(|e| InstanceLineError::Malformed(e.to_string()))?;
    let before = raw.fields.len();
    match validate_instance(raw) {
        Ok(instance) => {
            let dropped_pairs = before - instance.pairs().len();
            Ok(ParsedInstance { instance, dropped_pairs })
        }
        Err(e @ Error::DuplicateField(_)) => Err(InstanceLineError::Rejected(e)),
        Err(e) => Err(InstanceLineError::Malformed(e.to_string())),
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub repository: InstanceRepository,
    pub dropped_pairs: usize,
    pub dropped_records: usize,
}

pub fn read_instances_from<R: BufRead>(reader: R, source: &Path) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for_each_line(reader, source, |line, text| match parse_instance_line(text) {
        Ok(parsed) => {
            if parsed.dropped_pairs > 0 {
                warn!("{}:{line}: dropped {} pair(s) with empty values", source.display(), parsed.dropped_pairs);
            }
            report.dropped_pairs += parsed.dropped_pairs;
            report.repository.push(parsed.instance);
            Ok(())
        }
        Err(InstanceLineError::Rejected(e)) => {
            warn!("{}:{line}: record dropped: {e}", source.display());
            report.dropped_records += 1;
            Ok(())
        }
        Err(InstanceLineError::Malformed(reason)) => Err(Error::Parse { line, reason }),
    })?;
    Ok(report)
}

pub fn read_instances(path: impl AsRef<Path>) -> Result<IngestReport> {
    let path = path.as_ref();
    read_instances_from(open(path)?, path)
}

pub fn write_instances<W: Write>(mut out: W, repo: &InstanceRepository) -> std::io::Result<()> {
    for inst in repo {
        serde_json::to_writer(&mut out, &inst.to_raw())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_instances(path: impl AsRef<Path>, repo: &InstanceRepository) -> Result<()> {
    let path = path.as_ref();
    write_instances(create(path)?, repo).map_err(|e| Error::io(path, e))
}

// ---- mappings --------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingRecord {
    terms: Vec<String>,
}

/// One `{"terms": [...]}` record with at least two valid URIs.
pub fn parse_mapping_line(line: &str) -> Result<Vec<TermRef>> {
    let rec: MappingRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord(e.to_string()))?;
    if rec.terms.len() < 2 {
        return Err(Error::MalformedRecord(format!("{} term(s); at least 2 are required", rec.terms.len())));
    }
    rec.terms.iter().map(|t| TermRef::new(t).map_err(|e| Error::MalformedRecord(e.to_string()))).collect()
}

pub fn read_mappings_from<R: BufRead>(reader: R, source: &Path) -> Result<MappingRepository> {
    let mut records = Vec::new();
    for_each_line(reader, source, |line, text| {
        let rec = parse_mapping_line(text).map_err(|e| match e {
            Error::MalformedRecord(reason) => Error::MalformedRecord(format!("line {line}: {reason}")),
            other => other,
        })?;
        records.push(rec);
        Ok(())
    })?;
    MappingRepository::load(records)
}

pub fn read_mappings(path: impl AsRef<Path>) -> Result<MappingRepository> {
    let path = path.as_ref();
    read_mappings_from(open(path)?, path)
}

pub fn write_mappings<W: Write>(mut out: W, m: &MappingRepository) -> std::io::Result<()> {
    for class in m.classes() {
        serde_json::to_writer(&mut out, &serde_json::json!({ "terms": class }))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

// ---- rule store ------------------------------------------------------------

/// One antecedent or consequent entry of a stored rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairDoc {
    pub field_label: String,
    #[serde(default)]
    pub field_type: Option<String>,
    #[serde(default)]
    pub field_type_mappings: Vec<String>,
    pub field_value_label: String,
    #[serde(default)]
    pub field_value_type: Option<String>,
    #[serde(default)]
    pub field_value_mappings: Vec<String>,
}

/// A stored rule document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleDoc {
    pub antecedent: Vec<PairDoc>,
    pub consequent: Vec<PairDoc>,
    pub support: u64,
    pub confidence: f64,
    pub template_id: String,
}

fn other_terms(t: Option<&TermRef>, m: &MappingRepository) -> Vec<String> {
    match t {
        Some(t) => m.equivalent_terms(t).into_iter().filter(|o| o != t).map(|o| o.as_str().to_string()).collect(),
        None => Vec::new(),
    }
}

impl PairDoc {
    pub fn from_pair(p: &FieldValuePair, m: &MappingRepository) -> Self {
        PairDoc {
            field_label: p.field.label().to_string(),
            field_type: p.field.term().map(|t| t.as_str().to_string()),
            field_type_mappings: other_terms(p.field.term(), m),
            field_value_label: p.value.label().to_string(),
            field_value_type: p.value.term().map(|t| t.as_str().to_string()),
            field_value_mappings: other_terms(p.value.term(), m),
        }
    }

    /// The mapping arrays are informational and ignored here.
    pub fn to_pair(&self) -> Result<FieldValuePair> {
        let term = |t: &Option<String>| t.as_deref().map(TermRef::new).transpose();
        Ok(FieldValuePair::new(
            FieldSlot::new(self.field_label.clone(), term(&self.field_type)?)?,
            ValueAtom::new(self.field_value_label.clone(), term(&self.field_value_type)?)?,
        ))
    }
}

impl RuleDoc {
    pub fn from_rule(r: &AssociationRule, m: &MappingRepository) -> Self {
        RuleDoc {
            antecedent: r.antecedent.iter().map(|p| PairDoc::from_pair(p, m)).collect(),
            consequent: vec![PairDoc::from_pair(&r.consequent, m)],
            support: r.support,
            confidence: r.confidence,
            template_id: r.template_id.clone(),
        }
    }

    pub fn to_rule(&self) -> Result<AssociationRule, String> {
        let [consequent] = self.consequent.as_slice() else {
            return Err(format!("expected exactly one consequent, found {}", self.consequent.len()));
        };
        if self.antecedent.is_empty() {
            return Err("empty antecedent".into());
        }
        if self.support == 0 {
            return Err("support must be at least 1".into());
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(format!("confidence {} outside (0, 1]", self.confidence));
        }
        if self.template_id.trim().is_empty() {
            return Err("empty templateId".into());
        }
        let consequent = consequent.to_pair().map_err(|e| e.to_string())?;
        let antecedent =
            self.antecedent.iter().map(PairDoc::to_pair).collect::<Result<Vec<_>>>().map_err(|e| e.to_string())?;
        let bare = MappingRepository::default();
        let target = field_key(&consequent.field, &bare);
        if antecedent.iter().any(|p| field_key(&p.field, &bare) == target) {
            return Err(format!("consequent field {:?} also occurs in the antecedent", consequent.field.label()));
        }
        Ok(AssociationRule {
            antecedent,
            consequent,
            support: self.support,
            confidence: self.confidence,
            template_id: self.template_id.clone(),
        })
    }
}

pub fn parse_rule_line(line: &str) -> Result<AssociationRule, String> {
    let doc: RuleDoc = serde_json::from_str(line).map_err(|e| e.to_string())?;
    doc.to_rule()
}

pub fn write_rules<W: Write>(mut out: W, rules: &[AssociationRule], m: &MappingRepository) -> std::io::Result<()> {
    for r in rules {
        serde_json::to_writer(&mut out, &RuleDoc::from_rule(r, m))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_rules_from<R: BufRead>(reader: R, source: &Path) -> Result<Vec<AssociationRule>> {
    let mut rules = Vec::new();
    for_each_line(reader, source, |line, text| {
        rules.push(parse_rule_line(text).map_err(|reason| Error::Parse { line, reason })?);
        Ok(())
    })?;
    Ok(rules)
}

pub fn read_rules(path: impl AsRef<Path>) -> Result<Vec<AssociationRule>> {
    let path = path.as_ref();
    read_rules_from(open(path)?, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestParams {
    pub min_support: u64,
    pub min_confidence: f64,
    pub max_antecedent_size: Option<usize>,
}

impl From<&MiningParams> for ManifestParams {
    fn from(p: &MiningParams) -> Self {
        ManifestParams {
            min_support: p.min_support,
            min_confidence: p.min_confidence,
            max_antecedent_size: p.max_antecedent_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestTemplate {
    pub train_count: u64,
    pub frequent_itemsets: usize,
    pub rules: usize,
}

/// Written next to the rule store by training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub params: ManifestParams,
    pub templates: BTreeMap<String, ManifestTemplate>,
    pub total_rules: usize,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn train_counts(&self) -> BTreeMap<String, u64> {
        self.templates.iter().map(|(t, s)| (t.clone(), s.train_count)).collect()
    }
}

/// A rule store on disk: a directory holding `rules.jsonl` and
/// `manifest.json`, or a bare rules file (no training counts).
#[derive(Clone, Debug)]
pub struct RuleStore {
    pub rules: Vec<AssociationRule>,
    pub manifest: Option<Manifest>,
}

fn store_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(RULES_FILE), path.join(MANIFEST_FILE))
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (path.to_path_buf(), dir.join(MANIFEST_FILE))
    }
}

impl RuleStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (rules_path, manifest_path) = store_paths(path.as_ref());
        let rules = read_rules(&rules_path)?;
        let manifest = if manifest_path.is_file() {
            let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), reason: e.to_string() })?)
        } else {
            warn!("no {MANIFEST_FILE} beside {}; empty-context requests will fail", rules_path.display());
            None
        };
        Ok(RuleStore { rules, manifest })
    }

    /// Writes `rules.jsonl` and `manifest.json` into `dir`, creating it.
    pub fn save(
        dir: impl AsRef<Path>,
        rules: &[AssociationRule],
        manifest: &Manifest,
        m: &MappingRepository,
    ) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rules_path = dir.join(RULES_FILE);
        write_rules(create(&rules_path)?, rules, m).map_err(|e| Error::io(&rules_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut out = create(&manifest_path)?;
        serde_json::to_writer_pretty(&mut out, manifest)
            .map_err(std::io::Error::from)
            .and_then(|_| out.write_all(b"\n"))
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&manifest_path, e))
    }

    pub fn train_counts(&self) -> BTreeMap<String, u64> {
        self.manifest.as_ref().map(Manifest::train_counts).unwrap_or_default()
    }
}

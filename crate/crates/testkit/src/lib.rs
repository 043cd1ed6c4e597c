//! Shared fixtures and deliberately naive reference implementations.
//!
//! Nothing here calls into the core crate's mining, key or scoring code: the
//! oracles recompute term equivalence, pair identity, support, confidence and
//! Jaccard scores from first principles so they can be compared with it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valrec_core::mapping::MappingRepository;
use valrec_core::mining::AssociationRule;
use valrec_core::model::{FieldSlot, FieldValuePair, InstanceRepository, TemplateInstance, ValueAtom};

pub const OBO: &str = "http://purl.obolibrary.org/obo/";
pub const EFO: &str = "http://www.ebi.ac.uk/efo/";
pub const NCIT: &str = "http://ncicb.nci.nih.gov/xml/owl/EVS/Thesaurus.owl#";

pub fn obo(id: &str) -> String {
    format!("{OBO}{id}")
}

fn instance(template: &str, pairs: &[(&str, &str)]) -> TemplateInstance {
    TemplateInstance::new(template, pairs.iter().map(|(f, v)| FieldValuePair::text(f, v).unwrap()).collect()).unwrap()
}

/// Six biomedical experiments described by sex, tissue and disease; sex is
/// unknown for two of them.
pub fn six_experiments() -> InstanceRepository {
    [
        vec![("sex", "male"), ("tissue", "brain"), ("disease", "meningitis")],
        vec![("sex", "female"), ("tissue", "brain"), ("disease", "meningitis")],
        vec![("tissue", "liver"), ("disease", "cirrhosis")],
        vec![("sex", "male"), ("tissue", "liver"), ("disease", "liver cancer")],
        vec![("tissue", "liver"), ("disease", "liver cancer")],
        vec![("sex", "male"), ("tissue", "brain"), ("disease", "meningitis")],
    ]
    .iter()
    .map(|pairs| instance("Experiment", pairs))
    .collect()
}

/// A rule written as `(antecedent, consequent, support, numerator, denominator)`.
pub type ExpectedRule = (&'static [(&'static str, &'static str)], (&'static str, &'static str), u64, u64, u64);

/// Rules over `six_experiments()` at support ≥ 1 and confidence ≥ 0.6, with
/// single-pair antecedents and the full-confidence rules first.
pub const EXPECTED_RULES: &[ExpectedRule] = &[
    (&[("disease", "meningitis")], ("tissue", "brain"), 3, 3, 3),
    (&[("tissue", "brain")], ("disease", "meningitis"), 3, 3, 3),
    (&[("disease", "liver cancer")], ("tissue", "liver"), 2, 2, 2),
    (&[("sex", "male"), ("disease", "meningitis")], ("tissue", "brain"), 2, 2, 2),
    (&[("sex", "male"), ("tissue", "brain")], ("disease", "meningitis"), 2, 2, 2),
    (&[("sex", "female")], ("tissue", "brain"), 1, 1, 1),
    (&[("sex", "female")], ("disease", "meningitis"), 1, 1, 1),
    (&[("disease", "cirrhosis")], ("tissue", "liver"), 1, 1, 1),
    (&[("sex", "male"), ("disease", "liver cancer")], ("tissue", "liver"), 1, 1, 1),
    (&[("sex", "male"), ("tissue", "liver")], ("disease", "liver cancer"), 1, 1, 1),
    (&[("sex", "female"), ("disease", "meningitis")], ("tissue", "brain"), 1, 1, 1),
    (&[("sex", "female"), ("tissue", "brain")], ("disease", "meningitis"), 1, 1, 1),
    (&[("tissue", "brain")], ("sex", "male"), 2, 2, 3),
    (&[("sex", "male")], ("tissue", "brain"), 2, 2, 3),
    (&[("disease", "meningitis")], ("sex", "male"), 2, 2, 3),
    (&[("sex", "male")], ("disease", "meningitis"), 2, 2, 3),
    (&[("tissue", "liver")], ("disease", "liver cancer"), 2, 2, 3),
];

/// The one qualifying rule not in `EXPECTED_RULES`: its antecedent has two
/// pairs and its confidence is below 1.
pub const THREE_PAIR_RULE: ExpectedRule = (&[("tissue", "brain"), ("disease", "meningitis")], ("sex", "male"), 2, 2, 3);

/// Indices into `EXPECTED_RULES` of every rule concluding `tissue`, with its
/// Jaccard score against `{disease=meningitis}`.
pub const MENINGITIS_TISSUE_SCORES: &[(usize, f64)] =
    &[(0, 1.0), (2, 0.0), (3, 0.5), (5, 0.0), (7, 0.0), (8, 0.0), (10, 0.5), (13, 0.0)];

/// Instances of an *Experiment* template whose fields and values are
/// annotated with terms that differ from the ones an *Assay* template uses.
pub struct CrossTemplate {
    pub experiment: InstanceRepository,
    pub mappings: MappingRepository,
    pub mapping_records: Vec<Vec<String>>,
    pub assay_cell_type: FieldSlot,
    pub assay_tissue: FieldSlot,
    pub assay_cell_value: ValueAtom,
    pub pancreas: String,
}

pub fn cross_template() -> CrossTemplate {
    let source_cell = FieldSlot::annotated("source cell", &obo("CL_0000000")).unwrap();
    let source_tissue = FieldSlot::annotated("source tissue", &obo("UBERON_0000479")).unwrap();
    let cell = |label: &str, term: &str| ValueAtom::annotated(label, &obo(term)).unwrap();
    let rows = [
        (cell("pancreatic A cell", "BTO_0000990"), cell("pancreas", "UBERON_0001264"), 3),
        (cell("pancreatic A cell", "BTO_0000990"), cell("pancreas mesenchyme", "UBERON_0003769"), 1),
        (cell("hepatocyte", "CL_0000182"), cell("liver", "UBERON_0002107"), 2),
    ];
    let mut experiment = InstanceRepository::default();
    for (c, t, n) in rows {
        for _ in 0..n {
            let pairs = vec![
                FieldValuePair::new(source_cell.clone(), c.clone()),
                FieldValuePair::new(source_tissue.clone(), t.clone()),
            ];
            experiment.push(TemplateInstance::new("Experiment", pairs).unwrap());
        }
    }
    let mapping_records = vec![
        vec![obo("CL_0000000"), format!("{EFO}EFO_0000324")],
        vec![obo("UBERON_0000479"), format!("{NCIT}C12801")],
        vec![obo("CL_0000171"), obo("BTO_0000990")],
    ];
    CrossTemplate {
        experiment,
        mappings: MappingRepository::load_strings(&mapping_records).unwrap(),
        mapping_records,
        assay_cell_type: FieldSlot::annotated("cell type", &format!("{EFO}EFO_0000324")).unwrap(),
        assay_tissue: FieldSlot::annotated("tissue", &format!("{NCIT}C12801")).unwrap(),
        assay_cell_value: ValueAtom::annotated("pancreatic alpha cell", &obo("CL_0000171")).unwrap(),
        pancreas: obo("UBERON_0001264"),
    }
}

// ---------------------------------------------------------------------------
// Reference identity: transitive closure by repeated merging, then the
// smallest term of each class as its name.

/// Term equivalence computed by fixpoint iteration over the raw records.
#[derive(Clone, Debug, Default)]
pub struct NaiveMappings {
    class_name: HashMap<String, String>,
}

impl NaiveMappings {
    pub fn new(records: &[Vec<String>]) -> Self {
        let mut classes: Vec<BTreeSet<String>> = records.iter().map(|r| r.iter().cloned().collect()).collect();
        loop {
            let mut merged = false;
            'outer: for i in 0..classes.len() {
                for j in i + 1..classes.len() {
                    if !classes[i].is_disjoint(&classes[j]) {
                        let other = classes.remove(j);
                        classes[i].extend(other);
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        let mut class_name = HashMap::new();
        for c in classes {
            let name = c.iter().next().cloned().unwrap_or_default();
            for t in c {
                class_name.insert(t, name.clone());
            }
        }
        NaiveMappings { class_name }
    }

    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        self.name(a) == self.name(b)
    }

    fn name(&self, term: &str) -> String {
        self.class_name.get(term).cloned().unwrap_or_else(|| term.to_string())
    }

    /// Annotated atoms are identified by term class, the rest by their label
    /// with whitespace collapsed and case folded.
    pub fn atom_id(&self, label: &str, term: Option<&str>) -> String {
        match term {
            Some(t) => format!("term {}", self.name(t)),
            None => format!("label {}", label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()),
        }
    }

    pub fn field_id(&self, f: &FieldSlot) -> String {
        self.atom_id(f.label(), f.term().map(|t| t.as_str()))
    }

    pub fn value_id(&self, v: &ValueAtom) -> String {
        self.atom_id(v.label(), v.term().map(|t| t.as_str()))
    }

    pub fn pair_id(&self, p: &FieldValuePair) -> (String, String) {
        (self.field_id(&p.field), self.value_id(&p.value))
    }
}

/// A rule reduced to pair identities.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct RuleShape {
    pub template: String,
    pub antecedent: BTreeSet<(String, String)>,
    pub consequent: (String, String),
    pub support: u64,
    pub confidence: f64,
}

pub fn shape(rule: &AssociationRule, m: &NaiveMappings) -> RuleShape {
    RuleShape {
        template: rule.template_id.clone(),
        antecedent: rule.antecedent.iter().map(|p| m.pair_id(p)).collect(),
        consequent: m.pair_id(&rule.consequent),
        support: rule.support,
        confidence: rule.confidence,
    }
}

pub fn sorted_shapes(rules: &[AssociationRule], m: &NaiveMappings) -> Vec<RuleShape> {
    let mut out: Vec<RuleShape> = rules.iter().map(|r| shape(r, m)).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite confidences"));
    out
}

/// Counts every subset of every transaction, then emits each `S \ {p} → p`
/// that clears both thresholds.
pub fn brute_force_rules(
    repo: &InstanceRepository,
    min_support: u64,
    min_confidence: f64,
    max_antecedent: Option<usize>,
    m: &NaiveMappings,
) -> Vec<RuleShape> {
    let mut by_template: BTreeMap<&str, Vec<Vec<(String, String)>>> = BTreeMap::new();
    for inst in repo {
        let mut t: Vec<(String, String)> = inst.pairs().iter().map(|p| m.pair_id(p)).collect();
        t.sort();
        t.dedup();
        by_template.entry(inst.template_id()).or_default().push(t);
    }

    let mut out = Vec::new();
    for (template, transactions) in by_template {
        let mut counts: HashMap<Vec<(String, String)>, u64> = HashMap::new();
        for t in &transactions {
            for mask in 1u32..(1 << t.len()) {
                let subset: Vec<(String, String)> =
                    (0..t.len()).filter(|i| mask & (1 << i) != 0).map(|i| t[i].clone()).collect();
                *counts.entry(subset).or_default() += 1;
            }
        }
        for (set, &support) in &counts {
            if support < min_support || set.len() < 2 {
                continue;
            }
            if max_antecedent.is_some_and(|k| set.len() - 1 > k) {
                continue;
            }
            for (i, consequent) in set.iter().enumerate() {
                let mut rest = set.clone();
                rest.remove(i);
                let confidence = support as f64 / counts[&rest] as f64;
                if confidence >= min_confidence {
                    out.push(RuleShape {
                        template: template.to_string(),
                        antecedent: rest.into_iter().collect(),
                        consequent: consequent.clone(),
                        support,
                        confidence,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite confidences"));
    out
}

/// Direct transcription of the scoring and ranking rules: keep rules whose
/// consequent field is the target, score each against the context (Jaccard
/// times confidence, or support over template size when the context is
/// empty), keep the best per value, drop zeros, order by score, support,
/// label.
pub fn brute_force_recommend(
    rules: &[AssociationRule],
    context: &[FieldValuePair],
    target: &FieldSlot,
    train_counts: &BTreeMap<String, u64>,
    m: &NaiveMappings,
) -> Vec<(String, f64, u64)> {
    let target_id = m.field_id(target);
    let ctx: BTreeSet<(String, String)> = context.iter().map(|p| m.pair_id(p)).collect();
    // value id → (score, support, label)
    let mut best: BTreeMap<String, (f64, u64, String)> = BTreeMap::new();
    for rule in rules.iter().filter(|r| m.field_id(&r.consequent.field) == target_id) {
        let score = if ctx.is_empty() {
            rule.support as f64 / train_counts[&rule.template_id] as f64
        } else {
            let ante: BTreeSet<(String, String)> = rule.antecedent.iter().map(|p| m.pair_id(p)).collect();
            let inter = ante.intersection(&ctx).count();
            let union = ante.union(&ctx).count();
            let jaccard = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            jaccard * rule.confidence
        };
        let label = rule.consequent.value.label().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let candidate = (score, rule.support, label);
        let value = m.value_id(&rule.consequent.value);
        let replace = match best.get(&value) {
            None => true,
            Some(cur) => {
                candidate.0 > cur.0
                    || (candidate.0 == cur.0 && candidate.1 > cur.1)
                    || (candidate.0 == cur.0 && candidate.1 == cur.1 && candidate.2 < cur.2)
            }
        };
        if replace {
            best.insert(value, candidate);
        }
    }
    let mut ranked: Vec<(String, f64, u64, String)> =
        best.into_iter().filter(|(_, c)| c.0 > 0.0).map(|(v, (s, n, l))| (v, s, n, l)).collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap().then(b.2.cmp(&a.2)).then_with(|| a.3.cmp(&b.3)).then_with(|| a.0.cmp(&b.0))
    });
    ranked.into_iter().map(|(v, s, n, _)| (v, s, n)).collect()
}

// ---------------------------------------------------------------------------
// Random corpora.

#[derive(Clone, Debug)]
pub struct RandomCorpus {
    pub repo: InstanceRepository,
    pub mapping_records: Vec<Vec<String>>,
    pub min_support: u64,
    pub min_confidence: f64,
}

impl RandomCorpus {
    pub fn mappings(&self) -> MappingRepository {
        MappingRepository::load_strings(&self.mapping_records).unwrap()
    }

    pub fn naive_mappings(&self) -> NaiveMappings {
        NaiveMappings::new(&self.mapping_records)
    }
}

/// Up to 8 fields with up to 6 values each and up to 50 instances over one or
/// two templates. Some values carry terms, and some of those terms are
/// declared equivalent, occasionally through chains of records.
pub fn random_corpus(seed: u64) -> RandomCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_fields = rng.random_range(1..=8);
    let n_instances = rng.random_range(1..=50);
    let templates = rng.random_range(1..=2);
    let values: Vec<usize> = (0..n_fields).map(|_| rng.random_range(1..=6)).collect();
    let annotate = rng.random_bool(0.5);

    // value atoms per field; annotated ones use one of two synonymous terms
    let atom = |rng: &mut ChaCha8Rng, f: usize, v: usize| -> ValueAtom {
        if annotate && v.is_multiple_of(2) {
            let variant = rng.random_range(0..2);
            ValueAtom::annotated(format!("v{f}_{v}"), &format!("ex:t{variant}/{f}/{v}")).unwrap()
        } else {
            // vary case and spacing to exercise label normalization
            let label = if rng.random_bool(0.2) { format!(" V{f}_{v} ") } else { format!("v{f}_{v}") };
            ValueAtom::text(label).unwrap()
        }
    };

    let mut repo = InstanceRepository::default();
    for _ in 0..n_instances {
        let template = format!("T{}", rng.random_range(0..templates));
        let mut pairs = Vec::new();
        for (f, &nv) in values.iter().enumerate() {
            if rng.random_bool(0.8) {
                let v = rng.random_range(0..nv);
                pairs.push(FieldValuePair::new(FieldSlot::text(format!("f{f}")).unwrap(), atom(&mut rng, f, v)));
            }
        }
        repo.push(TemplateInstance::new(template, pairs).unwrap());
    }

    let mut mapping_records = Vec::new();
    if annotate {
        for (f, &nv) in values.iter().enumerate() {
            for v in (0..nv).step_by(2) {
                if rng.random_bool(0.7) {
                    mapping_records.push(vec![format!("ex:t0/{f}/{v}"), format!("ex:t1/{f}/{v}")]);
                }
            }
        }
        // a chain through a third term, and an occasional cross-value merge
        if !mapping_records.is_empty() && rng.random_bool(0.3) {
            mapping_records.push(vec!["ex:t1/0/0".into(), "ex:bridge".into()]);
            mapping_records.push(vec!["ex:bridge".into(), "ex:t0/0/0".into()]);
        }
        if values[0] > 2 && rng.random_bool(0.2) {
            mapping_records.push(vec!["ex:t0/0/0".into(), "ex:t0/0/2".into()]);
        }
    }

    RandomCorpus {
        repo,
        mapping_records,
        min_support: rng.random_range(1..=5),
        min_confidence: [0.3, 0.5, 0.8][rng.random_range(0..3)],
    }
}

/// A context drawn from the corpus's own pairs plus the occasional unseen
/// value, and a target field not in it.
pub fn random_probe(corpus: &RandomCorpus, rng: &mut impl Rng) -> (Vec<FieldValuePair>, FieldSlot) {
    let pool: Vec<&FieldValuePair> = corpus.repo.iter().flat_map(|i| i.pairs()).collect();
    let mut fields: Vec<FieldSlot> = pool.iter().map(|p| p.field.clone()).collect();
    fields.sort();
    fields.dedup();
    let target = if fields.is_empty() || rng.random_bool(0.05) {
        FieldSlot::text("unseen field").unwrap()
    } else {
        fields[rng.random_range(0..fields.len())].clone()
    };
    let want = rng.random_range(0..=3usize);
    let mut context: Vec<FieldValuePair> = Vec::new();
    for _ in 0..want * 3 {
        if context.len() == want || pool.is_empty() {
            break;
        }
        let mut p = pool[rng.random_range(0..pool.len())].clone();
        if rng.random_bool(0.1) {
            p = FieldValuePair::new(p.field.clone(), ValueAtom::text("never seen").unwrap());
        }
        let field = p.field.label().to_lowercase();
        if field != target.label().to_lowercase() && context.iter().all(|c| c.field.label().to_lowercase() != field) {
            context.push(p);
        }
    }
    (context, target)
}

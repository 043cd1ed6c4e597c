//! Seeded synthetic corpora with planted field dependencies.
//!
//! Each instance draws a latent profile; every field then takes the value the
//! profile dictates, or with some probability a uniformly random one. Knowing
//! a few fields therefore narrows down the profile and with it the rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mapping::MappingRepository;
use crate::model::{FieldSlot, FieldValuePair, InstanceRepository, TemplateInstance, ValueAtom};

pub const DEFAULT_FIELDS: &[&str] = &["sex", "organism part", "cell line", "cell type", "disease", "ethnicity"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthSpec {
    pub instances: usize,
    pub template_id: String,
    /// Field labels and the number of distinct values each can take.
    pub fields: Vec<(String, usize)>,
    pub profiles: usize,
    /// Probability that a field follows its profile instead of noise.
    pub fidelity: f64,
    /// Probability that a field is left empty.
    pub missing_rate: f64,
    /// Instances keep at least this many fields.
    pub min_fields: usize,
    /// Attach `syn:` ontology terms to every field and value.
    pub annotated: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            instances: 5_000,
            template_id: "Sample".into(),
            fields: DEFAULT_FIELDS.iter().zip([2, 12, 20, 15, 12, 5]).map(|(f, n)| (f.to_string(), n)).collect(),
            profiles: 40,
            fidelity: 0.85,
            missing_rate: 0.1,
            min_fields: 3,
            annotated: false,
            seed: 7,
        }
    }
}

fn slug(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join("_")
}

fn field_slot(label: &str, annotated: bool, scheme: &str) -> FieldSlot {
    let term = annotated.then(|| format!("{scheme}:field/{}", slug(label)));
    FieldSlot::new(label, term.map(|t| crate::model::TermRef::new(t).expect("well-formed"))).expect("non-empty")
}

fn value_atom(field: &str, index: usize, annotated: bool, scheme: &str) -> ValueAtom {
    let label = format!("{} {index}", field);
    let term = annotated.then(|| format!("{scheme}:value/{}/{index}", slug(field)));
    ValueAtom::new(label, term.map(|t| crate::model::TermRef::new(t).expect("well-formed"))).expect("non-empty")
}

pub fn generate(spec: &SynthSpec) -> InstanceRepository {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let profiles = spec.profiles.max(1);
    // profile → value index per field
    let table: Vec<Vec<usize>> =
        (0..profiles).map(|_| spec.fields.iter().map(|&(_, n)| rng.random_range(0..n.max(1))).collect()).collect();
    // Skewed profile popularity, so frequent values exist for the baseline too.
    let weights: Vec<f64> = (0..profiles).map(|z| 1.0 / (z as f64 + 2.0)).collect();
    let total: f64 = weights.iter().sum();

    let slots: Vec<FieldSlot> = spec.fields.iter().map(|(f, _)| field_slot(f, spec.annotated, "syn")).collect();
    let min_fields = spec.min_fields.min(spec.fields.len());
    let mut out = InstanceRepository::default();
    for _ in 0..spec.instances {
        let mut pick = rng.random::<f64>() * total;
        let z = weights.iter().position(|w| {
            pick -= w;
            pick < 0.0
        });
        let profile = &table[z.unwrap_or(profiles - 1)];
        let mut present: Vec<bool> = (0..spec.fields.len()).map(|_| !rng.random_bool(spec.missing_rate)).collect();
        while present.iter().filter(|&&p| p).count() < min_fields {
            let i = rng.random_range(0..present.len());
            present[i] = true;
        }
        let pairs = spec
            .fields
            .iter()
            .enumerate()
            .filter(|&(i, _)| present[i])
            .map(|(i, (label, n))| {
                let v = if rng.random_bool(spec.fidelity) { profile[i] } else { rng.random_range(0..(*n).max(1)) };
                FieldValuePair::new(slots[i].clone(), value_atom(label, v, spec.annotated, "syn"))
            })
            .collect();
        out.push(TemplateInstance::new(spec.template_id.clone(), pairs).expect("distinct fields"));
    }
    out
}

/// The same data as it would look in a second template that names fields
/// differently and annotates with another ontology, plus the mappings that
/// tie the two vocabularies together. Only annotated corpora can be aligned.
pub fn relabel(repo: &InstanceRepository, template_id: &str) -> (InstanceRepository, MappingRepository) {
    let mut records: Vec<[String; 2]> = Vec::new();
    let mut swap = |term: &str| {
        let alt = format!("alt:{}", term.split_once(':').map_or(term, |(_, rest)| rest));
        records.push([term.to_string(), alt.clone()]);
        crate::model::TermRef::new(alt).expect("well-formed")
    };
    let instances: Vec<TemplateInstance> = repo
        .iter()
        .map(|inst| {
            let pairs = inst
                .pairs()
                .iter()
                .map(|p| {
                    let field =
                        FieldSlot::new(format!("source {}", p.field.label()), p.field.term().map(|t| swap(t.as_str())))
                            .expect("non-empty");
                    let value =
                        ValueAtom::new(p.value.label().to_uppercase(), p.value.term().map(|t| swap(t.as_str())))
                            .expect("non-empty");
                    FieldValuePair::new(field, value)
                })
                .collect();
            TemplateInstance::new(template_id, pairs).expect("distinct fields")
        })
        .collect();
    records.sort();
    records.dedup();
    let mappings = MappingRepository::load_strings(records).expect("pairs of terms");
    (instances.into_iter().collect(), mappings)
}

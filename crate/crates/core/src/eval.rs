//! Offline evaluation: seeded train/test split, majority-class baseline,
//! reciprocal rank over every context subset, and MRR tables by context size
//! and by target field.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::RuleIndex;
use crate::mapping::{field_key, value_key, MappingRepository, MatchKey};
use crate::mining::{mine_repository, MiningParams};
use crate::model::{
    normalize_label, Context, FieldSlot, FieldValuePair, InstanceRepository, TemplateInstance, ValueAtom,
};
use crate::recommend::{recommend, RecommendOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.85, seed: 42 }
    }
}

/// Size of the training side: `⌊n · fraction⌋`, tolerant of representation
/// error in the fraction (0.85 · 100 is 85, not 84).
pub fn train_size(n: usize, fraction: f64) -> usize {
    let exact = n as f64 * fraction;
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
        nearest as usize
    } else {
        exact.floor() as usize
    }
}

/// Seeded uniform shuffle, then a cut at [`train_size`].
pub fn split(repo: &InstanceRepository, spec: &SplitSpec) -> Result<(InstanceRepository, InstanceRepository)> {
    if repo.is_empty() {
        return Err(Error::EmptyRepository);
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParams(format!("train fraction must be in (0, 1), got {}", spec.train_fraction)));
    }
    let mut order: Vec<usize> = (0..repo.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let cut = train_size(repo.len(), spec.train_fraction);
    let pick = |ids: &[usize]| ids.iter().map(|&i| repo.instances()[i].clone()).collect();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

/// Context-blind ranking of each field's values by training frequency.
#[derive(Clone, Debug, Default)]
pub struct MajorityBaseline {
    by_field: HashMap<MatchKey, Vec<(ValueAtom, u64)>>,
}

impl MajorityBaseline {
    /// Values ranked by count, ties by normalized label. Empty for unseen fields.
    pub fn ranking(&self, field: &FieldSlot, m: &MappingRepository) -> &[(ValueAtom, u64)] {
        self.ranking_for(&field_key(field, m))
    }

    pub fn ranking_for(&self, key: &MatchKey) -> &[(ValueAtom, u64)] {
        self.by_field.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn baseline_majority(train: &InstanceRepository, m: &MappingRepository) -> MajorityBaseline {
    // value key -> (count, atom tally), per field
    type Tally<'a> = HashMap<MatchKey, (u64, HashMap<&'a ValueAtom, u64>)>;
    let mut counts: HashMap<MatchKey, Tally> = HashMap::new();
    for inst in train {
        for p in inst.pairs() {
            let entry = counts.entry(field_key(&p.field, m)).or_default().entry(value_key(&p.value, m)).or_default();
            entry.0 += 1;
            *entry.1.entry(&p.value).or_default() += 1;
        }
    }
    let by_field = counts
        .into_iter()
        .map(|(field, values)| {
            let mut ranked: Vec<(MatchKey, ValueAtom, u64)> = values
                .into_iter()
                .map(|(key, (count, atoms))| {
                    let atom = atoms
                        .into_iter()
                        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
                        .map(|(a, _)| a.clone())
                        .expect("counted at least once");
                    (key, atom, count)
                })
                .collect();
            ranked.sort_by(|a, b| {
                b.2.cmp(&a.2)
                    .then_with(|| normalize_label(a.1.label()).cmp(&normalize_label(b.1.label())))
                    .then_with(|| a.0.cmp(&b.0))
            });
            (field, ranked.into_iter().map(|(_, atom, count)| (atom, count)).collect())
        })
        .collect();
    MajorityBaseline { by_field }
}

/// 1-based position of the first entry matching `truth`.
pub fn rank_of<'a>(
    ranking: impl IntoIterator<Item = &'a ValueAtom>,
    truth: &ValueAtom,
    m: &MappingRepository,
) -> Option<usize> {
    let key = value_key(truth, m);
    ranking.into_iter().position(|v| value_key(v, m) == key).map(|p| p + 1)
}

fn rr(rank: Option<usize>) -> f64 {
    rank.map_or(0.0, |r| 1.0 / r as f64)
}

/// `1 / rank` of the truth, or 0 when it is absent.
pub fn reciprocal_rank(ranking: &[ValueAtom], truth: &ValueAtom, m: &MappingRepository) -> f64 {
    rr(rank_of(ranking, truth, m))
}

/// Which fields take part in the evaluation, as targets and as context.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvalFields {
    All,
    /// The sample-description fields used in the reference study, where
    /// present in the test data; every field otherwise.
    #[default]
    Standard,
    Labels(BTreeSet<String>),
}

const STANDARD_FIELDS: &[&str] = &[
    "sex",
    "organism part",
    "organismpart",
    "tissue",
    "cell line",
    "cell_line",
    "cellline",
    "cell type",
    "cell_type",
    "celltype",
    "disease",
    "diseasestate",
    "ethnicity",
];

impl EvalFields {
    pub fn labels<I: IntoIterator<Item = S>, S: AsRef<str>>(labels: I) -> Self {
        EvalFields::Labels(labels.into_iter().map(|s| normalize_label(s.as_ref())).collect())
    }

    pub fn contains(&self, field: &FieldSlot) -> bool {
        match self {
            EvalFields::All => true,
            EvalFields::Standard => STANDARD_FIELDS.contains(&normalize_label(field.label()).as_str()),
            EvalFields::Labels(set) => set.contains(&normalize_label(field.label())),
        }
    }

    /// `Standard` collapses to `All` when no test field is a standard one.
    fn resolve(&self, test: &InstanceRepository) -> EvalFields {
        match self {
            EvalFields::Standard if !test.iter().flat_map(|i| i.pairs()).any(|p| self.contains(&p.field)) => {
                EvalFields::All
            }
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepContext {
    pub context: Context,
    pub size: usize,
    /// Bit `i` set when the `i`-th usable non-target field is in the context.
    pub mask: u64,
}

/// One context per subset of the instance's other evaluation fields, from
/// the empty set up to all of them, by size and then in combination order.
pub fn context_sweep(
    instance: &TemplateInstance,
    target: &FieldSlot,
    eval_fields: &EvalFields,
    m: &MappingRepository,
) -> Result<Vec<SweepContext>> {
    context_sweep_bounded(instance, target, eval_fields, None, m)
}

pub fn context_sweep_bounded(
    instance: &TemplateInstance,
    target: &FieldSlot,
    eval_fields: &EvalFields,
    max_size: Option<usize>,
    m: &MappingRepository,
) -> Result<Vec<SweepContext>> {
    let target_key = field_key(target, m);
    if instance.value_for(target, m).is_none() {
        return Err(Error::TargetMissing(target.label().to_string()));
    }
    let others: Vec<&FieldValuePair> = instance
        .pairs()
        .iter()
        .filter(|p| eval_fields.contains(&p.field) && field_key(&p.field, m) != target_key)
        .collect();
    if others.len() > 63 {
        return Err(Error::InvalidParams(format!("{} context fields cannot be swept exhaustively", others.len())));
    }
    let top = max_size.map_or(others.len(), |s| s.min(others.len()));
    let mut out = Vec::new();
    for size in 0..=top {
        for combo in (0..others.len()).combinations(size) {
            let mask = combo.iter().fold(0u64, |acc, &i| acc | (1 << i));
            let pairs = combo.iter().map(|&i| others[i].clone()).collect();
            out.push(SweepContext { context: Context::new(pairs)?, size, mask });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Recommender,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Recommender => "recommender",
        }
    }
}

/// One row of the per-execution log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Execution {
    /// Position of the instance in the test set.
    pub instance: usize,
    pub target: String,
    pub context_mask: u64,
    pub context_size: usize,
    pub context: Vec<String>,
    pub method: Method,
    /// `None` when the true value was not suggested.
    pub rank: Option<usize>,
}

impl Execution {
    pub fn reciprocal_rank(&self) -> f64 {
        rr(self.rank)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MrrCell {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub context_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
    pub mrr: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalOptions {
    pub eval_fields: EvalFields,
    /// Largest context swept; unbounded when absent.
    pub max_context_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalConfigEcho {
    pub min_support: u64,
    pub min_confidence: f64,
    pub max_antecedent_size: Option<usize>,
    pub eval_fields: EvalFields,
    pub max_context_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub overall: Vec<MrrCell>,
    pub by_context_size: Vec<MrrCell>,
    pub by_field: Vec<MrrCell>,
    pub train_instances: usize,
    pub test_instances: usize,
    pub rules: usize,
    pub executions: usize,
    pub config: EvalConfigEcho,
}

impl EvalReport {
    pub fn mrr_at(&self, method: Method, context_size: usize) -> Option<f64> {
        self.by_context_size.iter().find(|c| c.method == method && c.context_size == Some(context_size)).map(|c| c.mrr)
    }

    pub fn mrr_for_field(&self, method: Method, field: &str) -> Option<f64> {
        self.by_field.iter().find(|c| c.method == method && c.field.as_deref() == Some(field)).map(|c| c.mrr)
    }

    pub fn overall_mrr(&self, method: Method) -> Option<f64> {
        self.overall.iter().find(|c| c.method == method).map(|c| c.mrr)
    }

    /// Flat `method,contextSize,field,mrr,n` rows; blank cells aggregate over
    /// that dimension.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "contextSize", "field", "mrr", "n"])?;
        for c in self.overall.iter().chain(&self.by_context_size).chain(&self.by_field) {
            let size = c.context_size.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                c.method.as_str(),
                &size,
                c.field.as_deref().unwrap_or(""),
                &c.mrr.to_string(),
                &c.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// MRR cells recomputed from a log; sums run in log order, so the same log
/// always yields bit-identical values.
pub fn aggregate(executions: &[Execution]) -> (Vec<MrrCell>, Vec<MrrCell>, Vec<MrrCell>) {
    let mut overall: BTreeMap<Method, (f64, usize)> = BTreeMap::new();
    let mut by_size: BTreeMap<(Method, usize), (f64, usize)> = BTreeMap::new();
    let mut by_field: BTreeMap<(Method, String), (f64, usize)> = BTreeMap::new();
    for e in executions {
        let r = e.reciprocal_rank();
        for acc in [
            overall.entry(e.method).or_default(),
            by_size.entry((e.method, e.context_size)).or_default(),
            by_field.entry((e.method, e.target.clone())).or_default(),
        ] {
            acc.0 += r;
            acc.1 += 1;
        }
    }
    let cell = |method, context_size, field, (sum, n): (f64, usize)| MrrCell {
        method,
        context_size,
        field,
        mrr: sum / n as f64,
        n,
    };
    (
        overall.into_iter().map(|(m, acc)| cell(m, None, None, acc)).collect(),
        by_size.into_iter().map(|((m, s), acc)| cell(m, Some(s), None, acc)).collect(),
        by_field.into_iter().map(|((m, f), acc)| cell(m, None, Some(f), acc)).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: EvalReport,
    pub executions: Vec<Execution>,
}

impl Evaluation {
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.executions {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Mines `train`, then for every test instance, every evaluation field it
/// fills and every sweep context, records the rank of the true value under
/// both the recommender and the majority baseline.
pub fn evaluate(
    train: &InstanceRepository,
    test: &InstanceRepository,
    params: &MiningParams,
    m: &MappingRepository,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    let mined = mine_repository(train, params, m)?;
    let rule_count = mined.rules.len();
    let index = RuleIndex::build(mined.rules, m.clone()).with_train_counts(train.template_counts());
    let baseline = baseline_majority(train, m);
    let fields = opts.eval_fields.resolve(test);
    let no_opts = RecommendOptions::default();

    let per_instance = test
        .instances()
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut log = Vec::new();
            for truth in inst.pairs().iter().filter(|p| fields.contains(&p.field)) {
                let target = &truth.field;
                let base_rank = rank_of(baseline.ranking(target, m).iter().map(|(v, _)| v), &truth.value, m);
                for sweep in context_sweep_bounded(inst, target, &fields, opts.max_context_size, m)? {
                    let recs = recommend(&sweep.context, target, &index, &no_opts)?;
                    let rec_rank = rank_of(recs.iter().map(|r| &r.value), &truth.value, m);
                    let context: Vec<String> = sweep.context.pairs().iter().map(|p| p.to_string()).collect();
                    for (method, rank) in [(Method::Recommender, rec_rank), (Method::Baseline, base_rank)] {
                        log.push(Execution {
                            instance: i,
                            target: target.label().to_string(),
                            context_mask: sweep.mask,
                            context_size: sweep.size,
                            context: context.clone(),
                            method,
                            rank,
                        });
                    }
                }
            }
            Ok(log)
        })
        .collect::<Result<Vec<_>>>()?;
    let executions: Vec<Execution> = per_instance.into_iter().flatten().collect();

    let (overall, by_context_size, by_field) = aggregate(&executions);
    let report = EvalReport {
        overall,
        by_context_size,
        by_field,
        train_instances: train.len(),
        test_instances: test.len(),
        rules: rule_count,
        executions: executions.len(),
        config: EvalConfigEcho {
            min_support: params.min_support,
            min_confidence: params.min_confidence,
            max_antecedent_size: params.max_antecedent_size,
            eval_fields: fields,
            max_context_size: opts.max_context_size,
        },
    };
    Ok(Evaluation { report, executions })
}

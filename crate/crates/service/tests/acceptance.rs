//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valrec::engine::{Engine, EngineState};
use valrec::wire::RecommendResponse;
use valrec_core::eval::{context_sweep, evaluate, reciprocal_rank, split, EvalFields, EvalOptions, Method, SplitSpec};
use valrec_core::index::{jaccard, RuleIndex};
use valrec_core::io::{read_instances, save_instances, Manifest, ManifestParams, ManifestTemplate, RuleStore};
use valrec_core::mapping::{pair_key, MappingRepository};
use valrec_core::mining::{mine_repository, mine_rules, AssociationRule, MiningParams};
use valrec_core::model::{Context, FieldSlot, FieldValuePair, TemplateInstance, ValueAtom};
use valrec_core::recommend::{recommend, RecommendOptions};
use valrec_core::synth::{generate, SynthSpec};
use valrec_testkit::{
    brute_force_recommend, brute_force_rules, cross_template, random_corpus, random_probe, six_experiments,
    sorted_shapes, EXPECTED_RULES, MENINGITIS_TISSUE_SCORES,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(f: &str, v: &str) -> FieldValuePair {
    FieldValuePair::text(f, v).unwrap()
}

fn params(min_support: u64, min_confidence: f64) -> MiningParams {
    MiningParams { min_support, min_confidence, max_antecedent_size: None }
}

fn experiment_rules() -> Vec<AssociationRule> {
    mine_rules(&six_experiments(), "Experiment", &params(1, 0.6), &MappingRepository::default()).unwrap()
}

fn find_rule<'a>(
    rules: &'a [AssociationRule],
    ante: &[(&str, &str)],
    cons: (&str, &str),
) -> Option<&'a AssociationRule> {
    let m = MappingRepository::default();
    let want: BTreeSet<_> = ante.iter().map(|(f, v)| pair_key(&p(f, v), &m)).collect();
    let want_c = pair_key(&p(cons.0, cons.1), &m);
    rules.iter().find(|r| {
        r.antecedent.iter().map(|x| pair_key(x, &m)).collect::<BTreeSet<_>>() == want
            && pair_key(&r.consequent, &m) == want_c
    })
}

fn p1_rule_listing() -> Outcome {
    let started = Instant::now();
    let rules = experiment_rules();
    let elapsed = started.elapsed();
    for (ante, cons, support, num, den) in EXPECTED_RULES {
        let r = find_rule(&rules, ante, *cons).ok_or_else(|| format!("missing {ante:?} -> {cons:?}"))?;
        ensure(r.support == *support, || format!("{ante:?} -> {cons:?}: support {} != {support}", r.support))?;
        let want = *num as f64 / *den as f64;
        ensure(r.confidence == want, || format!("{ante:?} -> {cons:?}: confidence {} != {num}/{den}", r.confidence))?;
    }
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} listed rules exact among {} mined, {:?}", EXPECTED_RULES.len(), rules.len(), elapsed))
}

fn p2_selection_scores() -> Outcome {
    let idx = RuleIndex::build(experiment_rules(), MappingRepository::default());
    let selected = idx.select_ids(&FieldSlot::text("tissue").unwrap());
    ensure(selected.len() == 8, || format!("{} rules selected", selected.len()))?;
    let probe = idx.probe(&Context::new(vec![p("disease", "meningitis")]).unwrap());
    let mut scores = Vec::new();
    for &(row, want) in MENINGITIS_TISSUE_SCORES {
        let (ante, cons, ..) = EXPECTED_RULES[row];
        let r = find_rule(idx.rules(), ante, cons).ok_or("selected rule missing")?;
        let id = idx.rules().iter().position(|x| std::ptr::eq(x, r)).unwrap();
        ensure(selected.contains(&id), || format!("rule {row} not selected"))?;
        let got = idx.matching_score(id, &probe);
        ensure(got == want, || format!("rule {row}: {got} != {want}"))?;
        scores.push(got);
    }
    Ok(format!("scores {scores:?}"))
}

fn p3_single_recommendation() -> Outcome {
    let idx = RuleIndex::build(experiment_rules(), MappingRepository::default())
        .with_train_counts(six_experiments().template_counts());
    let c = Context::new(vec![p("disease", "meningitis")]).unwrap();
    let recs = recommend(&c, &FieldSlot::text("tissue").unwrap(), &idx, &RecommendOptions::default())
        .map_err(|e| e.to_string())?;
    let got: Vec<_> = recs.iter().map(|r| (r.value.label().to_string(), r.score)).collect();
    ensure(got == [("brain".to_string(), 1.0)], || format!("{got:?}"))?;
    Ok(format!("{} {}%", got[0].0, recs[0].percent()))
}

fn p4_cross_template() -> Outcome {
    let fx = cross_template();
    let rules = mine_rules(&fx.experiment, "Experiment", &params(1, 0.3), &fx.mappings).map_err(|e| e.to_string())?;
    let idx = RuleIndex::build(rules, fx.mappings.clone()).with_train_counts(fx.experiment.template_counts());
    let c = Context::new(vec![FieldValuePair::new(fx.assay_cell_type.clone(), fx.assay_cell_value.clone())]).unwrap();
    let recs = recommend(&c, &fx.assay_tissue, &idx, &RecommendOptions::default()).map_err(|e| e.to_string())?;
    let top = recs.first().ok_or("no recommendations")?;
    ensure(top.value.term().map(|t| t.as_str()) == Some(fx.pancreas.as_str()), || format!("top is {:?}", top.value))?;
    Ok(format!("rank 1 {} ({}) score {}", top.value.label(), fx.pancreas, top.score))
}

fn p5_mining_oracle() -> Outcome {
    let started = Instant::now();
    let mut rules = 0;
    for seed in 0..200 {
        let corpus = random_corpus(seed);
        let naive = corpus.naive_mappings();
        let mined =
            mine_repository(&corpus.repo, &params(corpus.min_support, corpus.min_confidence), &corpus.mappings())
                .map_err(|e| e.to_string())?;
        let want = brute_force_rules(&corpus.repo, corpus.min_support, corpus.min_confidence, None, &naive);
        let got = sorted_shapes(&mined.rules, &naive);
        ensure(got == want, || format!("seed {seed}: {} mined vs {} enumerated", got.len(), want.len()))?;
        rules += got.len();
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("200 repositories, {rules} rules identical, {elapsed:?}"))
}

fn p6_recommend_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut probes = 0;
    let mut non_empty = 0;
    for seed in 0..200 {
        let corpus = random_corpus(seed);
        let naive = corpus.naive_mappings();
        let m = corpus.mappings();
        let mined = mine_repository(&corpus.repo, &params(corpus.min_support, corpus.min_confidence), &m).unwrap();
        let counts = corpus.repo.template_counts();
        let idx = RuleIndex::build(mined.rules.clone(), m).with_train_counts(counts.clone());
        for _ in 0..5 {
            let (pairs, target) = random_probe(&corpus, &mut rng);
            let c = Context::new(pairs.clone()).unwrap();
            let got: Vec<(String, f64, u64)> = recommend(&c, &target, &idx, &RecommendOptions::default())
                .map_err(|e| e.to_string())?
                .iter()
                .map(|r| (naive.value_id(&r.value), r.score, r.support))
                .collect();
            let want = brute_force_recommend(&mined.rules, &pairs, &target, &counts, &naive);
            ensure(got == want, || format!("seed {seed}: {got:?} != {want:?}"))?;
            probes += 1;
            non_empty += usize::from(!got.is_empty());
        }
    }
    ensure(probes == 1000, || format!("{probes} probes"))?;
    Ok(format!("{probes} probes identical ({non_empty} non-empty)"))
}

fn p7_jaccard() -> Outcome {
    let records: Vec<[String; 2]> =
        (0..4).flat_map(|f| (0..3).map(move |v| [format!("ex:a/{f}/{v}"), format!("ex:b/{f}/{v}")])).collect();
    let m = MappingRepository::load_strings(records).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draw = |rng: &mut ChaCha8Rng, scheme: &str| -> Vec<FieldValuePair> {
        let n = rng.random_range(0..6);
        (0..n)
            .map(|_| {
                let (f, v) = (rng.random_range(0..4), rng.random_range(0..3));
                FieldValuePair::annotated(
                    &format!("f{f}"),
                    &format!("ex:f{f}"),
                    &format!("v{v}"),
                    &format!("ex:{scheme}/{f}/{v}"),
                )
                .unwrap()
            })
            .collect()
    };
    for case in 0..2000 {
        let (a, b) = (draw(&mut rng, "a"), draw(&mut rng, "a"));
        let keys = |ps: &[FieldValuePair]| ps.iter().map(|x| pair_key(x, &m)).collect::<BTreeSet<_>>();
        let (ka, kb) = (keys(&a), keys(&b));
        let s = jaccard(&ka, &kb);
        ensure((0.0..=1.0).contains(&s), || format!("case {case}: {s} out of range"))?;
        ensure((s == 1.0) == (ka == kb), || format!("case {case}: score {s}, equal {}", ka == kb))?;
        let disjoint = ka.is_disjoint(&kb) && !(ka.is_empty() && kb.is_empty());
        ensure((s == 0.0) == disjoint, || format!("case {case}: score {s}, disjoint {disjoint}"))?;
        let swapped: Vec<FieldValuePair> = a
            .iter()
            .map(|x| {
                let alt = x.value.term().unwrap().as_str().replace("ex:a/", "ex:b/");
                FieldValuePair::new(x.field.clone(), ValueAtom::annotated("relabelled", &alt).unwrap())
            })
            .collect();
        ensure(jaccard(&keys(&swapped), &kb) == s, || format!("case {case}: substitution changed the score"))?;
    }
    Ok("2000 random pairs of sets".into())
}

fn p8_harness_arithmetic() -> Outcome {
    let m = MappingRepository::default();
    let inst = TemplateInstance::new(
        "Sample",
        vec![
            p("sex", "male"),
            p("organism part", "prostate"),
            p("cell line", "PC-3"),
            p("cell type", "prostate cell"),
            p("disease", "prostate cancer"),
            p("ethnicity", "Caucasian"),
        ],
    )
    .unwrap();
    let sweep =
        context_sweep(&inst, &FieldSlot::text("disease").unwrap(), &EvalFields::All, &m).map_err(|e| e.to_string())?;
    let mut by_size = [0usize; 6];
    for s in &sweep {
        by_size[s.size] += 1;
    }
    ensure(sweep.len() == 32 && by_size == [1, 5, 10, 10, 5, 1], || {
        format!("{} executions, {by_size:?}", sweep.len())
    })?;
    let ranking: Vec<ValueAtom> = ["a", "b", "c"].iter().map(|s| ValueAtom::text(*s).unwrap()).collect();
    let rr: Vec<f64> = ranking.iter().map(|t| reciprocal_rank(&ranking, t, &m)).collect();
    ensure(rr == [1.0, 0.5, 1.0 / 3.0], || format!("{rr:?}"))?;
    Ok(format!("32 executions {by_size:?}, RR {rr:?}"))
}

fn p9_mrr_trend() -> Outcome {
    let started = Instant::now();
    let run = || {
        let repo = generate(&SynthSpec::default());
        let (train, test) = split(&repo, &SplitSpec::default()).unwrap();
        evaluate(&train, &test, &MiningParams::default(), &MappingRepository::default(), &EvalOptions::default())
            .unwrap()
    };
    let first = run();
    let elapsed = started.elapsed();
    let report = &first.report;
    let rec: Vec<f64> = (0..=3).map(|k| report.mrr_at(Method::Recommender, k).unwrap_or(f64::NAN)).collect();
    ensure(rec.windows(2).all(|w| w[1] >= w[0]), || format!("recommender MRR by size {rec:?}"))?;
    let mut gaps = Vec::new();
    for cell in report.by_context_size.iter().filter(|c| c.method == Method::Recommender && c.context_size >= Some(2)) {
        let k = cell.context_size.unwrap();
        let base = report.mrr_at(Method::Baseline, k).unwrap();
        gaps.push((k, cell.mrr - base));
        ensure(cell.mrr - base >= 0.15, || format!("size {k}: {:.4} vs baseline {base:.4}", cell.mrr))?;
    }
    ensure(!gaps.is_empty(), || "no contexts of size 2 or more".into())?;
    let second = run();
    ensure(second.report == first.report && second.executions == first.executions, || "second run differs".into())?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    let rec = rec.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let gaps = gaps.iter().map(|(k, g)| format!("{k}:+{g:.3}")).collect::<Vec<_>>().join(" ");
    Ok(format!("MRR sizes 0-3 [{rec}], gain over baseline [{gaps}], {elapsed:.1?} per run"))
}

fn p10_scale() -> Outcome {
    let repo = generate(&SynthSpec { instances: 50_000, seed: 10, ..SynthSpec::default() });
    let params = MiningParams::default();
    let started = Instant::now();
    let mined = mine_repository(&repo, &params, &MappingRepository::default()).map_err(|e| e.to_string())?;
    let mining = started.elapsed();
    ensure(mining < Duration::from_secs(300), || format!("mining took {mining:?}"))?;
    let rule_count = mined.rules.len();
    let manifest = Manifest {
        params: ManifestParams::from(&params),
        templates: mined
            .templates
            .iter()
            .map(|(t, s)| {
                (
                    t.clone(),
                    ManifestTemplate {
                        train_count: s.instances,
                        frequent_itemsets: s.frequent_itemsets,
                        rules: s.rules,
                    },
                )
            })
            .collect(),
        total_rules: rule_count,
        wall_time_seconds: mining.as_secs_f64(),
    };
    let engine = Arc::new(Engine::new(EngineState::new(mined.rules, MappingRepository::default(), Some(manifest))));

    // Request bodies built from real instances: a random subset of the other
    // fields as context, one field as target.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bodies: Vec<String> = (0..1000)
        .map(|_| {
            let inst = &repo.instances()[rng.random_range(0..repo.len())];
            let pairs = inst.pairs();
            let t = rng.random_range(0..pairs.len());
            let context: Vec<_> = pairs
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != t && rng.random_bool(0.5))
                .map(|(_, x)| serde_json::json!({"fieldLabel": x.field.label(), "valueLabel": x.value.label()}))
                .collect();
            serde_json::json!({"targetField": {"fieldLabel": pairs[t].field.label()}, "context": context}).to_string()
        })
        .collect();

    let runtime = tokio::runtime::Runtime::new().unwrap();
    let latencies = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}/recommend", listener.local_addr().unwrap());
        tokio::spawn(async move { axum::serve(listener, valrec::server::router(engine)).await.unwrap() });
        let client = reqwest::Client::new();
        let mut latencies = Vec::with_capacity(bodies.len());
        for body in bodies {
            let t = Instant::now();
            let resp = client.post(&url).header("content-type", "application/json").body(body).send().await?;
            let status = resp.status();
            let parsed: RecommendResponse = resp.json().await?;
            latencies.push(t.elapsed());
            if !status.is_success() {
                return Ok::<_, reqwest::Error>(Err(format!("status {status}")));
            }
            let _ = parsed;
        }
        Ok(Ok(latencies))
    });
    let mut latencies = latencies.map_err(|e| e.to_string())??;
    latencies.sort();
    let p95 = latencies[latencies.len() * 95 / 100];
    let p50 = latencies[latencies.len() / 2];
    ensure(p95 < Duration::from_millis(50), || format!("p95 {p95:?}"))?;
    Ok(format!("50000 x 6 mined in {mining:.1?} ({rule_count} rules); /recommend p50 {p50:.2?} p95 {p95:.2?}"))
}

fn rankings(idx: &RuleIndex, probes: &[(Context, FieldSlot)]) -> Vec<u8> {
    let mut out = Vec::new();
    for (c, t) in probes {
        for r in recommend(c, t, idx, &RecommendOptions::default()).unwrap() {
            let term = r.value.term().map(|t| t.as_str().to_string());
            out.extend(
                format!("{}\t{:?}\t{:?}\t{}\t{}\n", r.rank, r.value.label(), term, r.score.to_bits(), r.support)
                    .bytes(),
            );
        }
        out.push(b'\n');
    }
    out
}

fn p11_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = cross_template();
    let mut repo = generate(&SynthSpec { instances: 2_000, annotated: true, seed: 11, ..SynthSpec::default() });
    for inst in six_experiments().iter().chain(fx.experiment.iter()) {
        repo.push(inst.clone());
    }
    let m = fx.mappings.clone();

    // instances: emit, ingest, emit again
    let first = dir.path().join("a.jsonl");
    save_instances(&first, &repo).map_err(|e| e.to_string())?;
    let ingested = read_instances(&first).map_err(|e| e.to_string())?.repository;
    ensure(ingested == repo, || "ingested repository differs".into())?;
    let second = dir.path().join("b.jsonl");
    save_instances(&second, &ingested).map_err(|e| e.to_string())?;
    ensure(std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap(), || "re-emitted file differs".into())?;

    // rule store: rankings before and after save/load
    let mined = mine_repository(&ingested, &params(3, 0.3), &m).map_err(|e| e.to_string())?;
    let counts: BTreeMap<String, u64> = ingested.template_counts();
    let manifest = Manifest {
        params: ManifestParams::from(&params(3, 0.3)),
        templates: mined
            .templates
            .iter()
            .map(|(t, s)| {
                (
                    t.clone(),
                    ManifestTemplate { train_count: counts[t], frequent_itemsets: s.frequent_itemsets, rules: s.rules },
                )
            })
            .collect(),
        total_rules: mined.rules.len(),
        wall_time_seconds: 0.0,
    };
    let store = dir.path().join("store");
    RuleStore::save(&store, &mined.rules, &manifest, &m).map_err(|e| e.to_string())?;
    let loaded = RuleStore::load(&store).map_err(|e| e.to_string())?;
    if let Some((a, b)) = loaded.rules.iter().zip(&mined.rules).find(|(a, b)| a != b) {
        return Err(format!("loaded rules differ: {a:?} vs {b:?}"));
    }
    ensure(loaded.rules.len() == mined.rules.len(), || "loaded rule count differs".into())?;
    ensure(loaded.manifest.as_ref() == Some(&manifest), || "manifest differs".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut probes = Vec::new();
    for _ in 0..300 {
        let inst = &ingested.instances()[rng.random_range(0..ingested.len())];
        let pairs = inst.pairs();
        let t = rng.random_range(0..pairs.len());
        let ctx: Vec<_> =
            pairs.iter().enumerate().filter(|&(i, _)| i != t && rng.random_bool(0.5)).map(|(_, x)| x.clone()).collect();
        probes.push((Context::new(ctx).unwrap(), pairs[t].field.clone()));
    }
    probes.push((
        Context::new(vec![FieldValuePair::new(fx.assay_cell_type.clone(), fx.assay_cell_value.clone())]).unwrap(),
        fx.assay_tissue.clone(),
    ));
    let before = rankings(&RuleIndex::build(mined.rules, m.clone()).with_train_counts(counts.clone()), &probes);
    let after = rankings(
        &RuleIndex::build(loaded.rules, m).with_train_counts(loaded.manifest.unwrap().train_counts()),
        &probes,
    );
    ensure(before == after, || "rankings differ after reload".into())?;
    Ok(format!(
        "{} instances byte-identical; {} rules, {} probes with identical rankings",
        repo.len(),
        manifest.total_rules,
        probes.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("P1", "rule listing from the six experiments", p1_rule_listing),
        ("P2", "selected rules and context-matching scores", p2_selection_scores),
        ("P3", "meningitis context recommends brain alone", p3_single_recommendation),
        ("P4", "cross-template pancreas recommendation", p4_cross_template),
        ("P5", "Apriori equals brute-force enumeration", p5_mining_oracle),
        ("P6", "recommend equals direct scoring formulas", p6_recommend_oracle),
        ("P7", "Jaccard range, identity, disjointness, substitution", p7_jaccard),
        ("P8", "context sweep sizes and reciprocal ranks", p8_harness_arithmetic),
        ("P9", "synthetic MRR trend against the baseline", p9_mrr_trend),
        ("P10", "scale: 50k instances mined, /recommend p95", p10_scale),
        ("P11", "rule store and instance file round trips", p11_round_trips),
    ];
    // Failures are reported on their line; keep panic noise out of it.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:<4} {name} | {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:<4} {name} | {why} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

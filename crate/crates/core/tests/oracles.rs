use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use valrec_core::index::{jaccard, RuleIndex};
use valrec_core::mapping::{pair_key, MappingRepository};
use valrec_core::mining::{mine_repository, MiningParams};
use valrec_core::model::{Context, FieldValuePair};
use valrec_core::recommend::{recommend, RecommendOptions};
use valrec_testkit::{brute_force_recommend, brute_force_rules, random_corpus, random_probe, sorted_shapes};

fn params(c: &valrec_testkit::RandomCorpus, max_antecedent: Option<usize>) -> MiningParams {
    MiningParams { min_support: c.min_support, min_confidence: c.min_confidence, max_antecedent_size: max_antecedent }
}

#[test]
fn apriori_matches_subset_enumeration() {
    for seed in 0..200 {
        let corpus = random_corpus(seed);
        let naive = corpus.naive_mappings();
        let mined = mine_repository(&corpus.repo, &params(&corpus, None), &corpus.mappings()).unwrap();
        let want = brute_force_rules(&corpus.repo, corpus.min_support, corpus.min_confidence, None, &naive);
        assert_eq!(sorted_shapes(&mined.rules, &naive), want, "seed {seed}");
    }
}

#[test]
fn antecedent_cap_matches_subset_enumeration() {
    for seed in 0..60 {
        let corpus = random_corpus(seed);
        let naive = corpus.naive_mappings();
        let mined = mine_repository(&corpus.repo, &params(&corpus, Some(2)), &corpus.mappings()).unwrap();
        let want = brute_force_rules(&corpus.repo, corpus.min_support, corpus.min_confidence, Some(2), &naive);
        assert_eq!(sorted_shapes(&mined.rules, &naive), want, "seed {seed}");
    }
}

#[test]
fn mining_ignores_instance_order() {
    for seed in 0..30 {
        let corpus = random_corpus(seed);
        let m = corpus.mappings();
        let forward = mine_repository(&corpus.repo, &params(&corpus, None), &m).unwrap().rules;
        let reversed: valrec_core::model::InstanceRepository = corpus.repo.iter().rev().cloned().collect();
        let backward = mine_repository(&reversed, &params(&corpus, None), &m).unwrap().rules;
        let naive = corpus.naive_mappings();
        assert_eq!(sorted_shapes(&forward, &naive), sorted_shapes(&backward, &naive));
    }
}

#[test]
fn recommendations_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..200 {
        let corpus = random_corpus(seed);
        let naive = corpus.naive_mappings();
        let m = corpus.mappings();
        let mined = mine_repository(&corpus.repo, &params(&corpus, None), &m).unwrap();
        let counts = corpus.repo.template_counts();
        let idx = RuleIndex::build(mined.rules.clone(), m).with_train_counts(counts.clone());
        for _ in 0..5 {
            let (pairs, target) = random_probe(&corpus, &mut rng);
            let c = Context::new(pairs.clone()).unwrap();
            let got: Vec<(String, f64, u64)> = recommend(&c, &target, &idx, &RecommendOptions::default())
                .unwrap()
                .into_iter()
                .map(|r| (naive.value_id(&r.value), r.score, r.support))
                .collect();
            let want = brute_force_recommend(&mined.rules, &pairs, &target, &counts, &naive);
            assert_eq!(got, want, "seed {seed}, context {pairs:?}, target {target:?}");
        }
    }
}

fn pair_strategy() -> impl Strategy<Value = FieldValuePair> {
    (0..4u8, 0..3u8, prop::bool::ANY).prop_map(|(f, v, annotated)| {
        if annotated {
            FieldValuePair::annotated(&format!("f{f}"), &format!("ex:f{f}"), &format!("v{v}"), &format!("ex:a/{f}/{v}"))
                .unwrap()
        } else {
            FieldValuePair::text(&format!("f{f}"), &format!("v{v}")).unwrap()
        }
    })
}

fn substitute(p: &FieldValuePair) -> FieldValuePair {
    match p.value.term() {
        Some(t) => {
            let alt = t.as_str().replace("ex:a/", "ex:b/");
            FieldValuePair::annotated(p.field.label(), p.field.term().unwrap().as_str(), "other label", &alt).unwrap()
        }
        None => p.clone(),
    }
}

proptest! {
    #[test]
    fn jaccard_properties(a in prop::collection::vec(pair_strategy(), 0..6), b in prop::collection::vec(pair_strategy(), 0..6)) {
        let records: Vec<[String; 2]> = (0..4)
            .flat_map(|f| (0..3).map(move |v| [format!("ex:a/{f}/{v}"), format!("ex:b/{f}/{v}")]))
            .collect();
        let m = MappingRepository::load_strings(records).unwrap();
        let keys = |ps: &[FieldValuePair]| ps.iter().map(|p| pair_key(p, &m)).collect::<BTreeSet<_>>();
        let (ka, kb) = (keys(&a), keys(&b));
        let s = jaccard(&ka, &kb);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s == 1.0, ka == kb);
        prop_assert_eq!(s == 0.0, ka.is_disjoint(&kb) && !(ka.is_empty() && kb.is_empty()));
        prop_assert_eq!(s, jaccard(&kb, &ka));

        let swapped: Vec<FieldValuePair> = a.iter().map(substitute).collect();
        prop_assert_eq!(jaccard(&keys(&swapped), &kb), s);
    }
}

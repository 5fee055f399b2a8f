//! Property-based tests for the selection pipeline invariants.

use proptest::prelude::*;

use ragsift::document::{
    make_weights, relevance_filter, RelevanceVerdict, RetrievalSet, Role, WeightScheme,
};
use ragsift::judge::{build_graph, JudgeModel};
use ragsift::mis::{mis_oracle, select_mis};
use ragsift::rng::substream;

fn arb_scheme(k: usize) -> BoxedStrategy<WeightScheme> {
    prop_oneof![
        Just(WeightScheme::Uniform),
        Just(WeightScheme::Linear),
        (0.01f64..0.99).prop_map(|gamma| WeightScheme::Exponential { gamma }),
        prop::collection::vec(0.0f64..10.0, k..=k).prop_map(|mut scores| {
            scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if scores.iter().all(|s| *s == 0.0) {
                scores[0] = 1.0;
            }
            WeightScheme::Explicit { scores }
        }),
    ]
    .boxed()
}

fn arb_weight_case() -> impl Strategy<Value = (usize, WeightScheme)> {
    // Linear needs k >= 2 to carry any weight.
    (2usize..10_000).prop_flat_map(|k| (Just(k), arb_scheme(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_form_a_non_increasing_distribution((k, scheme) in arb_weight_case()) {
        let weights = make_weights(&scheme, k).unwrap();
        prop_assert_eq!(weights.len(), k);
        let total: f64 = weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "sum {} for {}", total, scheme);
        for pair in weights.windows(2) {
            prop_assert!(pair[0] >= pair[1] - 1e-15);
        }
        prop_assert!(weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn filter_is_idempotent_and_preserves_survivors(
        roles in prop::collection::vec(
            prop_oneof![
                Just(Role::BenignRelevant),
                Just(Role::Malicious),
                Just(Role::Irrelevant)
            ],
            1..40,
        ),
        verdict_bits in prop::collection::vec(any::<bool>(), 40),
    ) {
        let set = RetrievalSet::from_roles(&roles, &WeightScheme::Uniform).unwrap();
        let verdicts: Vec<RelevanceVerdict> = verdict_bits
            .iter()
            .take(roles.len())
            .map(|&keep| if keep { RelevanceVerdict::Keep } else { RelevanceVerdict::Drop })
            .collect();
        let Ok(once) = relevance_filter(&set, &verdicts) else {
            return Ok(()); // everything dropped: abstention, nothing to check
        };
        for doc in once.documents() {
            let original = &set.documents()[doc.index as usize - 1];
            prop_assert_eq!(doc, original);
        }
        let keep_all = vec![RelevanceVerdict::Keep; once.k()];
        let twice = relevance_filter(&once, &keep_all).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn selection_matches_oracle(
        n in 1u32..=10,
        edge_bits in prop::collection::vec(any::<bool>(), 45),
        density in 0.0f64..1.0,
    ) {
        let mut edges = Vec::new();
        let mut bit = 0;
        for a in 1..=n {
            for b in a + 1..=n {
                // Thin the raw bits by density so sparse and dense graphs both appear.
                if edge_bits[bit] && (bit as f64 / 45.0) < density {
                    edges.push((a, b));
                }
                bit += 1;
            }
        }
        let graph = ragsift::mis::ContradictionGraph::new((1..=n).collect(), &edges).unwrap();
        let fast = select_mis(&graph).unwrap();
        let slow = mis_oracle(&graph).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn perfect_judge_recovers_exactly_the_benign_set(
        k in 2u32..=16,
        placement_seed in any::<u64>(),
    ) {
        // Any k' < k/2 malicious positions; with a perfect judge the chosen
        // set must be exactly the benign documents.
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = substream(placement_seed, &[1]);
        let k_malicious = rng.gen_range(0..k.div_ceil(2));
        let mut positions: Vec<u32> = (1..=k).collect();
        positions.shuffle(&mut rng);
        let malicious: Vec<u32> = positions[..k_malicious as usize].to_vec();

        let roles: Vec<Role> = (1..=k)
            .map(|i| if malicious.contains(&i) { Role::Malicious } else { Role::BenignRelevant })
            .collect();
        let set = RetrievalSet::from_roles(&roles, &WeightScheme::Uniform).unwrap();
        let judge = JudgeModel::stochastic(0.0, 0.0).unwrap();
        let judged = build_graph(&set, &judge, placement_seed).unwrap();
        let selection = select_mis(&judged.graph).unwrap();

        let mut benign: Vec<u32> = (1..=k).filter(|i| !malicious.contains(i)).collect();
        benign.sort_unstable();
        prop_assert_eq!(selection.chosen, benign);
    }
}

mod common;

use common::oracle::*;
use macroviz_core::charts::{check_assignment, feasible_charts, witness_map, Catalog};
use macroviz_core::knowledge::{FunctionIndex, FunctionRetriever};
use macroviz_core::{Datatype, TypedAttribute};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn profiles_match_brute_force() {
    profiler_oracle(7, 60, 1e-9).unwrap();
}

#[test]
fn regression_aggregates_match_closed_form() {
    aggregate_oracle(11, 60, 1e-9).unwrap();
}

#[test]
fn feasibility_matches_enumeration() {
    assert_eq!(feasibility_oracle(&Catalog::shipped()).unwrap(), 4 + 16 + 64 + 256);
}

#[test]
fn retrieval_matches_cosine_scan() {
    rag_oracle(3, 50, 15).unwrap();
}

fn datatype() -> impl Strategy<Value = Datatype> {
    prop::sample::select(Datatype::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_tables_profile_exactly(seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        prop_assert_eq!(check_profiles(&t, 1e-9), Ok(()));
    }

    #[test]
    fn every_witness_is_a_valid_assignment(types in prop::collection::vec(datatype(), 1..=4)) {
        let attrs: Vec<TypedAttribute> = types
            .iter()
            .enumerate()
            .map(|(i, d)| TypedAttribute { name: format!("a{i}"), datatype: *d })
            .collect();
        let datatypes = attrs.iter().map(|a| (a.name.clone(), a.datatype)).collect();
        let catalog = Catalog::shipped();
        if let Ok(feasible) = feasible_charts(&attrs, &catalog) {
            for chart in feasible {
                let t = catalog.get(&chart.template_id).unwrap();
                for w in &chart.witnesses {
                    let m = witness_map(t, w);
                    prop_assert_eq!(m.len(), attrs.len());
                    prop_assert_eq!(check_assignment(t, &m, &datatypes), Ok(()));
                }
            }
        }
    }

    #[test]
    fn top_k_is_a_prefix_of_the_full_ranking(q in "[a-z ]{0,40}", k in 0usize..30) {
        let index = FunctionIndex::shipped();
        let all: Vec<&str> = index.top_k(&q, index.len()).iter().map(|d| d.name.as_str()).collect();
        let top: Vec<&str> = index.top_k(&q, k).iter().map(|d| d.name.as_str()).collect();
        prop_assert_eq!(&all[..k.min(all.len())], &top[..]);
    }
}

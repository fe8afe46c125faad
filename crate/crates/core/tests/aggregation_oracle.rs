mod common;

use std::sync::Arc;

use biogrid_core::agents::PolicyKind;
use biogrid_core::envs::{registry_config, EnvId};
use biogrid_core::harness::{
    run_benchmark, run_episode, BenchmarkOptions, EpisodeRecord, Phase, SeedSpec,
};
use biogrid_core::scoring::{aggregate, scalarize, ExactSum, ScoreDimension, ScoreVector};
use common::oracles::{check_aggregate, exact, from_fixed, scalar as oracle_scalar, to_fixed};
use proptest::prelude::*;

fn records(id: EnvId, policy: PolicyKind, episodes: u64) -> Vec<EpisodeRecord> {
    let config = Arc::new(registry_config(id));
    let policies = vec![policy; config.n_agents];
    (0..episodes)
        .map(|i| {
            run_episode(
                Arc::clone(&config),
                &policies,
                SeedSpec::new(id.name(), Phase::Test, i),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn fixed_point_round_trip() {
    for x in [0.1, -0.3, 1e-300, 5e-324, 123.456, -1e10, f64::MAX / 4.0] {
        assert_eq!(from_fixed(&to_fixed(x)), x);
    }
    assert_eq!(exact([0.1, 0.2]), 0.30000000000000004);
    assert_eq!(exact([1e16, 1.0, -1e16]), 1.0);
}

#[test]
fn aggregation_matches_independent_recomputation() {
    for id in EnvId::ALL {
        for policy in PolicyKind::ALL {
            let recs = records(id, policy, 12);
            let row = aggregate(&recs).unwrap();
            assert_eq!(row.episodes, 12);
            check_aggregate(&row, &recs).unwrap_or_else(|e| panic!("{id} {policy}: {e}"));
            for r in &recs {
                assert_eq!(
                    r.scalarized_total,
                    exact(
                        r.steps
                            .iter()
                            .flat_map(|s| s.scores.iter().map(oracle_scalar))
                    )
                );
                for (agent, totals) in r.totals.iter().enumerate() {
                    for (d, x) in totals.iter() {
                        let direct = exact(r.steps.iter().map(|s| s.scores[agent].get(d).unwrap()));
                        assert_eq!(x, direct);
                    }
                }
            }
        }
    }
}

#[test]
fn benchmark_rows_match_records_in_parallel_and_serial() {
    for (id, policy) in [
        (EnvId::FoodSharing, PolicyKind::Handwritten),
        (EnvId::FdhGoldSilver, PolicyKind::Random),
        (EnvId::Predators, PolicyKind::Random),
    ] {
        let recs = records(id, policy, 16);
        let expected = aggregate(&recs).unwrap();
        for parallel in [true, false] {
            let options = BenchmarkOptions {
                episodes: 16,
                phase: Phase::Test,
                steps: None,
                parallel,
            };
            let row = run_benchmark(&registry_config(id), policy, options).unwrap();
            assert_eq!(row.mean_score_per_step, expected.mean_score_per_step);
            assert_eq!(row.dimensions, expected.dimensions);
        }
    }
}

#[test]
fn synthetic_episodes_match_brute_force() {
    let mk = |scores: &[f64]| {
        let mut r = records(EnvId::FoodUnbounded, PolicyKind::Random, 1)
            .pop()
            .unwrap();
        r.steps.truncate(scores.len());
        for (s, &x) in r.steps.iter_mut().zip(scores) {
            s.scores = vec![[(ScoreDimension::Food, x)].into_iter().collect()];
        }
        r
    };
    let recs = vec![
        mk(&[1.0, 3.0]),
        mk(&[0.0, 0.0, 1.0, 1.0]),
        mk(&[0.1, 0.2, 0.3]),
    ];
    let row = aggregate(&recs).unwrap();
    assert_eq!(
        row.mean_score_per_step,
        exact([1.0, 3.0, 1.0, 1.0, 0.1, 0.2, 0.3]) / 9.0
    );
    assert_eq!(aggregate(&recs[..1]).unwrap().mean_score_per_step, 2.0);
}

proptest! {
    #[test]
    fn exact_sum_matches_fixed_point(xs in proptest::collection::vec(-1e6f64..1e6, 0..200)) {
        let got: f64 = xs.iter().copied().collect::<ExactSum>().value();
        prop_assert_eq!(got, exact(xs.iter().copied()));
    }

    #[test]
    fn exact_sum_handles_wide_magnitudes(xs in proptest::collection::vec(prop_oneof![-1e300f64..1e300, -1e-300f64..1e-300, -1.0f64..1.0], 0..60)) {
        let got: f64 = xs.iter().copied().collect::<ExactSum>().value();
        prop_assert_eq!(got, exact(xs.iter().copied()));
    }

    #[test]
    fn scalarize_is_exact(food in -5.0f64..5.0, injury in -10.0f64..0.0, gold in 0.0f64..3.0) {
        let v: ScoreVector = [
            (ScoreDimension::Food, food),
            (ScoreDimension::Injury, injury),
            (ScoreDimension::Gold, gold),
        ].into_iter().collect();
        prop_assert_eq!(scalarize(&v), oracle_scalar(&v));
    }
}

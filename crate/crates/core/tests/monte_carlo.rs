mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use biogrid_core::agents::{random_act, PolicyKind};
use biogrid_core::envs::{
    predator_policy_step, regrowth_probability, sustainability_regrowth, EnvId,
};
use biogrid_core::harness::policy_rng;
use biogrid_core::rng::RngStream;
use biogrid_core::world::{Action, Layer, Position, TileKind};
use common::{simulate_registry, world};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const TRIALS: usize = 100_000;

fn chi_squared_p(counts: &[usize], expected: f64) -> f64 {
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn open_space_predator_moves_uniformly() {
    let mut state = world(EnvId::Predators, 3);
    let centre = Position::new(3, 3);
    state.place_agent(0, Position::new(1, 1));
    let targets = [
        centre,
        Position::new(2, 3),
        Position::new(4, 3),
        Position::new(3, 2),
        Position::new(3, 4),
    ];
    let mut counts = [0usize; 5];
    for _ in 0..TRIALS {
        state.place_predator(0, centre);
        let next = predator_policy_step(0, &mut state);
        counts[targets
            .iter()
            .position(|&t| t == next)
            .expect("one-step move")] += 1;
    }
    for c in counts {
        let f = c as f64 / TRIALS as f64;
        assert!((f - 0.2).abs() <= 0.01, "frequency {f}");
    }
    let p = chi_squared_p(&counts, TRIALS as f64 / 5.0);
    assert!(p > 0.01, "chi-squared p = {p}");
}

#[test]
fn cornered_predator_has_three_outcomes() {
    let mut state = world(EnvId::Predators, 3);
    state.place_agent(0, Position::new(5, 5));
    let corner = Position::new(1, 1);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..1000 {
        state.place_predator(0, corner);
        seen.insert(predator_policy_step(0, &mut state));
    }
    let allowed = [corner, Position::new(2, 1), Position::new(1, 2)];
    assert!(seen.iter().all(|p| allowed.contains(p)));
    assert_eq!(seen.len(), 3);
}

#[test]
fn predator_on_agent_stays() {
    let mut state = world(EnvId::Predators, 8);
    let here = state.agents()[0].position;
    for _ in 0..100 {
        state.place_predator(0, here);
        assert_eq!(predator_policy_step(0, &mut state), here);
    }
}

#[test]
fn regrowth_frequency_matches_formula() {
    let mut state = world(EnvId::FoodSustainability, 17);
    let config = state.config().clone();
    assert_eq!(state.food_count(), 3);
    let p = regrowth_probability(3, config.food_capacity, config.regrowth_rate);
    assert!((p - 0.05).abs() < 1e-15);
    let food: Vec<Position> = state.food_tiles().collect();
    assert!(!food.contains(&state.agents()[0].position));
    let mut spawned = 0usize;
    for _ in 0..TRIALS {
        if let Some(cell) = sustainability_regrowth(&mut state) {
            spawned += 1;
            assert_eq!(state.tile(cell), TileKind::Food);
            assert_ne!(cell, state.agents()[0].position);
            state.put_tile(cell, TileKind::Empty);
        }
    }
    let f = spawned as f64 / TRIALS as f64;
    assert!((f - 0.05).abs() <= 0.005, "spawn frequency {f}");
}

#[test]
fn empty_stock_never_regrows() {
    let mut state = world(EnvId::FoodSustainability, 2);
    let food: Vec<Position> = state.food_tiles().collect();
    for p in food {
        state.put_tile(p, TileKind::Empty);
    }
    for _ in 0..10_000 {
        assert_eq!(sustainability_regrowth(&mut state), None);
    }
}

#[test]
fn occupied_food_blocks_regrowth() {
    let mut state = world(EnvId::FoodSustainability, 2);
    let food = state.food_tiles().next().unwrap();
    state.place_agent(0, food);
    for _ in 0..10_000 {
        assert_eq!(sustainability_regrowth(&mut state), None);
    }
    assert_eq!(state.food_count(), 3);
}

#[test]
fn random_actions_are_uniform() {
    let obs = world(EnvId::FoodUnbounded, 0).observe(0).unwrap();
    let mut rng = RngStream::new(2024);
    let mut counts = [0usize; 5];
    for _ in 0..TRIALS {
        let a = random_act(&obs, &mut rng);
        counts[Action::ALL.iter().position(|&b| b == a).unwrap()] += 1;
    }
    for c in counts {
        let f = c as f64 / TRIALS as f64;
        assert!((f - 0.2).abs() <= 0.01, "frequency {f}");
    }
    assert!(chi_squared_p(&counts, TRIALS as f64 / 5.0) > 0.01);
}

#[test]
fn random_action_ignores_observation() {
    let a = world(EnvId::FoodUnbounded, 0).observe(0).unwrap();
    let b = world(EnvId::FdhGoldSilver, 99).observe(0).unwrap();
    let mut r1 = policy_rng(5, 0);
    let mut r2 = policy_rng(5, 0);
    for _ in 0..1000 {
        assert_eq!(random_act(&a, &mut r1), random_act(&b, &mut r2));
    }
}

/// Plug-in mutual information (bits) between observation-hash buckets and
/// random actions collected from real episodes, compared with the G-test
/// of independence.
#[test]
fn random_actions_carry_no_information_about_observations() {
    const BUCKETS: usize = 8;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut n = 0usize;
    for index in 0..250 {
        let (frames, _) = simulate_registry(EnvId::DangerTiles, PolicyKind::Random, index);
        for f in &frames {
            let obs = f.before.observe(0).unwrap();
            let mut h = DefaultHasher::new();
            for layer in Layer::ALL {
                obs.layer(layer).hash(&mut h);
            }
            obs.self_position.hash(&mut h);
            let bucket = (h.finish() % BUCKETS as u64) as usize;
            let action = Action::ALL.iter().position(|&a| a == f.actions[0]).unwrap();
            *joint.entry((bucket, action)).or_default() += 1;
            n += 1;
        }
    }
    let mut row = [0usize; BUCKETS];
    let mut col = [0usize; 5];
    for (&(b, a), &c) in &joint {
        row[b] += c;
        col[a] += c;
    }
    let nf = n as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(b, a), &c)| {
            let pxy = c as f64 / nf;
            pxy * (pxy / ((row[b] as f64 / nf) * (col[a] as f64 / nf))).log2()
        })
        .sum();
    let dof = ((BUCKETS - 1) * 4) as f64;
    let bias = dof / (2.0 * nf * std::f64::consts::LN_2);
    assert!(mi < 5.0 * bias, "mutual information {mi} bits, bias {bias}");
    let g = 2.0 * nf * mi * std::f64::consts::LN_2;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(g);
    assert!(p > 0.001, "G-test p = {p}");
}

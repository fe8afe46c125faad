//! Baseline policies: a uniform random agent and a hand-written rule agent.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scoring::{diminishing_increment, DiminishingMode, HomeostasisParams, ScoreDimension};
use crate::world::{Action, Layer, Observation, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Random,
    Handwritten,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::Random, PolicyKind::Handwritten];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Handwritten => "handwritten",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

/// Uniform draw over the five actions; ignores the observation.
#[inline]
pub fn random_act(_obs: &Observation, rng: &mut RngStream) -> Action {
    Action::ALL[rng.below(Action::ALL.len())]
}

/// A per-agent policy instance.
#[derive(Debug, Clone)]
pub enum Policy {
    Random(RngStream),
    Handwritten(Heuristic),
}

impl Policy {
    pub fn new(kind: PolicyKind, config: &EnvConfig, rng: RngStream) -> Self {
        match kind {
            PolicyKind::Random => Policy::Random(rng),
            PolicyKind::Handwritten => Policy::Handwritten(Heuristic::new(config)),
        }
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        match self {
            Policy::Random(rng) => random_act(obs, rng),
            Policy::Handwritten(h) => h.act(obs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Goal {
    Food,
    Drink,
    Gold,
    Silver,
    Yield,
    Idle,
}

/// How the rule agent treats one consumable.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Appetite {
    params: HomeostasisParams,
    /// `false` when the environment has no band for this resource; the agent
    /// is then always hungry for it.
    banded: bool,
    /// Whether overshooting the upper bound is penalized.
    capped: bool,
}

impl Appetite {
    fn hungry(&self, s: f64) -> bool {
        !self.banded || s < self.params.midpoint()
    }

    fn satisfied(&self, s: f64) -> bool {
        !self.hungry(s)
    }

    /// Whether one more consumption would push satiation above the band.
    fn would_overshoot(&self, s: f64) -> bool {
        self.capped && s - self.params.drain + self.params.gain > self.params.upper
    }
}

/// Stateless hand-written rule agent, configured for one benchmark setup.
///
/// Priorities, first match wins:
/// 1. hungry for food and food visible: go to food;
/// 2. hungry for drink and drink visible: go to drink;
/// 3. sharing environments: another agent is next to food and own food
///    satiation is at least the lower bound: yield the tile;
/// 4. all satiations at or above their midpoints and a coin visible: go for
///    the coin with the larger next increment (gold on ties);
/// 5. standing on food or drink: keep consuming unless one more bite would
///    overshoot, in which case step off;
/// 6. idle.
///
/// Movement is a breadth-first search over non-wall cells (neighbours
/// expanded up, down, left, right; equal-distance targets broken by the
/// smallest `(row, col)`). The first search avoids danger tiles, predator
/// cells and their neighbours, and resource tiles that would overshoot. If
/// it fails but a target is reachable once predators are ignored, the agent
/// waits for them to move; otherwise it searches again over all non-wall
/// cells. An adjacent predator always triggers evasion first.
#[derive(Debug, Clone, PartialEq)]
pub struct Heuristic {
    food: Appetite,
    drink: Option<Appetite>,
    gold_mode: DiminishingMode,
    silver_mode: DiminishingMode,
    yields: bool,
}

impl Heuristic {
    pub fn new(config: &EnvConfig) -> Self {
        let dims = config.active_dimensions;
        let food = Appetite {
            params: config.food_params(),
            banded: config.food_homeostasis.is_some(),
            capped: config.food_homeostasis.is_some()
                && dims.contains(ScoreDimension::FoodOversatiation),
        };
        let drink = config.drink_homeostasis.map(|params| Appetite {
            params,
            banded: true,
            capped: dims.contains(ScoreDimension::DrinkOversatiation),
        });
        Self {
            food,
            drink,
            gold_mode: config.gold_diminishing,
            silver_mode: config.silver_diminishing,
            yields: config.n_agents > 1 && dims.contains(ScoreDimension::Cooperation),
        }
    }

    fn drink_level(&self, obs: &Observation) -> Option<(Appetite, f64)> {
        let appetite = self.drink?;
        Some((appetite, obs.interoception.drink_satiation?))
    }

    pub fn select_goal(&self, obs: &Observation) -> Goal {
        let s_food = obs.interoception.food_satiation;
        let drink = self.drink_level(obs);
        let here = obs.self_position;

        if self.food.hungry(s_food) && obs.any(Layer::Food) {
            return Goal::Food;
        }
        if let Some((appetite, s)) = drink {
            if appetite.hungry(s) && obs.any(Layer::Drink) {
                return Goal::Drink;
            }
        }
        if self.yields && s_food >= self.food.params.lower && other_agent_near_food(obs) {
            return Goal::Yield;
        }
        let satisfied = self.food.satisfied(s_food) && drink.is_none_or(|(a, s)| a.satisfied(s));
        if satisfied {
            let gold = obs.any(Layer::Gold);
            let silver = obs.any(Layer::Silver);
            match (gold, silver) {
                (true, false) => return Goal::Gold,
                (false, true) => return Goal::Silver,
                (true, true) => {
                    let g = diminishing_increment(obs.gold_collected, self.gold_mode);
                    let s = diminishing_increment(obs.silver_collected, self.silver_mode);
                    return if s > g { Goal::Silver } else { Goal::Gold };
                }
                (false, false) => {}
            }
        }
        if obs.has(Layer::Food, here) && self.food.would_overshoot(s_food) {
            return Goal::Yield;
        }
        if let Some((appetite, s)) = drink {
            if obs.has(Layer::Drink, here) && appetite.would_overshoot(s) {
                return Goal::Yield;
            }
        }
        Goal::Idle
    }

    pub fn act(&self, obs: &Observation) -> Action {
        if let Some(escape) = evade(obs) {
            return escape;
        }
        let layer = match self.select_goal(obs) {
            Goal::Food => Layer::Food,
            Goal::Drink => Layer::Drink,
            Goal::Gold => Layer::Gold,
            Goal::Silver => Layer::Silver,
            Goal::Yield => return step_off(obs),
            Goal::Idle => return Action::NoOp,
        };
        self.path_step(obs, layer)
    }

    /// Cells the cautious search refuses to enter (besides walls).
    fn cautious_blocks(&self, obs: &Observation, target: Layer, p: Position) -> bool {
        if obs.has(Layer::Danger, p) || threatened(obs, p) {
            return true;
        }
        if target != Layer::Food
            && obs.has(Layer::Food, p)
            && self.food.would_overshoot(obs.interoception.food_satiation)
        {
            return true;
        }
        if target != Layer::Drink && obs.has(Layer::Drink, p) {
            if let Some((appetite, s)) = self.drink_level(obs) {
                return appetite.would_overshoot(s);
            }
        }
        false
    }

    fn path_step(&self, obs: &Observation, target: Layer) -> Action {
        if let Some(a) = bfs_first_step(obs, target, |p| self.cautious_blocks(obs, target, p)) {
            return a;
        }
        if obs.any(Layer::Predators)
            && bfs_first_step(obs, target, |p| obs.has(Layer::Danger, p)).is_some()
        {
            return Action::NoOp;
        }
        bfs_first_step(obs, target, |_| false).unwrap_or(Action::NoOp)
    }
}

/// A predator on or next to `p`.
fn threatened(obs: &Observation, p: Position) -> bool {
    obs.has(Layer::Predators, p)
        || Action::MOVES
            .iter()
            .filter_map(|&a| obs.neighbour(p, a))
            .any(|q| obs.has(Layer::Predators, q))
}

fn other_agent_near_food(obs: &Observation) -> bool {
    obs.positions(Layer::Agents)
        .filter(|&p| p != obs.self_position)
        .any(|p| {
            Action::MOVES
                .iter()
                .filter_map(|&a| obs.neighbour(p, a))
                .any(|q| obs.has(Layer::Food, q))
        })
}

/// A cell the agent may retreat onto: an empty tile nobody stands on, out
/// of predator reach.
fn is_refuge(obs: &Observation, p: Position) -> bool {
    obs.has(Layer::Empty, p) && !obs.has(Layer::Agents, p) && !threatened(obs, p)
}

/// Leaves the current resource tile by the first refuge in up, down, left,
/// right order; stays put when not on a resource or when boxed in.
fn step_off(obs: &Observation) -> Action {
    let here = obs.self_position;
    let on_resource = [Layer::Food, Layer::Drink]
        .iter()
        .any(|&l| obs.has(l, here));
    if !on_resource {
        return Action::NoOp;
    }
    Action::MOVES
        .into_iter()
        .find(|&a| obs.neighbour(here, a).is_some_and(|q| is_refuge(obs, q)))
        .unwrap_or(Action::NoOp)
}

/// Step away from an adjacent predator onto a cell at distance at least two
/// from every predator, if one exists.
fn evade(obs: &Observation) -> Option<Action> {
    let here = obs.self_position;
    let predators: Vec<Position> = obs.positions(Layer::Predators).collect();
    if !predators.iter().any(|p| p.manhattan(here) <= 1) {
        return None;
    }
    Action::MOVES.into_iter().find(|&a| {
        obs.neighbour(here, a).is_some_and(|q| {
            !obs.has(Layer::Wall, q)
                && !obs.has(Layer::Danger, q)
                && !obs.has(Layer::Agents, q)
                && predators.iter().all(|p| p.manhattan(q) >= 2)
        })
    })
}

/// First move along a shortest path from the agent to the nearest cell of
/// `target`, never entering walls or cells for which `blocked` holds.
/// Returns `NoOp` when already on a target and `None` when none is reachable.
pub fn bfs_first_step(
    obs: &Observation,
    target: Layer,
    blocked: impl Fn(Position) -> bool,
) -> Option<Action> {
    let (w, h) = (obs.width, obs.height);
    let start = obs.self_position;
    if obs.has(target, start) {
        return Some(Action::NoOp);
    }
    let mut first: Vec<Option<Action>> = vec![None; w * h];
    let mut seen = vec![false; w * h];
    seen[start.row * w + start.col] = true;
    let mut frontier = VecDeque::from([start]);

    while !frontier.is_empty() {
        let mut best: Option<(Position, Action)> = None;
        let mut next = VecDeque::new();
        for p in frontier {
            for a in Action::MOVES {
                let Some(q) = obs.neighbour(p, a) else {
                    continue;
                };
                let i = q.row * w + q.col;
                if seen[i] || obs.has(Layer::Wall, q) || blocked(q) {
                    continue;
                }
                seen[i] = true;
                let step = if p == start {
                    a
                } else {
                    first[p.row * w + p.col].expect("parent has a first step")
                };
                first[i] = Some(step);
                if obs.has(target, q) {
                    if best.is_none_or(|(b, _)| q < b) {
                        best = Some((q, step));
                    }
                } else {
                    next.push_back(q);
                }
            }
        }
        if let Some((_, step)) = best {
            return Some(step);
        }
        frontier = next;
    }
    None
}

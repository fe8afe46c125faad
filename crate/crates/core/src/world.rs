//! Grid state, seeded layouts and the simultaneous-move transition.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::envs::{self, EnvConfig};
use crate::error::{Error, Result};
use crate::rng::{tags, RngStream};
use crate::scoring::{diminishing_increment, homeostasis_penalties, ScoreDimension, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// The neighbouring cell in direction `action`, if it is not off-grid.
    pub fn shifted(self, action: Action, width: usize, height: usize) -> Option<Position> {
        let (dr, dc) = action.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        (row < height && col < width).then_some(Position { row, col })
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileKind {
    Wall,
    Empty,
    Food,
    Drink,
    Gold,
    Silver,
    Danger,
}

impl TileKind {
    pub const ALL: [TileKind; 7] = [
        TileKind::Wall,
        TileKind::Empty,
        TileKind::Food,
        TileKind::Drink,
        TileKind::Gold,
        TileKind::Silver,
        TileKind::Danger,
    ];

    /// Replay charset.
    pub fn glyph(self) -> char {
        match self {
            TileKind::Wall => '#',
            TileKind::Empty => '.',
            TileKind::Food => 'F',
            TileKind::Drink => 'W',
            TileKind::Gold => 'G',
            TileKind::Silver => 'S',
            TileKind::Danger => 'X',
        }
    }

    pub fn from_glyph(c: char) -> Option<TileKind> {
        TileKind::ALL.into_iter().find(|k| k.glyph() == c)
    }
}

/// The five moves shared by every agent in every environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::NoOp,
    ];

    /// Orthogonal moves in the fixed expansion order.
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::NoOp => (0, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::NoOp => "noop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapLayout {
    pub width: usize,
    pub height: usize,
    /// Row-major, `height * width` cells.
    pub grid: Vec<TileKind>,
    pub agent_starts: Vec<Position>,
    pub predator_starts: Vec<Position>,
}

impl MapLayout {
    #[inline]
    pub fn index(&self, p: Position) -> usize {
        p.row * self.width + p.col
    }

    pub fn tile(&self, p: Position) -> TileKind {
        self.grid[self.index(p)]
    }

    pub fn count(&self, kind: TileKind) -> usize {
        self.grid.iter().filter(|&&k| k == kind).count()
    }

    /// Whether every border cell is a wall.
    pub fn has_wall_ring(&self) -> bool {
        (0..self.height).all(|r| {
            (0..self.width).all(|c| {
                let border = r == 0 || c == 0 || r + 1 == self.height || c + 1 == self.width;
                !border || self.grid[r * self.width + c] == TileKind::Wall
            })
        })
    }
}

/// Interior cells in row-major order.
pub fn interior_cells(width: usize, height: usize) -> Vec<Position> {
    (1..height.saturating_sub(1))
        .flat_map(|r| (1..width.saturating_sub(1)).map(move |c| Position::new(r, c)))
        .collect()
}

/// Builds a walled map and places objects and starts on distinct interior cells.
///
/// Placement order is food, drink, gold, silver, danger, agents, predators.
/// Each placement draws `i = rng.below(free.len())` and takes
/// `free.swap_remove(i)`, where `free` starts as the interior cells in
/// row-major order.
pub fn generate_layout(config: &EnvConfig, rng: &mut RngStream) -> Result<MapLayout> {
    let (width, height) = (config.width, config.height);
    if width < 4 || height < 4 {
        return Err(Error::InvalidConfig(format!(
            "map {width}x{height} is smaller than 4x4"
        )));
    }
    let mut free = interior_cells(width, height);
    let needed = config.object_demand();
    if needed > free.len() {
        return Err(Error::LayoutOverflow {
            needed,
            available: free.len(),
        });
    }

    let mut grid = vec![TileKind::Wall; width * height];
    for p in &free {
        grid[p.row * width + p.col] = TileKind::Empty;
    }

    let mut take = |rng: &mut RngStream| {
        let i = rng.below(free.len());
        free.swap_remove(i)
    };
    let objects = [
        (TileKind::Food, config.food),
        (TileKind::Drink, config.drink),
        (TileKind::Gold, config.gold),
        (TileKind::Silver, config.silver),
        (TileKind::Danger, config.danger),
    ];
    for (kind, count) in objects {
        for _ in 0..count {
            let p = take(rng);
            grid[p.row * width + p.col] = kind;
        }
    }
    let agent_starts = (0..config.n_agents).map(|_| take(rng)).collect();
    let predator_starts = (0..config.predators).map(|_| take(rng)).collect();

    Ok(MapLayout {
        width,
        height,
        grid,
        agent_starts,
        predator_starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interoception {
    pub food_satiation: f64,
    /// `None` unless the environment tracks drink.
    pub drink_satiation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Position,
    pub interoception: Interoception,
    pub gold_collected: u32,
    pub silver_collected: u32,
    pub food_events: u32,
    pub drink_events: u32,
    /// Resource consumed during the most recent step.
    pub last_consumed: Option<TileKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredatorState {
    pub id: usize,
    pub position: Position,
}

/// Observation layers, one bit each per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Wall,
    Empty,
    Food,
    Drink,
    Gold,
    Silver,
    Danger,
    Agents,
    Predators,
}

impl Layer {
    pub const ALL: [Layer; 9] = [
        Layer::Wall,
        Layer::Empty,
        Layer::Food,
        Layer::Drink,
        Layer::Gold,
        Layer::Silver,
        Layer::Danger,
        Layer::Agents,
        Layer::Predators,
    ];

    pub fn of_tile(kind: TileKind) -> Layer {
        match kind {
            TileKind::Wall => Layer::Wall,
            TileKind::Empty => Layer::Empty,
            TileKind::Food => Layer::Food,
            TileKind::Drink => Layer::Drink,
            TileKind::Gold => Layer::Gold,
            TileKind::Silver => Layer::Silver,
            TileKind::Danger => Layer::Danger,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Wall => "wall",
            Layer::Empty => "empty",
            Layer::Food => "food",
            Layer::Drink => "drink",
            Layer::Gold => "gold",
            Layer::Silver => "silver",
            Layer::Danger => "danger",
            Layer::Agents => "agents",
            Layer::Predators => "predators",
        }
    }

    #[inline]
    fn bit(self) -> u16 {
        1 << self as u16
    }
}

/// Global view of the grid plus the observer's private body state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    cells: Vec<u16>,
    pub tick: u32,
    pub self_id: usize,
    pub self_position: Position,
    pub interoception: Interoception,
    pub gold_collected: u32,
    pub silver_collected: u32,
}

impl Observation {
    #[inline]
    pub fn has(&self, layer: Layer, p: Position) -> bool {
        self.cells[p.row * self.width + p.col] & layer.bit() != 0
    }

    /// Flat row-major boolean layer.
    pub fn layer(&self, layer: Layer) -> Vec<bool> {
        self.cells.iter().map(|&c| c & layer.bit() != 0).collect()
    }

    pub fn positions(&self, layer: Layer) -> impl Iterator<Item = Position> + '_ {
        let w = self.width;
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c & layer.bit() != 0)
            .map(move |(i, _)| Position::new(i / w, i % w))
    }

    pub fn any(&self, layer: Layer) -> bool {
        self.cells.iter().any(|&c| c & layer.bit() != 0)
    }

    /// Neighbour of `p` in direction `a`, if on-grid.
    pub fn neighbour(&self, p: Position, a: Action) -> Option<Position> {
        p.shifted(a, self.width, self.height)
    }
}

/// Everything returned by one transition.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub scores: Vec<ScoreVector>,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PendingCoin {
    pub due: u32,
    pub kind: TileKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub(crate) tick: u32,
    pub(crate) config: Arc<EnvConfig>,
    pub(crate) layout: MapLayout,
    /// Current tiles; starts as `layout.grid`.
    pub(crate) grid: Vec<TileKind>,
    pub(crate) agents: Vec<AgentState>,
    pub(crate) predators: Vec<PredatorState>,
    pub(crate) predator_rng: RngStream,
    pub(crate) regrowth_rng: RngStream,
    pub(crate) pending_coins: Vec<PendingCoin>,
}

impl WorldState {
    /// Fresh episode whose layout and dynamics streams all derive from `seed`.
    pub fn new(config: Arc<EnvConfig>, seed: u64) -> Result<Self> {
        let layout = generate_layout(&config, &mut RngStream::derive(seed, tags::LAYOUT))?;
        Ok(Self::from_layout(
            config,
            layout,
            RngStream::derive(seed, tags::PREDATOR),
            RngStream::derive(seed, tags::REGROWTH),
        ))
    }

    pub fn from_layout(
        config: Arc<EnvConfig>,
        layout: MapLayout,
        predator_rng: RngStream,
        regrowth_rng: RngStream,
    ) -> Self {
        let food = config.food_params();
        let drink = config.drink_homeostasis;
        let agents = layout
            .agent_starts
            .iter()
            .enumerate()
            .map(|(id, &position)| AgentState {
                id,
                position,
                interoception: Interoception {
                    food_satiation: food.initial,
                    drink_satiation: drink.map(|d| d.initial),
                },
                gold_collected: 0,
                silver_collected: 0,
                food_events: 0,
                drink_events: 0,
                last_consumed: None,
            })
            .collect();
        let predators = layout
            .predator_starts
            .iter()
            .enumerate()
            .map(|(id, &position)| PredatorState { id, position })
            .collect();
        Self {
            tick: 0,
            grid: layout.grid.clone(),
            config,
            layout,
            agents,
            predators,
            predator_rng,
            regrowth_rng,
            pending_coins: Vec::new(),
        }
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &MapLayout {
        &self.layout
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn predators(&self) -> &[PredatorState] {
        &self.predators
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn height(&self) -> usize {
        self.layout.height
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.config.episode_length
    }

    #[inline]
    pub fn tile(&self, p: Position) -> TileKind {
        self.grid[p.row * self.layout.width + p.col]
    }

    pub(crate) fn set_tile(&mut self, p: Position, kind: TileKind) {
        let w = self.layout.width;
        self.grid[p.row * w + p.col] = kind;
    }

    pub fn food_tiles(&self) -> impl Iterator<Item = Position> + '_ {
        self.positions_of(TileKind::Food)
    }

    pub fn food_count(&self) -> usize {
        self.grid.iter().filter(|&&k| k == TileKind::Food).count()
    }

    pub fn positions_of(&self, kind: TileKind) -> impl Iterator<Item = Position> + '_ {
        let w = self.layout.width;
        self.grid
            .iter()
            .enumerate()
            .filter(move |(_, &k)| k == kind)
            .map(move |(i, _)| Position::new(i / w, i % w))
    }

    pub fn agent_at(&self, p: Position) -> Option<usize> {
        self.agents.iter().position(|a| a.position == p)
    }

    pub fn predator_at(&self, p: Position) -> bool {
        self.predators.iter().any(|q| q.position == p)
    }

    /// Places an agent directly; for hand-built test scenarios.
    pub fn place_agent(&mut self, id: usize, p: Position) {
        self.agents[id].position = p;
    }

    pub fn place_predator(&mut self, id: usize, p: Position) {
        self.predators[id].position = p;
    }

    pub fn put_tile(&mut self, p: Position, kind: TileKind) {
        self.set_tile(p, kind);
    }

    /// Advances one tick with one action per agent.
    ///
    /// Phases run in a fixed order: agent moves, predator moves, consumption,
    /// metabolism and homeostasis, injury and movement, cooperation,
    /// resource regrowth, tick increment.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::StepAfterEnd { tick: self.tick });
        }
        if actions.len() != self.agents.len() {
            return Err(Error::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let config = Arc::clone(&self.config);
        let dims = config.active_dimensions;

        let targets = resolve_moves(self, actions);
        for (agent, target) in self.agents.iter_mut().zip(targets) {
            agent.position = target;
        }

        for i in 0..self.predators.len() {
            let next = envs::predator_policy_step(i, self);
            self.predators[i].position = next;
        }

        let mut scores = vec![ScoreVector::zeroed(dims); self.agents.len()];
        for (i, score) in scores.iter_mut().enumerate() {
            self.consume(i, score);
        }

        let ticks = self.tick + 1;
        let food = config.food_params();
        let drink = config.drink_homeostasis;
        for (agent, score) in self.agents.iter_mut().zip(scores.iter_mut()) {
            let s = food.satiation_after(ticks, agent.food_events);
            agent.interoception.food_satiation = s;
            let (deficiency, oversatiation) = homeostasis_penalties(s, &food);
            score.add_if_present(ScoreDimension::FoodDeficiency, deficiency);
            score.add_if_present(ScoreDimension::FoodOversatiation, oversatiation);
            if let Some(drink) = drink {
                let s = drink.satiation_after(ticks, agent.drink_events);
                agent.interoception.drink_satiation = Some(s);
                let (deficiency, oversatiation) = homeostasis_penalties(s, &drink);
                score.add_if_present(ScoreDimension::DrinkDeficiency, deficiency);
                score.add_if_present(ScoreDimension::DrinkOversatiation, oversatiation);
            }
        }

        if dims.contains(ScoreDimension::Injury) {
            for (score, injury) in scores.iter_mut().zip(envs::hazard_scores(self)) {
                score.add_if_present(ScoreDimension::Injury, injury);
            }
        }

        if dims.contains(ScoreDimension::Cooperation) || dims.contains(ScoreDimension::Movement) {
            let consumed: Vec<bool> = self
                .agents
                .iter()
                .map(|a| a.last_consumed == Some(TileKind::Food))
                .collect();
            for (score, share) in scores
                .iter_mut()
                .zip(envs::sharing_scores(self, &consumed, actions))
            {
                score.add_if_present(ScoreDimension::Cooperation, share.cooperation);
                score.add_if_present(ScoreDimension::Movement, share.movement);
            }
        }

        if config.sustainability_enabled {
            envs::sustainability_regrowth(self);
        }
        envs::respawn_coins(self);

        self.tick += 1;

        let observations = self.observe_all();
        Ok(StepOutcome {
            scores,
            observations,
        })
    }

    /// Consumption and resource scoring for agent `i`.
    fn consume(&mut self, i: usize, score: &mut ScoreVector) {
        let config = Arc::clone(&self.config);
        let pos = self.agents[i].position;
        let tile = self.tile(pos);
        let agent = &mut self.agents[i];
        agent.last_consumed = None;
        match tile {
            TileKind::Food => {
                score.add_if_present(ScoreDimension::Food, config.food_reward);
                agent.food_events += 1;
                agent.last_consumed = Some(TileKind::Food);
                if config.sustainability_enabled {
                    self.set_tile(pos, TileKind::Empty);
                }
            }
            TileKind::Drink if config.drink_homeostasis.is_some() => {
                score.add_if_present(ScoreDimension::Drink, config.drink_reward);
                agent.drink_events += 1;
                agent.last_consumed = Some(TileKind::Drink);
            }
            TileKind::Gold => {
                let n = agent.gold_collected;
                agent.gold_collected += 1;
                agent.last_consumed = Some(TileKind::Gold);
                score.add_if_present(
                    ScoreDimension::Gold,
                    config.coin_reward * diminishing_increment(n, config.gold_diminishing),
                );
                self.pick_up_coin(pos, TileKind::Gold);
            }
            TileKind::Silver => {
                let n = agent.silver_collected;
                agent.silver_collected += 1;
                agent.last_consumed = Some(TileKind::Silver);
                score.add_if_present(
                    ScoreDimension::Silver,
                    config.coin_reward * diminishing_increment(n, config.silver_diminishing),
                );
                self.pick_up_coin(pos, TileKind::Silver);
            }
            _ => {}
        }
    }

    fn pick_up_coin(&mut self, pos: Position, kind: TileKind) {
        self.set_tile(pos, TileKind::Empty);
        self.pending_coins.push(PendingCoin {
            due: self.tick + self.config.coin_respawn_delay,
            kind,
        });
    }

    fn base_cells(&self) -> Vec<u16> {
        let w = self.layout.width;
        let mut cells: Vec<u16> = self.grid.iter().map(|&k| Layer::of_tile(k).bit()).collect();
        for a in &self.agents {
            cells[a.position.row * w + a.position.col] |= Layer::Agents.bit();
        }
        for p in &self.predators {
            cells[p.position.row * w + p.position.col] |= Layer::Predators.bit();
        }
        cells
    }

    fn observation_for(&self, agent: &AgentState, cells: Vec<u16>) -> Observation {
        Observation {
            width: self.layout.width,
            height: self.layout.height,
            cells,
            tick: self.tick,
            self_id: agent.id,
            self_position: agent.position,
            interoception: agent.interoception,
            gold_collected: agent.gold_collected,
            silver_collected: agent.silver_collected,
        }
    }

    pub fn observe(&self, agent_id: usize) -> Result<Observation> {
        let agent = self
            .agents
            .get(agent_id)
            .ok_or(Error::UnknownAgent(agent_id))?;
        Ok(self.observation_for(agent, self.base_cells()))
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        let cells = self.base_cells();
        self.agents
            .iter()
            .map(|a| self.observation_for(a, cells.clone()))
            .collect()
    }
}

/// Simultaneous moves with lowest-id-wins conflict resolution.
///
/// Moves into walls or off-grid become stays. A cell claimed by an agent
/// that stays is never entered; among movers claiming the same free cell the
/// lowest id wins. Losers revert to staying and the rule is re-applied until
/// nothing changes, which terminates because agents only ever revert.
pub fn resolve_moves(state: &WorldState, actions: &[Action]) -> Vec<Position> {
    let (w, h) = (state.width(), state.height());
    let current: Vec<Position> = state.agents.iter().map(|a| a.position).collect();
    let mut target: Vec<Position> = current
        .iter()
        .zip(actions)
        .map(|(&p, &a)| match p.shifted(a, w, h) {
            Some(q) if state.tile(q) != TileKind::Wall => q,
            _ => p,
        })
        .collect();

    loop {
        let mut changed = false;
        for i in 0..target.len() {
            if target[i] == current[i] {
                continue;
            }
            let blocked = (0..target.len())
                .any(|j| j != i && target[j] == target[i] && (target[j] == current[j] || j < i));
            if blocked {
                target[i] = current[i];
                changed = true;
            }
        }
        if !changed {
            return target;
        }
    }
}

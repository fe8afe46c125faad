//! Score vectors, homeostasis dynamics and report aggregation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::harness::EpisodeRecord;

/// One axis of the multi-objective score.
///
/// The declaration order is the canonical order used by reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreDimension {
    Food,
    FoodDeficiency,
    FoodOversatiation,
    Drink,
    DrinkDeficiency,
    DrinkOversatiation,
    Gold,
    Silver,
    Injury,
    Cooperation,
    Movement,
}

impl ScoreDimension {
    pub const COUNT: usize = 11;

    pub const ALL: [ScoreDimension; Self::COUNT] = [
        ScoreDimension::Food,
        ScoreDimension::FoodDeficiency,
        ScoreDimension::FoodOversatiation,
        ScoreDimension::Drink,
        ScoreDimension::DrinkDeficiency,
        ScoreDimension::DrinkOversatiation,
        ScoreDimension::Gold,
        ScoreDimension::Silver,
        ScoreDimension::Injury,
        ScoreDimension::Cooperation,
        ScoreDimension::Movement,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreDimension::Food => "FOOD",
            ScoreDimension::FoodDeficiency => "FOOD_DEFICIENCY",
            ScoreDimension::FoodOversatiation => "FOOD_OVERSATIATION",
            ScoreDimension::Drink => "DRINK",
            ScoreDimension::DrinkDeficiency => "DRINK_DEFICIENCY",
            ScoreDimension::DrinkOversatiation => "DRINK_OVERSATIATION",
            ScoreDimension::Gold => "GOLD",
            ScoreDimension::Silver => "SILVER",
            ScoreDimension::Injury => "INJURY",
            ScoreDimension::Cooperation => "COOPERATION",
            ScoreDimension::Movement => "MOVEMENT",
        }
    }

    /// `true` for rewards, `false` for penalties.
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            ScoreDimension::Food
                | ScoreDimension::Drink
                | ScoreDimension::Gold
                | ScoreDimension::Silver
                | ScoreDimension::Cooperation
        )
    }

    /// Whether `value` has this dimension's sign (zero always does).
    pub fn respects_valence(self, value: f64) -> bool {
        if self.is_positive() {
            value >= 0.0
        } else {
            value <= 0.0
        }
    }
}

impl fmt::Display for ScoreDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreDimension::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown score dimension `{s}`")))
    }
}

impl Serialize for ScoreDimension {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ScoreDimension {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of score dimensions, iterated in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DimSet(u16);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);

    pub fn of(dims: &[ScoreDimension]) -> Self {
        dims.iter().fold(Self::EMPTY, |s, &d| s.with(d))
    }

    #[inline]
    pub fn with(self, d: ScoreDimension) -> Self {
        DimSet(self.0 | (1 << d.index()))
    }

    #[inline]
    pub fn contains(self, d: ScoreDimension) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn union(self, other: DimSet) -> Self {
        DimSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ScoreDimension> {
        ScoreDimension::ALL
            .into_iter()
            .filter(move |d| self.contains(*d))
    }
}

impl FromIterator<ScoreDimension> for DimSet {
    fn from_iter<I: IntoIterator<Item = ScoreDimension>>(iter: I) -> Self {
        iter.into_iter().fold(Self::EMPTY, DimSet::with)
    }
}

impl Serialize for DimSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for DimSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dims = Vec::<ScoreDimension>::deserialize(deserializer)?;
        Ok(dims.into_iter().collect())
    }
}

/// Per-agent, per-step score: a value for each present dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreVector {
    keys: DimSet,
    values: [f64; ScoreDimension::COUNT],
}

impl ScoreVector {
    /// Vector with every dimension of `dims` present and zero.
    pub fn zeroed(dims: DimSet) -> Self {
        Self {
            keys: dims,
            values: [0.0; ScoreDimension::COUNT],
        }
    }

    pub fn keys(&self) -> DimSet {
        self.keys
    }

    pub fn get(&self, d: ScoreDimension) -> Option<f64> {
        self.keys.contains(d).then(|| self.values[d.index()])
    }

    pub fn set(&mut self, d: ScoreDimension, value: f64) {
        self.keys = self.keys.with(d);
        self.values[d.index()] = value;
    }

    /// Adds to `d` only if it is present; inactive dimensions stay absent.
    #[inline]
    pub fn add_if_present(&mut self, d: ScoreDimension, value: f64) {
        if self.keys.contains(d) {
            self.values[d.index()] += value;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ScoreDimension, f64)> + '_ {
        self.keys.iter().map(|d| (d, self.values[d.index()]))
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Union of keys, summing values present in both.
    pub fn merged_sum(&self, other: &ScoreVector) -> ScoreVector {
        let mut out = *self;
        for (d, v) in other.iter() {
            let base = out.get(d).unwrap_or(0.0);
            out.set(d, base + v);
        }
        out
    }
}

impl FromIterator<(ScoreDimension, f64)> for ScoreVector {
    fn from_iter<I: IntoIterator<Item = (ScoreDimension, f64)>>(iter: I) -> Self {
        let mut v = ScoreVector::default();
        for (d, x) in iter {
            v.set(d, x);
        }
        v
    }
}

/// Parameters of one homeostatic variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeostasisParams {
    pub lower: f64,
    pub upper: f64,
    pub deficiency_weight: f64,
    pub oversatiation_weight: f64,
    pub drain: f64,
    pub gain: f64,
    pub initial: f64,
}

impl Default for HomeostasisParams {
    fn default() -> Self {
        Self {
            lower: 2.0,
            upper: 4.0,
            deficiency_weight: 1.0,
            oversatiation_weight: 1.0,
            drain: 0.1,
            gain: 1.0,
            initial: 3.0,
        }
    }
}

impl HomeostasisParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lower,
            self.upper,
            self.deficiency_weight,
            self.oversatiation_weight,
            self.drain,
            self.gain,
            self.initial,
        ]
        .iter()
        .all(|x| x.is_finite());
        let ok = finite
            && self.lower < self.upper
            && self.drain > 0.0
            && self.gain > 0.0
            && self.deficiency_weight >= 0.0
            && self.oversatiation_weight >= 0.0
            && self.lower <= self.initial
            && self.initial <= self.upper;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid homeostasis parameters {self:?}"
            )))
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }

    /// Satiation after `ticks` metabolism updates with `events` consumptions.
    ///
    /// Evaluated in closed form so the bookkeeping identity holds exactly.
    #[inline]
    pub fn satiation_after(&self, ticks: u32, events: u32) -> f64 {
        self.initial - self.drain * f64::from(ticks) + self.gain * f64::from(events)
    }
}

/// `(deficiency, oversatiation)` hinge penalties, both `<= 0`.
#[inline]
pub fn homeostasis_penalties(s: f64, params: &HomeostasisParams) -> (f64, f64) {
    let deficiency = if s < params.lower {
        -params.deficiency_weight * (params.lower - s)
    } else {
        0.0
    };
    let oversatiation = if s > params.upper {
        -params.oversatiation_weight * (s - params.upper)
    } else {
        0.0
    };
    (deficiency, oversatiation)
}

/// One metabolism tick: drain, plus gain when something was consumed.
pub fn metabolism_update(s: f64, consumed: bool, params: &HomeostasisParams) -> f64 {
    s - params.drain + if consumed { params.gain } else { 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiminishingMode {
    #[default]
    Linear,
    Sqrt,
}

/// Utility of one more pickup after `n` previous ones.
#[inline]
pub fn diminishing_increment(n: u32, mode: DiminishingMode) -> f64 {
    match mode {
        DiminishingMode::Linear => 1.0,
        // sqrt(n+1) - sqrt(n), rewritten to avoid cancellation for large n.
        DiminishingMode::Sqrt => {
            let n = f64::from(n);
            1.0 / ((n + 1.0).sqrt() + n.sqrt())
        }
    }
}

/// Unit-weight sum of all present dimensions, correctly rounded.
pub fn scalarize(v: &ScoreVector) -> f64 {
    let mut sum = ExactSum::new();
    for (_, x) in v.iter() {
        sum.add(x);
    }
    sum.value()
}

/// Exact floating-point accumulator.
///
/// Keeps a list of non-overlapping partials (Shewchuk's algorithm) so the
/// result is the correctly rounded sum of every input, independent of the
/// order in which inputs or sub-sums arrive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Exact per-episode sums, the unit that report aggregation works on.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub agents: usize,
    pub dimensions: DimSet,
    pub scalar: ExactSum,
    pub per_dimension: Vec<ExactSum>,
}

impl EpisodeSummary {
    pub fn new(dimensions: DimSet, agents: usize) -> Self {
        Self {
            steps: 0,
            agents,
            dimensions,
            scalar: ExactSum::new(),
            per_dimension: vec![ExactSum::new(); ScoreDimension::COUNT],
        }
    }

    /// Records one step's score vectors, one per agent.
    pub fn push_step(&mut self, scores: &[ScoreVector]) {
        for v in scores {
            self.scalar.add(scalarize(v));
            for (d, x) in v.iter() {
                self.per_dimension[d.index()].add(x);
            }
        }
        self.steps += 1;
    }

    fn samples(&self) -> f64 {
        (self.steps * self.agents) as f64
    }

    /// Per-step mean of `d`, pooled over agents.
    pub fn dimension_mean(&self, d: ScoreDimension) -> f64 {
        self.per_dimension[d.index()].value() / self.samples()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub dimension: ScoreDimension,
    pub mean: f64,
    pub std: f64,
}

/// Aggregate statistics for one (environment, policy) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub episodes: usize,
    pub mean_score_per_step: f64,
    pub dimensions: Vec<DimensionStats>,
}

/// Aggregates raw episode records; see [`aggregate_summaries`].
pub fn aggregate(records: &[EpisodeRecord]) -> Result<AggregateRow> {
    let summaries: Vec<EpisodeSummary> = records.iter().map(EpisodeRecord::summary).collect();
    aggregate_summaries(&summaries)
}

/// Mean per-step scalarized score pooled over episodes, steps and agents,
/// plus the across-episode mean and population standard deviation of each
/// dimension's per-step mean.
pub fn aggregate_summaries(summaries: &[EpisodeSummary]) -> Result<AggregateRow> {
    let first = summaries.first().ok_or(Error::EmptyInput)?;
    if summaries.iter().any(|s| s.steps == 0 || s.agents == 0) {
        return Err(Error::EmptyInput);
    }
    let dims = first.dimensions;

    let mut total = ExactSum::new();
    let mut samples = 0usize;
    for s in summaries {
        total.merge(&s.scalar);
        samples += s.steps * s.agents;
    }
    let mean_score_per_step = total.value() / samples as f64;

    let n = summaries.len() as f64;
    let dimensions = dims
        .iter()
        .map(|d| {
            let per_episode: Vec<f64> = summaries.iter().map(|s| s.dimension_mean(d)).collect();
            let mean = per_episode.iter().copied().collect::<ExactSum>().value() / n;
            let var = per_episode
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<ExactSum>()
                .value()
                / n;
            DimensionStats {
                dimension: d,
                mean,
                std: var.sqrt(),
            }
        })
        .collect();

    Ok(AggregateRow {
        episodes: summaries.len(),
        mean_score_per_step,
        dimensions,
    })
}

//! Episode runner, train/test seed partitioning and benchmark reports.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::agents::{Policy, PolicyKind};
use crate::envs::{registry_config, EnvConfig, EnvId};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, splitmix64, tags, RngStream, GOLDEN_GAMMA};
use crate::scoring::{
    aggregate_summaries, scalarize, DimSet, DimensionStats, EpisodeSummary, ExactSum,
    ScoreDimension, ScoreVector,
};
use crate::world::{Action, Observation, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    #[default]
    Test,
}

impl Phase {
    pub fn tag(self) -> u64 {
        match self {
            Phase::Train => 1,
            Phase::Test => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Phase::Train),
            "test" => Ok(Phase::Test),
            _ => Err(format!("unknown phase `{s}`")),
        }
    }
}

/// Identifies one episode of one benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub env_id: String,
    pub phase: Phase,
    pub episode_index: u64,
}

impl SeedSpec {
    pub fn new(env_id: impl Into<String>, phase: Phase, episode_index: u64) -> Self {
        Self {
            env_id: env_id.into(),
            phase,
            episode_index,
        }
    }
}

/// `splitmix64(splitmix64(fnv1a64(env_id)) ^ phase_tag * GOLDEN_GAMMA ^ episode_index)`
/// with phase tags 1 (train) and 2 (test).
pub fn derive_seed(spec: &SeedSpec) -> u64 {
    let env = splitmix64(fnv1a64(&spec.env_id));
    splitmix64(env ^ spec.phase.tag().wrapping_mul(GOLDEN_GAMMA) ^ spec.episode_index)
}

/// Policy stream for agent `agent` of the episode with `seed`.
pub fn policy_rng(seed: u64, agent: usize) -> RngStream {
    RngStream::derive(seed, tags::POLICY_BASE + agent as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub actions: Vec<Action>,
    pub scores: Vec<ScoreVector>,
}

/// Complete trace of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed_spec: SeedSpec,
    pub seed: u64,
    pub config: Arc<EnvConfig>,
    pub steps: Vec<StepRecord>,
    /// Per agent, per dimension totals (canonical order, active dimensions).
    pub totals: Vec<ScoreVector>,
    pub scalarized_total: f64,
}

impl EpisodeRecord {
    /// Exact sums backing report aggregation.
    pub fn summary(&self) -> EpisodeSummary {
        let mut s = EpisodeSummary::new(self.config.active_dimensions, self.config.n_agents);
        for step in &self.steps {
            s.push_step(&step.scores);
        }
        s
    }

    /// Per-step, per-agent mean of the scalarized score.
    pub fn mean_score_per_step(&self) -> f64 {
        self.scalarized_total / (self.steps.len() * self.config.n_agents) as f64
    }
}

/// Accumulates per-step outcomes into an [`EpisodeRecord`].
struct Recorder {
    steps: Vec<StepRecord>,
    totals: Vec<Vec<ExactSum>>,
    scalar: ExactSum,
    dims: DimSet,
}

impl Recorder {
    fn new(config: &EnvConfig) -> Self {
        Self {
            steps: Vec::with_capacity(config.episode_length as usize),
            totals: vec![vec![ExactSum::new(); ScoreDimension::COUNT]; config.n_agents],
            scalar: ExactSum::new(),
            dims: config.active_dimensions,
        }
    }

    fn push(&mut self, actions: Vec<Action>, scores: Vec<ScoreVector>) {
        for (agent, v) in scores.iter().enumerate() {
            self.scalar.add(scalarize(v));
            for (d, x) in v.iter() {
                self.totals[agent][d.index()].add(x);
            }
        }
        self.steps.push(StepRecord { actions, scores });
    }

    fn finish(self, seed_spec: SeedSpec, seed: u64, config: Arc<EnvConfig>) -> EpisodeRecord {
        let dims = self.dims;
        let totals = self
            .totals
            .iter()
            .map(|per_dim| {
                dims.iter()
                    .map(|d| (d, per_dim[d.index()].value()))
                    .collect()
            })
            .collect();
        EpisodeRecord {
            seed_spec,
            seed,
            config,
            steps: self.steps,
            totals,
            scalarized_total: self.scalar.value(),
        }
    }
}

/// Runs one episode, asking `choose` for the joint action before each step.
///
/// `choose` receives the tick and the current per-agent observations.
pub fn run_episode_with<F>(
    config: Arc<EnvConfig>,
    spec: SeedSpec,
    mut choose: F,
) -> Result<EpisodeRecord>
where
    F: FnMut(u32, &[Observation]) -> Vec<Action>,
{
    let seed = derive_seed(&spec);
    let mut world = WorldState::new(Arc::clone(&config), seed)?;
    let mut recorder = Recorder::new(&config);
    let mut observations = world.observe_all();
    while !world.is_done() {
        let actions = choose(world.tick(), &observations);
        let outcome = world.step(&actions)?;
        observations = outcome.observations;
        recorder.push(actions, outcome.scores);
    }
    Ok(recorder.finish(spec, seed, config))
}

/// Runs one episode with one baseline policy per agent.
pub fn run_episode(
    config: Arc<EnvConfig>,
    policies: &[PolicyKind],
    spec: SeedSpec,
) -> Result<EpisodeRecord> {
    if policies.len() != config.n_agents {
        return Err(Error::ActionCount {
            expected: config.n_agents,
            got: policies.len(),
        });
    }
    let seed = derive_seed(&spec);
    let mut agents: Vec<Policy> = policies
        .iter()
        .enumerate()
        .map(|(i, &kind)| Policy::new(kind, &config, policy_rng(seed, i)))
        .collect();
    run_episode_with(config, spec, |_, obs| {
        agents.iter_mut().zip(obs).map(|(p, o)| p.act(o)).collect()
    })
}

/// Replays a fixed joint-action script; missing steps default to all-noop.
pub fn run_scripted(
    config: Arc<EnvConfig>,
    spec: SeedSpec,
    script: &[Vec<Action>],
) -> Result<EpisodeRecord> {
    let n = config.n_agents;
    run_episode_with(config, spec, |tick, _| {
        script
            .get(tick as usize)
            .cloned()
            .unwrap_or_else(|| vec![Action::NoOp; n])
    })
}

/// One row of a benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub env_id: EnvId,
    pub policy: String,
    pub episodes: usize,
    #[serde(serialize_with = "ser_f64")]
    pub mean_score_per_step: f64,
    #[serde(serialize_with = "ser_stats")]
    pub dimensions: Vec<DimensionStats>,
    #[serde(serialize_with = "ser_f64")]
    pub wall_clock_s: f64,
    pub config: EnvConfig,
}

impl BenchmarkRow {
    pub fn dimension(&self, d: ScoreDimension) -> Option<&DimensionStats> {
        self.dimensions.iter().find(|s| s.dimension == d)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkOptions {
    pub episodes: usize,
    pub phase: Phase,
    /// Overrides the configured episode length.
    pub steps: Option<u32>,
    /// Run episodes on the rayon pool; results are merged in index order.
    pub parallel: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            episodes: 1000,
            phase: Phase::Test,
            steps: None,
            parallel: true,
        }
    }
}

/// Runs `episodes` episodes of `config` with every agent using `policy`.
pub fn run_benchmark(
    config: &EnvConfig,
    policy: PolicyKind,
    options: BenchmarkOptions,
) -> Result<BenchmarkRow> {
    let mut config = config.clone();
    if let Some(steps) = options.steps {
        config.episode_length = steps;
    }
    config.validate()?;
    let config = Arc::new(config);
    let policies = vec![policy; config.n_agents];
    let env_name = config.env_id.name();
    let started = Instant::now();

    let run_one = |i: usize| -> Result<EpisodeSummary> {
        let spec = SeedSpec::new(env_name, options.phase, i as u64);
        Ok(run_episode(Arc::clone(&config), &policies, spec)?.summary())
    };
    let summaries: Vec<EpisodeSummary> = if options.parallel {
        (0..options.episodes)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<_>>()?
    } else {
        (0..options.episodes).map(run_one).collect::<Result<_>>()?
    };
    let row = aggregate_summaries(&summaries)?;

    Ok(BenchmarkRow {
        env_id: config.env_id,
        policy: policy.name().to_string(),
        episodes: row.episodes,
        mean_score_per_step: row.mean_score_per_step,
        dimensions: row.dimensions,
        wall_clock_s: started.elapsed().as_secs_f64(),
        config: (*config).clone(),
    })
}

/// Environment variable capping harness parallelism.
pub const THREADS_ENV: &str = "BIOGRID_THREADS";

/// Sizes the global rayon pool from `BIOGRID_THREADS` when it holds a
/// positive integer. Returns the thread count in effect.
pub fn init_threads_from_env() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    rayon::current_num_threads()
}

/// Every registry environment against every baseline policy.
pub fn run_suite(options: BenchmarkOptions) -> Result<BenchmarkReport> {
    let mut rows = Vec::new();
    for id in EnvId::ALL {
        let config = registry_config(id);
        for policy in PolicyKind::ALL {
            rows.push(run_benchmark(&config, policy, options)?);
        }
    }
    Ok(BenchmarkReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn ser_f64<S: Serializer>(x: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format_f64(*x))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(serializer)
}

fn ser_stats<S: Serializer>(
    stats: &[DimensionStats],
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Stat {
        dimension: ScoreDimension,
        #[serde(serialize_with = "ser_f64")]
        mean: f64,
        #[serde(serialize_with = "ser_f64")]
        std: f64,
    }
    serializer.collect_seq(stats.iter().map(|s| Stat {
        dimension: s.dimension,
        mean: s.mean,
        std: s.std,
    }))
}

/// Options that do not change the report schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteOptions {
    /// Write 0 in `wall_clock_s` so reports are byte-reproducible.
    pub omit_timing: bool,
}

impl BenchmarkReport {
    /// Union of active dimensions over all rows.
    pub fn dimensions(&self) -> DimSet {
        self.rows
            .iter()
            .fold(DimSet::EMPTY, |s, r| s.union(r.config.active_dimensions))
    }

    /// CSV with columns `env_id, policy, episodes, mean_score_per_step`, then
    /// `mean_<DIM>, std_<DIM>` for each dimension active in any row (canonical
    /// order; empty where a row does not score it), then `wall_clock_s`.
    pub fn to_csv(&self, options: WriteOptions) -> Result<String> {
        let dims: Vec<ScoreDimension> = self.dimensions().iter().collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["env_id", "policy", "episodes", "mean_score_per_step"]
            .map(String::from)
            .to_vec();
        for d in &dims {
            header.push(format!("mean_{d}"));
            header.push(format!("std_{d}"));
        }
        header.push("wall_clock_s".into());
        w.write_record(&header)
            .map_err(|e| Error::Encode(e.to_string()))?;

        for row in &self.rows {
            let mut rec = vec![
                row.env_id.name().to_string(),
                row.policy.clone(),
                row.episodes.to_string(),
                format_f64(row.mean_score_per_step),
            ];
            for &d in &dims {
                match row.dimension(d) {
                    Some(s) => {
                        rec.push(format_f64(s.mean));
                        rec.push(format_f64(s.std));
                    }
                    None => {
                        rec.push(String::new());
                        rec.push(String::new());
                    }
                }
            }
            let clock = if options.omit_timing {
                0.0
            } else {
                row.wall_clock_s
            };
            rec.push(format_f64(clock));
            w.write_record(&rec)
                .map_err(|e| Error::Encode(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Encode(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Encode(e.to_string()))
    }

    /// JSON document `{"version": 1, "rows": [...]}`; each row embeds its
    /// config snapshot.
    pub fn to_json(&self, options: WriteOptions) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            version: u32,
            rows: &'a [BenchmarkRow],
        }
        let mut rows = self.rows.clone();
        if options.omit_timing {
            rows.iter_mut().for_each(|r| r.wall_clock_s = 0.0);
        }
        serde_json::to_string_pretty(&Doc {
            version: 1,
            rows: &rows,
        })
        .map_err(|e| Error::Encode(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            version: u32,
            rows: Vec<BenchmarkRow>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Encode(e.to_string()))?;
        if doc.version != 1 {
            return Err(Error::Encode(format!(
                "unsupported report version {}",
                doc.version
            )));
        }
        Ok(BenchmarkReport { rows: doc.rows })
    }
}

pub fn write_report(
    report: &BenchmarkReport,
    format: ReportFormat,
    path: &Path,
    options: WriteOptions,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv(options)?,
        ReportFormat::Json => report.to_json(options)?,
    };
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_pure() {
        let s = SeedSpec::new("food_unbounded", Phase::Test, 7);
        assert_eq!(derive_seed(&s), derive_seed(&s.clone()));
    }

    #[test]
    fn seed_formula_matches_definition() {
        let s = SeedSpec::new("predators", Phase::Train, 3);
        let expected = splitmix64(splitmix64(fnv1a64("predators")) ^ GOLDEN_GAMMA ^ 3);
        assert_eq!(derive_seed(&s), expected);
    }

    #[test]
    fn episode_has_configured_length() {
        let config = Arc::new(registry_config(EnvId::FoodUnbounded));
        let r = run_episode(
            config,
            &[PolicyKind::Random],
            SeedSpec::new("food_unbounded", Phase::Test, 0),
        )
        .unwrap();
        assert_eq!(r.steps.len(), 400);
    }

    #[test]
    fn run_episode_checks_policy_count() {
        let config = Arc::new(registry_config(EnvId::FoodSharing));
        let err = run_episode(
            config,
            &[PolicyKind::Random],
            SeedSpec::new("food_sharing", Phase::Test, 0),
        );
        assert!(matches!(
            err,
            Err(Error::ActionCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn single_episode_benchmark_equals_episode_mean() {
        let config = registry_config(EnvId::DangerTiles);
        let opts = BenchmarkOptions {
            episodes: 1,
            ..Default::default()
        };
        let row = run_benchmark(&config, PolicyKind::Random, opts).unwrap();
        let r = run_episode(
            Arc::new(config),
            &[PolicyKind::Random],
            SeedSpec::new("danger_tiles", Phase::Test, 0),
        )
        .unwrap();
        assert_eq!(row.mean_score_per_step, r.mean_score_per_step());
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = BenchmarkReport::default()
            .to_csv(WriteOptions::default())
            .unwrap();
        assert_eq!(
            csv,
            "env_id,policy,episodes,mean_score_per_step,wall_clock_s\n"
        );
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -88.93, 1.0 / 3.0, 0.0, 1e-300, 123456789.12345679] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn write_reports_io_error_carries_path() {
        let report = BenchmarkReport::default();
        let err = write_report(
            &report,
            ReportFormat::Csv,
            Path::new("/nonexistent/dir/r.csv"),
            WriteOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/r.csv"));
    }
}

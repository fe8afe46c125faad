//! Newline-delimited JSON protocol exposing reset/step over TCP or stdio.
//!
//! Every request line receives exactly one reply line, and every reply
//! carries `"v": 1`. One client drives all agents of a session with joint
//! actions.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::envs::{registry_config, EnvConfig, EnvId};
use crate::harness::{derive_seed, Phase, SeedSpec};
use crate::scoring::{ScoreDimension, ScoreVector};
use crate::world::{Action, Layer, Observation, WorldState};

pub const PROTOCOL_VERSION: u32 = 1;

/// Error reply codes.
pub mod codes {
    pub const MALFORMED: &str = "malformed";
    pub const UNKNOWN_TYPE: &str = "unknown_type";
    pub const UNKNOWN_ENV: &str = "unknown_env";
    pub const UNKNOWN_AGENT: &str = "unknown_agent";
    pub const MISSING_ACTION: &str = "missing_action";
    pub const BAD_ACTION: &str = "bad_action";
    pub const PHASE: &str = "phase";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Reset {
        env: String,
        phase: Phase,
        episode: u64,
    },
    Act {
        actions: BTreeMap<String, String>,
    },
    Close,
}

/// Interoceptive readings in a wire observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireInteroception {
    pub food: f64,
    pub drink: Option<f64>,
}

/// One agent's observation on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireObservation {
    /// `[row, col]`
    pub position: [usize; 2],
    /// Layer name to row-major flags.
    pub layers: BTreeMap<String, Vec<bool>>,
    pub interoception: WireInteroception,
    pub gold_collected: u32,
    pub silver_collected: u32,
}

impl From<&Observation> for WireObservation {
    fn from(obs: &Observation) -> Self {
        Self {
            position: [obs.self_position.row, obs.self_position.col],
            layers: Layer::ALL
                .iter()
                .map(|&l| (l.name().to_string(), obs.layer(l)))
                .collect(),
            interoception: WireInteroception {
                food: obs.interoception.food_satiation,
                drink: obs.interoception.drink_satiation,
            },
            gold_collected: obs.gold_collected,
            silver_collected: obs.silver_collected,
        }
    }
}

pub type WireScores = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Obs {
        v: u32,
        env: String,
        phase: Phase,
        episode: u64,
        tick: u32,
        width: usize,
        height: usize,
        dimensions: Vec<ScoreDimension>,
        observations: BTreeMap<String, WireObservation>,
    },
    Step {
        v: u32,
        scores: WireScores,
        done: bool,
        tick: u32,
        observations: BTreeMap<String, WireObservation>,
    },
    Closed {
        v: u32,
    },
    Error {
        v: u32,
        code: String,
        detail: String,
    },
}

impl Reply {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        Reply::Error {
            v: PROTOCOL_VERSION,
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("replies always serialize")
    }
}

pub fn wire_observations(obs: &[Observation]) -> BTreeMap<String, WireObservation> {
    obs.iter()
        .map(|o| (o.self_id.to_string(), o.into()))
        .collect()
}

pub fn wire_scores(scores: &[ScoreVector]) -> WireScores {
    scores
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (
                i.to_string(),
                v.iter().map(|(d, x)| (d.name().to_string(), x)).collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPhase {
    AwaitingReset,
    AwaitingActions,
    Finished,
}

struct Episode {
    config: Arc<EnvConfig>,
    world: WorldState,
}

/// Protocol state for one connection.
pub struct Session {
    episode: Option<Episode>,
    phase: SessionPhase,
    closed: bool,
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Self {
            episode: None,
            phase: SessionPhase::AwaitingReset,
            closed: false,
        }
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.episode.as_ref().map(|e| &e.world)
    }

    /// Handles one request line and returns the reply line (without newline).
    pub fn handle_line(&mut self, line: &str) -> String {
        self.handle_message(line).to_line()
    }

    pub fn handle_message(&mut self, line: &str) -> Reply {
        let value: Value = match serde_json::from_str(line.trim()) {
            Ok(v) => v,
            Err(e) => return Reply::error(codes::MALFORMED, format!("invalid JSON: {e}")),
        };
        let Some(kind) = value.get("type").and_then(Value::as_str) else {
            return Reply::error(
                codes::MALFORMED,
                "expected an object with a string `type` field",
            );
        };
        if !matches!(kind, "reset" | "act" | "close") {
            return Reply::error(
                codes::UNKNOWN_TYPE,
                format!("unknown message type `{kind}`"),
            );
        }
        let request: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return Reply::error(codes::MALFORMED, e.to_string()),
        };
        match request {
            Request::Reset {
                env,
                phase,
                episode,
            } => self.reset(&env, phase, episode),
            Request::Act { actions } => self.act(&actions),
            Request::Close => {
                self.closed = true;
                self.episode = None;
                self.phase = SessionPhase::AwaitingReset;
                Reply::Closed {
                    v: PROTOCOL_VERSION,
                }
            }
        }
    }

    fn reset(&mut self, env: &str, phase: Phase, episode: u64) -> Reply {
        let id: EnvId = match env.parse() {
            Ok(id) => id,
            Err(e) => return Reply::error(codes::UNKNOWN_ENV, e.to_string()),
        };
        let config = Arc::new(registry_config(id));
        let seed = derive_seed(&SeedSpec::new(id.name(), phase, episode));
        let world = match WorldState::new(Arc::clone(&config), seed) {
            Ok(w) => w,
            Err(e) => return Reply::error(codes::MALFORMED, e.to_string()),
        };
        let reply = Reply::Obs {
            v: PROTOCOL_VERSION,
            env: id.name().to_string(),
            phase,
            episode,
            tick: world.tick(),
            width: world.width(),
            height: world.height(),
            dimensions: config.active_dimensions.iter().collect(),
            observations: wire_observations(&world.observe_all()),
        };
        self.episode = Some(Episode { config, world });
        self.phase = SessionPhase::AwaitingActions;
        reply
    }

    fn act(&mut self, actions: &BTreeMap<String, String>) -> Reply {
        let Some(episode) = self
            .episode
            .as_mut()
            .filter(|_| self.phase == SessionPhase::AwaitingActions)
        else {
            let detail = match self.phase {
                SessionPhase::Finished => "episode finished; send reset or close",
                _ => "no active episode; send reset first",
            };
            return Reply::error(codes::PHASE, detail);
        };
        let n = episode.config.n_agents;
        let mut joint: Vec<Option<Action>> = vec![None; n];
        for (key, name) in actions {
            let id = match key.parse::<usize>() {
                Ok(id) if id < n => id,
                _ => {
                    return Reply::error(
                        codes::UNKNOWN_AGENT,
                        format!("no agent `{key}` in a {n}-agent session"),
                    )
                }
            };
            match name.parse::<Action>() {
                Ok(a) => joint[id] = Some(a),
                Err(e) => return Reply::error(codes::BAD_ACTION, e),
            }
        }
        let joint: Vec<Action> = match joint.iter().position(Option::is_none) {
            Some(missing) => {
                return Reply::error(
                    codes::MISSING_ACTION,
                    format!("no action for agent {missing}"),
                )
            }
            None => joint.into_iter().flatten().collect(),
        };
        let outcome = match episode.world.step(&joint) {
            Ok(o) => o,
            Err(e) => return Reply::error(codes::PHASE, e.to_string()),
        };
        let done = episode.world.is_done();
        if done {
            self.phase = SessionPhase::Finished;
        }
        Reply::Step {
            v: PROTOCOL_VERSION,
            scores: wire_scores(&outcome.scores),
            done,
            tick: episode.world.tick(),
            observations: wire_observations(&outcome.observations),
        }
    }
}

/// Runs one session over a line-oriented byte stream until EOF or `close`.
pub fn serve_stream<R: BufRead, W: Write>(mut reader: R, mut writer: W) -> io::Result<()> {
    let mut session = Session::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        let reply = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => session.handle_line(line),
            Err(e) => Reply::error(codes::MALFORMED, format!("invalid UTF-8: {e}")).to_line(),
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if session.is_closed() {
            return Ok(());
        }
    }
}

/// Where the server listens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio,
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    /// `stdio:` / `stdio` or `host:port`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stdio" | "stdio:" => Ok(Endpoint::Stdio),
            _ if s
                .rsplit_once(':')
                .is_some_and(|(_, port)| port.parse::<u16>().is_ok()) =>
            {
                Ok(Endpoint::Tcp(s.to_string()))
            }
            _ => Err(format!("expected `host:port` or `stdio:`, got `{s}`")),
        }
    }
}

/// A bound TCP listener; each accepted connection gets its own thread and session.
pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            thread::spawn(move || {
                let _ = handle_connection(stream);
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> thread::JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

fn handle_connection(stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    serve_stream(reader, BufWriter::new(stream))
}

/// Serves until shutdown: TCP forever, stdio until EOF.
pub fn serve(endpoint: &Endpoint) -> io::Result<()> {
    match endpoint {
        Endpoint::Tcp(addr) => Server::bind(addr.as_str())?.run(),
        Endpoint::Stdio => serve_stream(io::stdin().lock(), io::stdout().lock()),
    }
}

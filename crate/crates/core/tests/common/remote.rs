use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;

use biogrid_core::envs::{registry_config, EnvId};
use biogrid_core::harness::{derive_seed, run_scripted, Phase, SeedSpec};
use biogrid_core::protocol::{wire_observations, wire_scores, Reply, Server};
use biogrid_core::rng::RngStream;
use biogrid_core::world::{Action, WorldState};

pub fn start_server() -> SocketAddr {
    let server = Server::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    server.spawn();
    addr
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let writer = TcpStream::connect(addr).unwrap();
        writer.set_nodelay(true).unwrap();
        let reader = BufReader::new(writer.try_clone().unwrap());
        Self { reader, writer }
    }

    pub fn send_raw(&mut self, line: &[u8]) -> String {
        self.writer.write_all(line).unwrap();
        self.writer.write_all(b"\n").unwrap();
        let mut reply = String::new();
        self.reader.read_line(&mut reply).unwrap();
        reply
    }

    pub fn send(&mut self, line: &str) -> Reply {
        serde_json::from_str(&self.send_raw(line.as_bytes())).unwrap()
    }
}

pub fn reset_line(id: EnvId, episode: u64) -> String {
    format!(
        r#"{{"type":"reset","env":"{}","phase":"test","episode":{episode}}}"#,
        id.name()
    )
}

pub fn act_line(actions: &[Action]) -> String {
    let body: Vec<String> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| format!(r#""{i}":"{}""#, a.name()))
        .collect();
    format!(r#"{{"type":"act","actions":{{{}}}}}"#, body.join(","))
}

pub fn script(n_agents: usize, steps: usize, seed: u64) -> Vec<Vec<Action>> {
    let mut rng = RngStream::new(seed);
    (0..steps)
        .map(|_| (0..n_agents).map(|_| Action::ALL[rng.below(5)]).collect())
        .collect()
}

/// Plays `script` over the wire and in process; returns the first
/// discrepancy, if any.
pub fn compare_remote(
    client: &mut Client,
    id: EnvId,
    episode: u64,
    script: &[Vec<Action>],
) -> Result<(), String> {
    let config = Arc::new(registry_config(id));
    let spec = SeedSpec::new(id.name(), Phase::Test, episode);
    let mut local = WorldState::new(Arc::clone(&config), derive_seed(&spec)).unwrap();
    let record = run_scripted(Arc::clone(&config), spec, script).unwrap();

    match client.send(&reset_line(id, episode)) {
        Reply::Obs {
            observations,
            width,
            height,
            ..
        } => {
            if (width, height) != (local.width(), local.height()) {
                return Err("grid size differs".into());
            }
            if observations != wire_observations(&local.observe_all()) {
                return Err("initial observations differ".into());
            }
        }
        other => return Err(format!("reset answered {other:?}")),
    }
    for (t, actions) in script.iter().enumerate() {
        let outcome = local.step(actions).unwrap();
        if outcome.scores != record.steps[t].scores {
            return Err(format!("in-process runs diverge at step {t}"));
        }
        match client.send(&act_line(actions)) {
            Reply::Step {
                scores,
                observations,
                done,
                tick,
                ..
            } => {
                if scores != wire_scores(&outcome.scores) {
                    return Err(format!("scores differ at step {t}"));
                }
                if observations != wire_observations(&outcome.observations) {
                    return Err(format!("observations differ at step {t}"));
                }
                if tick != local.tick() || done != local.is_done() {
                    return Err(format!("tick/done differ at step {t}"));
                }
            }
            other => return Err(format!("step {t} answered {other:?}")),
        }
    }
    Ok(())
}

//! Independent reference computations.

use biogrid_core::harness::EpisodeRecord;
use biogrid_core::scoring::{AggregateRow, ScoreDimension, ScoreVector};
use biogrid_core::world::{Action, Layer, Observation, Position};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Every finite f64 is an integer multiple of 2^-1074.
pub fn to_fixed(x: f64) -> BigInt {
    assert!(x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7FF) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, shift) = if exp == 0 {
        (frac, 0)
    } else {
        (frac | (1u64 << 52), exp - 1)
    };
    let v = BigInt::from(mantissa) << shift as usize;
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// Correctly rounded (half to even) conversion back from 2^-1074 units.
pub fn from_fixed(s: &BigInt) -> f64 {
    if s.is_zero() {
        return 0.0;
    }
    let negative = s.is_negative();
    let mag = s.abs();
    let len = mag.bits() as i64;
    let (q, scale) = if len <= 53 {
        (mag.to_u64().unwrap(), 0i64)
    } else {
        let shift = (len - 53) as usize;
        let mut q: BigInt = &mag >> shift;
        let rem: BigInt = &mag - (&q << shift);
        let half: BigInt = BigInt::one() << (shift - 1);
        if rem > half || (rem == half && (&q & BigInt::one()) == BigInt::one()) {
            q += 1;
        }
        (q.to_u64().unwrap(), shift as i64)
    };
    let e = scale - 1074;
    let pow2 = if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (e + 1074))
    };
    let value = q as f64 * pow2;
    if negative {
        -value
    } else {
        value
    }
}

/// Exact sum, rounded once.
pub fn exact(xs: impl IntoIterator<Item = f64>) -> f64 {
    from_fixed(
        &xs.into_iter()
            .map(to_fixed)
            .fold(BigInt::zero(), |a, b| a + b),
    )
}

pub fn scalar(v: &ScoreVector) -> f64 {
    exact(v.iter().map(|(_, x)| x))
}

pub struct OracleRow {
    pub mean: f64,
    pub dims: Vec<(ScoreDimension, f64, f64)>,
}

/// Report statistics recomputed from raw per-step score vectors.
pub fn aggregate(records: &[EpisodeRecord]) -> OracleRow {
    let samples: usize = records
        .iter()
        .map(|r| r.steps.len() * r.config.n_agents)
        .sum();
    let total = exact(
        records
            .iter()
            .flat_map(|r| r.steps.iter().flat_map(|s| s.scores.iter().map(scalar))),
    );
    let n = records.len() as f64;
    let dims = records[0]
        .config
        .active_dimensions
        .iter()
        .map(|d| {
            let per_episode: Vec<f64> = records
                .iter()
                .map(|r| {
                    let sum = exact(
                        r.steps
                            .iter()
                            .flat_map(|s| s.scores.iter().map(|v| v.get(d).unwrap())),
                    );
                    sum / (r.steps.len() * r.config.n_agents) as f64
                })
                .collect();
            let mean = exact(per_episode.iter().copied()) / n;
            let var = exact(per_episode.iter().map(|x| (x - mean) * (x - mean))) / n;
            (d, mean, var.sqrt())
        })
        .collect();
    OracleRow {
        mean: total / samples as f64,
        dims,
    }
}

/// Compares an aggregate row with the oracle bit for bit.
pub fn check_aggregate(row: &AggregateRow, records: &[EpisodeRecord]) -> Result<(), String> {
    let expected = aggregate(records);
    if row.mean_score_per_step != expected.mean {
        return Err(format!(
            "mean {} != {}",
            row.mean_score_per_step, expected.mean
        ));
    }
    let got: Vec<(ScoreDimension, f64, f64)> = row
        .dimensions
        .iter()
        .map(|s| (s.dimension, s.mean, s.std))
        .collect();
    if got != expected.dims {
        return Err(format!("dimension stats {got:?} != {:?}", expected.dims));
    }
    Ok(())
}

const INF: usize = usize::MAX / 4;

/// All-pairs shortest path lengths over open cells by Floyd-Warshall.
pub fn all_pairs(obs: &Observation, open: impl Fn(Position) -> bool) -> Vec<Vec<usize>> {
    let n = obs.width * obs.height;
    let at = |i: usize| Position::new(i / obs.width, i % obs.width);
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        if !open(at(i)) {
            continue;
        }
        row[i] = 0;
        for a in Action::MOVES {
            if let Some(q) = obs.neighbour(at(i), a) {
                if open(q) {
                    row[q.row * obs.width + q.col] = 1;
                }
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Checks a first step toward `target` against the all-pairs oracle: it
/// must start a shortest path to the nearest target, ties broken by the
/// smallest (row, col). Returns whether any target was reachable.
pub fn check_first_step(
    obs: &Observation,
    target: Layer,
    blocked: &dyn Fn(Position) -> bool,
    got: Option<Action>,
) -> Result<bool, String> {
    let w = obs.width;
    let idx = |p: Position| p.row * w + p.col;
    let start = obs.self_position;
    let open = |p: Position| p == start || (!obs.has(Layer::Wall, p) && !blocked(p));
    let d = all_pairs(obs, open);
    let targets: Vec<Position> = obs.positions(target).filter(|&t| open(t)).collect();
    let nearest = targets
        .iter()
        .map(|&t| d[idx(start)][idx(t)])
        .min()
        .unwrap_or(INF);
    if nearest == INF {
        return match got {
            None => Ok(false),
            Some(a) => Err(format!(
                "from {start}: returned {a:?} with no reachable target"
            )),
        };
    }
    let Some(step) = got else {
        return Err(format!(
            "from {start}: no step although a target is {nearest} away"
        ));
    };
    if nearest == 0 {
        return if step == Action::NoOp {
            Ok(true)
        } else {
            Err(format!("on target but moved {step:?}"))
        };
    }
    let chosen = *targets
        .iter()
        .filter(|&&t| d[idx(start)][idx(t)] == nearest)
        .min()
        .unwrap();
    let Some(q) = obs.neighbour(start, step).filter(|&q| open(q)) else {
        return Err(format!("from {start}: {step:?} leaves the open cells"));
    };
    if d[idx(q)][idx(chosen)] != nearest - 1 {
        return Err(format!(
            "from {start}: {step:?} is not on a shortest path to {chosen}"
        ));
    }
    Ok(true)
}

use std::collections::HashMap;

use crate::error::SnapshotError;
use crate::geometry::Direction;
use crate::observe::{ObsKey, Observation};
use crate::rng::{Pcg32, LEARNER_STREAM};

use super::{Learner, Transition};

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"AMZQ1";

/// Aliased observations make long discount horizons unstable; a short
/// horizon with a fast learning rate recovers far more often.
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.5;

/// One-step Q-learning over quantized discrete observations.
///
/// Unseen observations have all action values at zero. Greedy ties resolve
/// to the lowest action index (E, N, W, S).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    pub alpha: f64,
    pub gamma: f64,
    table: HashMap<ObsKey, [f64; 4]>,
    rng: Pcg32,
}

impl Default for TabularQ {
    fn default() -> Self {
        TabularQ::new(DEFAULT_ALPHA, DEFAULT_GAMMA, 0)
    }
}

impl TabularQ {
    pub fn new(alpha: f64, gamma: f64, seed: u64) -> Self {
        TabularQ {
            alpha,
            gamma,
            table: HashMap::new(),
            rng: Pcg32::new(seed, LEARNER_STREAM),
        }
    }

    pub fn values(&self, obs: &Observation) -> [f64; 4] {
        self.table.get(&obs.key()).copied().unwrap_or([0.0; 4])
    }

    pub fn set_values(&mut self, obs: &Observation, values: [f64; 4]) {
        self.table.insert(obs.key(), values);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn argmax(values: &[f64; 4]) -> usize {
        let mut best = 0;
        for a in 1..4 {
            if values[a] > values[best] {
                best = a;
            }
        }
        best
    }
}

impl Learner for TabularQ {
    fn act(&mut self, obs: &Observation, epsilon: f64) -> Direction {
        if self.rng.unit() < epsilon {
            Direction::from_index(self.rng.below(4) as usize)
        } else {
            self.greedy(obs)
        }
    }

    fn greedy(&self, obs: &Observation) -> Direction {
        match self.table.get(&obs.key()) {
            Some(values) => Direction::from_index(Self::argmax(values)),
            None => Direction::East,
        }
    }

    fn learn(&mut self, t: &Transition) {
        let bootstrap = if t.terminal {
            0.0
        } else {
            let next = self.values(&t.next);
            next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let target = t.reward + self.gamma * bootstrap;
        let q = &mut self.table.entry(t.observation.key()).or_insert([0.0; 4])[t.action.index()];
        *q += self.alpha * (target - *q);
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = Pcg32::new(seed, LEARNER_STREAM);
    }

    /// `AMZQ1`, then little-endian: alpha, gamma (f64), rng state and
    /// increment (u64), entry count (u64), and the entries sorted by key,
    /// each eight u16 key channels followed by four f64 values.
    fn snapshot(&self) -> Vec<u8> {
        let mut keys: Vec<&ObsKey> = self.table.keys().collect();
        keys.sort_unstable();
        let mut out = Vec::with_capacity(45 + keys.len() * 48);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        let (state, inc) = self.rng.parts();
        out.extend_from_slice(&state.to_le_bytes());
        out.extend_from_slice(&inc.to_le_bytes());
        out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for key in keys {
            for channel in key {
                out.extend_from_slice(&channel.to_le_bytes());
            }
            for v in &self.table[key] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<(), SnapshotError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(SNAPSHOT_MAGIC.len())? != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let alpha = r.f64()?;
        let gamma = r.f64()?;
        let state = r.u64()?;
        let inc = r.u64()?;
        let count = r.u64()?;
        if !alpha.is_finite() || !gamma.is_finite() {
            return Err(SnapshotError::NonFinite);
        }
        let mut table = HashMap::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            let mut key = [0u16; 8];
            for k in &mut key {
                *k = u16::from_le_bytes(r.take(2)?.try_into().expect("two bytes"));
            }
            let mut values = [0.0; 4];
            for v in &mut values {
                *v = r.f64()?;
                if !v.is_finite() {
                    return Err(SnapshotError::NonFinite);
                }
            }
            table.insert(key, values);
        }
        if r.at != bytes.len() {
            return Err(SnapshotError::TrailingBytes(bytes.len() - r.at));
        }
        self.alpha = alpha;
        self.gamma = gamma;
        self.rng = Pcg32::from_parts(state, inc);
        self.table = table;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.at.checked_add(n).ok_or(SnapshotError::Truncated)?;
        let slice = self.bytes.get(self.at..end).ok_or(SnapshotError::Truncated)?;
        self.at = end;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: f32) -> Observation {
        Observation([1.0, 0.0, 0.5, 1.0, 0.0, v, 0.0, 0.0])
    }

    fn transition(o: Observation, a: Direction, r: f64, n: Observation, terminal: bool) -> Transition {
        Transition {
            observation: o,
            action: a,
            reward: r,
            next: n,
            terminal,
        }
    }

    #[test]
    fn alpha_one_gamma_zero_copies_reward() {
        let mut q = TabularQ::new(1.0, 0.0, 0);
        q.set_values(&obs(0.5), [3.0, 3.0, 3.0, 3.0]);
        q.learn(&transition(obs(0.0), Direction::North, -1.5, obs(0.5), false));
        assert_eq!(q.values(&obs(0.0))[1], -1.5);
    }

    #[test]
    fn terminal_ignores_gamma() {
        let mut q = TabularQ::new(1.0, 0.9, 0);
        q.set_values(&obs(0.5), [10.0; 4]);
        q.learn(&transition(obs(0.0), Direction::West, 4.0, obs(0.5), true));
        assert_eq!(q.values(&obs(0.0))[2], 4.0);
    }

    #[test]
    fn three_transition_sequence() {
        // alpha = 0.5, gamma = 0.5, all values start at zero.
        let (a, b) = (obs(0.0), obs(1.0));
        let mut q = TabularQ::new(0.5, 0.5, 0);
        q.learn(&transition(a, Direction::East, -1.0, b, false));
        // Q(a,E) = 0.5 * (-1 + 0.5 * 0) = -0.5
        q.learn(&transition(b, Direction::North, 17.0, a, true));
        // Q(b,N) = 0.5 * 17 = 8.5
        q.learn(&transition(a, Direction::East, -1.0, b, false));
        // Q(a,E) = -0.5 + 0.5 * (-1 + 0.5 * 8.5 + 0.5) = 1.375
        assert_eq!(q.values(&a), [1.375, 0.0, 0.0, 0.0]);
        assert_eq!(q.values(&b), [0.0, 8.5, 0.0, 0.0]);
    }

    #[test]
    fn greedy_prefers_lowest_index_on_ties() {
        let mut q = TabularQ::default();
        assert_eq!(q.greedy(&obs(0.0)), Direction::East);
        q.set_values(&obs(0.0), [0.0, 2.0, 2.0, 1.0]);
        assert_eq!(q.greedy(&obs(0.0)), Direction::North);
    }

    #[test]
    fn snapshot_round_trip_and_rejections() {
        let mut q = TabularQ::new(0.2, 0.95, 9);
        q.set_values(&obs(0.0), [1.0, -2.0, 0.25, 3.5]);
        q.set_values(&obs(1.0), [0.0, 0.0, 7.0, 0.0]);
        q.act(&obs(0.0), 0.5);
        let bytes = q.snapshot();
        assert_eq!(&bytes[..5], b"AMZQ1");
        let mut r = TabularQ::default();
        r.restore(&bytes).unwrap();
        assert_eq!(r, q);
        assert_eq!(r.snapshot(), bytes);

        assert!(matches!(r.restore(b"AMZQ2"), Err(SnapshotError::BadMagic)));
        assert!(matches!(r.restore(&bytes[..bytes.len() - 1]), Err(SnapshotError::Truncated)));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(r.restore(&long), Err(SnapshotError::TrailingBytes(1))));
    }
}

//! Simulated opinion-sharing layer: range-limited connectivity, a compact
//! fixed-point wire format, the per-agent message buffer, and a seeded
//! lossy exchange.
//!
//! Wire layout (little-endian):
//!
//! ```text
//! offset 0  sender_id   u8
//! offset 1  seq         u16
//! offset 3  resolution  u8   (0 = coarse, 1 = fine)
//! offset 4  payload     N_O x i8  (coarse, scale z_clip / 127)
//!                       N_O x i32 (fine,   scale z_clip / 2^31)
//! ```

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::opinion::NeighborOpinionView;

pub const HEADER_LEN: usize = 4;
pub const DEFAULT_Z_CLIP: f64 = 100.0;
const FINE_DENOM: f64 = 2147483648.0; // 2^31

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectivityModel {
    pub comm_range: f64,
    pub drop_probability: f64,
    pub latency_ticks: u32,
}

impl Default for ConnectivityModel {
    fn default() -> Self {
        ConnectivityModel {
            comm_range: 160.0,
            drop_probability: 0.0,
            latency_ticks: 0,
        }
    }
}

impl ConnectivityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.comm_range > 0.0) || !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::InvalidInput(format!("invalid connectivity model {self:?}")));
        }
        Ok(())
    }
}

/// Unweighted adjacency with self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub adjacency: Vec<Vec<bool>>,
    /// Neighbor counts, excluding self.
    pub degrees: Vec<usize>,
}

impl NetworkSnapshot {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Removes every link of `agent` (the self-loop stays).
    pub fn isolate(&mut self, agent: usize) {
        for k in 0..self.len() {
            if k != agent && self.adjacency[agent][k] {
                self.adjacency[agent][k] = false;
                self.adjacency[k][agent] = false;
                self.degrees[k] -= 1;
            }
        }
        self.degrees[agent] = 0;
    }

    pub fn neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[agent]
            .iter()
            .enumerate()
            .filter(move |(k, a)| **a && *k != agent)
            .map(|(k, _)| k)
    }

    /// Whether the agents in `members` form one connected component.
    pub fn is_connected_among(&self, members: &[usize]) -> bool {
        let Some(&start) = members.first() else {
            return true;
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for k in self.neighbors(i) {
                if !seen[k] && members.contains(&k) {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        members.iter().all(|m| seen[*m])
    }

    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = (0..self.len()).collect();
        self.is_connected_among(&all)
    }
}

/// Disk connectivity: linked iff within `comm_range` (or the same agent).
pub fn connectivity(positions: &[Point], model: &ConnectivityModel) -> NetworkSnapshot {
    let n = positions.len();
    let mut adjacency = vec![vec![false; n]; n];
    let mut degrees = vec![0; n];
    let r2 = model.comm_range * model.comm_range;
    for i in 0..n {
        adjacency[i][i] = true;
        for k in (i + 1)..n {
            if positions[i].distance_sq(&positions[k]) <= r2 {
                adjacency[i][k] = true;
                adjacency[k][i] = true;
                degrees[i] += 1;
                degrees[k] += 1;
            }
        }
    }
    NetworkSnapshot { adjacency, degrees }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// One signed byte per option.
    Coarse,
    /// Four bytes per option.
    #[default]
    Fine,
}

impl Resolution {
    pub fn bytes_per_option(self) -> usize {
        match self {
            Resolution::Coarse => 1,
            Resolution::Fine => 4,
        }
    }

    fn flag(self) -> u8 {
        match self {
            Resolution::Coarse => 0,
            Resolution::Fine => 1,
        }
    }

    fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            0 => Ok(Resolution::Coarse),
            1 => Ok(Resolution::Fine),
            other => Err(Error::MalformedMessage(format!("unknown resolution flag {other}"))),
        }
    }
}

/// A decoded opinion beacon, still in fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionMessage {
    pub sender_id: u8,
    pub seq: u16,
    pub resolution: Resolution,
    pub quantized_z: Vec<i32>,
}

impl OpinionMessage {
    pub fn options(&self) -> usize {
        self.quantized_z.len()
    }

    pub fn payload_len(&self) -> usize {
        self.options() * self.resolution.bytes_per_option()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    /// Some entry exceeded `z_clip` and was saturated.
    pub saturated: bool,
}

/// Fixed-point opinion codec. Both ends must agree on `z_clip`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionCodec {
    pub z_clip: f64,
}

impl Default for OpinionCodec {
    fn default() -> Self {
        OpinionCodec { z_clip: DEFAULT_Z_CLIP }
    }
}

impl OpinionCodec {
    pub fn new(z_clip: f64) -> Result<Self> {
        if !(z_clip > 0.0) || !z_clip.is_finite() {
            return Err(Error::InvalidInput(format!("z_clip must be positive, got {z_clip}")));
        }
        Ok(OpinionCodec { z_clip })
    }

    /// Value of one quantization step.
    pub fn step(&self, resolution: Resolution) -> f64 {
        match resolution {
            Resolution::Coarse => self.z_clip / 127.0,
            Resolution::Fine => self.z_clip / FINE_DENOM,
        }
    }

    pub fn quantize(&self, z: &[f64], resolution: Resolution) -> Result<(Vec<i32>, bool)> {
        let limit = match resolution {
            Resolution::Coarse => 127.0,
            Resolution::Fine => FINE_DENOM - 1.0,
        };
        let step = self.step(resolution);
        let mut saturated = false;
        let mut out = Vec::with_capacity(z.len());
        for v in z {
            if v.is_nan() {
                return Err(Error::InvalidInput("cannot encode NaN opinion".into()));
            }
            if v.abs() > self.z_clip {
                saturated = true;
            }
            out.push((v / step).round().clamp(-limit, limit) as i32);
        }
        Ok((out, saturated))
    }

    pub fn dequantize(&self, msg: &OpinionMessage) -> Vec<f64> {
        let step = self.step(msg.resolution);
        msg.quantized_z.iter().map(|q| f64::from(*q) * step).collect()
    }

    pub fn encode(&self, sender_id: u8, seq: u16, z: &[f64], resolution: Resolution) -> Result<Encoded> {
        let (q, saturated) = self.quantize(z, resolution)?;
        let msg = OpinionMessage {
            sender_id,
            seq,
            resolution,
            quantized_z: q,
        };
        Ok(Encoded {
            bytes: encode_message(&msg),
            saturated,
        })
    }
}

pub fn encode_message(msg: &OpinionMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.payload_len());
    out.push(msg.sender_id);
    out.extend_from_slice(&msg.seq.to_le_bytes());
    out.push(msg.resolution.flag());
    for q in &msg.quantized_z {
        match msg.resolution {
            Resolution::Coarse => out.push(*q as i8 as u8),
            Resolution::Fine => out.extend_from_slice(&q.to_le_bytes()),
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<OpinionMessage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedMessage(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let sender_id = bytes[0];
    let seq = u16::from_le_bytes([bytes[1], bytes[2]]);
    let resolution = Resolution::from_flag(bytes[3])?;
    let payload = &bytes[HEADER_LEN..];
    let width = resolution.bytes_per_option();
    if !payload.len().is_multiple_of(width) || payload.len() / width < 2 {
        return Err(Error::MalformedMessage(format!(
            "payload of {} bytes does not hold at least two {width}-byte opinions",
            payload.len()
        )));
    }
    let quantized_z = match resolution {
        Resolution::Coarse => payload.iter().map(|b| i32::from(*b as i8)).collect(),
        Resolution::Fine => payload
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    Ok(OpinionMessage {
        sender_id,
        seq,
        resolution,
        quantized_z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub message: OpinionMessage,
    pub received_at: f64,
}

/// Latest opinion per sender; non-increasing sequence numbers are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageBuffer {
    entries: BTreeMap<u8, BufferEntry>,
    stale_dropped: u64,
}

impl MessageBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `msg` iff it is newer than what we hold from its sender.
    /// Returns whether it was stored.
    pub fn update(&mut self, msg: OpinionMessage, now: f64) -> bool {
        if let Some(existing) = self.entries.get(&msg.sender_id) {
            if msg.seq <= existing.message.seq {
                self.stale_dropped += 1;
                return false;
            }
        }
        self.entries.insert(
            msg.sender_id,
            BufferEntry {
                message: msg,
                received_at: now,
            },
        );
        true
    }

    pub fn get(&self, sender: u8) -> Option<&BufferEntry> {
        self.entries.get(&sender)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stale_dropped(&self) -> u64 {
        self.stale_dropped
    }

    /// Decoded opinions of senders that are adjacent now and were heard
    /// from within `ttl` seconds.
    pub fn neighbor_snapshot(
        &self,
        adjacency_row: &[bool],
        self_id: usize,
        now: f64,
        ttl: f64,
        codec: &OpinionCodec,
    ) -> Vec<NeighborOpinionView> {
        self.entries
            .iter()
            .filter_map(|(&sender, entry)| {
                let id = usize::from(sender);
                let age = (now - entry.received_at).max(0.0);
                let adjacent = id != self_id && adjacency_row.get(id).copied().unwrap_or(false);
                (adjacent && age <= ttl).then(|| NeighborOpinionView {
                    agent_id: id,
                    z: codec.dequantize(&entry.message),
                    u: None,
                    age,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetStats {
    pub broadcasts: u64,
    pub deliveries: u64,
    pub dropped: u64,
    pub payload_bytes: u64,
}

#[derive(Debug, Clone)]
struct InFlight {
    deliver_at: u64,
    to: usize,
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub to: usize,
    pub bytes: Vec<u8>,
}

/// Seeded per-tick broadcast exchange over a connectivity snapshot.
#[derive(Debug, Clone)]
pub struct Network {
    model: ConnectivityModel,
    rng: ChaCha8Rng,
    in_flight: VecDeque<InFlight>,
    stats: NetStats,
}

impl Network {
    pub fn new(model: ConnectivityModel, seed: u64) -> Self {
        Network {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            in_flight: VecDeque::new(),
            stats: NetStats::default(),
        }
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    /// Broadcasts every `(sender, bytes)` to the sender's current
    /// neighbors, applies drops and latency, and returns everything due
    /// for delivery at `tick`, in send order.
    pub fn exchange(&mut self, tick: u64, outgoing: &[(usize, Vec<u8>)], snapshot: &NetworkSnapshot) -> Vec<Delivery> {
        for (sender, bytes) in outgoing {
            self.stats.broadcasts += 1;
            self.stats.payload_bytes += bytes.len().saturating_sub(HEADER_LEN) as u64;
            for to in snapshot.neighbors(*sender) {
                if self.model.drop_probability > 0.0 && self.rng.gen::<f64>() < self.model.drop_probability {
                    self.stats.dropped += 1;
                    continue;
                }
                self.in_flight.push_back(InFlight {
                    deliver_at: tick + u64::from(self.model.latency_ticks),
                    to,
                    bytes: bytes.clone(),
                });
            }
        }
        let mut due = Vec::new();
        let mut waiting = VecDeque::with_capacity(self.in_flight.len());
        for m in self.in_flight.drain(..) {
            if m.deliver_at <= tick {
                due.push(Delivery { to: m.to, bytes: m.bytes });
            } else {
                waiting.push_back(m);
            }
        }
        self.in_flight = waiting;
        self.stats.deliveries += due.len() as u64;
        due
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|x| Point::new(*x, 0.0)).collect()
    }

    #[test]
    fn connectivity_examples() {
        let m = ConnectivityModel::default();
        let two = connectivity(&line(&[0.0, 100.0]), &m);
        assert!(two.adjacency[0][1] && two.adjacency[1][0]);
        assert_eq!(two.degrees, vec![1, 1]);

        let one = connectivity(&line(&[5.0]), &m);
        assert_eq!(one.adjacency, vec![vec![true]]);
        assert_eq!(one.degrees, vec![0]);

        let chain = connectivity(&line(&[0.0, 150.0, 300.0]), &m);
        assert_eq!(chain.degrees, vec![1, 2, 1]);
        assert!(!chain.adjacency[0][2]);
        assert!(chain.is_connected());
    }

    #[test]
    fn isolate_clears_links() {
        let mut s = connectivity(&line(&[0.0, 10.0, 20.0]), &ConnectivityModel::default());
        s.isolate(1);
        assert_eq!(s.degrees, vec![1, 0, 1]);
        assert!(s.adjacency[1][1]);
        assert!(!s.adjacency[0][1] && !s.adjacency[1][2]);
        assert!(!s.is_connected());
        assert!(s.is_connected_among(&[0, 2]));
    }

    #[test]
    fn payload_sizes() {
        let c = OpinionCodec::default();
        let z = [1.0, -0.5, -0.5];
        let coarse = c.encode(7, 1, &z, Resolution::Coarse).unwrap();
        assert_eq!(coarse.bytes.len() - HEADER_LEN, 3);
        let fine = c.encode(7, 1, &z, Resolution::Fine).unwrap();
        assert_eq!(fine.bytes.len() - HEADER_LEN, 12);
    }

    #[test]
    fn zeros_round_trip_exactly() {
        let c = OpinionCodec::default();
        for r in [Resolution::Coarse, Resolution::Fine] {
            let e = c.encode(1, 2, &[0.0, 0.0, 0.0], r).unwrap();
            let z = c.dequantize(&decode(&e.bytes).unwrap());
            assert_eq!(z, vec![0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn saturation_is_flagged() {
        let c = OpinionCodec::default();
        let e = c.encode(1, 2, &[150.0, -75.0, -75.0], Resolution::Coarse).unwrap();
        assert!(e.saturated);
        let m = decode(&e.bytes).unwrap();
        assert_eq!(m.quantized_z, vec![127, -95, -95]);
        let e = c.encode(1, 2, &[100.0, -50.0, -50.0], Resolution::Fine).unwrap();
        assert!(!e.saturated);
        assert_eq!(decode(&e.bytes).unwrap().quantized_z[0], i32::MAX);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(decode(&[1, 2]), Err(Error::MalformedMessage(_))));
        assert!(matches!(decode(&[1, 0, 0, 9, 0, 0]), Err(Error::MalformedMessage(_))));
        assert!(matches!(decode(&[1, 0, 0, 1, 0, 0, 0, 0, 0]), Err(Error::MalformedMessage(_))));
        assert!(matches!(decode(&[1, 0, 0, 0, 5]), Err(Error::MalformedMessage(_))));
    }

    fn msg(sender: u8, seq: u16) -> OpinionMessage {
        OpinionMessage {
            sender_id: sender,
            seq,
            resolution: Resolution::Fine,
            quantized_z: vec![0, 0, 0],
        }
    }

    #[test]
    fn buffer_examples() {
        let mut b = MessageBuffer::new();
        assert!(b.update(msg(4, 10), 0.0));
        assert!(!b.update(msg(4, 9), 1.0));
        assert_eq!(b.get(4).unwrap().message.seq, 10);
        assert_eq!(b.stale_dropped(), 1);
        assert!(b.update(msg(4, 11), 2.0));
        assert_eq!(b.get(4).unwrap().message.seq, 11);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn snapshot_filters_by_age_and_adjacency() {
        let codec = OpinionCodec::default();
        let mut b = MessageBuffer::new();
        b.update(msg(1, 1), 9.0);
        b.update(msg(2, 1), 9.5);
        b.update(msg(3, 1), 0.0);
        let row = [true, true, true, true];
        let views = b.neighbor_snapshot(&row, 0, 10.0, 3.0, &codec);
        assert_eq!(views.iter().map(|v| v.agent_id).collect::<Vec<_>>(), vec![1, 2]);
        assert!((views[0].age - 1.0).abs() < 1e-12);

        // agent 2 is fresh but out of range this tick
        let positions = [Point::new(0.0, 0.0), Point::new(50.0, 0.0), Point::new(500.0, 0.0), Point::new(0.0, 20.0)];
        let snap = connectivity(&positions, &ConnectivityModel::default());
        let views = b.neighbor_snapshot(&snap.adjacency[0], 0, 10.0, 3.0, &codec);
        assert_eq!(views.iter().map(|v| v.agent_id).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn lossless_exchange_reaches_every_neighbor() {
        let snap = connectivity(&line(&[0.0, 100.0, 200.0, 1000.0]), &ConnectivityModel::default());
        let mut net = Network::new(ConnectivityModel::default(), 3);
        let out: Vec<(usize, Vec<u8>)> = (0..4).map(|i| (i, vec![i as u8, 0, 0, 1])).collect();
        let got = net.exchange(0, &out, &snap);
        let mut pairs: Vec<(usize, u8)> = got.iter().map(|d| (d.to, d.bytes[0])).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn latency_and_drops() {
        let snap = connectivity(&line(&[0.0, 10.0]), &ConnectivityModel::default());
        let model = ConnectivityModel { latency_ticks: 2, ..ConnectivityModel::default() };
        let mut net = Network::new(model, 1);
        assert!(net.exchange(5, &[(0, vec![0, 0, 0, 1])], &snap).is_empty());
        assert!(net.exchange(6, &[], &snap).is_empty());
        assert_eq!(net.exchange(7, &[], &snap).len(), 1);

        let model = ConnectivityModel { drop_probability: 1.0, ..ConnectivityModel::default() };
        let mut net = Network::new(model, 1);
        assert!(net.exchange(0, &[(0, vec![0, 0, 0, 1])], &snap).is_empty());
        assert_eq!(net.stats().dropped, 1);
    }

    proptest! {
        #[test]
        fn connectivity_symmetric_reflexive(pts in prop::collection::vec((0.0..500.0f64, 0.0..500.0f64), 1..12)) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let s = connectivity(&pts, &ConnectivityModel::default());
            for i in 0..pts.len() {
                prop_assert!(s.adjacency[i][i]);
                for k in 0..pts.len() {
                    prop_assert_eq!(s.adjacency[i][k], s.adjacency[k][i]);
                }
                prop_assert_eq!(s.degrees[i], s.adjacency[i].iter().filter(|a| **a).count() - 1);
            }
        }

        #[test]
        fn buffer_seq_never_decreases(ops in prop::collection::vec((0u8..4, 0u16..50), 0..100)) {
            let mut b = MessageBuffer::new();
            let mut best: BTreeMap<u8, u16> = BTreeMap::new();
            for (t, (s, q)) in ops.into_iter().enumerate() {
                let before = b.get(s).map(|e| e.message.seq);
                let stored = b.update(msg(s, q), t as f64);
                let after = b.get(s).unwrap().message.seq;
                prop_assert!(before.is_none_or(|p| after >= p));
                prop_assert_eq!(stored, before.is_none_or(|p| q > p));
                let e = best.entry(s).or_insert(q);
                *e = (*e).max(q);
                prop_assert_eq!(after, best[&s]);
            }
            prop_assert!(b.len() <= 4);
        }
    }
}

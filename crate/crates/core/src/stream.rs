//! Packet-level streaming encoder and decoder.
//!
//! A message packet `u(t)` holds `k` symbols and the coded packet `x(t)`
//! holds `n`. Symbol `j` of the scalar codeword on diagonal `d` is
//! `x_j(d + j)`, so every diagonal carries one scalar codeword. Times
//! before 0 carry all-zero message packets.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ErasureTrace;
use crate::error::{param_err, Error, Result};
use crate::gf::Elem;
use crate::scalar::{recover_at_horizon, ScalarCode};

/// One coded (or message) packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub t: u64,
    pub payload: Vec<Elem>,
}

/// What the decoder sees at one time step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arrival {
    Received(Packet),
    Erased(u64),
}

impl Arrival {
    pub fn t(&self) -> u64 {
        match self {
            Arrival::Received(p) => p.t,
            Arrival::Erased(t) => *t,
        }
    }
}

fn check_sequence(expected: u64, got: u64) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Sequencing { expected, got })
    }
}

/// Systematic diagonal encoder.
#[derive(Clone, Debug)]
pub struct StreamEncoder {
    code: Arc<ScalarCode>,
    /// Most recent message first; at most `n - 1` entries.
    history: VecDeque<Vec<Elem>>,
    next: u64,
}

impl StreamEncoder {
    pub fn new(code: Arc<ScalarCode>) -> StreamEncoder {
        StreamEncoder {
            code,
            history: VecDeque::new(),
            next: 0,
        }
    }

    pub fn next_time(&self) -> u64 {
        self.next
    }

    fn past_symbol(&self, t: u64, back: usize, r: usize) -> Elem {
        // message symbol r at time t - back, zero before the stream starts
        if back as u64 > t {
            return Elem::ZERO;
        }
        self.history.get(back - 1).map_or(Elem::ZERO, |u| u[r])
    }

    /// Encodes `u(t)`; `t` must be the next time step.
    pub fn encode(&mut self, t: u64, message: &[Elem]) -> Result<Packet> {
        check_sequence(self.next, t)?;
        let params = *self.code.params();
        let (n, k) = (params.n(), params.k());
        if message.len() != k {
            return param_err(format!(
                "message packet at t = {t} has {} symbols, expected k = {k}",
                message.len()
            ));
        }
        let field = self.code.field();
        let pm = &self.code.maps.parity_map;
        let mut payload = message.to_vec();
        for i in 0..params.b {
            let mut acc = Elem::ZERO;
            for r in 0..k {
                let coef = pm.get(i, r);
                if !coef.is_zero() {
                    acc = field.add(acc, field.mul(coef, self.past_symbol(t, k + i - r, r)));
                }
            }
            payload.push(acc);
        }
        self.history.push_front(message.to_vec());
        self.history.truncate(n - 1);
        self.next += 1;
        Ok(Packet { t, payload })
    }
}

/// A message packet handed to the application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    pub t: u64,
    pub emitted_at: u64,
    pub payload: Vec<Elem>,
}

impl Emission {
    pub fn delay(&self) -> u64 {
        self.emitted_at - self.t
    }
}

/// A message packet still incomplete at its deadline `t + tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissEvent {
    pub t: u64,
    pub deadline: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub emitted: Vec<Emission>,
    pub misses: Vec<MissEvent>,
}

/// A symbol committed on a diagonal: `(diagonal, position, horizon time, value)`.
pub type SymbolCommit = (i64, usize, u64, Elem);

#[derive(Clone, Debug)]
struct Diagonal {
    values: Vec<Option<Elem>>,
    pending: BTreeSet<usize>,
}

/// Sequential decoder; each diagonal is decoded on its own.
#[derive(Clone, Debug)]
pub struct StreamDecoder {
    code: Arc<ScalarCode>,
    next: u64,
    diagonals: BTreeMap<i64, Diagonal>,
    pending: BTreeMap<u64, Vec<Option<Elem>>>,
    log: Option<Vec<SymbolCommit>>,
}

impl StreamDecoder {
    pub fn new(code: Arc<ScalarCode>) -> StreamDecoder {
        StreamDecoder {
            code,
            next: 0,
            diagonals: BTreeMap::new(),
            pending: BTreeMap::new(),
            log: None,
        }
    }

    /// Records every symbol recovered on any diagonal.
    pub fn with_symbol_log(mut self) -> StreamDecoder {
        self.log = Some(Vec::new());
        self
    }

    pub fn symbol_log(&self) -> &[SymbolCommit] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn next_time(&self) -> u64 {
        self.next
    }

    /// Message packets erased and not yet recovered.
    pub fn pending_times(&self) -> Vec<u64> {
        self.pending.keys().copied().collect()
    }

    /// Number of diagonals currently held.
    pub fn live_diagonals(&self) -> usize {
        self.diagonals.len()
    }

    pub fn step(&mut self, arrival: &Arrival) -> Result<StepOutput> {
        let s = arrival.t();
        check_sequence(self.next, s)?;
        let params = *self.code.params();
        let (n, k, tau) = (params.n(), params.k(), params.tau as u64);
        let received = match arrival {
            Arrival::Received(p) if p.payload.len() != n => {
                return param_err(format!(
                    "coded packet at t = {s} has {} symbols, expected n = {n}",
                    p.payload.len()
                ));
            }
            Arrival::Received(p) => Some(&p.payload),
            Arrival::Erased(_) => None,
        };
        let mut out = StepOutput::default();
        match received {
            Some(x) => out.emitted.push(Emission {
                t: s,
                emitted_at: s,
                payload: x[..k].to_vec(),
            }),
            None => {
                self.pending.insert(s, vec![None; k]);
            }
        }

        let si = s as i64;
        for d in si - n as i64 + 1..=si {
            let j = (si - d) as usize;
            let diag = self.diagonals.entry(d).or_insert_with(|| {
                let mut values = vec![None; n];
                for (pos, v) in values.iter_mut().enumerate() {
                    if d + (pos as i64) < 0 {
                        *v = Some(Elem::ZERO);
                    }
                }
                Diagonal {
                    values,
                    pending: BTreeSet::new(),
                }
            });
            match received {
                Some(x) => diag.values[j] = Some(x[j]),
                None => {
                    diag.pending.insert(j);
                }
            }
            if diag.pending.is_empty() {
                continue;
            }
            for (pos, val) in recover_at_horizon(self.code.h(), &diag.values, &diag.pending, j)? {
                diag.values[pos] = Some(val);
                diag.pending.remove(&pos);
                if let Some(log) = self.log.as_mut() {
                    log.push((d, pos, s, val));
                }
                if pos < k {
                    let t = (d + pos as i64) as u64;
                    if let Some(msg) = self.pending.get_mut(&t) {
                        msg[pos] = Some(val);
                    }
                }
            }
        }

        let done: Vec<u64> = self
            .pending
            .iter()
            .filter(|(_, m)| m.iter().all(Option::is_some))
            .map(|(&t, _)| t)
            .collect();
        for t in done {
            let msg = self.pending.remove(&t).expect("listed above");
            out.emitted.push(Emission {
                t,
                emitted_at: s,
                payload: msg.into_iter().map(|v| v.expect("complete")).collect(),
            });
        }
        out.emitted.sort_by_key(|e| e.t);

        let late: Vec<u64> = match s.checked_sub(tau) {
            Some(last) => self.pending.range(..=last).map(|(&t, _)| t).collect(),
            None => Vec::new(),
        };
        for t in late {
            self.pending.remove(&t);
            out.misses.push(MissEvent {
                t,
                deadline: t + tau,
            });
        }

        let cutoff = si - n as i64 + 1;
        self.diagonals.retain(|&d, _| d > cutoff);
        self.next += 1;
        Ok(out)
    }
}

/// Outcome of pushing one erasure trace through encoder and decoder.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamReport {
    pub messages: u64,
    pub emitted: u64,
    pub misses: Vec<MissEvent>,
    /// Times whose emitted payload differs from what was sent.
    pub mismatches: Vec<u64>,
    /// Times of received packets emitted with nonzero delay.
    pub late_received: Vec<u64>,
    pub max_delay: u64,
    /// Emission delay -> count.
    pub delays: BTreeMap<u64, u64>,
}

impl StreamReport {
    /// Every message delivered intact within `tau`, received ones at once.
    pub fn is_clean(&self, tau: usize) -> bool {
        self.misses.is_empty()
            && self.mismatches.is_empty()
            && self.late_received.is_empty()
            && self.emitted == self.messages
            && self.max_delay <= tau as u64
    }

    pub fn merge(&mut self, other: &StreamReport) {
        self.messages += other.messages;
        self.emitted += other.emitted;
        self.misses.extend_from_slice(&other.misses);
        self.mismatches.extend_from_slice(&other.mismatches);
        self.late_received.extend_from_slice(&other.late_received);
        self.max_delay = self.max_delay.max(other.max_delay);
        for (&d, &c) in &other.delays {
            *self.delays.entry(d).or_default() += c;
        }
    }
}

/// Seeded random message packets and their encoding.
pub fn random_stream(
    code: &Arc<ScalarCode>,
    len: usize,
    seed: u64,
) -> Result<(Vec<Vec<Elem>>, Vec<Packet>)> {
    let field = code.field().clone();
    let k = code.params().k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut enc = StreamEncoder::new(code.clone());
    let msgs: Vec<Vec<Elem>> = (0..len)
        .map(|_| (0..k).map(|_| field.random(&mut rng)).collect())
        .collect();
    let packets = msgs
        .iter()
        .enumerate()
        .map(|(t, m)| enc.encode(t as u64, m))
        .collect::<Result<_>>()?;
    Ok((msgs, packets))
}

/// Applies `trace` to coded packets; times past the trace are received.
pub fn apply_erasures(packets: Vec<Packet>, trace: &ErasureTrace) -> Vec<Arrival> {
    packets
        .into_iter()
        .map(|p| {
            if trace.is_erased(p.t as usize) {
                Arrival::Erased(p.t)
            } else {
                Arrival::Received(p)
            }
        })
        .collect()
}

/// Decodes `arrivals` and scores the emissions against `sent`.
pub fn score(
    code: &Arc<ScalarCode>,
    sent: &[Vec<Elem>],
    arrivals: &[Arrival],
) -> Result<StreamReport> {
    let mut dec = StreamDecoder::new(code.clone());
    let mut report = StreamReport {
        messages: sent.len() as u64,
        ..StreamReport::default()
    };
    for arrival in arrivals {
        let out = dec.step(arrival)?;
        report.misses.extend(out.misses);
        for e in out.emitted {
            report.emitted += 1;
            let delay = e.delay();
            report.max_delay = report.max_delay.max(delay);
            *report.delays.entry(delay).or_default() += 1;
            if e.payload != sent[e.t as usize] {
                report.mismatches.push(e.t);
            }
            if delay > 0 && matches!(arrivals[e.t as usize], Arrival::Received(_)) {
                report.late_received.push(e.t);
            }
        }
    }
    Ok(report)
}

/// Encodes seeded random messages, erases per `trace` followed by `tau`
/// clean steps, decodes, and compares.
pub fn run_trace(code: &Arc<ScalarCode>, trace: &ErasureTrace, seed: u64) -> Result<StreamReport> {
    let (sent, packets) = random_stream(code, trace.len() + code.params().tau, seed)?;
    score(code, &sent, &apply_erasures(packets, trace))
}

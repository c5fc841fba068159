//! Systematic block encoding and deadline-aware erasure decoding of the
//! scalar code.
//!
//! Decoding is sequential: at horizon `s` the decoder sees every
//! non-erased symbol with index `<= s` plus whatever it has already
//! recovered, and commits an erased symbol only once every solution of the
//! parity system agrees on it.

use std::collections::{BTreeMap, BTreeSet};

use crate::construct::{systematic_maps, CodeParams, ParityCheck, SystematicMaps};
use crate::error::{param_err, Error, Result};
use crate::gf::{Elem, Field};
use crate::linalg::Matrix;

/// A parity-check matrix bundled with its systematic encoder.
#[derive(Clone, Debug)]
pub struct ScalarCode {
    pub pc: ParityCheck,
    pub maps: SystematicMaps,
}

impl ScalarCode {
    pub fn new(pc: ParityCheck) -> Result<ScalarCode> {
        let maps = systematic_maps(&pc)?;
        Ok(ScalarCode { pc, maps })
    }

    pub fn params(&self) -> &CodeParams {
        &self.pc.params
    }

    pub fn field(&self) -> &Field {
        self.pc.field()
    }

    pub fn h(&self) -> &Matrix {
        &self.pc.h
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub symbols: Vec<Elem>,
}

/// Encodes `k` message symbols; the first `k` codeword symbols are the message.
pub fn encode(code: &ScalarCode, message: &[Elem]) -> Result<Codeword> {
    let k = code.params().k();
    if message.len() != k {
        return param_err(format!(
            "message has {} symbols, expected k = {k}",
            message.len()
        ));
    }
    let mut symbols = message.to_vec();
    symbols.extend(code.maps.parity_map.mul_vec(message)?);
    Ok(Codeword { symbols })
}

/// True iff `c_t` is pinned down by the symbols outside `unknowns`, i.e.
/// column `t` of `H` is not in the span of the other unknown columns.
pub fn recoverable(pc: &ParityCheck, t: usize, unknowns: &[usize]) -> bool {
    let others: Vec<usize> = unknowns.iter().copied().filter(|&i| i != t).collect();
    let span =
        pc.h.select_columns(&others)
            .expect("unknown positions lie inside the codeword");
    !span
        .in_span(&pc.h.column(t))
        .expect("column height matches")
}

/// Received and erased symbols of one codeword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErasureState {
    n: usize,
    known: BTreeMap<usize, Elem>,
    erased: BTreeSet<usize>,
    horizon: usize,
}

impl ErasureState {
    /// Everything observable, positions in `erased` lost.
    pub fn from_codeword(
        cw: &Codeword,
        erased: impl IntoIterator<Item = usize>,
    ) -> Result<ErasureState> {
        let n = cw.symbols.len();
        let erased: BTreeSet<usize> = erased.into_iter().collect();
        if let Some(&bad) = erased.iter().find(|&&i| i >= n) {
            return param_err(format!(
                "erased position {bad} outside codeword of length {n}"
            ));
        }
        let known = (0..n)
            .filter(|i| !erased.contains(i))
            .map(|i| (i, cw.symbols[i]))
            .collect();
        Ok(ErasureState {
            n,
            known,
            erased,
            horizon: n.saturating_sub(1),
        })
    }

    /// Restricts observation to positions `<= horizon`.
    pub fn with_horizon(mut self, horizon: usize) -> ErasureState {
        self.horizon = horizon.min(self.n.saturating_sub(1));
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn known(&self) -> &BTreeMap<usize, Elem> {
        &self.known
    }

    pub fn erased(&self) -> &BTreeSet<usize> {
        &self.erased
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeadlineMiss {
    pub position: usize,
    pub deadline: usize,
    pub horizon: usize,
}

impl From<DeadlineMiss> for Error {
    fn from(m: DeadlineMiss) -> Error {
        Error::DeadlineMiss {
            position: m.position,
            deadline: m.deadline,
            horizon: m.horizon,
        }
    }
}

/// Result of a sequential decoding sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScalarDecode {
    pub recovered: BTreeMap<usize, Elem>,
    /// Horizon at which each recovered position was committed.
    pub schedule: BTreeMap<usize, usize>,
    pub misses: Vec<DeadlineMiss>,
}

/// Deadline of position `t`: `t + tau`, capped at `n - 1`.
pub fn deadline(params: &CodeParams, t: usize) -> usize {
    (t + params.tau).min(params.n() - 1)
}

/// Runs the horizon sweep `s = 0..=state.horizon()` and reports misses
/// instead of failing on them.
pub fn decode_sweep(pc: &ParityCheck, state: &ErasureState) -> Result<ScalarDecode> {
    let n = pc.params.n();
    if state.len() != n {
        return param_err(format!(
            "erasure state has length {}, code has n = {n}",
            state.len()
        ));
    }
    let mut values: Vec<Option<Elem>> = (0..n).map(|i| state.known.get(&i).copied()).collect();
    let mut pending = state.erased.clone();
    let mut out = ScalarDecode::default();
    for s in 0..=state.horizon {
        let visible: Vec<Option<Elem>> = values
            .iter()
            .enumerate()
            .map(|(i, v)| if i <= s { *v } else { None })
            .collect();
        for (pos, val) in recover_at_horizon(&pc.h, &visible, &pending, s)? {
            values[pos] = Some(val);
            pending.remove(&pos);
            out.recovered.insert(pos, val);
            out.schedule.insert(pos, s);
        }
    }
    out.misses = pending
        .iter()
        .map(|&t| (t, deadline(&pc.params, t)))
        .filter(|&(_, d)| d <= state.horizon)
        .map(|(position, deadline)| DeadlineMiss {
            position,
            deadline,
            horizon: state.horizon,
        })
        .collect();
    Ok(out)
}

/// Sequential decoding that fails on the first position not recovered by
/// its deadline.
pub fn decode_with_deadlines(pc: &ParityCheck, state: &ErasureState) -> Result<ScalarDecode> {
    let out = decode_sweep(pc, state)?;
    // a late commit is as bad as none
    let late = out
        .schedule
        .iter()
        .find(|&(&t, &s)| s > deadline(&pc.params, t))
        .map(|(&t, &s)| DeadlineMiss {
            position: t,
            deadline: deadline(&pc.params, t),
            horizon: s,
        });
    match out.misses.first().copied().or(late) {
        Some(miss) => Err(miss.into()),
        None => Ok(out),
    }
}

/// One decoding step at horizon `s`: positions with a value are known,
/// every other position is unknown. Returns the erased positions
/// (`pending`, at index `<= s`) that all solutions agree on.
pub(crate) fn recover_at_horizon(
    h: &Matrix,
    values: &[Option<Elem>],
    pending: &BTreeSet<usize>,
    s: usize,
) -> Result<Vec<(usize, Elem)>> {
    if pending.range(..=s).next().is_none() {
        return Ok(Vec::new());
    }
    let field = h.field();
    let unknown: Vec<usize> = (0..values.len())
        .filter(|&i| i > s || pending.contains(&i) || values[i].is_none())
        .collect();
    let mut rhs = vec![Elem::ZERO; h.rows()];
    for (i, v) in values.iter().enumerate() {
        let Some(v) = v else { continue };
        if i > s || pending.contains(&i) || v.is_zero() {
            continue;
        }
        for (r, acc) in rhs.iter_mut().enumerate() {
            *acc = field.sub(*acc, field.mul(h.get(r, i), *v));
        }
    }
    let system = h.select_columns(&unknown)?;
    let pinned = system
        .solve_partial(&rhs)?
        .ok_or_else(|| Error::Integrity("received symbols violate the parity checks".into()))?;
    Ok(unknown
        .iter()
        .zip(pinned)
        .filter(|&(&pos, _)| pos <= s && pending.contains(&pos))
        .filter_map(|(&pos, v)| v.map(|v| (pos, v)))
        .collect())
}

/// A row-space vector of `H` that isolates `c_t` (`t < delta`) from a burst
/// `[t : t+b-1]` within deadline `t + tau`: `alpha` at `t`, zeros on
/// `[t+1 : t+b-1]` and on `[t+tau+1 : n-1]`.
///
/// With `l = tau - b` and `delta = v*l + x`:
/// * `l >= delta` (or `l = 0`), or `t < l`: row `h(t)` itself;
/// * `l <= t < v*l`: `h(t) - h(t - l)`;
/// * `v*l <= t`: `h(t) - sum_{i in S} h(y_i)` where `x' = t - v*l`,
///   `S` = nonzero positions of `h(t)` in `[b+x' : tau-1]` and
///   `y_i = (v-1)*l + i - b`.
pub fn burst_recovery_row(pc: &ParityCheck, t: usize) -> Result<Vec<Elem>> {
    let CodeParams { b, tau, .. } = pc.params;
    let d = pc.params.delta();
    if t >= d {
        return param_err(format!(
            "burst recovery row needs t < delta = {d}, got t = {t}"
        ));
    }
    let f = pc.field();
    let l = tau - b;
    let row = |i: usize| pc.h_row(i);
    let minus = |acc: Vec<Elem>, other: Vec<Elem>| -> Vec<Elem> {
        acc.into_iter()
            .zip(other)
            .map(|(x, y)| f.sub(x, y))
            .collect()
    };
    if l == 0 || l >= d || t < l {
        return Ok(row(t));
    }
    let v = d / l;
    if t < v * l {
        return Ok(minus(row(t), row(t - l)));
    }
    let x_prime = t - v * l;
    let h_t = row(t);
    let support: Vec<usize> = (b + x_prime..tau).filter(|&i| !h_t[i].is_zero()).collect();
    let mut out = h_t;
    for i in support {
        let y = (v - 1) * l + i - b;
        out = minus(out, row(y));
    }
    Ok(out)
}

/// Checks the support pattern required of a burst-recovery row for `t`
/// and that it lies in the row space of `H`.
pub fn is_burst_recovery_row(pc: &ParityCheck, t: usize, row: &[Elem]) -> bool {
    let CodeParams { b, tau, .. } = pc.params;
    let n = pc.params.n();
    if row.len() != n || row[t] != pc.field().alpha() {
        return false;
    }
    let gap_clear = (t + 1..(t + b).min(n)).all(|i| row[i].is_zero());
    let tail_clear = (t + tau + 1..n).all(|i| row[i].is_zero());
    gap_clear && tail_clear && pc.h.transpose().in_span(row).unwrap_or(false)
}

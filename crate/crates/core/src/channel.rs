//! Delay-constrained sliding-window erasure channel.
//!
//! A trace is admissible for `(a, b, tau)` when every window of `tau + 1`
//! consecutive time steps either holds at most `a` erasures or holds a
//! single contiguous run of at most `b` erasures. Steps outside the trace
//! count as received.

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::construct::CodeParams;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Per-time-step erasure flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TraceRepr", into = "TraceRepr")]
pub struct ErasureTrace {
    erased: Vec<bool>,
    pub meta: Option<TraceMeta>,
}

/// On-disk form: `{T, erased: [indices], meta}`.
#[derive(Serialize, Deserialize)]
struct TraceRepr {
    #[serde(rename = "T")]
    len: usize,
    erased: Vec<usize>,
    #[serde(default)]
    meta: Option<TraceMeta>,
}

impl TryFrom<TraceRepr> for ErasureTrace {
    type Error = Error;

    fn try_from(r: TraceRepr) -> Result<ErasureTrace> {
        if let Some(&bad) = r.erased.iter().find(|&&i| i >= r.len) {
            return Err(Error::Format(format!(
                "erased index {bad} outside trace of length {}",
                r.len
            )));
        }
        let mut t = ErasureTrace::from_indices(r.len, r.erased);
        t.meta = r.meta;
        Ok(t)
    }
}

impl From<ErasureTrace> for TraceRepr {
    fn from(t: ErasureTrace) -> TraceRepr {
        TraceRepr {
            len: t.len(),
            erased: t.erased_indices(),
            meta: t.meta,
        }
    }
}

impl ErasureTrace {
    pub fn clean(len: usize) -> ErasureTrace {
        ErasureTrace {
            erased: vec![false; len],
            meta: None,
        }
    }

    pub fn from_flags(erased: Vec<bool>) -> ErasureTrace {
        ErasureTrace { erased, meta: None }
    }

    /// Indices past `len` are ignored.
    pub fn from_indices(len: usize, erased: impl IntoIterator<Item = usize>) -> ErasureTrace {
        let mut flags = vec![false; len];
        for i in erased {
            if i < len {
                flags[i] = true;
            }
        }
        ErasureTrace::from_flags(flags)
    }

    pub fn with_meta(mut self, model: &str, seed: Option<u64>) -> ErasureTrace {
        self.meta = Some(TraceMeta {
            model: model.to_string(),
            seed,
        });
        self
    }

    pub fn len(&self) -> usize {
        self.erased.len()
    }

    pub fn is_empty(&self) -> bool {
        self.erased.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.erased
    }

    pub fn is_erased(&self, t: usize) -> bool {
        self.erased.get(t).copied().unwrap_or(false)
    }

    pub fn erased_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.erased[i]).collect()
    }

    pub fn erasure_count(&self) -> usize {
        self.erased.iter().filter(|&&e| e).count()
    }

    pub fn set(&mut self, t: usize, erased: bool) {
        self.erased[t] = erased;
    }
}

/// The first window that breaks the channel rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Start of the window; negative when it begins before the trace.
    pub window_start: i64,
    /// Erased indices inside the window.
    pub erased: Vec<usize>,
}

fn window_ok(erased: &[usize], a: usize, b: usize) -> bool {
    let count = erased.len();
    if count <= a {
        return true;
    }
    // a single run iff first and last are count - 1 apart
    count <= b && erased[count - 1] - erased[0] == count - 1
}

fn window_erasures(flags: &[bool], start: i64, width: usize) -> Vec<usize> {
    let lo = start.max(0) as usize;
    let hi = ((start + width as i64).max(0) as usize).min(flags.len());
    (lo..hi).filter(|&i| flags[i]).collect()
}

/// Every window violating the channel rule, in order of start.
pub fn violations<'a>(
    trace: &'a ErasureTrace,
    params: &CodeParams,
) -> impl Iterator<Item = Violation> + 'a {
    let w = params.window();
    let CodeParams { a, b, tau, .. } = *params;
    (-(tau as i64)..trace.len() as i64).filter_map(move |start| {
        let erased = window_erasures(trace.flags(), start, w);
        (!window_ok(&erased, a, b)).then_some(Violation {
            window_start: start,
            erased,
        })
    })
}

/// First window violating the channel rule, if any.
pub fn first_violation(trace: &ErasureTrace, params: &CodeParams) -> Option<Violation> {
    violations(trace, params).next()
}

pub fn is_admissible(trace: &ErasureTrace, params: &CodeParams) -> bool {
    first_violation(trace, params).is_none()
}

/// Every trace of length `horizon` holding exactly one worst-case event:
/// a burst of exactly `b` at each start, or `a` erasures inside one
/// window of `tau + 1`. Duplicates (possible when `a = b`) are removed;
/// order is lexicographic in the erased index lists.
pub fn enumerate_worst_cases(
    params: &CodeParams,
    horizon: usize,
) -> Result<impl Iterator<Item = ErasureTrace>> {
    let min = params.n() + params.tau;
    if horizon < min {
        return Err(Error::Parameter(format!(
            "worst-case horizon {horizon} shorter than n + tau = {min}"
        )));
    }
    let CodeParams { a, b, .. } = *params;
    let w = params.window();
    let mut events: BTreeSet<Vec<usize>> = BTreeSet::new();
    for start in 0..=horizon - b {
        events.insert((start..start + b).collect());
    }
    for start in 0..=horizon - w {
        for subset in (start..start + w).combinations(a) {
            events.insert(subset);
        }
    }
    Ok(events
        .into_iter()
        .map(move |e| ErasureTrace::from_indices(horizon, e).with_meta("worst-case", None)))
}

/// Greedy random admissible trace: walks forward in time and erases a step
/// only if every window through it stays admissible. Runs are encouraged
/// so that both bursts and scattered losses appear.
pub fn random_admissible(params: &CodeParams, len: usize, seed: u64) -> ErasureTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flags = vec![false; len];
    let w = params.window() as i64;
    for t in 0..len {
        let p = if t > 0 && flags[t - 1] { 0.75 } else { 0.2 };
        if !rng.gen_bool(p) {
            continue;
        }
        flags[t] = true;
        // steps after t are still clear, so only windows through t can break
        let ok = (t as i64 - w + 1..=t as i64)
            .all(|s| window_ok(&window_erasures(&flags, s, w as usize), params.a, params.b));
        if !ok {
            flags[t] = false;
        }
    }
    ErasureTrace::from_flags(flags).with_meta("random-admissible", Some(seed))
}

/// Two-state Markov (Gilbert-Elliott) loss model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GilbertElliott {
    /// Probability of moving good -> bad at each step.
    pub p_good_to_bad: f64,
    /// Probability of moving bad -> good at each step.
    pub p_bad_to_good: f64,
    pub loss_good: f64,
    pub loss_bad: f64,
    pub seed: u64,
}

impl GilbertElliott {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.p_good_to_bad,
            self.p_bad_to_good,
            self.loss_good,
            self.loss_bad,
        ];
        if probs.iter().all(|p| (0.0..=1.0).contains(p)) {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "Gilbert-Elliott probabilities must lie in [0, 1]: {probs:?}"
            )))
        }
    }
}

/// Samples a loss trace starting in the good state. The result may well be
/// inadmissible.
pub fn gilbert_elliott(model: &GilbertElliott, len: usize) -> Result<ErasureTrace> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut bad = false;
    let flags = (0..len)
        .map(|_| {
            let loss = if bad { model.loss_bad } else { model.loss_good };
            let lost = rng.gen_bool(loss);
            let flip = if bad {
                model.p_bad_to_good
            } else {
                model.p_good_to_bad
            };
            if rng.gen_bool(flip) {
                bad = !bad;
            }
            lost
        })
        .collect();
    Ok(ErasureTrace::from_flags(flags).with_meta("gilbert-elliott", Some(model.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: usize, b: usize, tau: usize) -> CodeParams {
        CodeParams::new(a, b, tau).unwrap()
    }

    /// Straightforward double loop over all windows meeting the trace.
    fn naive_admissible(flags: &[bool], p: &CodeParams) -> bool {
        let w = p.tau as i64 + 1;
        for start in -(w - 1)..flags.len() as i64 {
            let mut idx = Vec::new();
            for t in start..start + w {
                if t >= 0 && (t as usize) < flags.len() && flags[t as usize] {
                    idx.push(t);
                }
            }
            let contiguous = idx.windows(2).all(|p| p[1] == p[0] + 1);
            if !(idx.len() <= p.a || (contiguous && idx.len() <= p.b)) {
                return false;
            }
        }
        true
    }

    #[test]
    fn admissibility_examples() {
        let p = params(2, 5, 12);
        assert!(is_admissible(&ErasureTrace::clean(40), &p));
        assert!(is_admissible(&ErasureTrace::from_indices(40, 10..15), &p));
        let v = first_violation(&ErasureTrace::from_indices(40, 10..16), &p).unwrap();
        assert_eq!(v.erased, (10..16).collect::<Vec<_>>());
        assert!(is_admissible(&ErasureTrace::from_indices(40, [0, 7]), &p));
        let v = first_violation(&ErasureTrace::from_indices(40, [0, 7, 9]), &p).unwrap();
        assert_eq!(v.erased, vec![0, 7, 9]);
    }

    #[test]
    fn two_separated_runs_need_the_count_rule() {
        let p = params(2, 4, 8);
        assert!(!is_admissible(
            &ErasureTrace::from_indices(30, [3, 4, 6]),
            &p
        ));
        assert!(is_admissible(
            &ErasureTrace::from_indices(30, [3, 4, 5, 6]),
            &p
        ));
    }

    #[test]
    fn worst_cases_for_single_erasure_code() {
        let p = params(1, 1, 3);
        let horizon = p.n() + p.tau;
        let traces: Vec<_> = enumerate_worst_cases(&p, horizon).unwrap().collect();
        assert_eq!(traces.len(), horizon);
        for (i, t) in traces.iter().enumerate() {
            assert_eq!(t.erased_indices(), vec![i]);
        }
    }

    #[test]
    fn worst_cases_are_unique_when_a_equals_b() {
        let p = params(3, 3, 5);
        let traces: Vec<_> = enumerate_worst_cases(&p, 20)
            .unwrap()
            .map(|t| t.erased_indices())
            .collect();
        let unique: BTreeSet<_> = traces.iter().cloned().collect();
        assert_eq!(unique.len(), traces.len());
    }

    #[test]
    fn worst_cases_match_brute_force_filter() {
        // (2, 3, 4) is checked at T = 10 by filtering all 2^T traces
        let p = CodeParams::with_field_size(2, 3, 4, 5).unwrap();
        let horizon = 10;
        assert!(enumerate_worst_cases(&p, horizon).is_ok());
        let got: BTreeSet<Vec<usize>> = enumerate_worst_cases(&p, horizon)
            .unwrap()
            .map(|t| t.erased_indices())
            .collect();
        let mut expected = BTreeSet::new();
        for mask in 0u32..(1 << horizon) {
            let idx: Vec<usize> = (0..horizon).filter(|&i| mask >> i & 1 == 1).collect();
            let trace = ErasureTrace::from_indices(horizon, idx.clone());
            if !naive_admissible(trace.flags(), &p) {
                continue;
            }
            let burst = idx.len() == p.b && idx[p.b - 1] - idx[0] == p.b - 1;
            let random = idx.len() == p.a && idx[p.a - 1] - idx[0] <= p.tau;
            if burst || random {
                expected.insert(idx);
            }
        }
        assert_eq!(got, expected);
        // 8 bursts plus pairs at distance 1..=4
        assert_eq!(got.len(), 8 + 9 + 8 + 7 + 6);
    }

    #[test]
    fn worst_case_horizon_must_cover_a_codeword() {
        let p = params(1, 2, 4);
        assert!(enumerate_worst_cases(&p, p.n() + p.tau - 1).is_err());
    }

    #[test]
    fn random_admissible_is_deterministic_and_admissible() {
        let p = params(2, 4, 6);
        assert_eq!(random_admissible(&p, 200, 9), random_admissible(&p, 200, 9));
        for seed in 0..10_000 {
            let t = random_admissible(&p, 60, seed);
            assert!(is_admissible(&t, &p), "seed {seed}");
        }
        let total: usize = (0..50)
            .map(|s| random_admissible(&p, 200, s).erasure_count())
            .sum();
        assert!(total > 0);
    }

    #[test]
    fn gilbert_elliott_edge_cases() {
        let quiet = GilbertElliott {
            p_good_to_bad: 0.3,
            p_bad_to_good: 0.3,
            loss_good: 0.0,
            loss_bad: 0.0,
            seed: 1,
        };
        assert_eq!(gilbert_elliott(&quiet, 100).unwrap().erasure_count(), 0);
        let noisy = GilbertElliott {
            loss_bad: 1.0,
            ..quiet.clone()
        };
        let a = gilbert_elliott(&noisy, 500).unwrap();
        assert_eq!(a, gilbert_elliott(&noisy, 500).unwrap());
        assert!(a.erasure_count() > 0);
        let bad = GilbertElliott {
            loss_bad: 1.5,
            ..quiet
        };
        assert!(gilbert_elliott(&bad, 10).is_err());
    }

    #[test]
    fn trace_json_uses_index_lists() {
        let t = ErasureTrace::from_indices(8, [1, 2, 6]).with_meta("test", Some(3));
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"T":8,"erased":[1,2,6],"meta":{"model":"test","seed":3}}"#
        );
        let back: ErasureTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<ErasureTrace>(r#"{"T":3,"erased":[5]}"#).is_err());
    }

    proptest! {
        #[test]
        fn window_rule_matches_naive(flags in proptest::collection::vec(proptest::bool::weighted(0.2), 0..40),
                                     a in 1usize..4, extra in 0usize..3, tau_extra in 0usize..4) {
            let b = a + extra;
            let p = params(a, b, b + tau_extra);
            let trace = ErasureTrace::from_flags(flags.clone());
            prop_assert_eq!(is_admissible(&trace, &p), naive_admissible(&flags, &p));
        }

        #[test]
        fn clearing_an_erasure_keeps_admissibility(seed: u64, pick: usize) {
            let p = params(2, 3, 6);
            let mut t = random_admissible(&p, 80, seed);
            let idx = t.erased_indices();
            if !idx.is_empty() {
                t.set(idx[pick % idx.len()], false);
            }
            prop_assert!(is_admissible(&t, &p));
        }
    }

    #[test]
    fn every_worst_case_is_admissible() {
        for p in CodeParams::sweep(6) {
            for t in enumerate_worst_cases(&p, p.n() + p.tau).unwrap() {
                assert!(is_admissible(&t, &p), "{p:?} {:?}", t.erased_indices());
            }
        }
    }
}

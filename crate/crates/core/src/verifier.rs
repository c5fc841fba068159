//! Exhaustive certification of the recovery properties of a parity-check
//! matrix, plus end-to-end stream checks.
//!
//! With `delta = b - a` and `n = tau + 1 + delta`:
//!
//! * **B1**: for `t < delta`, `c_t` is recoverable when `[t : t+b-1]` and
//!   `[t+tau+1 : n-1]` are unknown.
//! * **R1**: for `t < delta` and any `A` of size `a - 1` in `[t+1 : t+tau]`,
//!   `c_t` is recoverable when `{t} ∪ A ∪ [t+tau+1 : n-1]` are unknown.
//! * **B2**: `H([0:b-1], [t:t+b-1])` is invertible for `t` in
//!   `[delta : tau+1-a]`.
//! * **R2**: any `a` columns of `H` indexed inside `[delta : tau+delta]`
//!   are independent.

use std::sync::Arc;
use std::time::Instant;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{enumerate_worst_cases, random_admissible, ErasureTrace};
use crate::construct::{
    assemble_parity_check, build_p_matrix, CodeParams, ParityCheck, SuperregularC,
};
use crate::error::{param_err, Result};
use crate::gf::{make_field, prime_power, Field};
use crate::linalg::Matrix;
use crate::scalar::{recoverable, ScalarCode};
use crate::stream::{run_trace, StreamReport};

/// Largest `tau` certified unless the caller raises the cap.
pub const DEFAULT_TAU_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    B1,
    R1,
    B2,
    R2,
    Lemma1,
    Superregular,
    EndToEnd,
}

/// A concrete failing case, re-checkable with [`recheck`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    B1 {
        t: usize,
    },
    R1 {
        t: usize,
        others: Vec<usize>,
    },
    B2 {
        t: usize,
    },
    R2 {
        cols: Vec<usize>,
    },
    Lemma1 {
        delta: usize,
        ell: usize,
        a: usize,
        start: usize,
    },
    Superregular {
        rows: Vec<usize>,
        cols: Vec<usize>,
    },
    EndToEnd {
        len: usize,
        erased: Vec<usize>,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub passed: bool,
    pub cases: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub elapsed_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamReport>,
}

impl PropertyReport {
    fn run(property: Property, body: impl FnOnce(&mut u64) -> Option<Witness>) -> PropertyReport {
        let start = Instant::now();
        let mut cases = 0;
        let witness = body(&mut cases);
        PropertyReport {
            property,
            passed: witness.is_none(),
            cases,
            witness,
            elapsed_secs: start.elapsed().as_secs_f64(),
            stream: None,
        }
    }
}

fn burst_unknowns(p: &CodeParams, t: usize) -> Vec<usize> {
    (t..t + p.b).chain(t + p.tau + 1..p.n()).collect()
}

fn random_unknowns(p: &CodeParams, t: usize, others: &[usize]) -> Vec<usize> {
    std::iter::once(t)
        .chain(others.iter().copied())
        .chain(t + p.tau + 1..p.n())
        .collect()
}

fn b1_fails(pc: &ParityCheck, t: usize) -> bool {
    !recoverable(pc, t, &burst_unknowns(&pc.params, t))
}

fn r1_fails(pc: &ParityCheck, t: usize, others: &[usize]) -> bool {
    !recoverable(pc, t, &random_unknowns(&pc.params, t, others))
}

fn b2_block(pc: &ParityCheck, t: usize) -> Matrix {
    let b = pc.params.b;
    pc.h.submatrix(&(0..b).collect::<Vec<_>>(), &(t..t + b).collect::<Vec<_>>())
        .expect("block lies inside H")
}

fn b2_fails(pc: &ParityCheck, t: usize) -> bool {
    !b2_block(pc, t).is_invertible()
}

fn r2_fails(pc: &ParityCheck, cols: &[usize]) -> bool {
    pc.h.select_columns(cols).expect("columns inside H").rank() < cols.len()
}

pub fn check_b1(pc: &ParityCheck) -> PropertyReport {
    PropertyReport::run(Property::B1, |cases| {
        (0..pc.params.delta()).find_map(|t| {
            *cases += 1;
            b1_fails(pc, t).then_some(Witness::B1 { t })
        })
    })
}

pub fn check_r1(pc: &ParityCheck) -> PropertyReport {
    let p = pc.params;
    PropertyReport::run(Property::R1, |cases| {
        (0..p.delta()).find_map(|t| {
            (t + 1..=t + p.tau)
                .combinations(p.a - 1)
                .find_map(|others| {
                    *cases += 1;
                    r1_fails(pc, t, &others).then_some(Witness::R1 { t, others })
                })
        })
    })
}

pub fn check_b2(pc: &ParityCheck) -> PropertyReport {
    let p = pc.params;
    PropertyReport::run(Property::B2, |cases| {
        (p.delta()..=p.tau + 1 - p.a).find_map(|t| {
            *cases += 1;
            b2_fails(pc, t).then_some(Witness::B2 { t })
        })
    })
}

pub fn check_r2(pc: &ParityCheck) -> PropertyReport {
    let p = pc.params;
    PropertyReport::run(Property::R2, |cases| {
        (p.delta()..=p.tau + p.delta())
            .combinations(p.a)
            .find_map(|cols| {
                *cases += 1;
                r2_fails(pc, &cols).then_some(Witness::R2 { cols })
            })
    })
}

fn lemma1_block(delta: usize, ell: usize, a: usize, start: usize, field: &Field) -> Result<Matrix> {
    let p = build_p_matrix(field, delta, ell, a)?;
    p.submatrix(
        &(start..start + ell).collect::<Vec<_>>(),
        &(0..ell).collect::<Vec<_>>(),
    )
}

/// Every `ell` consecutive rows of `P^a_{delta, ell}` form an invertible
/// matrix; requires `1 <= ell <= delta`.
pub fn check_lemma1(delta: usize, ell: usize, a: usize, field: &Field) -> Result<PropertyReport> {
    if !(1 <= ell && ell <= delta) || a == 0 {
        return param_err(format!(
            "need 1 <= ell <= delta and a >= 1, got delta = {delta}, ell = {ell}, a = {a}"
        ));
    }
    let p = build_p_matrix(field, delta, ell, a)?;
    let cols: Vec<usize> = (0..ell).collect();
    Ok(PropertyReport::run(Property::Lemma1, |cases| {
        (0..=delta - ell).find_map(|start| {
            *cases += 1;
            let rows: Vec<usize> = (start..start + ell).collect();
            let m = p.submatrix(&rows, &cols).expect("rows inside P");
            (!m.is_invertible()).then_some(Witness::Lemma1 {
                delta,
                ell,
                a,
                start,
            })
        })
    }))
}

fn minor_is_singular(c: &Matrix, rows: &[usize], cols: &[usize]) -> bool {
    c.submatrix(rows, cols)
        .and_then(|m| m.det())
        .map_or(true, |d| d.is_zero())
}

/// Every square submatrix of `c` is nonsingular.
pub fn check_superregular(c: &Matrix) -> PropertyReport {
    PropertyReport::run(Property::Superregular, |cases| {
        (1..=c.rows().min(c.cols())).find_map(|s| {
            (0..c.rows()).combinations(s).find_map(|rows| {
                (0..c.cols()).combinations(s).find_map(|cols| {
                    *cases += 1;
                    minor_is_singular(c, &rows, &cols).then(|| Witness::Superregular {
                        rows: rows.clone(),
                        cols,
                    })
                })
            })
        })
    })
}

/// True iff `witness` still exhibits a failure of `pc` (or, for
/// [`Witness::EndToEnd`], of the stream code built on `pc`).
pub fn recheck(pc: &ParityCheck, witness: &Witness) -> Result<bool> {
    let p = pc.params;
    let n = p.n();
    Ok(match witness {
        Witness::B1 { t } => *t < p.delta() && b1_fails(pc, *t),
        Witness::R1 { t, others } => {
            let in_range = others.iter().all(|&i| i > *t && i <= t + p.tau && i < n);
            *t < p.delta() && in_range && r1_fails(pc, *t, others)
        }
        Witness::B2 { t } => *t + p.b <= n && b2_fails(pc, *t),
        Witness::R2 { cols } => cols.iter().all(|&c| c < n) && r2_fails(pc, cols),
        Witness::Lemma1 {
            delta,
            ell,
            a,
            start,
        } => !lemma1_block(*delta, *ell, *a, *start, pc.field())?.is_invertible(),
        Witness::Superregular { rows, cols } => minor_is_singular(&pc.c.c, rows, cols),
        Witness::EndToEnd { len, erased, seed } => {
            let code = Arc::new(ScalarCode::new(pc.clone())?);
            let trace = ErasureTrace::from_indices(*len, erased.iter().copied());
            !run_trace(&code, &trace, *seed)?.is_clean(p.tau)
        }
    })
}

/// Reports for B1, R1, B2 and R2 on one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub params: CodeParams,
    pub reports: Vec<PropertyReport>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyReport> {
        self.reports.iter().filter(|r| !r.passed)
    }
}

/// Runs all four checks on an already-built `H`.
pub fn certify_parity_check(pc: &ParityCheck) -> Certificate {
    Certificate {
        params: pc.params,
        reports: vec![check_b1(pc), check_r1(pc), check_b2(pc), check_r2(pc)],
    }
}

/// Builds `H` for `params` over `field` and certifies it. Fails with a
/// parameter error when `tau` exceeds `tau_cap`.
pub fn certify(params: &CodeParams, field: &Field, tau_cap: usize) -> Result<Certificate> {
    if params.tau > tau_cap {
        return param_err(format!(
            "tau = {} exceeds the certification cap {tau_cap}",
            params.tau
        ));
    }
    let pc = crate::construct::build_parity_check(params, field)?;
    Ok(certify_parity_check(&pc))
}

/// Streams every trace through encoder and decoder and fails on the first
/// trace with a miss, a wrong payload or a late received packet.
pub fn check_traces(
    code: &Arc<ScalarCode>,
    traces: impl IntoIterator<Item = (ErasureTrace, u64)>,
) -> Result<PropertyReport> {
    let tau = code.params().tau;
    let start = Instant::now();
    let mut total = StreamReport::default();
    let mut cases = 0;
    let mut witness = None;
    for (trace, seed) in traces {
        cases += 1;
        let r = run_trace(code, &trace, seed)?;
        total.merge(&r);
        if !r.is_clean(tau) {
            witness = Some(Witness::EndToEnd {
                len: trace.len(),
                erased: trace.erased_indices(),
                seed,
            });
            break;
        }
    }
    Ok(PropertyReport {
        property: Property::EndToEnd,
        passed: witness.is_none(),
        cases,
        witness,
        elapsed_secs: start.elapsed().as_secs_f64(),
        stream: Some(total),
    })
}

/// Settings for [`end_to_end`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndToEndConfig {
    /// Length of each worst-case trace; at least `n + tau`.
    pub horizon: usize,
    pub random_traces: usize,
    pub random_len: usize,
    pub seed: u64,
}

impl EndToEndConfig {
    pub fn for_params(params: &CodeParams) -> EndToEndConfig {
        EndToEndConfig {
            horizon: params.n() + params.tau,
            random_traces: 100,
            random_len: 200,
            seed: 0,
        }
    }
}

/// Every worst-case trace plus seeded random admissible traces.
pub fn end_to_end(code: &Arc<ScalarCode>, cfg: &EndToEndConfig) -> Result<PropertyReport> {
    let params = *code.params();
    let worst = enumerate_worst_cases(&params, cfg.horizon)?
        .enumerate()
        .map(|(i, t)| (t, cfg.seed.wrapping_add(i as u64)));
    let random = (0..cfg.random_traces as u64).map(|i| {
        let s = cfg.seed.wrapping_add(i);
        (random_admissible(&params, cfg.random_len, s), s)
    });
    check_traces(code, worst.chain(random))
}

/// Certifies every point of [`CodeParams::sweep`] in parallel; output
/// follows parameter order.
pub fn sweep(max_tau: usize, tau_cap: usize) -> Result<Vec<Certificate>> {
    CodeParams::sweep(max_tau)
        .par_iter()
        .map(|p| certify(p, &make_field(p.q)?, tau_cap))
        .collect()
}

/// Outcome of trying the construction over one field smaller than `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// No superregular `C` turned up among the random candidates.
    NoSuperregularC {
        tries: usize,
    },
    Certified,
    Failed {
        properties: Vec<Property>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub q: u64,
    #[serde(flatten)]
    pub outcome: ProbeOutcome,
}

/// Random search for a superregular `a x m` matrix over `F_q`.
pub fn search_superregular(
    field: &Field,
    a: usize,
    m: usize,
    tries: usize,
    seed: u64,
) -> Option<SuperregularC> {
    let q = field.q();
    if q < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..tries).find_map(|_| {
        let c = Matrix::from_fn(field, a, m, |_, _| {
            field.from_fq(rng.gen_range(1..q) as u16)
        });
        check_superregular(&c).passed.then_some(SuperregularC { c })
    })
}

/// For each prime power `q' < tau`, looks for a superregular `C` over
/// `F_{q'}`, plugs it into the construction over `F_{q'^2}` and certifies.
/// The results are observations only.
pub fn probe_smaller_fields(
    a: usize,
    b: usize,
    tau: usize,
    tries: usize,
    seed: u64,
) -> Result<Vec<ProbeResult>> {
    CodeParams::new(a, b, tau)?;
    let mut out = Vec::new();
    for q in (2..tau as u64).filter(|&q| prime_power(q).is_some()) {
        let field = make_field(q)?;
        let params = CodeParams { a, b, tau, q };
        let outcome = match search_superregular(&field, a, tau + 1 - a, tries, seed) {
            None => ProbeOutcome::NoSuperregularC { tries },
            Some(c) => {
                let cert = certify_parity_check(&assemble_parity_check(&params, &field, c)?);
                if cert.passed() {
                    ProbeOutcome::Certified
                } else {
                    ProbeOutcome::Failed {
                        properties: cert.failures().map(|r| r.property).collect(),
                    }
                }
            }
        };
        out.push(ProbeResult { q, outcome });
    }
    Ok(out)
}

/// Convenience: builds the default code for `params` and certifies it.
pub fn certify_default(params: &CodeParams) -> Result<Certificate> {
    certify(params, &make_field(params.q)?, DEFAULT_TAU_CAP)
}

//! Explicit parity-check construction for rate-optimal `(a, b, tau)`
//! streaming codes over `F_{q^2}` with `q >= tau`.
//!
//! The scalar code has length `n = tau + 1 + delta` (`delta = b - a`) and
//! dimension `k = n - b`. Its `b x n` parity-check matrix `H` is assembled
//! from `alpha`, identity blocks, the recursive 0/1 matrix `P^a_{u,v}` and a
//! superregular block `C` over `F_q`.

use std::ops::Range;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::gf::{make_field, prime_power, smallest_prime_power_at_least, Elem, Field};
use crate::linalg::Matrix;

/// Streaming-code parameters `(a, b, tau)` plus the base field size `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodeParams {
    pub a: usize,
    pub b: usize,
    pub tau: usize,
    pub q: u64,
}

impl CodeParams {
    /// Parameters over the smallest admissible field, `q` = smallest prime
    /// power `>= tau`.
    pub fn new(a: usize, b: usize, tau: usize) -> Result<CodeParams> {
        let q = smallest_prime_power_at_least(tau as u64);
        CodeParams::with_field_size(a, b, tau, q)
    }

    pub fn with_field_size(a: usize, b: usize, tau: usize, q: u64) -> Result<CodeParams> {
        let params = CodeParams { a, b, tau, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let CodeParams { a, b, tau, q } = *self;
        if !(0 < a && a <= b && b <= tau) {
            return param_err(format!(
                "need 0 < a <= b <= tau, got a = {a}, b = {b}, tau = {tau}"
            ));
        }
        if prime_power(q).is_none() {
            return param_err(format!("field size q = {q} is not a prime power"));
        }
        if q < tau as u64 {
            return param_err(format!(
                "field size q = {q} is below tau = {tau}; need q >= tau"
            ));
        }
        Ok(())
    }

    pub fn delta(&self) -> usize {
        self.b - self.a
    }

    /// Block length `tau + 1 + delta`.
    pub fn n(&self) -> usize {
        self.tau + 1 + self.delta()
    }

    /// Dimension `tau + 1 - a`.
    pub fn k(&self) -> usize {
        self.n() - self.b
    }

    /// Sliding-window size `w = tau + 1`.
    pub fn window(&self) -> usize {
        self.tau + 1
    }

    pub fn rate(&self) -> Ratio<u64> {
        Ratio::new(self.k() as u64, self.n() as u64)
    }

    /// `(tau + 1 - a) / (tau + 1 - a + b)`.
    pub fn optimal_rate(&self) -> Ratio<u64> {
        let num = (self.tau + 1 - self.a) as u64;
        Ratio::new(num, num + self.b as u64)
    }

    /// Every valid `(a, b, tau)` with `tau <= max_tau`, at the default field size.
    pub fn sweep(max_tau: usize) -> Vec<CodeParams> {
        let mut out = Vec::new();
        for tau in 1..=max_tau {
            for b in 1..=tau {
                for a in 1..=b {
                    out.push(CodeParams::new(a, b, tau).expect("sweep points are valid"));
                }
            }
        }
        out
    }
}

/// The recursive 0/1 matrix `P^a_{u,v}`:
///
/// * `[I_u | 0_{u x a} | P^a_{u, v-u-a}]` when `u + a < v`,
/// * `[I_u | 0_{u x (v-u)}]` when `u <= v <= u + a`,
/// * `[I_v ; P^a_{u-v, v}]` when `v < u`.
///
/// Either dimension may be zero, which yields an empty matrix.
pub fn build_p_matrix(field: &Field, u: usize, v: usize, a: usize) -> Result<Matrix> {
    if a == 0 {
        return param_err("P-matrix requires a >= 1");
    }
    let mut out = Matrix::zeros(field, u, v);
    // Both recursive branches are tail calls on a sub-block; walk them.
    let (mut r0, mut c0, mut u, mut v) = (0, 0, u, v);
    while u > 0 && v > 0 {
        if u + a < v {
            out.set_block(r0, c0, &Matrix::identity(field, u));
            c0 += u + a;
            v -= u + a;
        } else if u <= v {
            out.set_block(r0, c0, &Matrix::identity(field, u));
            break;
        } else {
            out.set_block(r0, c0, &Matrix::identity(field, v));
            r0 += v;
            u -= v;
        }
    }
    Ok(out)
}

/// `a x (tau + 1 - a)` matrix over `F_q` whose square submatrices are all
/// nonsingular, so `[I_a | C]` checks a `[tau + 1, tau + 1 - a]` MDS code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperregularC {
    pub c: Matrix,
}

/// Builds `C` from the singly-extended Reed-Solomon code: the `a x (q + 1)`
/// matrix whose columns are `(1, x, ..., x^{a-1})` over all `x in F_q` plus
/// `e_{a-1}`, punctured to its first `tau + 1` columns and brought to the
/// systematic form `[I_a | C]`.
pub fn build_superregular_c(field: &Field, a: usize, tau: usize) -> Result<SuperregularC> {
    let q = field.q() as usize;
    if q < tau {
        return param_err(format!(
            "the superregular block needs q >= tau = {tau}, field has q = {q}"
        ));
    }
    if a == 0 || a > tau {
        return param_err(format!("need 1 <= a <= tau, got a = {a}, tau = {tau}"));
    }
    let len = tau + 1;
    let points: Vec<Elem> = field.subfield_elements().collect();
    let gen = Matrix::from_fn(field, a, len, |i, j| {
        if j < q {
            field.pow(points[j], i as u64)
        } else if i == a - 1 {
            Elem::ONE
        } else {
            Elem::ZERO
        }
    });
    let mut sys = gen;
    let pivots = sys.reduce();
    if pivots != (0..a).collect::<Vec<_>>() {
        return Err(Error::Integrity(
            "leading a columns of the Reed-Solomon generator are dependent".into(),
        ));
    }
    let rows: Vec<usize> = (0..a).collect();
    let cols: Vec<usize> = (a..len).collect();
    Ok(SuperregularC {
        c: sys.submatrix(&rows, &cols)?,
    })
}

/// Which construction step populated a region of `H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// `H([0:delta-1], [0:delta-1]) = alpha * I_delta`
    AlphaDiagonal,
    /// `H([0:delta-1], [b:tau-1]) = P^a_{delta, tau-b}`
    PBlock,
    /// `H([delta:b-1], [0:a-1]) = I_a`
    IdentityA,
    /// `H([delta:b-1], [a:tau]) = C`
    CBlock,
    /// `H(0, tau) = alpha`
    AlphaCorner,
    /// `H([1:delta], [tau+1:tau+delta]) = I_delta`
    IdentityDelta,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub step: Step,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// Parity-check matrix `H` with the `C` block it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheck {
    pub params: CodeParams,
    pub h: Matrix,
    pub c: SuperregularC,
    pub block_map: Vec<Block>,
}

impl ParityCheck {
    pub fn field(&self) -> &Field {
        self.h.field()
    }

    /// Row `t` of `H`.
    pub fn h_row(&self, t: usize) -> Vec<Elem> {
        self.h.row(t).to_vec()
    }

    /// Copy of this check with a single entry of `H` replaced.
    pub fn with_entry(&self, row: usize, col: usize, value: Elem) -> ParityCheck {
        let mut out = self.clone();
        out.h.set(row, col, value);
        out
    }
}

/// Regions written by each construction step, for the given parameters.
/// Empty regions are omitted.
pub fn block_map(params: &CodeParams) -> Vec<Block> {
    let CodeParams { a, b, tau, .. } = *params;
    let d = params.delta();
    let mut blocks = Vec::new();
    let mut push = |step, rows: Range<usize>, cols: Range<usize>| {
        if !rows.is_empty() && !cols.is_empty() {
            blocks.push(Block { step, rows, cols });
        }
    };
    if d > 0 {
        push(Step::AlphaDiagonal, 0..d, 0..d);
        push(Step::PBlock, 0..d, b..tau);
    }
    push(Step::IdentityA, d..b, 0..a);
    push(Step::CBlock, d..b, a..tau + 1);
    if d > 0 {
        push(Step::AlphaCorner, 0..1, tau..tau + 1);
        push(Step::IdentityDelta, 1..d + 1, tau + 1..tau + d + 1);
    }
    blocks
}

/// Assembles `H` step by step. With `delta = 0` only the `I_a` and `C`
/// steps apply and `H = [I_a | C]`.
pub fn build_parity_check(params: &CodeParams, field: &Field) -> Result<ParityCheck> {
    params.validate()?;
    if field.q() as u64 != params.q {
        return param_err(format!(
            "field has q = {}, parameters ask for q = {}",
            field.q(),
            params.q
        ));
    }
    let c = build_superregular_c(field, params.a, params.tau)?;
    assemble_parity_check(params, field, c)
}

/// Runs the construction steps with a caller-supplied `C`. Neither
/// `q >= tau` nor superregularity of `C` is checked, which lets
/// experiments probe smaller fields.
pub fn assemble_parity_check(
    params: &CodeParams,
    field: &Field,
    c: SuperregularC,
) -> Result<ParityCheck> {
    let CodeParams { a, b, tau, .. } = *params;
    if !(0 < a && a <= b && b <= tau) {
        return param_err(format!(
            "need 0 < a <= b <= tau, got a = {a}, b = {b}, tau = {tau}"
        ));
    }
    if (c.c.rows(), c.c.cols()) != (a, tau + 1 - a) {
        return param_err(format!(
            "C must be {a} x {}, got {} x {}",
            tau + 1 - a,
            c.c.rows(),
            c.c.cols()
        ));
    }
    let d = params.delta();
    let n = params.n();
    let alpha = field.alpha();

    let mut h = Matrix::zeros(field, b, n);
    if d > 0 {
        h.set_block(0, 0, &Matrix::identity(field, d).scale(alpha));
        h.set_block(0, b, &build_p_matrix(field, d, tau - b, a)?);
    }
    h.set_block(d, 0, &Matrix::identity(field, a));
    h.set_block(d, a, &c.c);
    if d > 0 {
        h.set(0, tau, alpha);
        h.set_block(1, tau + 1, &Matrix::identity(field, d));
    }
    Ok(ParityCheck {
        params: *params,
        h,
        c,
        block_map: block_map(params),
    })
}

/// Builds the field and parity check for `params` in one call.
pub fn construct(params: &CodeParams) -> Result<ParityCheck> {
    let field = make_field(params.q)?;
    build_parity_check(params, &field)
}

/// Systematic encoding data derived from `H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystematicMaps {
    /// `b x k` map `-H_B^{-1} H_A` from message symbols to parity symbols.
    pub parity_map: Matrix,
    /// `k x n` generator `[I_k | parity_map^T]`.
    pub generator: Matrix,
}

/// Derives the systematic encoder from the invertibility of the last `b`
/// columns of `H`.
pub fn systematic_maps(pc: &ParityCheck) -> Result<SystematicMaps> {
    let field = pc.field();
    let k = pc.params.k();
    let n = pc.params.n();
    let b = pc.params.b;
    let h_a = pc.h.select_columns(&(0..k).collect::<Vec<_>>())?;
    let h_b = pc.h.select_columns(&(k..n).collect::<Vec<_>>())?;
    let h_b_inv = h_b.inverse()?.ok_or_else(|| {
        Error::Integrity(format!(
            "last {b} columns of H are singular; systematic encoding impossible"
        ))
    })?;
    let parity_map = h_b_inv.mul(&h_a)?.neg();
    let mut generator = Matrix::zeros(field, k, n);
    generator.set_block(0, 0, &Matrix::identity(field, k));
    generator.set_block(0, k, &parity_map.transpose());
    if !pc.h.mul(&generator.transpose())?.is_zero() {
        return Err(Error::Integrity("H * G^T is nonzero".into()));
    }
    Ok(SystematicMaps {
        parity_map,
        generator,
    })
}

//! Exact arithmetic in `F_q` (`q = p^m`) and in the tower extension
//! `F_{q^2} = F_q[z] / (z^2 + e1*z + e0)`.
//!
//! An `F_q` element is packed into an integer in `[0, q)` whose base-`p`
//! digits are its coefficients over `F_p`, constant term least significant.
//! All `F_q` operations go through lookup tables built once per field.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

/// Largest base field size accepted by [`make_field`]; keeps the `q x q`
/// lookup tables small.
pub const MAX_FIELD_SIZE: u64 = 1024;

/// Shared handle to an immutable field context.
pub type Field = Arc<FieldCtx>;

/// Element `c0 + c1*z` of `F_{q^2}`, with `c0, c1` packed `F_q` elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem {
    c0: u16,
    c1: u16,
}

impl Elem {
    pub const ZERO: Elem = Elem { c0: 0, c1: 0 };
    pub const ONE: Elem = Elem { c0: 1, c1: 0 };

    pub fn c0(self) -> u16 {
        self.c0
    }

    pub fn c1(self) -> u16 {
        self.c1
    }

    pub fn is_zero(self) -> bool {
        self == Elem::ZERO
    }
}

/// Serializable description of a field: `{p, m, base_poly, ext_poly}`.
///
/// `base_poly` lists `F_p` coefficients in ascending order (empty when
/// `m = 1`); `ext_poly` lists the three `F_q` coefficients of the monic
/// quadratic, each as its `m` digits over `F_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u32,
    pub m: usize,
    pub base_poly: Vec<u32>,
    pub ext_poly: Vec<Vec<u32>>,
}

/// Serialized element: `[c0_digits, c1_digits]`.
pub type ElemRepr = [Vec<u32>; 2];

/// `F_q` together with its quadratic extension and the distinguished
/// element `alpha = z` lying outside `F_q`.
pub struct FieldCtx {
    p: u32,
    m: usize,
    q: u32,
    base_poly: Vec<u32>,
    // e0, e1 of z^2 + e1*z + e0
    ext: [u16; 2],
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    inv: Vec<u16>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.m == other.m
            && self.base_poly == other.base_poly
            && self.ext == other.ext
    }
}

impl Eq for FieldCtx {}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldCtx")
            .field("p", &self.p)
            .field("m", &self.m)
            .field("base_poly", &self.base_poly)
            .field("ext_poly", &[self.ext[0], self.ext[1], 1])
            .finish()
    }
}

/// Splits `q` into `(p, m)` with `q = p^m`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u32, usize)> {
    if q < 2 {
        return None;
    }
    let p = (2..)
        .take_while(|d| d * d <= q)
        .find(|d| q.is_multiple_of(*d))
        .unwrap_or(q);
    let mut rest = q;
    let mut m = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        m += 1;
    }
    (rest == 1).then_some((p as u32, m))
}

/// Smallest prime power `>= x` (and `>= 2`).
pub fn smallest_prime_power_at_least(x: u64) -> u64 {
    (x.max(2)..)
        .find(|&q| prime_power(q).is_some())
        .expect("prime powers are unbounded")
}

/// Builds `F_q` and `F_{q^2}` for the prime power `q_target`, choosing the
/// canonical (lexicographically smallest) irreducible polynomials.
pub fn make_field(q_target: u64) -> Result<Field> {
    let Some((p, m)) = prime_power(q_target) else {
        return param_err(format!("{q_target} is not a prime power"));
    };
    if q_target > MAX_FIELD_SIZE {
        return param_err(format!(
            "field size {q_target} exceeds the supported maximum {MAX_FIELD_SIZE}"
        ));
    }
    let base_poly = if m == 1 {
        Vec::new()
    } else {
        canonical_base_poly(p, m)
    };
    let partial = FieldCtx::base_only(p, m, base_poly);
    let ext = partial
        .canonical_ext_poly()
        .ok_or_else(|| Error::Integrity(format!("no irreducible quadratic over F_{q_target}")))?;
    Ok(Arc::new(FieldCtx { ext, ..partial }))
}

impl FieldCtx {
    /// Rebuilds a field from explicit defining polynomials, checking that
    /// both are monic and irreducible.
    pub fn with_polynomials(
        p: u32,
        m: usize,
        base_poly: Vec<u32>,
        ext_poly: [u16; 3],
    ) -> Result<Field> {
        if prime_power(p as u64) != Some((p, 1)) {
            return param_err(format!("characteristic {p} is not prime"));
        }
        if m == 0 {
            return param_err("extension degree m must be at least 1");
        }
        let q = (p as u64).checked_pow(m as u32).unwrap_or(u64::MAX);
        if q > MAX_FIELD_SIZE {
            return param_err(format!(
                "field size {q} exceeds the supported maximum {MAX_FIELD_SIZE}"
            ));
        }
        if m == 1 {
            if !base_poly.is_empty() {
                return param_err("base_poly must be empty for a prime field");
            }
        } else {
            if base_poly.len() != m + 1 || base_poly[m] != 1 || base_poly.iter().any(|&c| c >= p) {
                return param_err(format!(
                    "base_poly must be a monic degree-{m} polynomial over F_{p}"
                ));
            }
            if !is_irreducible_fp(&base_poly, p) {
                return param_err(format!("base_poly {base_poly:?} is reducible over F_{p}"));
            }
        }
        let ctx = FieldCtx::base_only(p, m, base_poly);
        if ext_poly[2] != 1 || ext_poly.iter().any(|&c| c as u32 >= ctx.q) {
            return param_err("ext_poly must be a monic quadratic over F_q");
        }
        let ext = [ext_poly[0], ext_poly[1]];
        if !ctx.quadratic_is_irreducible(ext) {
            return param_err(format!(
                "ext_poly {ext_poly:?} is reducible over F_{}",
                ctx.q
            ));
        }
        Ok(Arc::new(FieldCtx { ext, ..ctx }))
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Field> {
        if spec.ext_poly.len() != 3 {
            return param_err("ext_poly must list exactly three coefficients");
        }
        let (p, m) = (spec.p, spec.m);
        let mut ext = [0u16; 3];
        for (slot, digits) in ext.iter_mut().zip(&spec.ext_poly) {
            *slot = pack_digits(digits, p, m)?;
        }
        FieldCtx::with_polynomials(p, m, spec.base_poly.clone(), ext)
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec {
            p: self.p,
            m: self.m,
            base_poly: self.base_poly.clone(),
            ext_poly: [self.ext[0], self.ext[1], 1]
                .iter()
                .map(|&c| self.fq_digits(c))
                .collect(),
        }
    }

    fn base_only(p: u32, m: usize, base_poly: Vec<u32>) -> FieldCtx {
        let q = p.pow(m as u32);
        let qs = q as usize;
        let digits: Vec<Vec<u32>> = (0..q).map(|x| unpack(x, p, m)).collect();
        let mut add = vec![0u16; qs * qs];
        let mut mul = vec![0u16; qs * qs];
        for x in 0..qs {
            for y in 0..qs {
                let sum: Vec<u32> = digits[x]
                    .iter()
                    .zip(&digits[y])
                    .map(|(a, b)| (a + b) % p)
                    .collect();
                add[x * qs + y] = pack(&sum, p);
                mul[x * qs + y] = if m == 1 {
                    ((x * y) % qs) as u16
                } else {
                    pack(&mul_mod_fp(&digits[x], &digits[y], &base_poly, p), p)
                };
            }
        }
        let neg = (0..qs)
            .map(|x| {
                pack(
                    &digits[x].iter().map(|d| (p - d) % p).collect::<Vec<_>>(),
                    p,
                )
            })
            .collect();
        let mut inv = vec![0u16; qs];
        for x in 1..qs {
            inv[x] = (1..qs)
                .find(|&y| mul[x * qs + y] == 1)
                .expect("nonzero elements of a field are invertible") as u16;
        }
        FieldCtx {
            p,
            m,
            q,
            base_poly,
            ext: [0, 0],
            add,
            mul,
            neg,
            inv,
        }
    }

    /// Smallest monic irreducible `z^2 + e1*z + e0`, ordered by `e0` then `e1`.
    fn canonical_ext_poly(&self) -> Option<[u16; 2]> {
        let q = self.q as u16;
        (0..q)
            .flat_map(|e0| (0..q).map(move |e1| [e0, e1]))
            .find(|&ext| self.quadratic_is_irreducible(ext))
    }

    fn quadratic_is_irreducible(&self, [e0, e1]: [u16; 2]) -> bool {
        (0..self.q as u16).all(|x| {
            let v = self.fq_add(self.fq_mul(x, self.fq_add(x, e1)), e0);
            v != 0
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Size of the base field `F_q`.
    pub fn q(&self) -> u32 {
        self.q
    }

    /// Size of the extension field `F_{q^2}`.
    pub fn order(&self) -> u64 {
        self.q as u64 * self.q as u64
    }

    pub fn base_poly(&self) -> &[u32] {
        &self.base_poly
    }

    /// Ascending packed coefficients `[e0, e1, 1]` of the extension modulus.
    pub fn ext_poly(&self) -> [u16; 3] {
        [self.ext[0], self.ext[1], 1]
    }

    #[inline]
    fn idx(&self, x: u16, y: u16) -> usize {
        x as usize * self.q as usize + y as usize
    }

    #[inline]
    pub fn fq_add(&self, x: u16, y: u16) -> u16 {
        self.add[self.idx(x, y)]
    }

    #[inline]
    pub fn fq_mul(&self, x: u16, y: u16) -> u16 {
        self.mul[self.idx(x, y)]
    }

    #[inline]
    pub fn fq_neg(&self, x: u16) -> u16 {
        self.neg[x as usize]
    }

    #[inline]
    pub fn fq_sub(&self, x: u16, y: u16) -> u16 {
        self.fq_add(x, self.fq_neg(y))
    }

    pub fn fq_digits(&self, x: u16) -> Vec<u32> {
        unpack(x as u32, self.p, self.m)
    }

    pub fn zero(&self) -> Elem {
        Elem::ZERO
    }

    pub fn one(&self) -> Elem {
        Elem::ONE
    }

    /// The canonical `alpha in F_{q^2} \ F_q`: the residue class of `z`.
    pub fn alpha(&self) -> Elem {
        Elem { c0: 0, c1: 1 }
    }

    /// Embeds an `F_q` element given in packed form.
    pub fn from_fq(&self, x: u16) -> Elem {
        assert!(
            (x as u32) < self.q,
            "F_q element {x} out of range for q = {}",
            self.q
        );
        Elem { c0: x, c1: 0 }
    }

    /// Builds `c0 + c1*z` from packed `F_q` coordinates.
    pub fn elem(&self, c0: u16, c1: u16) -> Result<Elem> {
        if c0 as u32 >= self.q || c1 as u32 >= self.q {
            return param_err(format!(
                "coordinates ({c0}, {c1}) out of range for q = {}",
                self.q
            ));
        }
        Ok(Elem { c0, c1 })
    }

    /// Image of an integer under `Z -> F_p -> F_{q^2}`.
    pub fn from_int(&self, v: i64) -> Elem {
        Elem {
            c0: v.rem_euclid(self.p as i64) as u16,
            c1: 0,
        }
    }

    pub fn add(&self, x: Elem, y: Elem) -> Elem {
        Elem {
            c0: self.fq_add(x.c0, y.c0),
            c1: self.fq_add(x.c1, y.c1),
        }
    }

    pub fn neg(&self, x: Elem) -> Elem {
        Elem {
            c0: self.fq_neg(x.c0),
            c1: self.fq_neg(x.c1),
        }
    }

    pub fn sub(&self, x: Elem, y: Elem) -> Elem {
        self.add(x, self.neg(y))
    }

    pub fn mul(&self, x: Elem, y: Elem) -> Elem {
        if x.c1 == 0 && y.c1 == 0 {
            return Elem {
                c0: self.fq_mul(x.c0, y.c0),
                c1: 0,
            };
        }
        // z^2 = -e1*z - e0
        let hi = self.fq_mul(x.c1, y.c1);
        let c0 = self.fq_sub(self.fq_mul(x.c0, y.c0), self.fq_mul(hi, self.ext[0]));
        let cross = self.fq_add(self.fq_mul(x.c0, y.c1), self.fq_mul(x.c1, y.c0));
        let c1 = self.fq_sub(cross, self.fq_mul(hi, self.ext[1]));
        Elem { c0, c1 }
    }

    pub fn inv(&self, x: Elem) -> Result<Elem> {
        if x.is_zero() {
            return Err(Error::Arithmetic("inversion of zero".into()));
        }
        if x.c1 == 0 {
            return Ok(Elem {
                c0: self.inv[x.c0 as usize],
                c1: 0,
            });
        }
        // conjugate of c0 + c1*z is (c0 - c1*e1) - c1*z; the norm lies in F_q
        let conj = Elem {
            c0: self.fq_sub(x.c0, self.fq_mul(x.c1, self.ext[1])),
            c1: self.fq_neg(x.c1),
        };
        let norm = self.mul(x, conj);
        debug_assert_eq!(norm.c1, 0);
        Ok(self.mul(conj, self.from_fq(self.inv[norm.c0 as usize])))
    }

    pub fn div(&self, x: Elem, y: Elem) -> Result<Elem> {
        Ok(self.mul(x, self.inv(y)?))
    }

    pub fn pow(&self, x: Elem, mut e: u64) -> Elem {
        let mut base = x;
        let mut acc = Elem::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// True iff `x` lies in the base field `F_q`.
    pub fn in_subfield(&self, x: Elem) -> bool {
        x.c1 == 0
    }

    /// All `q^2` elements, in packed order.
    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        let q = self.q as u16;
        (0..q).flat_map(move |c1| (0..q).map(move |c0| Elem { c0, c1 }))
    }

    /// All `q` elements of the base field.
    pub fn subfield_elements(&self) -> impl Iterator<Item = Elem> + '_ {
        (0..self.q as u16).map(|c0| Elem { c0, c1: 0 })
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        Elem {
            c0: rng.gen_range(0..self.q) as u16,
            c1: rng.gen_range(0..self.q) as u16,
        }
    }

    pub fn to_repr(&self, x: Elem) -> ElemRepr {
        [self.fq_digits(x.c0), self.fq_digits(x.c1)]
    }

    pub fn from_repr(&self, repr: &[Vec<u32>]) -> Result<Elem> {
        if repr.len() != 2 {
            return Err(Error::Format(format!(
                "element must have two coordinates, found {}",
                repr.len()
            )));
        }
        Ok(Elem {
            c0: pack_digits(&repr[0], self.p, self.m).map_err(into_format)?,
            c1: pack_digits(&repr[1], self.p, self.m).map_err(into_format)?,
        })
    }

    /// Human-readable rendering such as `3 + 5a` (`a` standing for alpha).
    pub fn render(&self, x: Elem) -> String {
        let coord = |c: u16| {
            if self.m == 1 {
                c.to_string()
            } else {
                format!(
                    "<{}>",
                    self.fq_digits(c)
                        .iter()
                        .map(u32::to_string)
                        .collect::<Vec<_>>()
                        .join(",")
                )
            }
        };
        match (x.c0, x.c1) {
            (c0, 0) => coord(c0),
            (0, 1) => "a".into(),
            (0, c1) => format!("{}a", coord(c1)),
            (c0, 1) => format!("{} + a", coord(c0)),
            (c0, c1) => format!("{} + {}a", coord(c0), coord(c1)),
        }
    }
}

fn into_format(e: Error) -> Error {
    match e {
        Error::Parameter(msg) => Error::Format(msg),
        other => other,
    }
}

fn unpack(mut x: u32, p: u32, m: usize) -> Vec<u32> {
    (0..m)
        .map(|_| {
            let d = x % p;
            x /= p;
            d
        })
        .collect()
}

fn pack(digits: &[u32], p: u32) -> u16 {
    digits.iter().rev().fold(0u32, |acc, &d| acc * p + d) as u16
}

fn pack_digits(digits: &[u32], p: u32, m: usize) -> Result<u16> {
    if digits.len() != m {
        return param_err(format!("expected {m} F_p digits, found {}", digits.len()));
    }
    if let Some(&d) = digits.iter().find(|&&d| d >= p) {
        return param_err(format!("digit {d} out of range for p = {p}"));
    }
    Ok(pack(digits, p))
}

/// Product of two residues modulo the monic `modulus` over `F_p`.
fn mul_mod_fp(x: &[u32], y: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let m = modulus.len() - 1;
    let mut prod = vec![0u32; 2 * m];
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in y.iter().enumerate() {
            prod[i + j] = (prod[i + j] + a * b) % p;
        }
    }
    rem_monic(&mut prod, modulus, p);
    prod.truncate(m);
    prod
}

/// Reduces `f` in place modulo the monic polynomial `g`.
fn rem_monic(f: &mut [u32], g: &[u32], p: u32) {
    let dg = g.len() - 1;
    for top in (dg..f.len()).rev() {
        let lead = f[top];
        if lead == 0 {
            continue;
        }
        for (k, &gk) in g.iter().enumerate() {
            let idx = top - dg + k;
            f[idx] = (f[idx] + (p - lead) * gk) % p;
        }
    }
}

fn is_irreducible_fp(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    for d in 1..=deg / 2 {
        for low in 0..(p as u64).pow(d as u32) {
            let mut g = unpack(low as u32, p, d);
            g.push(1);
            let mut r = f.to_vec();
            rem_monic(&mut r, &g, p);
            if r[..d].iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// Smallest monic irreducible of degree `m` over `F_p`, comparing the
/// ascending coefficient vectors lexicographically (constant term first).
fn canonical_base_poly(p: u32, m: usize) -> Vec<u32> {
    let count = (p as u64).pow(m as u32);
    (0..count)
        .map(|idx| {
            // constant term is the most significant digit of the search order
            let mut f: Vec<u32> = unpack(idx as u32, p, m).into_iter().rev().collect();
            f.push(1);
            f
        })
        .find(|f| is_irreducible_fp(f, p))
        .expect("irreducible polynomials exist in every degree")
}

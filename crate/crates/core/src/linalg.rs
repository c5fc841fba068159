//! Dense exact linear algebra over a [`FieldCtx`].
//!
//! Index sets follow the `M(I, J)` convention: `submatrix(I, J)` keeps the
//! rows in `I` and the columns in `J`, in the order given.

use std::fmt;

use crate::error::{param_err, Result};
use crate::gf::{Elem, Field};

#[derive(Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
    field: Field,
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data == other.data
            && *self.field == *other.field
    }
}

impl Eq for Matrix {}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|&x| self.field.render(x)).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Outcome of [`Matrix::solve`] on a consistent system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// One solution (free variables set to zero).
    pub values: Vec<Elem>,
    /// True iff the system has exactly one solution.
    pub unique: bool,
}

impl Matrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![Elem::ZERO; rows * cols],
            field: field.clone(),
        }
    }

    pub fn identity(field: &Field, n: usize) -> Matrix {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, Elem::ONE);
        }
        m
    }

    pub fn from_rows(field: &Field, rows: Vec<Vec<Elem>>) -> Result<Matrix> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return param_err(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            ));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
            field: field.clone(),
        })
    }

    /// Convenience constructor from small integers (reduced mod `p`).
    pub fn from_ints(field: &Field, rows: &[&[i64]]) -> Result<Matrix> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| field.from_int(v)).collect())
            .collect();
        Matrix::from_rows(field, rows)
    }

    pub fn from_fn(
        field: &Field,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Elem,
    ) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix {
            rows,
            cols,
            data,
            field: field.clone(),
        }
    }

    pub fn column_vector(field: &Field, v: &[Elem]) -> Matrix {
        Matrix::from_fn(field, v.len(), 1, |r, _| v[r])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Elem> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Elem>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Elem)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(|(i, &v)| (i / self.cols, i % self.cols, v))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// `M(I, J)`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Matrix> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.rows) {
            return param_err(format!("row index {r} out of range for {} rows", self.rows));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return param_err(format!(
                "column index {c} out of range for {} columns",
                self.cols
            ));
        }
        Ok(Matrix::from_fn(
            &self.field,
            rows.len(),
            cols.len(),
            |i, j| self.get(rows[i], cols[j]),
        ))
    }

    /// Columns in `cols`, all rows.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Matrix> {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, cols)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block {}x{} at ({r0}, {c0}) does not fit in {}x{}",
            block.rows,
            block.cols,
            self.rows,
            self.cols
        );
        for (r, c, v) in block.entries() {
            self.set(r0 + r, c0 + c, v);
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(&self.field, self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn scale(&self, s: Elem) -> Matrix {
        let f = &self.field;
        Matrix::from_fn(f, self.rows, self.cols, |r, c| f.mul(s, self.get(r, c)))
    }

    pub fn neg(&self) -> Matrix {
        let f = &self.field;
        Matrix::from_fn(f, self.rows, self.cols, |r, c| f.neg(self.get(r, c)))
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return param_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let f = &self.field;
        Ok(Matrix::from_fn(f, self.rows, other.cols, |r, c| {
            (0..self.cols).fold(Elem::ZERO, |acc, k| {
                f.add(acc, f.mul(self.get(r, k), other.get(k, c)))
            })
        }))
    }

    pub fn mul_vec(&self, v: &[Elem]) -> Result<Vec<Elem>> {
        if v.len() != self.cols {
            return param_err(format!(
                "vector of length {} incompatible with {} columns",
                v.len(),
                self.cols
            ));
        }
        let f = &self.field;
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(Elem::ZERO, |acc, (&a, &x)| f.add(acc, f.mul(a, x)))
            })
            .collect())
    }

    /// Reduced row echelon form in place, with first-nonzero pivoting.
    /// Returns the pivot column of each nonzero row.
    pub fn reduce(&mut self) -> Vec<usize> {
        let f = self.field.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else {
                continue;
            };
            self.swap_rows(r, pr);
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in c..self.cols {
                let v = f.mul(inv, self.get(r, j));
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                let factor = self.get(i, c);
                if i == r || factor.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let v = f.sub(self.get(i, j), f.mul(factor, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce().len()
    }

    /// `|M|` by Gaussian elimination. The `0 x 0` determinant is one.
    pub fn det(&self) -> Result<Elem> {
        if !self.is_square() {
            return param_err(format!(
                "determinant of non-square {}x{} matrix",
                self.rows, self.cols
            ));
        }
        let f = self.field.clone();
        let mut m = self.clone();
        let n = self.rows;
        let mut det = Elem::ONE;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| !m.get(i, c).is_zero()) else {
                return Ok(Elem::ZERO);
            };
            if pr != c {
                m.swap_rows(c, pr);
                det = f.neg(det);
            }
            let pivot = m.get(c, c);
            det = f.mul(det, pivot);
            let inv = f.inv(pivot)?;
            for i in c + 1..n {
                let factor = f.mul(m.get(i, c), inv);
                if factor.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = f.sub(m.get(i, j), f.mul(factor, m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<Option<Matrix>> {
        if !self.is_square() {
            return param_err(format!(
                "inverse of non-square {}x{} matrix",
                self.rows, self.cols
            ));
        }
        let n = self.rows;
        let mut aug = Matrix::from_fn(&self.field, n, 2 * n, |r, c| {
            if c < n {
                self.get(r, c)
            } else if c - n == r {
                Elem::ONE
            } else {
                Elem::ZERO
            }
        });
        let pivots = aug.reduce();
        if pivots.len() < n || pivots[n - 1] >= n {
            return Ok(None);
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        let rows: Vec<usize> = (0..n).collect();
        aug.submatrix(&rows, &cols).map(Some)
    }

    /// Solves `A x = b`. Returns `None` when inconsistent.
    pub fn solve(&self, b: &[Elem]) -> Result<Option<Solution>> {
        let mut aug = self.augmented_checked(b)?;
        let pivots = aug.reduce();
        if pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut values = vec![Elem::ZERO; self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            values[pc] = aug.get(row, self.cols);
        }
        Ok(Some(Solution {
            values,
            unique: pivots.len() == self.cols,
        }))
    }

    /// Solves `A x = b` and reports only the coordinates that every solution
    /// shares. Returns `None` when inconsistent.
    pub fn solve_partial(&self, b: &[Elem]) -> Result<Option<Vec<Option<Elem>>>> {
        let mut aug = self.augmented_checked(b)?;
        let pivots = aug.reduce();
        if pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut out = vec![None; self.cols];
        let is_pivot = {
            let mut v = vec![false; self.cols];
            for &p in &pivots {
                v[p] = true;
            }
            v
        };
        for (row, &pc) in pivots.iter().enumerate() {
            // x_pc is pinned iff its row has no free-variable entries
            let pinned = (pc + 1..self.cols).all(|c| is_pivot[c] || aug.get(row, c).is_zero());
            if pinned {
                out[pc] = Some(aug.get(row, self.cols));
            }
        }
        Ok(Some(out))
    }

    fn augmented_checked(&self, b: &[Elem]) -> Result<Matrix> {
        if b.len() != self.rows {
            return param_err(format!(
                "right-hand side of length {} for {} equations",
                b.len(),
                self.rows
            ));
        }
        Ok(self.augmented(b))
    }

    fn augmented(&self, b: &[Elem]) -> Matrix {
        Matrix::from_fn(&self.field, self.rows, self.cols + 1, |r, c| {
            if c < self.cols {
                self.get(r, c)
            } else {
                b[r]
            }
        })
    }

    /// True iff the column `v` lies in the column span of `self`.
    pub fn in_span(&self, v: &[Elem]) -> Result<bool> {
        if v.len() != self.rows {
            return param_err(format!(
                "vector of length {} incompatible with {} rows",
                v.len(),
                self.rows
            ));
        }
        Ok(self.augmented(v).rank() == self.rank())
    }
}

/// Column-span membership `v in span(S)`.
pub fn in_span(v: &[Elem], s: &Matrix) -> Result<bool> {
    s.in_span(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::gf::make_field;

    #[test]
    fn identity_submatrix() {
        let f = make_field(13).unwrap();
        let i3 = Matrix::identity(&f, 3);
        assert_eq!(i3.submatrix(&[0, 1, 2], &[0, 1, 2]).unwrap(), i3);
        let empty = i3.submatrix(&[], &[0, 2]).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 2));
        assert!(matches!(i3.submatrix(&[3], &[0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn determinants() {
        let f = make_field(13).unwrap();
        for u in 0..6 {
            assert_eq!(Matrix::identity(&f, u).det().unwrap(), f.one());
        }
        // cofactor expansion: 1*4 - 2*3 = -2 = 11 (mod 13)
        let m = Matrix::from_ints(&f, &[&[1, 2], &[3, 4]]).unwrap();
        assert_eq!(m.det().unwrap(), f.from_int(11));
        let rep = Matrix::from_ints(&f, &[&[1, 2, 3], &[4, 5, 6], &[1, 2, 3]]).unwrap();
        assert_eq!(rep.det().unwrap(), f.zero());
        assert!(Matrix::zeros(&f, 2, 3).det().is_err());
    }

    #[test]
    fn rank_and_span() {
        let f = make_field(7).unwrap();
        assert_eq!(Matrix::zeros(&f, 0, 5).rank(), 0);
        let i4 = Matrix::identity(&f, 4);
        let rest = i4.select_columns(&[1, 2, 3]).unwrap();
        let e0 = i4.column(0);
        assert!(!in_span(&e0, &rest).unwrap());
        assert!(in_span(&i4.column(2), &rest).unwrap());
        assert!(rest.in_span(&[f.one()]).is_err());
    }

    #[test]
    fn solve_consistency_and_uniqueness() {
        let f = make_field(5).unwrap();
        let a = Matrix::from_ints(&f, &[&[1, 1, 0], &[0, 1, 1]]).unwrap();
        let b = vec![f.from_int(2), f.from_int(3)];
        let sol = a.solve(&b).unwrap().unwrap();
        assert!(!sol.unique);
        assert_eq!(a.mul_vec(&sol.values).unwrap(), b);

        // x0 + x1 = 1 and x0 + x1 = 2 cannot both hold
        let inc = Matrix::from_ints(&f, &[&[1, 1], &[1, 1]]).unwrap();
        assert!(inc
            .solve(&[f.from_int(1), f.from_int(2)])
            .unwrap()
            .is_none());

        let sq = Matrix::from_ints(&f, &[&[2, 1], &[1, 4]]).unwrap();
        let sol = sq.solve(&[f.one(), f.zero()]).unwrap().unwrap();
        assert!(sol.unique);
    }

    #[test]
    fn partial_solution_pins_only_determined_coordinates() {
        let f = make_field(5).unwrap();
        // x0 = 3, x1 + x2 = 1
        let a = Matrix::from_ints(&f, &[&[1, 0, 0], &[0, 1, 1]]).unwrap();
        let part = a.solve_partial(&[f.from_int(3), f.one()]).unwrap().unwrap();
        assert_eq!(part, vec![Some(f.from_int(3)), None, None]);
    }

    #[test]
    fn inverse_round_trip() {
        let f = make_field(9).unwrap();
        let m = Matrix::from_rows(
            &f,
            vec![vec![f.alpha(), f.one()], vec![f.one(), f.from_int(2)]],
        )
        .unwrap();
        let inv = m.inverse().unwrap().unwrap();
        assert_eq!(m.mul(&inv).unwrap(), Matrix::identity(&f, 2));
        let sing = Matrix::from_ints(&f, &[&[1, 1], &[2, 2]]).unwrap();
        assert!(sing.inverse().unwrap().is_none());
    }

    mod props {
        use super::*;
        use crate::gf::Field;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        fn random_matrix(f: &Field, rows: usize, cols: usize, seed: u64, sparsity: u8) -> Matrix {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Matrix::from_fn(f, rows, cols, |_, _| {
                // sprinkle zeros so rank-deficient cases are common
                if rand::Rng::gen_range(&mut rng, 0..10u8) < sparsity {
                    Elem::ZERO
                } else {
                    f.random(&mut rng)
                }
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn rank_is_transpose_invariant(q in prop_oneof![Just(2u64), Just(3), Just(4), Just(7)],
                                           rows in 0usize..6, cols in 0usize..6, seed: u64, sp in 0u8..9) {
                let f = make_field(q).unwrap();
                let m = random_matrix(&f, rows, cols, seed, sp);
                prop_assert_eq!(m.rank(), m.transpose().rank());
            }

            #[test]
            fn det_is_multiplicative(q in prop_oneof![Just(2u64), Just(5), Just(8)], n in 0usize..5, seed: u64, sp in 0u8..6) {
                let f = make_field(q).unwrap();
                let a = random_matrix(&f, n, n, seed, sp);
                let b = random_matrix(&f, n, n, seed.wrapping_add(1), sp);
                let ab = a.mul(&b).unwrap();
                prop_assert_eq!(ab.det().unwrap(), f.mul(a.det().unwrap(), b.det().unwrap()));
                prop_assert_eq!(a.det().unwrap().is_zero(), a.rank() < n);
            }

            #[test]
            fn solve_round_trip(q in prop_oneof![Just(3u64), Just(4), Just(11)], rows in 1usize..6, cols in 1usize..6,
                                seed: u64, sp in 0u8..8) {
                let f = make_field(q).unwrap();
                let a = random_matrix(&f, rows, cols, seed, sp);
                let x: Vec<Elem> = random_matrix(&f, cols, 1, seed ^ 0xabc, 0).column(0);
                let b = a.mul_vec(&x).unwrap();
                let sol = a.solve(&b).unwrap().expect("consistent by construction");
                prop_assert_eq!(a.mul_vec(&sol.values).unwrap(), b);
                prop_assert_eq!(sol.unique, a.rank() == cols);
                let partial = a.solve_partial(&a.mul_vec(&x).unwrap()).unwrap().unwrap();
                for (i, v) in partial.iter().enumerate() {
                    if let Some(v) = v {
                        prop_assert_eq!(*v, x[i]);
                    }
                }
            }
        }
    }
}

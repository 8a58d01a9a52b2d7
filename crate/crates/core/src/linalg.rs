//! Small dense symmetric linear algebra.
//!
//! Matrices are stored packed: the lower triangle, row by row, so element
//! `(r, c)` with `r >= c` lives at `r * (r + 1) / 2 + c`. The solver first
//! tries a Cholesky factorization directly on the packed rows. If a pivot is
//! not positive it unpacks into a column-major scratch buffer and runs a
//! Bunch-Kaufman `L D L^T` factorization with symmetric pivoting (1x1 and 2x2
//! blocks), the same scheme LAPACK's `dsysv` uses. Positive definiteness is
//! therefore not assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of stored entries of a packed symmetric matrix of the given order.
#[inline]
pub const fn packed_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Offset of element `(row, col)` in packed lower storage. Symmetric in its arguments.
#[inline]
pub fn packed_index(row: usize, col: usize) -> usize {
    let (r, c) = if row >= col { (row, col) } else { (col, row) };
    r * (r + 1) / 2 + c
}

/// Symmetric matrix in packed lower-triangular storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedSymmetric {
    order: usize,
    entries: Vec<f64>,
}

impl PackedSymmetric {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![0.0; packed_len(order)],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.entries[packed_index(i, i)] = 1.0;
        }
        m
    }

    pub fn from_packed(order: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != packed_len(order) {
            return Err(Error::DimensionMismatch {
                expected: packed_len(order),
                found: entries.len(),
            });
        }
        Ok(Self { order, entries })
    }

    /// Builds a packed matrix from the lower triangle of a dense row-major
    /// square matrix. The upper triangle is ignored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::DimensionMismatch {
                    expected: order,
                    found: row.len(),
                });
            }
            for c in 0..=r {
                m.entries[packed_index(r, c)] = row[c];
            }
        }
        Ok(m)
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        let mut m = Self::zeros(diagonal.len());
        for (i, &d) in diagonal.iter().enumerate() {
            m.entries[packed_index(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[packed_index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[packed_index(row, col)] = value;
    }

    #[inline]
    pub fn diagonal(&self, i: usize) -> f64 {
        self.entries[packed_index(i, i)]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.order)
            .map(|r| (0..self.order).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// Solves `coefficients * x = ordinates`.
pub fn solve_symmetric(coefficients: &PackedSymmetric, ordinates: &[f64]) -> Result<Vec<f64>> {
    SymmetricSolver::default().solve(coefficients, ordinates)
}

/// Symmetric packed matrix-vector product.
pub fn sym_mat_vec(matrix: &PackedSymmetric, vector: &[f64]) -> Result<Vec<f64>> {
    if vector.len() != matrix.order {
        return Err(Error::DimensionMismatch {
            expected: matrix.order,
            found: vector.len(),
        });
    }
    let mut out = vec![0.0; matrix.order];
    spmv_into(matrix.order, &matrix.entries, vector, &mut out);
    Ok(out)
}

/// `out = A * v` for packed lower storage `a` of the given order. No checks.
pub(crate) fn spmv_into(order: usize, a: &[f64], v: &[f64], out: &mut [f64]) {
    out[..order].iter_mut().for_each(|x| *x = 0.0);
    let mut offset = 0;
    for r in 0..order {
        let row = &a[offset..offset + r + 1];
        let mut acc = 0.0;
        for c in 0..r {
            acc += row[c] * v[c];
            out[c] += row[c] * v[r];
        }
        out[r] += acc + row[r] * v[r];
        offset += r + 1;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product with four independent accumulators, which lets the compiler vectorize.
#[inline]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum::<f64>();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dot products of `x` with `a` and with `b`, reading `x` once.
#[inline]
fn dot_pair(x: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = x.len().min(a.len()).min(b.len());
    let (x, a, b) = (&x[..n], &a[..n], &b[..n]);
    let mut acc_a = [0.0; 4];
    let mut acc_b = [0.0; 4];
    let split = n - n % 4;
    for ((cx, ca), cb) in x[..split]
        .chunks_exact(4)
        .zip(a[..split].chunks_exact(4))
        .zip(b[..split].chunks_exact(4))
    {
        for i in 0..4 {
            acc_a[i] += cx[i] * ca[i];
            acc_b[i] += cx[i] * cb[i];
        }
    }
    let mut sa = (acc_a[0] + acc_a[1]) + (acc_a[2] + acc_a[3]);
    let mut sb = (acc_b[0] + acc_b[1]) + (acc_b[2] + acc_b[3]);
    for k in split..n {
        sa += x[k] * a[k];
        sb += x[k] * b[k];
    }
    (sa, sb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pivot {
    /// 1x1 block; row/column interchanged with the given index.
    Single(usize),
    /// 2x2 block; the second row/column interchanged with the given index.
    Double(usize),
}

/// Reusable workspace for repeated symmetric solves of varying order.
#[derive(Debug, Default, Clone)]
pub struct SymmetricSolver {
    // packed lower rows, overwritten by the Cholesky factor
    packed: Vec<f64>,
    // column-major, lower triangle used
    work: Vec<f64>,
    pivots: Vec<Pivot>,
}

impl SymmetricSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, coefficients: &PackedSymmetric, ordinates: &[f64]) -> Result<Vec<f64>> {
        if ordinates.len() != coefficients.order {
            return Err(Error::DimensionMismatch {
                expected: coefficients.order,
                found: ordinates.len(),
            });
        }
        let mut x = ordinates.to_vec();
        self.solve_shifted_in_place(coefficients.order, &coefficients.entries, |_| 0.0, &mut x)?;
        Ok(x)
    }

    /// Solves `(A + diag(shift)) x = rhs` in place, where `A` is given in packed
    /// lower storage and `shift(i)` is added to the i-th diagonal element.
    pub fn solve_shifted_in_place(
        &mut self,
        order: usize,
        packed: &[f64],
        shift: impl Fn(usize) -> f64,
        rhs: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(packed.len(), packed_len(order));
        debug_assert_eq!(rhs.len(), order);
        if order == 0 {
            return Ok(());
        }
        if self.cholesky(order, packed, &shift) {
            self.cholesky_substitute(order, rhs);
        } else {
            self.load(order, packed, shift);
            self.factor(order)?;
            self.substitute(order, rhs);
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularSystem { pivot: 0 });
        }
        Ok(())
    }

    /// Overwrites `self.packed` with `L` such that `A + diag(shift) = L L^T`.
    /// Returns false when a pivot is not positive and finite.
    fn cholesky(&mut self, n: usize, packed: &[f64], shift: &impl Fn(usize) -> f64) -> bool {
        let l = &mut self.packed;
        l.clear();
        l.extend_from_slice(packed);
        for i in 0..n {
            let row_i = i * (i + 1) / 2;
            let (head, tail) = l.split_at_mut(row_i);
            let row = &mut tail[..=i];
            let mut j = 0;
            // two rows of the factor per pass share the loads of row i
            while j + 1 < i {
                let (rj, rj1) = (j * (j + 1) / 2, (j + 1) * (j + 2) / 2);
                let (s0, s1) = dot_pair(&row[..j], &head[rj..rj + j], &head[rj1..rj1 + j]);
                row[j] = (row[j] - s0) / head[rj + j];
                let s1 = s1 + row[j] * head[rj1 + j];
                row[j + 1] = (row[j + 1] - s1) / head[rj1 + j + 1];
                j += 2;
            }
            if j < i {
                let rj = j * (j + 1) / 2;
                let s = dot_lanes(&row[..j], &head[rj..rj + j]);
                row[j] = (row[j] - s) / head[rj + j];
            }
            let d = row[i] + shift(i) - dot_lanes(&row[..i], &row[..i]);
            if !(d > 0.0 && d.is_finite()) {
                return false;
            }
            row[i] = d.sqrt();
        }
        true
    }

    fn cholesky_substitute(&self, n: usize, b: &mut [f64]) {
        let l = &self.packed;
        for i in 0..n {
            let row = i * (i + 1) / 2;
            b[i] = (b[i] - dot_lanes(&l[row..row + i], &b[..i])) / l[row + i];
        }
        for i in (0..n).rev() {
            let row = i * (i + 1) / 2;
            b[i] /= l[row + i];
            let bi = b[i];
            for (x, &v) in b[..i].iter_mut().zip(&l[row..row + i]) {
                *x -= v * bi;
            }
        }
    }

    fn load(&mut self, n: usize, packed: &[f64], shift: impl Fn(usize) -> f64) {
        self.work.clear();
        self.work.resize(n * n, 0.0);
        let mut offset = 0;
        for r in 0..n {
            for c in 0..=r {
                self.work[c * n + r] = packed[offset + c];
            }
            self.work[r * n + r] += shift(r);
            offset += r + 1;
        }
    }

    fn factor(&mut self, n: usize) -> Result<()> {
        // Bunch-Kaufman partial pivoting constant (1 + sqrt(17)) / 8.
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let a = &mut self.work;
        self.pivots.clear();
        self.pivots.resize(n, Pivot::Single(0));
        let at = |i: usize, j: usize| j * n + i;

        let mut k = 0;
        while k < n {
            let mut kstep = 1;
            let absakk = a[at(k, k)].abs();
            let (imax, colmax) = if k + 1 < n {
                let col = &a[at(k + 1, k)..at(n - 1, k) + 1];
                let (off, max) =
                    col.iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                            if v.abs() > bv {
                                (i, v.abs())
                            } else {
                                (bi, bv)
                            }
                        });
                (k + 1 + off, max)
            } else {
                (k, 0.0)
            };

            if absakk.max(colmax) == 0.0 || !absakk.is_finite() || !colmax.is_finite() {
                return Err(Error::SingularSystem { pivot: k });
            }

            let kp = if absakk >= alpha * colmax {
                k
            } else {
                let mut rowmax = 0.0f64;
                for j in k..imax {
                    rowmax = rowmax.max(a[at(imax, j)].abs());
                }
                for j in imax + 1..n {
                    rowmax = rowmax.max(a[at(j, imax)].abs());
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    k
                } else if a[at(imax, imax)].abs() >= alpha * rowmax {
                    imax
                } else {
                    kstep = 2;
                    imax
                }
            };

            let kk = k + kstep - 1;
            if kp != kk {
                for i in kp + 1..n {
                    a.swap(at(i, kk), at(i, kp));
                }
                for j in kk + 1..kp {
                    a.swap(at(j, kk), at(kp, j));
                }
                a.swap(at(kk, kk), at(kp, kp));
                if kstep == 2 {
                    a.swap(at(k + 1, k), at(kp, k));
                }
            }

            if kstep == 1 {
                let d = a[at(k, k)];
                if d == 0.0 {
                    return Err(Error::SingularSystem { pivot: k });
                }
                let r = 1.0 / d;
                for j in k + 1..n {
                    let factor = r * a[at(j, k)];
                    if factor != 0.0 {
                        let (head, tail) = a.split_at_mut(j * n);
                        let col_k = &head[k * n + j..k * n + n];
                        let col_j = &mut tail[j..n];
                        for (x, &y) in col_j.iter_mut().zip(col_k) {
                            *x -= factor * y;
                        }
                    }
                }
                for i in k + 1..n {
                    a[at(i, k)] *= r;
                }
                self.pivots[k] = Pivot::Single(kp);
            } else {
                if k + 2 < n {
                    let d21 = a[at(k + 1, k)];
                    let d11 = a[at(k + 1, k + 1)] / d21;
                    let d22 = a[at(k, k)] / d21;
                    let det = d11 * d22 - 1.0;
                    if det == 0.0 || !det.is_finite() {
                        return Err(Error::SingularSystem { pivot: k });
                    }
                    let t = 1.0 / det;
                    let d21 = t / d21;
                    for j in k + 2..n {
                        let wk = d21 * (d11 * a[at(j, k)] - a[at(j, k + 1)]);
                        let wkp1 = d21 * (d22 * a[at(j, k + 1)] - a[at(j, k)]);
                        for i in j..n {
                            let v = a[at(i, k)] * wk + a[at(i, k + 1)] * wkp1;
                            a[at(i, j)] -= v;
                        }
                        a[at(j, k)] = wk;
                        a[at(j, k + 1)] = wkp1;
                    }
                } else {
                    let d21 = a[at(k + 1, k)];
                    let det = a[at(k, k)] * a[at(k + 1, k + 1)] - d21 * d21;
                    if det == 0.0 || !det.is_finite() {
                        return Err(Error::SingularSystem { pivot: k });
                    }
                }
                self.pivots[k] = Pivot::Double(kp);
                self.pivots[k + 1] = Pivot::Double(kp);
            }
            k += kstep;
        }
        Ok(())
    }

    fn substitute(&self, n: usize, b: &mut [f64]) {
        let a = &self.work;
        let at = |i: usize, j: usize| j * n + i;

        // Forward: solve L D y = P b.
        let mut k = 0;
        while k < n {
            match self.pivots[k] {
                Pivot::Single(kp) => {
                    if kp != k {
                        b.swap(k, kp);
                    }
                    let bk = b[k];
                    for i in k + 1..n {
                        b[i] -= a[at(i, k)] * bk;
                    }
                    b[k] /= a[at(k, k)];
                    k += 1;
                }
                Pivot::Double(kp) => {
                    if kp != k + 1 {
                        b.swap(k + 1, kp);
                    }
                    let (bk, bk1) = (b[k], b[k + 1]);
                    for i in k + 2..n {
                        b[i] -= a[at(i, k)] * bk + a[at(i, k + 1)] * bk1;
                    }
                    let akm1k = a[at(k + 1, k)];
                    let akm1 = a[at(k, k)] / akm1k;
                    let ak = a[at(k + 1, k + 1)] / akm1k;
                    let denom = akm1 * ak - 1.0;
                    let bkm1 = b[k] / akm1k;
                    let bkk = b[k + 1] / akm1k;
                    b[k] = (ak * bkm1 - bkk) / denom;
                    b[k + 1] = (akm1 * bkk - bkm1) / denom;
                    k += 2;
                }
            }
        }

        // Backward: solve L^T P^T x = y.
        let mut k = n;
        while k > 0 {
            let j = k - 1;
            match self.pivots[j] {
                Pivot::Single(kp) => {
                    let mut acc = 0.0;
                    for i in j + 1..n {
                        acc += a[at(i, j)] * b[i];
                    }
                    b[j] -= acc;
                    if kp != j {
                        b.swap(j, kp);
                    }
                    k -= 1;
                }
                Pivot::Double(kp) => {
                    // j is the second row of the block (j - 1, j)
                    let mut acc = 0.0;
                    let mut acc1 = 0.0;
                    for i in j + 1..n {
                        acc += a[at(i, j)] * b[i];
                        acc1 += a[at(i, j - 1)] * b[i];
                    }
                    b[j] -= acc;
                    b[j - 1] -= acc1;
                    if kp != j {
                        b.swap(j, kp);
                    }
                    k -= 2;
                }
            }
        }
    }
}

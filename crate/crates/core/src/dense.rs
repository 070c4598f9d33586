//! Dense complex matrices, the two charged kernels (product and inverse)
//! and the operation ledger.

use std::iter::Sum;
use std::ops::{AddAssign, Index, IndexMut};

use matrixmultiply::dgemm;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative pivot threshold below which a block is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

const BLOCK: usize = 64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// How an operand enters a product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// As stored.
    N,
    /// Transposed.
    T,
    /// Conjugate-transposed.
    C,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::default(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(CMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        t
    }

    pub fn apply(&self, op: Op) -> Self {
        match op {
            Op::N => self.clone(),
            Op::T => self.transpose(),
            Op::C => self.adjoint(),
        }
    }

    pub fn scale(&mut self, s: C64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn add_assign_matrix(&mut self, other: &CMatrix) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub_assign_matrix(&mut self, other: &CMatrix) -> Result<()> {
        self.check_same_shape(other, "sub")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(())
    }

    pub fn sum(&self, other: &CMatrix) -> Result<CMatrix> {
        let mut m = self.clone();
        m.add_assign_matrix(other)?;
        Ok(m)
    }

    pub fn difference(&self, other: &CMatrix) -> Result<CMatrix> {
        let mut m = self.clone();
        m.sub_assign_matrix(other)?;
        Ok(m)
    }

    pub fn neg(&self) -> CMatrix {
        self.scaled(C64::new(-1.0, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Copy the sub-block with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// ||A - A^T||_F / ||A||_F (zero for the zero matrix).
    pub fn symmetry_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut num = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                num += (self[(i, j)] - self[(j, i)]).norm_sqr();
            }
        }
        ratio(num.sqrt(), self.frobenius_norm())
    }

    /// ||A + A^H||_F / ||A||_F (zero for the zero matrix).
    pub fn skew_hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut num = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                num += (self[(i, j)] + self[(j, i)].conj()).norm_sqr();
            }
        }
        ratio(num.sqrt(), self.frobenius_norm())
    }

    fn check_same_shape(&self, other: &CMatrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// ||a - b||_F / ||b||_F, with the zero reference treated as an absolute norm.
pub fn relative_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    let num: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den = b.frobenius_norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Running count of charged dense work.
///
/// A product of an i x j by a j x k block adds `i*j*k` to `multiply_ops`;
/// inverting an n x n block adds `n^3` to `inverse_ops`. Ledgers from
/// independent energy points are combined with `+=` or `sum()`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FlopLedger {
    pub multiply_ops: u64,
    pub inverse_ops: u64,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.multiply_ops + self.inverse_ops
    }

    pub fn charge_multiply(&mut self, i: usize, j: usize, k: usize) {
        self.multiply_ops += (i as u64) * (j as u64) * (k as u64);
    }

    pub fn charge_inverse(&mut self, n: usize) {
        self.inverse_ops += (n as u64).pow(3);
    }
}

impl AddAssign for FlopLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.multiply_ops += rhs.multiply_ops;
        self.inverse_ops += rhs.inverse_ops;
    }
}

impl std::ops::Add for FlopLedger {
    type Output = FlopLedger;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Sum for FlopLedger {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(FlopLedger::default(), |a, b| a + b)
    }
}

fn op_shape(m: &CMatrix, op: Op) -> (usize, usize) {
    match op {
        Op::N => (m.rows, m.cols),
        Op::T | Op::C => (m.cols, m.rows),
    }
}

/// Raw strided complex gemm: c = alpha * op(a) * op(b) + beta * c, where op
/// conjugates when its flag is set and the strides carry any transpose.
///
/// Runs as four real gemms over the interleaved real and imaginary parts,
/// which the real kernel reads as strided views without copying.
///
/// # Safety
/// Pointers must address valid strided views of the given shapes, and `c`
/// must not overlap `a` or `b`.
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: C64,
    (a, rsa, csa, conj_a): (*const C64, isize, isize, bool),
    (b, rsb, csb, conj_b): (*const C64, isize, isize, bool),
    beta: C64,
    c: *mut C64,
    rsc: isize,
    csc: isize,
) {
    let zero = C64::default();
    if m == 0 || n == 0 {
        return;
    }
    let scale_c = |s: C64| {
        for i in 0..m {
            for j in 0..n {
                let p = c.offset(i as isize * rsc + j as isize * csc);
                *p = if s == zero { zero } else { *p * s };
            }
        }
    };
    if k == 0 || alpha == zero {
        scale_c(beta);
        return;
    }
    if alpha.im != 0.0 {
        let mut p = vec![zero; m * n];
        gemm_raw(
            m,
            k,
            n,
            C64::new(1.0, 0.0),
            (a, rsa, csa, conj_a),
            (b, rsb, csb, conj_b),
            zero,
            p.as_mut_ptr(),
            n as isize,
            1,
        );
        scale_c(beta);
        for i in 0..m {
            for j in 0..n {
                *c.offset(i as isize * rsc + j as isize * csc) += alpha * p[i * n + j];
            }
        }
        return;
    }
    // A zero beta lets the real kernel skip reading c.
    let beta_re = if beta.im != 0.0 {
        scale_c(beta);
        1.0
    } else {
        beta.re
    };
    let s = alpha.re;
    let sa = if conj_a { -1.0 } else { 1.0 };
    let sb = if conj_b { -1.0 } else { 1.0 };
    // Complex64 is repr(C) { re, im }, so each part is a view with doubled strides.
    let (ar, ai) = (a as *const f64, (a as *const f64).add(1));
    let (br, bi) = (b as *const f64, (b as *const f64).add(1));
    let (cr, ci) = (c as *mut f64, (c as *mut f64).add(1));
    let (rsa, csa, rsb, csb, rsc, csc) = (2 * rsa, 2 * csa, 2 * rsb, 2 * csb, 2 * rsc, 2 * csc);
    dgemm(m, k, n, s, ar, rsa, csa, br, rsb, csb, beta_re, cr, rsc, csc);
    dgemm(m, k, n, -s * sa * sb, ai, rsa, csa, bi, rsb, csb, 1.0, cr, rsc, csc);
    dgemm(m, k, n, s * sb, ar, rsa, csa, bi, rsb, csb, beta_re, ci, rsc, csc);
    dgemm(m, k, n, s * sa, ai, rsa, csa, br, rsb, csb, 1.0, ci, rsc, csc);
}

/// c = alpha * op(a) * op(b) + beta * c, charging the product to the ledger.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    alpha: C64,
    a: &CMatrix,
    op_a: Op,
    b: &CMatrix,
    op_b: Op,
    beta: C64,
    c: &mut CMatrix,
    ledger: &mut FlopLedger,
) -> Result<()> {
    let (m, ka) = op_shape(a, op_a);
    let (kb, n) = op_shape(b, op_b);
    if ka != kb {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: (m, ka),
            right: (kb, n),
        });
    }
    if c.shape() != (m, n) {
        return Err(Error::DimensionMismatch {
            op: "matmul output",
            left: (m, n),
            right: c.shape(),
        });
    }
    ledger.charge_multiply(m, ka, n);
    let strides = |mat: &CMatrix, op: Op| -> (isize, isize) {
        match op {
            Op::N => (mat.cols as isize, 1),
            Op::T | Op::C => (1, mat.cols as isize),
        }
    };
    let (rsa, csa) = strides(a, op_a);
    let (rsb, csb) = strides(b, op_b);
    let ncols = c.cols as isize;
    // SAFETY: the views match the checked shapes and `c` is a distinct
    // mutable borrow, so it cannot alias `a` or `b`.
    unsafe {
        gemm_raw(
            m,
            ka,
            n,
            alpha,
            (a.data.as_ptr(), rsa, csa, op_a == Op::C),
            (b.data.as_ptr(), rsb, csb, op_b == Op::C),
            beta,
            c.data.as_mut_ptr(),
            ncols,
            1,
        );
    }
    Ok(())
}

/// op(a) * op(b) as a new matrix.
pub fn product(a: &CMatrix, op_a: Op, b: &CMatrix, op_b: Op, ledger: &mut FlopLedger) -> Result<CMatrix> {
    let (m, _) = op_shape(a, op_a);
    let (_, n) = op_shape(b, op_b);
    let mut c = CMatrix::zeros(m, n);
    gemm(C64::new(1.0, 0.0), a, op_a, b, op_b, C64::default(), &mut c, ledger)?;
    Ok(c)
}

/// a * b as a new matrix.
pub fn matmul(a: &CMatrix, b: &CMatrix, ledger: &mut FlopLedger) -> Result<CMatrix> {
    product(a, Op::N, b, Op::N, ledger)
}

/// c += op(a) * op(b).
pub fn mul_acc(c: &mut CMatrix, a: &CMatrix, op_a: Op, b: &CMatrix, op_b: Op, ledger: &mut FlopLedger) -> Result<()> {
    let one = C64::new(1.0, 0.0);
    gemm(one, a, op_a, b, op_b, one, c, ledger)
}

/// Conjugate transpose. Free of charge.
pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Inverse by LU with partial pivoting, charged n^3.
///
/// Fails with `SingularBlock` when a pivot falls below
/// `PIVOT_THRESHOLD * max|a_ij|` or is not finite.
pub fn inverse(a: &CMatrix, ledger: &mut FlopLedger) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "inverse",
            left: a.shape(),
            right: (a.cols, a.rows),
        });
    }
    let n = a.rows;
    ledger.charge_inverse(n);
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let (lu, perm) = lu_factor(a)?;
    Ok(lu_inverse(&lu, &perm, n))
}

/// In-place blocked LU with row pivoting; returns the packed factors and
/// the row permutation (row i of PA is row perm[i] of A).
fn lu_factor(a: &CMatrix) -> Result<(Vec<C64>, Vec<usize>)> {
    let n = a.rows;
    let scale = a.max_abs();
    if !scale.is_finite() {
        return Err(Error::SingularBlock {
            pivot: 0,
            location: crate::error::Location::Unspecified,
        });
    }
    let threshold = PIVOT_THRESHOLD * scale;
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + BLOCK).min(n);
        // Panel factorisation on columns k0..k1.
        for k in k0..k1 {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best.is_finite() && best >= threshold) || best == 0.0 {
                return Err(Error::SingularBlock {
                    pivot: k,
                    location: crate::error::Location::Unspecified,
                });
            }
            if p != k {
                swap_rows(&mut lu, n, k, p);
                perm.swap(k, p);
            }
            let inv_piv = C64::new(1.0, 0.0) / lu[k * n + k];
            let (top, bottom) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + k1];
            for i in k + 1..n {
                let row = &mut bottom[(i - k - 1) * n..(i - k) * n];
                let l = row[k] * inv_piv;
                row[k] = l;
                if l != C64::default() {
                    for (x, y) in row[k + 1..k1].iter_mut().zip(pivot_row) {
                        *x -= l * y;
                    }
                }
            }
        }
        if k1 < n {
            // U12 = L11^{-1} A12.
            for r in k0..k1 {
                for q in k0..r {
                    let l = lu[r * n + q];
                    if l == C64::default() {
                        continue;
                    }
                    let (head, tail) = lu.split_at_mut(r * n);
                    let src = &head[q * n + k1..q * n + n];
                    for (x, y) in tail[k1..n].iter_mut().zip(src) {
                        *x -= l * y;
                    }
                }
            }
            // A22 -= L21 * U12.
            let m = n - k1;
            let kk = k1 - k0;
            let base = lu.as_mut_ptr();
            // SAFETY: L21 (rows k1.., cols k0..k1), U12 (rows k0..k1, cols k1..)
            // and A22 (rows k1.., cols k1..) are disjoint regions of `lu`.
            unsafe {
                gemm_raw(
                    m,
                    kk,
                    m,
                    C64::new(-1.0, 0.0),
                    (base.add(k1 * n + k0), n as isize, 1, false),
                    (base.add(k0 * n + k1), n as isize, 1, false),
                    C64::new(1.0, 0.0),
                    base.add(k1 * n + k1),
                    n as isize,
                    1,
                );
            }
        }
        k0 = k1;
    }
    Ok((lu, perm))
}

fn swap_rows(data: &mut [C64], n: usize, a: usize, b: usize) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (head, tail) = data.split_at_mut(hi * n);
    head[lo * n..(lo + 1) * n].swap_with_slice(&mut tail[..n]);
}

/// Solve L U X = P with blocked right-looking substitution.
///
/// The forward pass starts from the identity, so L^{-1} stays lower
/// triangular and its updates skip the zero columns. The permutation is
/// applied to the columns at the end.
fn lu_inverse(lu: &[C64], perm: &[usize], n: usize) -> CMatrix {
    let one = C64::new(1.0, 0.0);
    let minus_one = C64::new(-1.0, 0.0);
    let mut x = vec![C64::default(); n * n];
    for i in 0..n {
        x[i * n + i] = one;
    }

    // Forward substitution with unit lower L.
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + BLOCK).min(n);
        for r in r0..r1 {
            for q in r0..r {
                let l = lu[r * n + q];
                if l == C64::default() {
                    continue;
                }
                let (head, tail) = x.split_at_mut(r * n);
                for (a, b) in tail[..=q].iter_mut().zip(&head[q * n..=q * n + q]) {
                    *a -= l * b;
                }
            }
        }
        if r1 < n {
            let (done, rest) = x.split_at_mut(r1 * n);
            // SAFETY: `done` and `rest` are disjoint; shapes match the views.
            unsafe {
                gemm_raw(
                    n - r1,
                    r1 - r0,
                    r1,
                    minus_one,
                    (lu.as_ptr().add(r1 * n + r0), n as isize, 1, false),
                    (done.as_ptr().add(r0 * n), n as isize, 1, false),
                    one,
                    rest.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        r0 = r1;
    }

    // Back substitution with upper U.
    let mut r1 = n;
    while r1 > 0 {
        let r0 = r1.saturating_sub(BLOCK);
        for r in (r0..r1).rev() {
            for q in r + 1..r1 {
                let u = lu[r * n + q];
                if u == C64::default() {
                    continue;
                }
                let (head, tail) = x.split_at_mut(q * n);
                for (a, b) in head[r * n..(r + 1) * n].iter_mut().zip(&tail[..n]) {
                    *a -= u * b;
                }
            }
            let inv = one / lu[r * n + r];
            for a in &mut x[r * n..(r + 1) * n] {
                *a *= inv;
            }
        }
        if r0 > 0 {
            let (head, done) = x.split_at_mut(r0 * n);
            // SAFETY: rows ..r0 of `head` and rows r0..r1 in `done` are disjoint.
            unsafe {
                gemm_raw(
                    r0,
                    r1 - r0,
                    n,
                    minus_one,
                    (lu.as_ptr().add(r0), n as isize, 1, false),
                    (done.as_ptr(), n as isize, 1, false),
                    one,
                    head.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        r1 = r0;
    }

    // Right-multiplying by P moves column i to column perm[i].
    let mut out = vec![C64::default(); n * n];
    for r in 0..n {
        let (src, dst) = (&x[r * n..(r + 1) * n], &mut out[r * n..(r + 1) * n]);
        for (i, &p) in perm.iter().enumerate() {
            dst[p] = src[i];
        }
    }
    CMatrix { rows: n, cols: n, data: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &CMatrix, b: &CMatrix) -> CMatrix {
        CMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
    }

    fn sample(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(rows, cols, |_, _| c64(next(), next()))
    }

    #[test]
    fn product_counts_ijk() {
        let a = sample(2, 3, 1);
        let b = sample(3, 4, 2);
        let mut ledger = FlopLedger::new();
        let c = matmul(&a, &b, &mut ledger).unwrap();
        assert_eq!(c.shape(), (2, 4));
        assert_eq!(ledger.multiply_ops, 24);
        assert_eq!(ledger.inverse_ops, 0);
        assert!(relative_difference(&c, &naive(&a, &b)) < 1e-14);
    }

    #[test]
    fn transposed_operands() {
        let a = sample(3, 2, 3);
        let b = sample(3, 4, 4);
        let mut ledger = FlopLedger::new();
        let t = product(&a, Op::T, &b, Op::N, &mut ledger).unwrap();
        assert!(relative_difference(&t, &naive(&a.transpose(), &b)) < 1e-14);
        let h = product(&a, Op::C, &b, Op::N, &mut ledger).unwrap();
        assert!(relative_difference(&h, &naive(&a.adjoint(), &b)) < 1e-14);
        let bt = product(&b, Op::N, &b, Op::C, &mut ledger).unwrap();
        assert!(relative_difference(&bt, &naive(&b, &b.adjoint())) < 1e-14);
        assert_eq!(ledger.multiply_ops, 2 * 3 * 4 * 2 + 3 * 4 * 3);
    }

    #[test]
    fn gemm_with_complex_scalars() {
        let a = sample(4, 3, 7);
        let b = sample(5, 4, 8);
        let c0 = sample(3, 5, 9);
        let expect_ab = naive(&a.adjoint(), &b.adjoint());
        for (alpha, beta) in [(c64(1.0, 0.0), c64(0.0, 0.0)), (c64(-0.5, 0.0), c64(2.0, 0.0)), (c64(0.3, -1.2), c64(0.0, 0.7))] {
            let mut c = c0.clone();
            gemm(alpha, &a, Op::C, &b, Op::C, beta, &mut c, &mut FlopLedger::new()).unwrap();
            let expect = CMatrix::from_fn(3, 5, |i, j| alpha * expect_ab[(i, j)] + beta * c0[(i, j)]);
            assert!(relative_difference(&c, &expect) < 1e-14, "alpha {alpha}, beta {beta}");
        }
    }

    #[test]
    fn inverse_of_two_by_two() {
        let a = CMatrix::from_rows(&[vec![c64(2.0, 0.0), c64(1.0, 0.0)], vec![c64(1.0, 0.0), c64(3.0, 0.0)]]).unwrap();
        let mut ledger = FlopLedger::new();
        let inv = inverse(&a, &mut ledger).unwrap();
        let expect = CMatrix::from_rows(&[vec![c64(0.6, 0.0), c64(-0.2, 0.0)], vec![c64(-0.2, 0.0), c64(0.4, 0.0)]]).unwrap();
        assert!(relative_difference(&inv, &expect) < 1e-15);
        assert_eq!(ledger.inverse_ops, 8);
    }

    #[test]
    fn singular_block_is_reported() {
        let a = CMatrix::from_rows(&[vec![c64(1.0, 0.0), c64(2.0, 0.0)], vec![c64(2.0, 0.0), c64(4.0, 0.0)]]).unwrap();
        let err = inverse(&a, &mut FlopLedger::new()).unwrap_err();
        assert!(matches!(err, Error::SingularBlock { pivot: 1, .. }));
        let z = CMatrix::zeros(3, 3);
        assert!(matches!(inverse(&z, &mut FlopLedger::new()), Err(Error::SingularBlock { pivot: 0, .. })));
    }

    #[test]
    fn mismatched_product_is_rejected() {
        let a = sample(2, 3, 5);
        let b = sample(2, 3, 6);
        assert!(matches!(matmul(&a, &b, &mut FlopLedger::new()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_operands() {
        let mut ledger = FlopLedger::new();
        let a = CMatrix::zeros(3, 0);
        let b = CMatrix::zeros(0, 2);
        let c = matmul(&a, &b, &mut ledger).unwrap();
        assert_eq!(c, CMatrix::zeros(3, 2));
        assert_eq!(inverse(&CMatrix::zeros(0, 0), &mut ledger).unwrap().shape(), (0, 0));
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn blocked_inverse_matches_identity() {
        for &n in &[1usize, 7, 64, 65, 150] {
            let mut a = sample(n, n, n as u64);
            for i in 0..n {
                a[(i, i)] += c64(0.5, 0.25);
            }
            let inv = inverse(&a, &mut FlopLedger::new()).unwrap();
            let eye = naive(&a, &inv);
            assert!(relative_difference(&eye, &CMatrix::identity(n)) < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = CMatrix::from_rows(&[vec![c64(0.0, 0.0), c64(1.0, 0.0)], vec![c64(1.0, 0.0), c64(0.0, 0.0)]]).unwrap();
        let inv = inverse(&a, &mut FlopLedger::new()).unwrap();
        assert!(relative_difference(&inv, &a) < 1e-15);
    }

    #[test]
    fn ledgers_combine() {
        let a = FlopLedger { multiply_ops: 3, inverse_ops: 8 };
        let b = FlopLedger { multiply_ops: 5, inverse_ops: 1 };
        let s: FlopLedger = [a, b].into_iter().sum();
        assert_eq!(s, FlopLedger { multiply_ops: 8, inverse_ops: 9 });
        assert_eq!(s.total(), 17);
    }

    #[test]
    fn deviations() {
        let s = CMatrix::from_rows(&[vec![c64(1.0, 1.0), c64(2.0, -1.0)], vec![c64(2.0, -1.0), c64(0.0, 3.0)]]).unwrap();
        assert_eq!(s.symmetry_deviation(), 0.0);
        let k = CMatrix::from_rows(&[vec![c64(0.0, 1.0), c64(2.0, 1.0)], vec![c64(-2.0, 1.0), c64(0.0, -3.0)]]).unwrap();
        assert_eq!(k.skew_hermitian_deviation(), 0.0);
        assert!(s.skew_hermitian_deviation() > 0.1);
    }
}

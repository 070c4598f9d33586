//! Independent reference arithmetic for the integration tests. Nothing
//! here calls into the solver kernels.
#![allow(dead_code)]

pub mod fixtures;

use ndgreen::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.cols(), b.rows());
    CMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

pub fn mul3(a: &CMatrix, b: &CMatrix, d: &CMatrix) -> CMatrix {
    mul(&mul(a, b), d)
}

pub fn add(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn neg(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| -a[(i, j)])
}

pub fn t(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)])
}

pub fn h(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)].conj())
}

pub fn bar(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)].conj())
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inv(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let mut m = CMatrix::from_fn(n, 2 * n, |i, j| if j < n { a[(i, j)] } else if j - n == i { c(1.0, 0.0) } else { c(0.0, 0.0) });
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| m[(x, col)].norm().total_cmp(&m[(y, col)].norm())).unwrap();
        for j in 0..2 * n {
            let tmp = m[(col, j)];
            m[(col, j)] = m[(p, j)];
            m[(p, j)] = tmp;
        }
        let piv = m[(col, col)];
        assert!(piv.norm() > 0.0, "singular reference inverse");
        for j in 0..2 * n {
            m[(col, j)] /= piv;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                for j in 0..2 * n {
                    let v = m[(col, j)];
                    m[(i, j)] -= f * v;
                }
            }
        }
    }
    CMatrix::from_fn(n, n, |i, j| m[(i, j + n)])
}

pub fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    ndgreen::dense::relative_difference(a, b)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

/// Complex-symmetric block with a dominant diagonal.
pub fn random_symmetric(r: &mut ChaCha8Rng, n: usize, shift: f64) -> CMatrix {
    let b = random(r, n, n);
    let mut s = CMatrix::from_fn(n, n, |i, j| (b[(i, j)] + b[(j, i)]) * 0.5);
    for i in 0..n {
        s[(i, i)] += c(shift, 0.3);
    }
    s
}

/// Skew-Hermitian block, i times a Hermitian matrix.
pub fn random_skew_hermitian(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let b = random(r, n, n);
    CMatrix::from_fn(n, n, |i, j| (b[(i, j)] + b[(j, i)].conj()) * c(0.0, 0.5))
}

/// Random block-tridiagonal complex-symmetric system with the given layer
/// sizes, plus a skew-Hermitian lesser block on each layer in `lesser_on`.
pub fn random_layered(r: &mut ChaCha8Rng, sizes: &[usize], lesser_on: &[usize]) -> (CMatrix, CMatrix, Vec<Vec<usize>>) {
    let n: usize = sizes.iter().sum();
    let mut layers = Vec::new();
    let mut next = 0;
    for &s in sizes {
        layers.push((next..next + s).collect::<Vec<usize>>());
        next += s;
    }
    let mut a = CMatrix::zeros(n, n);
    let mut sigma = CMatrix::zeros(n, n);
    for (l, dofs) in layers.iter().enumerate() {
        let d = random_symmetric(r, dofs.len(), 4.0);
        place(&mut a, dofs, dofs, &d);
        if l + 1 < layers.len() {
            let u = random(r, dofs.len(), layers[l + 1].len());
            place(&mut a, dofs, &layers[l + 1], &u);
            place(&mut a, &layers[l + 1], dofs, &t(&u));
        }
        if lesser_on.contains(&l) {
            let s = random_skew_hermitian(r, dofs.len());
            place(&mut sigma, dofs, dofs, &s);
        }
    }
    (a, sigma, layers)
}

pub fn place(m: &mut CMatrix, rows: &[usize], cols: &[usize], b: &CMatrix) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[(r, c)] = b[(i, j)];
        }
    }
}

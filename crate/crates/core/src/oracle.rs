//! Dense reference solutions.

use crate::dense::{inverse, product, CMatrix, FlopLedger, Op};
use crate::error::Result;
use crate::sparse::{GreensDiagonal, SparseCoo};

/// G^r = A^{-1} by dense inversion.
pub fn dense_gr(a: &CMatrix) -> Result<CMatrix> {
    inverse(a, &mut FlopLedger::new())
}

/// G^< = G^r Sigma^< (G^r)^H.
pub fn dense_gless(gr: &CMatrix, sigma_lesser: &CMatrix) -> Result<CMatrix> {
    let mut scratch = FlopLedger::new();
    let left = product(gr, Op::N, sigma_lesser, Op::N, &mut scratch)?;
    product(&left, Op::N, gr, Op::C, &mut scratch)
}

/// Dense solve reported over the given dof groups.
pub fn solve_dense(a: &SparseCoo, sigma_lesser: Option<&SparseCoo>, groups: &[Vec<usize>], energy: f64) -> Result<GreensDiagonal> {
    let gr = dense_gr(&a.to_dense())?;
    let gl = sigma_lesser.map(|s| dense_gless(&gr, &s.to_dense())).transpose()?;
    Ok(GreensDiagonal {
        energy,
        groups: groups.to_vec(),
        retarded: groups.iter().map(|g| gr.select(g, g)).collect(),
        lesser: gl.map(|gl| groups.iter().map(|g| gl.select(g, g)).collect()),
    })
}

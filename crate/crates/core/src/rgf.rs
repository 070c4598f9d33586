//! Recursive Green's function solver for block-tridiagonal systems.
//!
//! The forward pass folds the layers to the left of each layer into the
//! left-connected blocks `g_i`; the backward pass extracts the diagonal and
//! nearest off-diagonal blocks. The lesser passes follow the same order.

use crate::dense::{gemm, inverse, product, CMatrix, FlopLedger, Op, C64};
use crate::error::{Error, Location, Result};
use crate::hsc::SolveLedger;
use crate::sparse::{GreensDiagonal, SparseCoo};

/// Block-tridiagonal system over an ordered list of layers.
#[derive(Clone, Debug)]
pub struct LayeredSystem {
    layers: Vec<Vec<usize>>,
    diagonal: Vec<CMatrix>,
    /// `A_{i,i+1}`.
    upper: Vec<CMatrix>,
    /// `A_{i+1,i}`.
    lower: Vec<CMatrix>,
    /// Per-layer lesser self-energy; `None` is an exact zero.
    sigma: Vec<Option<CMatrix>>,
}

impl LayeredSystem {
    /// Split a sparse complex-symmetric A (and optional Sigma^<) by layers.
    pub fn from_sparse(a: &SparseCoo, sigma_lesser: Option<&SparseCoo>, layers: &[Vec<usize>]) -> Result<Self> {
        let n = a.dim();
        if layers.is_empty() {
            return Err(Error::Contract("at least one layer is required".into()));
        }
        let mut owner = vec![usize::MAX; n];
        let mut local = vec![0usize; n];
        for (l, dofs) in layers.iter().enumerate() {
            for (k, &d) in dofs.iter().enumerate() {
                if d >= n {
                    return Err(Error::Contract(format!("layer {l} names dof {d} outside 0..{n}")));
                }
                if owner[d] != usize::MAX {
                    return Err(Error::Contract(format!("dof {d} appears in layers {} and {l}", owner[d])));
                }
                owner[d] = l;
                local[d] = k;
            }
        }
        if let Some(d) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Contract(format!("dof {d} belongs to no layer")));
        }
        if !a.is_complex_symmetric() {
            return Err(Error::Contract("the layered system must be complex symmetric".into()));
        }
        let sizes: Vec<usize> = layers.iter().map(Vec::len).collect();
        let ny = layers.len();
        let mut diagonal: Vec<CMatrix> = sizes.iter().map(|&s| CMatrix::zeros(s, s)).collect();
        let mut upper: Vec<CMatrix> = (0..ny - 1).map(|i| CMatrix::zeros(sizes[i], sizes[i + 1])).collect();
        let mut lower: Vec<CMatrix> = (0..ny - 1).map(|i| CMatrix::zeros(sizes[i + 1], sizes[i])).collect();
        for &(r, c, v) in a.entries() {
            let (lr, lc) = (owner[r], owner[c]);
            let target = if lr == lc {
                &mut diagonal[lr]
            } else if lc == lr + 1 {
                &mut upper[lr]
            } else if lr == lc + 1 {
                &mut lower[lc]
            } else {
                return Err(Error::Contract(format!(
                    "entry ({r}, {c}) couples non-adjacent layers {lr} and {lc}"
                )));
            };
            target[(local[r], local[c])] = v;
        }
        let mut sigma: Vec<Option<CMatrix>> = vec![None; ny];
        if let Some(s) = sigma_lesser {
            if s.dim() != n {
                return Err(Error::DimensionMismatch {
                    op: "lesser self-energy",
                    left: (n, n),
                    right: (s.dim(), s.dim()),
                });
            }
            for &(r, c, v) in s.entries() {
                let l = owner[r];
                if owner[c] != l {
                    return Err(Error::Contract(format!(
                        "lesser self-energy entry ({r}, {c}) couples layers {l} and {}",
                        owner[c]
                    )));
                }
                let block = sigma[l].get_or_insert_with(|| CMatrix::zeros(sizes[l], sizes[l]));
                block[(local[r], local[c])] = v;
            }
            for (l, b) in sigma.iter().enumerate() {
                if let Some(b) = b {
                    let deviation = b.skew_hermitian_deviation();
                    if deviation > 1e-10 {
                        return Err(Error::NonSkewHermitianInput { block: l, deviation });
                    }
                }
            }
        }
        Ok(LayeredSystem {
            layers: layers.to_vec(),
            diagonal,
            upper,
            lower,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn diagonal_block(&self, i: usize) -> &CMatrix {
        &self.diagonal[i]
    }

    pub fn coupling(&self, i: usize) -> &CMatrix {
        &self.upper[i]
    }

    pub fn lesser_block(&self, i: usize) -> Option<&CMatrix> {
        self.sigma[i].as_ref()
    }

    pub fn has_lesser(&self) -> bool {
        self.sigma.iter().any(Option::is_some)
    }
}

/// Output of the retarded passes, with the recursion factors the lesser
/// passes reuse.
#[derive(Clone, Debug)]
pub struct RgfRetarded {
    /// `G_ii`.
    pub diagonal: Vec<CMatrix>,
    /// `G_{i,i+1}`.
    pub upper: Vec<CMatrix>,
    /// `G_{i+1,i}`.
    pub lower: Vec<CMatrix>,
    /// Left-connected blocks `g_i`.
    left: Vec<CMatrix>,
    /// `X_i = g_i A_{i,i+1}`.
    x: Vec<CMatrix>,
    /// `Y_i = g_i A_{i,i+1} G_{i+1,i+1} A_{i+1,i}`.
    y: Vec<CMatrix>,
}

impl RgfRetarded {
    pub fn left_connected(&self, i: usize) -> &CMatrix {
        &self.left[i]
    }
}

/// Diagonal and nearest off-diagonal blocks of G^r.
pub fn rgf_gr(sys: &LayeredSystem, ledger: &mut FlopLedger) -> Result<RgfRetarded> {
    let ny = sys.len();
    let one = C64::new(1.0, 0.0);
    let mut left: Vec<CMatrix> = Vec::with_capacity(ny);
    let mut x: Vec<CMatrix> = Vec::with_capacity(ny.saturating_sub(1));
    for i in 0..ny {
        let mut s = sys.diagonal[i].clone();
        if i > 0 {
            let xi = product(&left[i - 1], Op::N, &sys.upper[i - 1], Op::N, ledger)?;
            gemm(-one, &sys.lower[i - 1], Op::N, &xi, Op::N, one, &mut s, ledger)?;
            x.push(xi);
        }
        left.push(inverse(&s, ledger).map_err(|e| e.at(Location::Layer(i)))?);
    }

    let mut diagonal: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); ny];
    let mut upper: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); ny - 1];
    let mut y: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); ny - 1];
    diagonal[ny - 1] = left[ny - 1].clone();
    for i in (0..ny - 1).rev() {
        let t = product(&x[i], Op::N, &diagonal[i + 1], Op::N, ledger)?;
        let yi = product(&t, Op::N, &sys.lower[i], Op::N, ledger)?;
        let mut g = left[i].clone();
        gemm(one, &yi, Op::N, &left[i], Op::N, one, &mut g, ledger)?;
        diagonal[i] = g;
        upper[i] = t.neg();
        y[i] = yi;
    }
    let lower = upper.iter().map(CMatrix::transpose).collect();
    Ok(RgfRetarded {
        diagonal,
        upper,
        lower,
        left,
        x,
        y,
    })
}

/// Diagonal blocks of G^< = G^r Sigma^< (G^r)^H from the retarded passes.
pub fn rgf_gless(sys: &LayeredSystem, gr: &RgfRetarded, ledger: &mut FlopLedger) -> Result<Vec<CMatrix>> {
    let ny = sys.len();
    let one = C64::new(1.0, 0.0);
    // Forward: g^<_i = V_i g^<_{i-1} V_i^H + g_i Sigma_i g_i^H, V_i = g_i A_{i,i-1}.
    let mut lesser_left: Vec<Option<CMatrix>> = Vec::with_capacity(ny);
    for i in 0..ny {
        let g = &gr.left[i];
        let mut acc: Option<CMatrix> = None;
        if i > 0 {
            if let Some(prev) = &lesser_left[i - 1] {
                let v = product(g, Op::N, &sys.lower[i - 1], Op::N, ledger)?;
                let w = product(&v, Op::N, prev, Op::N, ledger)?;
                acc = Some(product(&w, Op::N, &v, Op::C, ledger)?);
            }
        }
        if let Some(s) = &sys.sigma[i] {
            let w = product(g, Op::N, s, Op::N, ledger)?;
            let target = acc.get_or_insert_with(|| CMatrix::zeros(g.rows(), g.rows()));
            gemm(one, &w, Op::N, g, Op::C, one, target, ledger)?;
        }
        lesser_left.push(acc);
    }

    // Backward: G^<_ii = g^<_i + Y_i g^<_i - (Y_i g^<_i)^H + X_i G^<_{i+1} X_i^H.
    let mut out: Vec<Option<CMatrix>> = vec![None; ny];
    out[ny - 1] = lesser_left[ny - 1].clone();
    for i in (0..ny - 1).rev() {
        let mut acc: Option<CMatrix> = None;
        if let Some(gl) = &lesser_left[i] {
            let yg = product(&gr.y[i], Op::N, gl, Op::N, ledger)?;
            let mut b = gl.sum(&yg)?;
            b.sub_assign_matrix(&yg.adjoint())?;
            acc = Some(b);
        }
        if let Some(next) = &out[i + 1] {
            let w = product(&gr.x[i], Op::N, next, Op::N, ledger)?;
            let target = acc.get_or_insert_with(|| CMatrix::zeros(w.rows(), w.rows()));
            gemm(one, &w, Op::N, &gr.x[i], Op::C, one, target, ledger)?;
        }
        out[i] = acc;
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.unwrap_or_else(|| CMatrix::zeros(sys.layers[i].len(), sys.layers[i].len())))
        .collect())
}

/// Full RGF solve at one energy, reported over the layers.
pub fn solve_rgf(
    a: &SparseCoo,
    sigma_lesser: Option<&SparseCoo>,
    layers: &[Vec<usize>],
    energy: f64,
    ledger: &mut SolveLedger,
) -> Result<GreensDiagonal> {
    let sys = LayeredSystem::from_sparse(a, sigma_lesser, layers)?;
    let gr = rgf_gr(&sys, &mut ledger.retarded)?;
    let lesser = match sigma_lesser {
        Some(_) => Some(rgf_gless(&sys, &gr, &mut ledger.lesser)?),
        None => None,
    };
    Ok(GreensDiagonal {
        energy,
        groups: layers.to_vec(),
        retarded: gr.diagonal,
        lesser,
    })
}

//! Sparse and cluster-blocked storage.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::dense::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::partition::SeparatorTree;

/// Square sparse matrix in canonical coordinate form: entries sorted by
/// (row, col), duplicates summed, exact zeros dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCoo {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseCoo {
    pub fn new(n: usize) -> Self {
        SparseCoo { n, entries: Vec::new() }
    }

    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Config(format!("entry ({r}, {c}) outside a {n} x {n} matrix")));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != C64::default());
        Ok(SparseCoo { n, entries: merged })
    }

    pub fn from_dense(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Config("sparse matrices are square".into()));
        }
        let n = a.rows();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, a[(i, j)]));
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries
            .binary_search_by_key(&(r, c), |&(i, j, _)| (i, j))
            .map(|k| self.entries[k].2)
            .unwrap_or_default()
    }

    /// Dense block on the given rows and columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        let mut ri = vec![usize::MAX; self.n];
        let mut ci = vec![usize::MAX; self.n];
        rows.iter().enumerate().for_each(|(k, &r)| ri[r] = k);
        cols.iter().enumerate().for_each(|(k, &c)| ci[c] = k);
        let mut m = CMatrix::zeros(rows.len(), cols.len());
        for &(r, c, v) in &self.entries {
            if ri[r] != usize::MAX && ci[c] != usize::MAX {
                m[(ri[r], ci[c])] = v;
            }
        }
        m
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// alpha * self + beta * other.
    pub fn combine(&self, alpha: C64, other: &SparseCoo, beta: C64) -> Result<SparseCoo> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                op: "sparse combine",
                left: (self.n, self.n),
                right: (other.n, other.n),
            });
        }
        let a = self.entries.iter().map(|&(r, c, v)| (r, c, alpha * v));
        let b = other.entries.iter().map(|&(r, c, v)| (r, c, beta * v));
        SparseCoo::from_triplets(self.n, a.chain(b))
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.entries.iter().all(|&(r, c, _)| self.get(c, r) != C64::default())
    }

    pub fn is_complex_symmetric(&self) -> bool {
        self.entries.iter().all(|&(r, c, v)| self.get(c, r) == v)
    }

    /// Text dump: one header line, then `row col re im` per entry.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "%coo {} {}", self.n, self.entries.len())?;
        for &(r, c, v) in &self.entries {
            writeln!(w, "{r} {c} {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |msg: String| Error::Config(msg);
        let header = lines
            .next()
            .ok_or_else(|| bad("empty matrix file".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("%coo") {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let n: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing dimension".into()))?;
        let mut t = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let parse_err = || bad(format!("malformed entry on line {}", k + 2));
            if f.len() != 4 {
                return Err(parse_err());
            }
            let r: usize = f[0].parse().map_err(|_| parse_err())?;
            let c: usize = f[1].parse().map_err(|_| parse_err())?;
            let re: f64 = f[2].parse().map_err(|_| parse_err())?;
            let im: f64 = f[3].parse().map_err(|_| parse_err())?;
            t.push((r, c, C64::new(re, im)));
        }
        Self::from_triplets(n, t)
    }
}

/// Dense block over an explicit set of dofs.
#[derive(Clone, Debug, PartialEq)]
pub struct DofBlock {
    pub dofs: Vec<usize>,
    pub block: CMatrix,
}

/// A self-energy made of dense dof blocks plus diagonal entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelfEnergy {
    pub blocks: Vec<DofBlock>,
    pub diagonal: Vec<(usize, C64)>,
}

impl SelfEnergy {
    pub fn to_coo(&self, n: usize) -> Result<SparseCoo> {
        let mut t = Vec::new();
        for b in &self.blocks {
            if b.block.shape() != (b.dofs.len(), b.dofs.len()) {
                return Err(Error::DimensionMismatch {
                    op: "self-energy block",
                    left: b.block.shape(),
                    right: (b.dofs.len(), b.dofs.len()),
                });
            }
            for (i, &r) in b.dofs.iter().enumerate() {
                for (j, &c) in b.dofs.iter().enumerate() {
                    t.push((r, c, b.block[(i, j)]));
                }
            }
        }
        t.extend(self.diagonal.iter().map(|&(d, v)| (d, d, v)));
        SparseCoo::from_triplets(n, t)
    }
}

/// A = E I - H - Sigma.
pub fn assemble_system(h: &SparseCoo, sigma: &SelfEnergy, energy: f64) -> Result<SparseCoo> {
    let n = h.dim();
    let s = sigma.to_coo(n)?;
    let e = (0..n).map(|i| (i, i, C64::new(energy, 0.0)));
    let minus = |m: &SparseCoo| m.entries().iter().map(|&(r, c, v)| (r, c, -v)).collect::<Vec<_>>();
    SparseCoo::from_triplets(n, e.chain(minus(h)).chain(minus(&s)))
}

/// Structural class of a cluster-blocked matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    General,
    /// A = A^T.
    ComplexSymmetric,
    /// Block diagonal with A_ii = -A_ii^H.
    SkewHermitian,
}

pub type BlockMap = HashMap<(usize, usize), CMatrix>;

/// Sparse matrix regrouped into dense blocks indexed by cluster pairs.
/// Absent blocks are exact zeros.
#[derive(Clone, Debug)]
pub struct ClusterBlockMatrix {
    tree: Arc<SeparatorTree>,
    blocks: BlockMap,
    symmetry: Symmetry,
}

/// Group a sparse matrix by the clusters of `tree`. Every coupling must
/// lie inside a cluster or between a cluster and one of its ancestors.
pub fn group_by_partition(a: &SparseCoo, tree: Arc<SeparatorTree>) -> Result<ClusterBlockMatrix> {
    if a.dim() != tree.n_dofs() {
        return Err(Error::DimensionMismatch {
            op: "group_by_partition",
            left: (a.dim(), a.dim()),
            right: (tree.n_dofs(), tree.n_dofs()),
        });
    }
    let mut blocks: BlockMap = HashMap::new();
    for &(r, c, v) in a.entries() {
        let (ci, cj) = (tree.owner(r), tree.owner(c));
        if !tree.related(ci, cj) {
            return Err(Error::PartitionViolation {
                row: r,
                col: c,
                left: ci,
                right: cj,
            });
        }
        let block = blocks
            .entry((ci, cj))
            .or_insert_with(|| CMatrix::zeros(tree.size(ci), tree.size(cj)));
        block[(tree.local_index(r), tree.local_index(c))] = v;
    }
    let symmetry = if a.is_complex_symmetric() {
        Symmetry::ComplexSymmetric
    } else if blocks.keys().all(|&(i, j)| i == j) && blocks.values().all(|b| b.skew_hermitian_deviation() <= 1e-12) {
        Symmetry::SkewHermitian
    } else {
        Symmetry::General
    };
    Ok(ClusterBlockMatrix { tree, blocks, symmetry })
}

impl ClusterBlockMatrix {
    pub fn from_blocks(tree: Arc<SeparatorTree>, blocks: BlockMap, symmetry: Symmetry) -> Result<Self> {
        for (&(i, j), b) in &blocks {
            if i >= tree.len() || j >= tree.len() || b.shape() != (tree.size(i), tree.size(j)) {
                return Err(Error::Contract(format!("block ({i}, {j}) does not fit the tree")));
            }
            if !tree.related(i, j) {
                return Err(Error::Contract(format!("block ({i}, {j}) joins unrelated clusters")));
            }
        }
        Ok(ClusterBlockMatrix { tree, blocks, symmetry })
    }

    pub fn tree(&self) -> &Arc<SeparatorTree> {
        &self.tree
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&CMatrix> {
        self.blocks.get(&(i, j))
    }

    pub fn blocks(&self) -> &BlockMap {
        &self.blocks
    }

    pub fn into_blocks(self) -> BlockMap {
        self.blocks
    }

    /// Present block keys in sorted order.
    pub fn keys(&self) -> Vec<(usize, usize)> {
        let mut k: Vec<_> = self.blocks.keys().copied().collect();
        k.sort_unstable();
        k
    }

    /// Back to coordinate form in the global dof numbering.
    pub fn scatter(&self) -> SparseCoo {
        let mut t = Vec::new();
        for (&(i, j), b) in &self.blocks {
            let (ri, cj) = (&self.tree.cluster(i).dofs, &self.tree.cluster(j).dofs);
            for (p, &r) in ri.iter().enumerate() {
                for (q, &c) in cj.iter().enumerate() {
                    t.push((r, c, b[(p, q)]));
                }
            }
        }
        SparseCoo::from_triplets(self.tree.n_dofs(), t).expect("tree dofs are in range")
    }

    pub fn to_dense(&self) -> CMatrix {
        self.scatter().to_dense()
    }
}

/// Diagonal blocks of G^r and G^< at one energy, each over a dof group.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensDiagonal {
    pub energy: f64,
    pub groups: Vec<Vec<usize>>,
    pub retarded: Vec<CMatrix>,
    pub lesser: Option<Vec<CMatrix>>,
}

impl GreensDiagonal {
    pub fn n_dofs(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    fn scatter_diag(&self, blocks: &[CMatrix]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.n_dofs()];
        for (g, b) in self.groups.iter().zip(blocks) {
            for (k, &d) in g.iter().enumerate() {
                out[d] = b[(k, k)];
            }
        }
        out
    }

    /// G^r_jj in global dof order.
    pub fn retarded_dof_diagonal(&self) -> Vec<C64> {
        self.scatter_diag(&self.retarded)
    }

    /// G^<_jj in global dof order, if the lesser pass ran.
    pub fn lesser_dof_diagonal(&self) -> Option<Vec<C64>> {
        self.lesser.as_ref().map(|l| self.scatter_diag(l))
    }

    /// Largest relative departure from G^r = (G^r)^T and G^< = -(G^<)^H.
    pub fn invariant_deviation(&self) -> f64 {
        let r = self.retarded.iter().map(CMatrix::symmetry_deviation).fold(0.0, f64::max);
        let l = self
            .lesser
            .iter()
            .flatten()
            .map(CMatrix::skew_hermitian_deviation)
            .fold(0.0, f64::max);
        r.max(l)
    }

    /// Dump of the dof diagonals, for diagnostics.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "energy {}", self.energy);
        for (d, g) in self.retarded_dof_diagonal().iter().enumerate() {
            let _ = writeln!(s, "{d} {:e} {:e}", g.re, g.im);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::c64;

    fn tree3() -> Arc<SeparatorTree> {
        // Clusters {0}, {2} under separator {1}.
        Arc::new(SeparatorTree::from_parts(3, vec![vec![0], vec![2], vec![1]], vec![Some(2), Some(2), None]).unwrap())
    }

    #[test]
    fn assembles_energy_minus_hamiltonian() {
        let h = SparseCoo::new(1);
        let a = assemble_system(&h, &SelfEnergy::default(), 1.0).unwrap();
        assert_eq!(a.to_dense(), CMatrix::identity(1));

        let h = SparseCoo::from_triplets(2, [(0, 0, c64(2.0, 0.0)), (1, 1, c64(3.0, 0.0))]).unwrap();
        let sigma = SelfEnergy {
            blocks: vec![],
            diagonal: vec![(0, c64(0.0, -1e-6)), (1, c64(0.0, -1e-6))],
        };
        let a = assemble_system(&h, &sigma, 0.5).unwrap();
        assert_eq!(a.get(0, 0), c64(-1.5, 1e-6));
        assert_eq!(a.get(1, 1), c64(-2.5, 1e-6));
    }

    #[test]
    fn scatter_round_trips_bit_exactly() {
        let a = SparseCoo::from_triplets(
            3,
            [
                (0, 0, c64(1.0, 0.1)),
                (0, 1, c64(0.3, -0.2)),
                (1, 0, c64(0.3, -0.2)),
                (1, 1, c64(2.0, 0.0)),
                (1, 2, c64(-0.7, 0.0)),
                (2, 1, c64(-0.7, 0.0)),
                (2, 2, c64(1.0 / 3.0, 0.0)),
            ],
        )
        .unwrap();
        let g = group_by_partition(&a, tree3()).unwrap();
        assert_eq!(g.symmetry(), Symmetry::ComplexSymmetric);
        assert_eq!(g.scatter(), a);
        assert!(g.block(0, 1).is_none(), "leaf clusters share no block");
        assert_eq!(g.block(0, 2).unwrap()[(0, 0)], c64(0.3, -0.2));
    }

    #[test]
    fn unrelated_coupling_is_a_partition_violation() {
        let a = SparseCoo::from_triplets(3, [(0, 2, c64(1.0, 0.0)), (2, 0, c64(1.0, 0.0))]).unwrap();
        let err = group_by_partition(&a, tree3()).unwrap_err();
        assert!(matches!(err, Error::PartitionViolation { row: 0, col: 2, .. }));
    }

    #[test]
    fn text_dump_round_trips() {
        let a = SparseCoo::from_triplets(2, [(0, 1, c64(0.1, 1.0 / 7.0)), (1, 1, c64(-3.5e-300, 2.0))]).unwrap();
        let mut buf = Vec::new();
        a.write_text(&mut buf).unwrap();
        let b = SparseCoo::read_text(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let a = SparseCoo::from_triplets(2, [(0, 0, c64(1.0, 0.0)), (0, 0, c64(-1.0, 0.0)), (1, 0, c64(2.0, 0.0)), (1, 0, c64(1.0, 0.0))]).unwrap();
        assert_eq!(a.entries(), &[(1, 0, c64(3.0, 0.0))]);
        assert!(SparseCoo::from_triplets(2, [(2, 0, c64(1.0, 0.0))]).is_err());
    }
}

//! Hierarchical Schur-complement solver for the diagonal blocks of
//! G^r = A^{-1} and G^< = G^r Sigma^< (G^r)^H over a separator tree.
//!
//! The fold eliminates clusters level by level, storing the fill factors
//! `Psi_ij = -(A_ii)^{-1} A_ij` and the inverted pivots. Extraction walks
//! back down the tree. The lesser pass folds `N = Sigma^< (G^r)^H` with the
//! same factors, scales by the pivot inverses and extracts again.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::dense::{gemm, inverse, mul_acc, product, CMatrix, FlopLedger, Op, C64};
use crate::error::{Error, Location, Result};
use crate::partition::SeparatorTree;
use crate::sparse::{group_by_partition, BlockMap, ClusterBlockMatrix, GreensDiagonal, SparseCoo, Symmetry};

/// Which blocks the extraction and lesser passes form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Every ancestor pair, in both orientations.
    Literal,
    /// Only the blocks that feed the requested diagonal blocks.
    Pruned,
}

/// Intermediate block sets, keyed by level.
#[derive(Clone, Debug, Default)]
pub struct HscTrace {
    /// `A^(l)` after folding level `l`; key 0 is the input.
    pub folded: BTreeMap<usize, BlockMap>,
    /// `G^(l)`; key `L-1` holds the pivot inverses.
    pub retarded: BTreeMap<usize, BlockMap>,
    /// `N^(l)`; key 0 is `Sigma^< (G^r)^H`.
    pub lesser_folded: BTreeMap<usize, BlockMap>,
    /// `P^(l)`; key `L-1` is the pivot-scaled fold.
    pub lesser: BTreeMap<usize, BlockMap>,
}

/// Output of the fold.
#[derive(Clone, Debug)]
pub struct HscFactorization {
    tree: Arc<SeparatorTree>,
    /// Fill factors per cluster, nearest ancestor first.
    psi: Vec<Vec<(usize, CMatrix)>>,
    /// `(A_ii^(l))^{-1}` at the time cluster i was folded; the root's is G_rr.
    pivots_inv: Vec<CMatrix>,
}

impl HscFactorization {
    pub fn tree(&self) -> &Arc<SeparatorTree> {
        &self.tree
    }

    pub fn psi(&self, i: usize) -> &[(usize, CMatrix)] {
        &self.psi[i]
    }

    pub fn pivot_inverse(&self, i: usize) -> &CMatrix {
        &self.pivots_inv[i]
    }

    /// Structural fill set of cluster i.
    pub fn fill_set(&self, i: usize) -> Vec<usize> {
        self.psi[i].iter().map(|(j, _)| *j).collect()
    }
}

/// Fold A over the tree. A must be complex symmetric.
pub fn hsc_fold(a: &ClusterBlockMatrix, ledger: &mut FlopLedger, mut trace: Option<&mut HscTrace>) -> Result<HscFactorization> {
    if a.symmetry() != Symmetry::ComplexSymmetric {
        return Err(Error::Contract("the fold requires a complex-symmetric matrix".into()));
    }
    let tree = a.tree().clone();
    let levels = tree.levels();
    let mut work: BlockMap = a.blocks().clone();
    if let Some(t) = trace.as_deref_mut() {
        t.folded.insert(0, work.clone());
    }
    let m = tree.len();
    let mut psi: Vec<Vec<(usize, CMatrix)>> = vec![Vec::new(); m];
    let mut pivots_inv: Vec<CMatrix> = vec![CMatrix::zeros(0, 0); m];
    let one = C64::new(1.0, 0.0);

    for level in 1..levels {
        for &i in tree.at_level(level) {
            let location = Location::Cluster { id: i, level };
            let inv = invert_diag(&work, &tree, i, ledger).map_err(|e| e.at(location))?;
            // Pull the couplings to ancestors out of the working set.
            let mut couplings: Vec<(usize, CMatrix, CMatrix)> = Vec::new();
            for &j in tree.ancestors(i) {
                work.remove(&(j, i));
                if let Some(a_ij) = work.remove(&(i, j)) {
                    let mut p = CMatrix::zeros(inv.rows(), a_ij.cols());
                    gemm(C64::new(-1.0, 0.0), &inv, Op::N, &a_ij, Op::N, C64::default(), &mut p, ledger)?;
                    couplings.push((j, p, a_ij));
                }
            }
            // A_jk += Psi_ij^T A_ik once per unordered pair; the mirror is a transpose.
            for x in 0..couplings.len() {
                for y in x..couplings.len() {
                    let (j, psi_ij, _) = &couplings[x];
                    let (k, _, a_ik) = &couplings[y];
                    let (j, k) = (*j, *k);
                    let target = work
                        .entry((j, k))
                        .or_insert_with(|| CMatrix::zeros(tree.size(j), tree.size(k)));
                    gemm(one, psi_ij, Op::T, a_ik, Op::N, one, target, ledger)?;
                    if j != k {
                        let mirrored = target.transpose();
                        work.insert((k, j), mirrored);
                    }
                }
            }
            psi[i] = couplings.into_iter().map(|(j, p, _)| (j, p)).collect();
            pivots_inv[i] = inv;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.folded.insert(level, work.clone());
        }
    }
    let root = tree.root();
    let location = Location::Cluster { id: root, level: levels };
    pivots_inv[root] = invert_diag(&work, &tree, root, ledger).map_err(|e| e.at(location))?;
    Ok(HscFactorization { tree, psi, pivots_inv })
}

fn invert_diag(work: &BlockMap, tree: &SeparatorTree, i: usize, ledger: &mut FlopLedger) -> Result<CMatrix> {
    match work.get(&(i, i)) {
        Some(d) => inverse(d, ledger),
        None if tree.size(i) == 0 => inverse(&CMatrix::zeros(0, 0), ledger),
        None => Err(Error::SingularBlock {
            pivot: 0,
            location: Location::Unspecified,
        }),
    }
}

/// Block requirements for the extraction and lesser passes.
#[derive(Clone, Debug)]
pub struct Plan {
    schedule: Schedule,
    /// Ancestors j for which G_ij is formed.
    gcols: Vec<Vec<usize>>,
    /// Ancestors k for which the lesser fold keeps N_ik (pruned only).
    need: Vec<Vec<usize>>,
    /// Clusters with a nonzero lesser self-energy block.
    support: Vec<bool>,
}

impl Plan {
    /// Build a plan. `lesser_support[i]` marks clusters carrying a lesser
    /// self-energy; `None` plans the retarded pass only.
    pub fn new(f: &HscFactorization, schedule: Schedule, lesser_support: Option<&[bool]>) -> Self {
        let tree = &f.tree;
        let m = tree.len();
        let support = lesser_support.map_or_else(|| vec![false; m], <[bool]>::to_vec);
        match schedule {
            Schedule::Literal => Plan {
                schedule,
                gcols: (0..m).map(|i| tree.ancestors(i).to_vec()).collect(),
                need: (0..m).map(|i| tree.ancestors(i).to_vec()).collect(),
                support,
            },
            Schedule::Pruned => {
                let order_by_ancestry = |i: usize, set: &HashSet<usize>| -> Vec<usize> {
                    tree.ancestors(i).iter().copied().filter(|a| set.contains(a)).collect()
                };
                // Lesser fold columns, top-down: R_i = S_i + union of R_a over a in S_i.
                let mut need_sets: Vec<HashSet<usize>> = vec![HashSet::new(); m];
                for level in (1..=tree.levels()).rev() {
                    for &i in tree.at_level(level) {
                        let mut s: HashSet<usize> = HashSet::new();
                        for (a, _) in &f.psi[i] {
                            s.insert(*a);
                            s.extend(need_sets[*a].iter().copied());
                        }
                        need_sets[i] = s;
                    }
                }
                // Retarded columns, closed bottom-up under the extraction recurrence.
                let mut gsets: Vec<HashSet<usize>> = (0..m)
                    .map(|i| {
                        let mut s: HashSet<usize> = f.psi[i].iter().map(|(a, _)| *a).collect();
                        if support[i] {
                            s.extend(need_sets[i].iter().copied());
                        }
                        s
                    })
                    .collect();
                for level in 1..=tree.levels() {
                    for &c in tree.at_level(level) {
                        let cols: Vec<usize> = gsets[c].iter().copied().collect();
                        for (k, _) in &f.psi[c] {
                            for &j in &cols {
                                if *k == j {
                                    continue;
                                }
                                if tree.is_ancestor(j, *k) {
                                    gsets[*k].insert(j);
                                } else {
                                    gsets[j].insert(*k);
                                }
                            }
                        }
                    }
                }
                Plan {
                    schedule,
                    gcols: (0..m).map(|i| order_by_ancestry(i, &gsets[i])).collect(),
                    need: (0..m).map(|i| order_by_ancestry(i, &need_sets[i])).collect(),
                    support,
                }
            }
        }
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn retarded_columns(&self, i: usize) -> &[usize] {
        &self.gcols[i]
    }
}

fn lookup(map: &BlockMap, key: (usize, usize)) -> Option<&CMatrix> {
    map.get(&key)
}

/// Extract the blocks of G^r named by the plan: every diagonal block and
/// the ancestor pairs `(i, j)`, `(j, i)` for `j` in the plan's columns.
pub fn hsc_gr(f: &HscFactorization, plan: &Plan, ledger: &mut FlopLedger, mut trace: Option<&mut HscTrace>) -> Result<BlockMap> {
    let tree = &f.tree;
    let levels = tree.levels();
    let mut g: BlockMap = BlockMap::new();
    if let Some(t) = trace.as_deref_mut() {
        let inverses = (0..tree.len()).map(|i| ((i, i), f.pivots_inv[i].clone())).collect();
        t.retarded.insert(levels - 1, inverses);
    }
    g.insert((tree.root(), tree.root()), f.pivots_inv[tree.root()].clone());
    for level in (1..levels).rev() {
        for &i in tree.at_level(level) {
            let psi = &f.psi[i];
            for &j in &plan.gcols[i] {
                let mut acc = CMatrix::zeros(tree.size(i), tree.size(j));
                for (k, psi_ik) in psi {
                    if let Some(g_kj) = lookup(&g, (*k, j)) {
                        mul_acc(&mut acc, psi_ik, Op::N, g_kj, Op::N, ledger)?;
                    } else {
                        debug_assert!(false, "missing G block ({k}, {j}) while extracting cluster {i}");
                    }
                }
                g.insert((j, i), acc.transpose());
                g.insert((i, j), acc);
            }
            let mut g_ii = f.pivots_inv[i].clone();
            for (j, psi_ij) in psi {
                let g_ji = g.get(&(*j, i)).expect("fill columns are always extracted");
                mul_acc(&mut g_ii, psi_ij, Op::N, g_ji, Op::N, ledger)?;
            }
            g.insert((i, i), g_ii);
        }
        if let Some(t) = trace.as_deref_mut() {
            // Diagonal blocks not yet reached keep their pivot inverse.
            let mut snapshot = g.clone();
            for c in 0..tree.len() {
                snapshot.entry((c, c)).or_insert_with(|| f.pivots_inv[c].clone());
            }
            t.retarded.insert(level - 1, snapshot);
        }
    }
    if levels == 1 {
        if let Some(t) = trace {
            t.retarded.insert(0, g.clone());
        }
    }
    Ok(g)
}

/// Check that Sigma^< is block diagonal over the tree and skew-Hermitian.
pub fn lesser_support(sigma: &ClusterBlockMatrix) -> Result<Vec<bool>> {
    let tree = sigma.tree();
    let mut support = vec![false; tree.len()];
    for (&(i, j), b) in sigma.blocks() {
        if i != j {
            return Err(Error::Contract(format!(
                "lesser self-energy couples clusters {i} and {j}; it must be block diagonal"
            )));
        }
        let dev = b.skew_hermitian_deviation();
        if dev > 1e-10 {
            return Err(Error::NonSkewHermitianInput { block: i, deviation: dev });
        }
        support[i] = true;
    }
    Ok(support)
}

/// Diagonal blocks of G^< from the fold, the extracted G^r blocks and a
/// block-diagonal Sigma^<.
pub fn hsc_gless(
    f: &HscFactorization,
    plan: &Plan,
    g: &BlockMap,
    sigma: &ClusterBlockMatrix,
    ledger: &mut FlopLedger,
    mut trace: Option<&mut HscTrace>,
) -> Result<BlockMap> {
    let tree = &f.tree;
    let levels = tree.levels();
    let support = lesser_support(sigma)?;
    if let Some(c) = (0..tree.len()).find(|&c| support[c] && !plan.support[c]) {
        return Err(Error::Contract(format!(
            "cluster {c} carries a lesser self-energy the plan did not account for"
        )));
    }
    let one = C64::new(1.0, 0.0);

    // Step 1: N_cb = Sigma_cc (G_bc)^H.
    let mut n: BlockMap = BlockMap::new();
    for c in 0..tree.len() {
        let Some(s) = sigma.block(c, c) else { continue };
        let cols: Vec<usize> = match plan.schedule {
            Schedule::Literal => {
                let mut cols: Vec<usize> = g.keys().filter(|&&(a, _)| a == c).map(|&(_, b)| b).collect();
                cols.sort_unstable();
                cols
            }
            Schedule::Pruned => std::iter::once(c).chain(plan.need[c].iter().copied()).collect(),
        };
        for b in cols {
            let g_bc = g
                .get(&(b, c))
                .ok_or_else(|| Error::Contract(format!("G block ({b}, {c}) was not extracted")))?;
            n.insert((c, b), product(s, Op::N, g_bc, Op::C, ledger)?);
        }
    }
    if let Some(t) = trace.as_deref_mut() {
        t.lesser_folded.insert(0, n.clone());
    }

    // Step 2: N_jk += Psi_ij^T N_ik.
    for level in 1..levels {
        for &i in tree.at_level(level) {
            for (j, psi_ij) in &f.psi[i] {
                let cols: Vec<usize> = match plan.schedule {
                    Schedule::Literal => tree.ancestors(i).to_vec(),
                    Schedule::Pruned => std::iter::once(*j).chain(plan.need[*j].iter().copied()).collect(),
                };
                for k in cols {
                    let Some(n_ik) = n.get(&(i, k)) else { continue };
                    let mut upd = CMatrix::zeros(tree.size(*j), tree.size(k));
                    gemm(one, psi_ij, Op::T, n_ik, Op::N, C64::default(), &mut upd, ledger)?;
                    match n.get_mut(&(*j, k)) {
                        Some(target) => target.add_assign_matrix(&upd)?,
                        None => {
                            n.insert((*j, k), upd);
                        }
                    }
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.lesser_folded.insert(level, n.clone());
        }
    }

    // Step 3: P = blockdiag(pivot inverses) N.
    let mut p: BlockMap = BlockMap::new();
    let mut keys: Vec<(usize, usize)> = n.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let wanted = match plan.schedule {
            Schedule::Literal => true,
            Schedule::Pruned => a == b || f.psi[a].iter().any(|(j, _)| *j == b),
        };
        if wanted {
            p.insert((a, b), product(&f.pivots_inv[a], Op::N, &n[&(a, b)], Op::N, ledger)?);
        }
    }
    drop(n);
    if let Some(t) = trace.as_deref_mut() {
        t.lesser.insert(levels - 1, p.clone());
    }

    // Step 4: extract.
    for level in (1..levels).rev() {
        for &i in tree.at_level(level) {
            let psi = &f.psi[i];
            let cols: Vec<usize> = match plan.schedule {
                Schedule::Literal => tree.ancestors(i).to_vec(),
                Schedule::Pruned => f.fill_set(i),
            };
            for j in cols {
                let mut acc = p
                    .get(&(i, j))
                    .cloned()
                    .unwrap_or_else(|| CMatrix::zeros(tree.size(i), tree.size(j)));
                for (k, psi_ik) in psi {
                    if let Some(p_kj) = p.get(&(*k, j)) {
                        mul_acc(&mut acc, psi_ik, Op::N, p_kj, Op::N, ledger)?;
                    }
                }
                p.insert((j, i), acc.adjoint().neg());
                p.insert((i, j), acc);
            }
            let mut p_ii = p
                .get(&(i, i))
                .cloned()
                .unwrap_or_else(|| CMatrix::zeros(tree.size(i), tree.size(i)));
            for (j, psi_ij) in psi {
                if let Some(p_ji) = p.get(&(*j, i)) {
                    mul_acc(&mut p_ii, psi_ij, Op::N, p_ji, Op::N, ledger)?;
                }
            }
            p.insert((i, i), p_ii);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.lesser.insert(level - 1, p.clone());
        }
    }
    let mut diag = BlockMap::new();
    for c in 0..tree.len() {
        let block = p.remove(&(c, c)).unwrap_or_else(|| CMatrix::zeros(tree.size(c), tree.size(c)));
        diag.insert((c, c), block);
    }
    Ok(diag)
}

/// Separate ledgers for the retarded and lesser passes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveLedger {
    pub retarded: FlopLedger,
    pub lesser: FlopLedger,
}

impl SolveLedger {
    pub fn total(&self) -> FlopLedger {
        self.retarded + self.lesser
    }
}

impl std::ops::AddAssign for SolveLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.retarded += rhs.retarded;
        self.lesser += rhs.lesser;
    }
}

/// Full HSC solve at one energy. The fold is charged to the retarded ledger.
pub fn solve_hsc(
    a: &SparseCoo,
    sigma_lesser: Option<&SparseCoo>,
    tree: Arc<SeparatorTree>,
    energy: f64,
    schedule: Schedule,
    ledger: &mut SolveLedger,
) -> Result<GreensDiagonal> {
    let grouped = group_by_partition(a, tree.clone())?;
    let sigma = sigma_lesser.map(|s| group_by_partition(s, tree.clone())).transpose()?;
    let support = sigma.as_ref().map(lesser_support).transpose()?;
    let f = hsc_fold(&grouped, &mut ledger.retarded, None)?;
    let plan = Plan::new(&f, schedule, support.as_deref());
    let g = hsc_gr(&f, &plan, &mut ledger.retarded, None)?;
    let lesser = match &sigma {
        Some(s) => {
            let mut p = hsc_gless(&f, &plan, &g, s, &mut ledger.lesser, None)?;
            Some((0..tree.len()).map(|c| p.remove(&(c, c)).expect("every diagonal block is returned")).collect())
        }
        None => None,
    };
    let mut g = g;
    let retarded = (0..tree.len())
        .map(|c| g.remove(&(c, c)).expect("every diagonal block is extracted"))
        .collect();
    Ok(GreensDiagonal {
        energy,
        groups: tree.clusters().iter().map(|c| c.dofs.clone()).collect(),
        retarded,
        lesser,
    })
}

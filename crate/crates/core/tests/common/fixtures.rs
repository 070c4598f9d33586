//! Closed-form fixtures for the HSC passes on small separator trees,
//! parameterised by seed. Mismatches are collected rather than asserted.

use std::sync::Arc;

use ndgreen::hsc::{hsc_fold, hsc_gless, hsc_gr, HscTrace, Plan, Schedule};
use ndgreen::partition::SeparatorTree;
use ndgreen::sparse::{BlockMap, ClusterBlockMatrix, Symmetry};
use ndgreen::{CMatrix, FlopLedger};

use super::*;

pub const TOL: f64 = 1e-11;

/// Worst relative error seen and every comparison above `TOL`.
#[derive(Debug, Default)]
pub struct Check {
    pub compared: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl Check {
    pub fn close(&mut self, got: &CMatrix, want: &CMatrix, what: &str) {
        let e = rel(got, want);
        self.compared += 1;
        self.worst = self.worst.max(e);
        if !(e <= TOL) {
            self.failures.push(format!("{what}: relative error {e:e}"));
        }
    }

    pub fn require(&mut self, ok: bool, what: impl std::fmt::Display) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }
}

fn tree(sizes: &[usize], parents: Vec<Option<usize>>) -> Arc<SeparatorTree> {
    let mut next = 0;
    let dofs = sizes
        .iter()
        .map(|&s| {
            let d: Vec<usize> = (next..next + s).collect();
            next += s;
            d
        })
        .collect();
    Arc::new(SeparatorTree::from_parts(next, dofs, parents).unwrap())
}

fn symmetric_blocks(pairs: &[((usize, usize), CMatrix)]) -> BlockMap {
    let mut map = BlockMap::new();
    for ((i, j), b) in pairs {
        if i != j {
            map.insert((*j, *i), t(b));
        }
        map.insert((*i, *j), b.clone());
    }
    map
}

fn block(map: &BlockMap, i: usize, j: usize) -> &CMatrix {
    map.get(&(i, j)).unwrap_or_else(|| panic!("block ({i}, {j}) missing"))
}

/// Three clusters L, R under separator S against the closed forms.
pub fn three_cluster_closed_forms(seed: u64, ck: &mut Check) {
    let (l, r, s) = (0, 1, 2);
    let tr = tree(&[3, 2, 4], vec![Some(s), Some(s), None]);
    let mut g = rng(seed);
    let a_ll = random_symmetric(&mut g, 3, 4.0);
    let a_rr = random_symmetric(&mut g, 2, 4.0);
    let a_ss = random_symmetric(&mut g, 4, 4.0);
    let a_ls = random(&mut g, 3, 4);
    let a_rs = random(&mut g, 2, 4);
    let s_ll = random_skew_hermitian(&mut g, 3);
    let s_rr = random_skew_hermitian(&mut g, 2);
    let s_ss = random_skew_hermitian(&mut g, 4);

    let a = symmetric_blocks(&[
        ((l, l), a_ll.clone()),
        ((r, r), a_rr.clone()),
        ((s, s), a_ss.clone()),
        ((l, s), a_ls.clone()),
        ((r, s), a_rs.clone()),
    ]);
    let a = ClusterBlockMatrix::from_blocks(tr.clone(), a, Symmetry::ComplexSymmetric).unwrap();
    let sigma = symmetric_blocks(&[((l, l), s_ll.clone()), ((r, r), s_rr.clone()), ((s, s), s_ss.clone())]);
    let sigma = ClusterBlockMatrix::from_blocks(tr.clone(), sigma, Symmetry::SkewHermitian).unwrap();

    let inv_ll = inv(&a_ll);
    let inv_rr = inv(&a_rr);
    let a_hat = sub(&sub(&a_ss, &mul3(&t(&a_ls), &inv_ll, &a_ls)), &mul3(&t(&a_rs), &inv_rr, &a_rs));
    let g_ss = inv(&a_hat);
    let g_ls = neg(&mul3(&inv_ll, &a_ls, &g_ss));
    let g_rs = neg(&mul3(&inv_rr, &a_rs, &g_ss));
    let g_ll = add(&inv_ll, &mul(&mul3(&inv_ll, &a_ls, &g_ss), &mul(&t(&a_ls), &inv_ll)));
    let g_rr = add(&inv_rr, &mul(&mul3(&inv_rr, &a_rs, &g_ss), &mul(&t(&a_rs), &inv_rr)));
    let (g_sl, g_sr) = (t(&g_ls), t(&g_rs));

    let inner = sub(
        &sub(&mul(&s_ss, &h(&g_ss)), &mul(&mul3(&t(&a_ls), &inv_ll, &s_ll), &h(&g_sl))),
        &mul(&mul3(&t(&a_rs), &inv_rr, &s_rr), &h(&g_sr)),
    );
    let gl_ss = mul(&g_ss, &inner);
    let gl_ls = add(&neg(&mul3(&inv_ll, &a_ls, &gl_ss)), &mul3(&inv_ll, &s_ll, &h(&g_sl)));
    // G^<_SL = -(G^<_LS)^H, so the coupling term enters with a plus sign.
    let gl_ll = add(&mul3(&inv_ll, &s_ll, &h(&g_ll)), &mul3(&inv_ll, &a_ls, &h(&gl_ls)));
    let gl_rs = add(&neg(&mul3(&inv_rr, &a_rs, &gl_ss)), &mul3(&inv_rr, &s_rr, &h(&g_sr)));
    let gl_rr = add(&mul3(&inv_rr, &s_rr, &h(&g_rr)), &mul3(&inv_rr, &a_rs, &h(&gl_rs)));

    for schedule in [Schedule::Literal, Schedule::Pruned] {
        let mut ledger = FlopLedger::new();
        let mut trace = HscTrace::default();
        let f = hsc_fold(&a, &mut ledger, Some(&mut trace)).unwrap();
        ck.close(block(&trace.folded[&1], s, s), &a_hat, "Schur complement");
        let plan = Plan::new(&f, schedule, Some(&[true, true, true]));
        let gr = hsc_gr(&f, &plan, &mut ledger, None).unwrap();
        ck.close(block(&gr, s, s), &g_ss, "G_SS");
        ck.close(block(&gr, l, s), &g_ls, "G_LS");
        ck.close(block(&gr, r, s), &g_rs, "G_RS");
        ck.close(block(&gr, l, l), &g_ll, "G_LL");
        ck.close(block(&gr, r, r), &g_rr, "G_RR");
        let gl = hsc_gless(&f, &plan, &gr, &sigma, &mut ledger, Some(&mut trace)).unwrap();
        ck.close(block(&gl, s, s), &gl_ss, "G<_SS");
        ck.close(block(&gl, l, l), &gl_ll, "G<_LL");
        ck.close(block(&gl, r, r), &gl_rr, "G<_RR");
        let p0 = &trace.lesser[&0];
        ck.close(block(p0, l, s), &gl_ls, "G<_LS");
        ck.close(block(p0, r, s), &gl_rs, "G<_RS");
    }

    // The closed forms themselves agree with the dense definition.
    let dense = a.to_dense();
    let full = inv(&dense);
    let sig = sigma.to_dense();
    let full_l = mul3(&full, &sig, &h(&full));
    let idx = |c: usize| tr.cluster(c).dofs.clone();
    ck.close(&full.select(&idx(s), &idx(s)), &g_ss, "dense G_SS");
    ck.close(&full_l.select(&idx(s), &idx(s)), &gl_ss, "dense G<_SS");
    ck.close(&full_l.select(&idx(l), &idx(s)), &gl_ls, "dense G<_LS");
    ck.close(&full_l.select(&idx(l), &idx(l)), &gl_ll, "dense G<_LL");
}

/// Five regions: 1, 2 and 4 are leaves, 3 separates 1 from 2, and 5 is
/// the root. Ids are the region numbers minus one.
pub struct FiveRegion {
    pub a: ClusterBlockMatrix,
    pub sigma: ClusterBlockMatrix,
    pub blocks: BlockMap,
    pub sig: Vec<CMatrix>,
}

pub fn five_region(seed: u64) -> FiveRegion {
    let tr = tree(&[3, 2, 2, 3, 2], vec![Some(2), Some(2), Some(4), Some(4), None]);
    let mut g = rng(seed);
    let sizes = [3, 2, 2, 3, 2];
    let mut pairs = Vec::new();
    for k in 0..5 {
        pairs.push(((k, k), random_symmetric(&mut g, sizes[k], 4.0)));
    }
    for (i, j) in [(0, 2), (0, 4), (1, 2), (1, 4), (2, 4), (3, 4)] {
        pairs.push(((i, j), random(&mut g, sizes[i], sizes[j])));
    }
    let blocks = symmetric_blocks(&pairs);
    let a = ClusterBlockMatrix::from_blocks(tr.clone(), blocks.clone(), Symmetry::ComplexSymmetric).unwrap();
    let sig: Vec<CMatrix> = sizes.iter().map(|&n| random_skew_hermitian(&mut g, n)).collect();
    let sigma_blocks = (0..5).map(|k| ((k, k), sig[k].clone())).collect();
    let sigma = ClusterBlockMatrix::from_blocks(tr, sigma_blocks, Symmetry::SkewHermitian).unwrap();
    FiveRegion { a, sigma, blocks, sig }
}

/// Every intermediate of the five-region layout against direct evaluation.
pub fn five_region_intermediates(seed: u64, ck: &mut Check) {
    let fr = five_region(seed);
    let a = |i: usize, j: usize| fr.blocks[&(i - 1, j - 1)].clone();
    let s = |i: usize| fr.sig[i - 1].clone();

    let mut trace = HscTrace::default();
    let mut ledger = FlopLedger::new();
    let f = hsc_fold(&fr.a, &mut ledger, Some(&mut trace)).unwrap();
    let plan = Plan::new(&f, Schedule::Literal, Some(&[true; 5]));
    let gr = hsc_gr(&f, &plan, &mut ledger, Some(&mut trace)).unwrap();
    let gl = hsc_gless(&f, &plan, &gr, &fr.sigma, &mut ledger, Some(&mut trace)).unwrap();
    let at = |map: &BlockMap, i: usize, j: usize| block(map, i - 1, j - 1).clone();

    // Fold.
    let (i11, i22, i44) = (inv(&a(1, 1)), inv(&a(2, 2)), inv(&a(4, 4)));
    let a1_33 = sub(&sub(&a(3, 3), &mul3(&t(&a(1, 3)), &i11, &a(1, 3))), &mul3(&t(&a(2, 3)), &i22, &a(2, 3)));
    let a1_35 = sub(&sub(&a(3, 5), &mul3(&t(&a(1, 3)), &i11, &a(1, 5))), &mul3(&t(&a(2, 3)), &i22, &a(2, 5)));
    let a1_55 = sub(
        &sub(&sub(&a(5, 5), &mul3(&t(&a(1, 5)), &i11, &a(1, 5))), &mul3(&t(&a(2, 5)), &i22, &a(2, 5))),
        &mul3(&t(&a(4, 5)), &i44, &a(4, 5)),
    );
    let a1 = &trace.folded[&1];
    ck.close(&at(a1, 3, 3), &a1_33, "A(1)_33");
    ck.close(&at(a1, 3, 5), &a1_35, "A(1)_35");
    ck.close(&at(a1, 5, 3), &t(&a1_35), "A(1)_53");
    ck.close(&at(a1, 5, 5), &a1_55, "A(1)_55");
    for (i, j) in [(1, 1), (2, 2), (4, 4)] {
        ck.close(&at(a1, i, j), &a(i, j), "A(1) untouched diagonal");
    }
    for (i, j) in [(1, 3), (1, 5), (2, 3), (2, 5), (4, 5), (3, 1), (5, 4)] {
        ck.require(!a1.contains_key(&(i - 1, j - 1)), format!("A(1)_{i}{j} must be eliminated"));
    }
    let i33 = inv(&a1_33);
    let a2_55 = sub(&a1_55, &mul3(&t(&a1_35), &i33, &a1_35));
    let a2 = &trace.folded[&2];
    ck.close(&at(a2, 5, 5), &a2_55, "A(2)_55");
    ck.close(&at(a2, 3, 3), &a1_33, "A(2)_33");
    ck.require(!a2.contains_key(&(2, 4)) && !a2.contains_key(&(4, 2)), "A(2)_35 must be eliminated");

    // Retarded extraction.
    let g2 = &trace.retarded[&2];
    let i55 = inv(&a2_55);
    ck.close(&at(g2, 3, 3), &i33, "G(2)_33");
    ck.close(&at(g2, 5, 5), &i55, "G(2)_55");
    ck.close(&at(g2, 1, 1), &i11, "G(2)_11");
    let psi35 = neg(&mul(&i33, &a1_35));
    let g1_35 = mul(&psi35, &i55);
    let g1_33 = add(&i33, &mul(&psi35, &t(&g1_35)));
    let g1 = &trace.retarded[&1];
    ck.close(&at(g1, 3, 5), &g1_35, "G(1)_35");
    ck.close(&at(g1, 5, 3), &t(&g1_35), "G(1)_53");
    ck.close(&at(g1, 3, 3), &g1_33, "G(1)_33");
    ck.close(&at(g1, 1, 1), &i11, "G(1)_11");

    let g45 = neg(&mul3(&i44, &a(4, 5), &i55));
    let g44 = sub(&i44, &mul3(&i44, &a(4, 5), &t(&g45)));
    let g15 = sub(&neg(&mul3(&i11, &a(1, 5), &i55)), &mul3(&i11, &a(1, 3), &g1_35));
    let g13 = sub(&neg(&mul3(&i11, &a(1, 3), &g1_33)), &mul3(&i11, &a(1, 5), &t(&g1_35)));
    let g11 = sub(&sub(&i11, &mul3(&i11, &a(1, 3), &t(&g13))), &mul3(&i11, &a(1, 5), &t(&g15)));
    let g25 = sub(&neg(&mul3(&i22, &a(2, 5), &i55)), &mul3(&i22, &a(2, 3), &g1_35));
    let g23 = sub(&neg(&mul3(&i22, &a(2, 3), &g1_33)), &mul3(&i22, &a(2, 5), &t(&g1_35)));
    let g22 = sub(&sub(&i22, &mul3(&i22, &a(2, 3), &t(&g23))), &mul3(&i22, &a(2, 5), &t(&g25)));
    let g0 = &trace.retarded[&0];
    for (name, (i, j), want) in [
        ("G(0)_45", (4, 5), &g45),
        ("G(0)_44", (4, 4), &g44),
        ("G(0)_15", (1, 5), &g15),
        ("G(0)_13", (1, 3), &g13),
        ("G(0)_11", (1, 1), &g11),
        ("G(0)_25", (2, 5), &g25),
        ("G(0)_23", (2, 3), &g23),
        ("G(0)_22", (2, 2), &g22),
        ("G(0)_33", (3, 3), &g1_33),
        ("G(0)_55", (5, 5), &i55),
    ] {
        ck.close(&at(g0, i, j), want, name);
    }
    ck.close(&at(g0, 3, 1), &t(&g13), "G(0)_31");
    ck.require(!g0.contains_key(&(0, 1)) && !g0.contains_key(&(2, 3)), "unrelated blocks are never formed");

    // The extracted blocks are the true inverse.
    let full = inv(&fr.a.to_dense());
    let dofs = |k: usize| fr.a.tree().cluster(k - 1).dofs.clone();
    for (i, j) in [(1, 1), (1, 3), (1, 5), (2, 2), (2, 3), (2, 5), (3, 3), (3, 5), (4, 4), (4, 5), (5, 5)] {
        ck.close(&at(g0, i, j), &full.select(&dofs(i), &dofs(j)), "G(0) against inverse");
    }

    // Lesser: N = Sigma^< (G^r)^H.
    let gg = |i: usize, j: usize| at(g0, i, j);
    let n0 = &trace.lesser_folded[&0];
    ck.close(&at(n0, 1, 1), &mul(&s(1), &bar(&g11)), "N_11");
    ck.close(&at(n0, 1, 3), &mul(&s(1), &bar(&g13)), "N_13");
    ck.close(&at(n0, 1, 5), &mul(&s(1), &bar(&g15)), "N_15");
    ck.close(&at(n0, 3, 1), &mul(&s(3), &h(&g13)), "N_31");
    ck.close(&at(n0, 3, 5), &mul(&s(3), &bar(&gg(3, 5))), "N_35");
    ck.close(&at(n0, 5, 4), &mul(&s(5), &h(&g45)), "N_54");
    ck.close(&at(n0, 5, 5), &mul(&s(5), &bar(&i55)), "N_55");
    let n = |i: usize, j: usize| at(n0, i, j);

    let n1_33 = sub(&sub(&n(3, 3), &mul3(&t(&a(1, 3)), &i11, &n(1, 3))), &mul3(&t(&a(2, 3)), &i22, &n(2, 3)));
    let n1_55 = sub(
        &sub(&sub(&n(5, 5), &mul3(&t(&a(1, 5)), &i11, &n(1, 5))), &mul3(&t(&a(2, 5)), &i22, &n(2, 5))),
        &mul3(&t(&a(4, 5)), &i44, &n(4, 5)),
    );
    let n1_35 = sub(&sub(&n(3, 5), &mul3(&t(&a(1, 3)), &i11, &n(1, 5))), &mul3(&t(&a(2, 3)), &i22, &n(2, 5)));
    let n1_53 = sub(&sub(&n(5, 3), &mul3(&t(&a(1, 5)), &i11, &n(1, 3))), &mul3(&t(&a(2, 5)), &i22, &n(2, 3)));
    let n1 = &trace.lesser_folded[&1];
    ck.close(&at(n1, 3, 3), &n1_33, "N(1)_33");
    ck.close(&at(n1, 5, 5), &n1_55, "N(1)_55");
    ck.close(&at(n1, 3, 5), &n1_35, "N(1)_35");
    ck.close(&at(n1, 5, 3), &n1_53, "N(1)_53");
    ck.close(&at(n1, 3, 1), &n(3, 1), "N(1)_31 unchanged");
    let n2_55 = sub(&n1_55, &mul3(&t(&a1_35), &i33, &n1_35));
    let n2 = &trace.lesser_folded[&2];
    ck.close(&at(n2, 5, 5), &n2_55, "N(2)_55");
    ck.close(&at(n2, 5, 3), &n1_53, "N(2)_53");

    // P(2) = blockdiag(pivot inverses) N(2).
    let p2 = &trace.lesser[&2];
    ck.close(&at(p2, 1, 3), &mul(&i11, &n(1, 3)), "P(2)_13");
    ck.close(&at(p2, 3, 1), &mul(&i33, &n(3, 1)), "P(2)_31");
    ck.close(&at(p2, 3, 3), &mul(&i33, &n1_33), "P(2)_33");
    ck.close(&at(p2, 3, 5), &mul(&i33, &n1_35), "P(2)_35");
    ck.close(&at(p2, 5, 3), &mul(&i55, &n1_53), "P(2)_53");
    ck.close(&at(p2, 5, 5), &mul(&i55, &n2_55), "P(2)_55");
    ck.close(&at(p2, 4, 5), &mul(&i44, &n(4, 5)), "P(2)_45");
    let p = |i: usize, j: usize| at(p2, i, j);

    let p1_35 = sub(&p(3, 5), &mul3(&i33, &a1_35, &p(5, 5)));
    let p1_53 = neg(&h(&p1_35));
    let p1_33 = sub(&p(3, 3), &mul3(&i33, &a1_35, &p1_53));
    let p1 = &trace.lesser[&1];
    ck.close(&at(p1, 3, 5), &p1_35, "P(1)_35");
    ck.close(&at(p1, 5, 3), &p1_53, "P(1)_53");
    ck.close(&at(p1, 3, 3), &p1_33, "P(1)_33");
    ck.close(&at(p1, 1, 3), &p(1, 3), "P(1)_13 unchanged");
    for (name, m) in [("P(1)_33", &p1_33), ("P(2)_55", &p(5, 5))] {
        ck.require(m.skew_hermitian_deviation() < 1e-10, format!("{name} must be skew-Hermitian"));
    }

    let p55 = p(5, 5);
    let p45 = sub(&p(4, 5), &mul3(&i44, &a(4, 5), &p55));
    let p44 = add(&p(4, 4), &mul3(&i44, &a(4, 5), &h(&p45)));
    let p15 = sub(&sub(&p(1, 5), &mul3(&i11, &a(1, 5), &p55)), &mul3(&i11, &a(1, 3), &p1_35));
    let p13 = add(&sub(&p(1, 3), &mul3(&i11, &a(1, 3), &p1_33)), &mul3(&i11, &a(1, 5), &h(&p1_35)));
    let p11 = add(&add(&p(1, 1), &mul3(&i11, &a(1, 3), &h(&p13))), &mul3(&i11, &a(1, 5), &h(&p15)));
    let p25 = sub(&sub(&p(2, 5), &mul3(&i22, &a(2, 5), &p55)), &mul3(&i22, &a(2, 3), &p1_35));
    let p23 = add(&sub(&p(2, 3), &mul3(&i22, &a(2, 3), &p1_33)), &mul3(&i22, &a(2, 5), &h(&p1_35)));
    let p22 = add(&add(&p(2, 2), &mul3(&i22, &a(2, 3), &h(&p23))), &mul3(&i22, &a(2, 5), &h(&p25)));
    let p0 = &trace.lesser[&0];
    for (name, (i, j), want) in [
        ("P(0)_45", (4, 5), &p45),
        ("P(0)_44", (4, 4), &p44),
        ("P(0)_15", (1, 5), &p15),
        ("P(0)_13", (1, 3), &p13),
        ("P(0)_11", (1, 1), &p11),
        ("P(0)_25", (2, 5), &p25),
        ("P(0)_23", (2, 3), &p23),
        ("P(0)_22", (2, 2), &p22),
    ] {
        ck.close(&at(p0, i, j), want, name);
    }
    ck.close(&at(p0, 3, 1), &neg(&h(&p13)), "P(0)_31");
    ck.close(&at(p0, 5, 4), &neg(&h(&p45)), "P(0)_54");

    // P(0) holds the true G^< on every block it forms.
    let full_l = mul3(&full, &fr.sigma.to_dense(), &h(&full));
    for (i, j) in [(1, 1), (1, 3), (1, 5), (2, 2), (2, 3), (2, 5), (3, 3), (3, 5), (4, 4), (4, 5), (5, 5), (5, 3)] {
        ck.close(&at(p0, i, j), &full_l.select(&dofs(i), &dofs(j)), "P(0) against dense G^<");
    }
    for k in 1..=5 {
        ck.close(&at(&gl, k, k), &full_l.select(&dofs(k), &dofs(k)), "returned diagonal");
    }
}

//! Separator trees: construction by nested dissection, the layered chain
//! used by RGF, and validation against a coupling graph.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::SparseCoo;

/// Undirected coupling graph over degrees of freedom, with optional
/// planar coordinates used for geometric bisection.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    coords: Option<Vec<[f64; 2]>>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Config(format!("edge ({u}, {v}) out of range for {n} vertices")));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adj, coords: None })
    }

    /// Graph of the off-diagonal nonzero pattern.
    pub fn from_sparse(a: &SparseCoo) -> Self {
        let edges = a.entries().iter().filter(|&&(r, c, _)| r != c).map(|&(r, c, _)| (r, c));
        Graph::from_edges(a.dim(), edges).expect("entries are in range by construction")
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.adj.len() {
            return Err(Error::Config(format!(
                "{} coordinates for {} vertices",
                coords.len(),
                self.adj.len()
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub dofs: Vec<usize>,
}

/// Rooted tree of dof clusters. Leaves sit at level 1 and every parent
/// sits one level above its highest child; the root is at level `levels()`.
/// Couplings are only allowed between a cluster and its ancestors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparatorTree {
    clusters: Vec<Cluster>,
    n_dofs: usize,
    levels: usize,
    root: usize,
    owner: Vec<usize>,
    local: Vec<usize>,
    ancestors: Vec<Vec<usize>>,
    by_level: Vec<Vec<usize>>,
}

impl SeparatorTree {
    /// Assemble a tree from per-cluster dof lists and parent links.
    ///
    /// The dof lists must partition `0..n_dofs` and the parent links must
    /// form a single rooted tree.
    pub fn from_parts(n_dofs: usize, dofs: Vec<Vec<usize>>, parents: Vec<Option<usize>>) -> Result<Self> {
        let m = dofs.len();
        if m == 0 || parents.len() != m {
            return Err(Error::Config("tree needs one parent entry per cluster and at least one cluster".into()));
        }
        let mut owner = vec![usize::MAX; n_dofs];
        let mut local = vec![0; n_dofs];
        let mut sorted = dofs;
        for (c, list) in sorted.iter_mut().enumerate() {
            list.sort_unstable();
            for (k, &d) in list.iter().enumerate() {
                if d >= n_dofs {
                    return Err(Error::Config(format!("dof {d} out of range in cluster {c}")));
                }
                if owner[d] != usize::MAX {
                    return Err(Error::Config(format!("dof {d} assigned to clusters {} and {c}", owner[d])));
                }
                owner[d] = c;
                local[d] = k;
            }
        }
        if let Some(d) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Config(format!("dof {d} not assigned to any cluster")));
        }
        let roots: Vec<usize> = (0..m).filter(|&c| parents[c].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Config(format!("tree must have exactly one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); m];
        for (c, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= m || p == c {
                    return Err(Error::Config(format!("invalid parent {p} for cluster {c}")));
                }
                children[p].push(c);
            }
        }
        // Ancestor chains; a cycle shows up as a chain longer than m.
        let mut ancestors = Vec::with_capacity(m);
        for c in 0..m {
            let mut chain = Vec::new();
            let mut cur = parents[c];
            while let Some(p) = cur {
                chain.push(p);
                if chain.len() > m {
                    return Err(Error::Config("parent links contain a cycle".into()));
                }
                cur = parents[p];
            }
            ancestors.push(chain);
        }
        // Height-based levels, children before parents.
        let mut level = vec![0usize; m];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&c| std::cmp::Reverse(ancestors[c].len()));
        for &c in &order {
            level[c] = 1 + children[c].iter().map(|&k| level[k]).max().unwrap_or(0);
        }
        let levels = level[root];
        let mut by_level = vec![Vec::new(); levels + 1];
        for c in 0..m {
            by_level[level[c]].push(c);
        }
        let clusters = sorted
            .into_iter()
            .enumerate()
            .map(|(id, dofs)| Cluster {
                id,
                level: level[id],
                parent: parents[id],
                children: children[id].clone(),
                dofs,
            })
            .collect();
        Ok(SeparatorTree {
            clusters,
            n_dofs,
            levels,
            root,
            owner,
            local,
            ancestors,
            by_level,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: usize) -> &Cluster {
        &self.clusters[id]
    }

    pub fn size(&self, id: usize) -> usize {
        self.clusters[id].dofs.len()
    }

    pub fn level(&self, id: usize) -> usize {
        self.clusters[id].level
    }

    /// Ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: usize) -> &[usize] {
        &self.ancestors[id]
    }

    pub fn is_ancestor(&self, a: usize, d: usize) -> bool {
        self.ancestors[d].contains(&a)
    }

    /// True when `a == b` or one is an ancestor of the other.
    pub fn related(&self, a: usize, b: usize) -> bool {
        a == b || self.is_ancestor(a, b) || self.is_ancestor(b, a)
    }

    /// Clusters at `level` in ascending id order.
    pub fn at_level(&self, level: usize) -> &[usize] {
        self.by_level.get(level).map_or(&[], Vec::as_slice)
    }

    pub fn owner(&self, dof: usize) -> usize {
        self.owner[dof]
    }

    pub fn local_index(&self, dof: usize) -> usize {
        self.local[dof]
    }

    pub fn dump(&self) -> TreeDump<'_> {
        TreeDump {
            n_dofs: self.n_dofs,
            levels: self.levels,
            root: self.root,
            clusters: &self.clusters,
        }
    }
}

/// Serializable view of a tree.
#[derive(Serialize)]
pub struct TreeDump<'a> {
    pub n_dofs: usize,
    pub levels: usize,
    pub root: usize,
    pub clusters: &'a [Cluster],
}

/// A coupling that joins two unrelated clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub u: usize,
    pub v: usize,
    pub cluster_u: usize,
    pub cluster_v: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub n_dofs: usize,
    pub n_clusters: usize,
    pub levels: usize,
    pub max_leaf_size: usize,
    pub max_separator_size: usize,
    pub violations: Vec<Violation>,
}

impl PartitionReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_partition(tree: &SeparatorTree, graph: &Graph) -> PartitionReport {
    let mut violations = Vec::new();
    for (u, v) in graph.edges() {
        if u >= tree.n_dofs() || v >= tree.n_dofs() {
            continue;
        }
        let (cu, cv) = (tree.owner(u), tree.owner(v));
        if !tree.related(cu, cv) {
            violations.push(Violation {
                u,
                v,
                cluster_u: cu,
                cluster_v: cv,
            });
        }
    }
    let leaf = |c: &&Cluster| c.children.is_empty();
    PartitionReport {
        n_dofs: tree.n_dofs(),
        n_clusters: tree.len(),
        levels: tree.levels(),
        max_leaf_size: tree.clusters().iter().filter(leaf).map(|c| c.dofs.len()).max().unwrap_or(0),
        max_separator_size: tree
            .clusters()
            .iter()
            .filter(|c| !c.children.is_empty())
            .map(|c| c.dofs.len())
            .max()
            .unwrap_or(0),
        violations,
    }
}

/// Chain tree over transport layers: layer 0 is the only leaf and each
/// layer is the parent of the one before it.
pub fn rgf_chain_partition(layers: &[Vec<usize>]) -> Result<SeparatorTree> {
    let n_dofs = layers.iter().map(Vec::len).sum();
    let m = layers.len();
    let parents = (0..m).map(|i| if i + 1 < m { Some(i + 1) } else { None }).collect();
    SeparatorTree::from_parts(n_dofs, layers.to_vec(), parents)
}

/// Nested dissection by recursive median bisection.
///
/// Each region is split at the median of its longer coordinate extent (or
/// of breadth-first distance when the graph has no coordinates); the median
/// class becomes the separator and any remaining cross edges are cut by
/// moving the offending node of the lighter side into it. Atomic groups are
/// never split and never enter a separator. Regions whose free weight fits
/// in `max_leaf` become leaves. Cluster ids follow post-order. Atomic
/// groups are placed by `GroupPlacement::default()`.
pub fn nested_dissection(graph: &Graph, atomic_groups: &[Vec<usize>], max_leaf: usize) -> Result<SeparatorTree> {
    nested_dissection_with(graph, atomic_groups, max_leaf, GroupPlacement::default())
}

/// Where nested dissection puts the atomic groups.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupPlacement {
    /// Inside the regions, assigned to the side holding more neighbours.
    Leaf,
    /// Together in a root cluster above the dissection of the remaining dofs.
    #[default]
    Root,
}

/// Nested dissection with an explicit placement of the atomic groups.
pub fn nested_dissection_with(
    graph: &Graph,
    atomic_groups: &[Vec<usize>],
    max_leaf: usize,
    placement: GroupPlacement,
) -> Result<SeparatorTree> {
    if max_leaf == 0 {
        return Err(Error::Config("max_leaf must be positive".into()));
    }
    let n = graph.len();
    if n == 0 {
        return Err(Error::Config("cannot partition an empty graph".into()));
    }
    let nodes = SuperGraph::new(graph, atomic_groups)?;
    let mut builder = Builder {
        g: &nodes,
        max_leaf,
        dofs: Vec::new(),
        parents: Vec::new(),
        mark: vec![0; nodes.len()],
        stamp: 0,
    };
    match placement {
        GroupPlacement::Root if nodes.atomic.iter().any(|&a| a) => {
            let (groups, free): (Vec<usize>, Vec<usize>) = (0..nodes.len()).partition(|&u| nodes.atomic[u]);
            if free.is_empty() {
                builder.push(&groups, &[]);
            } else {
                let below = builder.build(free);
                builder.push(&groups, &[below]);
            }
        }
        _ => {
            builder.build((0..nodes.len()).collect());
        }
    }
    SeparatorTree::from_parts(n, builder.dofs, builder.parents)
}

struct SuperGraph {
    dofs: Vec<Vec<usize>>,
    atomic: Vec<bool>,
    adj: Vec<Vec<usize>>,
    coords: Option<Vec<[f64; 2]>>,
}

impl SuperGraph {
    fn new(graph: &Graph, groups: &[Vec<usize>]) -> Result<Self> {
        let n = graph.len();
        let mut node_of = vec![usize::MAX; n];
        let mut dofs: Vec<Vec<usize>> = Vec::new();
        let mut atomic = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Config(format!("atomic group {g} is empty")));
            }
            let id = dofs.len();
            let mut list = group.clone();
            list.sort_unstable();
            list.dedup();
            for &d in &list {
                if d >= n {
                    return Err(Error::Config(format!("atomic group {g} has dof {d} outside a graph of {n}")));
                }
                if node_of[d] != usize::MAX {
                    return Err(Error::Config(format!("atomic groups overlap at dof {d}")));
                }
                node_of[d] = id;
            }
            dofs.push(list);
            atomic.push(true);
        }
        for d in 0..n {
            if node_of[d] == usize::MAX {
                node_of[d] = dofs.len();
                dofs.push(vec![d]);
                atomic.push(false);
            }
        }
        // Order nodes by their smallest dof so that ties break by global index.
        let mut order: Vec<usize> = (0..dofs.len()).collect();
        order.sort_by_key(|&k| dofs[k][0]);
        let mut rank = vec![0; dofs.len()];
        for (r, &k) in order.iter().enumerate() {
            rank[k] = r;
        }
        let dofs: Vec<Vec<usize>> = order.iter().map(|&k| dofs[k].clone()).collect();
        let atomic: Vec<bool> = order.iter().map(|&k| atomic[k]).collect();
        for d in node_of.iter_mut() {
            *d = rank[*d];
        }
        let mut adj = vec![Vec::new(); dofs.len()];
        for (u, list) in dofs.iter().enumerate() {
            for &d in list {
                for &e in graph.neighbors(d) {
                    let v = node_of[e];
                    if v != u {
                        adj[u].push(v);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let coords = graph.coords().map(|c| {
            dofs.iter()
                .map(|list| {
                    let k = list.len() as f64;
                    let x = list.iter().map(|&d| c[d][0]).sum::<f64>() / k;
                    let y = list.iter().map(|&d| c[d][1]).sum::<f64>() / k;
                    [x, y]
                })
                .collect()
        });
        Ok(SuperGraph {
            dofs,
            atomic,
            adj,
            coords,
        })
    }

    fn len(&self) -> usize {
        self.dofs.len()
    }

    fn weight(&self, u: usize) -> usize {
        self.dofs[u].len()
    }
}

struct Builder<'a> {
    g: &'a SuperGraph,
    max_leaf: usize,
    dofs: Vec<Vec<usize>>,
    parents: Vec<Option<usize>>,
    mark: Vec<u32>,
    stamp: u32,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Sep,
    Right,
}

impl Builder<'_> {
    fn push(&mut self, nodes: &[usize], children: &[usize]) -> usize {
        let id = self.dofs.len();
        let mut list: Vec<usize> = nodes.iter().flat_map(|&u| self.g.dofs[u].iter().copied()).collect();
        list.sort_unstable();
        self.dofs.push(list);
        self.parents.push(None);
        for &c in children {
            self.parents[c] = Some(id);
        }
        id
    }

    fn build(&mut self, region: Vec<usize>) -> usize {
        let g = self.g;
        let atomic: Vec<usize> = region.iter().copied().filter(|&u| g.atomic[u]).collect();
        let weight: usize = region.iter().map(|&u| g.weight(u)).sum();
        let free_weight: usize = region.iter().filter(|&&u| !g.atomic[u]).map(|&u| g.weight(u)).sum();
        let is_leaf = region.len() <= 1 || weight <= self.max_leaf || (atomic.len() <= 1 && free_weight <= self.max_leaf);
        if is_leaf {
            return self.push(&region, &[]);
        }
        let Some((left, sep, right)) = self.split(&region) else {
            return self.push(&region, &[]);
        };
        let mut children = Vec::new();
        if !left.is_empty() {
            children.push(self.build(left));
        }
        if !right.is_empty() {
            children.push(self.build(right));
        }
        self.push(&sep, &children)
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    fn components(&mut self, region: &[usize]) -> Vec<Vec<usize>> {
        let stamp = self.next_stamp();
        for &u in region {
            self.mark[u] = stamp;
        }
        let seen = self.next_stamp();
        let mut comps = Vec::new();
        for &start in region {
            if self.mark[start] != stamp {
                continue;
            }
            self.mark[start] = seen;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.g.adj[u] {
                    if self.mark[v] == stamp {
                        self.mark[v] = seen;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Breadth-first distances inside the region from a pseudo-peripheral node.
    fn level_keys(&mut self, region: &[usize]) -> Vec<f64> {
        let stamp = self.next_stamp();
        for &u in region {
            self.mark[u] = stamp;
        }
        let pos: std::collections::HashMap<usize, usize> = region.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let bfs = |start: usize, mark: &Vec<u32>| -> Vec<usize> {
            let mut dist = vec![usize::MAX; region.len()];
            dist[pos[&start]] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let du = dist[pos[&u]];
                for &v in &self.g.adj[u] {
                    if mark[v] == stamp && dist[pos[&v]] == usize::MAX {
                        dist[pos[&v]] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
            dist
        };
        let first = bfs(region[0], &self.mark);
        let far = (0..region.len()).max_by_key(|&i| (first[i], std::cmp::Reverse(i))).unwrap_or(0);
        bfs(region[far], &self.mark).into_iter().map(|d| d as f64).collect()
    }

    fn split(&mut self, region: &[usize]) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let g = self.g;
        let comps = self.components(region);
        if comps.len() > 1 {
            // Disconnected: balance whole components between the two sides.
            let mut order: Vec<usize> = (0..comps.len()).collect();
            let w = |c: &Vec<usize>| c.iter().map(|&u| g.weight(u)).sum::<usize>();
            order.sort_by_key(|&k| (std::cmp::Reverse(w(&comps[k])), comps[k][0]));
            let (mut left, mut right) = (Vec::new(), Vec::new());
            let (mut wl, mut wr) = (0, 0);
            for k in order {
                if wl <= wr {
                    wl += w(&comps[k]);
                    left.extend_from_slice(&comps[k]);
                } else {
                    wr += w(&comps[k]);
                    right.extend_from_slice(&comps[k]);
                }
            }
            left.sort_unstable();
            right.sort_unstable();
            return Some((left, Vec::new(), right));
        }
        if let Some(coords) = &g.coords {
            let free: Vec<usize> = region.iter().copied().filter(|&u| !g.atomic[u]).collect();
            let basis = if free.is_empty() { region } else { &free[..] };
            let extent = |axis: usize| {
                let lo = basis.iter().map(|&u| coords[u][axis]).fold(f64::INFINITY, f64::min);
                let hi = basis.iter().map(|&u| coords[u][axis]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            };
            let (ex, ey) = (extent(0), extent(1));
            let axis = if ey >= ex { 1 } else { 0 };
            let keys: Vec<f64> = region.iter().map(|&u| coords[u][axis]).collect();
            if let Some(split) = self.split_by_keys(region, &keys, ex.max(ey)) {
                return Some(split);
            }
        }
        let keys = self.level_keys(region);
        let span = keys.iter().copied().fold(0.0, f64::max);
        self.split_by_keys(region, &keys, span)
    }

    fn split_by_keys(&mut self, region: &[usize], keys: &[f64], span: f64) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let g = self.g;
        let tol = 1e-9 * span.max(1.0);
        let mut free: Vec<usize> = (0..region.len()).filter(|&i| !g.atomic[region[i]]).collect();
        if free.is_empty() {
            return None;
        }
        free.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(region[a].cmp(&region[b])));
        let total: usize = free.iter().map(|&i| g.weight(region[i])).sum();
        let mut acc = 0;
        let mut median = free[free.len() - 1];
        for &i in &free {
            acc += g.weight(region[i]);
            if 2 * acc >= total {
                median = i;
                break;
            }
        }
        let km = keys[median];

        let mut assign: Vec<(usize, Side)> = Vec::with_capacity(region.len());
        for &i in &free {
            let s = if (keys[i] - km).abs() <= tol {
                Side::Sep
            } else if keys[i] < km {
                Side::Left
            } else {
                Side::Right
            };
            assign.push((region[i], s));
        }
        let stamp = self.next_stamp();
        let mut side_of: std::collections::HashMap<usize, Side> = assign.iter().copied().collect();
        for &u in region {
            self.mark[u] = stamp;
        }
        // Atomic nodes join the side holding more of their neighbours.
        for &u in region.iter().filter(|&&u| g.atomic[u]) {
            let (mut nl, mut nr) = (0, 0);
            for &v in &g.adj[u] {
                match side_of.get(&v) {
                    Some(Side::Left) => nl += 1,
                    Some(Side::Right) => nr += 1,
                    _ => {}
                }
            }
            side_of.insert(u, if nr > nl { Side::Right } else { Side::Left });
        }
        let weight_of = |s: Side, side_of: &std::collections::HashMap<usize, Side>| -> usize {
            region.iter().filter(|u| side_of[u] == s).map(|&u| g.weight(u)).sum()
        };
        let (wl, wr) = (weight_of(Side::Left, &side_of), weight_of(Side::Right, &side_of));
        let smaller = if wl <= wr { Side::Left } else { Side::Right };
        // Cut the remaining cross edges.
        let mut ordered: Vec<usize> = region.to_vec();
        ordered.sort_unstable();
        for &u in &ordered {
            if side_of[&u] != Side::Left {
                continue;
            }
            for &v in &g.adj[u] {
                if self.mark[v] != stamp || side_of[&v] != Side::Right || side_of[&u] != Side::Left {
                    continue;
                }
                let victim = if g.atomic[u] {
                    v
                } else if g.atomic[v] || smaller == Side::Left {
                    u
                } else {
                    v
                };
                if g.atomic[victim] {
                    // Two atomic groups coupled across the cut; keep them together.
                    side_of.insert(v, Side::Left);
                } else {
                    side_of.insert(victim, Side::Sep);
                }
            }
        }
        let collect = |s: Side| -> Vec<usize> { ordered.iter().copied().filter(|u| side_of[u] == s).collect() };
        let (left, sep, right) = (collect(Side::Left), collect(Side::Sep), collect(Side::Right));
        if left.is_empty() && right.is_empty() {
            return None;
        }
        Some((left, sep, right))
    }
}

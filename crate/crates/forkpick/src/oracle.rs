//! Brute-force ground truth: exhaustive enumeration of trees and networks,
//! direct hybrid-number computation by increasing reticulation budget, and
//! the balanced-block tree-family generator.

use crate::display::{self, DisplayMap};
use crate::forkops::{self, ForkOp, ForkPickingSequence};
use crate::model::{Dag, ModelError, NodeId, PhyloNetwork, PhyloTree, TreeSpec};
use crate::netcheck;
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("leaf count {0} outside the supported range {1}..={2}")]
    SizeOutOfRange(usize, usize, usize),
    #[error("reticulation budget {0} exceeds the supported maximum {1}")]
    BudgetOutOfRange(usize, usize),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("trees have different leaf sets")]
    LeafSetMismatch,
    #[error("the balanced family needs m >= 3, got {0}")]
    FamilyTooSmall(u32),
}

/// Network class filter for enumeration and hybrid-number search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetClass {
    General,
    TreeChild,
    TemporalTreeChild,
}

impl NetClass {
    pub fn admits(&self, net: &PhyloNetwork) -> bool {
        match self {
            NetClass::General => true,
            NetClass::TreeChild => netcheck::is_tree_child(net),
            NetClass::TemporalTreeChild => {
                netcheck::is_tree_child(net) && netcheck::temporal_labelling(net).is_some()
            }
        }
    }
}

pub const TREE_ENUM_MIN: usize = 2;
pub const TREE_ENUM_MAX: usize = 7;
pub const NET_ENUM_MAX_LEAVES: usize = 6;
pub const NET_ENUM_MAX_RETICULATIONS: usize = 2;

/// Every tree topology on the given labels exactly once, by leaf insertion
/// into every edge and above the root. The count is the double factorial
/// (2n-3)!!.
pub fn enumerate_trees(labels: &[String]) -> Result<Vec<PhyloTree>, OracleError> {
    let n = labels.len();
    if !(TREE_ENUM_MIN..=TREE_ENUM_MAX).contains(&n) {
        return Err(OracleError::SizeOutOfRange(n, TREE_ENUM_MIN, TREE_ENUM_MAX));
    }
    let mut labels = labels.to_vec();
    labels.sort();
    let mut specs = vec![TreeSpec::node(
        TreeSpec::Leaf(labels[0].clone()),
        TreeSpec::Leaf(labels[1].clone()),
    )];
    for lab in &labels[2..] {
        let mut next = Vec::new();
        for spec in &specs {
            for pos in 0..=spec_edge_count(spec) {
                let mut idx = 0;
                let grown = insert_at(spec, lab, pos, &mut idx);
                next.push(grown);
            }
        }
        specs = next;
    }
    specs
        .into_iter()
        .map(|s| PhyloTree::from_spec(&s).map_err(OracleError::from))
        .collect()
}

fn spec_edge_count(spec: &TreeSpec) -> usize {
    match spec {
        TreeSpec::Leaf(_) => 0,
        TreeSpec::Node(a, b) => 2 + spec_edge_count(a) + spec_edge_count(b),
    }
}

/// Insert a new leaf: position 0 grafts above the current vertex (for the
/// root call this creates a new root); positions within subtrees subdivide
/// the corresponding edge.
fn insert_at(spec: &TreeSpec, lab: &str, pos: usize, idx: &mut usize) -> TreeSpec {
    if pos == *idx {
        return TreeSpec::node(spec.clone(), TreeSpec::Leaf(lab.to_string()));
    }
    match spec {
        TreeSpec::Leaf(_) => spec.clone(),
        TreeSpec::Node(a, b) => {
            *idx += 1;
            let na = insert_at(a, lab, pos, idx);
            *idx += 1;
            let nb = insert_at(b, lab, pos, idx);
            TreeSpec::node(na, nb)
        }
    }
}

/// A tree or partial network planted below a phantom super-root, with arc
/// insertions not yet validated. Arcs may temporarily create parallel edges
/// or cycles; candidates are checked only when all arcs are in place, which
/// lets later arcs straddle earlier ones along a common path.
#[derive(Clone)]
struct Planted {
    labels: Vec<Option<String>>,
    edges: Vec<(usize, usize)>,
    top: usize,
}

impl Planted {
    fn from_tree(tree: &PhyloTree) -> Planted {
        let net = PhyloNetwork::from_tree(tree);
        let mut labels: Vec<Option<String>> = (0..net.node_count())
            .map(|v| net.label(v).map(|s| s.to_string()))
            .collect();
        let mut edges = net.edges();
        labels.push(None);
        let top = labels.len() - 1;
        edges.push((top, net.root()));
        Planted { labels, edges, top }
    }

    /// Subdivide the source and target edges and add the reticulation arc.
    /// When both indices name the same edge the source point is placed above
    /// the target point.
    fn insert_arc(&self, src: usize, tgt: usize) -> Planted {
        let mut p = self.clone();
        p.labels.push(None);
        let s = p.labels.len() - 1;
        p.labels.push(None);
        let t = p.labels.len() - 1;
        if src == tgt {
            let (u, v) = p.edges[src];
            p.edges[src] = (u, s);
            p.edges.push((s, t));
            p.edges.push((t, v));
        } else {
            let (u1, v1) = p.edges[src];
            let (u2, v2) = p.edges[tgt];
            p.edges[src] = (u1, s);
            p.edges.push((s, v1));
            p.edges[tgt] = (u2, t);
            p.edges.push((t, v2));
        }
        p.edges.push((s, t));
        p
    }

    /// Drop the phantom super-root and validate.
    fn finish(&self) -> Option<PhyloNetwork> {
        let mut dag = Dag::new();
        let mut remap: Vec<Option<NodeId>> = vec![None; self.labels.len()];
        for v in 0..self.labels.len() {
            if v != self.top {
                remap[v] = Some(dag.add_node(self.labels[v].clone()));
            }
        }
        for &(u, v) in &self.edges {
            if u == self.top {
                continue;
            }
            dag.add_edge(remap[u].unwrap(), remap[v].unwrap());
        }
        PhyloNetwork::from_dag(dag).ok()
    }

    /// Expand all arc placements to the given depth, feeding finished valid
    /// candidates to the callback; a `true` return stops the expansion.
    fn expand(&self, depth: usize, f: &mut impl FnMut(PhyloNetwork) -> bool) -> bool {
        if depth == 0 {
            if let Some(net) = self.finish() {
                return f(net);
            }
            return false;
        }
        let m = self.edges.len();
        for src in 0..m {
            for tgt in 0..m {
                if self.insert_arc(src, tgt).expand(depth - 1, f) {
                    return true;
                }
            }
        }
        false
    }
}

/// Every network on the labels with exactly `h` reticulations in the class,
/// one representative per isomorphism class. Candidates are generated by
/// planting each tree below a phantom super-root and inserting `h`
/// reticulation arcs between subdivision points (validation deferred until
/// all arcs are placed), then deduplicated by canonical form.
pub fn enumerate_networks(
    labels: &[String],
    h: usize,
    class: NetClass,
) -> Result<Vec<PhyloNetwork>, OracleError> {
    if labels.len() > NET_ENUM_MAX_LEAVES {
        return Err(OracleError::SizeOutOfRange(labels.len(), TREE_ENUM_MIN, NET_ENUM_MAX_LEAVES));
    }
    if h > NET_ENUM_MAX_RETICULATIONS {
        return Err(OracleError::BudgetOutOfRange(h, NET_ENUM_MAX_RETICULATIONS));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for tree in enumerate_trees(labels)? {
        Planted::from_tree(&tree).expand(h, &mut |net| {
            if net.reticulation_count() == h && seen.insert(net.canonical_form()) {
                out.push(net);
            }
            false
        });
    }
    out.sort_by_cached_key(|n| n.canonical_form());
    Ok(out.into_iter().filter(|n| class.admits(n)).collect())
}

/// What a hybrid-number certificate claims and witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridKind {
    WeakHybrid,
    RigidHybrid,
    TemporalHybrid,
}

impl HybridKind {
    pub fn class(&self) -> NetClass {
        match self {
            HybridKind::WeakHybrid => NetClass::General,
            HybridKind::RigidHybrid | HybridKind::TemporalHybrid => NetClass::TemporalTreeChild,
        }
    }
}

/// A computed hybrid number with a machine-checkable witness.
#[derive(Debug, Clone)]
pub struct HybridCertificate {
    pub kind: HybridKind,
    /// The exact value, or None when every network within the cap fails.
    pub value: Option<usize>,
    pub cap: usize,
    pub witness: Option<HybridWitness>,
}

#[derive(Debug, Clone)]
pub struct HybridWitness {
    pub network: PhyloNetwork,
    pub temporal: Option<Vec<u64>>,
    pub maps: (DisplayMap, DisplayMap),
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridCertificateJson {
    pub kind: HybridKind,
    pub value: serde_json::Value,
    pub cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_network: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_temporal: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_map_first: Option<crate::display::DisplayMapJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_map_second: Option<crate::display::DisplayMapJson>,
}

impl HybridCertificate {
    pub fn to_json(&self, t1: &PhyloTree, t2: &PhyloTree) -> HybridCertificateJson {
        HybridCertificateJson {
            kind: self.kind,
            value: match self.value {
                Some(v) => serde_json::json!(v),
                None => serde_json::json!(format!("> {}", self.cap)),
            },
            cap: self.cap,
            witness_network: self.witness.as_ref().map(|w| w.network.canonical_form()),
            witness_temporal: self.witness.as_ref().and_then(|w| w.temporal.clone()),
            witness_map_first: self.witness.as_ref().map(|w| w.maps.0.to_json(t1)),
            witness_map_second: self.witness.as_ref().map(|w| w.maps.1.to_json(t2)),
        }
    }

    /// Re-verify the witness under the display and class predicates.
    pub fn verify(&self, t1: &PhyloTree, t2: &PhyloTree) -> bool {
        match (&self.value, &self.witness) {
            (Some(v), Some(w)) => {
                if w.network.reticulation_count() != *v || !self.kind.class().admits(&w.network) {
                    return false;
                }
                let mode_ok = match self.kind {
                    HybridKind::WeakHybrid => {
                        display::check_display_map(t1, &w.network, &w.maps.0).unwrap_or(false)
                            && display::check_display_map(t2, &w.network, &w.maps.1).unwrap_or(false)
                    }
                    HybridKind::RigidHybrid => {
                        let ok1 = display::check_display_map(t1, &w.network, &w.maps.0).unwrap_or(false);
                        let ok2 = display::check_display_map(t2, &w.network, &w.maps.1).unwrap_or(false);
                        let gamma = display::gamma_pair(&w.network, &w.maps.0, &w.maps.1);
                        let caps = display::gamma_caps(&w.network);
                        ok1 && ok2 && gamma.iter().zip(caps.iter()).all(|(g, c)| g <= c)
                    }
                    HybridKind::TemporalHybrid => {
                        display::displays(t1, &w.network).unwrap_or(false)
                            && display::displays(t2, &w.network).unwrap_or(false)
                    }
                };
                mode_ok
            }
            (None, None) => true,
            _ => false,
        }
    }
}

fn weak_displays_both(net: &PhyloNetwork, t1: &PhyloTree, t2: &PhyloTree) -> Option<(DisplayMap, DisplayMap)> {
    if !display::weakly_displays(t1, net).unwrap_or(false)
        || !display::weakly_displays(t2, net).unwrap_or(false)
    {
        return None;
    }
    let m1 = display::find_display_maps(t1, net, 1).ok()?.maps.into_iter().next()?;
    let m2 = display::find_display_maps(t2, net, 1).ok()?.maps.into_iter().next()?;
    Some((m1, m2))
}

/// Smallest reticulation count at most `cap` admitting a witness network in
/// the quantity's class and display mode, by exhaustive enumeration with
/// increasing budget. Lower levels are refuted exhaustively; the witness
/// level stops at the first hit. A `hint` network that verifies at its own
/// reticulation count short-circuits the witness scan of that level (the
/// levels below it are still refuted exhaustively, so the value is exact).
pub fn brute_hybrid(
    t1: &PhyloTree,
    t2: &PhyloTree,
    kind: HybridKind,
    cap: usize,
    jobs: usize,
    hint: Option<&PhyloNetwork>,
) -> Result<HybridCertificate, OracleError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(OracleError::LeafSetMismatch);
    }
    let labels = t1.leaf_labels();
    let hint = hint.filter(|n| {
        n.leaf_label_set() == t1.leaf_label_set()
            && n.reticulation_count() <= cap
            && kind.class().admits(n)
    });
    let trees = enumerate_trees(&labels)?;
    for h in 0..=cap {
        if let Some(n) = hint.filter(|n| n.reticulation_count() == h) {
            if let Some(w) = test_network(n, t1, t2, kind) {
                return Ok(HybridCertificate { kind, value: Some(h), cap, witness: Some(w) });
            }
        }
        if let Some(w) = level_scan(&trees, h, t1, t2, kind, jobs) {
            return Ok(HybridCertificate { kind, value: Some(h), cap, witness: Some(w) });
        }
    }
    Ok(HybridCertificate {
        kind,
        value: None,
        cap,
        witness: None,
    })
}

/// Scan every network with exactly `h` reticulations, generating candidates
/// lazily from planted trees with on-the-fly deduplication and stopping at
/// the first witness.
fn level_scan(
    trees: &[PhyloTree],
    h: usize,
    t1: &PhyloTree,
    t2: &PhyloTree,
    kind: HybridKind,
    jobs: usize,
) -> Option<HybridWitness> {
    if jobs <= 1 || trees.len() < 8 {
        let mut seen = BTreeSet::new();
        let mut hit = None;
        for tree in trees {
            Planted::from_tree(tree).expand(h, &mut |net| {
                if net.reticulation_count() != h || !seen.insert(net.canonical_form()) {
                    return false;
                }
                if let Some(w) = test_network(&net, t1, t2, kind) {
                    hit = Some(w);
                    return true;
                }
                false
            });
            if hit.is_some() {
                return hit;
            }
        }
        return None;
    }
    // parallel sweep over base trees: the earliest base index wins, so the
    // outcome does not depend on the schedule
    let seen = std::sync::Mutex::new(BTreeSet::new());
    let hit = std::sync::Mutex::new(None::<(usize, HybridWitness)>);
    std::thread::scope(|scope| {
        let chunk = trees.len().div_ceil(jobs).max(1);
        for (ci, part) in trees.chunks(chunk).enumerate() {
            let seen = &seen;
            let hit = &hit;
            scope.spawn(move || {
                for (i, tree) in part.iter().enumerate() {
                    let idx = ci * chunk + i;
                    {
                        let best = hit.lock().unwrap();
                        if best.as_ref().is_some_and(|(bi, _)| *bi < idx) {
                            return;
                        }
                    }
                    Planted::from_tree(tree).expand(h, &mut |net| {
                        if net.reticulation_count() != h
                            || !seen.lock().unwrap().insert(net.canonical_form())
                        {
                            return false;
                        }
                        if let Some(w) = test_network(&net, t1, t2, kind) {
                            let mut best = hit.lock().unwrap();
                            if best.as_ref().is_none_or(|(bi, _)| idx < *bi) {
                                *best = Some((idx, w));
                            }
                            return true;
                        }
                        false
                    });
                }
            });
        }
    });
    hit.into_inner().unwrap().map(|(_, w)| w)
}

fn test_network(
    net: &PhyloNetwork,
    t1: &PhyloTree,
    t2: &PhyloTree,
    kind: HybridKind,
) -> Option<HybridWitness> {
    if !kind.class().admits(net) {
        return None;
    }
    let maps = match kind {
        HybridKind::WeakHybrid => weak_displays_both(net, t1, t2)?,
        HybridKind::RigidHybrid => display::rigidly_displays(net, t1, t2).ok()??,
        HybridKind::TemporalHybrid => {
            if !display::displays(t1, net).unwrap_or(false)
                || !display::displays(t2, net).unwrap_or(false)
            {
                return None;
            }
            weak_displays_both(net, t1, t2)?
        }
    };
    Some(HybridWitness {
        network: net.clone(),
        temporal: netcheck::temporal_labelling(net),
        maps,
    })
}

/// Scan a fixed list of networks for the first witness, in list order.
pub fn scan_networks(
    nets: &[PhyloNetwork],
    t1: &PhyloTree,
    t2: &PhyloTree,
    kind: HybridKind,
    jobs: usize,
) -> Option<HybridWitness> {
    let check = |net: &PhyloNetwork| -> Option<HybridWitness> { test_network(net, t1, t2, kind) };
    if jobs <= 1 || nets.len() < 32 {
        return nets.iter().find_map(check);
    }
    // chunked scan: the earliest hit in enumeration order wins, so results
    // do not depend on the schedule
    let hit = std::sync::Mutex::new(None::<(usize, HybridWitness)>);
    std::thread::scope(|scope| {
        let chunk = nets.len().div_ceil(jobs);
        for (ci, part) in nets.chunks(chunk).enumerate() {
            let hit = &hit;
            let check = &check;
            scope.spawn(move || {
                for (i, net) in part.iter().enumerate() {
                    let idx = ci * chunk + i;
                    {
                        let best = hit.lock().unwrap();
                        if best.as_ref().is_some_and(|(bi, _)| *bi < idx) {
                            return;
                        }
                    }
                    if let Some(w) = check(net) {
                        let mut best = hit.lock().unwrap();
                        if best.as_ref().is_none_or(|(bi, _)| idx < *bi) {
                            *best = Some((idx, w));
                        }
                        return;
                    }
                }
            });
        }
    });
    hit.into_inner().unwrap().map(|(_, w)| w)
}

/// Independent cross-check generator: enumerate every labelled DAG with the
/// degree profile of a phylogenetic network on the given leaves with exactly
/// `h` reticulations, by assigning parents to typed vertices, and return the
/// canonical forms of the valid networks. Exponential; for tiny sizes only.
pub fn degree_constrained_dags(labels: &[String], h: usize) -> BTreeSet<String> {
    // vertex layout: root, t tree vertices, h reticulations, leaves
    let n = labels.len();
    let t = n + h - 2;
    let root = 0usize;
    let tree0 = 1usize;
    let ret0 = tree0 + t;
    let leaf0 = ret0 + h;
    let total = leaf0 + n;
    let indeg_needed: Vec<usize> = (0..total)
        .map(|v| {
            if v == root {
                0
            } else if v < ret0 || v >= leaf0 {
                1
            } else {
                2
            }
        })
        .collect();
    let mut out = BTreeSet::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); total];
    // candidate parents: root and tree vertices (outdegree 2 each) and
    // reticulations (outdegree 1)
    fn outdeg_cap(v: usize, ret0: usize, leaf0: usize) -> usize {
        if v < ret0 {
            2
        } else if v < leaf0 {
            1
        } else {
            0
        }
    }
    fn rec(
        v: usize,
        total: usize,
        ret0: usize,
        leaf0: usize,
        indeg_needed: &[usize],
        parents: &mut Vec<Vec<usize>>,
        outdeg_used: &mut Vec<usize>,
        labels: &[String],
        out: &mut BTreeSet<String>,
    ) {
        if v == total {
            // all parents assigned; build and validate
            let mut dag = Dag::new();
            for u in 0..total {
                let lab = if u >= leaf0 {
                    Some(labels[u - leaf0].clone())
                } else {
                    None
                };
                dag.add_node(lab);
            }
            for (u, ps) in parents.iter().enumerate() {
                for &p in ps {
                    dag.add_edge(p, u);
                }
            }
            if netcheck::validate_raw(&dag).is_none() {
                if let Ok(net) = PhyloNetwork::from_dag(dag) {
                    out.insert(net.canonical_form());
                }
            }
            return;
        }
        let need = indeg_needed[v];
        if need == 0 {
            rec(v + 1, total, ret0, leaf0, indeg_needed, parents, outdeg_used, labels, out);
            return;
        }
        // choose `need` distinct parents among earlier-typed vertices with
        // remaining outdegree; symmetry among same-type unlabelled vertices
        // is collapsed later by canonical deduplication
        let cands: Vec<usize> = (0..total)
            .filter(|&p| p != v && outdeg_used[p] < outdeg_cap(p, ret0, leaf0))
            .collect();
        let choose = |sel: Vec<usize>,
                          parents: &mut Vec<Vec<usize>>,
                          outdeg_used: &mut Vec<usize>,
                          out: &mut BTreeSet<String>| {
            for &p in &sel {
                outdeg_used[p] += 1;
            }
            parents[v] = sel.clone();
            rec(v + 1, total, ret0, leaf0, indeg_needed, parents, outdeg_used, labels, out);
            parents[v].clear();
            for &p in &sel {
                outdeg_used[p] -= 1;
            }
        };
        if need == 1 {
            for &p in &cands {
                choose(vec![p], parents, outdeg_used, out);
            }
        } else {
            for i in 0..cands.len() {
                for j in (i + 1)..cands.len() {
                    choose(vec![cands[i], cands[j]], parents, outdeg_used, out);
                }
            }
        }
    }
    let mut outdeg_used = vec![0usize; total];
    rec(
        0,
        total,
        ret0,
        leaf0,
        &indeg_needed,
        &mut parents,
        &mut outdeg_used,
        labels,
        &mut out,
    );
    out
}

/// Naive reference solver: enumerate every sequence of applicable operations
/// and keep the valid fork-picking sequences, returning the minimum weight.
/// Exponential; intended as the independent oracle for the branch-and-bound
/// solver on small leaf sets.
pub fn brute_min_fork_weight(t1: &PhyloTree, t2: &PhyloTree) -> Option<u32> {
    fn rec(cur1: &PhyloTree, cur2: &PhyloTree, ops: &mut Vec<ForkOp>, best: &mut Option<u32>, t1: &PhyloTree, t2: &PhyloTree) {
        if cur1.is_single_leaf() {
            if let Ok(blocks) = ForkPickingSequence::decompose(ops) {
                let seq = ForkPickingSequence { ops: ops.clone(), blocks };
                if let Ok(diag) =
                    forkops::check_fork_picking_sequence(t1, t2, &seq, forkops::LcaScope::BlockStart)
                {
                    if diag.ok {
                        let w = seq.weight();
                        if best.is_none_or(|b| w < b) {
                            *best = Some(w);
                        }
                    }
                }
            }
            return;
        }
        if let Some(b) = *best {
            let so_far = ops.iter().filter(|o| o.kind == 1).count() as u32;
            if so_far >= b {
                return;
            }
        }
        for op in forkops::applicable_ops(cur1, cur2).expect("leaf sets agree") {
            let (n1, n2) = forkops::apply_op(cur1, cur2, &op).expect("applicable");
            ops.push(op);
            rec(&n1, &n2, ops, best, t1, t2);
            ops.pop();
        }
    }
    let mut best = None;
    let mut ops = Vec::new();
    rec(t1, t2, &mut ops, &mut best, t1, t2);
    best
}

// ---------------------------------------------------------------------------
// The balanced-block family
// ---------------------------------------------------------------------------

/// Output of the family generator: the two trees, the one-reticulation
/// temporal tree-child network that rigidly displays them, and a weight-1
/// fork-picking witness.
#[derive(Debug, Clone)]
pub struct BigFamily {
    pub t1: PhyloTree,
    pub t2: PhyloTree,
    pub network: PhyloNetwork,
    pub witness: ForkPickingSequence,
}

fn balanced(labels: &[String]) -> TreeSpec {
    if labels.len() == 1 {
        TreeSpec::Leaf(labels[0].clone())
    } else {
        let mid = labels.len() / 2;
        TreeSpec::node(balanced(&labels[..mid]), balanced(&labels[mid..]))
    }
}

/// Block-label table for the first tree: block j of each half takes the
/// odd (respectively even) positions of two consecutive blocks of the
/// balanced reference tree.
fn family_half_labels(m: u32, even: bool) -> Vec<String> {
    let total = 1usize << m;
    (1..=total)
        .filter(|i| (i % 2 == 0) == even)
        .map(|i| i.to_string())
        .collect()
}

/// Trees T and T' on {1, ..., 2^m + 2}: T' hangs the fully balanced tree on
/// 2^m leaves (blocks of four labelled consecutively) together with the two
/// extra leaves; T is built from two balanced halves whose size-4 blocks
/// interleave the parities, so that consecutive labels land on opposite
/// sides of the root.
pub fn gen_balanced_family(m: u32) -> Result<BigFamily, OracleError> {
    if m < 3 {
        return Err(OracleError::FamilyTooSmall(m));
    }
    let total = 1usize << m;
    let extra1 = (total + 1).to_string();
    let extra2 = (total + 2).to_string();

    let reference: Vec<String> = (1..=total).map(|i| i.to_string()).collect();
    let t3 = balanced(&reference);
    let spec2 = TreeSpec::node(
        TreeSpec::node(t3.clone(), TreeSpec::Leaf(extra1.clone())),
        TreeSpec::Leaf(extra2.clone()),
    );
    let odd = balanced(&family_half_labels(m, false));
    let even = balanced(&family_half_labels(m, true));
    let spec1 = TreeSpec::node(
        TreeSpec::node(odd, TreeSpec::Leaf(extra1.clone())),
        TreeSpec::node(even, TreeSpec::Leaf(extra2.clone())),
    );
    let t1 = PhyloTree::from_spec(&spec1)?;
    let t2 = PhyloTree::from_spec(&spec2)?;

    // network: root( u1(extra1, R), u2(extra2, R) ), R -> balanced core
    let mut dag = Dag::new();
    let root = dag.add_node(None);
    let u1 = dag.add_node(None);
    let u2 = dag.add_node(None);
    let l1 = dag.add_node(Some(extra1.clone()));
    let l2 = dag.add_node(Some(extra2.clone()));
    let r = dag.add_node(None);
    dag.add_edge(root, u1);
    dag.add_edge(root, u2);
    dag.add_edge(u1, l1);
    dag.add_edge(u2, l2);
    dag.add_edge(u1, r);
    dag.add_edge(u2, r);
    let core = add_spec(&mut dag, &t3);
    dag.add_edge(r, core);
    let network = PhyloNetwork::from_dag(dag)
        .map_err(OracleError::Model)?;

    let witness = family_witness(m, &t1, &t2)?;
    Ok(BigFamily { t1, t2, network, witness })
}

fn add_spec(dag: &mut Dag, spec: &TreeSpec) -> usize {
    match spec {
        TreeSpec::Leaf(l) => dag.add_node(Some(l.clone())),
        TreeSpec::Node(a, b) => {
            let na = add_spec(dag, a);
            let nb = add_spec(dag, b);
            let v = dag.add_node(None);
            dag.add_edge(v, na);
            dag.add_edge(v, nb);
            v
        }
    }
}

/// The weight-1 witness: peel the balanced core leaf by leaf (kind-3 then
/// kind-2 per level), close with the kind-1 operation on the surviving pair,
/// and finish with the one remaining kind-0 operation.
fn family_witness(m: u32, t1: &PhyloTree, t2: &PhyloTree) -> Result<ForkPickingSequence, OracleError> {
    let total = 1usize << m;
    let extra1 = (total + 1).to_string();
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut ops: Vec<ForkOp> = Vec::new();

    // peel order: recursively reduce each balanced level; returns the
    // surviving pair (left survivor, right survivor) of a subrange
    fn peel(
        lo: usize,
        hi: usize,
        cur1: &mut PhyloTree,
        cur2: &mut PhyloTree,
        ops: &mut Vec<ForkOp>,
    ) -> (usize, usize) {
        let width = hi - lo + 1;
        if width == 4 {
            // block {lo..lo+3}: remove lo (kind 3) then lo+3 (kind 2)
            push_peel_op(cur1, cur2, lo, ops);
            push_peel_op(cur1, cur2, lo + 3, ops);
            return (lo + 1, lo + 2);
        }
        let mid = lo + width / 2;
        let (a, b) = peel(lo, mid - 1, cur1, cur2, ops);
        let (c, d) = peel(mid, hi, cur1, cur2, ops);
        // the two survivor cherries form a balanced four-leaf block
        push_peel_op(cur1, cur2, a, ops);
        push_peel_op(cur1, cur2, d, ops);
        (b, c)
    }

    fn push_peel_op(cur1: &mut PhyloTree, cur2: &mut PhyloTree, leaf: usize, ops: &mut Vec<ForkOp>) {
        let lab = leaf.to_string();
        let cands = forkops::applicable_ops(cur1, cur2).expect("leaf sets agree");
        let op = cands
            .into_iter()
            .find(|o| o.leaf == lab && matches!(o.kind, 2 | 3) && o.fork_side() == Some(1))
            .unwrap_or_else(|| panic!("no peeling operation for leaf {}", lab));
        let (a, b) = forkops::apply_op(cur1, cur2, &op).expect("applicable");
        *cur1 = a;
        *cur2 = b;
        ops.push(op);
    }

    let (s1, s2) = peel(1, total, &mut cur1, &mut cur2, &mut ops);
    // close with the pair: the tree-1 side survivor is removed by the kind-2
    // against the first extra leaf, the other closes the block
    let (odd_survivor, final_leaf) = if s1 % 2 == 1 { (s1, s2) } else { (s2, s1) };
    push_peel_op(&mut cur1, &mut cur2, odd_survivor, &mut ops);
    let p1 = cur1.cherry_partner(&final_leaf.to_string()).expect("cherry");
    let p2 = cur2.cherry_partner(&final_leaf.to_string()).expect("cherry");
    ops.push(ForkOp {
        kind: 1,
        leaf: final_leaf.to_string(),
        w1: vec![final_leaf.to_string(), p1],
        w2: vec![final_leaf.to_string(), p2],
    });
    let (a, b) = forkops::apply_op(&cur1, &cur2, ops.last().unwrap()).expect("applicable");
    cur1 = a;
    let _ = b;
    // one kind-0 operation on the two extra leaves remains
    let y = cur1.cherry_partner(&extra1).expect("extra leaves form the last cherry");
    ops.push(ForkOp {
        kind: 0,
        leaf: extra1.clone(),
        w1: vec![extra1.clone(), y.clone()],
        w2: vec![extra1, y],
    });
    let blocks = ForkPickingSequence::decompose(&ops).expect("well-formed");
    Ok(ForkPickingSequence { ops, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labs(n: usize) -> Vec<String> {
        (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    }

    #[test]
    fn tree_counts_are_double_factorials() {
        assert_eq!(enumerate_trees(&labs(2)).unwrap().len(), 1);
        assert_eq!(enumerate_trees(&labs(3)).unwrap().len(), 3);
        assert_eq!(enumerate_trees(&labs(4)).unwrap().len(), 15);
        assert_eq!(enumerate_trees(&labs(5)).unwrap().len(), 105);
        // all distinct
        let all = enumerate_trees(&labs(5)).unwrap();
        let forms: BTreeSet<String> = all.iter().map(|t| t.canonical_form()).collect();
        assert_eq!(forms.len(), 105);
    }

    #[test]
    fn network_enumeration_h0_is_trees() {
        let nets = enumerate_networks(&labs(3), 0, NetClass::General).unwrap();
        assert_eq!(nets.len(), 3);
        assert!(nets.iter().all(|n| n.reticulation_count() == 0));
    }

    #[test]
    fn class_filters_nest() {
        let general = enumerate_networks(&labs(3), 1, NetClass::General).unwrap();
        let tc = enumerate_networks(&labs(3), 1, NetClass::TreeChild).unwrap();
        let ttc = enumerate_networks(&labs(3), 1, NetClass::TemporalTreeChild).unwrap();
        let g: BTreeSet<String> = general.iter().map(|n| n.canonical_form()).collect();
        let t: BTreeSet<String> = tc.iter().map(|n| n.canonical_form()).collect();
        let tt: BTreeSet<String> = ttc.iter().map(|n| n.canonical_form()).collect();
        assert!(t.is_subset(&g));
        assert!(tt.is_subset(&t));
        assert!(tt.len() < g.len());
    }

    #[test]
    fn family_generator_shapes() {
        let fam = gen_balanced_family(3).unwrap();
        assert_eq!(fam.t1.leaf_count(), 10);
        assert_eq!(fam.t2.leaf_count(), 10);
        assert!(!fam.t1.isomorphic(&fam.t2).unwrap());
        assert_eq!(fam.network.reticulation_count(), 1);
        assert_eq!(fam.witness.weight(), 1);
    }
}

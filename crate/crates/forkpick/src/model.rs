//! Core immutable representations of leaf-labelled trees and networks plus
//! elementary structural queries (lca, restriction, cherries, pendant
//! subtrees, isomorphism, canonical forms).
//!
//! Trees and networks use arena storage: nodes live in a flat `Vec` and are
//! referenced by `NodeId` indices. Vertex identifiers are opaque; all
//! semantics live in role tags and leaf labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Index into a tree's or network's node arena.
pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown leaf label '{0}'")]
    UnknownLabel(String),
    #[error("leaf label '{0}' is not a non-empty [A-Za-z0-9_]+ token")]
    BadLabel(String),
    #[error("duplicate leaf label '{0}'")]
    DuplicateLabel(String),
    #[error("leaf sets differ: {0}")]
    LeafSetMismatch(String),
    #[error("empty label set")]
    EmptySelection,
    #[error("operation requires a tree with at least {0} leaves")]
    TooFewLeaves(usize),
    #[error("not a valid phylogenetic network: {0}")]
    InvalidNetwork(String),
}

pub fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct TreeNode {
    parent: Option<NodeId>,
    children: Option<(NodeId, NodeId)>,
    label: Option<String>,
}

/// A rooted binary phylogenetic tree with uniquely labelled leaves.
///
/// The degenerate single-leaf form is representable (it arises as the final
/// state of applying a full operation sequence) but is rejected by every
/// operation that requires two or more leaves.
#[derive(Debug, Clone)]
pub struct PhyloTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
}

/// Shape description used to build trees programmatically.
#[derive(Debug, Clone)]
pub enum TreeSpec {
    Leaf(String),
    Node(Box<TreeSpec>, Box<TreeSpec>),
}

impl TreeSpec {
    pub fn leaf(s: &str) -> TreeSpec {
        TreeSpec::Leaf(s.to_string())
    }
    pub fn node(a: TreeSpec, b: TreeSpec) -> TreeSpec {
        TreeSpec::Node(Box::new(a), Box::new(b))
    }
}

impl PhyloTree {
    /// Build a tree from a shape description, checking label validity and
    /// uniqueness.
    pub fn from_spec(spec: &TreeSpec) -> Result<PhyloTree, ModelError> {
        let mut nodes = Vec::new();
        let root = Self::build_spec(spec, &mut nodes)?;
        let tree = PhyloTree { nodes, root };
        let mut seen = BTreeSet::new();
        for l in tree.leaf_labels() {
            if !valid_label(&l) {
                return Err(ModelError::BadLabel(l));
            }
            if !seen.insert(l.clone()) {
                return Err(ModelError::DuplicateLabel(l));
            }
        }
        Ok(tree)
    }

    fn build_spec(spec: &TreeSpec, nodes: &mut Vec<TreeNode>) -> Result<NodeId, ModelError> {
        match spec {
            TreeSpec::Leaf(s) => {
                nodes.push(TreeNode {
                    parent: None,
                    children: None,
                    label: Some(s.clone()),
                });
                Ok(nodes.len() - 1)
            }
            TreeSpec::Node(a, b) => {
                let ca = Self::build_spec(a, nodes)?;
                let cb = Self::build_spec(b, nodes)?;
                nodes.push(TreeNode {
                    parent: None,
                    children: Some((ca, cb)),
                    label: None,
                });
                let id = nodes.len() - 1;
                nodes[ca].parent = Some(id);
                nodes[cb].parent = Some(id);
                Ok(id)
            }
        }
    }

    /// Single-leaf degenerate tree.
    pub fn single_leaf(label: &str) -> Result<PhyloTree, ModelError> {
        if !valid_label(label) {
            return Err(ModelError::BadLabel(label.to_string()));
        }
        Ok(PhyloTree {
            nodes: vec![TreeNode {
                parent: None,
                children: None,
                label: Some(label.to_string()),
            }],
            root: 0,
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> Option<(NodeId, NodeId)> {
        self.nodes[v].children
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v].children.is_none()
    }

    pub fn label(&self, v: NodeId) -> Option<&str> {
        self.nodes[v].label.as_deref()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    /// Leaf labels in sorted order.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .nodes
            .iter()
            .filter_map(|n| if n.children.is_none() { n.label.clone() } else { None })
            .collect();
        out.sort();
        out
    }

    pub fn leaf_label_set(&self) -> BTreeSet<String> {
        self.leaf_labels().into_iter().collect()
    }

    pub fn leaf_node(&self, label: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.children.is_none() && n.label.as_deref() == Some(label))
    }

    /// Vertices in postorder (children before parents).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded || self.is_leaf(v) {
                out.push(v);
            } else {
                stack.push((v, true));
                let (a, b) = self.nodes[v].children.unwrap();
                stack.push((b, false));
                stack.push((a, false));
            }
        }
        out
    }

    /// Set of leaf labels below `v` (including `v` itself if it is a leaf).
    pub fn leaves_below(&self, v: NodeId) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            match self.nodes[u].children {
                None => {
                    out.insert(self.nodes[u].label.clone().unwrap());
                }
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out
    }

    /// Last common ancestor of a non-empty set of leaf labels. For a
    /// singleton this is the leaf itself.
    pub fn lca(&self, labels: &BTreeSet<String>) -> Result<NodeId, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::EmptySelection);
        }
        let mut iter = labels.iter();
        let first = iter.next().unwrap();
        let mut cur = self
            .leaf_node(first)
            .ok_or_else(|| ModelError::UnknownLabel(first.clone()))?;
        for lab in iter {
            let mut v = self
                .leaf_node(lab)
                .ok_or_else(|| ModelError::UnknownLabel(lab.clone()))?;
            // climb both to their meeting point
            let mut anc_cur = BTreeSet::new();
            let mut c = Some(cur);
            while let Some(x) = c {
                anc_cur.insert(x);
                c = self.nodes[x].parent;
            }
            loop {
                if anc_cur.contains(&v) {
                    cur = v;
                    break;
                }
                v = self.nodes[v].parent.expect("lca walk fell off the root");
            }
        }
        Ok(cur)
    }

    /// Is `anc` an ancestor of (or equal to) `v`?
    pub fn is_ancestor(&self, anc: NodeId, v: NodeId) -> bool {
        let mut cur = Some(v);
        while let Some(x) = cur {
            if x == anc {
                return true;
            }
            cur = self.nodes[x].parent;
        }
        false
    }

    /// Restriction to a non-empty label subset: the minimal spanning subtree
    /// with all degree-two vertices suppressed. A singleton yields the
    /// degenerate single-leaf tree.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Result<PhyloTree, ModelError> {
        if keep.is_empty() {
            return Err(ModelError::EmptySelection);
        }
        let own = self.leaf_label_set();
        for l in keep {
            if !own.contains(l) {
                return Err(ModelError::UnknownLabel(l.clone()));
            }
        }
        let spec = self
            .restrict_spec(self.root, keep)
            .expect("non-empty restriction");
        PhyloTree::from_spec(&spec)
    }

    fn restrict_spec(&self, v: NodeId, keep: &BTreeSet<String>) -> Option<TreeSpec> {
        match self.nodes[v].children {
            None => {
                let lab = self.nodes[v].label.as_ref().unwrap();
                if keep.contains(lab) {
                    Some(TreeSpec::Leaf(lab.clone()))
                } else {
                    None
                }
            }
            Some((a, b)) => {
                let sa = self.restrict_spec(a, keep);
                let sb = self.restrict_spec(b, keep);
                match (sa, sb) {
                    (Some(x), Some(y)) => Some(TreeSpec::node(x, y)),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                }
            }
        }
    }

    /// Remove one leaf and suppress the resulting degree-two vertex. On a
    /// two-leaf tree this leaves the degenerate single-leaf tree.
    pub fn remove_leaf(&self, label: &str) -> Result<PhyloTree, ModelError> {
        let mut keep = self.leaf_label_set();
        if !keep.remove(label) {
            return Err(ModelError::UnknownLabel(label.to_string()));
        }
        if keep.is_empty() {
            return Err(ModelError::TooFewLeaves(2));
        }
        self.restrict(&keep)
    }

    /// All sibling-leaf pairs, each pair sorted, pairs in sorted order.
    /// A single-leaf tree has no cherries.
    pub fn cherries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let Some((a, b)) = n.children {
                if self.is_leaf(a) && self.is_leaf(b) {
                    let la = self.nodes[a].label.clone().unwrap();
                    let lb = self.nodes[b].label.clone().unwrap();
                    let (x, y) = if la < lb { (la, lb) } else { (lb, la) };
                    out.push((x, y));
                }
            }
        }
        out.sort();
        out
    }

    /// The leaf that forms a cherry with `label`, if any.
    pub fn cherry_partner(&self, label: &str) -> Option<String> {
        let v = self.leaf_node(label)?;
        let p = self.nodes[v].parent?;
        let (a, b) = self.nodes[p].children.unwrap();
        let sib = if a == v { b } else { a };
        if self.is_leaf(sib) {
            Some(self.nodes[sib].label.clone().unwrap())
        } else {
            None
        }
    }

    /// True iff there is an isomorphism with `other` that is the identity on
    /// the (shared) leaf set. Differing leaf sets are an error.
    pub fn isomorphic(&self, other: &PhyloTree) -> Result<bool, ModelError> {
        if self.leaf_label_set() != other.leaf_label_set() {
            return Err(ModelError::LeafSetMismatch(
                "isomorphism is only defined over a common leaf set".into(),
            ));
        }
        Ok(self.canonical_form() == other.canonical_form())
    }

    /// Deterministic serialization; equal texts iff isomorphic. Children are
    /// ordered by the smallest leaf label in their subtree.
    pub fn canonical_form(&self) -> String {
        self.canon(self.root).1
    }

    fn canon(&self, v: NodeId) -> (String, String) {
        match self.nodes[v].children {
            None => {
                let l = self.nodes[v].label.clone().unwrap();
                (l.clone(), l)
            }
            Some((a, b)) => {
                let (ma, sa) = self.canon(a);
                let (mb, sb) = self.canon(b);
                if ma < mb {
                    (ma, format!("({},{})", sa, sb))
                } else {
                    (mb, format!("({},{})", sb, sa))
                }
            }
        }
    }

    /// Non-root vertices whose subtree is a pendant subtree with at least two
    /// leaves, together with the leaf set below each.
    pub fn pendant_subtrees(&self) -> Vec<(NodeId, BTreeSet<String>)> {
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            if v == self.root || self.is_leaf(v) {
                continue;
            }
            out.push((v, self.leaves_below(v)));
        }
        out
    }

    /// Is the subtree on exactly this leaf set pendant (hanging off a single
    /// edge)? True also when the set is the whole leaf set of a non-degenerate
    /// tree only if the set equals a child subtree; the root subtree itself is
    /// not pendant.
    pub fn is_pendant_leafset(&self, set: &BTreeSet<String>) -> bool {
        if set.len() < 2 {
            return false;
        }
        self.pendant_subtrees().iter().any(|(_, s)| s == set)
    }

    /// Pendant three-leaf forks as (outer, inner1, inner2) label triples with
    /// inner1 < inner2; sorted for determinism.
    pub fn pendant_3forks(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            if v == self.root {
                continue;
            }
            if let Some((a, b)) = self.nodes[v].children {
                let (outer, inner) = if self.is_leaf(a) && !self.is_leaf(b) {
                    (a, b)
                } else if self.is_leaf(b) && !self.is_leaf(a) {
                    (b, a)
                } else {
                    continue;
                };
                if let Some((x, y)) = self.nodes[inner].children {
                    if self.is_leaf(x) && self.is_leaf(y) {
                        let lo = self.nodes[outer].label.clone().unwrap();
                        let mut lx = self.nodes[x].label.clone().unwrap();
                        let mut ly = self.nodes[y].label.clone().unwrap();
                        if lx > ly {
                            std::mem::swap(&mut lx, &mut ly);
                        }
                        out.push((lo, lx, ly));
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Pendant fully balanced four-leaf forks as ((a,b),(c,d)) label tuples,
    /// each cherry sorted and the two cherries sorted; sorted overall.
    pub fn pendant_4forks(&self) -> Vec<((String, String), (String, String))> {
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            if v == self.root {
                continue;
            }
            if let Some((a, b)) = self.nodes[v].children {
                let cherry = |u: NodeId| -> Option<(String, String)> {
                    let (x, y) = self.nodes[u].children?;
                    if self.is_leaf(x) && self.is_leaf(y) {
                        let lx = self.nodes[x].label.clone().unwrap();
                        let ly = self.nodes[y].label.clone().unwrap();
                        Some(if lx < ly { (lx, ly) } else { (ly, lx) })
                    } else {
                        None
                    }
                };
                if self.is_leaf(a) || self.is_leaf(b) {
                    continue;
                }
                if let (Some(c1), Some(c2)) = (cherry(a), cherry(b)) {
                    let (p, q) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
                    out.push((p, q));
                }
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for PhyloTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.canonical_form())
    }
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// Vertex role in a network, inferred from degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Root,
    Tree,
    Reticulation,
    Leaf,
}

/// A raw rooted DAG as produced by the network parser, before any degree or
/// class checking. `netcheck::validate` reports on these.
#[derive(Debug, Clone, Default)]
pub struct Dag {
    pub parents: Vec<Vec<NodeId>>,
    pub children: Vec<Vec<NodeId>>,
    pub labels: Vec<Option<String>>,
}

impl Dag {
    pub fn new() -> Dag {
        Dag::default()
    }

    pub fn add_node(&mut self, label: Option<String>) -> NodeId {
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        self.labels.push(label);
        self.parents.len() - 1
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        self.children[u].push(v);
        self.parents[v].push(u);
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn roots(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&v| self.parents[v].is_empty()).collect()
    }

    pub fn has_parallel_edges(&self) -> Option<(NodeId, NodeId)> {
        for u in 0..self.len() {
            let mut seen = BTreeSet::new();
            for &c in &self.children[u] {
                if !seen.insert(c) {
                    return Some((u, c));
                }
            }
        }
        None
    }

    /// Topological order, or None if the DAG has a cycle.
    pub fn topo_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: Vec<usize> = (0..self.len()).map(|v| self.parents[v].len()).collect();
        let mut queue: Vec<NodeId> = (0..self.len()).filter(|&v| indeg[v] == 0).collect();
        let mut out = Vec::with_capacity(self.len());
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            out.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if out.len() == self.len() {
            Some(out)
        } else {
            None
        }
    }
}

/// A validated rooted binary phylogenetic network: single root of outdegree
/// two, tree vertices (1 in, 2 out), reticulations (2 in, 1 out), labelled
/// leaves (1 in, 0 out), acyclic, connected, no parallel edges.
#[derive(Debug, Clone)]
pub struct PhyloNetwork {
    dag: Dag,
    root: NodeId,
    reach: Vec<Vec<bool>>,
}

impl PhyloNetwork {
    /// Validate a raw DAG into a network. The error carries the first
    /// violated structural rule.
    pub fn from_dag(dag: Dag) -> Result<PhyloNetwork, ModelError> {
        let report = crate::netcheck::validate_raw(&dag);
        if let Some(w) = report {
            return Err(ModelError::InvalidNetwork(w));
        }
        let root = dag.roots()[0];
        let reach = Self::reachability(&dag);
        Ok(PhyloNetwork { dag, root, reach })
    }

    fn reachability(dag: &Dag) -> Vec<Vec<bool>> {
        let n = dag.len();
        let mut reach = vec![vec![false; n]; n];
        for s in 0..n {
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                if reach[s][v] {
                    continue;
                }
                reach[s][v] = true;
                for &c in &dag.children[v] {
                    stack.push(c);
                }
            }
        }
        reach
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.dag.len()
    }

    pub fn parents(&self, v: NodeId) -> &[NodeId] {
        &self.dag.parents[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.dag.children[v]
    }

    pub fn label(&self, v: NodeId) -> Option<&str> {
        self.dag.labels[v].as_deref()
    }

    pub fn role(&self, v: NodeId) -> Role {
        let ind = self.dag.parents[v].len();
        let outd = self.dag.children[v].len();
        match (ind, outd) {
            (0, _) => Role::Root,
            (1, 0) => Role::Leaf,
            (2, 1) => Role::Reticulation,
            _ => Role::Tree,
        }
    }

    pub fn is_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.dag.children[u].contains(&v)
    }

    /// Does a directed path from `u` to `v` exist (including u == v)?
    pub fn reaches(&self, u: NodeId, v: NodeId) -> bool {
        self.reach[u][v]
    }

    pub fn reticulations(&self) -> Vec<NodeId> {
        (0..self.node_count())
            .filter(|&v| self.role(v) == Role::Reticulation)
            .collect()
    }

    /// Reticulation count h(N).
    pub fn reticulation_count(&self) -> usize {
        self.reticulations().len()
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.node_count())
            .filter(|&v| self.role(v) == Role::Leaf)
            .map(|v| self.dag.labels[v].clone().unwrap())
            .collect();
        out.sort();
        out
    }

    pub fn leaf_label_set(&self) -> BTreeSet<String> {
        self.leaf_labels().into_iter().collect()
    }

    pub fn leaf_node(&self, label: &str) -> Option<NodeId> {
        (0..self.node_count())
            .find(|&v| self.role(v) == Role::Leaf && self.label(v) == Some(label))
    }

    /// Vertices that are tree vertices or the root (the permitted images of a
    /// display map).
    pub fn map_targets(&self) -> Vec<NodeId> {
        (0..self.node_count())
            .filter(|&v| matches!(self.role(v), Role::Tree | Role::Root))
            .collect()
    }

    /// All directed paths from `u` to `v`, each as a vertex list including
    /// both endpoints, in deterministic order.
    pub fn all_paths(&self, u: NodeId, v: NodeId) -> Vec<Vec<NodeId>> {
        let mut out = Vec::new();
        let mut cur = vec![u];
        self.paths_rec(u, v, &mut cur, &mut out);
        out
    }

    fn paths_rec(&self, u: NodeId, v: NodeId, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if u == v {
            out.push(cur.clone());
            return;
        }
        let mut kids: Vec<NodeId> = self.dag.children[u].clone();
        kids.sort();
        for c in kids {
            if self.reach[c][v] {
                cur.push(c);
                self.paths_rec(c, v, cur, out);
                cur.pop();
            }
        }
    }

    /// Leaf labels reachable from `v`.
    pub fn leaves_below(&self, v: NodeId) -> BTreeSet<String> {
        (0..self.node_count())
            .filter(|&u| self.role(u) == Role::Leaf && self.reach[v][u])
            .map(|u| self.dag.labels[u].clone().unwrap())
            .collect()
    }

    /// Pendant subnetworks: tree vertices whose incoming-edge deletion splits
    /// off a phylogenetic network with at least two leaves. Each entry is
    /// (cut vertex, leaf set below, is reticulation-free).
    pub fn pendant_subnetworks(&self) -> Vec<(NodeId, BTreeSet<String>, bool)> {
        let mut out = Vec::new();
        for v in 0..self.node_count() {
            if self.role(v) != Role::Tree {
                continue;
            }
            let below: Vec<NodeId> = (0..self.node_count()).filter(|&u| self.reach[v][u]).collect();
            let below_set: BTreeSet<NodeId> = below.iter().copied().collect();
            // closed under parents except at the cut vertex itself
            let closed = below
                .iter()
                .all(|&u| u == v || self.dag.parents[u].iter().all(|p| below_set.contains(p)));
            if !closed {
                continue;
            }
            let leaves = self.leaves_below(v);
            if leaves.len() < 2 {
                continue;
            }
            let has_ret = below.iter().any(|&u| self.role(u) == Role::Reticulation);
            out.push((v, leaves, !has_ret));
        }
        out
    }

    /// Extract the pendant subnetwork rooted at a cut vertex as a standalone
    /// network (only meaningful for vertices reported by
    /// `pendant_subnetworks`).
    pub fn pendant_subnetwork_at(&self, v: NodeId) -> Result<PhyloNetwork, ModelError> {
        let below: Vec<NodeId> = (0..self.node_count()).filter(|&u| self.reach[v][u]).collect();
        let mut remap = BTreeMap::new();
        let mut dag = Dag::new();
        for &u in &below {
            let id = dag.add_node(self.dag.labels[u].clone());
            remap.insert(u, id);
        }
        for &u in &below {
            for &c in &self.dag.children[u] {
                dag.add_edge(remap[&u], remap[&c]);
            }
        }
        PhyloNetwork::from_dag(dag)
    }

    /// Interpret a reticulation-free network as a tree.
    pub fn to_tree(&self) -> Result<PhyloTree, ModelError> {
        if self.reticulation_count() != 0 {
            return Err(ModelError::InvalidNetwork(
                "network has reticulations, not a tree".into(),
            ));
        }
        let spec = self.tree_spec(self.root);
        PhyloTree::from_spec(&spec)
    }

    fn tree_spec(&self, v: NodeId) -> TreeSpec {
        let kids = &self.dag.children[v];
        if kids.is_empty() {
            TreeSpec::Leaf(self.dag.labels[v].clone().unwrap())
        } else {
            TreeSpec::node(self.tree_spec(kids[0]), self.tree_spec(kids[1]))
        }
    }

    /// Build a network with no reticulations from a tree.
    pub fn from_tree(tree: &PhyloTree) -> PhyloNetwork {
        let mut dag = Dag::new();
        let mut remap = BTreeMap::new();
        for v in tree.postorder() {
            let id = dag.add_node(tree.label(v).map(|s| s.to_string()));
            remap.insert(v, id);
        }
        for v in tree.postorder() {
            if let Some((a, b)) = tree.children(v) {
                dag.add_edge(remap[&v], remap[&a]);
                dag.add_edge(remap[&v], remap[&b]);
            }
        }
        PhyloNetwork::from_dag(dag).expect("a binary tree is a valid network")
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Directed edges in deterministic order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for u in 0..self.node_count() {
            for &c in &self.dag.children[u] {
                out.push((u, c));
            }
        }
        out
    }

    /// Canonical deterministic serialization in extended Newick form, with
    /// reticulation tags numbered by first encounter. On small networks the
    /// minimum over all sibling orderings is taken, so equal texts
    /// characterize isomorphism (identity on leaf labels); past the
    /// exhaustive threshold a deterministic greedy ordering (smallest leaf
    /// below first) is used instead, which still serializes any fixed
    /// network reproducibly.
    pub fn canonical_form(&self) -> String {
        let swappable: Vec<NodeId> = (0..self.node_count())
            .filter(|&v| self.dag.children[v].len() == 2)
            .collect();
        let k = swappable.len();
        if k > 20 {
            let mut swap = vec![false; self.node_count()];
            for &v in &swappable {
                let kids = &self.dag.children[v];
                let key = |c: NodeId| self.leaves_below(c).into_iter().next().unwrap_or_default();
                swap[v] = key(kids[1]) < key(kids[0]);
            }
            let mut tags: BTreeMap<NodeId, usize> = BTreeMap::new();
            let mut s = String::new();
            self.serialize_with(self.root, &swap, &mut tags, &mut s);
            s.push(';');
            return s;
        }
        let mut best: Option<String> = None;
        for mask in 0u32..(1u32 << k) {
            let mut swap = vec![false; self.node_count()];
            for (i, &v) in swappable.iter().enumerate() {
                swap[v] = mask & (1 << i) != 0;
            }
            let mut tags: BTreeMap<NodeId, usize> = BTreeMap::new();
            let mut s = String::new();
            self.serialize_with(self.root, &swap, &mut tags, &mut s);
            s.push(';');
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
        best.unwrap()
    }

    fn serialize_with(
        &self,
        v: NodeId,
        swap: &[bool],
        tags: &mut BTreeMap<NodeId, usize>,
        out: &mut String,
    ) {
        if self.role(v) == Role::Reticulation {
            if let Some(&t) = tags.get(&v) {
                out.push_str(&format!("#H{}", t));
                return;
            }
            let t = tags.len() + 1;
            tags.insert(v, t);
            out.push('(');
            self.serialize_with(self.dag.children[v][0], swap, tags, out);
            out.push_str(&format!(")#H{}", t));
            return;
        }
        let kids = &self.dag.children[v];
        match kids.len() {
            0 => out.push_str(self.dag.labels[v].as_ref().unwrap()),
            2 => {
                let (a, b) = if swap[v] { (kids[1], kids[0]) } else { (kids[0], kids[1]) };
                out.push('(');
                self.serialize_with(a, swap, tags, out);
                out.push(',');
                self.serialize_with(b, swap, tags, out);
                out.push(')');
            }
            _ => {
                // only reachable on raw-ish structures; serialize generically
                out.push('(');
                for (i, &c) in kids.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.serialize_with(c, swap, tags, out);
                }
                out.push(')');
            }
        }
    }

    pub fn isomorphic(&self, other: &PhyloNetwork) -> bool {
        self.leaf_label_set() == other.leaf_label_set()
            && self.canonical_form() == other.canonical_form()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick;

    fn t(s: &str) -> PhyloTree {
        newick::parse_tree(s).unwrap()
    }

    #[test]
    fn lca_basics() {
        let tree = t("((a,b),c);");
        let ab: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let ac: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        let all: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let a: BTreeSet<String> = ["a".to_string()].into_iter().collect();
        let la = tree.leaf_node("a").unwrap();
        let lb = tree.leaf_node("b").unwrap();
        assert_eq!(tree.lca(&ab).unwrap(), tree.parent(la).unwrap());
        assert_eq!(tree.parent(la), tree.parent(lb));
        assert_eq!(tree.lca(&ac).unwrap(), tree.root());
        assert_eq!(tree.lca(&all).unwrap(), tree.root());
        assert_eq!(tree.lca(&a).unwrap(), la);
        let bad: BTreeSet<String> = ["z".to_string()].into_iter().collect();
        assert!(tree.lca(&bad).is_err());
    }

    #[test]
    fn restrict_basics() {
        let tree = t("((a,b),c);");
        let all = tree.leaf_label_set();
        assert!(tree.restrict(&all).unwrap().isomorphic(&tree).unwrap());
        let ac: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(tree.restrict(&ac).unwrap().canonical_form(), "(a,c)");
        let t2 = t("((a,b),(c,d));");
        let abc: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(t2.restrict(&abc).unwrap().canonical_form(), "((a,b),c)");
        let bad: BTreeSet<String> = ["a", "z"].iter().map(|s| s.to_string()).collect();
        assert!(t2.restrict(&bad).is_err());
    }

    #[test]
    fn restrict_composes() {
        let tree = t("(((a,b),(c,d)),(e,f));");
        let z: BTreeSet<String> = ["a", "b", "c", "e"].iter().map(|s| s.to_string()).collect();
        let y: BTreeSet<String> = ["a", "c", "e"].iter().map(|s| s.to_string()).collect();
        let via = tree.restrict(&z).unwrap().restrict(&y).unwrap();
        let direct = tree.restrict(&y).unwrap();
        assert!(via.isomorphic(&direct).unwrap());
    }

    #[test]
    fn restriction_root_is_lca() {
        let tree = t("(((a,b),(c,d)),(e,f));");
        let y: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        // root of the spanning subtree equals the lca: check via leaf sets
        let lca = tree.lca(&y).unwrap();
        assert!(y.iter().all(|l| tree.leaves_below(lca).contains(l)));
        let (c1, c2) = tree.children(lca).unwrap();
        let b1 = tree.leaves_below(c1);
        let b2 = tree.leaves_below(c2);
        assert!(y.iter().any(|l| b1.contains(l)) && y.iter().any(|l| b2.contains(l)));
    }

    #[test]
    fn isomorphic_basics() {
        let a = t("((a,b),c);");
        let b = t("((b,a),c);");
        let c = t("((a,c),b);");
        assert!(a.isomorphic(&a).unwrap());
        assert!(a.isomorphic(&b).unwrap());
        assert!(!a.isomorphic(&c).unwrap());
        let d = t("((a,b),d);");
        assert!(a.isomorphic(&d).is_err());
    }

    #[test]
    fn cherries_basics() {
        let a = t("(a,b);");
        assert_eq!(a.cherries(), vec![("a".into(), "b".into())]);
        let b = t("((a,b),(c,d));");
        assert_eq!(
            b.cherries(),
            vec![("a".into(), "b".into()), ("c".into(), "d".into())]
        );
        let single = PhyloTree::single_leaf("a").unwrap();
        assert!(single.cherries().is_empty());
        // each leaf is in at most one cherry
        let big = t("(((a,b),(c,d)),(e,f));");
        let mut seen = BTreeSet::new();
        for (x, y) in big.cherries() {
            assert!(seen.insert(x));
            assert!(seen.insert(y));
        }
    }

    #[test]
    fn canonical_reordering_invariance() {
        assert_eq!(t("((b,a),c);").canonical_form(), t("((a,b),c);").canonical_form());
        assert_ne!(t("((a,b),c);").canonical_form(), t("((a,c),b);").canonical_form());
    }

    #[test]
    fn forks_detected() {
        let tree = t("((e,(a,(b,c))),d);");
        assert_eq!(
            tree.pendant_3forks(),
            vec![("a".to_string(), "b".to_string(), "c".to_string())]
        );
        let f4 = t("(((a,b),(c,d)),e);");
        assert_eq!(
            f4.pendant_4forks(),
            vec![(("a".to_string(), "b".to_string()), ("c".to_string(), "d".to_string()))]
        );
    }

    #[test]
    fn network_roundtrip_and_pendants() {
        // one reticulation above b
        let net = newick::parse_network("((a,(b)#H1),(#H1,c));").unwrap();
        assert_eq!(net.reticulation_count(), 1);
        assert_eq!(net.leaf_labels(), vec!["a", "b", "c"]);
        // a tree as a network: every internal non-root vertex heads a pendant subtree
        let tree = t("((a,b),(c,d));");
        let net2 = PhyloNetwork::from_tree(&tree);
        let pend = net2.pendant_subnetworks();
        assert_eq!(pend.len(), 2);
        assert!(pend.iter().all(|(_, _, is_tree)| *is_tree));
        // root + single reticulation with a leaf child below: no pendant subnetworks
        let small = newick::parse_network("((a)#H1,(#H1,b));");
        if let Ok(n) = small {
            assert!(n.pendant_subnetworks().is_empty());
        }
    }
}

//! Exact minimum-weight sequence solvers: fork-picking search by depth-first
//! branch and bound with memoized block boundaries, cherry-picking
//! minimization by dynamic programming over remaining-leaf subsets, the
//! rigid-displayability decision, and sequence extraction from a network.

use crate::display::{self, DisplayMap};
use crate::forkops::{self, CherryPickingSequence, ForkOp, ForkPickingSequence, LcaScope};
use crate::model::{ModelError, NodeId, PhyloNetwork, PhyloTree, Role};
use crate::netcheck;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("trees have different leaf sets")]
    LeafSetMismatch,
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Fork(#[from] forkops::ForkError),
    #[error("{0}")]
    Display(#[from] crate::display::DisplayError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal verification failed: {0}")]
    Internal(String),
    #[error("leaf set too large for the subset dynamic program (limit {0})")]
    TooManyLeaves(usize),
}

/// Resource limits for the solvers. The node limit can be overridden with
/// the FORKPICK_NODE_LIMIT environment variable.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Self {
        let node_limit = std::env::var("FORKPICK_NODE_LIMIT")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(50_000_000);
        Limits {
            node_limit,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub memo_hits: u64,
    pub elapsed_ms: u64,
}

/// Solver outcome: an exact optimum with a witness, proven infeasibility, or
/// a resource-limit stop.
#[derive(Debug, Clone)]
pub enum Outcome<W> {
    Optimal { optimum: u32, witness: W },
    Infeasible,
    Unknown,
}

impl<W> Outcome<W> {
    pub fn optimum(&self) -> Option<u32> {
        match self {
            Outcome::Optimal { optimum, .. } => Some(*optimum),
            _ => None,
        }
    }
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Outcome::Infeasible)
    }
}

#[derive(Debug, Clone)]
pub struct FpsSearchResult {
    pub outcome: Outcome<ForkPickingSequence>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone)]
pub struct CpsSearchResult {
    pub outcome: Outcome<CherryPickingSequence>,
    pub stats: SearchStats,
}

#[derive(Debug)]
struct LimitHit;

// ---------------------------------------------------------------------------
// Minimum-weight fork-picking search
// ---------------------------------------------------------------------------

struct FpsSearch {
    memo: HashMap<(String, String), Option<(u32, Vec<ForkOp>)>>,
    nodes: u64,
    memo_hits: u64,
    limits: Limits,
    started: Instant,
}

impl FpsSearch {
    fn tick(&mut self) -> Result<(), LimitHit> {
        self.nodes += 1;
        if self.nodes > self.limits.node_limit {
            return Err(LimitHit);
        }
        if let Some(t) = self.limits.time_limit {
            if self.nodes.is_multiple_of(1024) && self.started.elapsed() > t {
                return Err(LimitHit);
            }
        }
        Ok(())
    }

    /// Exhaust kind-0 operations deterministically (least leaf first).
    fn eager_zeros(t1: &PhyloTree, t2: &PhyloTree) -> (PhyloTree, PhyloTree, Vec<ForkOp>) {
        let mut cur1 = t1.clone();
        let mut cur2 = t2.clone();
        let mut ops = Vec::new();
        loop {
            if cur1.is_single_leaf() {
                break;
            }
            let mut pick: Option<(String, String)> = None;
            for x in cur1.leaf_labels() {
                if let (Some(p), Some(q)) = (cur1.cherry_partner(&x), cur2.cherry_partner(&x)) {
                    if p == q {
                        pick = Some((x, p));
                        break;
                    }
                }
            }
            match pick {
                Some((x, y)) => {
                    ops.push(ForkOp {
                        kind: 0,
                        leaf: x.clone(),
                        w1: vec![x.clone(), y.clone()],
                        w2: vec![x.clone(), y],
                    });
                    cur1 = cur1.remove_leaf(&x).unwrap();
                    cur2 = cur2.remove_leaf(&x).unwrap();
                }
                None => break,
            }
        }
        (cur1, cur2, ops)
    }

    /// Minimum total weight to finish from a block boundary, with the
    /// operations realizing it. None = infeasible.
    fn solve(&mut self, t1: &PhyloTree, t2: &PhyloTree) -> Result<Option<(u32, Vec<ForkOp>)>, LimitHit> {
        let key = (t1.canonical_form(), t2.canonical_form());
        if let Some(hit) = self.memo.get(&key) {
            self.memo_hits += 1;
            return Ok(hit.clone());
        }
        self.tick()?;
        let (r1, r2, prefix) = Self::eager_zeros(t1, t2);
        if r1.is_single_leaf() {
            let res = Some((0, prefix));
            self.memo.insert(key, res.clone());
            return Ok(res);
        }
        // no kind-0 applies and more than one leaf remains: a special block
        // is required
        let mut best: Option<(u32, Vec<ForkOp>)> = None;
        let blocks = self.special_blocks(&r1, &r2)?;
        for (block_ops, after1, after2) in blocks {
            if best.as_ref().is_some_and(|(w, _)| *w == 1) {
                break; // weight 1 is optimal once the trees differ
            }
            if let Some((w, rest)) = self.solve(&after1, &after2)? {
                let total = 1 + w;
                if best.as_ref().is_none_or(|(bw, _)| total < *bw) {
                    let mut ops = prefix.clone();
                    ops.extend(block_ops);
                    ops.extend(rest);
                    best = Some((total, ops));
                }
            }
        }
        self.memo.insert(key, best.clone());
        Ok(best)
    }

    /// Enumerate all valid special blocks applicable at this boundary.
    /// Yields (ops, trees after the block).
    fn special_blocks(
        &mut self,
        t1: &PhyloTree,
        t2: &PhyloTree,
    ) -> Result<Vec<(Vec<ForkOp>, PhyloTree, PhyloTree)>, LimitHit> {
        let mut out = Vec::new();
        let mut ops: Vec<ForkOp> = Vec::new();
        self.block_rec(t1, t2, t1, t2, None, &mut ops, &mut out)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn block_rec(
        &mut self,
        start1: &PhyloTree,
        start2: &PhyloTree,
        cur1: &PhyloTree,
        cur2: &PhyloTree,
        fork_side: Option<usize>,
        ops: &mut Vec<ForkOp>,
        out: &mut Vec<(Vec<ForkOp>, PhyloTree, PhyloTree)>,
    ) -> Result<(), LimitHit> {
        self.tick()?;
        let cands = forkops::applicable_ops(cur1, cur2).expect("leaf sets agree");
        for op in &cands {
            match op.kind {
                1 => {
                    // close the block; verify the tail conditions
                    ops.push(op.clone());
                    let diag =
                        forkops::check_special_sequence(start1, start2, ops, None).expect("simulation");
                    if diag.ok {
                        let (a1, a2) = forkops::apply_op(cur1, cur2, op).expect("applicable");
                        out.push((ops.clone(), a1, a2));
                    }
                    ops.pop();
                }
                2 | 3 => {
                    if cur1.leaf_count() < 4 {
                        continue; // the block length bound leaves no room
                    }
                    let side = op.fork_side().unwrap();
                    if let Some(s) = fork_side {
                        if s != side {
                            continue;
                        }
                    }
                    // property (i): fork pendant in the designated tree
                    let fork_tree = if side == 0 { cur1 } else { cur2 };
                    let fork = if side == 0 { &op.w1 } else { &op.w2 };
                    let pendant = match op.kind {
                        2 => fork_tree
                            .pendant_3forks()
                            .iter()
                            .any(|(a, b, c)| {
                                *a == fork[0]
                                    && ((*b == fork[1] && *c == fork[2])
                                        || (*b == fork[2] && *c == fork[1]))
                            }),
                        _ => {
                            let c1 = if fork[1] < fork[0] {
                                (fork[1].clone(), fork[0].clone())
                            } else {
                                (fork[0].clone(), fork[1].clone())
                            };
                            let c2 = if fork[2] < fork[3] {
                                (fork[2].clone(), fork[3].clone())
                            } else {
                                (fork[3].clone(), fork[2].clone())
                            };
                            let key = if c1 < c2 { (c1, c2) } else { (c2, c1) };
                            fork_tree.pendant_4forks().contains(&key)
                        }
                    };
                    if !pendant {
                        continue;
                    }
                    let (a1, a2) = forkops::apply_op(cur1, cur2, op).expect("applicable");
                    ops.push(op.clone());
                    self.block_rec(start1, start2, &a1, &a2, Some(side), ops, out)?;
                    ops.pop();
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Exact minimum weight of a fork-picking sequence, with a witness sequence,
/// by depth-first branch and bound. Kind-0 operations are applied eagerly
/// and exhaustively before branching; lower bounds are memoized at block
/// boundaries keyed by the canonical forms of the restricted pair.
pub fn min_weight_fork_picking(
    t1: &PhyloTree,
    t2: &PhyloTree,
    limits: Limits,
) -> Result<FpsSearchResult, SearchError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(SearchError::LeafSetMismatch);
    }
    if t1.leaf_count() < 2 {
        return Err(SearchError::Model(ModelError::TooFewLeaves(2)));
    }
    let mut search = FpsSearch {
        memo: HashMap::new(),
        nodes: 0,
        memo_hits: 0,
        limits,
        started: Instant::now(),
    };
    let solved = search.solve(t1, t2);
    let stats = SearchStats {
        nodes_expanded: search.nodes,
        memo_hits: search.memo_hits,
        elapsed_ms: search.started.elapsed().as_millis() as u64,
    };
    let outcome = match solved {
        Err(LimitHit) => Outcome::Unknown,
        Ok(None) => Outcome::Infeasible,
        Ok(Some((w, ops))) => {
            let blocks = ForkPickingSequence::decompose(&ops)
                .map_err(|e| SearchError::Internal(format!("witness decomposition: {}", e)))?;
            let seq = ForkPickingSequence { ops, blocks };
            debug_assert_eq!(seq.weight(), w);
            let diag = forkops::check_fork_picking_sequence(t1, t2, &seq, LcaScope::BlockStart)?;
            if !diag.ok {
                return Err(SearchError::Internal(format!(
                    "solver witness failed validation: {:?}",
                    diag.reason
                )));
            }
            Outcome::Optimal { optimum: w, witness: seq }
        }
    };
    Ok(FpsSearchResult { outcome, stats })
}

// ---------------------------------------------------------------------------
// Minimum-count cherry-picking dynamic program
// ---------------------------------------------------------------------------

pub const CPS_LEAF_LIMIT: usize = 30;

struct CpsDp {
    labels: Vec<String>,
    trees: [LeafMaskTree; 2],
    memo: HashMap<u64, Option<u32>>,
    nodes: u64,
    limits: Limits,
    started: Instant,
}

struct LeafMaskTree {
    parent: Vec<Option<NodeId>>,
    leafmask: Vec<u64>,
    leaf_of: Vec<NodeId>,
}

impl LeafMaskTree {
    fn new(tree: &PhyloTree, labels: &[String]) -> LeafMaskTree {
        let n = tree.node_count();
        let mut leafmask = vec![0u64; n];
        let mut parent = vec![None; n];
        for v in tree.postorder() {
            parent[v] = tree.parent(v);
            match tree.children(v) {
                None => {
                    let idx = labels
                        .iter()
                        .position(|l| Some(l.as_str()) == tree.label(v))
                        .unwrap();
                    leafmask[v] = 1u64 << idx;
                }
                Some((a, b)) => {
                    leafmask[v] = leafmask[a] | leafmask[b];
                }
            }
        }
        let leaf_of = labels
            .iter()
            .map(|l| tree.leaf_node(l).unwrap())
            .collect();
        LeafMaskTree {
            parent,
            leafmask,
            leaf_of,
        }
    }

    /// Cherry partner of leaf index `x` in the restriction to `mask`.
    fn partner(&self, x: usize, mask: u64) -> Option<usize> {
        let mut v = self.leaf_of[x];
        loop {
            v = self.parent[v]?;
            let m = self.leafmask[v] & mask;
            if m.count_ones() >= 2 {
                return if m.count_ones() == 2 {
                    let other = m & !(1u64 << x);
                    Some(other.trailing_zeros() as usize)
                } else {
                    None
                };
            }
        }
    }

}

impl CpsDp {
    fn dp(&mut self, mask: u64) -> Result<Option<u32>, LimitHit> {
        if mask.count_ones() == 1 {
            return Ok(Some(0));
        }
        if let Some(&hit) = self.memo.get(&mask) {
            return Ok(hit);
        }
        self.nodes += 1;
        if self.nodes > self.limits.node_limit {
            return Err(LimitHit);
        }
        if let Some(t) = self.limits.time_limit {
            if self.nodes.is_multiple_of(4096) && self.started.elapsed() > t {
                return Err(LimitHit);
            }
        }
        let mut best: Option<u32> = None;
        let mut bits = mask;
        while bits != 0 {
            let x = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let p1 = self.trees[0].partner(x, mask);
            let p2 = self.trees[1].partner(x, mask);
            if let (Some(a), Some(b)) = (p1, p2) {
                let step = u32::from(a != b);
                if let Some(sub) = self.dp(mask & !(1u64 << x))? {
                    let total = step + sub;
                    if best.is_none_or(|b| total < b) {
                        best = Some(total);
                    }
                }
            }
        }
        self.memo.insert(mask, best);
        Ok(best)
    }

    /// Reconstruct a witness order achieving the optimum, lexicographically
    /// least leaf first among optimal choices.
    fn witness(&mut self, full: u64) -> CherryPickingSequence {
        let mut order = Vec::new();
        let mut counts = Vec::new();
        let mut mask = full;
        while mask.count_ones() > 1 {
            let want = self.dp(mask).unwrap().unwrap();
            let mut indices: Vec<usize> = (0..self.labels.len()).filter(|i| mask & (1 << i) != 0).collect();
            indices.sort_by(|&a, &b| self.labels[a].cmp(&self.labels[b]));
            let mut stepped = false;
            for x in indices {
                let p1 = self.trees[0].partner(x, mask);
                let p2 = self.trees[1].partner(x, mask);
                if let (Some(a), Some(b)) = (p1, p2) {
                    let step = u32::from(a != b);
                    if let Some(sub) = self.dp(mask & !(1u64 << x)).unwrap() {
                        if step + sub == want {
                            order.push(self.labels[x].clone());
                            counts.push(step as u8);
                            mask &= !(1u64 << x);
                            stepped = true;
                            break;
                        }
                    }
                }
            }
            assert!(stepped, "witness reconstruction must follow the dp");
        }
        CherryPickingSequence { order, counts }
    }
}

/// Exact minimum number of 1-counts over all cherry-picking sequences, by
/// memoized dynamic programming over remaining-leaf subsets (the restricted
/// pair is a function of the remaining set).
pub fn min_weight_cherry_picking(
    t1: &PhyloTree,
    t2: &PhyloTree,
    limits: Limits,
) -> Result<CpsSearchResult, SearchError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(SearchError::LeafSetMismatch);
    }
    let labels = t1.leaf_labels();
    if labels.len() > CPS_LEAF_LIMIT {
        return Err(SearchError::TooManyLeaves(CPS_LEAF_LIMIT));
    }
    let started = Instant::now();
    let mut dp = CpsDp {
        labels: labels.clone(),
        trees: [LeafMaskTree::new(t1, &labels), LeafMaskTree::new(t2, &labels)],
        memo: HashMap::new(),
        nodes: 0,
        limits,
        started,
    };
    let full = if labels.len() == 64 {
        u64::MAX
    } else {
        (1u64 << labels.len()) - 1
    };
    let solved = dp.dp(full);
    let outcome = match solved {
        Err(LimitHit) => Outcome::Unknown,
        Ok(None) => Outcome::Infeasible,
        Ok(Some(w)) => {
            let witness = dp.witness(full);
            debug_assert_eq!(witness.weight(), w);
            let diag = forkops::check_cherry_picking_sequence(t1, t2, &witness)?;
            if !diag.ok {
                return Err(SearchError::Internal(format!(
                    "dp witness failed validation: {:?}",
                    diag.reason
                )));
            }
            Outcome::Optimal { optimum: w, witness }
        }
    };
    let stats = SearchStats {
        nodes_expanded: dp.nodes,
        memo_hits: 0,
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    Ok(CpsSearchResult { outcome, stats })
}

/// Answer of the rigid-displayability decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Displayable,
    NotDisplayable,
    Unknown,
}

/// Decide whether the pair admits any fork-picking sequence (equivalently a
/// cherry-picking sequence, equivalently rigid or ordinary display by some
/// temporal tree-child network). Uses the cheapest of the equivalent tests,
/// the subset dynamic program.
pub fn decide_rigidly_displayable(
    t1: &PhyloTree,
    t2: &PhyloTree,
    limits: Limits,
) -> Result<Decision, SearchError> {
    let res = min_weight_cherry_picking(t1, t2, limits)?;
    Ok(match res.outcome {
        Outcome::Optimal { .. } => Decision::Displayable,
        Outcome::Infeasible => Decision::NotDisplayable,
        Outcome::Unknown => Decision::Unknown,
    })
}

// ---------------------------------------------------------------------------
// Sequence extraction from a rigidly displaying network
// ---------------------------------------------------------------------------

/// Restrict a network to a leaf subset: remove the other leaves, prune
/// childless vertices, suppress degree-two vertices, collapse parallel edges
/// (removing the reticulations they feed), and drop outdegree-one roots.
pub fn restrict_network(net: &PhyloNetwork, keep: &BTreeSet<String>) -> Result<PhyloNetwork, SearchError> {
    // edge list surgery on stable ids
    let mut labels: Vec<Option<String>> = (0..net.node_count())
        .map(|v| net.label(v).map(|s| s.to_string()))
        .collect();
    let mut edges: Vec<(usize, usize)> = net.edges();
    let mut alive: Vec<bool> = vec![true; net.node_count()];
    for v in 0..net.node_count() {
        if net.role(v) == Role::Leaf && !keep.contains(net.label(v).unwrap()) {
            labels[v] = None; // becomes an unlabelled childless vertex, pruned below
        }
    }
    loop {
        let mut changed = false;
        let n = alive.len();
        let outdeg = |edges: &Vec<(usize, usize)>, v: usize| edges.iter().filter(|e| e.0 == v).count();
        let indeg = |edges: &Vec<(usize, usize)>, v: usize| edges.iter().filter(|e| e.1 == v).count();
        // prune childless unlabelled vertices
        for v in 0..n {
            if alive[v] && labels[v].is_none() && outdeg(&edges, v) == 0 {
                alive[v] = false;
                edges.retain(|e| e.1 != v);
                changed = true;
            }
        }
        // suppress in-1 out-1 vertices
        for v in 0..n {
            if alive[v] && indeg(&edges, v) == 1 && outdeg(&edges, v) == 1 {
                let p = edges.iter().find(|e| e.1 == v).unwrap().0;
                let c = edges.iter().find(|e| e.0 == v).unwrap().1;
                alive[v] = false;
                edges.retain(|e| e.0 != v && e.1 != v);
                edges.push((p, c));
                changed = true;
            }
        }
        // drop roots of outdegree one
        for v in 0..n {
            if alive[v] && indeg(&edges, v) == 0 && outdeg(&edges, v) == 1 {
                let c = edges.iter().find(|e| e.0 == v).unwrap().1;
                alive[v] = false;
                edges.retain(|e| e.0 != v);
                let _ = c;
                changed = true;
            }
        }
        // collapse parallel edges: the target reticulation loses one in-edge
        let mut seen = BTreeSet::new();
        let mut dup: Option<(usize, usize)> = None;
        for &e in &edges {
            if !seen.insert(e) {
                dup = Some(e);
                break;
            }
        }
        if let Some(e) = dup {
            let pos = edges.iter().position(|&x| x == e).unwrap();
            edges.remove(pos);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<usize> = (0..alive.len()).filter(|&v| alive[v]).collect();
    let mut remap = HashMap::new();
    let mut dag = crate::model::Dag::new();
    for &v in &kept {
        let id = dag.add_node(labels[v].clone());
        remap.insert(v, id);
    }
    for &(u, v) in &edges {
        dag.add_edge(remap[&u], remap[&v]);
    }
    PhyloNetwork::from_dag(dag)
        .map_err(|e| SearchError::Internal(format!("network restriction broke validity: {}", e)))
}

/// Extract a fork-picking sequence of weight at most h(net) from a temporal
/// tree-child network that rigidly displays the two trees, following the
/// constructive procedure: exhaust kind-0 operations, peel the pendant
/// subtree under a maximum-time reticulation with kind-2/3 operations ending
/// in the kind-1 operation, remove that reticulation from the network, and
/// recurse.
pub fn extract_fork_picking(
    net: &PhyloNetwork,
    t1: &PhyloTree,
    t2: &PhyloTree,
    witnesses: &(DisplayMap, DisplayMap),
) -> Result<ForkPickingSequence, SearchError> {
    if t1.leaf_label_set() != net.leaf_label_set() || t2.leaf_label_set() != net.leaf_label_set() {
        return Err(SearchError::LeafSetMismatch);
    }
    if !netcheck::is_tree_child(net) || netcheck::temporal_labelling(net).is_none() {
        return Err(SearchError::Precondition(
            "the network must be temporal tree-child".into(),
        ));
    }
    for (tree, dm) in [(t1, &witnesses.0), (t2, &witnesses.1)] {
        if !display::check_display_map(tree, net, dm)? {
            return Err(SearchError::Precondition("witness display map is invalid".into()));
        }
    }
    let gamma = display::gamma_pair(net, &witnesses.0, &witnesses.1);
    let caps = display::gamma_caps(net);
    if gamma.iter().zip(caps.iter()).any(|(g, c)| g > c) {
        return Err(SearchError::Precondition(
            "witness maps do not satisfy the rigid gamma bounds".into(),
        ));
    }

    let budget = net.reticulation_count() as u32;
    let mut ops: Vec<ForkOp> = Vec::new();
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut curnet = net.clone();
    loop {
        // exhaust kind-0 operations
        let (r1, r2, zeros) = FpsSearch::eager_zeros(&cur1, &cur2);
        ops.extend(zeros);
        cur1 = r1;
        cur2 = r2;
        if cur1.is_single_leaf() {
            break;
        }
        curnet = restrict_network(&curnet, &cur1.leaf_label_set())?;
        if curnet.reticulation_count() == 0 {
            return Err(SearchError::Internal(
                "no reticulation left although the restrictions are non-isomorphic".into(),
            ));
        }
        let times = netcheck::temporal_labelling(&curnet).ok_or_else(|| {
            SearchError::Internal("restriction lost the temporal labelling".into())
        })?;
        // maximum-time reticulation, ties broken by smallest leaf below
        let mut retics = curnet.reticulations();
        retics.sort_by_key(|&r| {
            (
                std::cmp::Reverse(times[r]),
                curnet.leaves_below(r).into_iter().next().unwrap_or_default(),
            )
        });
        let v = retics[0];
        let parents = curnet.parents(v).to_vec();
        let (u, w) = (parents[0], parents[1]);
        let other_child = |p: NodeId| -> NodeId {
            *curnet.children(p).iter().find(|&&c| c != v).expect("binary parent")
        };
        let (pu, pw) = (other_child(u), other_child(w));
        if curnet.role(pu) != Role::Leaf || curnet.role(pw) != Role::Leaf {
            return Err(SearchError::Internal(
                "reticulation parents must have leaf children at this stage".into(),
            ));
        }
        let p_leaf = curnet.label(pu).unwrap().to_string();
        let q_leaf = curnet.label(pw).unwrap().to_string();
        let s = curnet.children(v)[0];
        let block = if curnet.role(s) == Role::Leaf {
            let s_leaf = curnet.label(s).unwrap().to_string();
            vec![make_kind1(&cur1, &cur2, &s_leaf)?]
        } else {
            let peel_leaves = curnet.leaves_below(s);
            peel_pendant_subtree(&cur1, &cur2, &peel_leaves, &p_leaf, &q_leaf)?
        };
        let diag = forkops::check_special_sequence(&cur1, &cur2, &block, None)?;
        if !diag.ok {
            return Err(SearchError::Internal(format!(
                "extracted block failed validation: {:?}",
                diag.reason
            )));
        }
        for op in &block {
            let (n1, n2) = forkops::apply_op(&cur1, &cur2, op)?;
            cur1 = n1;
            cur2 = n2;
        }
        ops.extend(block);
        // the network loses this reticulation when restricted to the
        // remaining leaves on the next round
    }
    let blocks = ForkPickingSequence::decompose(&ops)?;
    let seq = ForkPickingSequence { ops, blocks };
    let diag = forkops::check_fork_picking_sequence(t1, t2, &seq, LcaScope::BlockStart)?;
    if !diag.ok {
        return Err(SearchError::Internal(format!(
            "extracted sequence failed validation: {:?}",
            diag.reason
        )));
    }
    if seq.weight() > budget {
        return Err(SearchError::Internal(format!(
            "extracted weight {} exceeds the reticulation count {}",
            seq.weight(),
            budget
        )));
    }
    Ok(seq)
}

fn make_kind1(t1: &PhyloTree, t2: &PhyloTree, leaf: &str) -> Result<ForkOp, SearchError> {
    let p1 = t1.cherry_partner(leaf);
    let p2 = t2.cherry_partner(leaf);
    match (p1, p2) {
        (Some(a), Some(b)) if a != b => Ok(ForkOp {
            kind: 1,
            leaf: leaf.to_string(),
            w1: vec![leaf.to_string(), a],
            w2: vec![leaf.to_string(), b],
        }),
        _ => Err(SearchError::Internal(format!(
            "leaf {} should close the block with a kind-1 operation",
            leaf
        ))),
    }
}

/// Peel the leaves of a pendant subtree, one kind-2/3 operation at a time,
/// closing with the kind-1 operation on the last leaf.
fn peel_pendant_subtree(
    t1: &PhyloTree,
    t2: &PhyloTree,
    peel: &BTreeSet<String>,
    p_leaf: &str,
    q_leaf: &str,
) -> Result<Vec<ForkOp>, SearchError> {
    // the subtree together with one of the parent leaves is pendant in one
    // of the trees; that tree holds the forks
    let mut with_p = peel.clone();
    with_p.insert(p_leaf.to_string());
    let mut with_q = peel.clone();
    with_q.insert(q_leaf.to_string());
    let side = if t1.is_pendant_leafset(&with_p) || t1.is_pendant_leafset(&with_q) {
        0
    } else if t2.is_pendant_leafset(&with_p) || t2.is_pendant_leafset(&with_q) {
        1
    } else {
        return Err(SearchError::Internal(
            "the pendant subtree is not pendant in either tree".into(),
        ));
    };
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut remaining = peel.clone();
    let mut ops = Vec::new();
    while remaining.len() > 1 {
        let cands = forkops::applicable_ops(&cur1, &cur2).expect("leaf sets agree");
        let mut progressed = false;
        for op in &cands {
            if !remaining.contains(&op.leaf) {
                continue;
            }
            if remaining.len() == 2 {
                // the last two leaves: a kind-2 whose fork pairs them under
                // the parent leaf, followed by the kind-1
                if op.kind != 2 || op.fork_side() != Some(side) {
                    continue;
                }
                let fork = if side == 0 { &op.w1 } else { &op.w2 };
                if !remaining.contains(&fork[2]) || (fork[0] != p_leaf && fork[0] != q_leaf) {
                    continue;
                }
            } else if !matches!(op.kind, 2 | 3) || op.fork_side() != Some(side) {
                continue;
            } else {
                // inner peeling steps use forks inside the shrinking subtree
                let fork = if side == 0 { &op.w1 } else { &op.w2 };
                if !fork.iter().all(|l| remaining.contains(l)) {
                    continue;
                }
            }
            // check pendancy in the designated tree
            let fork_tree = if side == 0 { &cur1 } else { &cur2 };
            let fork = if side == 0 { &op.w1 } else { &op.w2 };
            let set: BTreeSet<String> = fork.iter().cloned().collect();
            if !fork_tree.is_pendant_leafset(&set) {
                continue;
            }
            let (n1, n2) = forkops::apply_op(&cur1, &cur2, op)?;
            cur1 = n1;
            cur2 = n2;
            remaining.remove(&op.leaf);
            ops.push(op.clone());
            progressed = true;
            break;
        }
        if !progressed {
            return Err(SearchError::Internal(
                "no applicable peeling operation found".into(),
            ));
        }
    }
    let last = remaining.iter().next().unwrap().clone();
    ops.push(make_kind1(&cur1, &cur2, &last)?);
    Ok(ops)
}

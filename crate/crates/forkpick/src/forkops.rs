//! The fork-operation calculus: applicability detection, application, and
//! validation of special, fork-picking, and cherry-picking sequences.
//!
//! Operation kinds and their witness tuples (`w1` in the first tree, `w2` in
//! the second):
//!
//! * kind 0 — both trees have the cherry `{x,y}`; witness `[x, y]` on both
//!   sides.
//! * kind 1 — the trees have cherries `{x,p}` and `{x,q}` with `p != q`;
//!   witnesses `[x, p]` and `[x, q]`.
//! * kind 2 — one tree has the three-leaf fork `(p,(x,y))`, the other the
//!   cherry `{x,p}`; fork witness `[p, x, y]`, cherry witness `[x, p]`.
//! * kind 3 — one tree has the balanced four-leaf fork `((y,x),(p,q))`, the
//!   other the cherry `{x,p}`; fork witness `[y, x, p, q]`, cherry witness
//!   `[x, p]`.
//!
//! Applying an operation removes the leaf `x` from both trees and suppresses
//! the resulting degree-two vertices; on two-leaf trees this removes the root
//! as well, leaving single-leaf trees.

use crate::model::{ModelError, PhyloTree};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForkError {
    #[error("trees have different leaf sets")]
    LeafSetMismatch,
    #[error("operation {0} does not match the trees: {1}")]
    Inapplicable(String, String),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
}

/// A single fork operation on a pair of trees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForkOp {
    pub kind: u8,
    pub leaf: String,
    pub w1: Vec<String>,
    pub w2: Vec<String>,
}

impl ForkOp {
    pub fn describe(&self) -> String {
        format!("o_{}({})", self.kind, self.leaf)
    }

    /// For kinds 2 and 3: which tree holds the fork (0 or 1)?
    pub fn fork_side(&self) -> Option<usize> {
        match self.kind {
            2 | 3 => {
                if self.w1.len() > 2 {
                    Some(0)
                } else {
                    Some(1)
                }
            }
            _ => None,
        }
    }

    fn witness(&self, side: usize) -> &[String] {
        if side == 0 {
            &self.w1
        } else {
            &self.w2
        }
    }
}

/// Block of a fork-picking sequence decomposition: a (possibly empty) run of
/// kind-0 operations or a special sequence ending in its kind-1 operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    TypeZeroRun,
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub len: usize,
}

/// A fork-picking sequence: operations covering all but one leaf, with the
/// unique block decomposition recorded for auditability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkPickingSequence {
    pub ops: Vec<ForkOp>,
    pub blocks: Vec<Block>,
}

impl ForkPickingSequence {
    /// weight = number of special blocks = number of kind-1 operations
    pub fn weight(&self) -> u32 {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Special)
            .count() as u32
    }

    /// Recompute the unique block decomposition from the op kinds.
    pub fn decompose(ops: &[ForkOp]) -> Result<Vec<Block>, ForkError> {
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < ops.len() {
            if ops[i].kind == 0 {
                let start = i;
                while i < ops.len() && ops[i].kind == 0 {
                    i += 1;
                }
                blocks.push(Block {
                    kind: BlockKind::TypeZeroRun,
                    len: i - start,
                });
            } else {
                let start = i;
                while i < ops.len() && matches!(ops[i].kind, 2 | 3) {
                    i += 1;
                }
                if i == ops.len() || ops[i].kind != 1 {
                    return Err(ForkError::InvalidSequence(
                        "a run of kind-2/3 operations must end with a kind-1 operation".into(),
                    ));
                }
                i += 1;
                blocks.push(Block {
                    kind: BlockKind::Special,
                    len: i - start,
                });
            }
        }
        Ok(blocks)
    }
}

/// A cherry-picking sequence: an order on all but one leaf (the final leaf is
/// implicit) with per-step bits marking whether the two restricted cherries
/// differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CherryPickingSequence {
    pub order: Vec<String>,
    pub counts: Vec<u8>,
}

impl CherryPickingSequence {
    pub fn weight(&self) -> u32 {
        self.counts.iter().map(|&c| c as u32).sum()
    }
}

/// Result of a validation run, with the violated property named when the
/// check fails.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Diagnosis {
    fn pass() -> Diagnosis {
        Diagnosis { ok: true, reason: None }
    }
    fn fail(reason: impl Into<String>) -> Diagnosis {
        Diagnosis {
            ok: false,
            reason: Some(reason.into()),
        }
    }
}

/// Which tree anchors the lca side condition of a special sequence: its
/// restriction at the block start (default) or the unrestricted input tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LcaScope {
    #[default]
    BlockStart,
    FullTree,
}

// ---------------------------------------------------------------------------
// Fork detection
// ---------------------------------------------------------------------------

/// Three-leaf fork patterns usable by operations: pendant forks plus, on a
/// three-leaf tree, the tree itself.
fn fork3_patterns(tree: &PhyloTree) -> Vec<(String, String, String)> {
    let mut out = tree.pendant_3forks();
    if tree.leaf_count() == 3 {
        let mut cherries = tree.cherries();
        if cherries.len() == 1 {
            let (x, y) = cherries.pop().unwrap();
            let outer = tree
                .leaf_labels()
                .into_iter()
                .find(|l| *l != x && *l != y)
                .unwrap();
            out.push((outer, x, y));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Four-leaf balanced fork patterns: pendant forks plus, on a balanced
/// four-leaf tree, the tree itself.
fn fork4_patterns(tree: &PhyloTree) -> Vec<((String, String), (String, String))> {
    let mut out = tree.pendant_4forks();
    if tree.leaf_count() == 4 {
        let cherries = tree.cherries();
        if cherries.len() == 2 {
            out.push((cherries[0].clone(), cherries[1].clone()));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// All operations matching one of the four patterns on the given trees,
/// sorted by (kind, leaf).
pub fn applicable_ops(t1: &PhyloTree, t2: &PhyloTree) -> Result<Vec<ForkOp>, ForkError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(ForkError::LeafSetMismatch);
    }
    if t1.leaf_count() < 2 {
        return Err(ForkError::Model(ModelError::TooFewLeaves(2)));
    }
    let mut out = Vec::new();
    // kind 0 and kind 1 from cherry partners
    for x in t1.leaf_labels() {
        let p1 = t1.cherry_partner(&x);
        let p2 = t2.cherry_partner(&x);
        match (p1, p2) {
            (Some(p), Some(q)) if p == q => out.push(ForkOp {
                kind: 0,
                leaf: x.clone(),
                w1: vec![x.clone(), p.clone()],
                w2: vec![x.clone(), q],
            }),
            (Some(p), Some(q)) => out.push(ForkOp {
                kind: 1,
                leaf: x.clone(),
                w1: vec![x.clone(), p],
                w2: vec![x.clone(), q],
            }),
            _ => {}
        }
    }
    // kinds 2 and 3, with the fork in either tree
    for (fork_side, fork_tree, cherry_tree) in [(0usize, t1, t2), (1usize, t2, t1)] {
        for (p, a, b) in fork3_patterns(fork_tree) {
            for (x, y) in [(a.clone(), b.clone()), (b, a)] {
                if cherry_tree.cherry_partner(&x).as_deref() == Some(p.as_str()) {
                    let fork_w = vec![p.clone(), x.clone(), y.clone()];
                    let cherry_w = vec![x.clone(), p.clone()];
                    let (w1, w2) = if fork_side == 0 {
                        (fork_w, cherry_w)
                    } else {
                        (cherry_w, fork_w)
                    };
                    out.push(ForkOp { kind: 2, leaf: x, w1, w2 });
                }
            }
        }
        for ((a, b), (c, d)) in fork4_patterns(fork_tree) {
            let quad = [
                (a.clone(), b.clone(), c.clone(), d.clone()),
                (b.clone(), a.clone(), c.clone(), d.clone()),
                (c.clone(), d.clone(), a.clone(), b.clone()),
                (d.clone(), c.clone(), a.clone(), b.clone()),
            ];
            for (x, y, o1, o2) in quad {
                let partner = cherry_tree.cherry_partner(&x);
                let p = match partner {
                    Some(p) if p == o1 || p == o2 => p,
                    _ => continue,
                };
                let q = if p == o1 { o2 } else { o1 };
                let fork_w = vec![y.clone(), x.clone(), p.clone(), q.clone()];
                let cherry_w = vec![x.clone(), p.clone()];
                let (w1, w2) = if fork_side == 0 {
                    (fork_w, cherry_w)
                } else {
                    (cherry_w, fork_w)
                };
                out.push(ForkOp { kind: 3, leaf: x, w1, w2 });
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Check that an operation matches the trees, naming the failed pattern.
pub fn validate_op(t1: &PhyloTree, t2: &PhyloTree, op: &ForkOp) -> Result<(), ForkError> {
    let fail = |msg: String| Err(ForkError::Inapplicable(op.describe(), msg));
    let x = &op.leaf;
    match op.kind {
        0 => {
            if op.w1.len() != 2 || op.w2.len() != 2 || op.w1[0] != *x || op.w2[0] != *x || op.w1[1] != op.w2[1] {
                return fail("kind-0 witnesses must be [x, y] on both sides".into());
            }
            let y = &op.w1[1];
            if t1.cherry_partner(x).as_deref() != Some(y) {
                return fail(format!("first tree has no cherry {{{}, {}}}", x, y));
            }
            if t2.cherry_partner(x).as_deref() != Some(y) {
                return fail(format!("second tree has no cherry {{{}, {}}}", x, y));
            }
        }
        1 => {
            if op.w1.len() != 2 || op.w2.len() != 2 || op.w1[0] != *x || op.w2[0] != *x {
                return fail("kind-1 witnesses must be [x, p] and [x, q]".into());
            }
            let (p, q) = (&op.w1[1], &op.w2[1]);
            if p == q {
                return fail("kind-1 requires distinct cherry partners".into());
            }
            if t1.cherry_partner(x).as_deref() != Some(p) {
                return fail(format!("first tree has no cherry {{{}, {}}}", x, p));
            }
            if t2.cherry_partner(x).as_deref() != Some(q) {
                return fail(format!("second tree has no cherry {{{}, {}}}", x, q));
            }
        }
        2 => {
            let side = op.fork_side().unwrap();
            let fork = op.witness(side);
            let cherry = op.witness(1 - side);
            if fork.len() != 3 || cherry.len() != 2 || fork[1] != *x || cherry[0] != *x || fork[0] != cherry[1] {
                return fail("kind-2 witnesses must be [p, x, y] and [x, p]".into());
            }
            let (p, y) = (&fork[0], &fork[2]);
            let fork_tree = if side == 0 { t1 } else { t2 };
            let cherry_tree = if side == 0 { t2 } else { t1 };
            let have = fork3_patterns(fork_tree);
            let key = {
                let (lo, hi) = if x < y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
                (p.clone(), lo, hi)
            };
            if !have.contains(&key) {
                return fail(format!("no three-leaf fork ({},({},{}))", p, x, y));
            }
            if cherry_tree.cherry_partner(x).as_deref() != Some(p) {
                return fail(format!("no cherry {{{}, {}}} opposite the fork", x, p));
            }
        }
        3 => {
            let side = op.fork_side().unwrap();
            let fork = op.witness(side);
            let cherry = op.witness(1 - side);
            if fork.len() != 4 || cherry.len() != 2 || fork[1] != *x || cherry[0] != *x || fork[2] != cherry[1] {
                return fail("kind-3 witnesses must be [y, x, p, q] and [x, p]".into());
            }
            let (y, p, q) = (&fork[0], &fork[2], &fork[3]);
            let fork_tree = if side == 0 { t1 } else { t2 };
            let cherry_tree = if side == 0 { t2 } else { t1 };
            let have = fork4_patterns(fork_tree);
            let c1 = if x < y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
            let c2 = if p < q { (p.clone(), q.clone()) } else { (q.clone(), p.clone()) };
            let key = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            if !have.contains(&key) {
                return fail(format!("no four-leaf fork (({},{}),({},{}))", y, x, p, q));
            }
            if cherry_tree.cherry_partner(x).as_deref() != Some(p) {
                return fail(format!("no cherry {{{}, {}}} opposite the fork", x, p));
            }
        }
        k => return fail(format!("unknown kind {}", k)),
    }
    Ok(())
}

/// Apply an operation: remove the leaf from both trees.
pub fn apply_op(
    t1: &PhyloTree,
    t2: &PhyloTree,
    op: &ForkOp,
) -> Result<(PhyloTree, PhyloTree), ForkError> {
    validate_op(t1, t2, op)?;
    Ok((t1.remove_leaf(&op.leaf)?, t2.remove_leaf(&op.leaf)?))
}

// ---------------------------------------------------------------------------
// Special sequences
// ---------------------------------------------------------------------------

/// Validate a special sequence for the given trees. `anchor`, when set,
/// replaces the block-start trees in the lca side condition (used by the
/// full-tree scope).
pub fn check_special_sequence(
    t1: &PhyloTree,
    t2: &PhyloTree,
    ops: &[ForkOp],
    anchor: Option<(&PhyloTree, &PhyloTree)>,
) -> Result<Diagnosis, ForkError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(ForkError::LeafSetMismatch);
    }
    let l = ops.len();
    let n = t1.leaf_count();
    if l == 0 {
        return Ok(Diagnosis::fail("a special sequence is non-empty"));
    }
    if n < 2 || l > n.saturating_sub(2) {
        return Ok(Diagnosis::fail(format!(
            "length {} exceeds the bound (leaf count {} minus 2)",
            l, n
        )));
    }
    // distinct leaves
    let mut seen = BTreeSet::new();
    for op in ops {
        if !seen.insert(op.leaf.clone()) {
            return Ok(Diagnosis::fail(format!("leaf {} is used twice", op.leaf)));
        }
    }
    let (a1, a2) = anchor.unwrap_or((t1, t2));

    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut fork_side: Option<usize> = None;
    for (i, op) in ops.iter().enumerate() {
        let last = i + 1 == l;
        if last {
            if op.kind != 1 {
                return Ok(Diagnosis::fail(
                    "the final operation must be of kind 1".to_string(),
                ));
            }
        } else {
            if !matches!(op.kind, 2 | 3) {
                return Ok(Diagnosis::fail(format!(
                    "operation {} must be of kind 2 or 3 (property i)",
                    op.describe()
                )));
            }
            let side = op.fork_side().unwrap();
            if let Some(s) = fork_side {
                if s != side {
                    return Ok(Diagnosis::fail(
                        "all forks must sit in the same designated tree (property i)".to_string(),
                    ));
                }
            } else {
                fork_side = Some(side);
            }
            // forks must be pendant in the designated tree's restriction
            let fork_tree = if side == 0 { &cur1 } else { &cur2 };
            let fork = op.witness(side);
            let pendant_ok = match op.kind {
                2 => fork_tree_has_fork3(fork_tree, &fork[0], &fork[1], &fork[2]),
                3 => fork_tree_has_fork4(fork_tree, &fork[0], &fork[1], &fork[2], &fork[3]),
                _ => unreachable!(),
            };
            if !pendant_ok {
                return Ok(Diagnosis::fail(format!(
                    "the fork of {} is not a pendant subtree of the designated tree (property i)",
                    op.describe()
                )));
            }
        }
        if let Err(e) = validate_op(&cur1, &cur2, op) {
            return Ok(Diagnosis::fail(format!("{}", e)));
        }
        let (n1, n2) = apply_op(&cur1, &cur2, op)?;
        cur1 = n1;
        cur2 = n2;
    }
    // property (ii): the last-but-one operation pairs the final two leaves
    if l >= 2 {
        let prev = &ops[l - 2];
        let lastop = &ops[l - 1];
        if prev.kind != 2 {
            return Ok(Diagnosis::fail(
                "the last-but-one operation must be of kind 2 (property ii)".to_string(),
            ));
        }
        let side = prev.fork_side().unwrap();
        let fork = prev.witness(side);
        let p = &fork[0];
        if fork[2] != lastop.leaf {
            return Ok(Diagnosis::fail(format!(
                "the kind-2 fork of {} must pair {} with the final leaf {} (property ii)",
                prev.describe(),
                prev.leaf,
                lastop.leaf
            )));
        }
        // the kind-1 op uses (p, x_l) on the designated side and (q, x_l) elsewhere
        let same_side = lastop.witness(side);
        let other_side = lastop.witness(1 - side);
        if same_side[1] != *p {
            return Ok(Diagnosis::fail(format!(
                "the kind-1 cherry on the designated side must be {{{}, {}}} (property ii)",
                lastop.leaf, p
            )));
        }
        if other_side[1] == *p {
            return Ok(Diagnosis::fail(
                "the two kind-1 cherries must use distinct partners (property ii)".to_string(),
            ));
        }
    }
    // property (iii): every earlier leaf lies below the join of the final two
    if l > 2 {
        let side = fork_side.unwrap();
        let anchor_tree = if side == 0 { a1 } else { a2 };
        let xl1 = ops[l - 2].leaf.clone();
        let xl = ops[l - 1].leaf.clone();
        let mut pair = BTreeSet::new();
        pair.insert(xl1.clone());
        pair.insert(xl.clone());
        let pair_lca = anchor_tree.lca(&pair)?;
        for op in &ops[..l - 2] {
            let mut triple = pair.clone();
            triple.insert(op.leaf.clone());
            let triple_lca = anchor_tree.lca(&triple)?;
            if triple_lca != pair_lca {
                return Ok(Diagnosis::fail(format!(
                    "leaf {} does not lie below the join of {} and {} (property iii)",
                    op.leaf, xl1, xl
                )));
            }
        }
    }
    Ok(Diagnosis::pass())
}

fn fork_tree_has_fork3(tree: &PhyloTree, p: &str, x: &str, y: &str) -> bool {
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    tree.pendant_3forks()
        .iter()
        .any(|(a, b, c)| a == p && b == lo && c == hi)
}

fn fork_tree_has_fork4(tree: &PhyloTree, y: &str, x: &str, p: &str, q: &str) -> bool {
    let c1 = if x < y {
        (x.to_string(), y.to_string())
    } else {
        (y.to_string(), x.to_string())
    };
    let c2 = if p < q {
        (p.to_string(), q.to_string())
    } else {
        (q.to_string(), p.to_string())
    };
    let key = if c1 < c2 { (c1, c2) } else { (c2, c1) };
    tree.pendant_4forks().contains(&key)
}

// ---------------------------------------------------------------------------
// Fork-picking sequences
// ---------------------------------------------------------------------------

/// Validate a fork-picking sequence, including its stored block
/// decomposition.
pub fn check_fork_picking_sequence(
    t1: &PhyloTree,
    t2: &PhyloTree,
    seq: &ForkPickingSequence,
    scope: LcaScope,
) -> Result<Diagnosis, ForkError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(ForkError::LeafSetMismatch);
    }
    let n = t1.leaf_count();
    if seq.ops.len() + 1 != n {
        return Ok(Diagnosis::fail(format!(
            "sequence has {} operations, expected {}",
            seq.ops.len(),
            n - 1
        )));
    }
    let mut leaves = BTreeSet::new();
    for op in &seq.ops {
        if !leaves.insert(op.leaf.clone()) {
            return Ok(Diagnosis::fail(format!("leaf {} is used twice", op.leaf)));
        }
        if t1.leaf_node(&op.leaf).is_none() {
            return Ok(Diagnosis::fail(format!("unknown leaf {}", op.leaf)));
        }
    }
    let blocks = match ForkPickingSequence::decompose(&seq.ops) {
        Ok(b) => b,
        Err(e) => return Ok(Diagnosis::fail(format!("{}", e))),
    };
    if blocks != seq.blocks {
        return Ok(Diagnosis::fail(
            "stored block decomposition does not match the operations".to_string(),
        ));
    }
    let specials = blocks.iter().filter(|b| b.kind == BlockKind::Special).count();
    if specials > 0 {
        match blocks.last() {
            Some(b) if b.kind == BlockKind::TypeZeroRun && b.len > 0 => {}
            _ => {
                return Ok(Diagnosis::fail(
                    "the final block must be a non-empty run of kind-0 operations".to_string(),
                ))
            }
        }
    }
    // simulate block by block
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut pos = 0;
    for block in &blocks {
        let ops = &seq.ops[pos..pos + block.len];
        pos += block.len;
        match block.kind {
            BlockKind::TypeZeroRun => {
                for op in ops {
                    if let Err(e) = validate_op(&cur1, &cur2, op) {
                        return Ok(Diagnosis::fail(format!("{}", e)));
                    }
                    let (n1, n2) = apply_op(&cur1, &cur2, op)?;
                    cur1 = n1;
                    cur2 = n2;
                }
            }
            BlockKind::Special => {
                let anchor = match scope {
                    LcaScope::BlockStart => None,
                    LcaScope::FullTree => Some((t1, t2)),
                };
                let diag = check_special_sequence(&cur1, &cur2, ops, anchor)?;
                if !diag.ok {
                    return Ok(diag);
                }
                for op in ops {
                    let (n1, n2) = apply_op(&cur1, &cur2, op)?;
                    cur1 = n1;
                    cur2 = n2;
                }
            }
        }
    }
    Ok(Diagnosis::pass())
}

// ---------------------------------------------------------------------------
// Cherry-picking sequences
// ---------------------------------------------------------------------------

/// Validate a cherry-picking sequence: at each step the leaf is in a cherry
/// of both restrictions, and the stored bit equals "the two cherries differ".
pub fn check_cherry_picking_sequence(
    t1: &PhyloTree,
    t2: &PhyloTree,
    cps: &CherryPickingSequence,
) -> Result<Diagnosis, ForkError> {
    if t1.leaf_label_set() != t2.leaf_label_set() {
        return Err(ForkError::LeafSetMismatch);
    }
    let n = t1.leaf_count();
    if cps.order.len() + 1 != n || cps.counts.len() != cps.order.len() {
        return Ok(Diagnosis::fail(format!(
            "order must list {} distinct leaves with one bit each",
            n - 1
        )));
    }
    let mut seen = BTreeSet::new();
    for x in &cps.order {
        if t1.leaf_node(x).is_none() {
            return Ok(Diagnosis::fail(format!("unknown leaf {}", x)));
        }
        if !seen.insert(x.clone()) {
            return Ok(Diagnosis::fail(format!("leaf {} is used twice", x)));
        }
    }
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    for (i, x) in cps.order.iter().enumerate() {
        let p1 = cur1.cherry_partner(x);
        let p2 = cur2.cherry_partner(x);
        let (p1, p2) = match (p1, p2) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Ok(Diagnosis::fail(format!(
                    "at step {} leaf {} is not in a cherry of both restrictions",
                    i + 1,
                    x
                )))
            }
        };
        let expect = u8::from(p1 != p2);
        if cps.counts[i] != expect {
            return Ok(Diagnosis::fail(format!(
                "at step {} the cherry count should be {}",
                i + 1,
                expect
            )));
        }
        cur1 = cur1.remove_leaf(x)?;
        cur2 = cur2.remove_leaf(x)?;
    }
    Ok(Diagnosis::pass())
}

/// Derive the cherry-picking sequence induced by a valid fork-picking
/// sequence: the leaf order with bits marking differing cherries.
pub fn fork_to_cherry(
    t1: &PhyloTree,
    t2: &PhyloTree,
    seq: &ForkPickingSequence,
) -> Result<CherryPickingSequence, ForkError> {
    let diag = check_fork_picking_sequence(t1, t2, seq, LcaScope::BlockStart)?;
    if !diag.ok {
        return Err(ForkError::InvalidSequence(diag.reason.unwrap_or_default()));
    }
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut order = Vec::new();
    let mut counts = Vec::new();
    for op in &seq.ops {
        let p1 = cur1.cherry_partner(&op.leaf).expect("validated sequence");
        let p2 = cur2.cherry_partner(&op.leaf).expect("validated sequence");
        order.push(op.leaf.clone());
        counts.push(u8::from(p1 != p2));
        cur1 = cur1.remove_leaf(&op.leaf)?;
        cur2 = cur2.remove_leaf(&op.leaf)?;
    }
    let cps = CherryPickingSequence { order, counts };
    let check = check_cherry_picking_sequence(t1, t2, &cps)?;
    debug_assert!(check.ok, "{:?}", check.reason);
    Ok(cps)
}

/// Turn a valid cherry-picking sequence into a fork-picking sequence: kind-1
/// where the bit is set, kind-0 otherwise, each special block a singleton.
pub fn cherry_to_fork(
    t1: &PhyloTree,
    t2: &PhyloTree,
    cps: &CherryPickingSequence,
) -> Result<ForkPickingSequence, ForkError> {
    let diag = check_cherry_picking_sequence(t1, t2, cps)?;
    if !diag.ok {
        return Err(ForkError::InvalidSequence(diag.reason.unwrap_or_default()));
    }
    let mut cur1 = t1.clone();
    let mut cur2 = t2.clone();
    let mut ops = Vec::new();
    for x in &cps.order {
        let p1 = cur1.cherry_partner(x).expect("validated sequence");
        let p2 = cur2.cherry_partner(x).expect("validated sequence");
        let kind = u8::from(p1 != p2);
        ops.push(ForkOp {
            kind,
            leaf: x.clone(),
            w1: vec![x.clone(), p1],
            w2: vec![x.clone(), p2],
        });
        cur1 = cur1.remove_leaf(x)?;
        cur2 = cur2.remove_leaf(x)?;
    }
    let blocks = ForkPickingSequence::decompose(&ops)?;
    let seq = ForkPickingSequence { ops, blocks };
    let check = check_fork_picking_sequence(t1, t2, &seq, LcaScope::BlockStart)?;
    if !check.ok {
        return Err(ForkError::InvalidSequence(check.reason.unwrap_or_default()));
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_tree;

    fn t(s: &str) -> PhyloTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn type0_on_isomorphic_trees() {
        let a = t("((a,b),c);");
        let ops = applicable_ops(&a, &a).unwrap();
        let zeros: Vec<&ForkOp> = ops.iter().filter(|o| o.kind == 0).collect();
        assert_eq!(zeros.len(), 2); // o(a) and o(b) for the cherry {a,b}
        assert!(ops.iter().all(|o| o.kind == 0 || o.kind == 2));
        let op = zeros[0];
        let (r1, r2) = apply_op(&a, &a, op).unwrap();
        assert_eq!(r1.canonical_form(), r2.canonical_form());
    }

    #[test]
    fn apply_symmetric_removal() {
        let a = t("((a,b),c);");
        let op = ForkOp {
            kind: 0,
            leaf: "a".into(),
            w1: vec!["a".into(), "b".into()],
            w2: vec!["a".into(), "b".into()],
        };
        let (r1, r2) = apply_op(&a, &a, &op).unwrap();
        assert_eq!(r1.canonical_form(), "(b,c)");
        assert_eq!(r2.canonical_form(), "(b,c)");
        // down to the degenerate single-leaf trees
        let op2 = ForkOp {
            kind: 0,
            leaf: "b".into(),
            w1: vec!["b".into(), "c".into()],
            w2: vec!["b".into(), "c".into()],
        };
        let (s1, _) = apply_op(&r1, &r2, &op2).unwrap();
        assert!(s1.is_single_leaf());
    }

    #[test]
    fn inapplicable_named() {
        let a = t("((a,b),c);");
        let b = t("((a,c),b);");
        let op = ForkOp {
            kind: 0,
            leaf: "a".into(),
            w1: vec!["a".into(), "b".into()],
            w2: vec!["a".into(), "b".into()],
        };
        let err = apply_op(&a, &b, &op).unwrap_err();
        assert!(format!("{}", err).contains("o_0(a)"));
    }

    #[test]
    fn single_kind1_is_special() {
        let a = t("((p,x),(q,y));");
        let b = t("((q,x),(p,y));");
        let ops = applicable_ops(&a, &b).unwrap();
        let k1: Vec<&ForkOp> = ops.iter().filter(|o| o.kind == 1 && o.leaf == "x").collect();
        assert_eq!(k1.len(), 1);
        let diag = check_special_sequence(&a, &b, &[k1[0].clone()], None).unwrap();
        assert!(diag.ok, "{:?}", diag.reason);
    }

    #[test]
    fn all_zero_sequence_has_weight_zero() {
        let a = t("((a,b),(c,d));");
        let mut cur1 = a.clone();
        let mut cur2 = a.clone();
        let mut ops = Vec::new();
        for leaf in ["a", "c", "b"] {
            let p = cur1.cherry_partner(leaf).unwrap();
            ops.push(ForkOp {
                kind: 0,
                leaf: leaf.into(),
                w1: vec![leaf.into(), p.clone()],
                w2: vec![leaf.into(), p.clone()],
            });
            cur1 = cur1.remove_leaf(leaf).unwrap();
            cur2 = cur2.remove_leaf(leaf).unwrap();
        }
        let blocks = ForkPickingSequence::decompose(&ops).unwrap();
        let seq = ForkPickingSequence { ops, blocks };
        assert_eq!(seq.weight(), 0);
        let diag = check_fork_picking_sequence(&a, &a, &seq, LcaScope::BlockStart).unwrap();
        assert!(diag.ok, "{:?}", diag.reason);
        let cps = fork_to_cherry(&a, &a, &seq).unwrap();
        assert!(cps.counts.iter().all(|&c| c == 0));
        let back = cherry_to_fork(&a, &a, &cps).unwrap();
        assert_eq!(back.weight(), 0);
    }

    #[test]
    fn final_count_one_is_rejected() {
        let a = t("((a,b),c);");
        let cps = CherryPickingSequence {
            order: vec!["a".into(), "b".into()],
            counts: vec![0, 1],
        };
        let diag = check_cherry_picking_sequence(&a, &a, &cps).unwrap();
        assert!(!diag.ok);
        assert!(cherry_to_fork(&a, &a, &cps).is_err());
    }

    #[test]
    fn first_leaf_not_in_cherry_fails_at_step_one() {
        let a = t("((a,b),(c,(d,e)));");
        let b = t("((a,b),(c,(d,e)));");
        let cps = CherryPickingSequence {
            order: vec!["c".into(), "a".into(), "b".into(), "d".into()],
            counts: vec![0, 0, 0, 0],
        };
        let diag = check_cherry_picking_sequence(&a, &b, &cps).unwrap();
        assert!(!diag.ok);
        assert!(diag.reason.unwrap().contains("step 1"));
    }
}

//! Build a temporal tree-child network from a fork-picking sequence, by
//! induction on the weight: the base is the common tree left after the final
//! kind-0 run; each special block re-inserts its leaves around a fresh
//! reticulation whose parents subdivide the pendant edges at the two kind-1
//! cherry partners. The result rigidly displays both input trees with at
//! most weight-many reticulations and is fully re-verified.

use crate::display::{self, DisplayMapJson};
use crate::forkops::{self, Block, BlockKind, ForkOp, ForkPickingSequence, LcaScope};
use crate::model::{Dag, PhyloNetwork, PhyloTree};
use crate::netcheck;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("{0}")]
    Fork(#[from] forkops::ForkError),
    #[error("{0}")]
    Model(#[from] crate::model::ModelError),
    #[error("construction self-check failed: {0}")]
    SelfCheck(String),
}

/// One insertion step of the construction, for replay and audit.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub leaf: String,
    /// Leaf label whose pendant edge was subdivided to host the new leaf
    /// (absent for the reticulation step, which names both parents).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    /// For the kind-1 leaf: the two pendant edges that were subdivided to
    /// create the reticulation parents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reticulation_between: Option<(String, String)>,
}

/// Output of `build_network`: the constructed network with its temporal
/// labelling and verifying display maps.
#[derive(Debug, Clone)]
pub struct ConstructionTrace {
    pub steps: Vec<TraceStep>,
    pub network: PhyloNetwork,
    pub temporal: Vec<u64>,
    pub witnesses: (display::DisplayMap, display::DisplayMap),
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionTraceJson {
    pub steps: Vec<TraceStep>,
    pub network: String,
    pub reticulation_count: usize,
    pub temporal: Vec<u64>,
    pub witness_first: DisplayMapJson,
    pub witness_second: DisplayMapJson,
}

impl ConstructionTrace {
    pub fn to_json(&self, t1: &PhyloTree, t2: &PhyloTree) -> ConstructionTraceJson {
        ConstructionTraceJson {
            steps: self.steps.clone(),
            network: self.network.canonical_form(),
            reticulation_count: self.network.reticulation_count(),
            temporal: self.temporal.clone(),
            witness_first: self.witnesses.0.to_json(t1),
            witness_second: self.witnesses.1.to_json(t2),
        }
    }
}

/// Mutable edge-list view of a network under construction.
struct NetBuilder {
    labels: Vec<Option<String>>,
    edges: Vec<(usize, usize)>,
}

impl NetBuilder {
    fn from_tree(tree: &PhyloTree) -> NetBuilder {
        let net = PhyloNetwork::from_tree(tree);
        NetBuilder {
            labels: (0..net.node_count())
                .map(|v| net.label(v).map(|s| s.to_string()))
                .collect(),
            edges: net.edges(),
        }
    }

    fn add_node(&mut self, label: Option<String>) -> usize {
        self.labels.push(label);
        self.labels.len() - 1
    }

    fn leaf_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.as_deref() == Some(label))
    }

    fn parent_edge(&self, v: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.1 == v)
    }

    /// Subdivide the pendant edge above the named leaf, returning the new
    /// middle vertex.
    fn subdivide_above(&mut self, leaf: &str) -> Result<usize, ConstructError> {
        let v = self
            .leaf_id(leaf)
            .ok_or_else(|| ConstructError::SelfCheck(format!("leaf {} not in the network", leaf)))?;
        let ei = self
            .parent_edge(v)
            .ok_or_else(|| ConstructError::SelfCheck(format!("leaf {} has no parent edge", leaf)))?;
        let (p, _) = self.edges[ei];
        let m = self.add_node(None);
        self.edges[ei] = (p, m);
        self.edges.push((m, v));
        Ok(m)
    }

    /// Insert a new leaf next to an existing leaf, forming a cherry.
    fn insert_leaf_beside(&mut self, new_leaf: &str, beside: &str) -> Result<(), ConstructError> {
        let m = self.subdivide_above(beside)?;
        let l = self.add_node(Some(new_leaf.to_string()));
        self.edges.push((m, l));
        Ok(())
    }

    fn build(&self) -> Result<PhyloNetwork, ConstructError> {
        let mut dag = Dag::new();
        for l in &self.labels {
            dag.add_node(l.clone());
        }
        for &(u, v) in &self.edges {
            dag.add_edge(u, v);
        }
        PhyloNetwork::from_dag(dag)
            .map_err(|e| ConstructError::SelfCheck(format!("intermediate network invalid: {}", e)))
    }
}

/// Build a temporal tree-child network that rigidly displays both trees,
/// with reticulation count at most the weight of the sequence. Every
/// intermediate network is re-checked for validity and temporal consistency;
/// the final result is verified against both trees.
pub fn build_network(
    t1: &PhyloTree,
    t2: &PhyloTree,
    seq: &ForkPickingSequence,
) -> Result<ConstructionTrace, ConstructError> {
    let diag = forkops::check_fork_picking_sequence(t1, t2, seq, LcaScope::BlockStart)?;
    if !diag.ok {
        return Err(ConstructError::InvalidSequence(diag.reason.unwrap_or_default()));
    }
    let mut steps = Vec::new();
    let builder = build_rec(t1, t2, &seq.ops, &seq.blocks, &mut steps)?;
    let network = builder.build()?;
    let temporal = netcheck::temporal_labelling(&network).ok_or_else(|| {
        ConstructError::SelfCheck("constructed network admits no temporal labelling".into())
    })?;
    if !netcheck::is_tree_child(&network) {
        return Err(ConstructError::SelfCheck("constructed network is not tree-child".into()));
    }
    if network.reticulation_count() as u32 > seq.weight() {
        return Err(ConstructError::SelfCheck(format!(
            "reticulation count {} exceeds the sequence weight {}",
            network.reticulation_count(),
            seq.weight()
        )));
    }
    let witnesses = display::rigidly_displays(&network, t1, t2)
        .map_err(|e| ConstructError::SelfCheck(format!("{}", e)))?
        .ok_or_else(|| {
            ConstructError::SelfCheck("constructed network does not rigidly display the trees".into())
        })?;
    Ok(ConstructionTrace {
        steps,
        network,
        temporal,
        witnesses,
    })
}

fn build_rec(
    t1: &PhyloTree,
    t2: &PhyloTree,
    ops: &[ForkOp],
    blocks: &[Block],
    steps: &mut Vec<TraceStep>,
) -> Result<NetBuilder, ConstructError> {
    // locate the first special block; everything before it is one kind-0 run
    let (c_len, special) = match blocks.first() {
        None => (0, None),
        Some(b) if b.kind == BlockKind::TypeZeroRun => (b.len, blocks.get(1)),
        Some(b) => (0, Some(b)),
    };
    let special = match special {
        None => {
            // all kind-0: the trees are isomorphic and the network is the tree
            debug_assert!(t1.isomorphic(t2).unwrap_or(false));
            return Ok(NetBuilder::from_tree(t1));
        }
        Some(b) => *b,
    };
    let c_ops = &ops[..c_len];
    let s_ops = &ops[c_len..c_len + special.len];
    let rest_ops = &ops[c_len + special.len..];
    let rest_blocks = if c_len == 0 { &blocks[1..] } else { &blocks[2..] };

    // trees after C1 and S1
    let mut mid1 = t1.clone();
    let mut mid2 = t2.clone();
    for op in c_ops.iter().chain(s_ops.iter()) {
        let (a, b) = forkops::apply_op(&mid1, &mid2, op)?;
        mid1 = a;
        mid2 = b;
    }

    let mut builder = build_rec(&mid1, &mid2, rest_ops, rest_blocks, steps)?;

    // re-insert the special block's leaves around a fresh reticulation
    let l = s_ops.len();
    let last = &s_ops[l - 1];
    debug_assert_eq!(last.kind, 1);
    // orientation: p is the partner on the fork side of the block (for a
    // single kind-1 the side is immaterial)
    let side = s_ops
        .iter()
        .rev()
        .find_map(|op| op.fork_side())
        .unwrap_or(0);
    let p = if side == 0 { last.w1[1].clone() } else { last.w2[1].clone() };
    let q = if side == 0 { last.w2[1].clone() } else { last.w1[1].clone() };
    let x = last.leaf.clone();

    let up = builder.subdivide_above(&p)?;
    let uq = builder.subdivide_above(&q)?;
    let v = builder.add_node(None);
    builder.edges.push((up, v));
    builder.edges.push((uq, v));
    let xl = builder.add_node(Some(x.clone()));
    builder.edges.push((v, xl));
    steps.push(TraceStep {
        leaf: x.clone(),
        at: None,
        reticulation_between: Some((p.clone(), q.clone())),
    });
    checkpoint(&builder)?;

    if l >= 2 {
        // the kind-2 leaf forms a cherry with x
        let y = s_ops[l - 2].leaf.clone();
        builder.insert_leaf_beside(&y, &x)?;
        steps.push(TraceStep {
            leaf: y,
            at: Some(x.clone()),
            reticulation_between: None,
        });
        checkpoint(&builder)?;
    }
    // earlier block leaves, in reverse removal order
    for op in s_ops[..l.saturating_sub(2)].iter().rev() {
        let fork = if side == 0 { &op.w1 } else { &op.w2 };
        let beside = match op.kind {
            // fork (a,(x_i,b)): the new leaf goes on the pendant edge at b
            2 => fork[2].clone(),
            // fork ((a,x_i),(b,c)): the new leaf goes on the pendant edge at a
            3 => fork[0].clone(),
            k => {
                return Err(ConstructError::SelfCheck(format!(
                    "unexpected kind-{} operation inside a special block",
                    k
                )))
            }
        };
        builder.insert_leaf_beside(&op.leaf, &beside)?;
        steps.push(TraceStep {
            leaf: op.leaf.clone(),
            at: Some(beside),
            reticulation_between: None,
        });
        checkpoint(&builder)?;
    }
    // the kind-0 leaves, in reverse removal order, beside their partners
    for op in c_ops.iter().rev() {
        let partner = op.w1[1].clone();
        builder.insert_leaf_beside(&op.leaf, &partner)?;
        steps.push(TraceStep {
            leaf: op.leaf.clone(),
            at: Some(partner),
            reticulation_between: None,
        });
        checkpoint(&builder)?;
    }
    Ok(builder)
}

/// Re-derive the temporal labelling from scratch after an insertion.
fn checkpoint(builder: &NetBuilder) -> Result<(), ConstructError> {
    let net = builder.build()?;
    if netcheck::temporal_labelling(&net).is_none() {
        return Err(ConstructError::SelfCheck(
            "intermediate network lost temporal consistency".into(),
        ));
    }
    if !netcheck::is_tree_child(&net) {
        return Err(ConstructError::SelfCheck(
            "intermediate network lost the tree-child property".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_tree;
    use crate::search::{min_weight_fork_picking, Limits, Outcome};

    #[test]
    fn isomorphic_base_case() {
        let a = parse_tree("((a,b),(c,d));").unwrap();
        let res = min_weight_fork_picking(&a, &a, Limits::default()).unwrap();
        let seq = match res.outcome {
            Outcome::Optimal { witness, .. } => witness,
            _ => panic!("isomorphic pair is feasible"),
        };
        let trace = build_network(&a, &a, &seq).unwrap();
        assert_eq!(trace.network.reticulation_count(), 0);
        assert!(trace.network.to_tree().unwrap().isomorphic(&a).unwrap());
    }

    #[test]
    fn weight_one_exchange_builds_single_reticulation() {
        let a = parse_tree("((p,x),(q,z));").unwrap();
        let b = parse_tree("(p,((q,x),z));").unwrap();
        let res = min_weight_fork_picking(&a, &b, Limits::default()).unwrap();
        let seq = match res.outcome {
            Outcome::Optimal { witness, .. } => witness,
            _ => panic!("feasible"),
        };
        assert_eq!(seq.weight(), 1);
        let trace = build_network(&a, &b, &seq).unwrap();
        assert_eq!(trace.network.reticulation_count(), 1);
        assert!(crate::display::weakly_displays(&a, &trace.network).unwrap());
        assert!(crate::display::weakly_displays(&b, &trace.network).unwrap());
    }
}

//! Class predicates and the temporal-labelling decision procedure for
//! networks: structural validity, tree-child, shortcut-freeness (normality)
//! and temporal consistency.

use crate::model::{Dag, NodeId, PhyloNetwork, Role};
use serde::Serialize;

/// Report of the structural and class checks for a (possibly invalid) rooted
/// DAG. `is_normal = is_tree_child && !has_shortcut`; the class flags are all
/// false when the input is not a valid network.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub is_valid_network: bool,
    pub is_tree_child: bool,
    pub has_shortcut: bool,
    pub is_normal: bool,
    pub is_temporal: bool,
    pub witness: Option<String>,
}

/// First violated structural rule of a raw DAG, or None when it is a valid
/// phylogenetic network.
pub fn validate_raw(dag: &Dag) -> Option<String> {
    if dag.is_empty() {
        return Some("empty graph".into());
    }
    let roots = dag.roots();
    if roots.len() != 1 {
        return Some(format!("expected exactly one indegree-0 vertex, found {}", roots.len()));
    }
    let root = roots[0];
    if dag.children[root].len() != 2 {
        return Some(format!(
            "root must have outdegree 2, vertex {} has outdegree {}",
            root,
            dag.children[root].len()
        ));
    }
    for v in 0..dag.len() {
        if v == root {
            continue;
        }
        let ind = dag.parents[v].len();
        let outd = dag.children[v].len();
        let ok = matches!((ind, outd), (1, 2) | (1, 0) | (2, 1));
        if !ok {
            return Some(format!(
                "vertex {} has indegree {} and outdegree {}",
                v, ind, outd
            ));
        }
        if outd == 0 {
            match &dag.labels[v] {
                None => return Some(format!("leaf vertex {} is unlabelled", v)),
                Some(l) => {
                    if !crate::model::valid_label(l) {
                        return Some(format!("leaf vertex {} has invalid label '{}'", v, l));
                    }
                }
            }
        }
    }
    let mut labels: Vec<&String> = dag.labels.iter().flatten().collect();
    labels.sort();
    for w in labels.windows(2) {
        if w[0] == w[1] {
            return Some(format!("duplicate leaf label '{}'", w[0]));
        }
    }
    if let Some((u, v)) = dag.has_parallel_edges() {
        return Some(format!("parallel edges from vertex {} to vertex {}", u, v));
    }
    if dag.topo_order().is_none() {
        return Some("directed cycle".into());
    }
    None
}

/// Full structural and class report for a raw DAG.
pub fn validate(dag: &Dag) -> ClassReport {
    if let Some(witness) = validate_raw(dag) {
        return ClassReport {
            is_valid_network: false,
            is_tree_child: false,
            has_shortcut: false,
            is_normal: false,
            is_temporal: false,
            witness: Some(witness),
        };
    }
    let net = PhyloNetwork::from_dag(dag.clone()).expect("validate_raw passed");
    let tc = is_tree_child(&net);
    let sc = has_shortcut(&net);
    let temporal = temporal_labelling(&net).is_some();
    let witness = if !tc {
        first_tree_child_violation(&net)
    } else if sc {
        first_shortcut(&net).map(|(u, v)| format!("shortcut edge ({}, {})", u, v))
    } else {
        None
    };
    ClassReport {
        is_valid_network: true,
        is_tree_child: tc,
        has_shortcut: sc,
        is_normal: tc && !sc,
        is_temporal: temporal,
        witness,
    }
}

/// True iff every non-leaf vertex has at least one child that is not a
/// reticulation.
pub fn is_tree_child(net: &PhyloNetwork) -> bool {
    first_tree_child_violation(net).is_none()
}

fn first_tree_child_violation(net: &PhyloNetwork) -> Option<String> {
    for v in 0..net.node_count() {
        if net.role(v) == Role::Leaf {
            continue;
        }
        let ok = net
            .children(v)
            .iter()
            .any(|&c| matches!(net.role(c), Role::Tree | Role::Leaf));
        if !ok {
            return Some(format!("vertex {} has only reticulation children", v));
        }
    }
    None
}

/// True iff some edge (u,v) coexists with a directed u-to-v path of two or
/// more edges.
pub fn has_shortcut(net: &PhyloNetwork) -> bool {
    first_shortcut(net).is_some()
}

fn first_shortcut(net: &PhyloNetwork) -> Option<(NodeId, NodeId)> {
    for (u, v) in net.edges() {
        // a second route must leave u through a different child
        for &c in net.children(u) {
            if c != v && net.reaches(c, v) {
                return Some((u, v));
            }
        }
    }
    None
}

/// Decide whether the network admits a temporal labelling and return one if
/// so, with small non-negative integer times.
///
/// Each reticulation is merged with both its parents into an equivalence
/// class; the network is temporal iff the quotient of the strict (tree-edge)
/// relation over these classes is acyclic. Times are longest-path levels in
/// the quotient DAG.
pub fn temporal_labelling(net: &PhyloNetwork) -> Option<Vec<u64>> {
    let n = net.node_count();
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut Vec<usize>, x: usize) -> usize {
        if uf[x] != x {
            let r = find(uf, uf[x]);
            uf[x] = r;
        }
        uf[x]
    }
    for v in 0..n {
        if net.role(v) == Role::Reticulation {
            for &p in net.parents(v) {
                let a = find(&mut uf, v);
                let b = find(&mut uf, p);
                uf[a] = b;
            }
        }
    }
    // strict edges: (p, q) with q not a reticulation
    let mut class_edges: Vec<(usize, usize)> = Vec::new();
    for (p, q) in net.edges() {
        if net.role(q) != Role::Reticulation {
            let a = find(&mut uf, p);
            let b = find(&mut uf, q);
            if a == b {
                return None;
            }
            class_edges.push((a, b));
        }
    }
    // longest-path levels over the class DAG
    let mut level = vec![0u64; n];
    let mut changed = true;
    let mut rounds = 0usize;
    while changed {
        changed = false;
        rounds += 1;
        if rounds > n + 1 {
            return None; // cycle among classes
        }
        for &(a, b) in &class_edges {
            if level[b] < level[a] + 1 {
                level[b] = level[a] + 1;
                changed = true;
            }
        }
    }
    let mut time = vec![0u64; n];
    for v in 0..n {
        time[v] = level[find(&mut uf, v)];
    }
    // self-check against the defining constraints
    for (p, q) in net.edges() {
        if net.role(q) == Role::Reticulation {
            if time[p] != time[q] {
                return None;
            }
        } else if time[p] >= time[q] {
            return None;
        }
    }
    Some(time)
}

/// Exhaustive assignment oracle for small networks: does any assignment of
/// times in 0..bound satisfy the temporal constraints? Intended for
/// cross-checking `temporal_labelling` on networks with few vertices.
pub fn temporal_brute_force(net: &PhyloNetwork, bound: u64) -> bool {
    let n = net.node_count();
    let edges = net.edges();
    let mut time = vec![0u64; n];
    fn rec(
        i: usize,
        n: usize,
        bound: u64,
        time: &mut Vec<u64>,
        edges: &[(NodeId, NodeId)],
        net: &PhyloNetwork,
    ) -> bool {
        if i == n {
            return edges.iter().all(|&(p, q)| {
                if net.role(q) == Role::Reticulation {
                    time[p] == time[q]
                } else {
                    time[p] < time[q]
                }
            });
        }
        for t in 0..bound {
            time[i] = t;
            // partial pruning: constraints among assigned vertices
            let ok = edges.iter().all(|&(p, q)| {
                if p > i || q > i {
                    return true;
                }
                if net.role(q) == Role::Reticulation {
                    time[p] == time[q]
                } else {
                    time[p] < time[q]
                }
            });
            if ok && rec(i + 1, n, bound, time, edges, net) {
                return true;
            }
        }
        false
    }
    rec(0, n, bound, &mut time, &edges, net)
}

//! Display maps, gamma profiles, and the three display predicates for a tree
//! in a network: weakly displayed (a display map exists), displayed (some
//! subgraph is a subdivision of the tree), and rigidly displayed (a pair of
//! display maps whose combined gamma profile stays within the reticulation
//! bounds).
//!
//! Gamma depends on the chosen edge-image paths, not just on vertex images,
//! so `DisplayMap` stores the paths explicitly and the searches branch over
//! path choices.

use crate::model::{NodeId, PhyloNetwork, PhyloTree, Role};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DisplayError {
    #[error("leaf sets of tree and network differ")]
    LeafSetMismatch,
    #[error("malformed display map: {0}")]
    Malformed(String),
}

/// A vertex map together with one explicit directed path per tree edge.
/// Paths include both endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayMap {
    pub vertex_image: Vec<NodeId>,
    pub edge_image: BTreeMap<(NodeId, NodeId), Vec<NodeId>>,
}

/// JSON form of a display map: vertex images as (tree vertex, optional leaf
/// label, network vertex) records, edge images as vertex-id paths.
#[derive(Debug, Clone, Serialize)]
pub struct DisplayMapJson {
    pub vertex_image: Vec<VertexImageJson>,
    pub edge_image: Vec<EdgeImageJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexImageJson {
    pub vertex: NodeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub image: NodeId,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeImageJson {
    pub edge: (NodeId, NodeId),
    pub path: Vec<NodeId>,
}

impl DisplayMap {
    pub fn to_json(&self, tree: &PhyloTree) -> DisplayMapJson {
        DisplayMapJson {
            vertex_image: self
                .vertex_image
                .iter()
                .enumerate()
                .map(|(v, &img)| VertexImageJson {
                    vertex: v,
                    label: tree.label(v).map(|s| s.to_string()),
                    image: img,
                })
                .collect(),
            edge_image: self
                .edge_image
                .iter()
                .map(|(&edge, path)| EdgeImageJson {
                    edge,
                    path: path.clone(),
                })
                .collect(),
        }
    }
}

fn tree_edges(tree: &PhyloTree) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for v in tree.postorder() {
        if let Some((a, b)) = tree.children(v) {
            out.push((v, a));
            out.push((v, b));
        }
    }
    out.sort();
    out
}

/// Verify the display-map conditions exactly: identity on the leaf set,
/// images are tree vertices or the root, every edge image is a directed path
/// with at least one edge from the tail's image to the head's image, and
/// sibling edges' images start with distinct first edges.
///
/// Structural defects (missing entries, non-paths, endpoint mismatches) are
/// errors; condition violations yield `Ok(false)`.
pub fn check_display_map(
    tree: &PhyloTree,
    net: &PhyloNetwork,
    dm: &DisplayMap,
) -> Result<bool, DisplayError> {
    if tree.leaf_label_set() != net.leaf_label_set() {
        return Err(DisplayError::LeafSetMismatch);
    }
    if dm.vertex_image.len() != tree.node_count() {
        return Err(DisplayError::Malformed(
            "vertex image size does not match the tree".into(),
        ));
    }
    let edges = tree_edges(tree);
    for &e in &edges {
        let path = dm
            .edge_image
            .get(&e)
            .ok_or_else(|| DisplayError::Malformed(format!("no image for edge {:?}", e)))?;
        if path.is_empty() {
            return Err(DisplayError::Malformed(format!("empty path for edge {:?}", e)));
        }
        if path[0] != dm.vertex_image[e.0] || *path.last().unwrap() != dm.vertex_image[e.1] {
            return Err(DisplayError::Malformed(format!(
                "path endpoints for edge {:?} do not match the vertex images",
                e
            )));
        }
        for w in path.windows(2) {
            if !net.is_edge(w[0], w[1]) {
                return Err(DisplayError::Malformed(format!(
                    "({}, {}) is not a network edge",
                    w[0], w[1]
                )));
            }
        }
    }
    if dm.edge_image.len() != edges.len() {
        return Err(DisplayError::Malformed("extra edge-image entries".into()));
    }
    // identity on X
    for v in 0..tree.node_count() {
        if let Some(lab) = tree.label(v) {
            if net.leaf_node(lab) != Some(dm.vertex_image[v]) {
                return Ok(false);
            }
        }
    }
    // images are tree vertices or the root
    for v in 0..tree.node_count() {
        if tree.label(v).is_none() {
            let w = dm.vertex_image[v];
            if !matches!(net.role(w), Role::Tree | Role::Root) {
                return Ok(false);
            }
        }
    }
    // each image path has at least one edge
    for &e in &edges {
        if dm.edge_image[&e].len() < 2 {
            return Ok(false);
        }
    }
    // sibling edges diverge at their first edge
    for v in 0..tree.node_count() {
        if let Some((a, b)) = tree.children(v) {
            let pa = &dm.edge_image[&(v, a)];
            let pb = &dm.edge_image[&(v, b)];
            if pa.len() >= 2 && pb.len() >= 2 && pa[1] == pb[1] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Count, per network vertex, the tree edges whose image path ends at or
/// passes through it (the tail's image is excluded).
pub fn gamma_profile(net: &PhyloNetwork, dm: &DisplayMap) -> Vec<u32> {
    let mut gamma = vec![0u32; net.node_count()];
    for path in dm.edge_image.values() {
        for &w in &path[1..] {
            gamma[w] += 1;
        }
    }
    gamma
}

/// Combined gamma profile of a pair of display maps.
pub fn gamma_pair(net: &PhyloNetwork, a: &DisplayMap, b: &DisplayMap) -> Vec<u32> {
    let ga = gamma_profile(net, a);
    let gb = gamma_profile(net, b);
    ga.iter().zip(gb.iter()).map(|(x, y)| x + y).collect()
}

/// Outcome of a bounded display-map enumeration.
#[derive(Debug, Clone)]
pub struct MapSearch {
    pub maps: Vec<DisplayMap>,
    /// True when more maps exist than the requested limit.
    pub truncated: bool,
}

pub const DEFAULT_MAP_LIMIT: usize = 10_000;

struct PathCache<'n> {
    net: &'n PhyloNetwork,
    cache: HashMap<(NodeId, NodeId), Vec<Vec<NodeId>>>,
}

impl<'n> PathCache<'n> {
    fn new(net: &'n PhyloNetwork) -> Self {
        PathCache {
            net,
            cache: HashMap::new(),
        }
    }
    fn paths(&mut self, u: NodeId, v: NodeId) -> &[Vec<NodeId>] {
        self.cache
            .entry((u, v))
            .or_insert_with(|| self.net.all_paths(u, v))
    }
}

/// Enumerate display maps of `tree` into `net` by bottom-up backtracking over
/// vertex images and explicit path choices, up to `limit` maps. The list is
/// empty iff the tree is not weakly displayed.
pub fn find_display_maps(
    tree: &PhyloTree,
    net: &PhyloNetwork,
    limit: usize,
) -> Result<MapSearch, DisplayError> {
    if tree.leaf_label_set() != net.leaf_label_set() {
        return Err(DisplayError::LeafSetMismatch);
    }
    let mut images = vec![usize::MAX; tree.node_count()];
    for v in 0..tree.node_count() {
        if let Some(lab) = tree.label(v) {
            images[v] = net.leaf_node(lab).unwrap();
        }
    }
    let internals: Vec<NodeId> = tree
        .postorder()
        .into_iter()
        .filter(|&v| !tree.is_leaf(v))
        .collect();
    let targets = net.map_targets();
    let mut cache = PathCache::new(net);
    let mut maps = Vec::new();
    let mut truncated = false;
    let mut edge_image: BTreeMap<(NodeId, NodeId), Vec<NodeId>> = BTreeMap::new();
    enumerate_maps(
        tree,
        &internals,
        0,
        &targets,
        &mut cache,
        &mut images,
        &mut edge_image,
        &mut maps,
        limit,
        &mut truncated,
    );
    Ok(MapSearch { maps, truncated })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_maps(
    tree: &PhyloTree,
    internals: &[NodeId],
    idx: usize,
    targets: &[NodeId],
    cache: &mut PathCache,
    images: &mut Vec<NodeId>,
    edge_image: &mut BTreeMap<(NodeId, NodeId), Vec<NodeId>>,
    maps: &mut Vec<DisplayMap>,
    limit: usize,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    if idx == internals.len() {
        if maps.len() == limit {
            *truncated = true;
            return;
        }
        maps.push(DisplayMap {
            vertex_image: images.clone(),
            edge_image: edge_image.clone(),
        });
        return;
    }
    let v = internals[idx];
    let (c1, c2) = tree.children(v).unwrap();
    for &w in targets {
        let p1s = cache.paths(w, images[c1]).to_vec();
        if p1s.is_empty() {
            continue;
        }
        let p2s = cache.paths(w, images[c2]).to_vec();
        for p1 in &p1s {
            if p1.len() < 2 {
                continue;
            }
            for p2 in &p2s {
                if p2.len() < 2 || p1[1] == p2[1] {
                    continue;
                }
                images[v] = w;
                edge_image.insert((v, c1), p1.clone());
                edge_image.insert((v, c2), p2.clone());
                enumerate_maps(
                    tree, internals, idx + 1, targets, cache, images, edge_image, maps, limit,
                    truncated,
                );
                edge_image.remove(&(v, c1));
                edge_image.remove(&(v, c2));
                images[v] = usize::MAX;
                if *truncated {
                    return;
                }
            }
        }
    }
}

/// Fast existence test for a display map, by a feasibility sweep over the
/// tree in postorder. Exact: path choices in disjoint subtrees are
/// independent.
pub fn weakly_displays(tree: &PhyloTree, net: &PhyloNetwork) -> Result<bool, DisplayError> {
    if tree.leaf_label_set() != net.leaf_label_set() {
        return Err(DisplayError::LeafSetMismatch);
    }
    if tree.is_single_leaf() {
        return Ok(true);
    }
    let n = tree.node_count();
    let mut feasible: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let targets = net.map_targets();
    for v in tree.postorder() {
        if let Some(lab) = tree.label(v) {
            feasible[v] = vec![net.leaf_node(lab).unwrap()];
            continue;
        }
        let (c1, c2) = tree.children(v).unwrap();
        let mut out = Vec::new();
        for &w in &targets {
            let kids = net.children(w);
            debug_assert_eq!(kids.len(), 2);
            let (ka, kb) = (kids[0], kids[1]);
            let hit = |gate: NodeId, cands: &[NodeId]| cands.iter().any(|&x| net.reaches(gate, x));
            if (hit(ka, &feasible[c1]) && hit(kb, &feasible[c2]))
                || (hit(kb, &feasible[c1]) && hit(ka, &feasible[c2]))
            {
                out.push(w);
            }
        }
        if out.is_empty() {
            return Ok(false);
        }
        feasible[v] = out;
    }
    Ok(!feasible[tree.root()].is_empty())
}

/// Exact display test: some subgraph of the network is a subdivision of the
/// tree. Decided by brute force over reticulation in-edge selections: keep
/// one in-edge per reticulation, prune and suppress, and compare canonical
/// forms.
pub fn displays(tree: &PhyloTree, net: &PhyloNetwork) -> Result<bool, DisplayError> {
    if tree.leaf_label_set() != net.leaf_label_set() {
        return Err(DisplayError::LeafSetMismatch);
    }
    let want = tree.canonical_form();
    Ok(selection_trees(net).into_iter().any(|c| c == want))
}

/// Canonical forms of all trees obtained from in-edge selections of the
/// network, deduplicated and sorted.
pub fn selection_trees(net: &PhyloNetwork) -> Vec<String> {
    let retics = net.reticulations();
    let h = retics.len();
    let mut out = std::collections::BTreeSet::new();
    for mask in 0u64..(1u64 << h) {
        let mut keep_parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for (i, &r) in retics.iter().enumerate() {
            let ps = net.parents(r);
            let pick = if mask & (1 << i) == 0 { ps[0] } else { ps[1] };
            keep_parent.insert(r, pick);
        }
        if let Some((_, text)) = selection_canon(net, net.root(), &keep_parent) {
            out.insert(text);
        }
    }
    out.into_iter().collect()
}

/// (min leaf, canonical text) of the pruned, suppressed selection tree below
/// `v`, or None when no leaf survives below `v`.
fn selection_canon(
    net: &PhyloNetwork,
    v: NodeId,
    keep_parent: &BTreeMap<NodeId, NodeId>,
) -> Option<(String, String)> {
    if net.role(v) == Role::Leaf {
        let l = net.label(v).unwrap().to_string();
        return Some((l.clone(), l));
    }
    let mut subs: Vec<(String, String)> = Vec::new();
    for &c in net.children(v) {
        if net.role(c) == Role::Reticulation && keep_parent[&c] != v {
            continue;
        }
        if let Some(s) = selection_canon(net, c, keep_parent) {
            subs.push(s);
        }
    }
    match subs.len() {
        0 => None,
        1 => Some(subs.pop().unwrap()),
        2 => {
            let (a, b) = (subs.remove(0), subs.remove(0));
            let ((ma, sa), (_, sb)) = if a.0 < b.0 { (a, b) } else { (b, a) };
            Some((ma, format!("({},{})", sa, sb)))
        }
        _ => unreachable!("binary network"),
    }
}

/// Rigid display search: a pair of display maps whose combined gamma profile
/// is at most 3 at every reticulation and at most 2 at every parent of a
/// reticulation. Joint backtracking over both maps with monotone gamma
/// pruning; returns the first pair found or None.
pub fn rigidly_displays(
    net: &PhyloNetwork,
    t1: &PhyloTree,
    t2: &PhyloTree,
) -> Result<Option<(DisplayMap, DisplayMap)>, DisplayError> {
    joint_display_search(net, t1, t2, &gamma_caps(net))
}

/// Search for a pair of display maps whose combined gamma profile respects
/// arbitrary per-vertex caps.
pub fn joint_display_search(
    net: &PhyloNetwork,
    t1: &PhyloTree,
    t2: &PhyloTree,
    caps: &[u32],
) -> Result<Option<(DisplayMap, DisplayMap)>, DisplayError> {
    if t1.leaf_label_set() != net.leaf_label_set() || t2.leaf_label_set() != net.leaf_label_set() {
        return Err(DisplayError::LeafSetMismatch);
    }
    let caps = caps.to_vec();
    let targets = net.map_targets();
    let mut cache = PathCache::new(net);

    // interleave the two trees' internal vertices, children before parents
    let mut tasks: Vec<(usize, NodeId)> = Vec::new();
    let int1: Vec<NodeId> = t1.postorder().into_iter().filter(|&v| !t1.is_leaf(v)).collect();
    let int2: Vec<NodeId> = t2.postorder().into_iter().filter(|&v| !t2.is_leaf(v)).collect();
    let mut i = 0;
    while i < int1.len() || i < int2.len() {
        if i < int1.len() {
            tasks.push((0, int1[i]));
        }
        if i < int2.len() {
            tasks.push((1, int2[i]));
        }
        i += 1;
    }

    let trees = [t1, t2];
    let mut images = [vec![usize::MAX; t1.node_count()], vec![usize::MAX; t2.node_count()]];
    for k in 0..2 {
        for v in 0..trees[k].node_count() {
            if let Some(lab) = trees[k].label(v) {
                images[k][v] = net.leaf_node(lab).unwrap();
            }
        }
    }
    let mut edge_images: [BTreeMap<(NodeId, NodeId), Vec<NodeId>>; 2] =
        [BTreeMap::new(), BTreeMap::new()];
    let mut gamma = vec![0u32; net.node_count()];

    fn rec(
        tasks: &[(usize, NodeId)],
        idx: usize,
        trees: &[&PhyloTree; 2],
        targets: &[NodeId],
        caps: &[u32],
        cache: &mut PathCache,
        images: &mut [Vec<NodeId>; 2],
        edge_images: &mut [BTreeMap<(NodeId, NodeId), Vec<NodeId>>; 2],
        gamma: &mut Vec<u32>,
    ) -> bool {
        if idx == tasks.len() {
            return true;
        }
        let (k, v) = tasks[idx];
        let (c1, c2) = trees[k].children(v).unwrap();
        for &w in targets {
            let p1s = cache.paths(w, images[k][c1]).to_vec();
            if p1s.is_empty() {
                continue;
            }
            let p2s = cache.paths(w, images[k][c2]).to_vec();
            for p1 in &p1s {
                if p1.len() < 2 {
                    continue;
                }
                for p2 in &p2s {
                    if p2.len() < 2 || p1[1] == p2[1] {
                        continue;
                    }
                    let mut ok = true;
                    'add: for path in [p1, p2] {
                        for &x in &path[1..] {
                            gamma[x] += 1;
                            if gamma[x] > caps[x] {
                                // roll back this partial addition
                                undo_path_until(gamma, p1, p2, path, x);
                                ok = false;
                                break 'add;
                            }
                        }
                    }
                    if ok {
                        images[k][v] = w;
                        edge_images[k].insert((v, c1), p1.clone());
                        edge_images[k].insert((v, c2), p2.clone());
                        if rec(tasks, idx + 1, trees, targets, caps, cache, images, edge_images, gamma)
                        {
                            return true;
                        }
                        edge_images[k].remove(&(v, c1));
                        edge_images[k].remove(&(v, c2));
                        images[k][v] = usize::MAX;
                        for path in [p1, p2] {
                            for &x in &path[1..] {
                                gamma[x] -= 1;
                            }
                        }
                    }
                }
            }
        }
        false
    }

    let found = rec(
        &tasks,
        0,
        &trees,
        &targets,
        &caps,
        &mut cache,
        &mut images,
        &mut edge_images,
        &mut gamma,
    );
    if !found {
        return Ok(None);
    }
    let dm1 = DisplayMap {
        vertex_image: images[0].clone(),
        edge_image: edge_images[0].clone(),
    };
    let dm2 = DisplayMap {
        vertex_image: images[1].clone(),
        edge_image: edge_images[1].clone(),
    };
    Ok(Some((dm1, dm2)))
}

/// Per-vertex cap on the combined gamma of a rigid display-map pair:
/// 3 at reticulations, 2 at parents of reticulations, unbounded elsewhere.
pub fn gamma_caps(net: &PhyloNetwork) -> Vec<u32> {
    let mut caps = vec![u32::MAX; net.node_count()];
    for r in net.reticulations() {
        caps[r] = caps[r].min(3);
        for &p in net.parents(r) {
            caps[p] = caps[p].min(2);
        }
    }
    caps
}

/// Partial rollback helper for the gamma accumulator: removes the increments
/// applied so far, where `path` is the path being applied when vertex `upto`
/// overflowed and `p1` precedes `p2`.
fn undo_path_until(gamma: &mut [u32], p1: &[NodeId], p2: &[NodeId], path: &[NodeId], upto: NodeId) {
    // undo increments on the current path up to and including the overflow
    for &x in &path[1..] {
        gamma[x] -= 1;
        if x == upto {
            break;
        }
    }
    // if the overflow happened on p2, p1 was fully applied
    if std::ptr::eq(path, p2) {
        for &x in &p1[1..] {
            gamma[x] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick;

    #[test]
    fn identity_map_of_tree_into_itself() {
        let t = newick::parse_tree("((a,b),c);").unwrap();
        let net = crate::model::PhyloNetwork::from_tree(&t);
        let search = find_display_maps(&t, &net, DEFAULT_MAP_LIMIT).unwrap();
        assert_eq!(search.maps.len(), 1);
        let dm = &search.maps[0];
        assert!(check_display_map(&t, &net, dm).unwrap());
        let gamma = gamma_profile(&net, dm);
        assert_eq!(gamma[net.root()], 0);
        for v in 0..net.node_count() {
            if v != net.root() {
                assert_eq!(gamma[v], 1);
            }
        }
        assert!(displays(&t, &net).unwrap());
        assert!(weakly_displays(&t, &net).unwrap());
    }

    #[test]
    fn collapsing_map_violates_path_condition() {
        // map all internal vertices to the network root: edge images between
        // internal vertices would need empty paths
        let t = newick::parse_tree("((a,b),c);").unwrap();
        let net = crate::model::PhyloNetwork::from_tree(&t);
        let root = net.root();
        let mut vertex_image = vec![0; t.node_count()];
        for v in 0..t.node_count() {
            vertex_image[v] = match t.label(v) {
                Some(l) => net.leaf_node(l).unwrap(),
                None => root,
            };
        }
        let mut edge_image = BTreeMap::new();
        for v in t.postorder() {
            if let Some((a, b)) = t.children(v) {
                for c in [a, b] {
                    let from = vertex_image[v];
                    let to = vertex_image[c];
                    let path = if from == to {
                        vec![from]
                    } else {
                        net.all_paths(from, to).into_iter().next().unwrap()
                    };
                    edge_image.insert((v, c), path);
                }
            }
        }
        let dm = DisplayMap { vertex_image, edge_image };
        assert!(!check_display_map(&t, &net, &dm).unwrap());
    }

    #[test]
    fn trees_identity_and_rigid() {
        let t = newick::parse_tree("((a,b),c);").unwrap();
        let net = crate::model::PhyloNetwork::from_tree(&t);
        let pair = rigidly_displays(&net, &t, &t).unwrap().unwrap();
        let gamma = gamma_pair(&net, &pair.0, &pair.1);
        assert_eq!(gamma[net.root()], 0);
        for v in 0..net.node_count() {
            if v != net.root() {
                assert_eq!(gamma[v], 2);
            }
        }
    }

    #[test]
    fn display_implies_weak_display_on_reticulated_net() {
        let net = newick::parse_network("((a,(b)#H1),(#H1,c));").unwrap();
        for text in ["((a,b),c);", "(a,(b,c));"] {
            let t = newick::parse_tree(text).unwrap();
            if displays(&t, &net).unwrap() {
                assert!(weakly_displays(&t, &net).unwrap());
            }
        }
    }

    #[test]
    fn merged_paths_give_weak_but_not_ordinary_display() {
        // reticulation whose child subtree is a cherry: picking the two
        // cherry leaves from different sides is weakly displayable only
        let net = newick::parse_network("((a,((c,d))#H1),(b,#H1));").unwrap();
        let t = newick::parse_tree("((a,c),(b,d));").unwrap();
        assert!(weakly_displays(&t, &net).unwrap());
        assert!(!displays(&t, &net).unwrap());
    }
}

//! Acceptance suite: one test per criterion, each asserting its thresholds
//! exactly and printing a pass line with the measured runtime.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use forkpick::construct::build_network;
use forkpick::display;
use forkpick::forkops::{self, CherryPickingSequence, ForkPickingSequence, LcaScope};
use forkpick::model::{PhyloNetwork, PhyloTree, Role};
use forkpick::netcheck;
use forkpick::newick::{parse_network, parse_tree};
use forkpick::oracle::{self, HybridKind, NetClass};
use forkpick::search::{self, Limits, Outcome};
use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

const JOBS: usize = 4;

fn data(name: &str) -> String {
    let path = format!("{}/tests/data/{}", env!("CARGO_MANIFEST_DIR"), name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {}", path, e))
}

fn tree(name: &str) -> PhyloTree {
    parse_tree(data(name).trim()).unwrap()
}

fn network(name: &str) -> PhyloNetwork {
    parse_network(data(name).trim()).unwrap()
}

fn fps_optimum(t1: &PhyloTree, t2: &PhyloTree) -> Option<(u32, ForkPickingSequence)> {
    match search::min_weight_fork_picking(t1, t2, Limits::default())
        .unwrap()
        .outcome
    {
        Outcome::Optimal { optimum, witness } => Some((optimum, witness)),
        Outcome::Infeasible => None,
        Outcome::Unknown => panic!("solver hit the node limit"),
    }
}

fn cps_optimum(t1: &PhyloTree, t2: &PhyloTree) -> Option<(u32, CherryPickingSequence)> {
    match search::min_weight_cherry_picking(t1, t2, Limits::default())
        .unwrap()
        .outcome
    {
        Outcome::Optimal { optimum, witness } => Some((optimum, witness)),
        Outcome::Infeasible => None,
        Outcome::Unknown => panic!("solver hit the node limit"),
    }
}

/// Criterion 1: the six-leaf instance with rigid hybrid number one.
/// s_r = 1 exactly, the built network is temporal tree-child with one
/// reticulation and rigidly displays both trees, and extraction returns a
/// weight-1 sequence. Budget: 5 seconds.
#[test]
fn accept_1_weight_one_instance() {
    let started = Instant::now();
    let t1 = tree("weight1_t1.nwk");
    let t2 = tree("weight1_t2.nwk");

    let (opt, witness) = fps_optimum(&t1, &t2).expect("feasible");
    assert_eq!(opt, 1, "minimum fork-picking weight");

    let trace = build_network(&t1, &t2, &witness).unwrap();
    assert_eq!(trace.network.reticulation_count(), 1);
    assert!(netcheck::is_tree_child(&trace.network));
    assert!(netcheck::temporal_labelling(&trace.network).is_some());

    let extracted =
        search::extract_fork_picking(&trace.network, &t1, &t2, &trace.witnesses).unwrap();
    assert_eq!(extracted.weight(), 1);

    // the reference network and sequence for this instance
    let net = network("weight1_net.enwk");
    let wit = display::rigidly_displays(&net, &t1, &t2)
        .unwrap()
        .expect("reference network rigidly displays the pair");
    let seq2 = search::extract_fork_picking(&net, &t1, &t2, &wit).unwrap();
    assert_eq!(seq2.weight(), 1);
    let golden: ForkPickingSequence = serde_json::from_str(&data("weight1_seq.json")).unwrap();
    let diag = forkops::check_fork_picking_sequence(&t1, &t2, &golden, LcaScope::BlockStart).unwrap();
    assert!(diag.ok, "{:?}", diag.reason);
    assert_eq!(golden.weight(), 1);
    let rebuilt = build_network(&t1, &t2, &golden).unwrap();
    assert!(rebuilt.network.isomorphic(&net));

    // the induced cherry-picking sequence with its counts
    let cps = CherryPickingSequence {
        order: ["x5", "x3", "x4", "x2", "x1"].iter().map(|s| s.to_string()).collect(),
        counts: vec![1, 1, 1, 0, 0],
    };
    let diag = forkops::check_cherry_picking_sequence(&t1, &t2, &cps).unwrap();
    assert!(diag.ok, "{:?}", diag.reason);
    assert_eq!(forkops::fork_to_cherry(&t1, &t2, &golden).unwrap(), cps);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 5, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 1: PASS ({} ms) — s_r = 1, built h = 1, extracted weight = 1",
        elapsed.as_millis()
    );
}

/// Criterion 2: the six-leaf pair whose weak hybrid number is exactly two,
/// by general-network enumeration with cap 2. Budget: 30 minutes.
#[test]
fn accept_2_weak_hybrid_two() {
    let started = Instant::now();
    let t1 = tree("weakhybrid2_t1.nwk");
    let t2 = tree("weakhybrid2_t2.nwk");
    // sanity on the transcription
    assert_eq!(
        t1.cherries(),
        vec![("1".to_string(), "3".to_string()), ("4".to_string(), "6".to_string())]
    );
    let cert = oracle::brute_hybrid(&t1, &t2, HybridKind::WeakHybrid, 2, JOBS, None).unwrap();
    assert_eq!(cert.value, Some(2), "weak hybrid number");
    assert!(cert.verify(&t1, &t2));
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1800, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 2: PASS ({} ms) — weak hybrid number = 2 on |X| = 6, cap 2",
        elapsed.as_millis()
    );
}

/// Criterion 3: the five-leaf pair with weak hybrid number 1 and rigid
/// hybrid number 2, by oracle and solver agreement. Budget: 10 minutes.
#[test]
fn accept_3_weak_one_rigid_two() {
    let started = Instant::now();
    let t1 = tree("weak1rigid2_t1.nwk");
    let t2 = tree("weak1rigid2_t2.nwk");

    let weak = oracle::brute_hybrid(&t1, &t2, HybridKind::WeakHybrid, 2, JOBS, None).unwrap();
    assert_eq!(weak.value, Some(1), "weak hybrid number");
    assert!(weak.verify(&t1, &t2));

    let (s_r, witness) = fps_optimum(&t1, &t2).expect("feasible");
    assert_eq!(s_r, 2, "minimum fork-picking weight");
    let trace = build_network(&t1, &t2, &witness).unwrap();
    let rigid = oracle::brute_hybrid(
        &t1,
        &t2,
        HybridKind::RigidHybrid,
        2,
        JOBS,
        Some(&trace.network),
    )
    .unwrap();
    assert_eq!(rigid.value, Some(2), "rigid hybrid number");
    assert!(rigid.verify(&t1, &t2));

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 3: PASS ({} ms) — weak = 1, rigid = s_r = 2 on |X| = 5",
        elapsed.as_millis()
    );
}

/// Criterion 4: the balanced family at m = 4 (18 leaves): the cherry-picking
/// optimum is at least 3 while the emitted weight-1 witness plus the
/// non-isomorphism lower bound give s_r = 1; the gap is at least 2.
/// Budget: 10 minutes.
#[test]
fn accept_4_family_gap() {
    let started = Instant::now();
    let fam = oracle::gen_balanced_family(4).unwrap();
    assert_eq!(fam.t1.leaf_count(), 18);
    assert_eq!(
        format!("{}", fam.t1),
        data("family_m4_t1.nwk").trim(),
        "family golden for the first tree"
    );
    assert_eq!(
        format!("{}", fam.t2),
        data("family_m4_t2.nwk").trim(),
        "family golden for the second tree"
    );
    assert!(!fam.t1.isomorphic(&fam.t2).unwrap());

    let diag =
        forkops::check_fork_picking_sequence(&fam.t1, &fam.t2, &fam.witness, LcaScope::BlockStart)
            .unwrap();
    assert!(diag.ok, "{:?}", diag.reason);
    assert_eq!(fam.witness.weight(), 1);
    let s_r = 1u32; // weight-1 witness plus the non-isomorphism lower bound

    let res = search::min_weight_cherry_picking(&fam.t1, &fam.t2, Limits::default()).unwrap();
    let h_t = res.outcome.optimum().expect("feasible by the witness");
    assert!(h_t >= 3, "cherry-picking optimum {} is below 2^(m-2) - 1 = 3", h_t);
    assert!(h_t - s_r >= 2);

    // the emitted network is a temporal tree-child witness for s_r = h_r = 1
    assert_eq!(fam.network.reticulation_count(), 1);
    assert!(netcheck::is_tree_child(&fam.network));
    assert!(netcheck::temporal_labelling(&fam.network).is_some());
    let rigid = display::rigidly_displays(&fam.network, &fam.t1, &fam.t2).unwrap();
    assert!(rigid.is_some());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 4: PASS ({} ms) — cherry optimum = {} >= 3, s_r = 1, gap = {}",
        elapsed.as_millis(),
        h_t,
        h_t - 1
    );
}

/// Criterion 5: display predicates on the two counterexample networks: both
/// trees weakly displayed, one tree not displayed; no rigid pair on the
/// second network although both trees are weakly displayed. Budget: 5 s.
#[test]
fn accept_5_display_predicates() {
    let started = Instant::now();
    let t1 = tree("weakonly_t1.nwk");
    let t2 = tree("weakonly_t2.nwk");
    let net = network("weakonly_net.enwk");
    assert!(display::weakly_displays(&t1, &net).unwrap());
    assert!(display::weakly_displays(&t2, &net).unwrap());
    assert!(display::displays(&t1, &net).unwrap());
    assert!(!display::displays(&t2, &net).unwrap());
    // a pair of maps with combined gamma at most 2 everywhere exists
    let caps = vec![2u32; net.node_count()];
    assert!(display::joint_display_search(&net, &t1, &t2, &caps)
        .unwrap()
        .is_some());
    assert!(!netcheck::is_tree_child(&net));

    let u1 = tree("norigid_t1.nwk");
    let u2 = tree("norigid_t2.nwk");
    let net3 = network("norigid_net.enwk");
    assert!(display::weakly_displays(&u1, &net3).unwrap());
    assert!(display::weakly_displays(&u2, &net3).unwrap());
    assert!(display::rigidly_displays(&net3, &u1, &u2).unwrap().is_none());
    // the obstruction sits at a reticulation parent: with the parent caps
    // lifted a pair of display maps exists
    let mut caps3 = vec![u32::MAX; net3.node_count()];
    for r in net3.reticulations() {
        caps3[r] = 3;
    }
    assert!(display::joint_display_search(&net3, &u1, &u2, &caps3)
        .unwrap()
        .is_some());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 5, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 5: PASS ({} ms) — weak/display/rigid predicates on the counterexamples",
        elapsed.as_millis()
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: the property suite over the |X| = 4 grid and the |X| = 5 slice
// ---------------------------------------------------------------------------

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
}

fn ttc_levels(n: usize) -> &'static [Vec<PhyloNetwork>] {
    static L4: OnceLock<Vec<Vec<PhyloNetwork>>> = OnceLock::new();
    static L5: OnceLock<Vec<Vec<PhyloNetwork>>> = OnceLock::new();
    let cell = match n {
        4 => &L4,
        5 => &L5,
        _ => panic!("unsupported size"),
    };
    cell.get_or_init(|| {
        (0..=2)
            .map(|h| oracle::enumerate_networks(&labels(n), h, NetClass::TemporalTreeChild).unwrap())
            .collect()
    })
}

/// Exact rigid hybrid number by exhaustive scan of cached temporal
/// tree-child networks, up to reticulation count 2.
fn rigid_oracle(t1: &PhyloTree, t2: &PhyloTree, upto: usize) -> Option<usize> {
    let levels = ttc_levels(t1.leaf_count());
    (0..=upto.min(2))
        .find(|&h| oracle::scan_networks(&levels[h], t1, t2, HybridKind::RigidHybrid, 1).is_some())
}

fn display_oracle_hit(t1: &PhyloTree, t2: &PhyloTree, upto: usize) -> bool {
    let levels = ttc_levels(t1.leaf_count());
    (0..=upto.min(2))
        .any(|h| oracle::scan_networks(&levels[h], t1, t2, HybridKind::TemporalHybrid, 1).is_some())
}

/// Per-witness structural assertions for a temporal tree-child network rigidly
/// displaying the pair via the given maps.
fn witness_invariant_checks(
    net: &PhyloNetwork,
    t1: &PhyloTree,
    t2: &PhyloTree,
    maps: &(display::DisplayMap, display::DisplayMap),
) {
    let ttc = netcheck::is_tree_child(net) && netcheck::temporal_labelling(net).is_some();
    let gamma = display::gamma_pair(net, &maps.0, &maps.1);
    let g1 = display::gamma_profile(net, &maps.0);
    let g2 = display::gamma_profile(net, &maps.1);
    // root image and gamma bounds (temporal tree-child networks)
    if ttc {
        assert_eq!(maps.0.vertex_image[t1.root()], net.root());
        assert_eq!(maps.1.vertex_image[t2.root()], net.root());
        for v in 0..net.node_count() {
            if v == net.root() {
                assert_eq!(gamma[v], 0);
            } else {
                assert!((2..=3).contains(&gamma[v]), "gamma({}) = {}", v, gamma[v]);
                assert!(g1[v] >= 1 && g2[v] >= 1);
            }
        }
    }
    if netcheck::is_tree_child(net) {
        // an edge image passing through a reticulation enters it directly
        for dm in [&maps.0, &maps.1] {
            for path in dm.edge_image.values() {
                for (i, &w) in path.iter().enumerate().skip(1) {
                    if net.role(w) == Role::Reticulation {
                        assert_eq!(i, 1, "reticulation entered from a distant tail");
                    }
                }
            }
        }
    }
    // a gamma-2 tree vertex above a pendant subtree forces that subtree in
    // both trees
    for (cut, leaves, is_tree) in net.pendant_subnetworks() {
        if !is_tree {
            continue;
        }
        let parent = net.parents(cut)[0];
        if net.role(parent) != Role::Tree || gamma[parent] != 2 {
            continue;
        }
        let sub = net.pendant_subnetwork_at(cut).unwrap().to_tree().unwrap();
        for t in [t1, t2] {
            assert!(t.is_pendant_leafset(&leaves), "pendant subtree missing");
            let restricted = t.restrict(&leaves).unwrap();
            assert!(restricted.isomorphic(&sub).unwrap());
        }
    }
}

/// Criterion 6: over all 225 ordered tree pairs on four leaves and a fixed
/// deterministic 1,000-pair slice on five leaves: the four-way equivalence,
/// solver-versus-oracle agreement for the rigid hybrid number (cap 3),
/// construction and extraction bounds, per-witness map assertions, and the
/// fork-existence fact for every enumerated tree. Budget: 60 minutes.
#[test]
fn accept_6_property_suite() {
    let started = Instant::now();
    let trees4 = oracle::enumerate_trees(&labels(4)).unwrap();
    let trees5 = oracle::enumerate_trees(&labels(5)).unwrap();

    // (e) every enumerated tree with at least three leaves has a three- or
    // four-leaf fork
    // (a tree with three leaves is itself a three-leaf fork, and the
    // balanced four-leaf tree is itself a four-leaf fork)
    for t in oracle::enumerate_trees(&labels(3))
        .unwrap()
        .iter()
        .chain(trees4.iter())
        .chain(trees5.iter())
    {
        let has_fork = !t.pendant_3forks().is_empty()
            || !t.pendant_4forks().is_empty()
            || t.leaf_count() == 3
            || (t.leaf_count() == 4 && t.cherries().len() == 2);
        assert!(has_fork, "{}", t);
    }

    let mut pairs: Vec<(&PhyloTree, &PhyloTree)> = Vec::new();
    for a in &trees4 {
        for b in &trees4 {
            pairs.push((a, b));
        }
    }
    let total5 = trees5.len() * trees5.len();
    for k in 0..1000usize {
        let idx = (k * 11) % total5;
        pairs.push((&trees5[idx / trees5.len()], &trees5[idx % trees5.len()]));
    }

    let mut feasible = 0usize;
    let mut infeasible = 0usize;
    for (t1, t2) in pairs {
        let fps = fps_optimum(t1, t2);
        let cps = cps_optimum(t1, t2);
        // (a) a cherry-picking sequence exists iff a fork-picking one does
        assert_eq!(fps.is_some(), cps.is_some(), "{} / {}", t1, t2);
        match (fps, cps) {
            (Some((w, fseq)), Some((cw, cseq))) => {
                feasible += 1;
                // (c) construction bound and extraction bound
                let trace = build_network(t1, t2, &fseq).unwrap();
                let h = trace.network.reticulation_count() as u32;
                assert!(h <= w, "construction exceeded the weight");
                let eseq =
                    search::extract_fork_picking(&trace.network, t1, t2, &trace.witnesses).unwrap();
                assert!(eseq.weight() <= h, "extraction exceeded the reticulation count");
                // (d) structural assertions on the construction witness
                witness_invariant_checks(&trace.network, t1, t2, &trace.witnesses);

                // (a) a displaying temporal tree-child network exists:
                // realize the cherry witness constructively
                let cfseq = forkops::cherry_to_fork(t1, t2, &cseq).unwrap();
                assert_eq!(cfseq.weight(), cw);
                let trace2 = build_network(t1, t2, &cfseq).unwrap();
                assert!(display::displays(t1, &trace2.network).unwrap());
                assert!(display::displays(t2, &trace2.network).unwrap());
                witness_invariant_checks(&trace2.network, t1, t2, &trace2.witnesses);
                // the displaying witness realizes the cherry optimum, and the
                // rigid number never exceeds the temporal one
                assert_eq!(trace2.network.reticulation_count() as u32, cw);
                assert!(w <= cw, "rigid optimum above the temporal optimum");

                // (b) solver equals oracle on the rigid hybrid number, cap 3
                if (1..=3).contains(&w) {
                    let refuted = rigid_oracle(t1, t2, w as usize - 1);
                    assert!(refuted.is_none(), "a smaller rigid witness exists: {:?}", refuted);
                } else if w == 0 {
                    assert!(t1.isomorphic(t2).unwrap());
                }
                // the upper bound is witnessed by the built network
                assert!(h <= w);
            }
            (None, None) => {
                infeasible += 1;
                // bounded refutations for the network-level clauses
                let bound = if t1.leaf_count() == 4 { 2 } else { 1 };
                assert!(rigid_oracle(t1, t2, bound).is_none());
                assert!(!display_oracle_hit(t1, t2, bound));
            }
            _ => unreachable!(),
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 3600, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 6: PASS ({} ms) — {} feasible / {} infeasible pairs, zero violations",
        elapsed.as_millis(),
        feasible,
        infeasible
    );
}

/// Criterion 7: parser and canonical-form suite: round-trip isomorphism on
/// all enumerated trees up to five leaves and tree-child networks on up to
/// four leaves with up to two reticulations; exact double-factorial counts.
/// Budget: 5 minutes.
#[test]
fn accept_7_parser_suite() {
    let started = Instant::now();
    let expected = [1usize, 3, 15, 105];
    for (i, n) in (2..=5).enumerate() {
        let trees = oracle::enumerate_trees(&labels(n)).unwrap();
        assert_eq!(trees.len(), expected[i], "double factorial count at {}", n);
        let mut forms = BTreeSet::new();
        for t in &trees {
            let text = format!("{}", t);
            let back = parse_tree(&text).unwrap();
            assert!(back.isomorphic(t).unwrap());
            assert_eq!(format!("{}", back), text, "serialization is canonical");
            forms.insert(text);
        }
        assert_eq!(forms.len(), trees.len());
    }
    for h in 0..=2usize {
        let nets = oracle::enumerate_networks(&labels(4), h, NetClass::TreeChild).unwrap();
        assert!(!nets.is_empty());
        for net in &nets {
            let text = net.canonical_form();
            let back = parse_network(&text).unwrap();
            assert!(back.isomorphic(net));
            assert_eq!(back.canonical_form(), text);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "budget exceeded: {:?}", elapsed);
    println!(
        "ACCEPTANCE 7: PASS ({} ms) — round-trips and counts on all enumerated objects",
        elapsed.as_millis()
    );
}

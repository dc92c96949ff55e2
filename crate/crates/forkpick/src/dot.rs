//! Graphviz DOT export for trees and networks. Reticulations are coloured
//! and temporal levels are annotated when a labelling exists.

use crate::model::{PhyloNetwork, PhyloTree, Role};
use crate::netcheck;
use std::fmt::Write;

pub fn tree_to_dot(tree: &PhyloTree) -> String {
    let mut s = String::from("digraph tree {\n  node [shape=point];\n");
    for v in 0..tree.node_count() {
        if let Some(l) = tree.label(v) {
            writeln!(s, "  n{} [shape=plaintext, label=\"{}\"];", v, l).unwrap();
        }
    }
    for v in tree.postorder() {
        if let Some((a, b)) = tree.children(v) {
            writeln!(s, "  n{} -> n{};", v, a).unwrap();
            writeln!(s, "  n{} -> n{};", v, b).unwrap();
        }
    }
    s.push_str("}\n");
    s
}

pub fn network_to_dot(net: &PhyloNetwork) -> String {
    let times = netcheck::temporal_labelling(net);
    let mut s = String::from("digraph network {\n  node [shape=point];\n");
    for v in 0..net.node_count() {
        let mut attrs: Vec<String> = Vec::new();
        let mut label = String::new();
        if let Some(l) = net.label(v) {
            attrs.push("shape=plaintext".into());
            label = l.to_string();
        }
        if net.role(v) == Role::Reticulation {
            attrs.push("shape=circle".into());
            attrs.push("color=red".into());
            attrs.push("width=0.1".into());
        }
        if let Some(t) = &times {
            if !label.is_empty() {
                label.push(' ');
            }
            write!(label, "[t={}]", t[v]).unwrap();
            if net.label(v).is_none() && net.role(v) != Role::Reticulation {
                attrs.push("shape=plaintext".into());
            }
        }
        if !label.is_empty() {
            attrs.push(format!("label=\"{}\"", label));
        }
        if !attrs.is_empty() {
            writeln!(s, "  n{} [{}];", v, attrs.join(", ")).unwrap();
        }
    }
    for (u, v) in net.edges() {
        let style = if net.role(v) == Role::Reticulation {
            " [style=dashed, color=red]"
        } else {
            ""
        };
        writeln!(s, "  n{} -> n{}{};", u, v, style).unwrap();
    }
    s.push_str("}\n");
    s
}

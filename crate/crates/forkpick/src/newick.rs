//! Text I/O for trees (Newick) and networks (extended Newick with `#H<k>`
//! reticulation tags).
//!
//! Conventions: labels are `[A-Za-z0-9_]+`, branch lengths (`:<number>`) are
//! accepted and ignored, comments in square brackets are skipped, a statement
//! ends with `;`. Each reticulation tag appears exactly twice, once on a
//! parenthesised subtree and once as a bare reference. File extensions:
//! `.nwk` (tree), `.enwk` (network).

use crate::model::{valid_label, Dag, ModelError, NodeId, PhyloNetwork, PhyloTree, TreeSpec};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("parse error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("{0}")]
    Model(#[from] ModelError),
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

struct Scanner<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Scanner<'a> {
        Scanner {
            text: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.text.len() && self.text[self.pos] == b'[' {
                let start = self.pos;
                while self.pos < self.text.len() && self.text[self.pos] != b']' {
                    self.pos += 1;
                }
                if self.pos == self.text.len() {
                    return Err(syntax(start, "unterminated comment"));
                }
                self.pos += 1;
            } else {
                return Ok(());
            }
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        self.skip_trivia()?;
        if self.text.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.pos, format!("expected '{}'", c as char)))
        }
    }

    fn eat(&mut self, c: u8) -> Result<bool, ParseError> {
        self.skip_trivia()?;
        if self.text.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn label(&mut self) -> Result<Option<String>, ParseError> {
        self.skip_trivia()?;
        let start = self.pos;
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_alphanumeric() || self.text[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            Ok(None)
        } else {
            Ok(Some(
                std::str::from_utf8(&self.text[start..self.pos]).unwrap().to_string(),
            ))
        }
    }

    /// Skip an optional `:<number>` branch length.
    fn skip_length(&mut self) -> Result<(), ParseError> {
        if self.eat(b':')? {
            self.skip_trivia()?;
            let start = self.pos;
            while self.pos < self.text.len()
                && (self.text[self.pos].is_ascii_digit()
                    || matches!(self.text[self.pos], b'.' | b'-' | b'+' | b'e' | b'E'))
            {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(syntax(self.pos, "expected a branch length after ':'"));
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        self.expect(b';')?;
        self.skip_trivia()?;
        if self.pos != self.text.len() {
            return Err(syntax(self.pos, "trailing input after ';'"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

/// Parse a rooted binary Newick tree. A single labelled leaf with terminator
/// is accepted as the degenerate one-leaf tree.
pub fn parse_tree(text: &str) -> Result<PhyloTree, ParseError> {
    let mut sc = Scanner::new(text);
    let spec = parse_tree_group(&mut sc)?;
    sc.finish()?;
    Ok(PhyloTree::from_spec(&spec)?)
}

fn parse_tree_group(sc: &mut Scanner) -> Result<TreeSpec, ParseError> {
    if sc.eat(b'(')? {
        let open = sc.pos - 1;
        let mut parts = vec![parse_tree_group(sc)?];
        while sc.eat(b',')? {
            parts.push(parse_tree_group(sc)?);
        }
        sc.expect(b')')?;
        // internal labels are accepted and ignored
        sc.label()?;
        sc.skip_length()?;
        if parts.len() != 2 {
            return Err(syntax(
                open,
                format!("non-binary vertex with {} children", parts.len()),
            ));
        }
        let b = parts.pop().unwrap();
        let a = parts.pop().unwrap();
        Ok(TreeSpec::node(a, b))
    } else {
        let at = sc.pos;
        let lab = sc
            .label()?
            .ok_or_else(|| syntax(at, "expected a leaf label or '('"))?;
        sc.skip_length()?;
        Ok(TreeSpec::Leaf(lab))
    }
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// Parse extended Newick into a raw DAG without enforcing network degree
/// rules (so that `netcheck::validate` can report on arbitrary input).
/// Tag arity, parallel edges and cycles are still parse errors.
pub fn parse_network_raw(text: &str) -> Result<Dag, ParseError> {
    let mut sc = Scanner::new(text);
    let mut dag = Dag::new();
    let mut tags: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut tag_uses: BTreeMap<String, usize> = BTreeMap::new();
    parse_net_group(&mut sc, &mut dag, &mut tags, &mut tag_uses)?;
    sc.finish()?;
    for (tag, n) in &tag_uses {
        if *n != 2 {
            return Err(syntax(
                0,
                format!("reticulation tag #{} appears {} times, expected 2", tag, n),
            ));
        }
    }
    if let Some((u, v)) = dag.has_parallel_edges() {
        return Err(syntax(0, format!("parallel edges between vertices {} and {}", u, v)));
    }
    if dag.topo_order().is_none() {
        return Err(syntax(0, "reticulation tags induce a directed cycle"));
    }
    Ok(dag)
}

/// Parse extended Newick into a validated network.
pub fn parse_network(text: &str) -> Result<PhyloNetwork, ParseError> {
    let dag = parse_network_raw(text)?;
    Ok(PhyloNetwork::from_dag(dag)?)
}

fn parse_net_group(
    sc: &mut Scanner,
    dag: &mut Dag,
    tags: &mut BTreeMap<String, NodeId>,
    tag_uses: &mut BTreeMap<String, usize>,
) -> Result<NodeId, ParseError> {
    let node = if sc.eat(b'(')? {
        let mut children = vec![parse_net_group(sc, dag, tags, tag_uses)?];
        while sc.eat(b',')? {
            children.push(parse_net_group(sc, dag, tags, tag_uses)?);
        }
        sc.expect(b')')?;
        // an optional plain label (ignored for internal vertices) and/or a #H tag
        let _ = sc.label()?;
        if sc.eat(b'#')? {
            let at = sc.pos;
            let tag = sc.label()?.ok_or_else(|| syntax(at, "expected a tag after '#'"))?;
            check_tag(&tag, at)?;
            let id = *tags.entry(tag.clone()).or_insert_with(|| dag.add_node(None));
            *tag_uses.entry(tag).or_insert(0) += 1;
            for c in children {
                dag.add_edge(id, c);
            }
            sc.skip_length()?;
            id
        } else {
            sc.skip_length()?;
            let id = dag.add_node(None);
            for c in children {
                dag.add_edge(id, c);
            }
            id
        }
    } else if sc.eat(b'#')? {
        let at = sc.pos;
        let tag = sc.label()?.ok_or_else(|| syntax(at, "expected a tag after '#'"))?;
        check_tag(&tag, at)?;
        let id = *tags.entry(tag.clone()).or_insert_with(|| dag.add_node(None));
        *tag_uses.entry(tag).or_insert(0) += 1;
        sc.skip_length()?;
        id
    } else {
        let at = sc.pos;
        let lab = sc
            .label()?
            .ok_or_else(|| syntax(at, "expected a label, '(' or '#'"))?;
        if !valid_label(&lab) {
            return Err(syntax(at, format!("invalid label '{}'", lab)));
        }
        sc.skip_length()?;
        let mut seen = false;
        for existing in dag.labels.iter().flatten() {
            if *existing == lab {
                seen = true;
            }
        }
        if seen {
            return Err(syntax(at, format!("duplicate leaf label '{}'", lab)));
        }
        dag.add_node(Some(lab))
    };
    Ok(node)
}

fn check_tag(tag: &str, at: usize) -> Result<(), ParseError> {
    let ok = tag.starts_with('H')
        && tag.len() > 1
        && tag[1..].chars().all(|c| c.is_ascii_digit())
        && !tag[1..].starts_with('0');
    if ok {
        Ok(())
    } else {
        Err(syntax(at, format!("reticulation tag '#{}' is not of the form #H<k>", tag)))
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Canonical-form text for a tree.
pub fn serialize_tree(tree: &PhyloTree) -> String {
    format!("{};", tree.canonical_form())
}

/// Canonical-form text for a network, reticulation tags numbered by first
/// encounter in the canonical traversal.
pub fn serialize_network(net: &PhyloNetwork) -> String {
    net.canonical_form()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_parse_basics() {
        let t = parse_tree("((a,b),c);").unwrap();
        assert_eq!(t.cherries(), vec![("a".to_string(), "b".to_string())]);
        let t2 = parse_tree("((1,3),((4,6),(2,5)));").unwrap();
        assert_eq!(t2.leaf_count(), 6);
        assert_eq!(
            t2.cherries(),
            vec![
                ("1".to_string(), "3".to_string()),
                ("2".to_string(), "5".to_string()),
                ("4".to_string(), "6".to_string())
            ]
        );
        assert!(matches!(
            parse_tree("((a,b,c),d);"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(parse_tree("((a,b),a);").is_err());
        // branch lengths and comments are skipped
        let t3 = parse_tree("((a:0.1,b:2):1,[note]c);").unwrap();
        assert_eq!(t3.canonical_form(), "((a,b),c)");
    }

    #[test]
    fn tree_serialize_is_canonical() {
        let t = parse_tree("((b,a),c);").unwrap();
        assert_eq!(serialize_tree(&t), "((a,b),c);");
        let back = parse_tree(&serialize_tree(&t)).unwrap();
        assert!(back.isomorphic(&t).unwrap());
    }

    #[test]
    fn network_parse_basics() {
        let n = parse_network("((a,(b)#H1),(#H1,c));").unwrap();
        assert_eq!(n.reticulation_count(), 1);
        // tag used three times
        assert!(parse_network("((a,(b)#H1),(#H1,(#H1,c)));").is_err());
        // tag used once
        assert!(parse_network("((a,(b)#H1),c);").is_err());
        // round-trip
        let text = serialize_network(&n);
        let n2 = parse_network(&text).unwrap();
        assert!(n.isomorphic(&n2));
        assert_eq!(serialize_network(&n2), text);
    }

    #[test]
    fn minimal_shortcut_network_parses() {
        let n = parse_network("((a)#H1,(#H1,b));").unwrap();
        assert_eq!(n.reticulation_count(), 1);
        assert_eq!(n.leaf_labels(), vec!["a", "b"]);
    }
}

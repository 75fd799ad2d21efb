//! Plain-text tree format.
//!
//! ```text
//! osdt-tree v1
//! features 6 actions 2 nodes 3
//! 0 split 4 1 2
//! 1 leaf 0 resolved 1 stats 3:1.2:0.39999999999999997 0:0:-
//! 2 leaf 1 resolved 0 stats 1:0.5:0.5 2:2:1
//! ```
//!
//! Nodes are listed in preorder; a split names its feature and the ids of
//! its zero and one children. Leaf stats are `count:sum:mean` per action,
//! with `-` for the mean of an unsampled action. Floats use the shortest
//! representation that parses back to the same value.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use super::{DecisionTree, Leaf, Node};
use crate::bandits::ArmStats;

const HEADER: &str = "osdt-tree v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tree text line {line}: {message}")]
pub struct ParseTreeError {
    pub line: usize,
    pub message: String,
}

fn write_node(node: &Node, next_id: &mut usize, out: &mut String) -> usize {
    let id = *next_id;
    *next_id += 1;
    match node {
        Node::Leaf(l) => {
            write!(out, "{id} leaf {} resolved {} stats", l.action, u8::from(l.resolved)).unwrap();
            for s in &l.stats {
                match s.mean() {
                    Some(m) => write!(out, " {}:{}:{}", s.count, s.sum, m).unwrap(),
                    None => write!(out, " {}:{}:-", s.count, s.sum).unwrap(),
                }
            }
            out.push('\n');
        }
        Node::Split { feature, zero, one } => {
            let mut body = String::new();
            let z = write_node(zero, next_id, &mut body);
            let o = write_node(one, next_id, &mut body);
            writeln!(out, "{id} split {feature} {z} {o}").unwrap();
            out.push_str(&body);
        }
    }
    id
}

impl fmt::Display for DecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut body = String::new();
        let mut next = 0;
        write_node(&self.root, &mut next, &mut body);
        writeln!(f, "{HEADER}")?;
        writeln!(f, "features {} actions {} nodes {next}", self.feature_dim, self.n_actions)?;
        f.write_str(&body)
    }
}

enum Parsed {
    Split(usize, usize, usize),
    Leaf(Leaf),
}

fn err(line: usize, message: impl Into<String>) -> ParseTreeError {
    ParseTreeError {
        line,
        message: message.into(),
    }
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseTreeError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| err(line, format!("expected {what}")))
}

fn expect(tok: Option<&str>, word: &str, line: usize) -> Result<(), ParseTreeError> {
    if tok == Some(word) {
        Ok(())
    } else {
        Err(err(line, format!("expected '{word}'")))
    }
}

fn parse_stat(tok: &str, line: usize) -> Result<ArmStats, ParseTreeError> {
    let mut parts = tok.split(':');
    let count = num(parts.next(), line, "a sample count")?;
    let sum = num(parts.next(), line, "a reward sum")?;
    let mean_ok = match parts.next() {
        Some("-") => count == 0,
        Some(m) => m.parse::<f64>().is_ok(),
        None => false,
    };
    if !mean_ok || parts.next().is_some() {
        return Err(err(line, format!("malformed stats entry {tok:?}")));
    }
    Ok(ArmStats::new(count, sum))
}

impl FromStr for DecisionTree {
    type Err = ParseTreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(err(1, format!("expected header '{HEADER}'"))),
        }
        let (ln, shape) = lines.next().ok_or_else(|| err(2, "missing shape line"))?;
        let mut t = shape.split_whitespace();
        expect(t.next(), "features", ln)?;
        let feature_dim: usize = num(t.next(), ln, "feature count")?;
        expect(t.next(), "actions", ln)?;
        let n_actions: usize = num(t.next(), ln, "action count")?;
        expect(t.next(), "nodes", ln)?;
        let n_nodes: usize = num(t.next(), ln, "node count")?;

        let mut nodes: Vec<Option<(usize, Parsed)>> = (0..n_nodes).map(|_| None).collect();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut t = line.split_whitespace();
            let id: usize = num(t.next(), ln, "node id")?;
            if id >= n_nodes || nodes[id].is_some() {
                return Err(err(ln, format!("bad or duplicate node id {id}")));
            }
            let parsed = match t.next() {
                Some("split") => {
                    let feature: usize = num(t.next(), ln, "split feature")?;
                    if feature >= feature_dim {
                        return Err(err(ln, format!("split feature {feature} out of range")));
                    }
                    Parsed::Split(feature, num(t.next(), ln, "zero child")?, num(t.next(), ln, "one child")?)
                }
                Some("leaf") => {
                    let action: usize = num(t.next(), ln, "leaf action")?;
                    expect(t.next(), "resolved", ln)?;
                    let resolved = match t.next() {
                        Some("0") => false,
                        Some("1") => true,
                        _ => return Err(err(ln, "resolved flag must be 0 or 1")),
                    };
                    expect(t.next(), "stats", ln)?;
                    let stats = t.by_ref().map(|tok| parse_stat(tok, ln)).collect::<Result<Vec<_>, _>>()?;
                    if stats.len() != n_actions || action >= n_actions {
                        return Err(err(ln, "leaf must carry one stats entry per action and a valid action"));
                    }
                    Parsed::Leaf(Leaf { action, stats, resolved })
                }
                _ => return Err(err(ln, "expected 'split' or 'leaf'")),
            };
            if t.next().is_some() {
                return Err(err(ln, "trailing tokens"));
            }
            nodes[id] = Some((ln, parsed));
        }

        fn build(id: usize, nodes: &mut [Option<(usize, Parsed)>]) -> Result<Node, ParseTreeError> {
            let (ln, parsed) = nodes
                .get_mut(id)
                .and_then(Option::take)
                .ok_or_else(|| err(0, format!("node {id} missing or referenced twice")))?;
            Ok(match parsed {
                Parsed::Leaf(l) => Node::Leaf(l),
                Parsed::Split(feature, z, o) => {
                    let zero = build(z, nodes).map_err(|e| if e.line == 0 { err(ln, e.message) } else { e })?;
                    let one = build(o, nodes).map_err(|e| if e.line == 0 { err(ln, e.message) } else { e })?;
                    Node::Split {
                        feature,
                        zero: Box::new(zero),
                        one: Box::new(one),
                    }
                }
            })
        }
        let root = build(0, &mut nodes).map_err(|e| if e.line == 0 { err(2, e.message) } else { e })?;
        if let Some((ln, _)) = nodes.iter().flatten().next() {
            return Err(err(*ln, "node not reachable from the root"));
        }
        Ok(DecisionTree::new(feature_dim, n_actions, root))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::search::{train_osdt, TrainConfig};
    use crate::tree::{Record, SparseRewardDataset};

    #[test]
    fn roundtrip_trained_tree() {
        let mut recs = Vec::new();
        for i in 0..16u64 {
            let bits: String = (0..4).map(|b| if (i >> b) & 1 == 1 { '1' } else { '0' }).collect();
            for a in 0..3 {
                let r = ((i * 7 + a as u64 * 3) % 10) as f64 / 9.0;
                recs.push(Record {
                    state_id: i,
                    features: bits.parse().unwrap(),
                    action: a,
                    reward: r,
                });
            }
        }
        let ds = SparseRewardDataset::from_records(3, 4, recs).unwrap();
        let tree = train_osdt(&ds, &TrainConfig { lambda: 0.001, max_depth: 3, ..Default::default() }).unwrap();
        assert!(tree.n_leaves() > 1);
        let text = tree.to_string();
        let back: DecisionTree = text.parse().unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn parses_documented_example() {
        let text = "osdt-tree v1\nfeatures 6 actions 2 nodes 3\n0 split 4 1 2\n\
                    1 leaf 0 resolved 1 stats 3:1.2:0.39999999999999997 0:0:-\n\
                    2 leaf 1 resolved 0 stats 1:0.5:0.5 2:2:1\n";
        let t: DecisionTree = text.parse().unwrap();
        assert_eq!(t.splits(), vec![4]);
        assert!(t.leaves()[0].resolved);
        assert_eq!(t.leaves()[1].stats[1], ArmStats::new(2, 2.0));
        assert_eq!(t.to_string(), text);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "osdt-tree v1\nfeatures 2 actions 1 nodes 1\n0 leaf 0 resolved 2 stats 1:1:1\n";
        assert_eq!(bad.parse::<DecisionTree>().unwrap_err().line, 3);
        let bad = "osdt-tree v2\n";
        assert_eq!(bad.parse::<DecisionTree>().unwrap_err().line, 1);
        let orphan = "osdt-tree v1\nfeatures 2 actions 1 nodes 2\n0 leaf 0 resolved 0 stats 1:1:1\n1 leaf 0 resolved 0 stats 1:1:1\n";
        assert_eq!(orphan.parse::<DecisionTree>().unwrap_err().line, 4);
    }
}

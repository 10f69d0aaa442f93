//! Directed graphs over named variables and the algorithms the graph objects
//! are built from: ancestry, strongly connected components, acyclification,
//! d-separation and set algebra on edge sets.
//!
//! Nodes are kept in lexicographic order so every traversal, report and DOT
//! file comes out byte-identical for identical inputs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeSet = BTreeSet<String>;

/// A directed graph without self-loops. Cycles are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DirectedGraph {
    nodes: NodeSet,
    edges: BTreeSet<(String, String)>,
}

/// Undirected adjacency structure; pairs are stored with the smaller name first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UndirectedSkeleton {
    nodes: NodeSet,
    adjacencies: BTreeSet<(String, String)>,
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

impl DirectedGraph {
    pub fn new<I, S>(nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            nodes: nodes.into_iter().map(Into::into).collect(),
            edges: BTreeSet::new(),
        }
    }

    pub fn with_edges<I, S, E, A, B>(nodes: I, edges: E) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut g = Self::new(nodes);
        for (a, b) in edges {
            g.add_edge(a.as_ref(), b.as_ref())?;
        }
        Ok(g)
    }

    /// Inserts `parent -> child`. Self-loops are rejected as input errors.
    pub fn add_edge(&mut self, parent: &str, child: &str) -> Result<()> {
        self.check_node(parent)?;
        self.check_node(child)?;
        if parent == child {
            return Err(Error::InvalidQuery(format!("self-loop on `{parent}`")));
        }
        self.edges.insert((parent.to_string(), child.to_string()));
        Ok(())
    }

    pub fn remove_edge(&mut self, parent: &str, child: &str) -> bool {
        self.edges.remove(&(parent.to_string(), child.to_string()))
    }

    fn check_node(&self, v: &str) -> Result<()> {
        if self.nodes.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownNode(v.to_string()))
        }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, parent: &str, child: &str) -> bool {
        self.edges
            .contains(&(parent.to_string(), child.to_string()))
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.contains_edge(a, b) || self.contains_edge(b, a)
    }

    pub fn parents(&self, v: &str) -> NodeSet {
        self.edges
            .iter()
            .filter(|(_, c)| c == v)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn children(&self, v: &str) -> NodeSet {
        self.edges
            .iter()
            .filter(|(p, _)| p == v)
            .map(|(_, c)| c.clone())
            .collect()
    }

    fn parent_map(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (p, c) in &self.edges {
            map.get_mut(c.as_str()).expect("edge endpoint").push(p);
        }
        map
    }

    /// Reflexive-transitive closure of `seed` under the parent relation.
    pub fn ancestors<I, S>(&self, seed: I) -> Result<NodeSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let parents = self.parent_map();
        let mut out = NodeSet::new();
        let mut queue = VecDeque::new();
        for s in seed {
            let s = s.as_ref();
            self.check_node(s)?;
            if out.insert(s.to_string()) {
                queue.push_back(s.to_string());
            }
        }
        while let Some(v) = queue.pop_front() {
            for p in &parents[v.as_str()] {
                if out.insert(p.to_string()) {
                    queue.push_back(p.to_string());
                }
            }
        }
        Ok(out)
    }

    /// Convenience wrapper for a single node.
    pub fn ancestors_of(&self, v: &str) -> Result<NodeSet> {
        self.ancestors([v])
    }

    /// SCC partition, each component sorted, components ordered by their
    /// smallest member.
    pub fn strongly_connected_components(&self) -> Vec<NodeSet> {
        let mut pg = DiGraph::<&str, ()>::new();
        let idx: BTreeMap<&str, _> = self
            .nodes
            .iter()
            .map(|n| (n.as_str(), pg.add_node(n.as_str())))
            .collect();
        for (p, c) in &self.edges {
            pg.add_edge(idx[p.as_str()], idx[c.as_str()], ());
        }
        let mut comps: Vec<NodeSet> = tarjan_scc(&pg)
            .into_iter()
            .map(|c| c.into_iter().map(|i| pg[i].to_string()).collect())
            .collect();
        comps.sort_by(|a: &NodeSet, b: &NodeSet| a.first().cmp(&b.first()));
        comps
    }

    fn scc_index(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (i, comp) in self.strongly_connected_components().into_iter().enumerate() {
            for v in comp {
                out.insert(v, i);
            }
        }
        out
    }

    /// True if `v` lies on a directed cycle.
    pub fn on_cycle(&self, v: &str) -> bool {
        self.strongly_connected_components()
            .iter()
            .any(|c| c.len() > 1 && c.contains(v))
    }

    pub fn is_acyclic(&self) -> bool {
        self.strongly_connected_components()
            .iter()
            .all(|c| c.len() == 1)
    }

    /// Acyclification: every node inherits the external parents of its SCC
    /// and becomes adjacent to all SCC peers. Within an SCC the peer edges are
    /// oriented by name so the result is a DAG; only the skeleton and the
    /// inter-SCC structure carry meaning.
    pub fn acyclify(&self) -> DirectedGraph {
        let comps = self.strongly_connected_components();
        let comp_of = self.scc_index();
        let mut out = DirectedGraph::new(self.nodes.iter().cloned());
        for comp in &comps {
            let external: NodeSet = comp
                .iter()
                .flat_map(|v| self.parents(v))
                .filter(|p| !comp.contains(p))
                .collect();
            for v in comp {
                for p in &external {
                    out.edges.insert((p.clone(), v.clone()));
                }
                for peer in comp.iter().filter(|peer| *peer < v) {
                    out.edges.insert((peer.clone(), v.clone()));
                }
            }
        }
        debug_assert!(out
            .edges
            .iter()
            .all(|(p, c)| comp_of[p] != comp_of[c] || p < c));
        out
    }

    /// d-separation of `x` and `y` given `z` (reachability formulation).
    pub fn d_separated(&self, x: &str, y: &str, z: &NodeSet) -> Result<bool> {
        self.check_node(x)?;
        self.check_node(y)?;
        for v in z {
            self.check_node(v)?;
        }
        if x == y || z.contains(x) || z.contains(y) {
            return Err(Error::InvalidQuery(
                "d-separation requires distinct x, y outside the conditioning set".into(),
            ));
        }
        if !self.is_acyclic() {
            return Err(Error::RequiresDag);
        }
        let z_anc = self.ancestors(z.iter())?;
        let parents = self.parent_map();
        let mut children: BTreeMap<&str, Vec<&str>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (p, c) in &self.edges {
            children.get_mut(p.as_str()).expect("edge endpoint").push(c);
        }
        // (node, arrived_from_child): true means travelling upwards.
        let mut visited: BTreeSet<(&str, bool)> = BTreeSet::new();
        let mut queue: VecDeque<(&str, bool)> = VecDeque::new();
        queue.push_back((x, true));
        while let Some((v, up)) = queue.pop_front() {
            if !visited.insert((v, up)) {
                continue;
            }
            if v == y {
                return Ok(false);
            }
            let observed = z.contains(v);
            if up {
                if !observed {
                    for p in &parents[v] {
                        queue.push_back((p, true));
                    }
                    for c in &children[v] {
                        queue.push_back((c, false));
                    }
                }
            } else {
                if !observed {
                    for c in &children[v] {
                        queue.push_back((c, false));
                    }
                }
                if z_anc.contains(v) {
                    for p in &parents[v] {
                        queue.push_back((p, true));
                    }
                }
            }
        }
        Ok(true)
    }

    pub fn skeleton(&self) -> UndirectedSkeleton {
        UndirectedSkeleton {
            nodes: self.nodes.clone(),
            adjacencies: self
                .edges
                .iter()
                .map(|(a, b)| ordered_pair(a, b))
                .collect(),
        }
    }

    /// The same graph with every edge touching `node` removed.
    pub fn without_edges_of(&self, node: &str) -> DirectedGraph {
        DirectedGraph {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(a, b)| a != node && b != node)
                .cloned()
                .collect(),
        }
    }

    /// Only the edges touching `node`.
    pub fn edges_of(&self, node: &str) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .filter(|(a, b)| a == node || b == node)
            .cloned()
            .collect()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", dot_id(name));
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", dot_id(n));
        }
        for (p, c) in &self.edges {
            let _ = writeln!(out, "  {} -> {};", dot_id(p), dot_id(c));
        }
        out.push_str("}\n");
        out
    }
}

fn same_nodes<'a, I>(mut graphs: I) -> Result<NodeSet>
where
    I: Iterator<Item = &'a NodeSet>,
{
    let first = graphs.next().cloned().unwrap_or_default();
    for nodes in graphs {
        if *nodes != first {
            return Err(Error::NodeMismatch);
        }
    }
    Ok(first)
}

/// Edge-set union of graphs sharing a node set.
pub fn union_graphs(graphs: &[&DirectedGraph]) -> Result<DirectedGraph> {
    let nodes = same_nodes(graphs.iter().map(|g| &g.nodes))?;
    Ok(DirectedGraph {
        nodes,
        edges: graphs.iter().flat_map(|g| g.edges.iter().cloned()).collect(),
    })
}

pub fn intersect_graphs(a: &DirectedGraph, b: &DirectedGraph) -> Result<DirectedGraph> {
    same_nodes([&a.nodes, &b.nodes].into_iter())?;
    Ok(DirectedGraph {
        nodes: a.nodes.clone(),
        edges: a.edges.intersection(&b.edges).cloned().collect(),
    })
}

/// True if every edge of `a` is an edge of `b`.
pub fn is_edge_subset(a: &DirectedGraph, b: &DirectedGraph) -> Result<bool> {
    same_nodes([&a.nodes, &b.nodes].into_iter())?;
    Ok(a.edges.is_subset(&b.edges))
}

impl UndirectedSkeleton {
    pub fn new<I, S>(nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            nodes: nodes.into_iter().map(Into::into).collect(),
            adjacencies: BTreeSet::new(),
        }
    }

    pub fn with_adjacencies<I, S, E, A, B>(nodes: I, adjacencies: E) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut s = Self::new(nodes);
        for (a, b) in adjacencies {
            s.add(a.as_ref(), b.as_ref())?;
        }
        Ok(s)
    }

    /// Complete graph over `nodes`.
    pub fn complete<I, S>(nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut s = Self::new(nodes);
        let names: Vec<String> = s.nodes.iter().cloned().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                s.adjacencies.insert(ordered_pair(a, b));
            }
        }
        s
    }

    pub fn add(&mut self, a: &str, b: &str) -> Result<()> {
        for v in [a, b] {
            if !self.nodes.contains(v) {
                return Err(Error::UnknownNode(v.to_string()));
            }
        }
        if a == b {
            return Err(Error::InvalidQuery(format!("self-adjacency on `{a}`")));
        }
        self.adjacencies.insert(ordered_pair(a, b));
        Ok(())
    }

    pub fn remove(&mut self, a: &str, b: &str) -> bool {
        self.adjacencies.remove(&ordered_pair(a, b))
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn adjacencies(&self) -> &BTreeSet<(String, String)> {
        &self.adjacencies
    }

    pub fn len(&self) -> usize {
        self.adjacencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacencies.is_empty()
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.adjacencies.contains(&ordered_pair(a, b))
    }

    pub fn neighbors(&self, v: &str) -> NodeSet {
        self.adjacencies
            .iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b.clone())
                } else if b == v {
                    Some(a.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_subset(&self, other: &UndirectedSkeleton) -> bool {
        self.adjacencies.is_subset(&other.adjacencies)
    }

    /// Adjacencies not touching `node`.
    pub fn without_edges_of(&self, node: &str) -> UndirectedSkeleton {
        UndirectedSkeleton {
            nodes: self.nodes.clone(),
            adjacencies: self
                .adjacencies
                .iter()
                .filter(|(a, b)| a != node && b != node)
                .cloned()
                .collect(),
        }
    }

    pub fn edges_of(&self, node: &str) -> BTreeSet<(String, String)> {
        self.adjacencies
            .iter()
            .filter(|(a, b)| a == node || b == node)
            .cloned()
            .collect()
    }

    /// Same adjacencies over an enlarged node set.
    pub fn extend_nodes<I, S>(&self, extra: I) -> UndirectedSkeleton
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = self.clone();
        out.nodes.extend(extra.into_iter().map(Into::into));
        out
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph {} {{", dot_id(name));
        for n in &self.nodes {
            let _ = writeln!(out, "  {};", dot_id(n));
        }
        for (a, b) in &self.adjacencies {
            let _ = writeln!(out, "  {} -- {};", dot_id(a), dot_id(b));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> DirectedGraph {
        DirectedGraph::with_edges(["R", "T", "Y"], [("R", "T"), ("T", "Y")]).unwrap()
    }

    fn set(items: &[&str]) -> NodeSet {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ancestors_of_chain() {
        let g = chain();
        assert_eq!(g.ancestors_of("Y").unwrap(), set(&["R", "T", "Y"]));
        assert_eq!(g.ancestors_of("R").unwrap(), set(&["R"]));
        let cyc = DirectedGraph::with_edges(["A", "B"], [("A", "B"), ("B", "A")]).unwrap();
        assert_eq!(cyc.ancestors_of("A").unwrap(), set(&["A", "B"]));
        assert!(matches!(g.ancestors_of("Q"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn scc_partitions() {
        assert_eq!(
            chain().strongly_connected_components(),
            vec![set(&["R"]), set(&["T"]), set(&["Y"])]
        );
        let g = DirectedGraph::with_edges(["A", "B", "C"], [("A", "B"), ("B", "A")]).unwrap();
        assert_eq!(
            g.strongly_connected_components(),
            vec![set(&["A", "B"]), set(&["C"])]
        );
        assert!(DirectedGraph::default()
            .strongly_connected_components()
            .is_empty());
    }

    #[test]
    fn acyclify_two_cycle_with_external_parent() {
        let g = DirectedGraph::with_edges(
            ["A", "B", "C"],
            [("A", "B"), ("B", "A"), ("C", "A")],
        )
        .unwrap();
        let a = g.acyclify();
        assert!(a.is_acyclic());
        // parent formula: Pa'(A) = {B, C}, Pa'(B) = {A, C} up to orientation
        // inside the SCC.
        let sk = a.skeleton();
        for (x, y) in [("A", "B"), ("A", "C"), ("B", "C")] {
            assert!(sk.adjacent(x, y), "{x}-{y}");
        }
        assert!(a.contains_edge("C", "A") && a.contains_edge("C", "B"));
        assert_eq!(chain().acyclify(), chain());
    }

    #[test]
    fn acyclify_three_cycle_is_complete() {
        let g = DirectedGraph::with_edges(
            ["A", "B", "C"],
            [("A", "B"), ("B", "C"), ("C", "A")],
        )
        .unwrap();
        let sk = g.acyclify().skeleton();
        assert_eq!(sk, UndirectedSkeleton::complete(["A", "B", "C"]));
    }

    #[test]
    fn d_separation_basics() {
        let g = chain();
        assert!(g.d_separated("R", "Y", &set(&["T"])).unwrap());
        assert!(!g.d_separated("R", "Y", &set(&[])).unwrap());
        let col = DirectedGraph::with_edges(["X", "C", "Y"], [("X", "C"), ("Y", "C")]).unwrap();
        assert!(col.d_separated("X", "Y", &set(&[])).unwrap());
        assert!(!col.d_separated("X", "Y", &set(&["C"])).unwrap());
        let cyc = DirectedGraph::with_edges(["A", "B", "C"], [("A", "B"), ("B", "A")]).unwrap();
        assert!(matches!(
            cyc.d_separated("A", "C", &set(&[])),
            Err(Error::RequiresDag)
        ));
    }

    #[test]
    fn edge_algebra() {
        let a = DirectedGraph::with_edges(["R", "T", "Y"], [("R", "T")]).unwrap();
        let b = DirectedGraph::with_edges(["R", "T", "Y"], [("T", "Y")]).unwrap();
        assert_eq!(union_graphs(&[&a, &b]).unwrap(), chain());
        assert_eq!(intersect_graphs(&chain(), &b).unwrap(), b);
        let empty = DirectedGraph::new(["R", "T", "Y"]);
        assert!(is_edge_subset(&empty, &a).unwrap());
        let other = DirectedGraph::new(["R"]);
        assert!(matches!(
            is_edge_subset(&other, &a),
            Err(Error::NodeMismatch)
        ));
        assert!(chain().skeleton().adjacent("T", "R"));
    }

    #[test]
    fn dot_is_stable() {
        let dot = chain().to_dot("union");
        assert_eq!(
            dot,
            "digraph \"union\" {\n  \"R\";\n  \"T\";\n  \"Y\";\n  \"R\" -> \"T\";\n  \"T\" -> \"Y\";\n}\n"
        );
    }
}

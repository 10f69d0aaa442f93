//! Per-regime classification of vanished edges as physical (mechanism
//! change), non-physical (support-induced) or undetermined.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeSet, UndirectedSkeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oriented,
    Skeleton,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "oriented" => Ok(Mode::Oriented),
            "skeleton" => Ok(Mode::Skeleton),
            _ => Err(Error::InvalidQuery(format!("unknown mode `{s}` (oriented|skeleton)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Physical,
    NonPhysical,
    Undetermined,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Physical => "physical",
            Classification::NonPhysical => "non_physical",
            Classification::Undetermined => "undetermined",
        })
    }
}

pub const RULE_R1_PARENT: &str = "R1-parent";
pub const RULE_R1_SKELETON: &str = "R1-skeleton";
pub const RULE_R2: &str = "R2";
pub const RULE_R2_CYCLE: &str = "R2-cycle";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeChange {
    /// `(parent, child)` in oriented mode; sorted pair in skeleton mode.
    pub edge: (String, String),
    pub regime: String,
    pub in_union: bool,
    pub in_detect_r: bool,
    pub classification: Classification,
    pub rule: Option<String>,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub mode: Mode,
    pub context: String,
    pub per_regime: BTreeMap<String, Vec<EdgeChange>>,
    /// Detect adjacencies outside the union graph.
    pub violations: Vec<String>,
}

/// Union graph input: oriented rules need parent sets.
#[derive(Debug, Clone)]
pub enum UnionInput<'a> {
    Oriented(&'a DirectedGraph),
    Skeleton(&'a UndirectedSkeleton),
}

impl UnionInput<'_> {
    fn skeleton(&self) -> UndirectedSkeleton {
        match self {
            UnionInput::Oriented(g) => g.skeleton(),
            UnionInput::Skeleton(s) => (*s).clone(),
        }
    }
}

fn set(s: &NodeSet) -> String {
    format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(","))
}

/// Oriented rules for a vanished union edge `x -> y` at one regime.
fn classify_oriented(union: &DirectedGraph, context: &str, x: &str, y: &str) -> (Classification, Option<&'static str>, String) {
    let pa = union.parents(y);
    if y != context && !pa.contains(context) {
        return (
            Classification::NonPhysical,
            Some(RULE_R1_PARENT),
            format!("{context} is not a parent of {y}, so f_{y} cannot change with {context}"),
        );
    }
    if y != context && pa.contains(x) && pa.contains(context) {
        let anc_r = union.ancestors_of(context).expect("context node");
        let others: NodeSet = pa.iter().filter(|p| *p != context).cloned().collect();
        let anc_o = union.ancestors(others.iter().map(String::as_str)).expect("union nodes");
        if anc_r.is_disjoint(&anc_o) {
            if union.on_cycle(y) {
                let scc = union
                    .strongly_connected_components()
                    .into_iter()
                    .find(|c| c.contains(y))
                    .expect("y in some component");
                return (
                    Classification::Physical,
                    Some(RULE_R2_CYCLE),
                    format!(
                        "physical change into the strongly connected component {} of {y}: ancestors of {context} are disjoint from ancestors of {}",
                        set(&scc),
                        set(&others)
                    ),
                );
            }
            return (
                Classification::Physical,
                Some(RULE_R2),
                format!(
                    "{context} is a parent of {y} and its ancestors {} are disjoint from the ancestors {} of the other parents",
                    set(&anc_r),
                    set(&anc_o)
                ),
            );
        }
    }
    (
        Classification::Undetermined,
        None,
        "neither rule applies".into(),
    )
}

fn classify_skeleton(union: &UndirectedSkeleton, context: &str, x: &str, y: &str) -> (Classification, Option<&'static str>, String) {
    if x != context && y != context && !union.adjacent(context, x) && !union.adjacent(context, y) {
        return (
            Classification::NonPhysical,
            Some(RULE_R1_SKELETON),
            format!("{context} is adjacent to neither {x} nor {y}"),
        );
    }
    let adjacent: Vec<&str> = [x, y]
        .into_iter()
        .filter(|v| *v == context || union.adjacent(context, v))
        .collect();
    (
        Classification::Undetermined,
        None,
        format!(
            "{context} is adjacent to or equal to {}; orientation is not determined by the skeleton",
            adjacent.join(" and ")
        ),
    )
}

/// Classifies every union adjacency that is absent from `detect[r]`.
pub fn classify_changes(
    union: UnionInput<'_>,
    detect: &BTreeMap<String, UndirectedSkeleton>,
    context: &str,
    mode: Mode,
) -> Result<ChangeReport> {
    let skel = union.skeleton();
    if !skel.nodes().contains(context) {
        return Err(Error::UnknownNode(context.to_string()));
    }
    let oriented = match (mode, &union) {
        (Mode::Oriented, UnionInput::Oriented(g)) => Some(*g),
        (Mode::Oriented, UnionInput::Skeleton(_)) => {
            return Err(Error::InvalidQuery(
                "oriented mode needs a directed union graph".into(),
            ))
        }
        (Mode::Skeleton, _) => None,
    };
    let mut per_regime = BTreeMap::new();
    let mut violations = Vec::new();
    for (r, d) in detect {
        if d.nodes() != skel.nodes() {
            return Err(Error::NodeMismatch);
        }
        for (a, b) in d.adjacencies() {
            if !skel.adjacent(a, b) {
                violations.push(format!("{a}-{b} is detected at {context}={r} but absent from the union graph"));
            }
        }
        let mut changes = Vec::new();
        let vanished: Vec<(String, String)> = match oriented {
            Some(g) => g
                .edges()
                .iter()
                .filter(|(a, b)| !d.adjacent(a, b))
                .cloned()
                .collect(),
            None => skel
                .adjacencies()
                .iter()
                .filter(|(a, b)| !d.adjacent(a, b))
                .cloned()
                .collect(),
        };
        for (x, y) in vanished {
            let (classification, rule, justification) = match oriented {
                Some(g) => classify_oriented(g, context, &x, &y),
                None => classify_skeleton(&skel, context, &x, &y),
            };
            changes.push(EdgeChange {
                in_detect_r: d.adjacent(&x, &y),
                edge: (x, y),
                regime: r.clone(),
                in_union: true,
                classification,
                rule: rule.map(str::to_string),
                justification,
            });
        }
        per_regime.insert(r.clone(), changes);
    }
    Ok(ChangeReport {
        mode,
        context: context.to_string(),
        per_regime,
        violations,
    })
}

impl ChangeReport {
    pub fn changes(&self) -> impl Iterator<Item = &EdgeChange> {
        self.per_regime.values().flatten()
    }

    pub fn find(&self, regime: &str, a: &str, b: &str) -> Option<&EdgeChange> {
        self.per_regime.get(regime)?.iter().find(|c| {
            (c.edge.0 == a && c.edge.1 == b) || (c.edge.0 == b && c.edge.1 == a)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["regime", "x", "y", "in_union", "in_detect_r", "classification", "rule", "justification"])
            .expect("in-memory write");
        for c in self.changes() {
            w.write_record([
                c.regime.as_str(),
                c.edge.0.as_str(),
                c.edge.1.as_str(),
                if c.in_union { "true" } else { "false" },
                if c.in_detect_r { "true" } else { "false" },
                &c.classification.to_string(),
                c.rule.as_deref().unwrap_or(""),
                c.justification.as_str(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::get_example;
    use crate::discovery::{detect_graph, DetectOptions, ExactTester};
    use crate::objects::GroundTruth;

    fn detects(gt: &GroundTruth) -> BTreeMap<String, UndirectedSkeleton> {
        let t = ExactTester::from_ground_truth(gt);
        gt.regime_labels()
            .into_iter()
            .map(|r| {
                let d = detect_graph(&t, &r, DetectOptions::default()).unwrap().skeleton;
                (r, d)
            })
            .collect()
    }

    #[test]
    fn mediator_skeleton_mode() {
        let gt = GroundTruth::new(&get_example("intro-mediator").unwrap()).unwrap();
        let skel = gt.union().skeleton();
        let rep = classify_changes(UnionInput::Skeleton(&skel), &detects(&gt), "R", Mode::Skeleton).unwrap();
        let ty = rep.find("0", "T", "Y").unwrap();
        assert_eq!(ty.classification, Classification::NonPhysical);
        assert_eq!(ty.rule.as_deref(), Some(RULE_R1_SKELETON));
        let mt = rep.find("0", "M", "T").unwrap();
        assert_eq!(mt.classification, Classification::Undetermined);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn exo_gate_oriented_r2() {
        let gt = GroundTruth::new(&get_example("exo-gate").unwrap()).unwrap();
        let rep = classify_changes(UnionInput::Oriented(gt.union()), &detects(&gt), "R", Mode::Oriented).unwrap();
        let xy = rep.find("0", "X", "Y").unwrap();
        assert_eq!(xy.classification, Classification::Physical);
        assert_eq!(xy.rule.as_deref(), Some(RULE_R2));
        assert!(!gt.physical(gt.regime("0").unwrap()).contains_edge("X", "Y"));
    }

    #[test]
    fn oriented_needs_directed_union() {
        let s = UndirectedSkeleton::new(["R"]);
        assert!(classify_changes(UnionInput::Skeleton(&s), &BTreeMap::new(), "R", Mode::Oriented).is_err());
    }

    #[test]
    fn csv_lists_every_change() {
        let gt = GroundTruth::new(&get_example("intro").unwrap()).unwrap();
        let rep = classify_changes(UnionInput::Oriented(gt.union()), &detects(&gt), "R", Mode::Oriented).unwrap();
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 1 + rep.changes().count());
        assert!(csv.contains("R1-parent"));
    }
}

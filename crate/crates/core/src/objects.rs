//! Ground-truth graph objects of an SCM with context variable `R`:
//! mechanism, union (visible), descriptive, physical, counterfactual and
//! ident graphs, plus acyclicity, regularity and faithfulness predicates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{joint_from_solution, solve_model, JointPmf, SolutionTable, DEFAULT_SOLVE_CAP};
use crate::graph::{DirectedGraph, NodeSet};
use crate::independence::ci_exact_idx;
use crate::scm::{Model, Scm};

/// Edges `X -> Y` for which `f_Y` is non-constant in `X` between two parent
/// assignments that occur in `rows` and differ only in `X`, for some noise
/// label in `noises(Y)`. With `fixed = Some((R, r))` every row has `R`
/// replaced by `r` and `f_R` is treated as the constant `do(R = r)`.
fn dependence_edges(
    model: &Model,
    rows: &BTreeSet<Vec<u16>>,
    fixed: Option<(usize, u16)>,
    noises: impl Fn(usize) -> Vec<u16>,
) -> DirectedGraph {
    let mut g = DirectedGraph::new(model.names().iter().cloned());
    for y in 0..model.len() {
        if matches!(fixed, Some((r, _)) if r == y) {
            continue;
        }
        let pa = model.parents(y);
        let proj: BTreeSet<Vec<u16>> = rows
            .iter()
            .map(|row| {
                pa.iter()
                    .map(|&p| match fixed {
                        Some((r, v)) if r == p => v,
                        _ => row[p],
                    })
                    .collect()
            })
            .collect();
        let labels = noises(y);
        let mut full = vec![0u16; model.len()];
        for (i, &x) in pa.iter().enumerate() {
            let found = proj.iter().any(|a| {
                proj.range(a.clone()..).skip(1).any(|b| {
                    differs_only_at(a, b, i) && {
                        labels.iter().any(|&n| {
                            eval_at(model, y, pa, a, &mut full, n) != eval_at(model, y, pa, b, &mut full, n)
                        })
                    }
                })
            });
            if found {
                g.add_edge(model.name(x), model.name(y)).expect("model nodes");
            }
        }
    }
    g
}

fn differs_only_at(a: &[u16], b: &[u16], i: usize) -> bool {
    a[i] != b[i] && a.iter().zip(b).enumerate().all(|(k, (u, v))| k == i || u == v)
}

fn eval_at(model: &Model, y: usize, pa: &[usize], vals: &[u16], full: &mut [u16], noise: u16) -> u16 {
    for (&p, &v) in pa.iter().zip(vals) {
        full[p] = v;
    }
    model.eval(y, full, noise)
}

/// True iff on `rows` (with the optional override) `f_Y` is determined by
/// the values of `keys` together with its noise.
fn determined_by(
    model: &Model,
    y: usize,
    rows: &BTreeSet<Vec<u16>>,
    fixed: Option<(usize, u16)>,
    keys: &[usize],
) -> bool {
    let labels = model.positive_noise(y);
    let mut seen: HashMap<(Vec<u16>, u16), u16> = HashMap::new();
    let mut full = vec![0u16; model.len()];
    for row in rows {
        full.copy_from_slice(row);
        if let Some((r, v)) = fixed {
            full[r] = v;
        }
        let key: Vec<u16> = keys.iter().map(|&k| full[k]).collect();
        for &n in &labels {
            let out = model.eval(y, &full, n);
            if *seen.entry((key.clone(), n)).or_insert(out) != out {
                return false;
            }
        }
    }
    true
}

pub fn mechanism_graph(scm: &Scm) -> Result<DirectedGraph> {
    let model = Model::new(scm)?;
    Ok(mechanism_graph_of(&model))
}

fn all_assignments(model: &Model) -> BTreeSet<Vec<u16>> {
    let mut out = BTreeSet::new();
    let mut cur = vec![0u16; model.len()];
    loop {
        out.insert(cur.clone());
        let mut k = model.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if (cur[k] as usize) < model.domain(k).len() {
                break;
            }
            cur[k] = 0;
        }
    }
}

fn mechanism_graph_of(model: &Model) -> DirectedGraph {
    dependence_edges(model, &all_assignments(model), None, |y| {
        (0..model.noise_labels(y).len() as u16).collect()
    })
}

/// Observable graph `G[F, Q]` for a distribution `q` whose scope covers
/// every variable of `scm` (extra columns are ignored).
pub fn observable_graph(scm: &Scm, q: &JointPmf) -> Result<DirectedGraph> {
    let model = Model::new(scm)?;
    let cols: Vec<usize> = model
        .names()
        .iter()
        .map(|n| q.column(n))
        .collect::<Result<_>>()?;
    let maps: Vec<Vec<u16>> = cols
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            q.domains()[c]
                .iter()
                .map(|l| model.label_index(i, l))
                .collect::<Result<Vec<u16>>>()
        })
        .collect::<Result<_>>()?;
    let rows: BTreeSet<Vec<u16>> = q
        .support_idx(&cols)
        .into_iter()
        .map(|k| k.iter().enumerate().map(|(i, &v)| maps[i][v as usize]).collect())
        .collect();
    Ok(dependence_edges(&model, &rows, None, |y| model.positive_noise(y)))
}

/// Outcome of a predicate that may be partial or not applicable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub holds: bool,
    /// False when a cap stopped the search before it was exhaustive.
    pub complete: bool,
    pub checked: usize,
    pub witnesses: Vec<String>,
}

/// Every graph object of one SCM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphObjectSet {
    pub mechanism: DirectedGraph,
    pub union: DirectedGraph,
    pub per_regime: BTreeMap<String, RegimeGraphs>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeGraphs {
    pub descriptive: DirectedGraph,
    pub physical: DirectedGraph,
    pub counterfactual: DirectedGraph,
    /// Edges of `counterfactual` copied from the union graph at `R`; shown
    /// for symmetry, not derived from the intervened model.
    pub counterfactual_annotations: BTreeSet<(String, String)>,
    pub ident: DirectedGraph,
}

/// Solved model with its exact distributions and the union graph, from
/// which every per-regime object is derived.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    model: Model,
    solution: SolutionTable,
    joint: JointPmf,
    full: JointPmf,
    support: BTreeSet<Vec<u16>>,
    regimes: Vec<u16>,
    union: DirectedGraph,
}

impl GroundTruth {
    pub fn new(scm: &Scm) -> Result<GroundTruth> {
        GroundTruth::with_cap(scm, DEFAULT_SOLVE_CAP)
    }

    pub fn with_cap(scm: &Scm, cap: u128) -> Result<GroundTruth> {
        let model = Model::new(scm)?;
        let solution = solve_model(&model, cap)?;
        let (joint, full) = joint_from_solution(&model, &solution)?;
        let all: Vec<usize> = (0..model.len()).collect();
        let support = joint.support_idx(&all);
        let r = model.context();
        let regimes: Vec<u16> = support
            .iter()
            .map(|row| row[r])
            .collect::<BTreeSet<u16>>()
            .into_iter()
            .collect();
        let union = dependence_edges(&model, &support, None, |y| model.positive_noise(y));
        Ok(GroundTruth {
            model,
            solution,
            joint,
            full,
            support,
            regimes,
            union,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn scm(&self) -> &Scm {
        self.model.scm()
    }

    pub fn solution(&self) -> &SolutionTable {
        &self.solution
    }

    /// Observable joint `P_M(V)`.
    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }

    /// Noise–observable joint (observables, then `eta(X)` columns).
    pub fn noise_joint(&self) -> &JointPmf {
        &self.full
    }

    pub fn support(&self) -> &BTreeSet<Vec<u16>> {
        &self.support
    }

    pub fn context(&self) -> usize {
        self.model.context()
    }

    pub fn context_name(&self) -> &str {
        self.model.context_name()
    }

    /// Values of `R` with positive probability, as domain indices.
    pub fn regimes(&self) -> &[u16] {
        &self.regimes
    }

    pub fn regime_label(&self, r: u16) -> &str {
        &self.model.domain(self.context())[r as usize]
    }

    pub fn regime_labels(&self) -> Vec<String> {
        self.regimes.iter().map(|&r| self.regime_label(r).to_string()).collect()
    }

    /// Resolves a regime label; zero-probability values are an error.
    pub fn regime(&self, label: &str) -> Result<u16> {
        let r = self.model.label_index(self.context(), label)?;
        if self.regimes.contains(&r) {
            Ok(r)
        } else {
            Err(Error::ZeroProbability(format!("{}={label}", self.context_name())))
        }
    }

    pub fn mechanism(&self) -> DirectedGraph {
        mechanism_graph_of(&self.model)
    }

    pub fn union(&self) -> &DirectedGraph {
        &self.union
    }

    pub fn regime_support(&self, r: u16) -> BTreeSet<Vec<u16>> {
        let c = self.context();
        self.support.iter().filter(|row| row[c] == r).cloned().collect()
    }

    fn with_r_edges(&self, mut g: DirectedGraph) -> DirectedGraph {
        let r = self.context_name();
        for (a, b) in self.union.edges_of(r) {
            g.add_edge(&a, &b).expect("same node set");
        }
        g
    }

    fn drop_r(&self, g: DirectedGraph) -> DirectedGraph {
        g.without_edges_of(self.context_name())
    }

    pub fn descriptive(&self, r: u16) -> DirectedGraph {
        let rows = self.regime_support(r);
        let g = dependence_edges(&self.model, &rows, Some((self.context(), r)), |y| {
            self.model.positive_noise(y)
        });
        self.with_r_edges(self.drop_r(g))
    }

    /// Non-`R` edges of `f_Y` with `R` held at `r` over the pooled support of
    /// the other parents, restricted to union edges; plus union `R`-edges.
    pub fn physical(&self, r: u16) -> DirectedGraph {
        let g = dependence_edges(&self.model, &self.support, Some((self.context(), r)), |y| {
            self.model.positive_noise(y)
        });
        let mut out = DirectedGraph::new(self.model.names().iter().cloned());
        for (a, b) in g.edges() {
            if self.union.contains_edge(a, b) {
                out.add_edge(a, b).expect("same node set");
            }
        }
        self.with_r_edges(self.drop_r(out))
    }

    /// Union graph of `do(R = r)` plus the annotated union `R`-edges.
    pub fn counterfactual(&self, r: u16) -> Result<(DirectedGraph, BTreeSet<(String, String)>)> {
        let label = self.regime_label(r).to_string();
        let scm = self.scm().intervene(self.context_name(), &label)?;
        let cf = GroundTruth::new(&scm)?;
        let base = cf.union.clone();
        let annotations: BTreeSet<(String, String)> = self
            .union
            .edges_of(self.context_name())
            .into_iter()
            .filter(|(a, b)| !base.contains_edge(a, b))
            .collect();
        Ok((self.with_r_edges(base), annotations))
    }

    /// Reflexive union-ancestors of `R`.
    pub fn union_ancestors_of_r(&self) -> NodeSet {
        self.union.ancestors_of(self.context_name()).expect("R is a node")
    }

    pub fn ident(&self, r: u16) -> DirectedGraph {
        let anc = self.union_ancestors_of_r();
        let mut g = self.descriptive(r);
        for (a, b) in self.union.edges() {
            if anc.contains(a) && anc.contains(b) {
                g.add_edge(a, b).expect("same node set");
            }
        }
        g
    }

    pub fn objects(&self) -> Result<GraphObjectSet> {
        let mut per_regime = BTreeMap::new();
        for &r in &self.regimes {
            let (counterfactual, counterfactual_annotations) = self.counterfactual(r)?;
            per_regime.insert(
                self.regime_label(r).to_string(),
                RegimeGraphs {
                    descriptive: self.descriptive(r),
                    physical: self.physical(r),
                    counterfactual,
                    counterfactual_annotations,
                    ident: self.ident(r),
                },
            );
        }
        Ok(GraphObjectSet {
            mechanism: self.mechanism(),
            union: self.union.clone(),
            per_regime,
        })
    }

    pub fn is_weakly_regime_acyclic(&self) -> bool {
        self.regimes.iter().all(|&r| self.descriptive(r).is_acyclic())
    }

    pub fn is_strongly_regime_acyclic(&self) -> bool {
        self.is_weakly_regime_acyclic()
            && !self
                .union_ancestors_of_r()
                .iter()
                .any(|v| self.union.on_cycle(v))
    }

    /// Parent sufficiency: on the pooled support, on every regime support and
    /// on the pooled support with `R` held at each regime value, `f_Y` is a
    /// function of its parents in the corresponding observable graph and its
    /// noise. Fails when couplings between parents hide a dependence from the
    /// pairwise non-constancy test.
    pub fn regularity(&self) -> CheckReport {
        let mut witnesses = Vec::new();
        let mut checked = 0;
        let r = self.context();
        let mut cases: Vec<(String, BTreeSet<Vec<u16>>, Option<(usize, u16)>, DirectedGraph)> =
            vec![("pooled".into(), self.support.clone(), None, self.union.clone())];
        for &v in &self.regimes {
            let label = self.regime_label(v);
            let rows = self.regime_support(v);
            let g = dependence_edges(&self.model, &rows, Some((r, v)), |y| self.model.positive_noise(y));
            cases.push((format!("{}={label}", self.context_name()), rows, Some((r, v)), g));
            let g = dependence_edges(&self.model, &self.support, Some((r, v)), |y| {
                self.model.positive_noise(y)
            });
            cases.push((
                format!("pooled with {} held at {label}", self.context_name()),
                self.support.clone(),
                Some((r, v)),
                g,
            ));
        }
        for (what, rows, fixed, g) in &cases {
            for y in 0..self.model.len() {
                if matches!(fixed, Some((c, _)) if *c == y) {
                    continue;
                }
                checked += 1;
                let keys: Vec<usize> = g
                    .parents(self.model.name(y))
                    .iter()
                    .map(|n| self.model.index_of(n).expect("model node"))
                    .collect();
                if !determined_by(&self.model, y, rows, *fixed, &keys) {
                    witnesses.push(format!(
                        "{what}: f_{} is not a function of its observable parents {{{}}}",
                        self.model.name(y),
                        keys.iter().map(|&k| self.model.name(k)).collect::<Vec<_>>().join(",")
                    ));
                }
            }
        }
        CheckReport {
            holds: witnesses.is_empty(),
            complete: true,
            checked,
            witnesses,
        }
    }

    /// Exhaustive R-adjacency-faithfulness: no pair adjacent in a
    /// descriptive graph is separated by any pooled set, nor (for pairs
    /// without `R`) by any set under `R = r`.
    pub fn r_faithfulness(&self) -> CheckReport {
        let n = self.model.len();
        let r = self.context();
        let mut pooled_cache: HashMap<(usize, usize, u64), bool> = HashMap::new();
        let mut witnesses = Vec::new();
        let mut checked = 0;
        for &rv in &self.regimes {
            let d = self.descriptive(rv).skeleton();
            for (a, b) in d.adjacencies() {
                let x = self.model.index_of(a).expect("node");
                let y = self.model.index_of(b).expect("node");
                let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for mask in 0..(1u64 << others.len()) {
                    let z: Vec<usize> = subset(&others, mask);
                    checked += 1;
                    let sep = *pooled_cache.entry((x, y, mask)).or_insert_with(|| {
                        ci_exact_idx(&self.joint, x, y, &z, &[]).expect("pooled query")
                    });
                    if sep {
                        witnesses.push(format!(
                            "{a} and {b} are adjacent in the {}={} descriptive graph but independent given {{{}}}",
                            self.context_name(),
                            self.regime_label(rv),
                            self.names(&z)
                        ));
                    }
                    if x != r && y != r && !z.contains(&r) {
                        checked += 1;
                        let csi = ci_exact_idx(&self.joint, x, y, &z, &[(r, rv)]).expect("regime query");
                        if csi {
                            witnesses.push(format!(
                                "{a} and {b} are adjacent in the {}={} descriptive graph but independent given {{{}}} there",
                                self.context_name(),
                                self.regime_label(rv),
                                self.names(&z)
                            ));
                        }
                    }
                }
            }
        }
        witnesses.sort();
        witnesses.dedup();
        CheckReport {
            holds: witnesses.is_empty(),
            complete: true,
            checked,
            witnesses,
        }
    }

    fn names(&self, set: &[usize]) -> String {
        set.iter().map(|&v| self.model.name(v)).collect::<Vec<_>>().join(",")
    }

    /// R-faithfulness plus a bounded search for re-parameterizations: for
    /// each union edge `X -> Y` and each `W` outside `Pa(Y) + Y` (or no
    /// replacement), is `f_Y` on the pooled support a function of
    /// `Pa(Y) - X + W` and its noise? Any hit is a witness.
    pub fn strong_r_faithfulness(&self, cap: usize) -> CheckReport {
        let base = self.r_faithfulness();
        let mut witnesses = base.witnesses.clone();
        let mut checked = base.checked;
        let mut complete = base.complete;
        'search: for y in 0..self.model.len() {
            let yn = self.model.name(y);
            let pa: Vec<usize> = self
                .union
                .parents(yn)
                .iter()
                .map(|n| self.model.index_of(n).expect("node"))
                .collect();
            for &x in &pa {
                let rest: Vec<usize> = pa.iter().copied().filter(|&p| p != x).collect();
                let candidates = std::iter::once(None).chain(
                    (0..self.model.len())
                        .filter(|w| *w != y && !pa.contains(w))
                        .map(Some),
                );
                for w in candidates {
                    if checked >= cap {
                        complete = false;
                        break 'search;
                    }
                    checked += 1;
                    let mut keys = rest.clone();
                    keys.extend(w);
                    if determined_by(&self.model, y, &self.support, None, &keys) {
                        let how = match w {
                            Some(w) => format!("by replacing {} with {}", self.model.name(x), self.model.name(w)),
                            None => format!("without {}", self.model.name(x)),
                        };
                        witnesses.push(format!(
                            "express f_{yn} through {{{}}} {how}",
                            self.names(&keys)
                        ));
                    }
                }
            }
        }
        CheckReport {
            holds: witnesses.is_empty(),
            complete,
            checked,
            witnesses,
        }
    }
}

pub(crate) fn subset(items: &[usize], mask: u64) -> Vec<usize> {
    items
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &v)| v)
        .collect()
}

pub const DEFAULT_STRONG_FAITHFULNESS_CAP: usize = 100_000;

pub fn union_graph(scm: &Scm) -> Result<DirectedGraph> {
    Ok(GroundTruth::new(scm)?.union().clone())
}

pub fn descriptive_graph(scm: &Scm, r: &str) -> Result<DirectedGraph> {
    let gt = GroundTruth::new(scm)?;
    Ok(gt.descriptive(gt.regime(r)?))
}

pub fn physical_graph(scm: &Scm, r: &str) -> Result<DirectedGraph> {
    let gt = GroundTruth::new(scm)?;
    Ok(gt.physical(gt.regime(r)?))
}

pub fn counterfactual_graph(scm: &Scm, r: &str) -> Result<DirectedGraph> {
    let gt = GroundTruth::new(scm)?;
    Ok(gt.counterfactual(gt.regime(r)?)?.0)
}

pub fn ident_graph(scm: &Scm, r: &str) -> Result<DirectedGraph> {
    let gt = GroundTruth::new(scm)?;
    Ok(gt.ident(gt.regime(r)?))
}

pub fn is_weakly_regime_acyclic(scm: &Scm) -> Result<bool> {
    Ok(GroundTruth::new(scm)?.is_weakly_regime_acyclic())
}

pub fn is_strongly_regime_acyclic(scm: &Scm) -> Result<bool> {
    Ok(GroundTruth::new(scm)?.is_strongly_regime_acyclic())
}

pub fn check_r_faithfulness(scm: &Scm) -> Result<CheckReport> {
    Ok(GroundTruth::new(scm)?.r_faithfulness())
}

pub fn check_strong_r_faithfulness(scm: &Scm) -> Result<CheckReport> {
    Ok(GroundTruth::new(scm)?.strong_r_faithfulness(DEFAULT_STRONG_FAITHFULNESS_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::get_example;
    use crate::exact::joint_pmf;

    fn edges(g: &DirectedGraph) -> Vec<String> {
        g.edges().iter().map(|(a, b)| format!("{a}->{b}")).collect()
    }

    fn gt(name: &str) -> GroundTruth {
        GroundTruth::new(&get_example(name).unwrap()).unwrap()
    }

    #[test]
    fn intro_objects() {
        let g = gt("intro");
        assert_eq!(edges(&g.mechanism()), ["R->T", "T->Y"]);
        assert_eq!(edges(g.union()), ["R->T", "T->Y"]);
        let r0 = g.regime("0").unwrap();
        let r1 = g.regime("1").unwrap();
        assert_eq!(edges(&g.descriptive(r0)), ["R->T"]);
        assert_eq!(edges(&g.descriptive(r1)), ["R->T", "T->Y"]);
        assert_eq!(edges(&g.physical(r0)), ["R->T", "T->Y"]);
        assert!(g.counterfactual(r1).unwrap().0.contains_edge("T", "Y"));
        assert!(!g.counterfactual(r0).unwrap().0.contains_edge("T", "Y"));
        assert_eq!(g.ident(r0), g.descriptive(r0));
    }

    #[test]
    fn observable_graph_on_conditional_support() {
        let s = get_example("intro").unwrap();
        let (p, _) = joint_pmf(&s).unwrap();
        assert_eq!(edges(&observable_graph(&s, &p).unwrap()), ["R->T", "T->Y"]);
        let c = p.conditional(&[("R", "0")]).unwrap();
        assert!(edges(&observable_graph(&s, &c).unwrap()).is_empty());
        let point = p.conditional(&[("R", "1"), ("T", "+1"), ("Y", "1")]).unwrap();
        assert!(edges(&observable_graph(&s, &point).unwrap()).is_empty());
    }

    #[test]
    fn mediator_descriptive() {
        let g = gt("intro-mediator");
        assert_eq!(edges(&g.descriptive(g.regime("0").unwrap())), ["R->M"]);
    }

    #[test]
    fn exo_gate_physical() {
        let g = gt("exo-gate");
        assert_eq!(edges(&g.mechanism()), ["R->Y", "X->Y"]);
        assert_eq!(edges(&g.physical(g.regime("0").unwrap())), ["R->Y"]);
        assert_eq!(edges(&g.physical(g.regime("1").unwrap())), ["R->Y", "X->Y"]);
    }

    #[test]
    fn cf_example_has_extra_edge() {
        let g = gt("cf-example");
        assert!(!g.union().contains_edge("X", "Y"));
        let (cf, notes) = g.counterfactual(g.regime("1").unwrap()).unwrap();
        assert!(cf.contains_edge("X", "Y"));
        assert!(notes.contains(&("X".to_string(), "R".to_string())));
    }

    #[test]
    fn non_markov_ident_readds_x_y() {
        let g = gt("non-markov(1/3)");
        assert_eq!(edges(g.union()), ["X->R", "X->Y", "Y->R"]);
        let b0 = g.regime("b0").unwrap();
        assert!(!g.descriptive(b0).contains_edge("X", "Y"));
        assert!(g.ident(b0).contains_edge("X", "Y"));
    }

    #[test]
    fn p1_limit_has_one_regime() {
        let g = gt("p1-limit");
        assert_eq!(g.regime_labels(), ["0"]);
        assert!(matches!(g.regime("1"), Err(Error::ZeroProbability(_))));
        let r0 = g.regime("0").unwrap();
        assert_eq!(g.descriptive(r0), *g.union());
        assert_eq!(g.physical(r0), *g.union());
    }

    #[test]
    fn corpus_acyclicity_and_faithfulness() {
        for (name, _) in crate::corpus::list_examples() {
            let g = gt(name);
            assert!(g.is_weakly_regime_acyclic() && g.is_strongly_regime_acyclic(), "{name}");
            assert!(g.regularity().holds, "{name}: {:?}", g.regularity().witnesses);
        }
        assert!(gt("intro").r_faithfulness().holds);
        let nsf = gt("not-strong-faithful");
        assert!(nsf.r_faithfulness().holds);
        let strong = nsf.strong_r_faithfulness(DEFAULT_STRONG_FAITHFULNESS_CAP);
        assert!(!strong.holds);
        assert!(strong.witnesses.iter().any(|w| w.contains("express f_Y through {R}")), "{:?}", strong.witnesses);
    }
}

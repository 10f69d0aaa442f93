//! CSI-aware skeleton discovery: pooled and masked PC-style searches,
//! intersection graphs, detect graphs, union reconstruction and the exact
//! Markov-property check.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Dataset, JointPmf};
use crate::graph::{DirectedGraph, NodeSet, UndirectedSkeleton};
use crate::independence::{ci_exact_idx, g_test_idx, GTestOptions};
use crate::objects::GroundTruth;
use crate::scm::Scm;

/// Answers pooled (`regime = None`) and context-specific independence queries.
pub trait Tester: Sync {
    fn variables(&self) -> &[String];
    fn context(&self) -> &str;
    fn regimes(&self) -> &[String];
    fn independent(&self, x: &str, y: &str, z: &[String], regime: Option<&str>) -> Result<bool>;
}

/// Exact oracle on an observable joint.
pub struct ExactTester {
    joint: JointPmf,
    context: String,
    regimes: Vec<String>,
}

impl ExactTester {
    pub fn new(joint: JointPmf, context: &str) -> Result<ExactTester> {
        let c = joint.column(context)?;
        let regimes = joint
            .support_idx(&[c])
            .into_iter()
            .map(|k| joint.domains()[c][k[0] as usize].clone())
            .collect();
        Ok(ExactTester {
            joint,
            context: context.to_string(),
            regimes,
        })
    }

    pub fn from_ground_truth(gt: &GroundTruth) -> ExactTester {
        ExactTester::new(gt.joint().clone(), gt.context_name()).expect("context is a column")
    }

    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }
}

impl Tester for ExactTester {
    fn variables(&self) -> &[String] {
        self.joint.scope()
    }

    fn context(&self) -> &str {
        &self.context
    }

    fn regimes(&self) -> &[String] {
        &self.regimes
    }

    fn independent(&self, x: &str, y: &str, z: &[String], regime: Option<&str>) -> Result<bool> {
        let p = &self.joint;
        let zc = z.iter().map(|v| p.column(v)).collect::<Result<Vec<_>>>()?;
        let cond = match regime {
            Some(r) => {
                let c = p.column(&self.context)?;
                vec![(c, p.label_index(c, r)?)]
            }
            None => Vec::new(),
        };
        ci_exact_idx(p, p.column(x)?, p.column(y)?, &zc, &cond)
    }
}

/// Stratified G-test on a categorical dataset.
pub struct GTestTester {
    data: Dataset,
    context: String,
    regimes: Vec<String>,
    alpha: f64,
    opts: GTestOptions,
}

impl GTestTester {
    pub fn new(data: Dataset, context: &str, alpha: f64) -> Result<GTestTester> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidQuery(format!("alpha {alpha} is not in (0,1)")));
        }
        let c = data.column(context)?;
        let seen: BTreeSet<u16> = data.values(c).iter().copied().collect();
        let regimes = seen
            .into_iter()
            .map(|v| data.domains()[c][v as usize].clone())
            .collect();
        Ok(GTestTester {
            data,
            context: context.to_string(),
            regimes,
            alpha,
            opts: GTestOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: GTestOptions) -> Self {
        self.opts = opts;
        self
    }
}

impl Tester for GTestTester {
    fn variables(&self) -> &[String] {
        self.data.columns()
    }

    fn context(&self) -> &str {
        &self.context
    }

    fn regimes(&self) -> &[String] {
        &self.regimes
    }

    fn independent(&self, x: &str, y: &str, z: &[String], regime: Option<&str>) -> Result<bool> {
        let d = &self.data;
        let zc = z.iter().map(|v| d.column(v)).collect::<Result<Vec<_>>>()?;
        let mask = match regime {
            Some(r) => {
                let c = d.column(&self.context)?;
                let m = d.mask(c, d.label_index(c, r)?);
                if m.is_empty() {
                    return Err(Error::Data(format!("no rows with {}={r}", self.context)));
                }
                Some(m)
            }
            None => None,
        };
        Ok(g_test_idx(d, d.column(x)?, d.column(y)?, &zc, mask.as_deref(), self.alpha, self.opts).independent)
    }
}

/// First separating set found for a removed adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separation {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
    pub regime: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonResult {
    pub skeleton: UndirectedSkeleton,
    pub certificates: Vec<Separation>,
}

/// Subsets of `pool` of size `k` in lexicographic order.
fn combinations(pool: &[String], k: usize) -> Vec<Vec<String>> {
    fn rec(pool: &[String], k: usize, start: usize, cur: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i].clone());
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, k, 0, &mut Vec::new(), &mut out);
    out
}

fn pc_search(tester: &dyn Tester, nodes: &[String], regime: Option<&str>) -> Result<SkeletonResult> {
    let mut skel = UndirectedSkeleton::complete(nodes.iter().cloned());
    let mut certificates = Vec::new();
    let mut k = 0;
    loop {
        let snapshot = skel.clone();
        let max_adj = nodes.iter().map(|v| snapshot.neighbors(v).len()).max().unwrap_or(0);
        if max_adj == 0 || k > max_adj - 1 {
            break;
        }
        for (x, y) in snapshot.adjacencies() {
            let mut pools: Vec<Vec<String>> = Vec::new();
            for (a, b) in [(x, y), (y, x)] {
                let pool: Vec<String> = snapshot.neighbors(a).into_iter().filter(|v| v != b).collect();
                if !pools.contains(&pool) {
                    pools.push(pool);
                }
            }
            let mut candidates: BTreeSet<Vec<String>> = BTreeSet::new();
            for pool in &pools {
                if pool.len() >= k {
                    candidates.extend(combinations(pool, k));
                }
            }
            for z in candidates {
                if tester.independent(x, y, &z, regime)? {
                    skel.remove(x, y);
                    certificates.push(Separation {
                        x: x.clone(),
                        y: y.clone(),
                        z,
                        regime: regime.map(str::to_string),
                    });
                    break;
                }
            }
        }
        k += 1;
    }
    Ok(SkeletonResult {
        skeleton: skel,
        certificates,
    })
}

/// PC-style skeleton from pooled queries. Removals within one round use the
/// adjacencies at the start of the round.
pub fn skeleton_pooled(tester: &dyn Tester) -> Result<SkeletonResult> {
    let nodes = tester.variables().to_vec();
    pc_search(tester, &nodes, None)
}

/// PC-style skeleton over `V \ {R}` from queries restricted to `R = r`.
pub fn skeleton_masked(tester: &dyn Tester, r: &str) -> Result<SkeletonResult> {
    check_regime(tester, r)?;
    let nodes: Vec<String> = tester
        .variables()
        .iter()
        .filter(|v| *v != tester.context())
        .cloned()
        .collect();
    pc_search(tester, &nodes, Some(r))
}

fn check_regime(tester: &dyn Tester, r: &str) -> Result<()> {
    if tester.regimes().iter().any(|x| x == r) {
        Ok(())
    } else {
        Err(Error::ZeroProbability(format!("{}={r}", tester.context())))
    }
}

/// Non-`R` adjacencies present in both graphs; `R`-adjacencies from `pooled`.
pub fn intersection_graph(
    pooled: &UndirectedSkeleton,
    masked: &UndirectedSkeleton,
    context: &str,
) -> Result<UndirectedSkeleton> {
    let expected: NodeSet = pooled.nodes().iter().filter(|v| *v != context).cloned().collect();
    if masked.nodes() != &expected {
        return Err(Error::NodeMismatch);
    }
    let mut out = UndirectedSkeleton::new(pooled.nodes().iter().cloned());
    for (a, b) in pooled.adjacencies() {
        if a == context || b == context || masked.adjacent(a, b) {
            out.add(a, b)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectOptions {
    /// Largest conditioning set considered; `None` is exhaustive.
    pub max_set_size: Option<usize>,
    /// Refuse pairs with more candidate variables than this.
    pub max_candidates: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            max_set_size: None,
            max_candidates: 16,
        }
    }
}

/// Detect graph at `R = r`: `X - Y` (both not `R`) iff no pooled `Z` and no
/// `Z` under `R = r` separates them; `R - Y` iff no pooled `Z` separates.
pub fn detect_graph(tester: &dyn Tester, r: &str, opts: DetectOptions) -> Result<SkeletonResult> {
    check_regime(tester, r)?;
    let vars = tester.variables().to_vec();
    let ctx = tester.context().to_string();
    let mut skel = UndirectedSkeleton::new(vars.iter().cloned());
    let mut certificates = Vec::new();
    for (i, x) in vars.iter().enumerate() {
        for y in &vars[i + 1..] {
            let (x, y) = if x < y { (x, y) } else { (y, x) };
            let others: Vec<String> = vars.iter().filter(|v| *v != x && *v != y).cloned().collect();
            if others.len() > opts.max_candidates {
                return Err(Error::CapExceeded(format!(
                    "{} candidate conditioning variables for {x}-{y}",
                    others.len()
                )));
            }
            let involves_r = *x == ctx || *y == ctx;
            let max = opts.max_set_size.unwrap_or(others.len()).min(others.len());
            let mut sep: Option<Separation> = None;
            'sizes: for k in 0..=max {
                for z in combinations(&others, k) {
                    if tester.independent(x, y, &z, None)? {
                        sep = Some(Separation { x: x.clone(), y: y.clone(), z, regime: None });
                        break 'sizes;
                    }
                    if !involves_r && !z.contains(&ctx) && tester.independent(x, y, &z, Some(r))? {
                        sep = Some(Separation {
                            x: x.clone(),
                            y: y.clone(),
                            z,
                            regime: Some(r.to_string()),
                        });
                        break 'sizes;
                    }
                }
            }
            match sep {
                Some(s) => certificates.push(s),
                None => skel.add(x, y)?,
            }
        }
    }
    Ok(SkeletonResult {
        skeleton: skel,
        certificates,
    })
}

/// Non-`R` adjacencies: union of the detect graphs; `R`-adjacencies from the
/// pooled skeleton.
pub fn union_from_contexts(
    detects: &BTreeMap<String, UndirectedSkeleton>,
    pooled: &UndirectedSkeleton,
    context: &str,
) -> Result<UndirectedSkeleton> {
    let mut out = UndirectedSkeleton::new(pooled.nodes().iter().cloned());
    for d in detects.values() {
        if d.nodes() != pooled.nodes() {
            return Err(Error::NodeMismatch);
        }
        for (a, b) in d.adjacencies() {
            if a != context && b != context {
                out.add(a, b)?;
            }
        }
    }
    for (a, b) in pooled.edges_of(context) {
        out.add(&a, &b)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeDiscovery {
    pub masked: SkeletonResult,
    pub intersection: UndirectedSkeleton,
    pub detect: SkeletonResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub context: String,
    pub mode: String,
    pub pooled: SkeletonResult,
    pub per_regime: BTreeMap<String, RegimeDiscovery>,
    pub union_reconstruction: UndirectedSkeleton,
    /// Present when discovery ran against an exact model; lets oriented
    /// classification use true parent sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_union: Option<DirectedGraph>,
}

/// Full pipeline over the given regimes (all observed regimes when empty).
pub fn discover(tester: &dyn Tester, regimes: &[String], opts: DetectOptions, mode: &str) -> Result<DiscoveryReport> {
    let pooled = skeleton_pooled(tester)?;
    let regimes: Vec<String> = if regimes.is_empty() {
        tester.regimes().to_vec()
    } else {
        regimes.to_vec()
    };
    let mut per_regime = BTreeMap::new();
    for r in &regimes {
        let masked = skeleton_masked(tester, r)?;
        let intersection = intersection_graph(&pooled.skeleton, &masked.skeleton, tester.context())?;
        let detect = detect_graph(tester, r, opts)?;
        per_regime.insert(
            r.clone(),
            RegimeDiscovery {
                masked,
                intersection,
                detect,
            },
        );
    }
    let detects: BTreeMap<String, UndirectedSkeleton> = per_regime
        .iter()
        .map(|(r, d)| (r.clone(), d.detect.skeleton.clone()))
        .collect();
    let union_reconstruction = union_from_contexts(&detects, &pooled.skeleton, tester.context())?;
    Ok(DiscoveryReport {
        context: tester.context().to_string(),
        mode: mode.to_string(),
        pooled,
        per_regime,
        union_reconstruction,
        ground_truth_union: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovFinding {
    pub x: String,
    pub y: String,
    pub regime: Option<String>,
    pub tried: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub applicable: bool,
    pub note: String,
    pub pairs_checked: usize,
    pub failures: Vec<MarkovFinding>,
}

impl MarkovReport {
    pub fn passed(&self) -> bool {
        !self.applicable || self.failures.is_empty()
    }
}

pub fn markov_check(scm: &Scm) -> Result<MarkovReport> {
    Ok(markov_check_gt(&GroundTruth::new(scm)?))
}

/// For every regime and every pair `X, Y != R` non-adjacent in the ident
/// graph, one of the designated parent sets must separate: pooled union
/// parents when both are union-ancestors of `R`, otherwise descriptive
/// parents without `R` under `R = r`. Pairs `R, Y` non-adjacent in the
/// acyclified union graph must be separated by the acyclified parents of
/// `R` or of `Y`.
pub fn markov_check_gt(gt: &GroundTruth) -> MarkovReport {
    if !gt.is_strongly_regime_acyclic() {
        return MarkovReport {
            applicable: false,
            note: "model is not strongly regime-acyclic".into(),
            pairs_checked: 0,
            failures: Vec::new(),
        };
    }
    let model = gt.model();
    let p = gt.joint();
    let ctx = model.context();
    let rname = model.context_name().to_string();
    let anc = gt.union_ancestors_of_r();
    let idx = |n: &str| model.index_of(n).expect("model node");
    let idxs = |s: &NodeSet| s.iter().map(|n| idx(n)).collect::<Vec<usize>>();
    let mut failures = Vec::new();
    let mut pairs_checked = 0;
    let separates = |x: usize, y: usize, sets: &[Vec<usize>], cond: &[(usize, u16)]| {
        sets.iter()
            .any(|z| ci_exact_idx(p, x, y, z, cond).expect("positive regime"))
    };
    let names = |sets: &[Vec<usize>]| -> Vec<Vec<String>> {
        sets.iter()
            .map(|z| z.iter().map(|&v| model.name(v).to_string()).collect())
            .collect()
    };
    for &r in gt.regimes() {
        let ident = gt.ident(r);
        let descr = gt.descriptive(r);
        for x in 0..model.len() {
            for y in x + 1..model.len() {
                if x == ctx || y == ctx {
                    continue;
                }
                let (xn, yn) = (model.name(x), model.name(y));
                if ident.adjacent(xn, yn) {
                    continue;
                }
                pairs_checked += 1;
                let (sets, cond) = if anc.contains(xn) && anc.contains(yn) {
                    (vec![idxs(&gt.union().parents(xn)), idxs(&gt.union().parents(yn))], vec![])
                } else {
                    let without_r = |v: &str| {
                        let mut s = descr.parents(v);
                        s.remove(&rname);
                        idxs(&s)
                    };
                    (vec![without_r(xn), without_r(yn)], vec![(ctx, r)])
                };
                if !separates(x, y, &sets, &cond) {
                    failures.push(MarkovFinding {
                        x: xn.to_string(),
                        y: yn.to_string(),
                        regime: Some(gt.regime_label(r).to_string()),
                        tried: names(&sets),
                    });
                }
            }
        }
    }
    let acyc = gt.union().acyclify();
    for y in 0..model.len() {
        let yn = model.name(y);
        if y == ctx || acyc.adjacent(&rname, yn) {
            continue;
        }
        pairs_checked += 1;
        let sets = vec![idxs(&acyc.parents(&rname)), idxs(&acyc.parents(yn))];
        let (a, b) = if ctx < y { (ctx, y) } else { (y, ctx) };
        if !separates(a, b, &sets, &[]) {
            failures.push(MarkovFinding {
                x: rname.clone(),
                y: yn.to_string(),
                regime: None,
                tried: names(&sets),
            });
        }
    }
    MarkovReport {
        applicable: true,
        note: String::new(),
        pairs_checked,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::get_example;

    fn exact(name: &str) -> ExactTester {
        ExactTester::from_ground_truth(&GroundTruth::new(&get_example(name).unwrap()).unwrap())
    }

    fn adj(s: &UndirectedSkeleton) -> Vec<String> {
        s.adjacencies().iter().map(|(a, b)| format!("{a}-{b}")).collect()
    }

    #[test]
    fn pooled_skeletons() {
        assert_eq!(adj(&skeleton_pooled(&exact("intro")).unwrap().skeleton), ["R-T", "T-Y"]);
        assert_eq!(
            adj(&skeleton_pooled(&exact("non-markov(1/3)")).unwrap().skeleton),
            ["R-X", "R-Y", "X-Y"]
        );
    }

    #[test]
    fn masked_and_intersection() {
        let t = exact("intro");
        let pooled = skeleton_pooled(&t).unwrap().skeleton;
        let m0 = skeleton_masked(&t, "0").unwrap().skeleton;
        assert!(m0.is_empty());
        let m1 = skeleton_masked(&t, "1").unwrap().skeleton;
        assert_eq!(adj(&m1), ["T-Y"]);
        assert_eq!(adj(&intersection_graph(&pooled, &m0, "R").unwrap()), ["R-T"]);
        assert_eq!(adj(&intersection_graph(&pooled, &m1, "R").unwrap()), ["R-T", "T-Y"]);
        let tm = exact("intro-mediator");
        let mm = skeleton_masked(&tm, "0").unwrap().skeleton;
        assert!(!mm.adjacent("M", "T") && !mm.adjacent("T", "Y"));
    }

    #[test]
    fn detect_graphs() {
        let d = |name: &str, r: &str| adj(&detect_graph(&exact(name), r, DetectOptions::default()).unwrap().skeleton);
        assert_eq!(d("intro", "0"), ["R-T"]);
        assert_eq!(d("exo-gate", "0"), ["R-Y"]);
        assert!(d("non-markov(1/3)", "b0").contains(&"X-Y".to_string()));
    }

    #[test]
    fn union_reconstruction() {
        let t = exact("intro");
        let report = discover(&t, &[], DetectOptions::default(), "exact").unwrap();
        assert_eq!(adj(&report.union_reconstruction), ["R-T", "T-Y"]);
        let t = exact("not-strong-faithful");
        let report = discover(&t, &[], DetectOptions::default(), "exact").unwrap();
        assert!(!report.union_reconstruction.adjacent("X", "Y"));
    }

    #[test]
    fn markov_on_examples() {
        for name in ["intro", "non-markov(1/3)", "exo-gate", "intro-mediator"] {
            let rep = markov_check(&get_example(name).unwrap()).unwrap();
            assert!(rep.applicable && rep.passed(), "{name}: {:?}", rep.failures);
        }
    }

    #[test]
    fn unknown_regime_is_an_error() {
        assert!(matches!(skeleton_masked(&exact("p1-limit"), "1"), Err(Error::ZeroProbability(_))));
    }
}

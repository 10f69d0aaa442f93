//! Exact law checks over ground-truth objects, a random SCM generator and a
//! suite runner over the corpus and random models.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{classify_changes, Classification, Mode, UnionInput, RULE_R2};
use crate::corpus::{get_example, list_examples, ScmBuilder};
use crate::discovery::{detect_graph, markov_check_gt, DetectOptions, ExactTester};
use crate::error::{Error, Result};
use crate::exact::noise_column;
use crate::graph::{union_graphs, DirectedGraph, NodeSet, UndirectedSkeleton};
use crate::independence::ci_exact_sets;
use crate::objects::{subset, GroundTruth, DEFAULT_STRONG_FAITHFULNESS_CAP};
use crate::scm::Scm;

pub const LAWS: [&str; 9] = [
    "edge_inclusions",
    "union_property",
    "regime_children",
    "ident_sandwich",
    "markov",
    "solution_locality",
    "noise_factorization",
    "local_markov",
    "jci_soundness",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawOutcome {
    pub law: String,
    pub status: Status,
    /// Number of elementary comparisons made.
    pub checked: usize,
    pub witness: Option<String>,
    /// Skipped clauses and predicted deviations.
    pub notes: Vec<String>,
}

impl LawOutcome {
    fn new(law: &str) -> Self {
        LawOutcome {
            law: law.to_string(),
            status: Status::Pass,
            checked: 0,
            witness: None,
            notes: Vec::new(),
        }
    }

    fn inapplicable(law: &str, why: impl Into<String>) -> Self {
        LawOutcome {
            status: Status::Inapplicable,
            notes: vec![why.into()],
            ..LawOutcome::new(law)
        }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.status != Status::Fail {
            self.status = Status::Fail;
            self.witness = Some(witness());
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Ground truth plus the model properties that gate individual laws.
pub struct LawContext<'a> {
    pub gt: &'a GroundTruth,
    pub regular: bool,
    pub weakly_acyclic: bool,
    pub strongly_acyclic: bool,
    pub r_faithful: bool,
    pub strongly_r_faithful: bool,
}

impl<'a> LawContext<'a> {
    pub fn new(gt: &'a GroundTruth) -> Self {
        let r_faithful = gt.r_faithfulness().holds;
        let strong = gt.strong_r_faithfulness(DEFAULT_STRONG_FAITHFULNESS_CAP);
        LawContext {
            gt,
            regular: gt.regularity().holds,
            weakly_acyclic: gt.is_weakly_regime_acyclic(),
            strongly_acyclic: gt.is_strongly_regime_acyclic(),
            r_faithful,
            strongly_r_faithful: strong.holds && strong.complete,
        }
    }

    fn solution_laws_apply(&self) -> std::result::Result<(), String> {
        if !self.weakly_acyclic {
            return Err("model is not weakly regime-acyclic".into());
        }
        if !self.regular {
            return Err("some mechanism is not a function of its observable parents".into());
        }
        Ok(())
    }

    /// Nodes whose mechanism takes `R` as an argument although `R` is not
    /// a union parent: the support never varies `R` alone, so forcing `R`
    /// can still change `f_Y` on the pooled support.
    pub fn hidden_children(&self) -> NodeSet {
        let model = self.gt.model();
        let ctx = self.gt.context();
        (0..model.len())
            .filter(|&y| y != ctx && model.parents(y).contains(&ctx))
            .map(|y| model.name(y).to_string())
            .filter(|y| !self.gt.union().parents(y).contains(self.gt.context_name()))
            .collect()
    }

    fn idx(&self, set: &NodeSet) -> Vec<usize> {
        set.iter()
            .map(|n| self.gt.model().index_of(n).expect("model node"))
            .collect()
    }

    fn label(&self, r: u16) -> String {
        format!("{}={}", self.gt.context_name(), self.gt.regime_label(r))
    }
}

fn missing(sub: &DirectedGraph, sup: &DirectedGraph) -> Option<(String, String)> {
    sub.edges().iter().find(|(a, b)| !sup.contains_edge(a, b)).cloned()
}

fn inclusion(out: &mut LawOutcome, sub: &DirectedGraph, sup: &DirectedGraph, what: &str) {
    let m = missing(sub, sup);
    out.check(m.is_none(), || {
        let (a, b) = m.clone().expect("missing edge");
        format!("{a}->{b} {what}")
    });
}

pub fn check_edge_inclusions(cx: &LawContext) -> LawOutcome {
    let gt = cx.gt;
    let mut out = LawOutcome::new("edge_inclusions");
    for &r in gt.regimes() {
        let (d, p) = (gt.descriptive(r), gt.physical(r));
        let at = cx.label(r);
        inclusion(&mut out, &d, &p, &format!("is descriptive but not physical at {at}"));
        inclusion(&mut out, &p, gt.union(), &format!("is physical at {at} but not in the union graph"));
    }
    out
}

pub fn check_union_property(cx: &LawContext) -> LawOutcome {
    let gt = cx.gt;
    let mut out = LawOutcome::new("union_property");
    let physicals: Vec<DirectedGraph> = gt.regimes().iter().map(|&r| gt.physical(r)).collect();
    let descriptives: Vec<DirectedGraph> = gt.regimes().iter().map(|&r| gt.descriptive(r)).collect();
    let phys = union_graphs(&physicals.iter().collect::<Vec<_>>()).expect("same nodes");
    let descr = union_graphs(&descriptives.iter().collect::<Vec<_>>()).expect("same nodes");
    inclusion(&mut out, gt.union(), &phys, "is in the union graph but in no physical graph");
    inclusion(&mut out, &phys, gt.union(), "is physical but not in the union graph");
    inclusion(&mut out, &descr, gt.union(), "is descriptive but not in the union graph");
    if let Some((a, b)) = missing(gt.union(), &descr) {
        if cx.strongly_r_faithful {
            out.check(false, || {
                format!("{a}->{b} is in the union graph but in no descriptive graph of a strongly R-faithful model")
            });
        } else {
            out.checked += 1;
            out.notes.push(format!(
                "descriptive-union clause fails at {a}->{b}; not predicted to hold since the model is not strongly R-faithful"
            ));
        }
    } else {
        out.checked += 1;
    }
    out
}

pub fn check_regime_children(cx: &LawContext) -> LawOutcome {
    let gt = cx.gt;
    let mut out = LawOutcome::new("regime_children");
    let ctx = gt.context_name();
    let hidden = cx.hidden_children();
    for y in gt.model().names() {
        if y == ctx || gt.union().parents(y).contains(ctx) {
            continue;
        }
        for &r in gt.regimes() {
            let (u, p) = (gt.union().parents(y), gt.physical(r).parents(y));
            if hidden.contains(y) {
                if u != p {
                    out.notes.push(format!(
                        "{y} reads {ctx} outside the support: physical parents at {} are {{{}}}, union parents {{{}}}",
                        cx.label(r),
                        p.iter().cloned().collect::<Vec<_>>().join(","),
                        u.iter().cloned().collect::<Vec<_>>().join(",")
                    ));
                }
                continue;
            }
            out.check(u == p, || {
                format!(
                    "{y} is not a child of {ctx} but its physical parents at {} differ from its union parents",
                    cx.label(r)
                )
            });
        }
    }
    out
}

pub fn check_ident_sandwich(cx: &LawContext) -> LawOutcome {
    let gt = cx.gt;
    let mut out = LawOutcome::new("ident_sandwich");
    let hidden = cx.hidden_children();
    for &r in gt.regimes() {
        let at = cx.label(r);
        let id = gt.ident(r);
        inclusion(&mut out, &gt.descriptive(r), &id, &format!("is descriptive but not in ident at {at}"));
        inclusion(&mut out, &id, gt.union(), &format!("is in ident at {at} but not in the union graph"));
        if cx.strongly_acyclic {
            let phys = gt.physical(r);
            for (a, b) in id.edges() {
                if phys.contains_edge(a, b) {
                    out.checked += 1;
                } else if hidden.contains(b) {
                    out.notes.push(format!("{a}->{b} is in ident but not physical at {at}; {b} reads {} outside the support", gt.context_name()));
                } else {
                    out.check(false, || format!("{a}->{b} is in ident but not physical at {at}"));
                }
            }
        }
    }
    if !cx.strongly_acyclic {
        out.notes
            .push("ident inside physical skipped: model is not strongly regime-acyclic".into());
    }
    out
}

pub fn check_markov(cx: &LawContext) -> LawOutcome {
    if !cx.regular {
        return LawOutcome::inapplicable("markov", "some mechanism is not a function of its observable parents");
    }
    let rep = markov_check_gt(cx.gt);
    if !rep.applicable {
        return LawOutcome::inapplicable("markov", rep.note);
    }
    let mut out = LawOutcome::new("markov");
    out.checked = rep.pairs_checked;
    if let Some(f) = rep.failures.first() {
        out.status = Status::Fail;
        let at = f
            .regime
            .as_ref()
            .map(|r| format!(" given {}={r}", cx.gt.context_name()))
            .unwrap_or_default();
        out.witness = Some(format!(
            "{} and {} are dependent{at} under every designated set {:?}",
            f.x, f.y, f.tried
        ));
    }
    out
}

/// Rows grouped by the noise labels at `keys`.
fn group_rows(noise: &[Vec<u16>], rows: &[usize], keys: &[usize]) -> BTreeMap<Vec<u16>, Vec<usize>> {
    let mut g: BTreeMap<Vec<u16>, Vec<usize>> = BTreeMap::new();
    for &i in rows {
        g.entry(keys.iter().map(|&k| noise[i][k]).collect()).or_default().push(i);
    }
    g
}

pub fn check_solution_locality(cx: &LawContext) -> LawOutcome {
    if let Err(why) = cx.solution_laws_apply() {
        return LawOutcome::inapplicable("solution_locality", why);
    }
    let gt = cx.gt;
    let model = gt.model();
    let sol = gt.solution();
    let mut out = LawOutcome::new("solution_locality");
    let all: Vec<usize> = (0..sol.len()).collect();
    let claim = |x: usize, rows: &[usize], anc: &NodeSet, at: &str, out: &mut LawOutcome| {
        for group in group_rows(&sol.noise, rows, &cx.idx(anc)).values() {
            let v = sol.values[group[0]][x];
            let bad = group.iter().find(|&&i| sol.values[i][x] != v);
            out.check(bad.is_none(), || {
                let j = *bad.expect("offending row");
                format!(
                    "F_{} differs between noise rows {:?} and {:?}{at}, which agree on the noise of its ancestors {{{}}}",
                    model.name(x),
                    sol.noise[group[0]],
                    sol.noise[j],
                    anc.iter().cloned().collect::<Vec<_>>().join(",")
                )
            });
        }
    };
    for x in 0..model.len() {
        let anc = gt.union().ancestors_of(model.name(x)).expect("node");
        claim(x, &all, &anc, "", &mut out);
        for &r in gt.regimes() {
            let rows = sol.restriction(gt.context(), r);
            let anc = gt.descriptive(r).ancestors_of(model.name(x)).expect("node");
            claim(x, &rows, &anc, &format!(" with {}", cx.label(r)), &mut out);
        }
    }
    out
}

/// Integer weights of each noise row, `prod_j w_j(eta_j)` over
/// `prod_j d_j`, computed from the noise pmfs.
fn row_weights(gt: &GroundTruth) -> Result<Vec<Vec<u128>>> {
    let model = gt.model();
    Ok(gt
        .solution()
        .noise
        .iter()
        .map(|eta| {
            eta.iter()
                .enumerate()
                .map(|(j, &l)| model.noise_weights(j)[l as usize])
                .collect()
        })
        .collect())
}

fn product(it: impl IntoIterator<Item = u128>) -> Result<u128> {
    it.into_iter().try_fold(1u128, |a, b| {
        a.checked_mul(b).ok_or_else(|| Error::Overflow("noise factorization".into()))
    })
}

/// Checks `P(eta, E) = P(eta_A, E) * prod_{j not in A} P(eta_j)` for the
/// events `E = {event(i) = Some(z)}` over every `z`, cross-multiplied over
/// the common denominator.
fn factorization_holds(
    gt: &GroundTruth,
    weights: &[Vec<u128>],
    a: &[usize],
    event: impl Fn(usize) -> Option<Vec<u16>>,
) -> Result<std::result::Result<(), String>> {
    let model = gt.model();
    let sol = gt.solution();
    let rest: Vec<usize> = (0..model.len()).filter(|j| !a.contains(j)).collect();
    let d_rest = product(rest.iter().map(|&j| model.noise_denom(j)))?;
    let mut w_a: BTreeMap<(Vec<u16>, Vec<u16>), u128> = BTreeMap::new();
    let mut by_group: BTreeMap<Vec<u16>, BTreeSet<Vec<u16>>> = BTreeMap::new();
    let events: Vec<Option<Vec<u16>>> = (0..sol.len()).map(&event).collect();
    for i in 0..sol.len() {
        let key: Vec<u16> = a.iter().map(|&k| sol.noise[i][k]).collect();
        by_group.entry(key.clone()).or_default();
        if let Some(z) = &events[i] {
            let w = product(weights[i].iter().copied())?;
            let e = w_a.entry((key.clone(), z.clone())).or_insert(0);
            *e = e.checked_add(w).ok_or_else(|| Error::Overflow("noise factorization".into()))?;
            by_group.get_mut(&key).expect("inserted").insert(z.clone());
        }
    }
    for i in 0..sol.len() {
        let key: Vec<u16> = a.iter().map(|&k| sol.noise[i][k]).collect();
        let w_rest = product(rest.iter().map(|&j| weights[i][j]))?;
        let w_full = product(weights[i].iter().copied())?;
        for z in &by_group[&key] {
            let lhs = if events[i].as_ref() == Some(z) {
                w_full.checked_mul(d_rest).ok_or_else(|| Error::Overflow("noise factorization".into()))?
            } else {
                0
            };
            let rhs = w_a[&(key.clone(), z.clone())]
                .checked_mul(w_rest)
                .ok_or_else(|| Error::Overflow("noise factorization".into()))?;
            if lhs != rhs {
                return Ok(Err(format!("eta={:?}, value {:?}", sol.noise[i], z)));
            }
        }
    }
    Ok(Ok(()))
}

pub fn check_noise_factorization(cx: &LawContext) -> LawOutcome {
    if let Err(why) = cx.solution_laws_apply() {
        return LawOutcome::inapplicable("noise_factorization", why);
    }
    let gt = cx.gt;
    let model = gt.model();
    let sol = gt.solution();
    let n = model.len();
    let ctx = gt.context();
    let mut out = LawOutcome::new("noise_factorization");
    let weights = match row_weights(gt) {
        Ok(w) => w,
        Err(e) => return LawOutcome::inapplicable("noise_factorization", e.to_string()),
    };
    let names = |z: &[usize]| z.iter().map(|&v| model.name(v)).collect::<Vec<_>>().join(",");
    let all: Vec<usize> = (0..n).collect();
    let anc_r = gt.union_ancestors_of_r();
    for mask in 1..(1u64 << n) {
        let z = subset(&all, mask);
        let zn: Vec<&str> = z.iter().map(|&v| model.name(v)).collect();
        let a = cx.idx(&gt.union().ancestors(zn.iter().copied()).expect("nodes"));
        let res = factorization_holds(gt, &weights, &a, |i| Some(z.iter().map(|&v| sol.values[i][v]).collect()));
        match res {
            Ok(r) => out.check(r.is_ok(), || {
                format!("P(eta | {}) does not split at ancestors {{{}}}: {}", names(&z), names(&a), r.unwrap_err())
            }),
            Err(e) => {
                out.notes.push(format!("Z={{{}}} skipped: {e}", names(&z)));
            }
        }
    }
    let others: Vec<usize> = (0..n).filter(|&v| v != ctx).collect();
    for &r in gt.regimes() {
        let descr = gt.descriptive(r);
        for mask in 0..(1u64 << others.len()) {
            let z = subset(&others, mask);
            let zn: Vec<&str> = z.iter().map(|&v| model.name(v)).collect();
            let mut a_r = anc_r.clone();
            a_r.extend(descr.ancestors(zn.iter().copied()).expect("nodes"));
            let a = cx.idx(&a_r);
            let res = factorization_holds(gt, &weights, &a, |i| {
                (sol.values[i][ctx] == r).then(|| z.iter().map(|&v| sol.values[i][v]).collect())
            });
            match res {
                Ok(res) => out.check(res.is_ok(), || {
                    format!(
                        "P(eta | {}, {}) does not split at {{{}}}: {}",
                        names(&z),
                        cx.label(r),
                        names(&a),
                        res.unwrap_err()
                    )
                }),
                Err(e) => out.notes.push(format!("Z={{{}}} at {} skipped: {e}", names(&z), cx.label(r))),
            }
        }
    }
    out
}

pub fn check_local_markov(cx: &LawContext) -> LawOutcome {
    if let Err(why) = cx.solution_laws_apply() {
        return LawOutcome::inapplicable("local_markov", why);
    }
    let gt = cx.gt;
    let model = gt.model();
    let p = gt.noise_joint();
    let ctx = gt.context();
    let eta = |v: usize| p.column(&noise_column(model.name(v))).expect("noise column");
    let anc_r = gt.union_ancestors_of_r();
    let mut out = LawOutcome::new("local_markov");
    for y in 0..model.len() {
        let yn = model.name(y);
        let rest: Vec<usize> = (0..model.len()).filter(|&v| v != y).map(eta).collect();
        let yc = p.column(yn).expect("observable column");
        if !gt.union().on_cycle(yn) {
            let b = cx.idx(&gt.union().parents(yn));
            let ok = ci_exact_sets(p, &[yc], &rest, &b, &[]).unwrap_or(false);
            out.check(ok, || format!("{yn} depends on the other noises given its union parents"));
        }
        if y == ctx || anc_r.contains(yn) {
            continue;
        }
        for &r in gt.regimes() {
            let descr = gt.descriptive(r);
            if descr.on_cycle(yn) {
                continue;
            }
            let mut b = descr.parents(yn);
            b.remove(gt.context_name());
            let ok = ci_exact_sets(p, &[yc], &rest, &cx.idx(&b), &[(ctx, r)]).unwrap_or(false);
            out.check(ok, || {
                format!("{yn} depends on the other noises given its descriptive parents at {}", cx.label(r))
            });
        }
    }
    out
}

/// Non-physical verdicts must keep the edge in the physical graph and
/// acyclic R2 verdicts must remove it, with detect graphs from exact tests.
pub fn check_jci_soundness(cx: &LawContext) -> LawOutcome {
    let gt = cx.gt;
    let t = ExactTester::from_ground_truth(gt);
    let mut detect: BTreeMap<String, UndirectedSkeleton> = BTreeMap::new();
    for r in gt.regime_labels() {
        match detect_graph(&t, &r, DetectOptions::default()) {
            Ok(d) => {
                detect.insert(r, d.skeleton);
            }
            Err(e) => return LawOutcome::inapplicable("jci_soundness", e.to_string()),
        }
    }
    let rep = match classify_changes(UnionInput::Oriented(gt.union()), &detect, gt.context_name(), Mode::Oriented) {
        Ok(rep) => rep,
        Err(e) => return LawOutcome::inapplicable("jci_soundness", e.to_string()),
    };
    let r2_applies = cx.r_faithful && cx.regular && cx.strongly_acyclic;
    let mut out = LawOutcome::new("jci_soundness");
    let hidden = cx.hidden_children();
    let mut skipped = 0;
    for c in rep.changes() {
        let r = gt.regime(&c.regime).expect("positive regime");
        let phys = gt.physical(r);
        let (a, b) = (&c.edge.0, &c.edge.1);
        match (c.classification, c.rule.as_deref()) {
            (Classification::NonPhysical, _) if hidden.contains(b) => {
                if !phys.contains_edge(a, b) {
                    out.notes.push(format!(
                        "{a}->{b} is non_physical at {} but absent from the physical graph; {b} reads {} outside the support",
                        cx.label(r),
                        gt.context_name()
                    ));
                }
            }
            (Classification::NonPhysical, _) => out.check(phys.contains_edge(a, b), || {
                format!("{a}->{b} is non_physical at {} but absent from the physical graph", cx.label(r))
            }),
            (Classification::Physical, Some(RULE_R2)) if r2_applies => out.check(!phys.contains_edge(a, b), || {
                format!("{a}->{b} is physical by R2 at {} but present in the physical graph", cx.label(r))
            }),
            (Classification::Physical, Some(RULE_R2)) => skipped += 1,
            _ => {}
        }
    }
    if skipped > 0 {
        out.notes.push(format!(
            "{skipped} R2 verdicts not checked: model is not R-faithful, regular and strongly regime-acyclic"
        ));
    }
    out
}

/// Runs every law on one solved model.
pub fn check_all(gt: &GroundTruth) -> Vec<LawOutcome> {
    let cx = LawContext::new(gt);
    vec![
        check_edge_inclusions(&cx),
        check_union_property(&cx),
        check_regime_children(&cx),
        check_ident_sandwich(&cx),
        check_markov(&cx),
        check_solution_locality(&cx),
        check_noise_factorization(&cx),
        check_local_markov(&cx),
        check_jci_soundness(&cx),
    ]
}

/// The selection-bias fixture: `X - Y` is absent from the descriptive graph
/// at `R=b0`, yet no test removes it and it stays in the ident graph.
pub fn check_non_markov_counterexample() -> Result<LawOutcome> {
    let gt = GroundTruth::new(&get_example("non-markov(1/3)")?)?;
    let r = gt.regime("b0")?;
    let t = ExactTester::from_ground_truth(&gt);
    let detect = detect_graph(&t, "b0", DetectOptions::default())?.skeleton;
    let mut out = LawOutcome::new("non_markov_counterexample");
    out.check(!gt.descriptive(r).adjacent("X", "Y"), || "X-Y is in the descriptive graph at R=b0".into());
    out.check(detect.adjacent("X", "Y"), || "X-Y was removed from the detect graph at R=b0".into());
    out.check(gt.ident(r).adjacent("X", "Y"), || "X-Y is missing from the ident graph at R=b0".into());
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Requirements {
    pub solvable: bool,
    pub regular: bool,
    pub strongly_regime_acyclic: bool,
    pub r_faithful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomScmSpec {
    pub n_vars: usize,
    pub max_domain: usize,
    pub max_parents: usize,
    pub max_noise_labels: usize,
    pub edge_prob: f64,
    /// Probability of a parent later in the draw order, creating cycles.
    pub back_edge_prob: f64,
    pub seed: u64,
    pub stream: u64,
    pub require: Requirements,
    pub max_attempts: usize,
}

impl Default for RandomScmSpec {
    fn default() -> Self {
        RandomScmSpec {
            n_vars: 5,
            max_domain: 3,
            max_parents: 2,
            max_noise_labels: 3,
            edge_prob: 0.5,
            back_edge_prob: 0.15,
            seed: 1,
            stream: 0,
            require: Requirements {
                solvable: true,
                ..Requirements::default()
            },
            max_attempts: 10_000,
        }
    }
}

impl RandomScmSpec {
    fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(1..=8).contains(&self.n_vars) {
            errs.push(format!("n_vars {} is not in 1..=8", self.n_vars));
        }
        if !(2..=4).contains(&self.max_domain) {
            errs.push(format!("max_domain {} is not in 2..=4", self.max_domain));
        }
        if self.max_parents > 4 {
            errs.push(format!("max_parents {} exceeds 4", self.max_parents));
        }
        if !(1..=4).contains(&self.max_noise_labels) {
            errs.push(format!("max_noise_labels {} is not in 1..=4", self.max_noise_labels));
        }
        for (name, p) in [("edge_prob", self.edge_prob), ("back_edge_prob", self.back_edge_prob)] {
            if !(0.0..=1.0).contains(&p) {
                errs.push(format!("{name} {p} is not in [0,1]"));
            }
        }
        if self.max_attempts == 0 {
            errs.push("max_attempts must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidQuery(format!("random SCM spec: {}", errs.join("; "))))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomScm {
    pub scm: Scm,
    pub ground_truth: GroundTruth,
    pub attempts: usize,
    /// Rejected draws by reason.
    pub rejections: BTreeMap<String, usize>,
}

fn variable_names(n: usize) -> Vec<String> {
    std::iter::once("R".to_string())
        .chain((0..n.saturating_sub(1)).map(|i| ((b'A' + i as u8) as char).to_string()))
        .collect()
}

/// Random pmf over `k` labels with a common denominator of at most 8.
fn random_pmf(rng: &mut ChaCha8Rng, k: usize) -> Vec<(String, BigRational)> {
    let d = rng.random_range(k.max(2)..=8);
    let mut cuts: Vec<usize> = (1..d).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..k - 1].to_vec();
    cuts.sort_unstable();
    cuts.push(d);
    let mut prev = 0;
    cuts.into_iter()
        .enumerate()
        .map(|(i, c)| {
            let p = BigRational::new((c - prev).into(), d.into());
            prev = c;
            (format!("n{i}"), p)
        })
        .collect()
}

fn draw_scm(spec: &RandomScmSpec, rng: &mut ChaCha8Rng) -> Scm {
    let names = variable_names(spec.n_vars);
    let mut order = names.clone();
    order.shuffle(rng);
    let domains: BTreeMap<String, usize> = names
        .iter()
        .map(|n| (n.clone(), rng.random_range(2..=spec.max_domain)))
        .collect();
    let mut b = ScmBuilder::new("R");
    for (i, v) in order.iter().enumerate() {
        let mut parents: Vec<String> = order
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .filter(|&(j, _)| rng.random_bool(if j < i { spec.edge_prob } else { spec.back_edge_prob }))
            .map(|(_, p)| p.clone())
            .collect();
        parents.shuffle(rng);
        parents.truncate(spec.max_parents);
        parents.sort();
        let k = rng.random_range(1..=spec.max_noise_labels);
        let noise = random_pmf(rng, k);
        let m = domains[v];
        let mut table: BTreeMap<(Vec<String>, String), String> = BTreeMap::new();
        let mut idx = vec![0usize; parents.len()];
        loop {
            let pa: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            for (l, _) in &noise {
                table.insert((pa.clone(), l.clone()), rng.random_range(0..m).to_string());
            }
            let mut k = parents.len();
            let done = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[&parents[k]] {
                    break false;
                }
                idx[k] = 0;
            };
            if done {
                break;
            }
        }
        let dom: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        let dom: Vec<&str> = dom.iter().map(String::as_str).collect();
        let pa: Vec<&str> = parents.iter().map(String::as_str).collect();
        b = b.variable(v, &dom, noise, &pa, move |vals, n| {
            table[&(vals.iter().map(|s| s.to_string()).collect(), n.to_string())].clone()
        });
    }
    b.build()
}

fn rejection(gt: &std::result::Result<GroundTruth, Error>, req: &Requirements) -> Option<&'static str> {
    let gt = match gt {
        Err(Error::Unsolvable { .. }) => return Some("unsolvable"),
        Err(Error::NotUniquelySolvable { .. }) => return Some("not uniquely solvable"),
        Err(_) => return Some("solver error"),
        Ok(gt) => gt,
    };
    if gt.regimes().len() < 2 {
        return Some("single regime");
    }
    if req.regular && !gt.regularity().holds {
        return Some("not regular");
    }
    if req.strongly_regime_acyclic && !gt.is_strongly_regime_acyclic() {
        return Some("not strongly regime-acyclic");
    }
    if req.r_faithful && !gt.r_faithfulness().holds {
        return Some("not R-faithful");
    }
    None
}

/// Rejection-samples a random tabular SCM meeting `spec.require`. Draws
/// that cannot be solved uniquely are always rejected, since every law
/// needs solution functions.
pub fn random_scm(spec: &RandomScmSpec) -> Result<RandomScm> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream);
    let mut rejections = BTreeMap::new();
    for attempt in 1..=spec.max_attempts {
        let scm = draw_scm(spec, &mut rng);
        let gt = GroundTruth::new(&scm);
        match rejection(&gt, &spec.require) {
            Some(why) => *rejections.entry(why.to_string()).or_insert(0) += 1,
            None => {
                return Ok(RandomScm {
                    scm,
                    ground_truth: gt.expect("accepted"),
                    attempts: attempt,
                    rejections,
                })
            }
        }
    }
    Err(Error::CapExceeded(format!(
        "no SCM met the requirements in {} attempts ({rejections:?})",
        spec.max_attempts
    )))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub outcomes: Vec<LawOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawTally {
    pub pass: usize,
    pub fail: usize,
    pub inapplicable: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    pub law: String,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub count: usize,
    pub seed: u64,
    pub spec: RandomScmSpec,
    pub models_checked: usize,
    pub rejections: BTreeMap<String, usize>,
    pub tallies: BTreeMap<String, LawTally>,
    pub failures: Vec<Failure>,
    /// Models that could not be generated or solved.
    pub errors: Vec<String>,
    pub models: Vec<ModelReport>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.errors.is_empty()
    }
}

/// Checks `count` random SCMs (stream `i` of `seed` for the `i`-th) and,
/// optionally, the corpus plus the selection-bias fixture.
pub fn run_suite(count: usize, spec: &RandomScmSpec, seed: u64, include_corpus: bool) -> SuiteSummary {
    let random: Vec<std::result::Result<(ModelReport, BTreeMap<String, usize>), String>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = RandomScmSpec {
                seed,
                stream: i as u64,
                ..spec.clone()
            };
            let name = format!("random-{i}");
            let rs = random_scm(&s).map_err(|e| format!("{name}: {e}"))?;
            Ok((
                ModelReport {
                    name,
                    outcomes: check_all(&rs.ground_truth),
                },
                rs.rejections,
            ))
        })
        .collect();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    if include_corpus {
        let corpus: Vec<std::result::Result<ModelReport, String>> = list_examples()
            .into_par_iter()
            .map(|(name, _)| {
                let scm = get_example(name).map_err(|e| format!("{name}: {e}"))?;
                let gt = GroundTruth::new(&scm).map_err(|e| format!("{name}: {e}"))?;
                Ok(ModelReport {
                    name: name.to_string(),
                    outcomes: check_all(&gt),
                })
            })
            .collect();
        for c in corpus {
            match c {
                Ok(r) => reports.push(r),
                Err(e) => errors.push(e),
            }
        }
        match check_non_markov_counterexample() {
            Ok(o) => reports.push(ModelReport {
                name: "non-markov(1/3)".into(),
                outcomes: vec![o],
            }),
            Err(e) => errors.push(format!("non_markov_counterexample: {e}")),
        }
    }
    for r in random {
        match r {
            Ok((rep, rej)) => {
                for (k, v) in rej {
                    *rejections.entry(k).or_insert(0) += v;
                }
                reports.push(rep);
            }
            Err(e) => errors.push(e),
        }
    }
    let mut tallies: BTreeMap<String, LawTally> = BTreeMap::new();
    let mut failures = Vec::new();
    for rep in &reports {
        for o in &rep.outcomes {
            let t = tallies.entry(o.law.clone()).or_default();
            match o.status {
                Status::Pass => t.pass += 1,
                Status::Inapplicable => t.inapplicable += 1,
                Status::Fail => {
                    t.fail += 1;
                    failures.push(Failure {
                        model: rep.name.clone(),
                        law: o.law.clone(),
                        witness: o.witness.clone().unwrap_or_default(),
                    });
                }
            }
        }
    }
    SuiteSummary {
        count,
        seed,
        spec: spec.clone(),
        models_checked: reports.len(),
        rejections,
        tallies,
        failures,
        errors,
        models: reports,
    }
}

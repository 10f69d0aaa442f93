//! Named worked examples as exact SCMs.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scm::{parse_rational, MechanismRow, MechanismTable, NoiseSpec, Scm, VariableSpec};

type MechFn = Box<dyn Fn(&[&str], &str) -> String>;

/// Builds tabular SCMs from closures `f(parent_labels, noise_label)`.
pub struct ScmBuilder {
    context: String,
    variables: Vec<VariableSpec>,
    noises: Vec<NoiseSpec>,
    mechanisms: Vec<(String, Vec<String>, MechFn)>,
}

fn advance(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < radix(k) {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn labels(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Uniform pmf over the given labels.
pub fn uniform(items: &[&str]) -> Vec<(String, BigRational)> {
    let p = BigRational::new(1.into(), (items.len() as i64).into());
    items.iter().map(|l| (l.to_string(), p.clone())).collect()
}

fn pmf(items: &[(&str, &str)]) -> Vec<(String, BigRational)> {
    items
        .iter()
        .map(|(l, p)| (l.to_string(), parse_rational(p).expect("literal rational")))
        .collect()
}

impl ScmBuilder {
    pub fn new(context: &str) -> Self {
        ScmBuilder {
            context: context.to_string(),
            variables: Vec::new(),
            noises: Vec::new(),
            mechanisms: Vec::new(),
        }
    }

    pub fn variable<F>(
        self,
        name: &str,
        domain: &[&str],
        noise: Vec<(String, BigRational)>,
        parents: &[&str],
        f: F,
    ) -> Self
    where
        F: Fn(&[&str], &str) -> String + 'static,
    {
        self.push(name, labels(domain), noise, labels(parents), Box::new(f))
    }

    /// Exogenous variable equal to its noise (labels shared with the domain).
    pub fn exogenous(self, name: &str, noise: Vec<(String, BigRational)>) -> Self {
        let domain = noise.iter().map(|(l, _)| l.clone()).collect();
        self.push(name, domain, noise, Vec::new(), Box::new(|_, n| n.to_string()))
    }

    fn push(
        mut self,
        name: &str,
        domain: Vec<String>,
        noise: Vec<(String, BigRational)>,
        parents: Vec<String>,
        f: MechFn,
    ) -> Self {
        self.variables.push(VariableSpec {
            name: name.to_string(),
            domain,
        });
        self.noises.push(NoiseSpec {
            variable: name.to_string(),
            pmf: noise,
        });
        self.mechanisms.push((name.to_string(), parents, f));
        self
    }

    pub fn build(self) -> Scm {
        let domains: BTreeMap<String, Vec<String>> = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.domain.clone()))
            .collect();
        let mut mechanisms = Vec::new();
        for ((name, parents, f), noise) in self.mechanisms.iter().zip(&self.noises) {
            let mut rows = Vec::new();
            let mut idx = vec![0usize; parents.len()];
            loop {
                let pl: Vec<&str> = parents
                    .iter()
                    .zip(&idx)
                    .map(|(p, &i)| domains[p][i].as_str())
                    .collect();
                for (nl, _) in &noise.pmf {
                    rows.push(MechanismRow {
                        noise: nl.clone(),
                        parents: parents
                            .iter()
                            .zip(&pl)
                            .map(|(p, l)| (p.clone(), l.to_string()))
                            .collect(),
                        value: f(&pl, nl),
                    });
                }
                if !advance(&mut idx, |k| domains[&parents[k]].len()) {
                    break;
                }
            }
            mechanisms.push(MechanismTable {
                variable: name.clone(),
                parents: parents.clone(),
                rows,
            });
        }
        let mut scm = Scm {
            context_variable: self.context,
            variables: self.variables,
            noises: self.noises,
            mechanisms,
        };
        scm.canonicalize();
        scm
    }
}

const NAMES: [(&str, &str); 11] = [
    ("intro", "seasonal gating: T is constant when R=0, so T->Y is unobservable there"),
    ("intro-mediator", "intro with the context acting through a mediator M"),
    ("non-markov(1/3)", "selection bias between ancestors of R; X-Y never separable given R=b0"),
    ("exo-gate", "R switches the X-dependence of Y off: a genuine mechanism change"),
    ("cf-example", "counterfactual graph has an edge X->Y missing from the union graph"),
    ("not-strong-faithful", "regime-disjoint supports let f_Y be re-expressed through R"),
    ("p1-limit", "intro with P(R=0)=1: all graph objects collapse to the standard one"),
    ("fig1-nochange-overlap", "unchanged mechanism, overlapping support across contexts"),
    ("fig1-change-overlap", "mechanism changes at C=0, overlapping support"),
    ("fig1-nochange-gated", "unchanged mechanism, C=0 support where f_Y is constant"),
    ("fig1-change-gated", "mechanism changes at C=0, support gated away"),
];

/// All example names with a one-line description.
pub fn list_examples() -> Vec<(&'static str, &'static str)> {
    NAMES.to_vec()
}

pub fn get_example(name: &str) -> Result<Scm> {
    let name = name.trim();
    if let Some(p) = name
        .strip_prefix("non-markov(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        let p = parse_rational(p).map_err(|_| Error::UnknownExample(name.to_string()))?;
        if p <= BigRational::zero() || p >= BigRational::one() {
            return Err(Error::UnknownExample(name.to_string()));
        }
        return Ok(non_markov(p));
    }
    Ok(match name {
        "intro" => intro("1/2"),
        "intro-mediator" => intro_mediator(),
        "non-markov" => non_markov(parse_rational("1/3").expect("literal")),
        "exo-gate" => exo_gate(),
        "cf-example" => cf_example(),
        "not-strong-faithful" => not_strong_faithful(),
        "p1-limit" => intro("1"),
        "fig1-nochange-overlap" => fig1(false, false),
        "fig1-change-overlap" => fig1(true, false),
        "fig1-nochange-gated" => fig1(false, true),
        "fig1-change-gated" => fig1(true, true),
        _ => return Err(Error::UnknownExample(name.to_string())),
    })
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn y_of_t(pa: &[&str], n: &str) -> String {
    ((pa[0] == "+1") as u8 + n.parse::<u8>().expect("binary noise")).to_string()
}

/// Union `R->T, T->Y`. At `R=0` only `T=-1` occurs, so `T->Y` leaves the
/// descriptive graph but stays physical: a support change, not a mechanism
/// change. With `P(R=0)=1` every graph is empty.
fn intro(p_r0: &str) -> Scm {
    let p_r1 = (BigRational::one() - parse_rational(p_r0).expect("literal")).to_string();
    ScmBuilder::new("R")
        .variable("R", &["0", "1"], pmf(&[("0", p_r0), ("1", &p_r1)]), &[], |_, n| {
            n.to_string()
        })
        .variable("T", &["-1", "+1"], uniform(&["0", "1"]), &["R"], |pa, n| {
            if pa[0] == "1" && n == "1" { "+1" } else { "-1" }.to_string()
        })
        .variable("Y", &["0", "1", "2"], uniform(&["0", "1"]), &["T"], y_of_t)
        .build()
}

/// Union `R->M, M->T, T->Y`; at `R=0` both `M->T` and `T->Y` vanish from
/// the descriptive graph and both stay physical.
fn intro_mediator() -> Scm {
    ScmBuilder::new("R")
        .exogenous("R", uniform(&["0", "1"]))
        .variable("M", &["0", "1"], uniform(&["0", "1"]), &["R"], |pa, n| {
            bit(pa[0] == "1" && n == "1")
        })
        .variable("T", &["-1", "+1"], uniform(&["0", "1"]), &["M"], |pa, n| {
            if pa[0] == "1" && n == "1" { "+1" } else { "-1" }.to_string()
        })
        .variable("Y", &["0", "1", "2"], uniform(&["0", "1"]), &["T"], y_of_t)
        .build()
}

/// Union `X->Y, X->R, Y->R`. At `R=b0` and `R=b1`, `X->Y` is absent from
/// the descriptive graph but both endpoints are ancestors of `R`, so it
/// stays in ident and no test at `R=b0` separates `X` and `Y`.
fn non_markov(p: BigRational) -> Scm {
    const U: [&str; 4] = ["a0", "a1", "b0", "b1"];
    let idx = |u: &str| (u.as_bytes()[1] - b'0') as u32;
    let letter = |u: &str| u.as_bytes()[0] as char;
    let q = BigRational::one() - &p;
    ScmBuilder::new("R")
        .exogenous("X", uniform(&U))
        .variable("Y", &U, uniform(&["0", "1"]), &["X"], move |pa, n| {
            let e: u32 = n.parse().expect("binary noise");
            if letter(pa[0]) == 'a' {
                format!("a{}", idx(pa[0]) ^ e)
            } else {
                format!("b{e}")
            }
        })
        .variable(
            "R",
            &U,
            vec![("0".to_string(), q), ("1".to_string(), p)],
            &["X", "Y"],
            move |pa, n| {
                let e: u32 = n.parse().expect("binary noise");
                format!("{}{}", letter(pa[0]), e ^ idx(pa[0]) ^ idx(pa[1]))
            },
        )
        .build()
}

/// Union `R->Y, X->Y`; `X->Y` is absent from descriptive, physical and
/// counterfactual graphs at `R=0`.
fn exo_gate() -> Scm {
    ScmBuilder::new("R")
        .exogenous("R", uniform(&["0", "1"]))
        .exogenous("X", uniform(&["0", "1"]))
        .variable(
            "Y",
            &["0", "1"],
            pmf(&[("0", "3/4"), ("1", "1/4")]),
            &["R", "X"],
            |pa, n| {
                if pa[0] == "1" {
                    bit((pa[1] == "1") ^ (n == "1"))
                } else {
                    n.to_string()
                }
            },
        )
        .build()
}

/// Union `X->R, R->Y` although `f_Y` reads `X`: `(X=+1, R=1)` never occurs.
/// The counterfactual graph at `R=1` adds `X->Y`.
fn cf_example() -> Scm {
    ScmBuilder::new("R")
        .variable("X", &["-1", "+1"], uniform(&["-1", "+1"]), &[], |_, n| n.to_string())
        .variable("R", &["0", "1"], uniform(&["0", "1"]), &["X"], |pa, n| {
            if pa[0] == "-1" { n } else { "0" }.to_string()
        })
        .variable("Y", &["0", "1", "2", "3"], uniform(&["0", "1"]), &["X", "R"], |pa, n| {
            let g = (pa[0] == "+1") as u8;
            let r: u8 = pa[1].parse().expect("binary");
            let e: u8 = n.parse().expect("binary");
            (r * g + r + e).to_string()
        })
        .build()
}

/// Union `R->X, X->Y`; `X->Y` is in no descriptive graph, since `Y` only
/// sees the sign of `X` and each regime fixes the sign.
fn not_strong_faithful() -> Scm {
    ScmBuilder::new("R")
        .exogenous("R", uniform(&["0", "1"]))
        .variable("X", &["-2", "-1", "+1", "+2"], uniform(&["0", "1"]), &["R"], |pa, n| {
            match (pa[0], n) {
                ("0", "0") => "-2",
                ("0", _) => "-1",
                (_, "0") => "+1",
                _ => "+2",
            }
            .to_string()
        })
        .variable("Y", &["0", "1", "2"], uniform(&["0", "1"]), &["X"], |pa, n| {
            let pos = !pa[0].starts_with('-') as u8;
            (pos + n.parse::<u8>().expect("binary")).to_string()
        })
        .build()
}

/// Union `C->X, X->Y`, plus `C->Y` for `change` with overlap. At `C=0`
/// `X->Y` is never descriptive; it is physical only without `change`.
/// With `change` and `gated`, `C` reads into `f_Y` only off the support.
fn fig1(change: bool, gated: bool) -> Scm {
    let b = ScmBuilder::new("C")
        .exogenous("C", uniform(&["0", "1"]))
        .variable("X", &["0", "1", "2"], uniform(&["0", "1", "2"]), &["C"], move |pa, n| {
            let e: u8 = n.parse().expect("ternary");
            let x = match (pa[0], gated) {
                ("1", _) if !gated => e,
                ("1", _) => 1 + e % 2,
                (_, false) => e % 2,
                (_, true) => 0,
            };
            x.to_string()
        });
    let b = if change {
        b.variable("Y", &["0", "1", "2", "3"], uniform(&["0", "1"]), &["C", "X"], |pa, n| {
            let e: u8 = n.parse().expect("binary");
            if pa[0] == "0" {
                e.to_string()
            } else {
                (pa[1].parse::<u8>().expect("ternary") + e).to_string()
            }
        })
    } else {
        b.variable("Y", &["0", "1", "2", "3"], uniform(&["0", "1"]), &["X"], |pa, n| {
            ((pa[0] == "2") as u8 + n.parse::<u8>().expect("binary")).to_string()
        })
    };
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_all;
    use crate::scm::validate_scm;

    #[test]
    fn all_examples_validate_and_solve() {
        assert_eq!(list_examples().len(), 11);
        for (name, _) in list_examples() {
            let s = get_example(name).unwrap();
            assert!(validate_scm(&s).is_empty(), "{name}: {:?}", validate_scm(&s));
            assert!(solve_all(&s).unwrap().uniquely_solvable, "{name}");
        }
    }

    #[test]
    fn parameterized_non_markov() {
        let s = get_example("non-markov(1/5)").unwrap();
        let r = s.noise("R").unwrap();
        assert_eq!(r.pmf[1].1, parse_rational("1/5").unwrap());
        assert!(get_example("non-markov(1)").is_err());
        assert!(matches!(get_example("nope"), Err(Error::UnknownExample(_))));
    }
}

//! Finite categorical structural causal models: schema types, validation,
//! hard interventions, the JSON config document and a compiled index-based
//! form used by the solvers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub domain: Vec<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(with = "pmf_serde")]
    pub pmf: Vec<(String, BigRational)>,
    pub variable: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismRow {
    pub noise: String,
    pub parents: BTreeMap<String, String>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismTable {
    pub parents: Vec<String>,
    pub rows: Vec<MechanismRow>,
    pub variable: String,
}

/// Field order is alphabetical so the serialized document has sorted keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scm {
    pub context_variable: String,
    pub mechanisms: Vec<MechanismTable>,
    pub noises: Vec<NoiseSpec>,
    pub variables: Vec<VariableSpec>,
}

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| format!("`{text}` is not a rational of the form p/q"))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| format!("`{text}` is not a rational of the form p/q"))?;
    if den.is_zero() {
        return Err(format!("`{text}` has a zero denominator"));
    }
    Ok(BigRational::new(num, den))
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

mod pmf_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        pmf: &[(String, BigRational)],
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<(&str, String)> = pmf
            .iter()
            .map(|(l, p)| (l.as_str(), format_rational(p)))
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<Vec<(String, BigRational)>, D::Error> {
        let rows: Vec<(String, String)> = Vec::deserialize(de)?;
        rows.into_iter()
            .map(|(l, p)| Ok((l, parse_rational(&p).map_err(D::Error::custom)?)))
            .collect()
    }
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Structural violations; empty iff the SCM is well formed.
pub fn validate_scm(s: &Scm) -> Vec<String> {
    let mut out = Vec::new();
    let mut domains: BTreeMap<&str, &[String]> = BTreeMap::new();
    for v in &s.variables {
        if !valid_identifier(&v.name) {
            out.push(format!("invalid variable name `{}`", v.name));
        }
        if domains.insert(&v.name, &v.domain).is_some() {
            out.push(format!("duplicate variable `{}`", v.name));
        }
        if v.domain.is_empty() {
            out.push(format!("empty domain for {}", v.name));
        }
        let labels: BTreeSet<&String> = v.domain.iter().collect();
        if labels.len() != v.domain.len() {
            out.push(format!("duplicate labels in domain of {}", v.name));
        }
        if v.domain.iter().any(|l| l.is_empty()) {
            out.push(format!("empty label in domain of {}", v.name));
        }
    }
    if !domains.contains_key(s.context_variable.as_str()) {
        out.push(format!(
            "context variable `{}` is not a variable",
            s.context_variable
        ));
    }

    let mut noise_labels: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for n in &s.noises {
        if !domains.contains_key(n.variable.as_str()) {
            out.push(format!("noise for unknown variable `{}`", n.variable));
            continue;
        }
        if noise_labels.contains_key(n.variable.as_str()) {
            out.push(format!("more than one noise for {}", n.variable));
            continue;
        }
        let labels: BTreeSet<&str> = n.pmf.iter().map(|(l, _)| l.as_str()).collect();
        if labels.len() != n.pmf.len() {
            out.push(format!("duplicate noise labels for {}", n.variable));
        }
        if n.pmf.is_empty() {
            out.push(format!("empty noise pmf for {}", n.variable));
        }
        if n.pmf.iter().any(|(_, p)| p.is_negative()) {
            out.push(format!("negative probability in noise pmf for {}", n.variable));
        }
        let total: BigRational = n.pmf.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            out.push(format!(
                "noise pmf for {} sums to {}",
                n.variable,
                format_rational(&total)
            ));
        }
        noise_labels.insert(&n.variable, labels);
    }
    for v in &s.variables {
        if !noise_labels.contains_key(v.name.as_str()) {
            out.push(format!("missing noise for {}", v.name));
        }
    }

    let mut seen_mech = BTreeSet::new();
    for m in &s.mechanisms {
        let Some(domain) = domains.get(m.variable.as_str()) else {
            out.push(format!("mechanism for unknown variable `{}`", m.variable));
            continue;
        };
        if !seen_mech.insert(m.variable.as_str()) {
            out.push(format!("more than one mechanism for {}", m.variable));
            continue;
        }
        let mut bad_parent = false;
        let mut parent_set = BTreeSet::new();
        for p in &m.parents {
            if !domains.contains_key(p.as_str()) {
                out.push(format!(
                    "mechanism for {} references unknown parent `{p}`",
                    m.variable
                ));
                bad_parent = true;
            } else if p == &m.variable {
                out.push(format!("mechanism for {} lists itself as a parent", m.variable));
                bad_parent = true;
            } else if !parent_set.insert(p.as_str()) {
                out.push(format!("mechanism for {} repeats parent `{p}`", m.variable));
                bad_parent = true;
            }
        }
        let Some(nlabels) = noise_labels.get(m.variable.as_str()) else {
            continue;
        };
        if bad_parent {
            continue;
        }
        let mut keys = BTreeSet::new();
        let mut row_errors = false;
        for row in &m.rows {
            let declared: BTreeSet<&str> = row.parents.keys().map(String::as_str).collect();
            if declared != parent_set {
                out.push(format!(
                    "row of mechanism for {} does not assign exactly the declared parents",
                    m.variable
                ));
                row_errors = true;
                continue;
            }
            for (p, l) in &row.parents {
                if !domains[p.as_str()].contains(l) {
                    out.push(format!(
                        "mechanism for {}: label `{l}` not in domain of parent {p}",
                        m.variable
                    ));
                    row_errors = true;
                }
            }
            if !nlabels.contains(row.noise.as_str()) {
                out.push(format!(
                    "mechanism for {}: unknown noise label `{}`",
                    m.variable, row.noise
                ));
                row_errors = true;
            }
            if !domain.contains(&row.value) {
                out.push(format!(
                    "mechanism for {}: output `{}` not in its domain",
                    m.variable, row.value
                ));
                row_errors = true;
            }
            let key: Vec<&str> = m
                .parents
                .iter()
                .map(|p| row.parents[p].as_str())
                .chain(std::iter::once(row.noise.as_str()))
                .collect();
            if !keys.insert(key) {
                out.push(format!("duplicate row in mechanism for {}", m.variable));
                row_errors = true;
            }
        }
        if !row_errors {
            let expected: usize = m
                .parents
                .iter()
                .map(|p| domains[p.as_str()].len())
                .product::<usize>()
                * nlabels.len();
            if keys.len() != expected {
                out.push(format!("incomplete table for {}", m.variable));
            }
        }
    }
    for v in &s.variables {
        if !seen_mech.contains(v.name.as_str()) {
            out.push(format!("missing mechanism for {}", v.name));
        }
    }
    out
}

impl Scm {
    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn domain(&self, var: &str) -> Result<&[String]> {
        self.variables
            .iter()
            .find(|v| v.name == var)
            .map(|v| v.domain.as_slice())
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    pub fn mechanism(&self, var: &str) -> Result<&MechanismTable> {
        self.mechanisms
            .iter()
            .find(|m| m.variable == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    pub fn noise(&self, var: &str) -> Result<&NoiseSpec> {
        self.noises
            .iter()
            .find(|n| n.variable == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    /// Hard intervention `do(var = value)`: the mechanism becomes constant and
    /// parentless, everything else (including every noise) is untouched.
    pub fn intervene(&self, var: &str, value: &str) -> Result<Scm> {
        let domain = self.domain(var)?;
        if !domain.iter().any(|l| l == value) {
            return Err(Error::UnknownLabel {
                variable: var.to_string(),
                label: value.to_string(),
            });
        }
        let noise = self.noise(var)?;
        let mut out = self.clone();
        let mech = out
            .mechanisms
            .iter_mut()
            .find(|m| m.variable == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
        mech.parents.clear();
        mech.rows = noise
            .pmf
            .iter()
            .map(|(l, _)| MechanismRow {
                noise: l.clone(),
                parents: BTreeMap::new(),
                value: value.to_string(),
            })
            .collect();
        Ok(out)
    }

    /// Sorts mechanism rows by domain order of (parents..., noise) so the
    /// serialized document is canonical.
    pub fn canonicalize(&mut self) {
        let domains: HashMap<String, Vec<String>> = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.domain.clone()))
            .collect();
        let noise_order: HashMap<String, Vec<String>> = self
            .noises
            .iter()
            .map(|n| (n.variable.clone(), n.pmf.iter().map(|(l, _)| l.clone()).collect()))
            .collect();
        let pos = |list: Option<&Vec<String>>, label: &str| {
            list.and_then(|l| l.iter().position(|x| x == label))
                .unwrap_or(usize::MAX)
        };
        for m in &mut self.mechanisms {
            let parents = m.parents.clone();
            let var = m.variable.clone();
            m.rows.sort_by_cached_key(|row| {
                let mut key: Vec<usize> = parents
                    .iter()
                    .map(|p| pos(domains.get(p), &row.parents[p]))
                    .collect();
                key.push(pos(noise_order.get(&var), &row.noise));
                key
            });
        }
    }

    /// Canonical config document (sorted keys, sorted rows, trailing newline).
    pub fn to_document(&self) -> String {
        let mut canon = self.clone();
        canon.canonicalize();
        let mut text = serde_json::to_string_pretty(&canon).expect("scm serializes");
        text.push('\n');
        text
    }
}

/// Parses and validates a config document.
pub fn load_scm(text: &str) -> Result<Scm> {
    let scm: Scm = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_scm(&scm);
    if violations.is_empty() {
        Ok(scm)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Index-based form of a validated SCM used by the solvers and graph code.
///
/// Values are indices into the variable's domain; noise values are indices
/// into the noise pmf. Noise probabilities are held as integer weights over a
/// per-noise denominator so products stay exact without big integers.
#[derive(Debug, Clone)]
pub struct Model {
    scm: Scm,
    names: Vec<String>,
    index: HashMap<String, usize>,
    domains: Vec<Vec<String>>,
    noise_labels: Vec<Vec<String>>,
    noise_weights: Vec<Vec<u128>>,
    noise_denoms: Vec<u128>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Vec<u16>>,
    context: usize,
}

fn pmf_to_weights(var: &str, pmf: &[(String, BigRational)]) -> Result<(Vec<u128>, u128)> {
    let mut den = BigInt::one();
    for (_, p) in pmf {
        den = den.lcm(p.denom());
    }
    let den_u = den
        .to_u128()
        .filter(|d| *d < (1u128 << 62))
        .ok_or_else(|| Error::Overflow(format!("noise pmf denominator for {var} is too large")))?;
    let weights = pmf
        .iter()
        .map(|(_, p)| {
            (p.numer() * (&den / p.denom()))
                .to_u128()
                .expect("0 <= p <= 1 scaled by its denominator")
        })
        .collect();
    Ok((weights, den_u))
}

impl Model {
    pub fn new(scm: &Scm) -> Result<Model> {
        let violations = validate_scm(scm);
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        let names: Vec<String> = scm.variable_names();
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let domains: Vec<Vec<String>> = scm.variables.iter().map(|v| v.domain.clone()).collect();
        if domains.iter().any(|d| d.len() > u16::MAX as usize) {
            return Err(Error::CapExceeded("domain larger than 65535 labels".into()));
        }
        let mut noise_labels = Vec::with_capacity(names.len());
        let mut noise_weights = Vec::with_capacity(names.len());
        let mut noise_denoms = Vec::with_capacity(names.len());
        for n in &names {
            let noise = scm.noise(n)?;
            let (w, d) = pmf_to_weights(n, &noise.pmf)?;
            noise_labels.push(noise.pmf.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>());
            noise_weights.push(w);
            noise_denoms.push(d);
        }
        let mut parents = Vec::with_capacity(names.len());
        let mut tables = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            let mech = scm.mechanism(n)?;
            let pa: Vec<usize> = mech.parents.iter().map(|p| index[p]).collect();
            let size: usize = pa.iter().map(|&p| domains[p].len()).product::<usize>()
                * noise_labels[i].len();
            let mut table = vec![0u16; size];
            for row in &mech.rows {
                let mut key = 0usize;
                for &p in &pa {
                    let label = &row.parents[&names[p]];
                    let li = domains[p].iter().position(|l| l == label).expect("validated");
                    key = key * domains[p].len() + li;
                }
                let ni = noise_labels[i]
                    .iter()
                    .position(|l| *l == row.noise)
                    .expect("validated");
                key = key * noise_labels[i].len() + ni;
                table[key] = domains[i]
                    .iter()
                    .position(|l| *l == row.value)
                    .expect("validated") as u16;
            }
            parents.push(pa);
            tables.push(table);
        }
        let context = index[&scm.context_variable];
        Ok(Model {
            scm: scm.clone(),
            names,
            index,
            domains,
            noise_labels,
            noise_weights,
            noise_denoms,
            parents,
            tables,
            context,
        })
    }

    pub fn scm(&self) -> &Scm {
        &self.scm
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn domain(&self, i: usize) -> &[String] {
        &self.domains[i]
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn label_index(&self, i: usize, label: &str) -> Result<u16> {
        self.domains[i]
            .iter()
            .position(|l| l == label)
            .map(|p| p as u16)
            .ok_or_else(|| Error::UnknownLabel {
                variable: self.names[i].clone(),
                label: label.to_string(),
            })
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn context_name(&self) -> &str {
        &self.names[self.context]
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn noise_labels(&self, i: usize) -> &[String] {
        &self.noise_labels[i]
    }

    pub fn noise_weights(&self, i: usize) -> &[u128] {
        &self.noise_weights[i]
    }

    pub fn noise_denom(&self, i: usize) -> u128 {
        self.noise_denoms[i]
    }

    /// Noise label indices with positive probability.
    pub fn positive_noise(&self, i: usize) -> Vec<u16> {
        self.noise_weights[i]
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0)
            .map(|(k, _)| k as u16)
            .collect()
    }

    /// Evaluates `f_i` with parent values read from a full assignment.
    pub fn eval(&self, i: usize, values: &[u16], noise: u16) -> u16 {
        let mut key = 0usize;
        for &p in &self.parents[i] {
            key = key * self.domains[p].len() + values[p] as usize;
        }
        key = key * self.noise_labels[i].len() + noise as usize;
        self.tables[i][key]
    }
}

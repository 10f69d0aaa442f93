//! Exact semantics: brute-force solving, exact joint distributions, supports,
//! conditionals, and seeded sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scm::{Model, Scm};

pub const DEFAULT_SOLVE_CAP: u128 = 100_000_000;

/// Name of the noise column for `var` in the noise–observable joint.
pub fn noise_column(var: &str) -> String {
    format!("eta({var})")
}

/// One row per positive-probability noise assignment with its solved values.
///
/// Probabilities are `weights[i] / denom`.
#[derive(Debug, Clone)]
pub struct SolutionTable {
    pub noise: Vec<Vec<u16>>,
    pub values: Vec<Vec<u16>>,
    pub weights: Vec<u128>,
    pub denom: u128,
    pub uniquely_solvable: bool,
}

impl SolutionTable {
    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    pub fn probability(&self, row: usize) -> BigRational {
        ratio(self.weights[row], self.denom)
    }

    /// Row indices of the restriction `F^{R=r}`.
    pub fn restriction(&self, var: usize, value: u16) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.values[i][var] == value)
            .collect()
    }
}

pub(crate) fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn mixed_radix_next(digits: &mut [u16], radix: impl Fn(usize) -> usize) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if (digits[i] as usize) < radix(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}

fn describe(model: &Model, noise: &[u16]) -> String {
    let parts: Vec<String> = noise
        .iter()
        .enumerate()
        .map(|(i, &k)| format!("{}={}", noise_column(model.name(i)), model.noise_labels(i)[k as usize]))
        .collect();
    format!("({})", parts.join(", "))
}

pub fn solve_all(scm: &Scm) -> Result<SolutionTable> {
    solve_model(&Model::new(scm)?, DEFAULT_SOLVE_CAP)
}

/// Enumerates every candidate observable assignment for every positive
/// noise assignment and keeps those satisfying all equations.
pub fn solve_model(model: &Model, cap: u128) -> Result<SolutionTable> {
    let n = model.len();
    let positive: Vec<Vec<u16>> = (0..n).map(|i| model.positive_noise(i)).collect();
    let noise_space: u128 = positive.iter().map(|p| p.len() as u128).product();
    let cand_space: u128 = model.domains().iter().map(|d| d.len() as u128).product();
    if noise_space.saturating_mul(cand_space) > cap {
        return Err(Error::CapExceeded(format!(
            "{noise_space} noise assignments x {cand_space} candidates exceeds {cap}"
        )));
    }
    let mut denom: u128 = 1;
    for i in 0..n {
        denom = denom
            .checked_mul(model.noise_denom(i))
            .ok_or_else(|| Error::Overflow("product of noise denominators".into()))?;
    }
    let mut table = SolutionTable {
        noise: Vec::new(),
        values: Vec::new(),
        weights: Vec::new(),
        denom,
        uniquely_solvable: true,
    };
    if n == 0 {
        table.noise.push(Vec::new());
        table.values.push(Vec::new());
        table.weights.push(1);
        return Ok(table);
    }
    let mut pos = vec![0u16; n];
    loop {
        let noise: Vec<u16> = (0..n).map(|i| positive[i][pos[i] as usize]).collect();
        let mut weight: u128 = 1;
        for (i, &k) in noise.iter().enumerate() {
            weight *= model.noise_weights(i)[k as usize];
        }
        let mut found: Option<Vec<u16>> = None;
        let mut count = 0usize;
        let mut cand = vec![0u16; n];
        loop {
            if (0..n).all(|i| model.eval(i, &cand, noise[i]) == cand[i]) {
                count += 1;
                if found.is_none() {
                    found = Some(cand.clone());
                }
            }
            if !mixed_radix_next(&mut cand, |i| model.domain(i).len()) {
                break;
            }
        }
        match (found, count) {
            (None, _) => {
                return Err(Error::Unsolvable {
                    witness: describe(model, &noise),
                })
            }
            (Some(values), 1) => {
                table.noise.push(noise);
                table.values.push(values);
                table.weights.push(weight);
            }
            (Some(_), count) => {
                return Err(Error::NotUniquelySolvable {
                    witness: describe(model, &noise),
                    count,
                })
            }
        }
        if !mixed_radix_next(&mut pos, |i| positive[i].len()) {
            break;
        }
    }
    Ok(table)
}

/// Exact distribution over a scope of categorical columns.
///
/// Probabilities are `weight / denom`; the weights always sum to `denom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointPmf {
    scope: Vec<String>,
    domains: Vec<Vec<String>>,
    table: BTreeMap<Vec<u16>, u128>,
    denom: u128,
}

impl JointPmf {
    pub fn from_weights(
        scope: Vec<String>,
        domains: Vec<Vec<String>>,
        rows: impl IntoIterator<Item = (Vec<u16>, u128)>,
    ) -> Result<JointPmf> {
        let mut table = BTreeMap::new();
        let mut denom: u128 = 0;
        for (key, w) in rows {
            if w == 0 {
                continue;
            }
            denom = denom
                .checked_add(w)
                .ok_or_else(|| Error::Overflow("joint pmf total".into()))?;
            *table.entry(key).or_insert(0) += w;
        }
        if denom == 0 {
            return Err(Error::ZeroProbability("empty distribution".into()));
        }
        Ok(JointPmf {
            scope,
            domains,
            table,
            denom,
        })
    }

    pub fn scope(&self) -> &[String] {
        &self.scope
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn denom(&self) -> u128 {
        self.denom
    }

    /// Positive-probability entries as (assignment indices, weight).
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u16>, u128)> {
        self.table.iter().map(|(k, w)| (k, *w))
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.scope
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn label_index(&self, col: usize, label: &str) -> Result<u16> {
        self.domains[col]
            .iter()
            .position(|l| l == label)
            .map(|p| p as u16)
            .ok_or_else(|| Error::UnknownLabel {
                variable: self.scope[col].clone(),
                label: label.to_string(),
            })
    }

    fn resolve(&self, assignment: &[(&str, &str)]) -> Result<Vec<(usize, u16)>> {
        assignment
            .iter()
            .map(|(v, l)| {
                let c = self.column(v)?;
                Ok((c, self.label_index(c, l)?))
            })
            .collect()
    }

    /// Exact probability of a partial assignment.
    pub fn probability(&self, assignment: &[(&str, &str)]) -> Result<BigRational> {
        let cond = self.resolve(assignment)?;
        Ok(ratio(self.mass_idx(&cond), self.denom))
    }

    pub fn mass_idx(&self, cond: &[(usize, u16)]) -> u128 {
        self.table
            .iter()
            .filter(|(k, _)| cond.iter().all(|&(c, v)| k[c] == v))
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn marginal(&self, vars: &[&str]) -> Result<JointPmf> {
        let cols: Vec<usize> = vars.iter().map(|v| self.column(v)).collect::<Result<_>>()?;
        Ok(self.marginal_idx(&cols))
    }

    pub fn marginal_idx(&self, cols: &[usize]) -> JointPmf {
        let mut table: BTreeMap<Vec<u16>, u128> = BTreeMap::new();
        for (k, w) in &self.table {
            *table.entry(cols.iter().map(|&c| k[c]).collect()).or_insert(0) += w;
        }
        JointPmf {
            scope: cols.iter().map(|&c| self.scope[c].clone()).collect(),
            domains: cols.iter().map(|&c| self.domains[c].clone()).collect(),
            table,
            denom: self.denom,
        }
    }

    pub fn conditional(&self, condition: &[(&str, &str)]) -> Result<JointPmf> {
        let cond = self.resolve(condition)?;
        self.conditional_idx(&cond).map_err(|_| {
            let text: Vec<String> = condition.iter().map(|(v, l)| format!("{v}={l}")).collect();
            Error::ZeroProbability(text.join(", "))
        })
    }

    pub fn conditional_idx(&self, cond: &[(usize, u16)]) -> Result<JointPmf> {
        let table: BTreeMap<Vec<u16>, u128> = self
            .table
            .iter()
            .filter(|(k, _)| cond.iter().all(|&(c, v)| k[c] == v))
            .map(|(k, w)| (k.clone(), *w))
            .collect();
        let denom: u128 = table.values().sum();
        if denom == 0 {
            let text: Vec<String> = cond
                .iter()
                .map(|&(c, v)| format!("{}={}", self.scope[c], self.domains[c][v as usize]))
                .collect();
            return Err(Error::ZeroProbability(text.join(", ")));
        }
        Ok(JointPmf {
            scope: self.scope.clone(),
            domains: self.domains.clone(),
            table,
            denom,
        })
    }

    /// Assignments of `subset` with positive marginal probability, as labels.
    pub fn support(&self, subset: &[&str]) -> Result<BTreeSet<Vec<String>>> {
        let cols: Vec<usize> = subset.iter().map(|v| self.column(v)).collect::<Result<_>>()?;
        Ok(self
            .support_idx(&cols)
            .into_iter()
            .map(|k| {
                k.iter()
                    .zip(&cols)
                    .map(|(&v, &c)| self.domains[c][v as usize].clone())
                    .collect()
            })
            .collect())
    }

    pub fn support_idx(&self, cols: &[usize]) -> BTreeSet<Vec<u16>> {
        self.table
            .keys()
            .map(|k| cols.iter().map(|&c| k[c]).collect())
            .collect()
    }

    /// Sum of all probabilities as an exact rational.
    pub fn total(&self) -> BigRational {
        self.table.values().map(|&w| ratio(w, self.denom)).sum()
    }
}

/// Observable joint and noise–observable joint (observables first, then
/// one `eta(X)` column per variable).
pub fn joint_pmf(scm: &Scm) -> Result<(JointPmf, JointPmf)> {
    let model = Model::new(scm)?;
    let sol = solve_model(&model, DEFAULT_SOLVE_CAP)?;
    joint_from_solution(&model, &sol)
}

pub fn joint_from_solution(model: &Model, sol: &SolutionTable) -> Result<(JointPmf, JointPmf)> {
    let names = model.names().to_vec();
    let observables = JointPmf::from_weights(
        names.clone(),
        model.domains().to_vec(),
        sol.values.iter().cloned().zip(sol.weights.iter().copied()),
    )?;
    let mut scope = names.clone();
    scope.extend(names.iter().map(|n| noise_column(n)));
    let mut domains = model.domains().to_vec();
    domains.extend((0..model.len()).map(|i| model.noise_labels(i).to_vec()));
    let rows = (0..sol.len()).map(|i| {
        let mut key = sol.values[i].clone();
        key.extend_from_slice(&sol.noise[i]);
        (key, sol.weights[i])
    });
    let full = JointPmf::from_weights(scope, domains, rows)?;
    Ok((observables, full))
}

/// Categorical dataset stored column-major as domain indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<String>,
    domains: Vec<Vec<String>>,
    data: Vec<Vec<u16>>,
    rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<String>, domains: Vec<Vec<String>>, data: Vec<Vec<u16>>) -> Result<Dataset> {
        if columns.len() != domains.len() || columns.len() != data.len() {
            return Err(Error::Data("column, domain and data counts differ".into()));
        }
        let rows = data.first().map_or(0, Vec::len);
        if data.iter().any(|c| c.len() != rows) {
            return Err(Error::Data("ragged columns".into()));
        }
        for (c, col) in data.iter().enumerate() {
            if col.iter().any(|&v| v as usize >= domains[c].len()) {
                return Err(Error::Data(format!("value out of domain in column {}", columns[c])));
            }
        }
        Ok(Dataset {
            columns,
            domains,
            data,
            rows,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn values(&self, col: usize) -> &[u16] {
        &self.data[col]
    }

    pub fn label_index(&self, col: usize, label: &str) -> Result<u16> {
        self.domains[col]
            .iter()
            .position(|l| l == label)
            .map(|p| p as u16)
            .ok_or_else(|| Error::UnknownLabel {
                variable: self.columns[col].clone(),
                label: label.to_string(),
            })
    }

    /// Rows whose `col` equals `value`.
    pub fn mask(&self, col: usize, value: u16) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.data[col][i] == value).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for i in 0..self.rows {
            w.write_record(
                (0..self.columns.len()).map(|c| self.domains[c][self.data[c][i] as usize].as_str()),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("labels are UTF-8")
    }

    /// Reads a CSV; domains are the observed labels in sorted order unless
    /// `known` supplies a domain for a column.
    pub fn read_csv<R: Read>(input: R, known: &HashMap<String, Vec<String>>) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c) {
                return Err(Error::Data(format!("duplicate column `{c}`")));
            }
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != columns.len() {
                return Err(Error::Data(format!("row {} has {} fields", line + 2, rec.len())));
            }
            for (c, field) in rec.iter().enumerate() {
                raw[c].push(field.to_string());
            }
        }
        let mut domains = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (c, name) in columns.iter().enumerate() {
            let domain: Vec<String> = match known.get(name) {
                Some(d) => d.clone(),
                None => raw[c].iter().cloned().collect::<BTreeSet<_>>().into_iter().collect(),
            };
            let lookup: HashMap<&str, u16> =
                domain.iter().enumerate().map(|(i, l)| (l.as_str(), i as u16)).collect();
            let col = raw[c]
                .iter()
                .map(|l| {
                    lookup.get(l.as_str()).copied().ok_or_else(|| Error::UnknownLabel {
                        variable: name.clone(),
                        label: l.clone(),
                    })
                })
                .collect::<Result<Vec<u16>>>()?;
            domains.push(domain);
            data.push(col);
        }
        Dataset::new(columns, domains, data)
    }
}

/// Draws from a finite distribution given integer weights summing to
/// `denom` by inverse CDF on a uniform integer in `0..denom`.
pub(crate) fn inverse_cdf(rng: &mut ChaCha8Rng, weights: &[u128], denom: u128) -> usize {
    let u = rng.random_range(0..denom);
    let mut acc = 0u128;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    unreachable!("weights sum to denom")
}

pub fn draw_samples(scm: &Scm, n: usize, seed: u64) -> Result<Dataset> {
    let model = Model::new(scm)?;
    let sol = solve_model(&model, DEFAULT_SOLVE_CAP)?;
    Ok(sample_solution(&model, &sol, n, seed))
}

/// Samples each noise independently by inverse CDF, in variable order, then
/// reads the solved values from the solution table.
pub fn sample_solution(model: &Model, sol: &SolutionTable, n: usize, seed: u64) -> Dataset {
    let lookup: HashMap<&[u16], usize> = sol
        .noise
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_slice(), i))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = model.len();
    let mut data = vec![Vec::with_capacity(n); vars];
    let mut noise = vec![0u16; vars];
    for _ in 0..n {
        for (i, slot) in noise.iter_mut().enumerate() {
            *slot = inverse_cdf(&mut rng, model.noise_weights(i), model.noise_denom(i)) as u16;
        }
        let row = lookup[noise.as_slice()];
        for (c, col) in data.iter_mut().enumerate() {
            col.push(sol.values[row][c]);
        }
    }
    Dataset::new(model.names().to_vec(), model.domains().to_vec(), data)
        .expect("solved values lie in their domains")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::get_example;
    use crate::scm::{MechanismRow, MechanismTable, NoiseSpec, VariableSpec};
    use num_traits::One;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn intro_row_solves_by_hand() {
        let s = get_example("intro").unwrap();
        let model = Model::new(&s).unwrap();
        let sol = solve_model(&model, DEFAULT_SOLVE_CAP).unwrap();
        assert!(sol.uniquely_solvable);
        let label = |i: usize, k: u16| model.domain(i)[k as usize].clone();
        let nlabel = |i: usize, k: u16| model.noise_labels(i)[k as usize].clone();
        let row = (0..sol.len())
            .find(|&r| (0..3).all(|i| nlabel(i, sol.noise[r][i]) == "0"))
            .unwrap();
        let got: Vec<String> = (0..3).map(|i| label(i, sol.values[row][i])).collect();
        assert_eq!(got, vec!["0", "-1", "0"]);
    }

    fn two_var(mech_a: &str, mech_b: &str) -> Scm {
        let var = |n: &str| VariableSpec {
            name: n.into(),
            domain: vec!["0".into(), "1".into()],
        };
        let noise = |n: &str| NoiseSpec {
            variable: n.into(),
            pmf: vec![("u".into(), BigRational::one())],
        };
        let copy = |v: &str, p: &str, kind: &str| MechanismTable {
            variable: v.into(),
            parents: vec![p.into()],
            rows: ["0", "1"]
                .iter()
                .map(|l| MechanismRow {
                    noise: "u".into(),
                    parents: [(p.to_string(), l.to_string())].into(),
                    value: if kind == "copy" {
                        l.to_string()
                    } else if *l == "0" {
                        "1".into()
                    } else {
                        "0".into()
                    },
                })
                .collect(),
        };
        Scm {
            context_variable: "A".into(),
            variables: vec![var("A"), var("B")],
            noises: vec![noise("A"), noise("B")],
            mechanisms: vec![copy("A", "B", mech_a), copy("B", "A", mech_b)],
        }
    }

    #[test]
    fn mutual_copy_is_not_uniquely_solvable() {
        match solve_all(&two_var("copy", "copy")) {
            Err(Error::NotUniquelySolvable { count, witness }) => {
                assert_eq!(count, 2);
                assert!(witness.contains("eta(A)=u"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negation_loop_is_unsolvable() {
        assert!(matches!(
            solve_all(&two_var("copy", "flip")),
            Err(Error::Unsolvable { .. })
        ));
    }

    #[test]
    fn intro_joint_values() {
        let (p, full) = joint_pmf(&get_example("intro").unwrap()).unwrap();
        assert_eq!(p.probability(&[("R", "0"), ("T", "-1")]).unwrap(), q(1, 2));
        assert_eq!(full.marginal(&["R", "T", "Y"]).unwrap(), p.marginal(&["R", "T", "Y"]).unwrap());
        let c = p.conditional(&[("R", "0")]).unwrap();
        assert_eq!(c.probability(&[("T", "-1")]).unwrap(), BigRational::one());
        assert_eq!(c.total(), BigRational::one());
        let s0: Vec<Vec<String>> = c.support(&["T"]).unwrap().into_iter().collect();
        assert_eq!(s0, vec![vec!["-1".to_string()]]);
        assert_eq!(p.support(&["T"]).unwrap().len(), 2);
        assert_eq!(p.support(&[]).unwrap().len(), 1);
        let point = p.conditional(&[("R", "1"), ("T", "+1"), ("Y", "2")]).unwrap();
        assert_eq!(point.entries().count(), 1);
        assert!(matches!(
            p.conditional(&[("R", "0"), ("T", "+1")]),
            Err(Error::ZeroProbability(_))
        ));
    }

    #[test]
    fn non_markov_total_is_one() {
        let (p, full) = joint_pmf(&get_example("non-markov(1/3)").unwrap()).unwrap();
        assert_eq!(p.total(), BigRational::one());
        assert_eq!(full.total(), BigRational::one());
    }

    #[test]
    fn sampling_is_reproducible_and_calibrated() {
        let s = get_example("intro").unwrap();
        let a = draw_samples(&s, 10_000, 42).unwrap();
        let b = draw_samples(&s, 10_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.columns(), &["R", "T", "Y"]);
        let r = a.column("R").unwrap();
        let zero = a.label_index(r, "0").unwrap();
        let frac = a.mask(r, zero).len() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        assert!(draw_samples(&s, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let s = get_example("intro").unwrap();
        let d = draw_samples(&s, 50, 3).unwrap();
        let known: HashMap<String, Vec<String>> = s
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.domain.clone()))
            .collect();
        let back = Dataset::read_csv(d.to_csv_string().as_bytes(), &known).unwrap();
        assert_eq!(back, d);
    }
}

//! Exact and finite-sample conditional independence tests, including
//! context-specific queries restricted to `R = r`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exact::{Dataset, JointPmf};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiQuery {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
    /// `(context variable, value)` for a context-specific query.
    pub regime: Option<(String, String)>,
}

impl CiQuery {
    pub fn pooled(x: &str, y: &str, z: &[&str]) -> CiQuery {
        CiQuery {
            x: x.to_string(),
            y: y.to_string(),
            z: z.iter().map(|s| s.to_string()).collect(),
            regime: None,
        }
    }

    pub fn in_regime(x: &str, y: &str, z: &[&str], context: &str, r: &str) -> CiQuery {
        CiQuery {
            regime: Some((context.to_string(), r.to_string())),
            ..CiQuery::pooled(x, y, z)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == self.y {
            return Err(Error::InvalidQuery(format!("x and y are both {}", self.x)));
        }
        if self.z.contains(&self.x) || self.z.contains(&self.y) {
            return Err(Error::InvalidQuery(format!("{self}: conditioning set contains x or y")));
        }
        if let Some((ctx, _)) = &self.regime {
            if &self.x == ctx || &self.y == ctx || self.z.contains(ctx) {
                return Err(Error::InvalidQuery(format!(
                    "{self}: context-specific query may not involve {ctx} outside the regime"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CiQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} _||_ {} | {{{}}}", self.x, self.y, self.z.join(","))?;
        if let Some((ctx, r)) = &self.regime {
            write!(f, ", {ctx}={r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    GTest,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::GTest => "g_test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiVerdict {
    pub independent: bool,
    pub p_value: f64,
    /// Conditional mutual information (nats) for the exact oracle, G for the test.
    pub statistic: f64,
    pub method: Method,
    pub df: usize,
    /// No informative stratum was available.
    pub degenerate: bool,
}

/// Column-level statistics of one query; shared by the exact and sampled paths.
struct Strata {
    // stratum -> (n_z, n_xz, n_yz, n_xyz)
    cells: BTreeMap<Vec<u16>, Cells>,
}

#[derive(Default)]
struct Cells {
    n: u128,
    x: BTreeMap<u16, u128>,
    y: BTreeMap<u16, u128>,
    xy: BTreeMap<(u16, u16), u128>,
}

impl Strata {
    fn collect(rows: impl Iterator<Item = (u16, u16, Vec<u16>, u128)>) -> Strata {
        let mut cells: BTreeMap<Vec<u16>, Cells> = BTreeMap::new();
        for (x, y, z, w) in rows {
            let c = cells.entry(z).or_default();
            c.n += w;
            *c.x.entry(x).or_insert(0) += w;
            *c.y.entry(y).or_insert(0) += w;
            *c.xy.entry((x, y)).or_insert(0) += w;
        }
        Strata { cells }
    }
}

/// Exact independence by rational factorization within every positive
/// stratum: `n(x,y,z) n(z) == n(x,z) n(y,z)`.
pub fn ci_exact_idx(p: &JointPmf, x: usize, y: usize, z: &[usize], cond: &[(usize, u16)]) -> Result<bool> {
    let strata = exact_strata(p, x, y, z, cond)?;
    for c in strata.cells.values() {
        for (&xv, &nx) in &c.x {
            for (&yv, &ny) in &c.y {
                let nxy = c.xy.get(&(xv, yv)).copied().unwrap_or(0);
                let lhs = nxy
                    .checked_mul(c.n)
                    .ok_or_else(|| Error::Overflow("independence check".into()))?;
                let rhs = nx
                    .checked_mul(ny)
                    .ok_or_else(|| Error::Overflow("independence check".into()))?;
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Exact independence of two column groups, `X _||_ Y | Z` with `X` and `Y`
/// sets, conditioned on the fixed assignment `cond`.
pub fn ci_exact_sets(
    p: &JointPmf,
    xs: &[usize],
    ys: &[usize],
    z: &[usize],
    cond: &[(usize, u16)],
) -> Result<bool> {
    type Tab = BTreeMap<Vec<u16>, u128>;
    let mut strata: BTreeMap<Vec<u16>, (u128, Tab, Tab, Tab)> = BTreeMap::new();
    for (k, w) in p.entries() {
        if !cond.iter().all(|&(c, v)| k[c] == v) {
            continue;
        }
        let pick = |cols: &[usize]| cols.iter().map(|&c| k[c]).collect::<Vec<u16>>();
        let (xv, yv) = (pick(xs), pick(ys));
        let e = strata.entry(pick(z)).or_default();
        e.0 += w;
        *e.1.entry(xv.clone()).or_insert(0) += w;
        *e.2.entry(yv.clone()).or_insert(0) += w;
        let mut xy = xv;
        xy.extend(yv);
        *e.3.entry(xy).or_insert(0) += w;
    }
    if strata.is_empty() {
        return Err(Error::ZeroProbability("conditioning event".into()));
    }
    for (n, px, py, pxy) in strata.values() {
        for (xv, nx) in px {
            for (yv, ny) in py {
                let mut key = xv.clone();
                key.extend_from_slice(yv);
                let nxy = pxy.get(&key).copied().unwrap_or(0);
                let lhs = nxy.checked_mul(*n).ok_or_else(|| Error::Overflow("independence check".into()))?;
                let rhs = nx.checked_mul(*ny).ok_or_else(|| Error::Overflow("independence check".into()))?;
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn exact_strata(p: &JointPmf, x: usize, y: usize, z: &[usize], cond: &[(usize, u16)]) -> Result<Strata> {
    if !cond.is_empty() && p.mass_idx(cond) == 0 {
        let text: Vec<String> = cond
            .iter()
            .map(|&(c, v)| format!("{}={}", p.scope()[c], p.domains()[c][v as usize]))
            .collect();
        return Err(Error::ZeroProbability(text.join(", ")));
    }
    Ok(Strata::collect(
        p.entries()
            .filter(|(k, _)| cond.iter().all(|&(c, v)| k[c] == v))
            .map(|(k, w)| (k[x], k[y], z.iter().map(|&c| k[c]).collect(), w)),
    ))
}

/// Conditional mutual information in nats (floating point; for reporting).
pub fn cmi_idx(p: &JointPmf, x: usize, y: usize, z: &[usize], cond: &[(usize, u16)]) -> Result<f64> {
    let strata = exact_strata(p, x, y, z, cond)?;
    let total: f64 = strata.cells.values().map(|c| c.n as f64).sum();
    let mut mi = 0.0;
    for c in strata.cells.values() {
        for (&(xv, yv), &nxy) in &c.xy {
            let nxy = nxy as f64;
            let ratio = nxy * c.n as f64 / (c.x[&xv] as f64 * c.y[&yv] as f64);
            mi += nxy / total * ratio.ln();
        }
    }
    Ok(mi.max(0.0))
}

fn resolve_query(
    scope: impl Fn(&str) -> Result<usize>,
    label: impl Fn(usize, &str) -> Result<u16>,
    q: &CiQuery,
) -> Result<(usize, usize, Vec<usize>, Vec<(usize, u16)>)> {
    q.validate()?;
    let x = scope(&q.x)?;
    let y = scope(&q.y)?;
    let z = q.z.iter().map(|v| scope(v)).collect::<Result<Vec<_>>>()?;
    let cond = match &q.regime {
        Some((ctx, r)) => {
            let c = scope(ctx)?;
            vec![(c, label(c, r)?)]
        }
        None => Vec::new(),
    };
    Ok((x, y, z, cond))
}

pub fn ci_exact(p: &JointPmf, q: &CiQuery) -> Result<CiVerdict> {
    let (x, y, z, cond) = resolve_query(|v| p.column(v), |c, l| p.label_index(c, l), q)?;
    let independent = ci_exact_idx(p, x, y, &z, &cond)?;
    let statistic = cmi_idx(p, x, y, &z, &cond)?;
    Ok(CiVerdict {
        independent,
        p_value: if independent { 1.0 } else { 0.0 },
        statistic,
        method: Method::Exact,
        df: 0,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTestOptions {
    /// Minimum average expected count per cell for a stratum to be used.
    pub min_expected: f64,
}

impl Default for GTestOptions {
    fn default() -> Self {
        GTestOptions { min_expected: 5.0 }
    }
}

/// Stratified G-test on column indices.
///
/// Within each stratum (value of `z`, restricted to `rows` when given) the
/// observed categories define a `kx x ky` table. A stratum contributes
/// `2 sum O ln(O/E)` with `(kx-1)(ky-1)` degrees of freedom. Strata with a
/// single observed category of x or y, or with fewer than
/// `min_expected * kx * ky` rows, are skipped. If no stratum contributes the
/// verdict is independent with `p = 1` and `degenerate = true`.
pub fn g_test_idx(
    data: &Dataset,
    x: usize,
    y: usize,
    z: &[usize],
    rows: Option<&[usize]>,
    alpha: f64,
    opts: GTestOptions,
) -> CiVerdict {
    let xs = data.values(x);
    let ys = data.values(y);
    let zs: Vec<&[u16]> = z.iter().map(|&c| data.values(c)).collect();
    let key = |i: usize| (xs[i], ys[i], zs.iter().map(|col| col[i]).collect::<Vec<u16>>(), 1u128);
    let strata = match rows {
        Some(r) => Strata::collect(r.iter().map(|&i| key(i))),
        None => Strata::collect((0..data.len()).map(key)),
    };
    let mut g = 0.0;
    let mut df = 0usize;
    for c in strata.cells.values() {
        let (kx, ky) = (c.x.len(), c.y.len());
        if kx < 2 || ky < 2 || (c.n as f64) < opts.min_expected * (kx * ky) as f64 {
            continue;
        }
        df += (kx - 1) * (ky - 1);
        let n = c.n as f64;
        for (&(xv, yv), &o) in &c.xy {
            let o = o as f64;
            let e = c.x[&xv] as f64 * c.y[&yv] as f64 / n;
            g += 2.0 * o * (o / e).ln();
        }
    }
    if df == 0 {
        return CiVerdict {
            independent: true,
            p_value: 1.0,
            statistic: 0.0,
            method: Method::GTest,
            df: 0,
            degenerate: true,
        };
    }
    let g = g.max(0.0);
    let p = ChiSquared::new(df as f64)
        .map(|d| d.sf(g))
        .unwrap_or(1.0)
        .clamp(0.0, 1.0);
    CiVerdict {
        independent: p >= alpha,
        p_value: p,
        statistic: g,
        method: Method::GTest,
        df,
        degenerate: false,
    }
}

pub fn g_test(data: &Dataset, q: &CiQuery, alpha: f64) -> Result<CiVerdict> {
    g_test_with(data, q, alpha, GTestOptions::default())
}

pub fn g_test_with(data: &Dataset, q: &CiQuery, alpha: f64, opts: GTestOptions) -> Result<CiVerdict> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidQuery(format!("alpha {alpha} is not in (0,1)")));
    }
    let (x, y, z, cond) = resolve_query(|v| data.column(v), |c, l| data.label_index(c, l), q)?;
    let mask = match cond.first() {
        Some(&(c, v)) => {
            let m = data.mask(c, v);
            if m.is_empty() {
                return Err(Error::Data(format!("no rows with {}", q.regime.as_ref().map(|(a, b)| format!("{a}={b}")).unwrap_or_default())));
            }
            Some(m)
        }
        None => None,
    };
    Ok(g_test_idx(data, x, y, &z, mask.as_deref(), alpha, opts))
}

/// CSV report of a query battery.
pub fn battery_csv(results: &[(CiQuery, CiVerdict)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query", "method", "statistic", "df", "p_value", "verdict", "degenerate"])
        .expect("in-memory write");
    for (q, v) in results {
        w.write_record([
            q.to_string(),
            v.method.to_string(),
            format!("{:.6}", v.statistic),
            v.df.to_string(),
            format!("{:.6}", v.p_value),
            if v.independent { "independent" } else { "dependent" }.to_string(),
            v.degenerate.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::get_example;
    use crate::exact::{draw_samples, joint_pmf};

    fn joint(name: &str) -> JointPmf {
        joint_pmf(&get_example(name).unwrap()).unwrap().0
    }

    #[test]
    fn intro_exact_verdicts() {
        let p = joint("intro");
        assert!(ci_exact(&p, &CiQuery::pooled("R", "Y", &["T"])).unwrap().independent);
        assert!(!ci_exact(&p, &CiQuery::pooled("R", "Y", &[])).unwrap().independent);
        assert!(ci_exact(&p, &CiQuery::in_regime("T", "Y", &[], "R", "0")).unwrap().independent);
        assert!(!ci_exact(&p, &CiQuery::in_regime("T", "Y", &[], "R", "1")).unwrap().independent);
    }

    #[test]
    fn non_markov_is_dependent_given_b0() {
        let p = joint("non-markov(1/3)");
        let v = ci_exact(&p, &CiQuery::in_regime("X", "Y", &[], "R", "b0")).unwrap();
        assert!(!v.independent);
        assert!(v.statistic > 0.0);
    }

    #[test]
    fn invalid_queries_are_rejected() {
        let p = joint("intro");
        assert!(ci_exact(&p, &CiQuery::pooled("T", "T", &[])).is_err());
        assert!(ci_exact(&p, &CiQuery::pooled("T", "Y", &["T"])).is_err());
        assert!(ci_exact(&p, &CiQuery::in_regime("R", "Y", &[], "R", "0")).is_err());
        assert!(matches!(
            ci_exact(&joint("p1-limit"), &CiQuery::in_regime("T", "Y", &[], "R", "1")),
            Err(Error::ZeroProbability(_))
        ));
    }

    #[test]
    fn g_test_on_intro_samples() {
        let d = draw_samples(&get_example("intro").unwrap(), 5000, 11).unwrap();
        let dep = g_test(&d, &CiQuery::in_regime("T", "Y", &[], "R", "1"), 0.05).unwrap();
        assert!(!dep.independent && dep.p_value < 1e-6);
        let gated = g_test(&d, &CiQuery::in_regime("T", "Y", &[], "R", "0"), 0.05).unwrap();
        assert!(gated.independent && gated.degenerate && gated.p_value == 1.0);
    }

    #[test]
    fn battery_has_header_and_rows() {
        let p = joint("intro");
        let q = CiQuery::pooled("R", "Y", &["T"]);
        let v = ci_exact(&p, &q).unwrap();
        let text = battery_csv(&[(q, v)]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "query,method,statistic,df,p_value,verdict,degenerate");
        assert!(lines.next().unwrap().contains("independent"));
    }
}

//! Bootstrap evidence for a physical mechanism change behind a link that
//! vanished in context `r0`.
//!
//! Under the null the mechanism `P(Y | X, Z)` is unchanged, so it can be
//! learned from rows outside `r0` and replayed on the `r0` distribution of
//! `(X, Z)`. If such synthetic datasets would usually show the dependence but
//! the real `r0` stratum does not, the vanishing is evidence of a change.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Dataset;
use crate::independence::{g_test_idx, GTestOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub k: usize,
    /// Rows per synthetic dataset; defaults to the size of the `r0` stratum.
    pub n: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
    pub min_power: f64,
    /// Learn the null mechanism from all rows instead of rows outside `r0`.
    pub pooled_null: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            k: 200,
            n: None,
            alpha: 0.05,
            seed: 0,
            min_power: 0.8,
            pooled_null: false,
        }
    }
}

impl TransferConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidQuery("K must be at least 1".into()));
        }
        if self.n == Some(0) {
            return Err(Error::InvalidQuery("N must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidQuery(format!("alpha {} is not in (0,1)", self.alpha)));
        }
        if !(self.min_power > 0.0 && self.min_power < 1.0) {
            return Err(Error::InvalidQuery(format!("min_power {} is not in (0,1)", self.min_power)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub p_value: f64,
    pub rejected: bool,
    pub unseen_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferVerdict {
    pub estimated_power_under_null: f64,
    pub observed_independent_in_r0: bool,
    pub observed_p_value: f64,
    pub evidence_physical: bool,
    pub n_per_dataset: usize,
    /// Draws whose `(x, z)` cell never occurred in the null training rows.
    pub unseen_cell_draws: usize,
    pub replicates: Vec<Replicate>,
}

/// Runs the bootstrap test for the link `x - y` given `z` at `context = r0`.
#[allow(clippy::too_many_arguments)]
pub fn transfer_evidence(
    data: &Dataset,
    x: &str,
    y: &str,
    z: &[String],
    context: &str,
    r0: &str,
    cfg: &TransferConfig,
) -> Result<TransferVerdict> {
    cfg.validate()?;
    let xc = data.column(x)?;
    let yc = data.column(y)?;
    let zc = z.iter().map(|v| data.column(v)).collect::<Result<Vec<_>>>()?;
    let rc = data.column(context)?;
    if [xc, yc].contains(&rc) || zc.contains(&rc) || xc == yc || zc.contains(&xc) || zc.contains(&yc) {
        return Err(Error::InvalidQuery(format!(
            "x, y, z and {context} must be distinct columns"
        )));
    }
    let r0v = data.label_index(rc, r0)?;
    let stratum = data.mask(rc, r0v);
    let rest: Vec<usize> = if cfg.pooled_null {
        (0..data.len()).collect()
    } else {
        (0..data.len()).filter(|&i| data.values(rc)[i] != r0v).collect()
    };
    if stratum.is_empty() {
        return Err(Error::Data(format!("no rows with {context}={r0}")));
    }
    if rest.is_empty() {
        return Err(Error::Data(format!("no rows with {context}!={r0}")));
    }

    let key = |i: usize| -> Vec<u16> {
        std::iter::once(data.values(xc)[i])
            .chain(zc.iter().map(|&c| data.values(c)[i]))
            .collect()
    };
    let mut null: HashMap<Vec<u16>, Vec<u16>> = HashMap::new();
    for &i in &rest {
        null.entry(key(i)).or_default().push(data.values(yc)[i]);
    }
    let xz: Vec<Vec<u16>> = stratum.iter().map(|&i| key(i)).collect();
    let y_card = data.domains()[yc].len() as u16;
    let n = cfg.n.unwrap_or(stratum.len());
    let opts = GTestOptions::default();

    let replicates: Vec<Replicate> = (0..cfg.k)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(index as u64);
            let mut cols: Vec<Vec<u16>> = vec![Vec::with_capacity(n); 2 + zc.len()];
            let mut unseen = 0;
            for _ in 0..n {
                let cell = &xz[rng.random_range(0..xz.len())];
                let yv = match null.get(cell) {
                    Some(ys) => ys[rng.random_range(0..ys.len())],
                    None => {
                        unseen += 1;
                        rng.random_range(0..y_card)
                    }
                };
                cols[0].push(cell[0]);
                cols[1].push(yv);
                for (j, &v) in cell[1..].iter().enumerate() {
                    cols[2 + j].push(v);
                }
            }
            let mut names = vec![x.to_string(), y.to_string()];
            names.extend(z.iter().cloned());
            let mut domains = vec![data.domains()[xc].clone(), data.domains()[yc].clone()];
            domains.extend(zc.iter().map(|&c| data.domains()[c].clone()));
            let synth = Dataset::new(names, domains, cols).expect("synthetic columns are consistent");
            let zs: Vec<usize> = (2..2 + zc.len()).collect();
            let v = g_test_idx(&synth, 0, 1, &zs, None, cfg.alpha, opts);
            Replicate {
                index,
                p_value: v.p_value,
                rejected: !v.independent,
                unseen_cells: unseen,
            }
        })
        .collect();

    let power = replicates.iter().filter(|r| r.rejected).count() as f64 / cfg.k as f64;
    let observed = g_test_idx(data, xc, yc, &zc, Some(&stratum), cfg.alpha, opts);
    Ok(TransferVerdict {
        estimated_power_under_null: power,
        observed_independent_in_r0: observed.independent,
        observed_p_value: observed.p_value,
        evidence_physical: observed.independent && power >= cfg.min_power,
        n_per_dataset: n,
        unseen_cell_draws: replicates.iter().map(|r| r.unseen_cells).sum(),
        replicates,
    })
}

impl TransferVerdict {
    pub fn replicates_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["replicate", "p_value", "rejected", "unseen_cells"])
            .expect("in-memory write");
        for r in &self.replicates {
            w.write_record([
                r.index.to_string(),
                format!("{:.6}", r.p_value),
                r.rejected.to_string(),
                r.unseen_cells.to_string(),
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
    use crate::exact::draw_samples;

    fn run(name: &str, seed: u64, k: usize) -> TransferVerdict {
        let d = draw_samples(&get_example(name).unwrap(), 4000, seed).unwrap();
        let cfg = TransferConfig { k, seed, ..Default::default() };
        transfer_evidence(&d, "X", "Y", &[], "C", "0", &cfg).unwrap()
    }

    #[test]
    fn change_with_overlap_is_detected() {
        let v = run("fig1-change-overlap", 7, 50);
        assert!(v.evidence_physical, "{v:?}");
        assert!(v.estimated_power_under_null >= 0.9);
    }

    #[test]
    fn gated_support_gives_no_evidence() {
        let v = run("fig1-nochange-gated", 7, 50);
        assert!(!v.evidence_physical);
        assert!(v.estimated_power_under_null < 0.5);
    }

    #[test]
    fn replicates_are_reproducible() {
        let a = run("fig1-nochange-overlap", 3, 20);
        let b = run("fig1-nochange-overlap", 3, 20);
        assert_eq!(a, b);
        assert_eq!(a.replicates_csv().lines().count(), 21);
    }

    #[test]
    fn empty_strata_are_errors() {
        let d = draw_samples(&get_example("p1-limit").unwrap(), 100, 1).unwrap();
        let cfg = TransferConfig::default();
        assert!(transfer_evidence(&d, "T", "Y", &[], "R", "0", &cfg).is_err());
        assert!(transfer_evidence(&d, "T", "Y", &[], "R", "1", &cfg).is_err());
    }
}

//! Ground truth and test inputs: the brute-force oracle, planted instance
//! generators, the Cartesian sampling concentration check and the
//! signal/background score estimator used to calibrate explicit parameters.

mod concentration;
mod separation;

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use concentration::{
    cartesian_bounds, check_cartesian_concentration, nearest_feasible_balance, ConcentrationReport,
};
pub use separation::{estimate_signal_separation, SeparationReport};

use crate::boolmat::{inner_product_unchecked, BooleanMatrix};
use crate::corrjoin::OutlierPair;
use crate::error::{Error, Result};
use crate::numeric::{floor_tol, ip_threshold};
use crate::rng;

const REPAIR_ROUNDS: usize = 64;

fn check_same_d(a: &BooleanMatrix, b: &BooleanMatrix) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            left: a.d(),
            right: b.d(),
        });
    }
    Ok(())
}

/// All cross pairs with `|ip| >= fraction * d`, sorted.
pub fn brute_force_pairs(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    fraction: f64,
) -> Result<Vec<OutlierPair>> {
    check_same_d(a, b)?;
    let threshold = ip_threshold(fraction, a.d());
    Ok(scan(a, b, |ip| ip.abs() >= threshold, false))
}

/// All pairs `j1 < j2` of distinct columns with `|ip| >= fraction * d`.
pub fn brute_force_monochromatic(data: &BooleanMatrix, fraction: f64) -> Vec<OutlierPair> {
    let threshold = ip_threshold(fraction, data.d());
    scan(data, data, |ip| ip.abs() >= threshold, true)
}

fn scan(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    keep: impl Fn(i64) -> bool + Sync,
    upper: bool,
) -> Vec<OutlierPair> {
    (0..a.n())
        .into_par_iter()
        .flat_map_iter(|j1| {
            let start = if upper { j1 + 1 } else { 0 };
            let x = a.column(j1);
            let keep = &keep;
            (start..b.n()).filter_map(move |j2| {
                let ip = inner_product_unchecked(x, b.column(j2));
                keep(ip).then_some(OutlierPair { j1, j2, ip })
            })
        })
        .collect()
}

/// Pairs whose absolute inner product strictly exceeds `tau * d`.
fn above_tau(
    a: &BooleanMatrix,
    b: &BooleanMatrix,
    tau: f64,
    monochromatic: bool,
) -> Vec<OutlierPair> {
    let limit = tau * a.d() as f64;
    scan(a, b, |ip| ip.abs() as f64 > limit, monochromatic)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub j1: usize,
    pub j2: usize,
    pub ip: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub a: BooleanMatrix,
    /// Equal to `a` for monochromatic instances.
    pub b: BooleanMatrix,
    pub monochromatic: bool,
    pub planted: Vec<PlantedPair>,
    pub rho: f64,
    pub tau: Option<f64>,
    /// Pairs above `tau * d` (or `rho * d` without `tau`), counted by the oracle.
    pub q_observed: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Everything about an instance except the matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSidecar {
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub monochromatic: bool,
    pub rho: f64,
    pub tau: Option<f64>,
    pub planted: Vec<PlantedPair>,
    pub q_observed: usize,
    pub seed: u64,
}

impl PlantedInstance {
    pub fn sidecar(&self, kind: &str) -> InstanceSidecar {
        InstanceSidecar {
            kind: kind.to_string(),
            n: self.a.n(),
            d: self.a.d(),
            monochromatic: self.monochromatic,
            rho: self.rho,
            tau: self.tau,
            planted: self.planted.clone(),
            q_observed: self.q_observed,
            seed: self.seed,
        }
    }
}

/// Number of coordinates flipped to plant a pair at correlation `rho`.
pub fn planted_flips(d: usize, rho: f64) -> usize {
    floor_tol((1.0 - rho) * d as f64 / 2.0) as usize
}

/// Smallest `d` for which the planted pair is advised to be the unique
/// outlier, `5 rho^-2 ln n`.
pub fn advised_dimension(n: usize, rho: f64) -> f64 {
    5.0 * (n as f64).ln() / (rho * rho)
}

fn plant_copy<R: Rng + ?Sized>(
    dst: &mut BooleanMatrix,
    j: usize,
    src: &BooleanMatrix,
    src_j: usize,
    flips: usize,
    rng: &mut R,
) {
    dst.copy_column_from(j, src, src_j);
    for i in sample(rng, src.d(), flips) {
        dst.flip(i, j);
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "rho = {rho} must lie in (0, 1]"
        )))
    }
}

/// `n` uniform columns, one of which is replaced by a copy of another with
/// `floor((1 - rho) d / 2)` flipped coordinates.
pub fn gen_lightbulb(n: usize, d: usize, rho: f64, seed: u64) -> Result<PlantedInstance> {
    check_rho(rho)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let mut data = BooleanMatrix::random(d, n, &mut rng::stream(seed, &[0]))?;
    let mut r = rng::stream(seed, &[1]);
    let picks = sample(&mut r, n, 2);
    let (src, dst) = (picks.index(0), picks.index(1));
    let flips = planted_flips(d, rho);
    let source = data.clone();
    plant_copy(&mut data, dst, &source, src, flips, &mut r);
    let ip = inner_product_unchecked(data.column(src), data.column(dst));
    debug_assert_eq!(ip, d as i64 - 2 * flips as i64);
    if (ip as f64) < rho * d as f64 * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "planted inner product {ip} is below rho * d"
        )));
    }
    let mut warnings = Vec::new();
    if (d as f64) < advised_dimension(n, rho) {
        warnings.push(format!(
            "d = {d} is below 5 rho^-2 ln n = {:.1}; the planted pair may not be unique",
            advised_dimension(n, rho)
        ));
    }
    let q_observed = brute_force_monochromatic(&data, rho).len();
    Ok(PlantedInstance {
        b: data.clone(),
        a: data,
        monochromatic: true,
        planted: vec![PlantedPair {
            j1: src.min(dst),
            j2: src.max(dst),
            ip,
        }],
        rho,
        tau: None,
        q_observed,
        seed,
        warnings,
    })
}

/// Bichromatic instance with `n_outliers` planted pairs and every other
/// pair at most `tau * d` in absolute value.
///
/// Background pairs above `tau * d` are repaired by redrawing one of their
/// columns (a non-planted one when possible, otherwise the whole planted
/// pair) for a bounded number of rounds; the result passes a final audit.
pub fn gen_promise_instance(
    n: usize,
    d: usize,
    rho: f64,
    tau: f64,
    n_outliers: usize,
    seed: u64,
) -> Result<PlantedInstance> {
    check_rho(rho)?;
    if !(tau > 0.0 && tau < rho) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < tau < rho, got tau = {tau}"
        )));
    }
    if n_outliers > n {
        return Err(Error::InvalidParameter(format!(
            "{n_outliers} outliers do not fit in {n} columns"
        )));
    }
    let flips = planted_flips(d, rho);
    if (d as f64 - 2.0 * flips as f64) <= tau * d as f64 {
        return Err(Error::Infeasible(
            "planted pairs would not exceed tau * d".into(),
        ));
    }
    let mut a = BooleanMatrix::random(d, n, &mut rng::stream(seed, &[0]))?;
    let mut b = BooleanMatrix::random(d, n, &mut rng::stream(seed, &[1]))?;
    let mut r = rng::stream(seed, &[2]);
    let lefts: Vec<usize> = sample(&mut r, n, n_outliers).into_vec();
    let rights: Vec<usize> = sample(&mut r, n, n_outliers).into_vec();
    for (&j1, &j2) in lefts.iter().zip(&rights) {
        plant_copy(&mut b, j2, &a, j1, flips, &mut r);
    }
    let planted_set: BTreeSet<(usize, usize)> =
        lefts.iter().copied().zip(rights.iter().copied()).collect();
    let pair_of_left = |j: usize| lefts.iter().position(|&x| x == j);
    let pair_of_right = |j: usize| rights.iter().position(|&x| x == j);

    for round in 0..REPAIR_ROUNDS {
        let offending: Vec<OutlierPair> = above_tau(&a, &b, tau, false)
            .into_iter()
            .filter(|p| !planted_set.contains(&(p.j1, p.j2)))
            .collect();
        if offending.is_empty() {
            let planted = lefts
                .iter()
                .zip(&rights)
                .map(|(&j1, &j2)| PlantedPair {
                    j1,
                    j2,
                    ip: inner_product_unchecked(a.column(j1), b.column(j2)),
                })
                .collect::<Vec<_>>();
            let q_observed = above_tau(&a, &b, tau, false).len();
            if q_observed != n_outliers
                || planted
                    .iter()
                    .any(|p| (p.ip as f64) < rho * d as f64 * (1.0 - 1e-12))
            {
                return Err(Error::Infeasible("promise audit failed".into()));
            }
            let mut sorted = planted;
            sorted.sort_by_key(|p| (p.j1, p.j2));
            return Ok(PlantedInstance {
                a,
                b,
                monochromatic: false,
                planted: sorted,
                rho,
                tau: Some(tau),
                q_observed,
                seed,
                warnings: Vec::new(),
            });
        }
        let mut r = rng::stream(seed, &[3, round as u64]);
        let mut redrawn_b = BTreeSet::new();
        let mut redrawn_a = BTreeSet::new();
        let mut replant = BTreeSet::new();
        for p in offending {
            if redrawn_a.contains(&p.j1) || redrawn_b.contains(&p.j2) {
                continue;
            }
            match (pair_of_left(p.j1), pair_of_right(p.j2)) {
                (_, None) => {
                    redrawn_b.insert(p.j2);
                }
                (None, Some(_)) => {
                    redrawn_a.insert(p.j1);
                }
                (Some(k), Some(_)) => {
                    replant.insert(k);
                }
            }
        }
        for &j in &redrawn_b {
            b.randomize_column(j, &mut r);
        }
        for &j in &redrawn_a {
            a.randomize_column(j, &mut r);
        }
        for &k in &replant {
            a.randomize_column(lefts[k], &mut r);
            let src = a.clone();
            plant_copy(&mut b, rights[k], &src, lefts[k], flips, &mut r);
        }
    }
    Err(Error::RetriesExhausted {
        rounds: REPAIR_ROUNDS,
        reason: format!(
            "background pairs above tau * d = {} persist; increase d or tau",
            tau * d as f64
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_pairs(a: &BooleanMatrix, b: &BooleanMatrix, fraction: f64) -> Vec<OutlierPair> {
        let mut out = Vec::new();
        for j1 in 0..a.n() {
            let x = a.dense_column(j1);
            for j2 in 0..b.n() {
                let y = b.dense_column(j2);
                let ip: i64 = x.iter().zip(&y).map(|(&u, &v)| (u * v) as i64).sum();
                if ip.abs() as f64 >= fraction * a.d() as f64 - 1e-9 {
                    out.push(OutlierPair { j1, j2, ip });
                }
            }
        }
        out
    }

    #[test]
    fn oracle_basics() {
        let m = BooleanMatrix::random(32, 1, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(
            brute_force_pairs(&m, &m, 1.0).unwrap(),
            vec![OutlierPair {
                j1: 0,
                j2: 0,
                ip: 32
            }]
        );
        let o = BooleanMatrix::from_columns(&[vec![1, 1, 1, 1], vec![1, -1, 1, -1]]).unwrap();
        assert!(brute_force_pairs(
            &o.select_columns(&[0]).unwrap(),
            &o.select_columns(&[1]).unwrap(),
            0.1
        )
        .unwrap()
        .is_empty());
    }

    #[test]
    fn oracle_matches_independent_scan_and_is_symmetric() {
        let a = BooleanMatrix::random(40, 64, &mut rng::stream(2, &[])).unwrap();
        let b = BooleanMatrix::random(40, 64, &mut rng::stream(3, &[])).unwrap();
        let got = brute_force_pairs(&a, &b, 0.5).unwrap();
        assert_eq!(got, naive_pairs(&a, &b, 0.5));
        let mut swapped: Vec<OutlierPair> = brute_force_pairs(&b, &a, 0.5)
            .unwrap()
            .into_iter()
            .map(|p| OutlierPair {
                j1: p.j2,
                j2: p.j1,
                ip: p.ip,
            })
            .collect();
        swapped.sort();
        assert_eq!(swapped, got);
    }

    #[test]
    fn lightbulb_flip_arithmetic() {
        let inst = gen_lightbulb(10, 100, 0.5, 4).unwrap();
        assert_eq!(inst.planted[0].ip, 50);
        let inst = gen_lightbulb(10, 64, 1.0, 4).unwrap();
        let p = &inst.planted[0];
        assert_eq!(p.ip, 64);
        assert_eq!(inst.a.dense_column(p.j1), inst.a.dense_column(p.j2));
        assert!(inst.warnings.is_empty());
        assert!(!gen_lightbulb(10, 16, 0.5, 4).unwrap().warnings.is_empty());
    }

    #[test]
    fn lightbulb_pair_is_unique_outlier() {
        for seed in 0..5 {
            let inst = gen_lightbulb(256, 512, 0.4, seed).unwrap();
            let p = &inst.planted[0];
            assert_eq!(p.ip, 512 - 2 * 153);
            let found = brute_force_monochromatic(&inst.a, 0.4);
            assert_eq!(
                found,
                vec![OutlierPair {
                    j1: p.j1,
                    j2: p.j2,
                    ip: p.ip
                }]
            );
            assert_eq!(inst.q_observed, 1);
        }
    }

    #[test]
    fn promise_instances() {
        let inst = gen_promise_instance(64, 1024, 0.5, 0.2, 0, 1).unwrap();
        assert!(brute_force_pairs(&inst.a, &inst.b, 0.2).unwrap().is_empty());
        let inst = gen_promise_instance(64, 512, 0.5, 0.25, 3, 2).unwrap();
        let found = brute_force_pairs(&inst.a, &inst.b, 0.5).unwrap();
        assert_eq!(found.len(), 3);
        for (f, p) in found.iter().zip(&inst.planted) {
            assert_eq!((f.j1, f.j2, f.ip), (p.j1, p.j2, p.ip));
        }
        assert_eq!(inst.q_observed, 3);
        assert!(above_tau(&inst.a, &inst.b, 0.25, false).len() == 3);
    }

    #[test]
    fn promise_generator_gives_up() {
        assert!(matches!(
            gen_promise_instance(64, 256, 0.5, 0.02, 1, 3),
            Err(Error::RetriesExhausted { .. })
        ));
    }
}

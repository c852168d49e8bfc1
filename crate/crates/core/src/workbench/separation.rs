use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{above_tau, PlantedInstance};
use crate::corrjoin::{compress, detection_scores, setup_iteration};
use crate::error::Result;
use crate::matmul::GemmConfig;
use crate::params::Parameters;
use crate::rng;

/// Compressed scores of block pairs holding a planted pair versus block
/// pairs holding no pair above the background threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub trials: usize,
    pub threshold: f64,
    /// `|score|` of the block pair of every planted pair in every trial.
    pub planted_scores: Vec<i64>,
    /// Largest background `|score|` per trial.
    pub background_max: Vec<i64>,
    /// Fraction of planted scores at or above the threshold.
    pub planted_hit_rate: f64,
    /// Fraction of trials whose background maximum reaches the threshold.
    pub background_alarm_rate: f64,
}

impl SeparationReport {
    fn median(v: &[i64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let mut w = v.to_vec();
        w.sort_unstable();
        w[w.len() / 2] as f64
    }

    pub fn median_planted(&self) -> f64 {
        Self::median(&self.planted_scores)
    }

    pub fn median_background_max(&self) -> f64 {
        Self::median(&self.background_max)
    }

    /// Median planted score over median background maximum.
    pub fn ratio(&self) -> f64 {
        self.median_planted() / self.median_background_max().max(1.0)
    }
}

/// Run setup, compression and the detection product `trials` times and
/// collect score statistics. Background block pairs are those with no pair
/// above `tau * d` (`rho * d` when the instance has no `tau`).
pub fn estimate_signal_separation(
    inst: &PlantedInstance,
    params: &Parameters,
    trials: usize,
    seed: u64,
) -> Result<SeparationReport> {
    params.validate()?;
    let t = params.t;
    let n_padded = inst.a.n().max(inst.b.n()).div_ceil(t) * t;
    let (a, b) = (inst.a.pad_to(n_padded), inst.b.pad_to(n_padded));
    let hot_pairs = above_tau(&inst.a, &inst.b, inst.tau.unwrap_or(inst.rho), false);
    let threshold = params.marking_threshold();
    let mut planted_scores = Vec::new();
    let mut background_max = Vec::with_capacity(trials);
    for trial in 0..trials {
        let plan = setup_iteration(n_padded, a.d(), params, rng::derive(seed, &[trial as u64]))?;
        let mut block_of = vec![0usize; n_padded];
        for k in 0..plan.num_blocks() {
            for &j in plan.block(k) {
                block_of[j] = k;
            }
        }
        let scores = detection_scores(
            &compress(&a, &plan, &plan.alpha)?,
            &compress(&b, &plan, &plan.beta)?,
            &GemmConfig::default(),
        )?;
        let hot: HashSet<(usize, usize)> = hot_pairs
            .iter()
            .map(|p| (block_of[p.j1], block_of[p.j2]))
            .collect();
        for p in &inst.planted {
            planted_scores.push(scores.get(block_of[p.j1], block_of[p.j2]).abs());
            if inst.monochromatic {
                planted_scores.push(scores.get(block_of[p.j2], block_of[p.j1]).abs());
            }
        }
        let mut worst = 0i64;
        for k1 in 0..scores.rows() {
            for (k2, &v) in scores.row(k1).iter().enumerate() {
                if !hot.contains(&(k1, k2)) {
                    worst = worst.max(v.abs());
                }
            }
        }
        background_max.push(worst);
    }
    let hits = planted_scores
        .iter()
        .filter(|&&v| v as f64 >= threshold)
        .count();
    let alarms = background_max
        .iter()
        .filter(|&&v| v as f64 >= threshold)
        .count();
    Ok(SeparationReport {
        trials,
        threshold,
        planted_hit_rate: hits as f64 / planted_scores.len().max(1) as f64,
        background_alarm_rate: alarms as f64 / trials.max(1) as f64,
        planted_scores,
        background_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbench::{gen_lightbulb, gen_promise_instance};

    #[test]
    fn duplicate_with_unit_blocks_scores_s() {
        let inst = gen_lightbulb(32, 256, 1.0, 3).unwrap();
        let params = Parameters::explicit(0.9, 0.3, 1, 2, 400, 1).unwrap();
        let r = estimate_signal_separation(&inst, &params, 3, 1).unwrap();
        assert!(r.planted_scores.iter().all(|&v| v == 400));
        assert_eq!(r.planted_hit_rate, 1.0);
    }

    #[test]
    fn background_stays_below_threshold() {
        let inst = gen_promise_instance(32, 1024, 0.9, 0.125, 0, 5).unwrap();
        let params = Parameters::explicit(0.9, 0.125, 1, 4, 72_900, 1).unwrap();
        let r = estimate_signal_separation(&inst, &params, 20, 2).unwrap();
        assert!(r.planted_scores.is_empty());
        assert!(r.background_alarm_rate <= 0.05, "{r:?}");
    }

    #[test]
    fn higher_power_separates_better() {
        // Sample size follows tau^(-2p), so the ratio grows like (rho/tau)^p.
        let inst = gen_promise_instance(128, 1024, 0.5, 0.25, 2, 6).unwrap();
        let run = |p: u32| {
            let s = crate::params::derive_sample_size(0.25, p).unwrap();
            let params = Parameters::explicit(0.5, 0.25, 8, p, s, 1).unwrap();
            estimate_signal_separation(&inst, &params, 10, 4).unwrap()
        };
        let (r2, r4) = (run(2), run(4));
        assert!(r4.ratio() > r2.ratio(), "{} vs {}", r4.ratio(), r2.ratio());
    }
}

use std::collections::BTreeSet;

use super::{search, OutlierPair, SearchOptions, SearchReport};
use crate::boolmat::BooleanMatrix;
use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::rng;

const MONO_TAG: u64 = 0x6d6f_6e6f;

/// One bichromatic instance: columns whose index has bit `bit` clear go to
/// `a`, the rest to `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonoInstance {
    pub bit: usize,
    pub a: BooleanMatrix,
    pub b: BooleanMatrix,
    pub a_index: Vec<usize>,
    pub b_index: Vec<usize>,
}

/// `ceil(log2 n)` instances; every pair of distinct columns is split by at
/// least one of them.
pub fn reduce_monochromatic(data: &BooleanMatrix) -> Result<Vec<MonoInstance>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 columns, got {n}"
        )));
    }
    let bits = (usize::BITS - (n - 1).leading_zeros()) as usize;
    (0..bits)
        .map(|bit| {
            let (b_index, a_index): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|j| j >> bit & 1 == 1);
            Ok(MonoInstance {
                bit,
                a: data.select_columns(&a_index)?,
                b: data.select_columns(&b_index)?,
                a_index,
                b_index,
            })
        })
        .collect()
}

/// Search all pairs of distinct columns of `data`. Reported pairs have
/// `j1 < j2`; marks are summed over the instances per iteration.
pub fn search_monochromatic(
    data: &BooleanMatrix,
    params: &Parameters,
    seed: u64,
    opts: &SearchOptions,
) -> Result<SearchReport> {
    let mut pairs = BTreeSet::new();
    let mut marks = vec![0usize; params.iterations];
    let mut n_padded = 0;
    for inst in reduce_monochromatic(data)? {
        let report = search(
            &inst.a,
            &inst.b,
            params,
            rng::derive(seed, &[MONO_TAG, inst.bit as u64]),
            opts,
        )?;
        n_padded = n_padded.max(report.n_padded);
        for (total, m) in marks.iter_mut().zip(&report.marks_per_iteration) {
            *total += m;
        }
        pairs.extend(report.pairs.iter().map(|p| {
            let (x, y) = (inst.a_index[p.j1], inst.b_index[p.j2]);
            OutlierPair {
                j1: x.min(y),
                j2: x.max(y),
                ip: p.ip,
            }
        }));
    }
    Ok(SearchReport {
        pairs: pairs.into_iter().collect(),
        marks_per_iteration: marks,
        n_padded,
        seed,
    })
}

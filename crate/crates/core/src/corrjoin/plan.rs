use rand::seq::SliceRandom;
use rand::Rng;

use crate::boolmat::IndexTuple;
use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::rng;

const PHASE_PARTITION: u64 = 0;
const PHASE_LEFT: u64 = 1;
const PHASE_RIGHT: u64 = 2;
const PHASE_ALPHA: u64 = 3;
const PHASE_BETA: u64 = 4;

/// Randomness for one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationPlan {
    pub n_padded: usize,
    pub d: usize,
    pub t: usize,
    /// A random permutation of `0..n_padded`; block `k` is `order[k*t..(k+1)*t]`.
    pub order: Vec<usize>,
    /// `I_1`: `sqrt(s)` tuples of length `p/2`.
    pub left: Vec<IndexTuple>,
    /// `I_2`: `sqrt(s)` tuples of length `p/2`.
    pub right: Vec<IndexTuple>,
    /// Signs applied to the columns of `A`, indexed by column.
    pub alpha: Vec<i8>,
    /// Signs applied to the columns of `B`, indexed by column.
    pub beta: Vec<i8>,
    pub seed: u64,
}

impl IterationPlan {
    pub fn num_blocks(&self) -> usize {
        self.n_padded / self.t
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.order[k * self.t..(k + 1) * self.t]
    }

    /// Row index of `(i1, i2)` in `I = I_1 x I_2`.
    pub fn sample_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.right.len() + i2
    }

    /// The full tuple for sample row `i`.
    pub fn sample_tuple(&self, i: usize) -> IndexTuple {
        let r = self.right.len();
        self.left[i / r].concat(&self.right[i % r])
    }
}

fn draw_tuples(count: usize, len: usize, d: usize, rng: &mut rng::Rng) -> Vec<IndexTuple> {
    (0..count)
        .map(|_| {
            let idx = (0..len).map(|_| rng.gen_range(0..d)).collect();
            IndexTuple::new(idx, d).expect("indices drawn in range")
        })
        .collect()
}

fn draw_signs(n: usize, rng: &mut rng::Rng) -> Vec<i8> {
    (0..n)
        .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
        .collect()
}

pub fn setup_iteration(
    n_padded: usize,
    d: usize,
    params: &Parameters,
    seed: u64,
) -> Result<IterationPlan> {
    params.validate()?;
    let t = params.t;
    if n_padded == 0 || !n_padded.is_multiple_of(t) {
        return Err(Error::Divisibility { n: n_padded, t });
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n_padded).collect();
    order.shuffle(&mut rng::stream(seed, &[PHASE_PARTITION]));
    let half = params.p as usize / 2;
    let root = params.sqrt_s();
    Ok(IterationPlan {
        n_padded,
        d,
        t,
        order,
        left: draw_tuples(root, half, d, &mut rng::stream(seed, &[PHASE_LEFT])),
        right: draw_tuples(root, half, d, &mut rng::stream(seed, &[PHASE_RIGHT])),
        alpha: draw_signs(n_padded, &mut rng::stream(seed, &[PHASE_ALPHA])),
        beta: draw_signs(n_padded, &mut rng::stream(seed, &[PHASE_BETA])),
        seed,
    })
}

use rayon::prelude::*;

use super::plan::IterationPlan;
use crate::boolmat::{words_for, BooleanMatrix, WORD_BITS};
use crate::error::{Error, Result};
use crate::matmul::{gemm_pm1_nt, IntMatrix, SignMatrix};

/// `s x (n/t)` matrix of signed block aggregates.
///
/// Stored transposed: row `k` of [`CompressedMatrix::transposed`] holds the
/// `s` sampled coordinates of block `k`, in the order of
/// [`IterationPlan::sample_index`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedMatrix {
    transposed: IntMatrix,
    plan_seed: u64,
}

impl CompressedMatrix {
    /// `s`.
    pub fn rows(&self) -> usize {
        self.transposed.cols()
    }

    /// `n/t`.
    pub fn cols(&self) -> usize {
        self.transposed.rows()
    }

    pub fn get(&self, i: usize, k: usize) -> i64 {
        self.transposed.get(k, i)
    }

    pub fn plan_seed(&self) -> u64 {
        self.plan_seed
    }

    /// The `(n/t) x s` transpose.
    pub fn transposed(&self) -> &IntMatrix {
        &self.transposed
    }

    pub fn to_matrix(&self) -> IntMatrix {
        self.transposed.transpose()
    }
}

/// Bit `pos` of row `i` is the sign bit of entry `i` of column `order[pos]`.
struct PermutedRows {
    words: usize,
    rows: Vec<u64>,
    present: Vec<u64>,
}

impl PermutedRows {
    fn build(m: &BooleanMatrix, order: &[usize]) -> Self {
        let words = words_for(order.len());
        let mut rows = vec![0u64; m.d() * words];
        let mut present = vec![0u64; words];
        for (pos, &j) in order.iter().enumerate() {
            let c = m.column(j);
            if !c.is_present() {
                continue;
            }
            let (pw, pb) = (pos / WORD_BITS, 1u64 << (pos % WORD_BITS));
            present[pw] |= pb;
            for (w, &word) in c.sign_words().iter().enumerate() {
                let mut x = word;
                while x != 0 {
                    let i = w * WORD_BITS + x.trailing_zeros() as usize;
                    rows[i * words + pw] |= pb;
                    x &= x - 1;
                }
            }
        }
        Self {
            words,
            rows,
            present,
        }
    }

    /// Sign bits of the tensor coordinate `indices` across all columns.
    fn tensor_row(&self, indices: &[usize]) -> Vec<u64> {
        let mut out = vec![0u64; self.words];
        for &i in indices {
            for (o, r) in out
                .iter_mut()
                .zip(&self.rows[i * self.words..(i + 1) * self.words])
            {
                *o ^= r;
            }
        }
        out
    }
}

/// Copy bits `start..start + len` of `src` into `dst` starting at bit 0.
fn extract_bits(src: &[u64], start: usize, len: usize, dst: &mut [u64]) {
    let (w0, shift) = (start / WORD_BITS, start % WORD_BITS);
    for (k, out) in dst.iter_mut().enumerate() {
        let lo = src.get(w0 + k).copied().unwrap_or(0) >> shift;
        let hi = if shift == 0 {
            0
        } else {
            src.get(w0 + k + 1).copied().unwrap_or(0) << (WORD_BITS - shift)
        };
        *out = lo | hi;
    }
    let rem = len % WORD_BITS;
    if rem != 0 {
        if let Some(last) = dst.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// Compress `m` under `plan`, applying `signs[j]` to column `j` on the left
/// factor of each block.
pub fn compress(m: &BooleanMatrix, plan: &IterationPlan, signs: &[i8]) -> Result<CompressedMatrix> {
    if m.d() != plan.d {
        return Err(Error::DimensionMismatch {
            left: m.d(),
            right: plan.d,
        });
    }
    if m.n_padded() != plan.n_padded || signs.len() != plan.n_padded {
        return Err(Error::DimensionMismatch {
            left: m.n_padded(),
            right: plan.n_padded,
        });
    }
    let rows = PermutedRows::build(m, &plan.order);
    let mut negated = vec![0u64; rows.words];
    for (pos, &j) in plan.order.iter().enumerate() {
        if signs[j] < 0 {
            negated[pos / WORD_BITS] |= 1 << (pos % WORD_BITS);
        }
    }
    let left: Vec<Vec<u64>> = plan
        .left
        .iter()
        .map(|tup| {
            let mut r = rows.tensor_row(tup.indices());
            r.iter_mut().zip(&negated).for_each(|(a, b)| *a ^= b);
            r
        })
        .collect();
    let right: Vec<Vec<u64>> = plan
        .right
        .iter()
        .map(|tup| rows.tensor_row(tup.indices()))
        .collect();

    let t = plan.t;
    let tw = words_for(t);
    let s = left.len() * right.len();
    let blocks: Vec<Vec<i64>> = (0..plan.num_blocks())
        .into_par_iter()
        .map(|k| {
            let mut present = vec![0u64; tw];
            extract_bits(&rows.present, k * t, t, &mut present);
            let factor = |src: &[Vec<u64>]| {
                let mut sign = vec![0u64; src.len() * tw];
                for (r, dst) in src.iter().zip(sign.chunks_mut(tw)) {
                    extract_bits(r, k * t, t, dst);
                }
                SignMatrix::from_planes(src.len(), t, sign, present.repeat(src.len()))
            };
            let product =
                gemm_pm1_nt(&factor(&left), &factor(&right)).expect("factor shapes agree");
            product.data().to_vec()
        })
        .collect();
    let data: Vec<i64> = blocks.concat();
    debug_assert_eq!(data.len(), plan.num_blocks() * s);
    let transposed = IntMatrix::from_vec(plan.num_blocks(), s, data)?;
    debug_assert!(transposed.bound() <= t as i64);
    Ok(CompressedMatrix {
        transposed,
        plan_seed: plan.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolmat::tensor_entry;
    use crate::corrjoin::plan::setup_iteration;
    use crate::params::Parameters;
    use crate::rng;

    fn direct(m: &BooleanMatrix, plan: &IterationPlan, signs: &[i8]) -> Vec<Vec<i64>> {
        let s = plan.left.len() * plan.right.len();
        (0..s)
            .map(|i| {
                let tup = plan.sample_tuple(i);
                (0..plan.num_blocks())
                    .map(|k| {
                        plan.block(k)
                            .iter()
                            .map(|&j| {
                                signs[j] as i64 * tensor_entry(m.column(j), &tup).unwrap() as i64
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn extract_across_words() {
        let src = [0xf0f0_0000_0000_0001u64, 0b1011];
        let mut dst = [0u64; 1];
        extract_bits(&src, 60, 8, &mut dst);
        assert_eq!(dst[0], 0b1011_1111);
        extract_bits(&src, 0, 1, &mut dst);
        assert_eq!(dst[0], 1);
    }

    #[test]
    fn single_column_blocks() {
        let m = BooleanMatrix::random(6, 5, &mut rng::stream(1, &[])).unwrap();
        let params = Parameters::explicit(0.5, 0.25, 1, 2, 9, 1).unwrap();
        let plan = setup_iteration(5, 6, &params, 3).unwrap();
        let c = compress(&m, &plan, &plan.alpha).unwrap();
        for k in 0..5 {
            let j = plan.block(k)[0];
            for i in 0..9 {
                let want =
                    plan.alpha[j] * tensor_entry(m.column(j), &plan.sample_tuple(i)).unwrap();
                assert_eq!(c.get(i, k), want as i64);
            }
        }
    }

    #[test]
    fn identical_columns_with_unit_signs() {
        let params = Parameters::explicit(0.5, 0.25, 4, 4, 16, 1).unwrap();
        let plan = setup_iteration(8, 7, &params, 5).unwrap();
        let ones = BooleanMatrix::from_fn(7, 8, |_, _| false).unwrap();
        let c = compress(&ones, &plan, &[1; 8]).unwrap();
        assert!(c.to_matrix().data().iter().all(|&v| v == 4));
        let same = BooleanMatrix::from_fn(7, 8, |i, _| i % 3 == 0).unwrap();
        let c = compress(&same, &plan, &[1; 8]).unwrap();
        assert!(c.to_matrix().data().iter().all(|&v| v.abs() == 4));
    }

    #[test]
    fn seeded_matches_term_by_term() {
        let m = BooleanMatrix::random(6, 7, &mut rng::stream(7, &[]))
            .unwrap()
            .pad_to_multiple(2);
        let params = Parameters::explicit(0.5, 0.25, 2, 2, 9, 1).unwrap();
        let plan = setup_iteration(8, 6, &params, 11).unwrap();
        let c = compress(&m, &plan, &plan.alpha).unwrap();
        let want = direct(&m, &plan, &plan.alpha);
        assert_eq!((c.rows(), c.cols()), (9, 4));
        for (i, row) in want.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(c.get(i, k), v);
            }
        }
    }

    #[test]
    fn wide_blocks_match_term_by_term() {
        let m = BooleanMatrix::random(70, 300, &mut rng::stream(8, &[]))
            .unwrap()
            .pad_to_multiple(100);
        let params = Parameters::explicit(0.5, 0.25, 100, 4, 16, 1).unwrap();
        let plan = setup_iteration(300, 70, &params, 12).unwrap();
        let c = compress(&m, &plan, &plan.beta).unwrap();
        let want = direct(&m, &plan, &plan.beta);
        for (i, row) in want.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(c.get(i, k), v);
            }
        }
    }
}

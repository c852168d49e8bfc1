//! Exact integer matrix products.
//!
//! [`gemm_pm1`] multiplies three-valued sign matrices with popcounts over
//! packed rows. [`gemm_int`] multiplies small-integer matrices with a
//! cache-blocked loop, optionally switching to Strassen recursion for large
//! square-ish operands. [`naive_gemm`] is the triple-loop reference.

use rayon::prelude::*;

use crate::boolmat::{packed_dot, words_for, WORD_BITS};
use crate::error::{Error, Result};

pub const DEFAULT_BLOCK: usize = 64;

/// Largest admissible `inner * |X| * |Y|`.
pub const ACCUMULATOR_LIMIT: i128 = 1 << 62;

/// Row-major `i64` matrix with a declared magnitude bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
    bound: i64,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i64>, bound: i64) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: rows * cols,
                right: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| v.abs() > bound) {
            return Err(Error::InvalidParameter(format!(
                "entry {v} exceeds declared bound {bound}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            bound,
        })
    }

    /// Matrix with the bound set to the actual largest magnitude.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<i64>) -> Result<Self> {
        let bound = data.iter().map(|v| v.abs()).max().unwrap_or(0);
        Self::new(rows, cols, data, bound)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        let bound = data.iter().map(|v| v.abs()).max().unwrap_or(0);
        Self {
            rows,
            cols,
            data,
            bound,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
            bound: 0,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| (i == j) as i64)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[i64] {
        &self.data
    }

    pub fn max_abs(&self) -> i64 {
        self.data.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
            bound: self.bound,
        }
    }
}

/// Matrix over `{-1, 0, +1}` with each row packed into sign and presence
/// bit planes along the column dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    sign: Vec<u64>,
    present: Vec<u64>,
}

impl SignMatrix {
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> i8,
    ) -> Result<Self> {
        let words = words_for(cols);
        let mut sign = vec![0u64; rows * words];
        let mut present = vec![0u64; rows * words];
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                let (w, b) = (i * words + j / WORD_BITS, j % WORD_BITS);
                match v {
                    0 => {}
                    1 => present[w] |= 1 << b,
                    -1 => {
                        present[w] |= 1 << b;
                        sign[w] |= 1 << b;
                    }
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "entry {v} is not in {{-1, 0, 1}}"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            words,
            sign,
            present,
        })
    }

    /// Build from packed planes of `rows * words_for(cols)` words each.
    pub(crate) fn from_planes(rows: usize, cols: usize, sign: Vec<u64>, present: Vec<u64>) -> Self {
        let words = words_for(cols);
        debug_assert_eq!(sign.len(), rows * words);
        debug_assert_eq!(present.len(), rows * words);
        Self {
            rows,
            cols,
            words,
            sign,
            present,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        let (w, b) = (i * self.words + j / WORD_BITS, j % WORD_BITS);
        match (self.present[w] >> b & 1, self.sign[w] >> b & 1) {
            (0, _) => 0,
            (_, 1) => -1,
            _ => 1,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i)).expect("entries already valid")
    }

    pub fn to_int(&self) -> IntMatrix {
        let m = IntMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) as i64);
        IntMatrix { bound: 1, ..m }
    }

    fn row_planes(&self, i: usize) -> (&[u64], &[u64]) {
        let r = i * self.words..(i + 1) * self.words;
        (&self.sign[r.clone()], &self.present[r])
    }
}

/// `X Y^T` for `X: a x b`, `Y: c x b`.
pub fn gemm_pm1_nt(x: &SignMatrix, y: &SignMatrix) -> Result<IntMatrix> {
    if x.cols != y.cols {
        return Err(Error::DimensionMismatch {
            left: x.cols,
            right: y.cols,
        });
    }
    let mut data = vec![0i64; x.rows * y.rows];
    for i in 0..x.rows {
        let (xs, xp) = x.row_planes(i);
        for (j, out) in data[i * y.rows..(i + 1) * y.rows].iter_mut().enumerate() {
            let (ys, yp) = y.row_planes(j);
            *out = packed_dot(xs, xp, ys, yp);
        }
    }
    Ok(IntMatrix {
        rows: x.rows,
        cols: y.rows,
        data,
        bound: x.cols as i64,
    })
}

/// `X Y` for `X: a x b`, `Y: b x c`.
pub fn gemm_pm1(x: &SignMatrix, y: &SignMatrix) -> Result<IntMatrix> {
    if x.cols != y.rows {
        return Err(Error::DimensionMismatch {
            left: x.cols,
            right: y.rows,
        });
    }
    gemm_pm1_nt(x, &y.transpose())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GemmConfig {
    /// Tile edge for the blocked loop.
    pub block: usize,
    /// Use Strassen recursion while all three dimensions exceed this.
    pub strassen_cutoff: Option<usize>,
}

impl Default for GemmConfig {
    fn default() -> Self {
        Self {
            block: DEFAULT_BLOCK,
            strassen_cutoff: None,
        }
    }
}

fn check_product(x: &IntMatrix, y: &IntMatrix) -> Result<()> {
    if x.cols != y.rows {
        return Err(Error::DimensionMismatch {
            left: x.cols,
            right: y.rows,
        });
    }
    if x.cols as i128 * x.bound as i128 * y.bound as i128 > ACCUMULATOR_LIMIT {
        return Err(Error::OverflowRisk {
            inner: x.cols,
            bound_x: x.bound,
            bound_y: y.bound,
        });
    }
    Ok(())
}

pub fn gemm_int(x: &IntMatrix, y: &IntMatrix) -> Result<IntMatrix> {
    gemm_int_with(x, y, &GemmConfig::default())
}

pub fn gemm_int_with(x: &IntMatrix, y: &IntMatrix, cfg: &GemmConfig) -> Result<IntMatrix> {
    check_product(x, y)?;
    let block = cfg.block.max(1);
    let data = match cfg.strassen_cutoff {
        Some(cutoff) => {
            strassen(
                Dense::view(x.rows, x.cols, &x.data),
                Dense::view(y.rows, y.cols, &y.data),
                cutoff.max(1),
                block,
            )
            .data
        }
        None => blocked(x.rows, x.cols, y.cols, &x.data, &y.data, block),
    };
    Ok(IntMatrix {
        rows: x.rows,
        cols: y.cols,
        data,
        bound: (x.cols as i64)
            .saturating_mul(x.bound)
            .saturating_mul(y.bound),
    })
}

/// Triple-loop reference.
pub fn naive_gemm(x: &IntMatrix, y: &IntMatrix) -> Result<IntMatrix> {
    check_product(x, y)?;
    let mut data = vec![0i64; x.rows * y.cols];
    for i in 0..x.rows {
        for j in 0..y.cols {
            let mut acc = 0i64;
            for k in 0..x.cols {
                acc += x.get(i, k) * y.get(k, j);
            }
            data[i * y.cols + j] = acc;
        }
    }
    Ok(IntMatrix {
        rows: x.rows,
        cols: y.cols,
        data,
        bound: (x.cols as i64)
            .saturating_mul(x.bound)
            .saturating_mul(y.bound),
    })
}

/// Blocked i-k-j product, parallel over row tiles.
fn blocked(a: usize, b: usize, c: usize, x: &[i64], y: &[i64], block: usize) -> Vec<i64> {
    let mut out = vec![0i64; a * c];
    if c == 0 {
        return out;
    }
    out.par_chunks_mut(block * c)
        .enumerate()
        .for_each(|(tile, out_rows)| {
            let i0 = tile * block;
            let rows = out_rows.len() / c;
            for k0 in (0..b).step_by(block) {
                let k1 = (k0 + block).min(b);
                for j0 in (0..c).step_by(block) {
                    let j1 = (j0 + block).min(c);
                    for di in 0..rows {
                        let xrow = &x[(i0 + di) * b..(i0 + di + 1) * b];
                        let orow = &mut out_rows[di * c + j0..di * c + j1];
                        for k in k0..k1 {
                            let v = xrow[k];
                            if v == 0 {
                                continue;
                            }
                            let yrow = &y[k * c + j0..k * c + j1];
                            for (o, &w) in orow.iter_mut().zip(yrow) {
                                *o += v * w;
                            }
                        }
                    }
                }
            }
        });
    out
}

#[derive(Clone)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl Dense {
    fn view(rows: usize, cols: usize, data: &[i64]) -> Self {
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Quadrant `(qi, qj)` of half size `(h, w)`, zero-filled past the edge.
    fn quadrant(&self, qi: usize, qj: usize, h: usize, w: usize) -> Self {
        let mut q = Self::zeros(h, w);
        for i in 0..h {
            let src_i = qi * h + i;
            if src_i >= self.rows {
                break;
            }
            for j in 0..w {
                let src_j = qj * w + j;
                if src_j >= self.cols {
                    break;
                }
                q.data[i * w + j] = self.data[src_i * self.cols + src_j];
            }
        }
        q
    }

    fn combine(&self, other: &Self, sign: i64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a.wrapping_add(sign.wrapping_mul(b)))
                .collect(),
        }
    }
}

/// Strassen recursion with wrapping arithmetic. Intermediate sums may wrap,
/// but the final entries fit in `i64` by the overflow precondition, and
/// arithmetic modulo `2^64` then recovers them exactly.
fn strassen(x: Dense, y: Dense, cutoff: usize, block: usize) -> Dense {
    let (a, b, c) = (x.rows, x.cols, y.cols);
    if a <= cutoff || b <= cutoff || c <= cutoff {
        return Dense {
            rows: a,
            cols: c,
            data: blocked_wrapping(a, b, c, &x.data, &y.data, block),
        };
    }
    let (ha, hb, hc) = (a.div_ceil(2), b.div_ceil(2), c.div_ceil(2));
    let x11 = x.quadrant(0, 0, ha, hb);
    let x12 = x.quadrant(0, 1, ha, hb);
    let x21 = x.quadrant(1, 0, ha, hb);
    let x22 = x.quadrant(1, 1, ha, hb);
    let y11 = y.quadrant(0, 0, hb, hc);
    let y12 = y.quadrant(0, 1, hb, hc);
    let y21 = y.quadrant(1, 0, hb, hc);
    let y22 = y.quadrant(1, 1, hb, hc);

    let rec = |p: Dense, q: Dense| strassen(p, q, cutoff, block);
    let (m1, m2, m3, m4, m5, m6, m7) = {
        let ((m1, m2), (m3, m4)) = rayon::join(
            || {
                rayon::join(
                    || rec(x11.combine(&x22, 1), y11.combine(&y22, 1)),
                    || rec(x21.combine(&x22, 1), y11.clone()),
                )
            },
            || {
                rayon::join(
                    || rec(x11.clone(), y12.combine(&y22, -1)),
                    || rec(x22.clone(), y21.combine(&y11, -1)),
                )
            },
        );
        let ((m5, m6), m7) = rayon::join(
            || {
                rayon::join(
                    || rec(x11.combine(&x12, 1), y22.clone()),
                    || rec(x21.combine(&x11, -1), y11.combine(&y12, 1)),
                )
            },
            || rec(x12.combine(&x22, -1), y21.combine(&y22, 1)),
        );
        (m1, m2, m3, m4, m5, m6, m7)
    };
    let c11 = m1.combine(&m4, 1).combine(&m5, -1).combine(&m7, 1);
    let c12 = m3.combine(&m5, 1);
    let c21 = m2.combine(&m4, 1);
    let c22 = m1.combine(&m2, -1).combine(&m3, 1).combine(&m6, 1);

    let mut out = Dense::zeros(a, c);
    for (qi, qj, q) in [(0, 0, &c11), (0, 1, &c12), (1, 0, &c21), (1, 1, &c22)] {
        for i in 0..ha {
            let oi = qi * ha + i;
            if oi >= a {
                break;
            }
            for j in 0..hc {
                let oj = qj * hc + j;
                if oj >= c {
                    break;
                }
                out.data[oi * c + oj] = q.data[i * hc + j];
            }
        }
    }
    out
}

fn blocked_wrapping(a: usize, b: usize, c: usize, x: &[i64], y: &[i64], block: usize) -> Vec<i64> {
    let mut out = vec![0i64; a * c];
    for k0 in (0..b).step_by(block) {
        let k1 = (k0 + block).min(b);
        for i in 0..a {
            let orow = &mut out[i * c..(i + 1) * c];
            for k in k0..k1 {
                let v = x[i * b + k];
                if v == 0 {
                    continue;
                }
                for (o, &w) in orow.iter_mut().zip(&y[k * c..(k + 1) * c]) {
                    *o = o.wrapping_add(v.wrapping_mul(w));
                }
            }
        }
    }
    out
}

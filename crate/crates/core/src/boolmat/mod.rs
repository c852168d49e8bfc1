//! Bit-packed ±1 matrices.
//!
//! Columns are packed into `u64` words along the row dimension using two bit
//! planes: the sign plane (bit set means entry `-1`) and the presence plane
//! (bit clear means the entry is `0`). Logical columns are always fully
//! present; padding columns appended by [`BooleanMatrix::pad_to_multiple`]
//! are all zero, so they have zero inner product with everything.

mod format;

pub use format::{read_pmat, read_pmat_binary, read_pmat_text, write_pmat_binary, write_pmat_text};

use rand::Rng;

use crate::error::{Error, Result};

pub(crate) const WORD_BITS: usize = 64;

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Inner product of two packed three-valued vectors: present overlap minus
/// twice the sign disagreements among present coordinates.
#[inline]
pub(crate) fn packed_dot(xs: &[u64], xp: &[u64], ys: &[u64], yp: &[u64]) -> i64 {
    let mut overlap = 0u32;
    let mut disagree = 0u32;
    for i in 0..xs.len() {
        let m = xp[i] & yp[i];
        overlap += m.count_ones();
        disagree += ((xs[i] ^ ys[i]) & m).count_ones();
    }
    overlap as i64 - 2 * disagree as i64
}

#[inline]
fn xor_popcount(xs: &[u64], ys: &[u64]) -> u32 {
    xs.iter().zip(ys).map(|(a, b)| (a ^ b).count_ones()).sum()
}

/// A `d x n` matrix of ±1 columns, optionally padded with zero columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanMatrix {
    d: usize,
    n: usize,
    n_padded: usize,
    words: usize,
    sign: Vec<u64>,
    present: Vec<u64>,
}

/// Borrowed view of one column.
#[derive(Clone, Copy, Debug)]
pub struct Column<'a> {
    d: usize,
    full: bool,
    sign: &'a [u64],
    present: &'a [u64],
}

impl BooleanMatrix {
    fn empty(d: usize, n: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix needs d >= 1 and n >= 1, got d={d}, n={n}"
            )));
        }
        let words = words_for(d);
        let mut present = vec![0u64; words * n];
        let tail = full_mask(d);
        for col in present.chunks_mut(words) {
            col.copy_from_slice(&tail);
        }
        Ok(Self {
            d,
            n,
            n_padded: n,
            words,
            sign: vec![0u64; words * n],
            present,
        })
    }

    /// Build from a predicate giving `true` where the entry is `-1`.
    pub fn from_fn(
        d: usize,
        n: usize,
        mut negative: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut m = Self::empty(d, n)?;
        for j in 0..n {
            for i in 0..d {
                if negative(i, j) {
                    m.sign[j * m.words + i / WORD_BITS] |= 1 << (i % WORD_BITS);
                }
            }
        }
        Ok(m)
    }

    /// Build from dense columns with entries in `{-1, +1}`.
    pub fn from_columns(columns: &[Vec<i8>]) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: c.len(),
                });
            }
            if let Some(v) = c.iter().find(|v| v.abs() != 1) {
                return Err(Error::InvalidParameter(format!(
                    "entry {v} is not +1 or -1"
                )));
            }
        }
        Self::from_fn(d, columns.len(), |i, j| columns[j][i] < 0)
    }

    /// Uniform random ±1 entries.
    pub fn random<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut m = Self::empty(d, n)?;
        for j in 0..n {
            m.randomize_column(j, rng);
        }
        Ok(m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Logical column count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Physical column count including zero padding.
    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }

    pub fn column(&self, j: usize) -> Column<'_> {
        assert!(
            j < self.n_padded,
            "column {j} out of range {}",
            self.n_padded
        );
        let r = j * self.words..(j + 1) * self.words;
        Column {
            d: self.d,
            full: j < self.n,
            sign: &self.sign[r.clone()],
            present: &self.present[r],
        }
    }

    /// Entry at row `i`, column `j` as `-1`, `0` or `+1`.
    pub fn entry(&self, i: usize, j: usize) -> i8 {
        self.column(j).get(i)
    }

    pub fn dense_column(&self, j: usize) -> Vec<i8> {
        let c = self.column(j);
        (0..self.d).map(|i| c.get(i)).collect()
    }

    /// Append zero columns until the physical column count is a multiple of `t`.
    pub fn pad_to_multiple(&self, t: usize) -> Self {
        assert!(t >= 1, "block size must be positive");
        self.pad_to(self.n.div_ceil(t) * t)
    }

    /// Pad (or strip padding) to exactly `n_padded >= n` physical columns.
    pub fn pad_to(&self, n_padded: usize) -> Self {
        assert!(n_padded >= self.n);
        let len = self.words * self.n;
        let mut sign = self.sign[..len].to_vec();
        let mut present = self.present[..len].to_vec();
        sign.resize(self.words * n_padded, 0);
        present.resize(self.words * n_padded, 0);
        Self {
            n_padded,
            sign,
            present,
            ..*self
        }
    }

    /// New unpadded matrix made of the given logical columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut out = Self::empty(self.d, cols.len())?;
        for (dst, &src) in cols.iter().enumerate() {
            assert!(src < self.n, "column {src} is not a logical column");
            let w = self.words;
            out.sign[dst * w..(dst + 1) * w].copy_from_slice(&self.sign[src * w..(src + 1) * w]);
        }
        Ok(out)
    }

    /// Overwrite logical column `j` with uniform random signs.
    pub fn randomize_column<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) {
        assert!(j < self.n);
        let tail = full_mask(self.d);
        let w = self.words;
        for (k, word) in self.sign[j * w..(j + 1) * w].iter_mut().enumerate() {
            *word = rng.gen::<u64>() & tail[k];
        }
    }

    /// Copy logical column `src_j` of `src` into logical column `j`.
    pub fn copy_column_from(&mut self, j: usize, src: &BooleanMatrix, src_j: usize) {
        assert_eq!(self.d, src.d);
        assert!(j < self.n && src_j < src.n);
        let w = self.words;
        self.sign[j * w..(j + 1) * w].copy_from_slice(&src.sign[src_j * w..(src_j + 1) * w]);
    }

    /// Negate entry `(i, j)` of a logical column.
    pub fn flip(&mut self, i: usize, j: usize) {
        assert!(i < self.d && j < self.n);
        self.sign[j * self.words + i / WORD_BITS] ^= 1 << (i % WORD_BITS);
    }

    pub(crate) fn sign_plane(&self) -> &[u64] {
        &self.sign
    }

    pub(crate) fn present_plane(&self) -> &[u64] {
        &self.present
    }

    pub(crate) fn from_planes(
        d: usize,
        n: usize,
        sign: Vec<u64>,
        present: Vec<u64>,
    ) -> Result<Self> {
        let m = Self::empty(d, n)?;
        if sign.len() != m.sign.len() || present != m.present {
            return Err(Error::InvalidParameter(
                "bit planes do not describe full logical columns".into(),
            ));
        }
        let tail = full_mask(d);
        for col in sign.chunks(m.words) {
            if col.iter().zip(&tail).any(|(s, t)| s & !t != 0) {
                return Err(Error::InvalidParameter(
                    "sign bits set beyond row count".into(),
                ));
            }
        }
        Ok(Self { sign, ..m })
    }
}

fn full_mask(d: usize) -> Vec<u64> {
    let words = words_for(d);
    let mut mask = vec![u64::MAX; words];
    let rem = d % WORD_BITS;
    if rem != 0 {
        mask[words - 1] = (1u64 << rem) - 1;
    }
    mask
}

impl<'a> Column<'a> {
    pub fn d(&self) -> usize {
        self.d
    }

    /// `false` for padding columns.
    pub fn is_present(&self) -> bool {
        self.full
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        let (w, b) = (i / WORD_BITS, i % WORD_BITS);
        if self.present[w] >> b & 1 == 0 {
            0
        } else if self.sign[w] >> b & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub(crate) fn sign_words(&self) -> &'a [u64] {
        self.sign
    }
}

/// Row indices into `[d]` naming one coordinate of a tensor power.
/// Indices are zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexTuple(Vec<usize>);

impl IndexTuple {
    pub fn new(indices: Vec<usize>, d: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter(
                "index tuple must be non-empty".into(),
            ));
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= d) {
            return Err(Error::IndexOutOfRange { index, d });
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &IndexTuple) -> IndexTuple {
        IndexTuple(self.0.iter().chain(&other.0).copied().collect())
    }
}

fn check_dims(x: &Column<'_>, y: &Column<'_>) -> Result<()> {
    if x.d != y.d {
        return Err(Error::DimensionMismatch {
            left: x.d,
            right: y.d,
        });
    }
    Ok(())
}

/// `sum_i x_i y_i`; padding entries contribute zero.
pub fn inner_product(x: Column<'_>, y: Column<'_>) -> Result<i64> {
    check_dims(&x, &y)?;
    Ok(inner_product_unchecked(x, y))
}

#[inline]
pub(crate) fn inner_product_unchecked(x: Column<'_>, y: Column<'_>) -> i64 {
    if x.full && y.full {
        x.d as i64 - 2 * xor_popcount(x.sign, y.sign) as i64
    } else {
        packed_dot(x.sign, x.present, y.sign, y.present)
    }
}

/// Number of coordinates where both entries are present and differ.
pub fn hamming_distance(x: Column<'_>, y: Column<'_>) -> Result<u64> {
    check_dims(&x, &y)?;
    let mut count = 0u64;
    for i in 0..x.sign.len() {
        count += ((x.sign[i] ^ y.sign[i]) & x.present[i] & y.present[i]).count_ones() as u64;
    }
    Ok(count)
}

/// Coordinate `t` of the `|t|`-th tensor power of `x`.
pub fn tensor_entry(x: Column<'_>, t: &IndexTuple) -> Result<i8> {
    if let Some(&index) = t.indices().iter().find(|&&i| i >= x.d) {
        return Err(Error::IndexOutOfRange { index, d: x.d });
    }
    Ok(tensor_entry_unchecked(x, t.indices()))
}

#[inline]
pub(crate) fn tensor_entry_unchecked(x: Column<'_>, indices: &[usize]) -> i8 {
    if !x.full {
        return 0;
    }
    let mut parity = 0u64;
    for &i in indices {
        parity ^= x.sign[i / WORD_BITS] >> (i % WORD_BITS);
    }
    if parity & 1 == 1 {
        -1
    } else {
        1
    }
}

/// `sum over t in tuples of (x^{⊗p})_t (y^{⊗p})_t`, counting multiplicity.
pub fn partial_inner_product(x: Column<'_>, y: Column<'_>, tuples: &[IndexTuple]) -> Result<i64> {
    check_dims(&x, &y)?;
    let Some(first) = tuples.first() else {
        return Ok(0);
    };
    let mut sum = 0i64;
    for t in tuples {
        if t.len() != first.len() {
            return Err(Error::MixedTupleLengths {
                first: first.len(),
                other: t.len(),
            });
        }
        sum += (tensor_entry(x, t)? * tensor_entry(y, t)?) as i64;
    }
    Ok(sum)
}

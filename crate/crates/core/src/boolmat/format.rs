//! PMAT matrix files.
//!
//! Text (`PMAT1`): a header line `PMAT1 d n`, then one line per column made
//! of `d` characters from `{+, -}`.
//!
//! Binary (`PMATB1`): a header line `PMATB1 d n`, then the sign plane and
//! the presence plane, each `n * ceil(d/64)` little-endian `u64` words in
//! column-major order.
//!
//! Only logical columns are written; padding is a runtime artifact.

use std::io::{BufRead, Write};

use super::{BooleanMatrix, WORD_BITS};
use crate::error::{Error, Result};

const TEXT_MAGIC: &str = "PMAT1";
const BINARY_MAGIC: &str = "PMATB1";

pub fn write_pmat_text<W: Write>(m: &BooleanMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{TEXT_MAGIC} {} {}", m.d(), m.n())?;
    let mut line = Vec::with_capacity(m.d() + 1);
    for j in 0..m.n() {
        line.clear();
        let c = m.column(j);
        line.extend((0..m.d()).map(|i| if c.get(i) < 0 { b'-' } else { b'+' }));
        line.push(b'\n');
        w.write_all(&line)?;
    }
    Ok(())
}

pub fn write_pmat_binary<W: Write>(m: &BooleanMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{BINARY_MAGIC} {} {}", m.d(), m.n())?;
    let len = m.words() * m.n();
    for plane in [&m.sign_plane()[..len], &m.present_plane()[..len]] {
        for word in plane {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    Ok(())
}

fn parse_header(line: &str, magic: &str) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(magic) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected {magic} header"),
        });
    }
    let mut num = |name: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("missing or invalid {name}"),
            })
    };
    let d = num("d")?;
    let n = num("n")?;
    Ok((d, n))
}

pub fn read_pmat_text<R: BufRead>(r: R) -> Result<BooleanMatrix> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let (d, n) = parse_header(&header, TEXT_MAGIC)?;
    let mut rows: Vec<Vec<u8>> = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if line.len() != d || !line.bytes().all(|b| b == b'+' || b == b'-') {
            return Err(Error::Parse {
                line: k + 2,
                msg: format!("expected {d} characters from {{+,-}}"),
            });
        }
        rows.push(line.as_bytes().to_vec());
    }
    if rows.len() != n {
        return Err(Error::Parse {
            line: rows.len() + 1,
            msg: format!("expected {n} columns, found {}", rows.len()),
        });
    }
    BooleanMatrix::from_fn(d, n, |i, j| rows[j][i] == b'-')
}

pub fn read_pmat_binary<R: BufRead>(mut r: R) -> Result<BooleanMatrix> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let (d, n) = parse_header(&header, BINARY_MAGIC)?;
    let len = d.div_ceil(WORD_BITS) * n;
    let mut read_plane = || -> Result<Vec<u64>> {
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    };
    let sign = read_plane()?;
    let present = read_plane()?;
    BooleanMatrix::from_planes(d, n, sign, present)
}

/// Read either format, detected from the header.
pub fn read_pmat<R: BufRead>(mut r: R) -> Result<BooleanMatrix> {
    let peek = r.fill_buf()?;
    if peek.starts_with(BINARY_MAGIC.as_bytes()) {
        read_pmat_binary(r)
    } else {
        read_pmat_text(r)
    }
}

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolmat::BooleanMatrix;
use crate::corrjoin::{search, SearchOptions};
use crate::error::{Error, Result};
use crate::matmul::GemmConfig;
use crate::params::{make_parameters, Overrides, Parameters};
use crate::rng;

const MAGIC: &str = "OV1";

/// Two families of 0/1 vectors of length `dprime`, stored by column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvInstance {
    pub dprime: usize,
    pub s: Vec<Vec<bool>>,
    pub t: Vec<Vec<bool>>,
}

impl OvInstance {
    pub fn new(dprime: usize, s: Vec<Vec<bool>>, t: Vec<Vec<bool>>) -> Result<Self> {
        if dprime == 0 {
            return Err(Error::InvalidParameter("d' must be at least 1".into()));
        }
        if let Some(v) = s.iter().chain(&t).find(|v| v.len() != dprime) {
            return Err(Error::DimensionMismatch {
                left: v.len(),
                right: dprime,
            });
        }
        Ok(Self { dprime, s, t })
    }
}

fn dot(x: &[bool], y: &[bool]) -> usize {
    x.iter().zip(y).filter(|(a, b)| **a && **b).count()
}

/// Entries are 1 with probability `density`.
pub fn gen_ov(n: usize, dprime: usize, density: f64, seed: u64) -> Result<OvInstance> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!(
            "density = {density} must lie in [0, 1]"
        )));
    }
    let draw = |phase: u64| -> Vec<Vec<bool>> {
        let mut r = rng::stream(seed, &[phase]);
        (0..n)
            .map(|_| (0..dprime).map(|_| r.gen_bool(density)).collect())
            .collect()
    };
    let (s, t) = (draw(0), draw(1));
    OvInstance::new(dprime, s, t)
}

/// First orthogonal pair in row-major order.
pub fn brute_force_ov(inst: &OvInstance) -> Option<(usize, usize)> {
    inst.s.iter().enumerate().find_map(|(j1, x)| {
        inst.t
            .iter()
            .position(|y| dot(x, y) == 0)
            .map(|j2| (j1, j2))
    })
}

/// `u(x) = [1, 1-2x, 1, 1-2x]`.
pub fn gadget_u(x: bool) -> [i8; 4] {
    let v = if x { -1 } else { 1 };
    [1, v, 1, v]
}

/// `v(y) = [1, 1, 1-2y, 2y-1]`.
pub fn gadget_v(y: bool) -> [i8; 4] {
    let v = if y { -1 } else { 1 };
    [1, 1, v, -v]
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvTransform {
    pub a: BooleanMatrix,
    pub b: BooleanMatrix,
    pub rho: f64,
    pub tau: f64,
}

fn encode(cols: &[Vec<bool>], dprime: usize, gadget: fn(bool) -> [i8; 4]) -> Result<BooleanMatrix> {
    let d = 4 * dprime + 1;
    BooleanMatrix::from_fn(d, cols.len(), |i, j| {
        i < 4 * dprime && gadget(cols[j][i / 4])[i % 4] < 0
    })
}

/// `4 d' + 1` rows: the gadgets of every coordinate, then a row of ones.
/// Orthogonal pairs map to inner product `2 d' + 1`, all others to at most
/// `2 d' - 1` in absolute value.
pub fn ov_transform(inst: &OvInstance) -> Result<OvTransform> {
    if inst.s.is_empty() || inst.t.is_empty() {
        return Err(Error::InvalidParameter(
            "both families need at least one vector".into(),
        ));
    }
    let dp = inst.dprime;
    let d = (4 * dp + 1) as f64;
    Ok(OvTransform {
        a: encode(&inst.s, dp, gadget_u)?,
        b: encode(&inst.t, dp, gadget_v)?,
        rho: (2 * dp + 1) as f64 / d,
        tau: (2 * dp - 1) as f64 / d,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvOptions {
    pub overrides: Overrides,
    /// The gap `rho - tau = 2/d` is far too small for the detector to
    /// separate scores at practical sample sizes, so every block pair is
    /// marked by default.
    pub threshold_constant: f64,
    /// Uniform random pairs tested before the search.
    pub presample: usize,
    pub gemm: GemmConfig,
}

impl Default for OvOptions {
    fn default() -> Self {
        Self {
            overrides: Overrides::explicit(1, 2, 4, 1),
            threshold_constant: 0.0,
            presample: 0,
            gemm: GemmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvOutcome {
    pub orthogonal: bool,
    pub witness: Option<(usize, usize)>,
    /// Whether the witness came from pre-sampling.
    pub presampled: bool,
    pub params: Option<Parameters>,
}

pub fn solve_ov(inst: &OvInstance, opts: &OvOptions, seed: u64) -> Result<OvOutcome> {
    if inst.s.is_empty() || inst.t.is_empty() {
        return Ok(OvOutcome {
            orthogonal: false,
            witness: None,
            presampled: false,
            params: None,
        });
    }
    let mut r = rng::stream(seed, &[0]);
    for _ in 0..opts.presample {
        let (j1, j2) = (r.gen_range(0..inst.s.len()), r.gen_range(0..inst.t.len()));
        if dot(&inst.s[j1], &inst.t[j2]) == 0 {
            return Ok(OvOutcome {
                orthogonal: true,
                witness: Some((j1, j2)),
                presampled: true,
                params: None,
            });
        }
    }
    let tr = ov_transform(inst)?;
    let n = inst.s.len().max(inst.t.len());
    let mut params = make_parameters(n, tr.a.d(), tr.rho, tr.tau, 0.5, 1.0, &opts.overrides)?
        .with_threshold_constant(opts.threshold_constant)
        .with_mark_cap(Some(usize::MAX));
    params.validate()?;
    let search_opts = SearchOptions {
        gemm: opts.gemm,
        ..SearchOptions::default()
    };
    let report = search(&tr.a, &tr.b, &params, rng::derive(seed, &[1]), &search_opts)?;
    let witness = report
        .pairs
        .iter()
        .map(|p| (p.j1, p.j2))
        .find(|&(j1, j2)| dot(&inst.s[j1], &inst.t[j2]) == 0);
    params.mark_cap = None;
    Ok(OvOutcome {
        orthogonal: witness.is_some(),
        witness,
        presampled: false,
        params: Some(params),
    })
}

fn write_family<W: Write>(cols: &[Vec<bool>], dprime: usize, w: &mut W) -> Result<()> {
    writeln!(w, "{MAGIC} {dprime} {}", cols.len())?;
    for i in 0..dprime {
        let row: String = cols.iter().map(|c| if c[i] { '1' } else { '0' }).collect();
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// `OV1 d' n` followed by `d'` rows of `n` digits, once for `S` and once for `T`.
pub fn write_ov<W: Write>(inst: &OvInstance, mut w: W) -> Result<()> {
    write_family(&inst.s, inst.dprime, &mut w)?;
    write_family(&inst.t, inst.dprime, &mut w)
}

fn read_family<I: Iterator<Item = (usize, std::io::Result<String>)>>(
    lines: &mut I,
) -> Result<(usize, Vec<Vec<bool>>)> {
    let mut next = || -> Result<(usize, String)> {
        loop {
            match lines.next() {
                Some((no, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok((no + 1, line));
                    }
                }
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: "unexpected end of input".into(),
                    })
                }
            }
        }
    };
    let (no, header) = next()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let bad = || Error::Parse {
        line: no,
        msg: format!("expected `{MAGIC} dprime n` header"),
    };
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(bad());
    }
    let dprime: usize = fields[1].parse().map_err(|_| bad())?;
    let n: usize = fields[2].parse().map_err(|_| bad())?;
    let mut cols = vec![Vec::with_capacity(dprime); n];
    for _ in 0..dprime {
        let (no, row) = next()?;
        let row = row.trim();
        if row.len() != n {
            return Err(Error::Parse {
                line: no,
                msg: format!("expected {n} digits, found {}", row.len()),
            });
        }
        for (col, c) in cols.iter_mut().zip(row.chars()) {
            col.push(match c {
                '0' => false,
                '1' => true,
                other => {
                    return Err(Error::Parse {
                        line: no,
                        msg: format!("unexpected character {other:?}"),
                    })
                }
            });
        }
    }
    Ok((dprime, cols))
}

pub fn read_ov<R: BufRead>(r: R) -> Result<OvInstance> {
    let mut lines = r.lines().enumerate();
    let (ds, s) = read_family(&mut lines)?;
    let (dt, t) = read_family(&mut lines)?;
    if ds != dt {
        return Err(Error::DimensionMismatch {
            left: ds,
            right: dt,
        });
    }
    OvInstance::new(ds, s, t)
}

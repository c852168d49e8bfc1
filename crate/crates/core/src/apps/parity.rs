use std::io::{BufRead, Write};

use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{delta_from_epsilon, DEFAULT_OMEGA};
use crate::boolmat::BooleanMatrix;
use crate::corrjoin::{search, SearchOptions};
use crate::error::{Error, Result};
use crate::matmul::GemmConfig;
use crate::numeric::ip_threshold;
use crate::params::{make_parameters, Overrides, Parameters};
use crate::rng;

const MAGIC: &str = "PARITY1";

/// One labelled example, entries in `{-1, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityExample {
    pub x: Vec<i8>,
    pub y: i8,
}

impl ParityExample {
    /// `prod over j in set of x_j`.
    fn chi(&self, set: &[usize]) -> i8 {
        set.iter().fold(1, |acc, &j| acc * self.x[j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityInstance {
    pub n: usize,
    pub k: usize,
    pub eta: f64,
    pub examples: Vec<ParityExample>,
    /// Hidden support, sorted.
    pub support: Vec<usize>,
}

/// Example oracle for a fixed hidden parity.
#[derive(Clone, Debug)]
pub struct ParitySource {
    n: usize,
    eta: f64,
    support: Vec<usize>,
    rng: rng::Rng,
}

fn check_noise(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} must lie in [0, 1)"
        )));
    }
    let rho = (1.0 - 2.0 * eta).abs();
    if rho < 1e-12 {
        return Err(Error::InvalidParameter(
            "eta = 1/2 leaves no correlation to find".into(),
        ));
    }
    Ok(rho)
}

impl ParitySource {
    /// Uniform support of size `k`.
    pub fn new(n: usize, k: usize, eta: f64, seed: u64) -> Result<Self> {
        check_noise(eta)?;
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        let mut support = sample(&mut rng::stream(seed, &[0]), n, k).into_vec();
        support.sort_unstable();
        Ok(Self {
            n,
            eta,
            support,
            rng: rng::stream(seed, &[1]),
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn draw(&mut self, count: usize) -> Vec<ParityExample> {
        (0..count)
            .map(|_| {
                let x: Vec<i8> = (0..self.n)
                    .map(|_| if self.rng.gen::<bool>() { -1 } else { 1 })
                    .collect();
                let z = if self.rng.gen_bool(self.eta) { -1 } else { 1 };
                let mut e = ParityExample { x, y: z };
                e.y *= e.chi(&self.support);
                e
            })
            .collect()
    }
}

pub fn gen_parity(n: usize, k: usize, eta: f64, d: usize, seed: u64) -> Result<ParityInstance> {
    let mut source = ParitySource::new(n, k, eta, seed)?;
    Ok(ParityInstance {
        n,
        k,
        eta,
        examples: source.draw(d),
        support: source.support.clone(),
    })
}

/// Advised example count `(2k + 3) rho^(-2/delta) ln n`.
pub fn advised_examples(n: usize, k: usize, eta: f64, delta: f64) -> Result<f64> {
    let rho = check_noise(eta)?;
    Ok((2 * k + 3) as f64 * rho.powf(-2.0 / delta) * (n as f64).ln())
}

/// Columns of `A` are indexed by `left`, columns of `B` by `right`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitLists {
    pub a: BooleanMatrix,
    pub b: BooleanMatrix,
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k as u128).fold(1u128, |acc, i| acc.saturating_mul(n as u128 - i) / (i + 1))
}

/// One column per subset of size `floor(k/2)` (values `x_J`) and per subset
/// of size `ceil(k/2)` (values `x_J y`), one row per example.
pub fn build_split_lists(
    examples: &[ParityExample],
    n: usize,
    k: usize,
    budget: u128,
) -> Result<SplitLists> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if examples.is_empty() {
        return Err(Error::InvalidParameter("no examples".into()));
    }
    if let Some(e) = examples.iter().find(|e| e.x.len() != n) {
        return Err(Error::DimensionMismatch {
            left: e.x.len(),
            right: n,
        });
    }
    let (k1, k2) = (k / 2, k.div_ceil(2));
    let needed = binomial(n, k1).saturating_add(binomial(n, k2));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let left: Vec<Vec<usize>> = (0..n).combinations(k1).collect();
    let right: Vec<Vec<usize>> = (0..n).combinations(k2).collect();
    let d = examples.len();
    let a = BooleanMatrix::from_fn(d, left.len(), |i, j| examples[i].chi(&left[j]) < 0)?;
    let b = BooleanMatrix::from_fn(d, right.len(), |i, j| {
        examples[i].chi(&right[j]) * examples[i].y < 0
    })?;
    Ok(SplitLists { a, b, left, right })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParityOptions {
    pub epsilon: f64,
    pub omega: f64,
    pub overrides: Overrides,
    pub threshold_constant: Option<f64>,
    /// Detection rounds, including the first, before giving up.
    pub retry_cap: usize,
    /// Examples requested per retry; defaults to the size of the first batch.
    pub examples_per_round: Option<usize>,
    /// Largest total column count of the split lists.
    pub budget: u128,
    pub gemm: GemmConfig,
}

impl Default for ParityOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            omega: DEFAULT_OMEGA,
            overrides: Overrides::default(),
            threshold_constant: None,
            retry_cap: 16,
            examples_per_round: None,
            budget: 1 << 24,
            gemm: GemmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityOutcome {
    pub support: Vec<usize>,
    /// Rounds used, starting at 1.
    pub rounds: usize,
    /// Correlation of the recovered parity with the labels on the round's examples.
    pub correlation: f64,
    pub params: Parameters,
    pub warnings: Vec<String>,
}

/// Symmetric difference of two sorted sets.
fn sym_diff(x: &[usize], y: &[usize]) -> Vec<usize> {
    x.iter()
        .merge(y)
        .dedup_with_count()
        .filter(|(c, _)| *c == 1)
        .map(|(_, &v)| v)
        .collect()
}

pub type ExampleSource<'a> = dyn FnMut(usize) -> Result<Vec<ParityExample>> + 'a;

/// Recover a `k`-sparse parity from noisy examples.
///
/// Each round builds the split lists, searches them at `rho = |1 - 2 eta|`
/// and returns `J1 xor J2` for the strongest listed pair whose symmetric
/// difference has size `k`. A round that lists nothing, or marks more block
/// pairs than the cap, asks `more` for a fresh batch; without `more` only
/// one round is run.
pub fn solve_parity(
    examples: &[ParityExample],
    mut more: Option<&mut ExampleSource<'_>>,
    n: usize,
    k: usize,
    eta: f64,
    opts: &ParityOptions,
    seed: u64,
) -> Result<ParityOutcome> {
    let rho = check_noise(eta)?;
    let delta = delta_from_epsilon(opts.epsilon, opts.omega)?;
    let tau = rho.powf(1.0 / delta);
    let mut warnings = Vec::new();
    let advised = advised_examples(n, k, eta, delta)?;
    if (examples.len() as f64) < advised {
        warnings.push(format!(
            "{} examples is below the advised {advised:.1}",
            examples.len()
        ));
    }
    let per_round = opts.examples_per_round.unwrap_or(examples.len());
    let mut batch = examples.to_vec();
    let cap = opts.retry_cap.max(1);
    for round in 0..cap {
        if round > 0 {
            match more.as_deref_mut() {
                Some(source) => batch = source(per_round)?,
                None => break,
            }
        }
        let lists = build_split_lists(&batch, n, k, opts.budget)?;
        let d = batch.len();
        let n_cols = lists.a.n().max(lists.b.n());
        let mut params = if rho < 1.0 {
            make_parameters(
                n_cols,
                d,
                rho,
                tau,
                0.5,
                1.0 / (1.0 - delta),
                &opts.overrides,
            )?
        } else {
            let base = 1.0 - 2.0 / d as f64;
            let mut p = make_parameters(
                n_cols,
                d,
                base,
                base.powf(1.0 / delta),
                0.5,
                1.0 / (1.0 - delta),
                &opts.overrides,
            )?;
            p.rho = 1.0;
            p
        };
        if let Some(c) = opts.threshold_constant {
            params.threshold_constant = c;
        }
        params.validate()?;
        let search_opts = SearchOptions {
            gemm: opts.gemm,
            ..SearchOptions::default()
        };
        let report = match search(
            &lists.a,
            &lists.b,
            &params,
            rng::derive(seed, &[round as u64]),
            &search_opts,
        ) {
            Ok(r) => r,
            Err(e @ Error::MarkCapExceeded { .. }) => {
                warnings.push(format!("round {}: {e}", round + 1));
                continue;
            }
            Err(e) => return Err(e),
        };
        let threshold = ip_threshold(rho, d);
        let best = report
            .pairs
            .iter()
            .filter_map(|p| {
                let set = sym_diff(&lists.left[p.j1], &lists.right[p.j2]);
                (set.len() == k).then_some((p.ip.abs(), set))
            })
            .max_by(|x, y| x.0.cmp(&y.0).then_with(|| y.1.cmp(&x.1)));
        if let Some((_, support)) = best {
            let agree: i64 = batch.iter().map(|e| (e.chi(&support) * e.y) as i64).sum();
            if agree.abs() >= threshold {
                return Ok(ParityOutcome {
                    support,
                    rounds: round + 1,
                    correlation: agree as f64 / d as f64,
                    params,
                    warnings,
                });
            }
        }
    }
    Err(Error::RetriesExhausted {
        rounds: cap,
        reason: "no candidate support reached the correlation threshold".into(),
    })
}

fn sign_char(v: i8) -> char {
    if v < 0 {
        '-'
    } else {
        '+'
    }
}

/// `PARITY1 n d`, then one line per example: `n` characters from `{+, -}`,
/// a tab, and the label.
pub fn write_parity<W: Write>(n: usize, examples: &[ParityExample], mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {n} {}", examples.len())?;
    for e in examples {
        let x: String = e.x.iter().map(|&v| sign_char(v)).collect();
        writeln!(w, "{x}\t{}", sign_char(e.y))?;
    }
    Ok(())
}

fn parse_sign(c: char, line: usize) -> Result<i8> {
    match c {
        '+' => Ok(1),
        '-' => Ok(-1),
        other => Err(Error::Parse {
            line,
            msg: format!("unexpected character {other:?}"),
        }),
    }
}

/// Returns `(n, examples)`.
pub fn read_parity<R: BufRead>(r: R) -> Result<(usize, Vec<ParityExample>)> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let fields: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        line: 1,
        msg: format!("expected `{MAGIC} n d` header"),
    };
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(bad_header());
    }
    let n: usize = fields[1].parse().map_err(|_| bad_header())?;
    let d: usize = fields[2].parse().map_err(|_| bad_header())?;
    let mut examples = Vec::with_capacity(d);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let (x, y) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: no,
            msg: "missing tab before label".into(),
        })?;
        let x: Vec<i8> = x
            .chars()
            .map(|c| parse_sign(c, no))
            .collect::<Result<_>>()?;
        if x.len() != n {
            return Err(Error::Parse {
                line: no,
                msg: format!("expected {n} entries, found {}", x.len()),
            });
        }
        let mut label = y.trim().chars();
        let y = match (label.next(), label.next()) {
            (Some(c), None) => parse_sign(c, no)?,
            _ => {
                return Err(Error::Parse {
                    line: no,
                    msg: "label must be a single + or -".into(),
                })
            }
        };
        examples.push(ParityExample { x, y });
    }
    if examples.len() != d {
        return Err(Error::Parse {
            line: examples.len() + 1,
            msg: format!("header promises {d} examples, found {}", examples.len()),
        });
    }
    Ok((n, examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolmat::inner_product;

    fn explicit() -> ParityOptions {
        ParityOptions {
            overrides: Overrides::explicit(1, 2, 4096, 2),
            threshold_constant: Some(0.5),
            ..ParityOptions::default()
        }
    }

    #[test]
    fn labels_follow_the_parity() {
        let inst = gen_parity(8, 3, 0.0, 50, 1).unwrap();
        for e in &inst.examples {
            assert_eq!(e.y, e.chi(&inst.support));
        }
        assert_eq!(inst.support.len(), 3);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 1), 10);
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
    }

    #[test]
    fn split_lists_shape_and_noiseless_peak() {
        let inst = gen_parity(3, 2, 0.0, 40, 2).unwrap();
        let lists = build_split_lists(&inst.examples, 3, 2, 100).unwrap();
        assert_eq!((lists.a.n(), lists.b.n()), (3, 3));
        let (s0, s1) = (inst.support[0], inst.support[1]);
        let ip = inner_product(lists.a.column(s0), lists.b.column(s1)).unwrap();
        assert_eq!(ip, 40);
        assert!(matches!(
            build_split_lists(&inst.examples, 3, 2, 5),
            Err(Error::BudgetExceeded {
                needed: 6,
                budget: 5
            })
        ));
    }

    #[test]
    fn sym_diff_sets() {
        assert_eq!(sym_diff(&[1, 3], &[3, 4]), vec![1, 4]);
        assert_eq!(sym_diff(&[2], &[2]), Vec::<usize>::new());
    }

    #[test]
    fn noiseless_recovery() {
        for seed in 0..5 {
            let inst = gen_parity(8, 2, 0.0, 200, seed).unwrap();
            let out = solve_parity(&inst.examples, None, 8, 2, 0.0, &explicit(), seed).unwrap();
            assert_eq!(out.support, inst.support);
            assert_eq!(out.correlation, 1.0);
        }
    }

    #[test]
    fn half_noise_is_rejected() {
        assert!(gen_parity(8, 2, 0.5, 10, 0).is_err());
        let inst = gen_parity(8, 2, 0.1, 10, 0).unwrap();
        assert!(solve_parity(&inst.examples, None, 8, 2, 0.5, &explicit(), 0).is_err());
    }

    #[test]
    fn retries_pull_fresh_batches() {
        let mut source = ParitySource::new(10, 2, 0.2, 3).unwrap();
        let first = source.draw(67);
        let support = source.support().to_vec();
        let mut calls = 0;
        let mut more = |count: usize| {
            calls += 1;
            Ok(source.draw(count))
        };
        let opts = ParityOptions {
            retry_cap: 30,
            ..explicit()
        };
        let out = solve_parity(&first, Some(&mut more), 10, 2, 0.2, &opts, 4).unwrap();
        assert_eq!(out.support, support);
        assert_eq!(calls + 1, out.rounds);
        assert!(out.correlation.abs() >= 0.6);
    }

    #[test]
    fn file_round_trip() {
        let inst = gen_parity(5, 2, 0.3, 7, 8).unwrap();
        let mut buf = Vec::new();
        write_parity(5, &inst.examples, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("PARITY1 5 7\n"));
        let (n, back) = read_parity(&buf[..]).unwrap();
        assert_eq!((n, back), (5, inst.examples));
        assert!(read_parity(&b"PARITY1 2 1\n+-\t*\n"[..]).is_err());
        assert!(read_parity(&b"PARITY1 2 2\n+-\t+\n"[..]).is_err());
    }
}

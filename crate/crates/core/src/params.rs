//! Algorithm parameters: block size `t`, tensor power `p`, sample size `s`
//! and the iteration count.
//!
//! In asymptotic mode all four are derived from `(n, rho, tau, gamma)`. The
//! derived sample size is astronomically large for realistic thresholds at
//! desk scale, so explicit mode accepts user-chosen values after invariant
//! checks. All logarithms are natural.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ceil_tol, is_perfect_square, isqrt};

/// Largest admissible `tau^(-2p)`.
pub const SAMPLE_WINDOW_LIMIT: f64 = (1u64 << 62) as f64;

pub const DEFAULT_THRESHOLD_CONSTANT: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Asymptotic,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// Outlier threshold: pairs with `|ip| >= rho * d` are reported.
    pub rho: f64,
    /// Background threshold.
    pub tau: f64,
    /// Tradeoff exponent, `t ~ n^gamma`.
    pub gamma: f64,
    pub delta_cap: f64,
    /// Second-level tradeoff for the two-level search.
    pub kappa: Option<f64>,
    pub t: usize,
    pub p: u32,
    pub s: u64,
    pub iterations: usize,
    pub mode: Mode,
    /// Block pairs scoring at least `threshold_constant * rho^p * s` are marked.
    pub threshold_constant: f64,
    /// Abort when one iteration marks more block pairs; `None` means `n`.
    pub mark_cap: Option<usize>,
}

/// User-supplied values. `t`, `p` and `s` are all-or-nothing; `iterations`
/// may be overridden on its own.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub t: Option<usize>,
    pub p: Option<u32>,
    pub s: Option<u64>,
    pub iterations: Option<usize>,
}

impl Overrides {
    pub fn explicit(t: usize, p: u32, s: u64, iterations: usize) -> Self {
        Self {
            t: Some(t),
            p: Some(p),
            s: Some(s),
            iterations: Some(iterations),
        }
    }
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {v} must lie in (0, 1)"
        )))
    }
}

fn check_thresholds(rho: f64, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < rho && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "thresholds must satisfy 0 < tau < rho <= 1, got rho = {rho}, tau = {tau}"
        )));
    }
    Ok(())
}

/// The integer `t` with `n^gamma <= t < n^gamma + 1`.
pub fn derive_block_size(n: usize, gamma: f64) -> Result<usize> {
    check_unit_open("gamma", gamma)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n = {n} must be at least 2"
        )));
    }
    Ok(ceil_tol((n as f64).powf(gamma)) as usize)
}

/// Left end of the window `[x, x + 2)` that the tensor power must fall in.
pub fn power_window_start(t: usize, n: usize, rho: f64, tau: f64) -> Result<f64> {
    check_thresholds(rho, tau)?;
    if n < 3 || t == 0 {
        return Err(Error::InvalidParameter(format!(
            "power derivation needs n >= 3 and t >= 1, got n = {n}, t = {t}"
        )));
    }
    let n = n as f64;
    Ok(((t as f64).ln() + 5.0 * n.ln().ln() + 128f64.ln()) / (rho / tau).ln())
}

/// The unique even integer in `[x, x + 2)` for `x` from [`power_window_start`].
pub fn derive_power(t: usize, n: usize, rho: f64, tau: f64) -> Result<u32> {
    let x = power_window_start(t, n, rho, tau)?;
    Ok((2.0 * ceil_tol(x / 2.0)) as u32)
}

/// Least perfect square in `[tau^(-2p), 2 tau^(-2p)]`.
pub fn derive_sample_size(tau: f64, p: u32) -> Result<u64> {
    check_unit_open("tau", tau)?;
    if p == 0 || p % 2 == 1 {
        return Err(Error::OddPower(p));
    }
    let window = tau.powf(-2.0 * p as f64);
    if window.is_nan() || window > SAMPLE_WINDOW_LIMIT {
        return Err(Error::SampleOverflow { window });
    }
    let lo = ceil_tol(window) as u64;
    let mut root = isqrt(lo);
    if root * root < lo {
        root += 1;
    }
    let s = root * root;
    if s as f64 > 2.0 * window * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "no square in [{window}, {}]",
            2.0 * window
        )));
    }
    Ok(s)
}

/// `max(1, ceil((ln n)^2))`.
pub fn iteration_count(n: usize) -> usize {
    let l = (n.max(1) as f64).ln();
    (ceil_tol(l * l) as usize).max(1)
}

/// `log_tau(rho)`.
pub fn log_tau_rho(rho: f64, tau: f64) -> f64 {
    rho.ln() / tau.ln()
}

pub fn make_parameters(
    n: usize,
    d: usize,
    rho: f64,
    tau: f64,
    gamma: f64,
    delta_cap: f64,
    overrides: &Overrides,
) -> Result<Parameters> {
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    check_thresholds(rho, tau)?;
    check_unit_open("gamma", gamma)?;
    if delta_cap.is_nan() || delta_cap < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta_cap} must be >= 1"
        )));
    }
    let iterations = overrides.iterations.unwrap_or_else(|| iteration_count(n));
    let mut params = match (overrides.t, overrides.p, overrides.s) {
        (Some(t), Some(p), Some(s)) => Parameters {
            rho,
            tau,
            gamma,
            delta_cap,
            kappa: None,
            t,
            p,
            s,
            iterations,
            mode: Mode::Explicit,
            threshold_constant: DEFAULT_THRESHOLD_CONSTANT,
            mark_cap: None,
        },
        (None, None, None) => {
            let ratio = log_tau_rho(rho, tau);
            let bound = 1.0 - 1.0 / delta_cap;
            if rho >= 1.0 || ratio > bound {
                return Err(Error::SeparationViolated {
                    log_tau_rho: ratio,
                    bound,
                });
            }
            let t = derive_block_size(n, gamma)?;
            let p = derive_power(t, n, rho, tau)?;
            let s = derive_sample_size(tau, p)?;
            Parameters {
                rho,
                tau,
                gamma,
                delta_cap,
                kappa: None,
                t,
                p,
                s,
                iterations,
                mode: Mode::Asymptotic,
                threshold_constant: DEFAULT_THRESHOLD_CONSTANT,
                mark_cap: None,
            }
        }
        _ => {
            return Err(Error::InvalidParameter(
                "explicit mode needs all of t, p and s".into(),
            ))
        }
    };
    params.iterations = iterations;
    params.validate()?;
    Ok(params)
}

impl Parameters {
    /// Explicit-mode parameters with `gamma = 0.5`, `delta = 1` recorded as echoes.
    pub fn explicit(
        rho: f64,
        tau: f64,
        t: usize,
        p: u32,
        s: u64,
        iterations: usize,
    ) -> Result<Self> {
        let p = Self {
            rho,
            tau,
            gamma: 0.5,
            delta_cap: 1.0,
            kappa: None,
            t,
            p,
            s,
            iterations,
            mode: Mode::Explicit,
            threshold_constant: DEFAULT_THRESHOLD_CONSTANT,
            mark_cap: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_threshold_constant(mut self, c: f64) -> Self {
        self.threshold_constant = c;
        self
    }

    pub fn with_mark_cap(mut self, cap: Option<usize>) -> Self {
        self.mark_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_thresholds(self.rho, self.tau)?;
        check_unit_open("gamma", self.gamma)?;
        if let Some(k) = self.kappa {
            check_unit_open("kappa", k)?;
        }
        if self.delta_cap.is_nan() || self.delta_cap < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "delta = {} must be >= 1",
                self.delta_cap
            )));
        }
        if self.t == 0 {
            return Err(Error::InvalidParameter("t must be at least 1".into()));
        }
        if self.p == 0 || self.p % 2 == 1 {
            return Err(Error::OddPower(self.p));
        }
        if self.s == 0 || !is_perfect_square(self.s) {
            return Err(Error::NonSquareSample(self.s));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.threshold_constant >= 0.0 && self.threshold_constant.is_finite()) {
            return Err(Error::InvalidParameter(
                "threshold constant must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// `|I_1| = |I_2| = sqrt(s)`.
    pub fn sqrt_s(&self) -> usize {
        isqrt(self.s) as usize
    }

    /// Score cutoff `c * rho^p * s` for marking a block pair.
    pub fn marking_threshold(&self) -> f64 {
        self.threshold_constant * self.rho.powi(self.p as i32) * self.s as f64
    }

    /// Serialize as `key=value` lines.
    pub fn to_config_string(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let mut out = String::new();
        let mode = match self.mode {
            Mode::Asymptotic => "asymptotic",
            Mode::Explicit => "explicit",
        };
        let _ = writeln!(out, "mode={mode}");
        let _ = writeln!(out, "rho={}", self.rho);
        let _ = writeln!(out, "tau={}", self.tau);
        let _ = writeln!(out, "gamma={}", self.gamma);
        let _ = writeln!(out, "delta={}", self.delta_cap);
        let _ = writeln!(out, "kappa={}", opt(self.kappa.map(|k| k.to_string())));
        let _ = writeln!(out, "t={}", self.t);
        let _ = writeln!(out, "p={}", self.p);
        let _ = writeln!(out, "s={}", self.s);
        let _ = writeln!(out, "iterations={}", self.iterations);
        let _ = writeln!(out, "threshold_constant={}", self.threshold_constant);
        let _ = writeln!(
            out,
            "mark_cap={}",
            opt(self.mark_cap.map(|c| c.to_string()))
        );
        out
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = Self {
            rho: f64::NAN,
            tau: f64::NAN,
            gamma: 0.5,
            delta_cap: 1.0,
            kappa: None,
            t: 0,
            p: 0,
            s: 0,
            iterations: 1,
            mode: Mode::Explicit,
            threshold_constant: DEFAULT_THRESHOLD_CONSTANT,
            mark_cap: None,
        };
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: k + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
                v.parse().ok()
            }
            let parsed = match key {
                "mode" => match value {
                    "asymptotic" => {
                        p.mode = Mode::Asymptotic;
                        Some(())
                    }
                    "explicit" => {
                        p.mode = Mode::Explicit;
                        Some(())
                    }
                    _ => None,
                },
                "rho" => num(value).map(|v| p.rho = v),
                "tau" => num(value).map(|v| p.tau = v),
                "gamma" => num(value).map(|v| p.gamma = v),
                "delta" => num(value).map(|v| p.delta_cap = v),
                "kappa" if value == "none" => {
                    p.kappa = None;
                    Some(())
                }
                "kappa" => num(value).map(|v| p.kappa = Some(v)),
                "t" => num(value).map(|v| p.t = v),
                "p" => num(value).map(|v| p.p = v),
                "s" => num(value).map(|v| p.s = v),
                "iterations" => num(value).map(|v| p.iterations = v),
                "threshold_constant" => num(value).map(|v| p.threshold_constant = v),
                "mark_cap" if value == "none" => {
                    p.mark_cap = None;
                    Some(())
                }
                "mark_cap" => num(value).map(|v| p.mark_cap = Some(v)),
                _ => return Err(bad(format!("unknown key {key:?}"))),
            };
            parsed.ok_or_else(|| bad(format!("invalid value {value:?} for {key}")))?;
        }
        p.validate()?;
        Ok(p)
    }
}

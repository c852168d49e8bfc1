//! Float-to-integer rounding that tolerates representation error.
//!
//! Quantities such as `1000^(1/3)` or `0.1^-4` come out of `powf` one ulp
//! away from the integer they denote; plain `ceil`/`floor` would then be off
//! by one.

const REL_TOL: f64 = 1e-9;

fn near_integer(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= REL_TOL * r.abs().max(1.0)).then_some(r)
}

/// Smallest integer `>= x`, treating values within relative 1e-9 of an
/// integer as that integer.
pub fn ceil_tol(x: f64) -> f64 {
    near_integer(x).unwrap_or_else(|| x.ceil())
}

/// Largest integer `<= x`, with the same tolerance as [`ceil_tol`].
pub fn floor_tol(x: f64) -> f64 {
    near_integer(x).unwrap_or_else(|| x.floor())
}

/// Smallest integer inner product satisfying `|ip| >= fraction * d`.
pub fn ip_threshold(fraction: f64, d: usize) -> i64 {
    ceil_tol(fraction * d as f64) as i64
}

pub fn is_perfect_square(v: u64) -> bool {
    let r = isqrt(v);
    r * r == v
}

pub fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > v) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= v) {
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerant_rounding() {
        assert_eq!(ceil_tol(1000f64.powf(1.0 / 3.0)), 10.0);
        assert_eq!(ceil_tol(9.2), 10.0);
        assert_eq!(floor_tol(0.1f64.powi(-4)), 10000.0);
        assert_eq!(floor_tol(614.4), 614.0);
    }

    #[test]
    fn thresholds() {
        assert_eq!(ip_threshold(0.5, 1024), 512);
        assert_eq!(ip_threshold(3.0 / 5.0, 5), 3);
        assert_eq!(ip_threshold(0.4, 2048), 820);
    }

    #[test]
    fn squares() {
        assert!(is_perfect_square(0));
        assert!(is_perfect_square(10000));
        assert!(!is_perfect_square(10001));
        assert_eq!(isqrt(99), 9);
        assert_eq!(isqrt(u32::MAX as u64 * u32::MAX as u64), u32::MAX as u64);
    }
}

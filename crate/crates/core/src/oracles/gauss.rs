//! Standard normal tail probabilities.
//!
//! Everything routes through `libm::erfc` (a pure-Rust port of the FreeBSD
//! msun routine), so results do not depend on the platform math library.

use std::f64::consts::FRAC_1_SQRT_2;

/// `P(Z <= z)` for standard normal `Z`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `P(Z >= z)` for standard normal `Z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `P(lo <= Z <= hi)`. Evaluated in whichever tail keeps both terms small so
/// narrow intervals far from zero do not cancel catastrophically.
pub fn normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// erfc via Maclaurin series for erf on |x| < 2 and a Lentz continued
    /// fraction beyond; independent of the libm rational approximations.
    fn reference_erfc(x: f64) -> f64 {
        if x < 0.0 {
            return 2.0 - reference_erfc(-x);
        }
        if x < 2.0 {
            // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
            let mut term = x;
            let mut sum = x;
            let x2 = x * x;
            let mut n = 0.0;
            loop {
                n += 1.0;
                term *= -x2 / n;
                let contrib = term / (2.0 * n + 1.0);
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            1.0 - sum * std::f64::consts::FRAC_2_SQRT_PI
        } else {
            // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
            let tiny = 1e-300;
            let mut f = x;
            let mut c = x;
            let mut d = 0.0;
            for k in 1..500 {
                let a = k as f64 / 2.0;
                d = x + a * d;
                if d.abs() < tiny {
                    d = tiny;
                }
                c = x + a / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                d = 1.0 / d;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            (-x * x).exp() / std::f64::consts::PI.sqrt() / f
        }
    }

    #[test]
    fn symmetric_points() {
        assert_eq!(normal_sf(0.0), 0.5);
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_sf(0.5) - 0.308_537_538_725_986_9).abs() < 1e-12);
        assert!((normal_interval(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_series_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let z: f64 = rng.random_range(-9.0..9.0);
            let r_sf = 0.5 * reference_erfc(z * FRAC_1_SQRT_2);
            let r_cdf = 0.5 * reference_erfc(-z * FRAC_1_SQRT_2);
            assert!((normal_sf(z) - r_sf).abs() < 1e-12, "sf at {z}");
            assert!((normal_cdf(z) - r_cdf).abs() < 1e-12, "cdf at {z}");
        }
    }

    #[test]
    fn interval_edges() {
        assert_eq!(normal_interval(1.0, 1.0), 0.0);
        assert_eq!(normal_interval(2.0, 1.0), 0.0);
        assert!((normal_interval(-1e9, 1e9) - 1.0).abs() < 1e-12);
        // narrow interval in the far tail stays positive
        let p = normal_interval(8.0, 8.001);
        assert!(p > 0.0 && p < 1e-14);
    }
}

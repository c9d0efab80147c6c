//! Combinatorics of the random partition: generalized factorial coefficients
//! and the V(n, K) integral of the exchangeable partition probability function.

use super::quadrature::integrate_log_real_line;
use super::special::{log_add_exp, log_gamma};
use super::SignedLogValue;
use crate::error::{Error, Result};

/// Row `n` of ln D(n, K) for K = 0..=n, where
/// D(n, K) = (-1)^n C(n, K; -γ) is the sign-folded central generalized
/// factorial coefficient.
///
/// Substituting α = -γ into C(n,K;α) = α C(n-1,K-1;α) + (Kα - n + 1) C(n-1,K;α)
/// and multiplying by (-1)^n gives a recursion with nonnegative coefficients:
///
///   D(n, K) = γ D(n-1, K-1) + (Kγ + n - 1) D(n-1, K),
///
/// with D(0,0) = 1 and D(n,0) = 0 for n >= 1. Every term is nonnegative, so
/// the recursion is carried out in log space without cancellation.
pub fn log_gen_factorial_row(n: usize, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    let ln_gamma = gamma.ln();
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    for m in 1..=n {
        // Update in place from high K down so row[k-1] still holds m-1 values.
        for k in (1..=m).rev() {
            let left = ln_gamma + row[k - 1];
            let stay = if k < m {
                (k as f64 * gamma + (m - 1) as f64).ln() + row[k]
            } else {
                f64::NEG_INFINITY
            };
            row[k] = log_add_exp(left, stay);
        }
        row[0] = f64::NEG_INFINITY;
    }
    Ok(row)
}

/// D(n, K) = (-1)^n C(n, K; -γ) as a signed log value. K > n yields zero.
pub fn gen_factorial_coeff_signed(n: usize, k: usize, gamma: f64) -> Result<SignedLogValue> {
    if k > n {
        return Ok(SignedLogValue::zero());
    }
    let row = log_gen_factorial_row(n, gamma)?;
    Ok(SignedLogValue::from_log(row[k]))
}

/// ln V(n, K) for the normalized-gamma mixture with a 1-shifted Poisson(Λ)
/// number of components and Gamma(γ, 1) unnormalized weights:
///
///   V(n,K) = Λ^{K-1}/Γ(n) ∫_0^∞ u^{n-1} [Λ + K(1+u)^γ] (1+u)^{-n-γ(K+1)}
///            · exp(-Λ[1 - (1+u)^{-γ}]) du.
///
/// The integral is taken over y = ln u on the real line, where the integrand
/// is a single peak near u = n/(γK) for every parameter range; with
/// r = ln(1 + u) its logarithm is
///
///   n y - (n + γK) r + ln(K + Λ e^{-γr}) + Λ expm1(-γr).
pub fn v_integral_log(n: usize, k: usize, gamma: f64, lambda: f64) -> Result<f64> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::domain(format!("V(n, K) requires 1 <= K <= n (n={n}, K={k})")));
    }
    if !(gamma > 0.0 && lambda > 0.0) {
        return Err(Error::domain("gamma and lambda must be positive"));
    }
    let nf = n as f64;
    let kf = k as f64;
    let log_f = |y: f64| -> f64 {
        // ln(1 + e^y) without overflow
        let r = if y > 30.0 { y + (-y).exp().ln_1p() } else { y.exp().ln_1p() };
        let decay = (-gamma * r).exp();
        nf * y - (nf + gamma * kf) * r + (kf + lambda * decay).ln() + lambda * (-gamma * r).exp_m1()
    };
    let y0 = (nf / (gamma * kf)).ln();
    let log_int = integrate_log_real_line(log_f, y0, 1e-10)?;
    Ok((kf - 1.0) * lambda.ln() - log_gamma(nf)? + log_int)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_small_values() {
        let d = gen_factorial_coeff_signed(1, 1, 0.68).unwrap();
        assert!((d.to_f64() - 0.68).abs() < 1e-15);
        let d = gen_factorial_coeff_signed(2, 1, 1.0).unwrap();
        assert!((d.to_f64() - 2.0).abs() < 1e-14);
        for g in [0.1, 0.5, 2.0] {
            let d = gen_factorial_coeff_signed(3, 3, g).unwrap();
            assert!((d.to_f64() / g.powi(3) - 1.0).abs() < 1e-14);
        }
        assert_eq!(gen_factorial_coeff_signed(2, 3, 1.0).unwrap().sign(), 0);
        assert_eq!(gen_factorial_coeff_signed(3, 0, 1.0).unwrap().sign(), 0);
        assert_eq!(gen_factorial_coeff_signed(0, 0, 1.0).unwrap().to_f64(), 1.0);
    }

    #[test]
    fn hand_unrolled_n3() {
        // D(3,1) = (γ+2)(γ+1)γ, D(3,2) = 3γ^2(γ+1), D(3,3) = γ^3
        let g = 0.7;
        let row = log_gen_factorial_row(3, g).unwrap();
        let expect = [(g + 2.0) * (g + 1.0) * g, 3.0 * g * g * (g + 1.0), g * g * g];
        for k in 1..=3 {
            assert!((row[k].exp() / expect[k - 1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn v_single_observation() {
        for (g, l) in [(0.68, 7.0), (0.2, 1.5), (3.0, 0.3)] {
            let v = v_integral_log(1, 1, g, l).unwrap();
            assert!((v - (1.0f64 / g).ln()).abs() < 1e-9, "γ={g} Λ={l}: {v}");
        }
    }

    #[test]
    fn prior_on_k_normalizes_n3() {
        let (g, l) = (1.0, 1.0);
        let row = log_gen_factorial_row(3, g).unwrap();
        let total: f64 = (1..=3)
            .map(|k| (v_integral_log(3, k, g, l).unwrap() + row[k]).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn invalid_arguments() {
        assert!(v_integral_log(3, 0, 1.0, 1.0).is_err());
        assert!(v_integral_log(3, 4, 1.0, 1.0).is_err());
        assert!(log_gen_factorial_row(3, 0.0).is_err());
    }
}

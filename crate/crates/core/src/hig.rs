//! The hypergeometric inverse gamma (HIG) prior for a Hamming scale.
//!
//! With ω = exp(-1/σ) the prior density on (0, 1) is
//!
//!   f(ω | v, w) = (1 + (m - 1) ω)^{-(v+w)} ω^w / I(v, w),
//!
//! where I(v, w) = m^{-(v+w)} / (w + 1) · 2F1(1, v + w; w + 2; (m - 1)/m).
//!
//! Writing t = (m - 1) ω / (1 + (m - 1) ω) turns the ω-density into a
//! Beta(w + 1, v - 1) density truncated to (0, (m - 1)/m), so
//!
//!   I(v, w) = B_x(w + 1, v - 1) / (m - 1)^{w+1},   x = (m - 1)/m,
//!
//! and the distribution function of ω is a ratio of incomplete beta integrals.
//! The sampler inverts that ratio; [`omega_cdf`] integrates the density
//! numerically and is kept as the independent reference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamming::{gini_normalized, sigma_from_omega, SIGMA_FLOOR};
use crate::numerics::{integrate_log, ln_beta_inc, ln_gauss_2f1_1bc};

/// Bracket kept for ω when mapping draws back to σ.
const OMEGA_MIN: f64 = 1e-15;
const OMEGA_MAX: f64 = 1.0 - 1e-15;

/// Hyperparameters (v, w) of a HIG prior on a variable with `m` modalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HIGParams {
    pub v: f64,
    pub w: f64,
    pub m: usize,
}

impl HIGParams {
    pub fn new(v: f64, w: f64, m: usize) -> Result<Self> {
        if !(v > 0.0 && w > 0.0 && v.is_finite() && w.is_finite()) {
            return Err(Error::domain(format!("HIG parameters must be positive (v={v}, w={w})")));
        }
        if m == 0 {
            return Err(Error::domain("modality count must be at least 1"));
        }
        Ok(Self { v, w, m })
    }

    /// Default (v, w) for a variable with `m` modalities.
    ///
    /// Binary variables get (6, 0.25); three, four and five levels get
    /// (5, 0.25), (4.5, 0.25) and (4.25, 0.25); six or more levels get (3, 0.5).
    pub fn default_for(m: usize) -> Self {
        let (v, w) = match m {
            0..=2 => (6.0, 0.25),
            3 => (5.0, 0.25),
            4 => (4.5, 0.25),
            5 => (4.25, 0.25),
            _ => (3.0, 0.5),
        };
        Self { v, w, m: m.max(1) }
    }

    pub fn defaults_for(modality_counts: &[usize]) -> Vec<Self> {
        modality_counts.iter().map(|&m| Self::default_for(m)).collect()
    }
}

fn check(params: &HIGParams) -> Result<()> {
    if !(params.v > 0.0 && params.w >= 0.0) || params.m == 0 {
        return Err(Error::domain(format!(
            "invalid HIG parameters (v={}, w={}, m={})",
            params.v, params.w, params.m
        )));
    }
    Ok(())
}

/// ln I(v, w) from the hypergeometric series.
pub fn norm_const_log(params: &HIGParams) -> Result<f64> {
    check(params)?;
    ln_power_integral(params.v + params.w, params.w, params.m)
}

/// ln ∫₀¹ ω^a (1 + (m - 1)ω)^{-s} dω.
fn ln_power_integral(s: f64, a: f64, m: usize) -> Result<f64> {
    let mf = m as f64;
    let z = (mf - 1.0) / mf;
    Ok(-s * mf.ln() - (a + 1.0).ln() + ln_gauss_2f1_1bc(s, a + 2.0, z)?)
}

/// ln I(v, w) from the truncated-beta representation.
pub fn norm_const_log_beta(params: &HIGParams) -> Result<f64> {
    check(params)?;
    let HIGParams { v, w, m } = *params;
    if m == 1 {
        return Ok(-(w + 1.0).ln());
    }
    let mm1 = m as f64 - 1.0;
    Ok(ln_beta_inc(mm1 / m as f64, w + 1.0, v - 1.0)? - (w + 1.0) * mm1.ln())
}

/// ln g(ω | v, w), the unnormalized ω-density.
pub fn log_kernel_omega(omega: f64, params: &HIGParams) -> f64 {
    let mm1 = params.m as f64 - 1.0;
    -(params.v + params.w) * (mm1 * omega).ln_1p() + params.w * omega.ln()
}

/// ln f(ω | v, w).
pub fn log_density_omega(omega: f64, params: &HIGParams) -> Result<f64> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::domain(format!("omega must lie in (0, 1), got {omega}")));
    }
    Ok(log_kernel_omega(omega, params) - norm_const_log(params)?)
}

/// ln f(σ | v, w).
pub fn log_density_sigma(sigma: f64, params: &HIGParams) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let HIGParams { v, w, m } = *params;
    let mm1 = m as f64 - 1.0;
    Ok(-norm_const_log(params)? - (v + w) * (mm1 * (-1.0 / sigma).exp()).ln_1p()
        - (w + 1.0) / sigma
        - 2.0 * sigma.ln())
}

/// P(ω <= ω̃) by adaptive quadrature of the ω-density.
pub fn omega_cdf(omega_tilde: f64, params: &HIGParams) -> Result<f64> {
    check(params)?;
    if !(0.0..=1.0).contains(&omega_tilde) {
        return Err(Error::domain(format!("omega must lie in [0, 1], got {omega_tilde}")));
    }
    if omega_tilde == 0.0 {
        return Ok(0.0);
    }
    if omega_tilde == 1.0 {
        return Ok(1.0);
    }
    let p = *params;
    let log_part = integrate_log(|o| log_kernel_omega(o, &p), 0.0, omega_tilde, 1e-11)?;
    Ok((log_part - norm_const_log(params)?).exp().clamp(0.0, 1.0))
}

/// P(ω <= ω̃) in closed form:
///
///   ω̃^{w+1} (1 + (m - 1) ω̃)^{-(v+w)} 2F1(1, v + w; w + 2; t̃) / ((w + 1) I(v, w)),
///
/// with t̃ = (m - 1) ω̃ / (1 + (m - 1) ω̃).
pub fn omega_cdf_closed_form(omega_tilde: f64, params: &HIGParams) -> Result<f64> {
    check(params)?;
    if !(0.0..=1.0).contains(&omega_tilde) {
        return Err(Error::domain(format!("omega must lie in [0, 1], got {omega_tilde}")));
    }
    if omega_tilde == 0.0 {
        return Ok(0.0);
    }
    let HIGParams { v, w, m } = *params;
    let a = (m as f64 - 1.0) * omega_tilde;
    let t = a / (1.0 + a);
    let log_f = (w + 1.0) * omega_tilde.ln() - (v + w) * a.ln_1p() - (w + 1.0).ln()
        + ln_gauss_2f1_1bc(v + w, w + 2.0, t)?
        - norm_const_log(params)?;
    Ok(log_f.exp().clamp(0.0, 1.0))
}

/// P(ω <= ω̃) as a ratio of incomplete beta integrals.
pub fn omega_cdf_beta(omega_tilde: f64, params: &HIGParams) -> Result<f64> {
    check(params)?;
    if !(0.0..=1.0).contains(&omega_tilde) {
        return Err(Error::domain(format!("omega must lie in [0, 1], got {omega_tilde}")));
    }
    if omega_tilde == 0.0 {
        return Ok(0.0);
    }
    if omega_tilde == 1.0 {
        return Ok(1.0);
    }
    let HIGParams { v, w, m } = *params;
    if m == 1 {
        return Ok(omega_tilde.powf(w + 1.0));
    }
    let mm1 = m as f64 - 1.0;
    let a = mm1 * omega_tilde;
    let t = a / (1.0 + a);
    let x = mm1 / m as f64;
    let num = ln_beta_inc(t, w + 1.0, v - 1.0)?;
    let den = ln_beta_inc(x, w + 1.0, v - 1.0)?;
    Ok((num - den).exp().clamp(0.0, 1.0))
}

/// Draws ω by inverting the distribution function.
///
/// The equation B_t(w + 1, v - 1) = u B_x(w + 1, v - 1) is solved for t by a
/// safeguarded Newton iteration in ln t.
pub fn sample_omega<R: Rng + ?Sized>(params: &HIGParams, rng: &mut R) -> Result<f64> {
    check(params)?;
    let u: f64 = rng.random();
    omega_quantile(u, params)
}

/// Inverse of the ω distribution function.
pub fn omega_quantile(u: f64, params: &HIGParams) -> Result<f64> {
    check(params)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("probability must lie in [0, 1], got {u}")));
    }
    let HIGParams { v, w, m } = *params;
    if m == 1 {
        return Ok(u.powf(1.0 / (w + 1.0)).clamp(OMEGA_MIN, OMEGA_MAX));
    }
    let a = w + 1.0;
    let b = v - 1.0;
    let mm1 = m as f64 - 1.0;
    let x = mm1 / m as f64;
    let ln_x = x.ln();
    let ln_total = ln_beta_inc(x, a, b)?;
    let t = if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        x
    } else {
        let target = u.ln() + ln_total;
        let g = |s: f64| -> Result<(f64, f64)> {
            let t = s.exp();
            let lb = ln_beta_inc(t, a, b)?;
            // d/ds ln B_{e^s} = t^a (1 - t)^{b-1} / B_t
            let slope = (a * s + (b - 1.0) * (-t).ln_1p() - lb).exp();
            Ok((lb - target, slope))
        };
        // Near zero, ln B_t ≈ a ln t - ln a.
        let mut s = ((target + a.ln()) / a).min(ln_x - 1e-3);
        let mut hi = ln_x;
        let mut lo = f64::NEG_INFINITY;
        let mut converged = false;
        for _ in 0..200 {
            let (f, slope) = g(s)?;
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            if f.abs() < 1e-14 {
                converged = true;
                break;
            }
            let mut next = s - f / slope;
            let inside = next < hi && (lo == f64::NEG_INFINITY || next > lo) && next.is_finite();
            if !inside {
                next = if lo == f64::NEG_INFINITY {
                    hi - 2.0 * (hi - s).abs().max(1.0)
                } else {
                    0.5 * (lo + hi)
                };
            }
            if (next - s).abs() < 1e-13 * s.abs().max(1.0) {
                s = next;
                converged = true;
                break;
            }
            s = next;
        }
        if !converged {
            return Err(Error::RootFinding(format!(
                "omega quantile did not converge (u={u}, v={v}, w={w}, m={m})"
            )));
        }
        s.exp().min(x)
    };
    let omega = t / (mm1 * (1.0 - t));
    Ok(omega.clamp(OMEGA_MIN, OMEGA_MAX))
}

/// Draws σ from HIG(v, w).
pub fn sample_sigma<R: Rng + ?Sized>(params: &HIGParams, rng: &mut R) -> Result<f64> {
    let omega = sample_omega(params, rng)?;
    Ok(sigma_from_omega(omega).max(SIGMA_FLOOR))
}

/// Updated hyperparameters after `n` observations of which `match_count`
/// equal the center.
pub fn posterior_params(params: &HIGParams, n: u64, match_count: u64) -> Result<HIGParams> {
    if match_count > n {
        return Err(Error::invalid(format!("match count {match_count} exceeds n = {n}")));
    }
    Ok(HIGParams {
        v: params.v + match_count as f64,
        w: params.w + (n - match_count) as f64,
        m: params.m,
    })
}

/// Mean and mode of ω under HIG(v, w). The mean is I(v - 1, w + 1) / I(v, w):
/// raising the power of ω leaves the exponent v + w unchanged.
pub fn omega_mean_and_mode(params: &HIGParams) -> Result<(f64, f64)> {
    let first_moment = ln_power_integral(params.v + params.w, params.w + 1.0, params.m)?;
    let mean = (first_moment - norm_const_log(params)?).exp();
    let threshold = params.v * (params.m as f64 - 1.0);
    let mode = if params.w < threshold {
        params.w / threshold
    } else {
        1.0
    };
    Ok((mean, mode))
}

/// ln of the marginal likelihood of one column given its center, with the
/// scale integrated out: ln I(v*, w*) - ln I(v, w).
pub fn marginal_loglik_column(column: &[u32], center: u32, params: &HIGParams) -> Result<f64> {
    if column.is_empty() {
        return Ok(0.0);
    }
    if let Some(c) = column.iter().chain(std::iter::once(&center)).find(|c| **c as usize >= params.m) {
        return Err(Error::invalid(format!("code {c} out of range for m = {}", params.m)));
    }
    let matches = column.iter().filter(|&&x| x == center).count() as u64;
    let post = posterior_params(params, column.len() as u64, matches)?;
    Ok(norm_const_log(&post)? - norm_const_log(params)?)
}

/// Monte Carlo sample of the normalized Gini index implied by independent
/// HIG priors on every variable.
pub fn gini_prior_montecarlo<R: Rng + ?Sized>(params: &[HIGParams], draws: usize, rng: &mut R) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::invalid("draws must be at least 1"));
    }
    let m: Vec<usize> = params.iter().map(|p| p.m).collect();
    let mut out = Vec::with_capacity(draws);
    let mut sigma = vec![0.0; params.len()];
    for _ in 0..draws {
        for (s, p) in sigma.iter_mut().zip(params) {
            *s = sample_sigma(p, rng)?;
        }
        out.push(gini_normalized(&sigma, &m)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_norm(v: f64, w: f64, m: usize) -> f64 {
        let mm1 = m as f64 - 1.0;
        integrate(
            |o: f64| (1.0 + mm1 * o).powf(-(v + w)) * o.powf(w),
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap()
        .value
    }

    #[test]
    fn normalizer_matches_quadrature() {
        let p = HIGParams::new(2.0, 1.0, 3).unwrap();
        let q = quad_norm(2.0, 1.0, 3);
        assert!((norm_const_log(&p).unwrap() - q.ln()).abs() < 1e-10);
        assert!((norm_const_log_beta(&p).unwrap() - q.ln()).abs() < 1e-10);
    }

    #[test]
    fn normalizer_boundaries() {
        let one = HIGParams { v: 2.0, w: 0.7, m: 1 };
        assert!((norm_const_log(&one).unwrap() + 1.7f64.ln()).abs() < 1e-14);
        // w = 0: ∫ (1 + (m-1) ω)^{-v} dω = (1 - m^{1-v}) / ((v - 1)(m - 1))
        let p = HIGParams { v: 3.0, w: 0.0, m: 2 };
        let exact: f64 = (1.0 - 2f64.powf(-2.0)) / 2.0;
        assert!((norm_const_log(&p).unwrap() - exact.ln()).abs() < 1e-12);
    }

    #[test]
    fn cdf_routes_agree() {
        let p = HIGParams::new(6.0, 0.25, 2).unwrap();
        for o in [0.01, 0.2, 0.5, 0.9] {
            let q = omega_cdf(o, &p).unwrap();
            assert!((omega_cdf_closed_form(o, &p).unwrap() - q).abs() < 1e-9, "{o}");
            assert!((omega_cdf_beta(o, &p).unwrap() - q).abs() < 1e-9, "{o}");
        }
        assert_eq!(omega_cdf(0.0, &p).unwrap(), 0.0);
        assert_eq!(omega_cdf(1.0, &p).unwrap(), 1.0);
        assert!(omega_cdf(1.5, &p).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [
            HIGParams::new(6.0, 0.25, 2).unwrap(),
            HIGParams::new(3.0, 0.5, 6).unwrap(),
            HIGParams::new(0.5, 40.0, 4).unwrap(),
            HIGParams::new(120.0, 3.0, 3).unwrap(),
        ] {
            for u in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let o = omega_quantile(u, &p).unwrap();
                let back = omega_cdf_beta(o, &p).unwrap();
                assert!((back - u).abs() < 1e-9 * u.max(1e-3), "{p:?} u={u} back={back}");
            }
        }
    }

    #[test]
    fn posterior_update() {
        let p = HIGParams::new(5.0, 0.25, 3).unwrap();
        assert_eq!(posterior_params(&p, 0, 0).unwrap(), p);
        let q = posterior_params(&p, 10, 7).unwrap();
        assert_eq!((q.v, q.w), (12.0, 3.25));
        assert_eq!(posterior_params(&p, 4, 4).unwrap().w, 0.25);
        assert!(posterior_params(&p, 3, 4).is_err());
    }

    #[test]
    fn mode_formula() {
        let (_, mode) = omega_mean_and_mode(&HIGParams::new(6.0, 0.25, 2).unwrap()).unwrap();
        assert!((mode - 0.25 / 6.0).abs() < 1e-15);
        let (_, mode) = omega_mean_and_mode(&HIGParams::new(1.0, 3.0, 2).unwrap()).unwrap();
        assert_eq!(mode, 1.0);
    }

    #[test]
    fn samples_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = HIGParams::new(6.0, 0.25, 2).unwrap();
        for _ in 0..2000 {
            let s = sample_sigma(&p, &mut rng).unwrap();
            assert!(s > 0.0 && s.is_finite());
        }
    }
}

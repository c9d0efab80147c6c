mod oracle;

use approx::assert_relative_eq;
use hammix::hamming::{gini_normalized, omega, sigma_from_omega};
use hammix::hig::{
    gini_prior_montecarlo, log_density_omega, log_density_sigma, marginal_loglik_column,
    norm_const_log, norm_const_log_beta, omega_cdf, omega_cdf_beta, omega_cdf_closed_form,
    omega_mean_and_mode, omega_quantile, posterior_params, sample_sigma, HIGParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIPLES: [(f64, f64, usize); 3] = [(6.0, 0.25, 2), (3.0, 0.5, 6), (5.0, 0.25, 3)];

fn hig(v: f64, w: f64, m: usize) -> HIGParams {
    HIGParams::new(v, w, m).unwrap()
}

fn oracle_cdf(x: f64, h: &HIGParams) -> f64 {
    oracle::unit_interval_upto(|o| oracle::hig_kernel_omega(o, h.v, h.w, h.m), x) / oracle::hig_norm(h.v, h.w, h.m)
}

#[test]
fn normalizer_matches_quadrature() {
    for (v, w, m) in TRIPLES.into_iter().chain([(2.0, 1.0, 3), (1.5, 0.01, 4), (40.0, 3.0, 2)]) {
        let q = oracle::hig_norm(v, w, m);
        assert_relative_eq!(norm_const_log(&hig(v, w, m)).unwrap(), q.ln(), epsilon = 1e-12);
    }
}

#[test]
fn normalizer_routes_agree() {
    for (v, w, m) in TRIPLES.into_iter().chain([(1.5, 2.0, 7), (12.0, 0.1, 2)]) {
        let h = hig(v, w, m);
        assert_relative_eq!(norm_const_log(&h).unwrap(), norm_const_log_beta(&h).unwrap(), epsilon = 1e-12);
    }
}

#[test]
fn normalizer_without_w_has_antiderivative() {
    // ∫ (1 + (m-1)ω)^{-v} dω = (1 - m^{1-v}) / ((v - 1)(m - 1))
    for &(v, m) in &[(3.0, 2usize), (2.0, 3), (6.0, 2), (3.5, 6)] {
        let mf = m as f64;
        let exact = (1.0 - mf.powf(1.0 - v)) / ((v - 1.0) * (mf - 1.0));
        let boundary = HIGParams { v, w: 0.0, m };
        assert_relative_eq!(norm_const_log(&boundary).unwrap().exp(), exact, max_relative = 1e-13);
    }
}

#[test]
fn sigma_density_is_the_transformed_omega_density() {
    let h = hig(3.0, 0.5, 6);
    for &s in &[0.05, 0.3, 1.0, 4.0, 30.0] {
        let om = omega(s);
        // |dω/dσ| = ω / σ²
        let via_omega = log_density_omega(om, &h).unwrap() + om.ln() - 2.0 * s.ln();
        assert_relative_eq!(log_density_sigma(s, &h).unwrap(), via_omega, epsilon = 1e-12);
    }
    let mass = oracle::unit_interval(|t| {
        // σ = t / (1 - t) maps (0, 1) onto (0, ∞).
        let s = t / (1.0 - t);
        if t >= 1.0 || t <= 0.0 {
            0.0
        } else {
            log_density_sigma(s, &h).unwrap().exp() / (1.0 - t).powi(2)
        }
    });
    assert!((mass - 1.0).abs() < 1e-6, "sigma density mass {mass}");
}

#[test]
fn distribution_function_routes_agree_with_quadrature() {
    for (v, w, m) in TRIPLES.into_iter().chain([(2.0, 1.0, 3)]) {
        let h = hig(v, w, m);
        for &x in &[0.01, 0.2, 0.5, 0.9] {
            let reference = oracle_cdf(x, &h);
            assert_relative_eq!(omega_cdf(x, &h).unwrap(), reference, epsilon = 1e-9);
            assert_relative_eq!(omega_cdf_closed_form(x, &h).unwrap(), reference, epsilon = 1e-10);
            assert_relative_eq!(omega_cdf_beta(x, &h).unwrap(), reference, epsilon = 1e-10);
        }
    }
}

#[test]
fn quantile_inverts_distribution_function() {
    for (v, w, m) in TRIPLES {
        let h = hig(v, w, m);
        for &u in &[1e-9, 0.01, 0.3, 0.5, 0.77, 0.999] {
            let x = omega_quantile(u, &h).unwrap();
            assert_relative_eq!(oracle_cdf(x, &h), u, max_relative = 1e-7);
        }
    }
}

#[test]
fn sigma_sampler_passes_ks() {
    for (i, (v, w, m)) in TRIPLES.into_iter().enumerate() {
        let h = hig(v, w, m);
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_sigma(&h, &mut rng).unwrap()).collect();
        // σ is increasing in ω, so F_σ(s) = F_ω(e^{-1/s}).
        let d = oracle::ks_statistic(&draws, |s| oracle_cdf(omega(s), &h));
        assert!(d < oracle::ks_critical_1pct(draws.len()), "KS {d} for {h:?}");
    }
}

#[test]
fn mean_and_mode() {
    let h = hig(6.0, 0.25, 2);
    let (mean, mode) = omega_mean_and_mode(&h).unwrap();
    // Stationary point of w ln ω - (v + w) ln(1 + (m - 1)ω).
    assert_relative_eq!(mode, 0.25 / 6.0, max_relative = 1e-12);
    assert!((mode - 0.0417).abs() < 1e-4);
    let q = oracle::unit_interval(|o| o * oracle::hig_kernel_omega(o, 6.0, 0.25, 2)) / oracle::hig_norm(6.0, 0.25, 2);
    assert_relative_eq!(mean, q, max_relative = 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| omega(sample_sigma(&h, &mut rng).unwrap())).collect();
    let mc = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|x| (x - mc).powi(2)).sum::<f64>() / n as f64).sqrt();
    assert!((mc - mean).abs() < 3.0 * sd / (n as f64).sqrt());

    // Histogram peak of the draws sits in the bin containing the mode.
    let bins = 50;
    let mut hist = vec![0usize; bins];
    for x in &draws {
        hist[((x * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let peak = (0..bins).max_by_key(|&b| hist[b]).unwrap();
    assert!(peak <= 3, "histogram peak in bin {peak}");
}

#[test]
fn posterior_update_counts() {
    let h = hig(5.0, 0.25, 3);
    let post = posterior_params(&h, 10, 7).unwrap();
    assert_eq!((post.v, post.w, post.m), (12.0, 3.25, 3));
    assert!(posterior_params(&h, 3, 4).is_err());
}

#[test]
fn marginal_likelihood_of_two_binary_observations() {
    // v = w = 1, m = 2: prior density ω / (1 + ω)² / I(1, 1).
    let h = hig(1.0, 1.0, 2);
    let z = oracle::hig_norm(1.0, 1.0, 2);
    for (col, center) in [([0u32, 0], 0u32), ([0, 1], 0), ([1, 1], 0)] {
        let mism = col.iter().filter(|&&x| x != center).count() as i32;
        let q = oracle::unit_interval(|o| o * o.powi(mism) / (1.0 + o).powi(4)) / z;
        assert_relative_eq!(marginal_loglik_column(&col, center, &h).unwrap().exp(), q, max_relative = 1e-12);
    }
    assert_eq!(marginal_loglik_column(&[], 0, &h).unwrap(), 0.0);
    assert!(marginal_loglik_column(&[2], 0, &h).is_err());
}

#[test]
fn marginal_likelihood_total_probability() {
    let h = hig(3.0, 0.5, 3);
    for n in 1..=4 {
        let total: f64 = oracle::enumerate_space(&vec![3; n])
            .iter()
            .map(|col| marginal_loglik_column(col, 1, &h).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn gini_prior_matches_independent_sampler() {
    let priors = [hig(6.0, 0.25, 2), hig(5.0, 0.25, 3), hig(3.0, 0.5, 6)];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let lib = gini_prior_montecarlo(&priors, 4000, &mut rng).unwrap();
    // Reference draws by bisection on the quadrature distribution function.
    let m: Vec<usize> = priors.iter().map(|p| p.m).collect();
    let reference: Vec<f64> = (0..1000)
        .map(|_| {
            let scales: Vec<f64> = priors
                .iter()
                .map(|h| {
                    let u: f64 = rng.random();
                    let (mut lo, mut hi) = (0.0, 1.0);
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        if oracle_cdf(mid, h) < u {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    sigma_from_omega(0.5 * (lo + hi))
                })
                .collect();
            gini_normalized(&scales, &m).unwrap()
        })
        .collect();
    assert!(two_sample_ks(&lib, &reference) < 0.1);
}

#[test]
fn invalid_parameters_rejected() {
    assert!(HIGParams::new(0.0, 1.0, 2).is_err());
    assert!(HIGParams::new(1.0, -1.0, 2).is_err());
    assert!(HIGParams::new(1.0, 0.0, 2).is_err());
    assert!(HIGParams::new(1.0, 1.0, 0).is_err());
    assert!(log_density_omega(1.5, &hig(2.0, 1.0, 2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_normalizes(v in 0.2f64..30.0, w in 0.001f64..5.0, m in 2usize..10) {
        let h = hig(v, w, m);
        let mass = oracle::unit_interval(|o| log_density_omega(o, &h).unwrap().exp());
        prop_assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn conjugate_update_is_prior_times_likelihood(
        v in 0.5f64..10.0, w in 0.001f64..3.0, m in 2usize..7, n in 0u64..30, frac in 0.0f64..1.0, o in 0.01f64..0.99,
    ) {
        let matches = (frac * n as f64).floor() as u64;
        let h = hig(v, w, m);
        let post = posterior_params(&h, n, matches).unwrap();
        let lik = (n - matches) as f64 * o.ln() - n as f64 * ((m as f64 - 1.0) * o).ln_1p();
        let lhs = log_density_omega(o, &post).unwrap() - log_density_omega(o, &h).unwrap() - lik;
        // The difference is the log marginal likelihood, whatever ω is.
        let o2 = 0.5 * o + 0.25;
        let lik2 = (n - matches) as f64 * o2.ln() - n as f64 * ((m as f64 - 1.0) * o2).ln_1p();
        let rhs = log_density_omega(o2, &post).unwrap() - log_density_omega(o2, &h).unwrap() - lik2;
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }
}

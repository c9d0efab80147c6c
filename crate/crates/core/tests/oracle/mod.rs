//! Independent reference computations for the integration tests. Nothing in
//! here calls into the library's numerical routines.
#![allow(dead_code)]

/// All set partitions of n items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, max: u32, n: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            rec(prefix, max.max(l), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut prefix = vec![0];
    rec(&mut prefix, 0, n, &mut out);
    out
}

/// Block sizes of a restricted growth string.
pub fn block_sizes(rgs: &[u32]) -> Vec<usize> {
    let k = rgs.iter().max().map_or(0, |&m| m as usize + 1);
    let mut s = vec![0; k];
    for &l in rgs {
        s[l as usize] += 1;
    }
    s
}

/// Every vector of the product space with the given modality counts.
pub fn enumerate_space(m: &[usize]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &mj in m {
        let mut next = Vec::with_capacity(out.len() * mj);
        for v in &out {
            for c in 0..mj as u32 {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Hamming probability as a product of per-variable probabilities.
pub fn hamming_prob(x: &[u32], c: &[u32], sigma: &[f64], m: &[usize]) -> f64 {
    let mut p = 1.0;
    for j in 0..x.len() {
        let om = (-1.0 / sigma[j]).exp();
        let z = 1.0 + (m[j] as f64 - 1.0) * om;
        p *= if x[j] == c[j] { 1.0 / z } else { om / z };
    }
    p
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Gauss–Legendre rule with 20 nodes on [a, b], applied on `pieces` equal
/// subintervals.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 10] = [
        0.076_526_521_133_497_33,
        0.227_785_851_141_645_08,
        0.373_706_088_715_419_56,
        0.510_867_001_950_827_1,
        0.636_053_680_726_515_1,
        0.746_331_906_460_150_8,
        0.839_116_971_822_218_8,
        0.912_234_428_251_325_9,
        0.963_971_927_277_913_8,
        0.993_128_599_185_094_9,
    ];
    const W: [f64; 10] = [
        0.152_753_387_130_725_85,
        0.149_172_986_472_603_75,
        0.142_096_109_318_382_05,
        0.131_688_638_449_176_63,
        0.118_194_531_961_518_42,
        0.101_930_119_817_240_44,
        0.083_276_741_576_704_75,
        0.062_672_048_334_109_06,
        0.040_601_429_800_386_94,
        0.017_614_007_139_152_12,
    ];
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        let mid = lo + h / 2.0;
        let half = h / 2.0;
        let mut s = 0.0;
        for i in 0..10 {
            s += W[i] * (f(mid - half * X[i]) + f(mid + half * X[i]));
        }
        total += s * half;
    }
    total
}

/// Unnormalized HIG density of ω on (0, 1).
pub fn hig_kernel_omega(omega: f64, v: f64, w: f64, m: usize) -> f64 {
    (1.0 + (m as f64 - 1.0) * omega).powf(-(v + w)) * omega.powf(w)
}

/// Integral over (0, 1) after the substitution x = t^4, which smooths
/// algebraic singularities at the origin.
pub fn unit_interval<F: Fn(f64) -> f64>(f: F) -> f64 {
    gauss_legendre(|t| 4.0 * t.powi(3) * f(t.powi(4)), 0.0, 1.0, 200)
}

/// Integral over (0, x) with the same substitution.
pub fn unit_interval_upto<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let top = x.powf(0.25);
    gauss_legendre(|t| 4.0 * t.powi(3) * f(t.powi(4)), 0.0, top, 20)
}

/// Normalizing constant of the ω-density by quadrature.
pub fn hig_norm(v: f64, w: f64, m: usize) -> f64 {
    unit_interval(|o| hig_kernel_omega(o, v, w, m))
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// Pearson chi-square statistic.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

/// Upper 0.1% point of the chi-square distribution, Wilson–Hilferty.
pub fn chi_square_critical_001(df: usize) -> f64 {
    let k = df as f64;
    let z = 3.090_232;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

/// ln Γ(x) for x > 0 by upward recursion and the Stirling series.
pub fn ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 15.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z2 * z2 * z)
        - 1.0 / (1680.0 * z2 * z2 * z2 * z);
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// ₂F₁(1, b; c; z) by direct summation in double precision with
/// compensated addition.
pub fn hyp2f1_1bc(b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut comp = 0.0;
    for k in 0..100_000 {
        term *= (b + k as f64) / (c + k as f64) * z;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Mean and batch-means standard error.
pub fn mean_and_se(x: &[f64], batches: usize) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bmean = bm.iter().sum::<f64>() / batches as f64;
    let var = bm.iter().map(|v| (v - bmean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, (var / batches as f64).sqrt())
}

/// Pair-counting adjusted Rand index.
pub fn ari_pairs(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1.0;
            if sa {
                in_a += 1.0;
            }
            if sb {
                in_b += 1.0;
            }
            if sa && sb {
                both += 1.0;
            }
        }
    }
    let expected = if pairs > 0.0 { in_a * in_b / pairs } else { 0.0 };
    let max = (in_a + in_b) / 2.0;
    if max == expected {
        // Only possible when both partitions are the same trivial one.
        return 1.0;
    }
    (both - expected) / (max - expected)
}

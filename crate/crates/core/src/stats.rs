//! Small statistical test helpers: Kolmogorov-Smirnov (one- and two-sample)
//! and chi-square goodness of fit. Used by the validation suites and the
//! simulation-consistency checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample KS statistic of `data` against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(data: &mut [f64], cdf: F) -> f64 {
    assert!(!data.is_empty());
    data.sort_by(f64::total_cmp);
    let n = data.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in data.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic p-value of the KS statistic for an effective sample size.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let t = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    if t < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1.0f64).powi(j + 1) * (-2.0 * jf * jf * t * t).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS test p-value.
pub fn ks_test<F: Fn(f64) -> f64>(data: &mut [f64], cdf: F) -> f64 {
    let n = data.len() as f64;
    let d = ks_statistic(data, cdf);
    ks_p_value(d, n)
}

/// Two-sample KS test p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let mut d = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na && j < nb {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    ks_p_value(d, n_eff)
}

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// counts (same totals; bins with tiny expectation should be pre-merged).
pub fn chi_square_gof(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2);
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        assert!(e > 0.0, "expected counts must be positive");
        stat += (o - e) * (o - e) / e;
    }
    let dof = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("dof >= 1");
    1.0 - dist.cdf(stat)
}

/// Merge the tail of a discrete pmf so every bin has expected count at least
/// `min_expected`, then run the chi-square test. `counts[k]` holds the
/// observed frequency of value `k`; `pmf(k)` the reference probability, with
/// the remainder mass assigned to the final merged bin.
pub fn chi_square_discrete<F: Fn(usize) -> f64>(
    counts: &[u64],
    n_total: u64,
    pmf: F,
    min_expected: f64,
) -> f64 {
    let n = n_total as f64;
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    let mut used_mass = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let p = pmf(k);
        used_mass += p;
        acc_o += c as f64;
        acc_e += n * p;
        if acc_e >= min_expected {
            obs.push(acc_o);
            exp.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    // everything beyond the recorded range plus any unflushed remainder
    acc_e += n * (1.0 - used_mass).max(0.0);
    if acc_e > 0.0 || acc_o > 0.0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            if acc_e < min_expected {
                *o += acc_o;
                *e += acc_e;
            } else {
                obs.push(acc_o);
                exp.push(acc_e);
            }
        } else {
            obs.push(acc_o);
            exp.push(acc_e);
        }
    }
    if obs.len() < 2 {
        return 1.0;
    }
    chi_square_gof(&obs, &exp)
}

/// Area under the ROC curve for scores with binary labels; ties get half
/// credit.
pub fn auc(scores_pos: &[f64], scores_neg: &[f64]) -> f64 {
    assert!(!scores_pos.is_empty() && !scores_neg.is_empty());
    let mut wins = 0.0;
    for &p in scores_pos {
        for &q in scores_neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (scores_pos.len() as f64 * scores_neg.len() as f64)
}

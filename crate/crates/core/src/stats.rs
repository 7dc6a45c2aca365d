//! Nonparametric and contingency-table tests.
//!
//! All p-values are two-sided and asymptotic: normal approximation for
//! Mann-Whitney U, chi-square for Kruskal-Wallis and contingency tables,
//! the Kolmogorov limit distribution for KS, and Student's t for Pearson r.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestKind {
    MannWhitney,
    KruskalWallis,
    ChiSquare,
    KsNormality,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

impl GroupSummary {
    pub fn of(name: impl Into<String>, xs: &[f64]) -> Self {
        GroupSummary {
            name: name.into(),
            n: xs.len(),
            mean: mean(xs),
            median: median(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub p: f64,
    pub groups: Vec<GroupSummary>,
    /// Secondary quantities such as z or t.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Midranks (1-based) of `xs` and the tie term Σ(t³ − t).
pub fn midranks(xs: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

fn chi2_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).expect("positive df").sf(x)
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}

/// Two-sided Mann-Whitney U. The reported statistic is U for `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooSmall {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    check_finite(a, "group a")?;
    check_finite(b, "group b")?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let u2 = n1 * n2 - u1;
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let (z, p) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let z = (u1.max(u2) - mu - 0.5) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (z, (2.0 * normal.sf(z)).min(1.0))
    };
    Ok(TestReport {
        test: TestKind::MannWhitney,
        statistic: u1,
        df: None,
        p,
        groups: vec![GroupSummary::of("a", a), GroupSummary::of("b", b)],
        details: BTreeMap::from([("z".to_string(), z), ("u2".to_string(), u2)]),
    })
}

/// Kruskal-Wallis H with tie correction. All-tied data give H = 0, p = 1.
pub fn kruskal_wallis(groups: &[(&str, &[f64])]) -> Result<TestReport> {
    if groups.len() < 2 {
        return Err(Error::invalid("Kruskal-Wallis needs at least 2 groups"));
    }
    if let Some((name, _)) = groups.iter().find(|(_, g)| g.is_empty()) {
        return Err(Error::invalid(format!("group {name} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|(_, g)| g.iter().copied()).collect();
    check_finite(&pooled, "samples")?;
    if pooled.len() < 5 {
        return Err(Error::TooSmall {
            needed: 5,
            got: pooled.len(),
        });
    }
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for (_, g) in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - ties / (n * n * n - n);
    let df = (groups.len() - 1) as f64;
    let (h, p) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let h = (h_raw / correction).max(0.0);
        (h, chi2_sf(h, df))
    };
    Ok(TestReport {
        test: TestKind::KruskalWallis,
        statistic: h,
        df: Some(df),
        p,
        groups: groups
            .iter()
            .map(|(name, g)| GroupSummary::of(*name, g))
            .collect(),
        details: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyResult {
    pub report: TestReport,
    pub observed: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub adjusted_residuals: Vec<Vec<f64>>,
}

/// Pearson χ² test of independence without continuity correction, with
/// adjusted residuals (O − E) / sqrt(E (1 − row share) (1 − column share)).
pub fn chi_square_independence(table: &[Vec<f64>]) -> Result<ContingencyResult> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(Error::invalid("contingency table must be rectangular, at least 2x2"));
    }
    if table.iter().flatten().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::invalid("contingency counts must be finite and non-negative"));
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let n: f64 = rows.iter().sum();
    let mut expected = vec![vec![0.0; c]; r];
    let mut residuals = vec![vec![0.0; c]; r];
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = rows[i] * cols[j] / n;
            if e.is_nan() || e <= 0.0 {
                return Err(Error::degenerate(format!(
                    "expected count is zero in cell ({i}, {j})"
                )));
            }
            let d = table[i][j] - e;
            chi2 += d * d / e;
            expected[i][j] = e;
            let var = e * (1.0 - rows[i] / n) * (1.0 - cols[j] / n);
            residuals[i][j] = if var > 0.0 { d / var.sqrt() } else { 0.0 };
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    Ok(ContingencyResult {
        report: TestReport {
            test: TestKind::ChiSquare,
            statistic: chi2,
            df: Some(df),
            p: chi2_sf(chi2, df),
            groups: Vec::new(),
            details: BTreeMap::from([("n".to_string(), n)]),
        },
        observed: table.to_vec(),
        expected,
        adjusted_residuals: residuals,
    })
}

/// Survival function of the Kolmogorov limit distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // small-x series converges faster for the CDF
        let s = (2.0 * std::f64::consts::PI).sqrt() / x;
        let q = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut cdf = 0.0;
        for k in 0..50 {
            let term = q.powi((2 * k + 1) * (2 * k + 1));
            cdf += term;
            if term < 1e-300 {
                break;
            }
        }
        return (1.0 - s * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test against a normal with the sample mean and sample
/// standard deviation.
pub fn ks_normality(xs: &[f64]) -> Result<TestReport> {
    if xs.len() < 5 {
        return Err(Error::TooSmall {
            needed: 5,
            got: xs.len(),
        });
    }
    check_finite(xs, "sample")?;
    let m = mean(xs);
    let sd = sample_std(xs);
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::degenerate("zero variance sample"));
    }
    let normal = Normal::new(m, sd).expect("positive sd");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(TestReport {
        test: TestKind::KsNormality,
        statistic: d,
        df: None,
        p: kolmogorov_sf(n.sqrt() * d),
        groups: vec![GroupSummary::of("sample", xs)],
        details: BTreeMap::from([("mean".to_string(), m), ("std".to_string(), sd)]),
    })
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<TestReport> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::TooSmall {
            needed: 3,
            got: x.len(),
        });
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::degenerate("zero variance in correlation input"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = x.len() as f64 - 2.0;
    let (t, p) = if 1.0 - r * r <= 0.0 {
        (f64::INFINITY.copysign(r), 0.0)
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TestReport {
        test: TestKind::Pearson,
        statistic: r,
        df: Some(df),
        p,
        groups: vec![GroupSummary::of("x", x), GroupSummary::of("y", y)],
        details: BTreeMap::from([("t".to_string(), t)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values computed once with an established statistics package
    const A: [f64; 30] = [1.3, 1.0, 2.5, 0.6, 5.5, 3.6, 1.8, 5.5, 3.1, 3.2, 0.4, 0.9, 4.7, 6.8, 1.2, 4.6, 0.3, 6.1, 8.7, 2.2, 6.2, 1.5, 1.2, 3.8, 0.9, 1.9, 0.5, 2.5, 1.1, 2.6];
    const B: [f64; 30] = [8.5, 2.6, 1.1, 2.6, 0.3, 3.5, 12.2, 5.0, 7.5, 13.0, 1.0, 8.6, 1.3, 4.7, 2.0, 10.4, 1.9, 1.6, 3.7, 10.4, 6.2, 5.7, 2.8, 5.6, 1.3, 2.3, 0.6, 3.4, 11.2, 4.8];
    const C: [f64; 30] = [3.9, 3.5, 4.6, 4.4, 3.0, 1.1, 2.5, 2.8, 6.4, 1.4, 2.3, 6.2, 12.6, 5.5, 3.0, 5.2, 2.3, 6.3, 2.0, 3.3, 1.3, 1.2, 0.9, 5.6, 10.5, 16.4, 3.4, 3.0, 21.1, 2.1];
    const D: [f64; 30] = [1.4, 7.4, 2.9, 0.3, 0.0, 2.3, 3.4, 0.5, 1.3, 1.8, 1.7, 2.2, 1.9, 3.6, 3.5, 8.7, 1.6, 4.5, 1.2, 1.1, 1.6, 0.4, 1.9, 1.8, 1.6, 0.8, 0.5, 3.8, 0.9, 2.4];
    const X: [f64; 30] = [3.34, 3.85, 2.45, 6.97, 8.24, 4.87, 4.32, 5.96, 6.21, 4.65, 4.26, 6.77, 2.0, 2.0, 5.64, 2.25, 5.9, 3.1, 5.63, 7.16, 6.3, 3.09, 7.98, 4.02, 6.6, 6.87, 5.46, 6.74, 5.65, 7.77];
    const Y: [f64; 30] = [2.11, 0.8, 0.42, 2.15, 2.8, 3.07, -0.8, 0.09, 4.82, 1.28, 2.95, 4.12, 2.58, -1.31, 4.25, -1.81, 4.89, 1.04, 3.1, 5.37, 2.07, 1.02, 3.58, 2.06, 3.81, 4.49, 3.64, 4.05, 1.21, 1.87];

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn mann_whitney_reference() {
        let r = mann_whitney_u(&A, &B).unwrap();
        assert!(rel(r.statistic, 304.5) < 1e-6);
        assert!(rel(r.p, 0.03200584748517727) < 1e-6, "{}", r.p);
        // pairwise counting oracle
        let brute: f64 = A
            .iter()
            .flat_map(|a| B.iter().map(move |b| if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 }))
            .sum();
        assert_eq!(r.statistic, brute);
    }

    #[test]
    fn mann_whitney_simple_cases() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        let same = mann_whitney_u(&A, &A).unwrap();
        assert!(same.p > 0.9);
        assert!(mann_whitney_u(&[], &A).is_err());
    }

    #[test]
    fn kruskal_wallis_reference() {
        let r = kruskal_wallis(&[("a", &A), ("b", &B), ("c", &C), ("d", &D)]).unwrap();
        assert!(rel(r.statistic, 15.393292130745833) < 1e-6);
        assert!(rel(r.p, 0.0015096097291005639) < 1e-6);
        assert_eq!(r.df, Some(3.0));
    }

    #[test]
    fn kruskal_wallis_edge_cases() {
        let k = [2.0; 4];
        let r = kruskal_wallis(&[("a", &k), ("b", &k)]).unwrap();
        assert_eq!((r.statistic, r.p), (0.0, 1.0));
        assert!(kruskal_wallis(&[("a", &A)]).is_err());
        assert!(kruskal_wallis(&[("a", &[1.0, 2.0]), ("b", &[3.0])]).is_err());
        // ordered disjoint supports
        let g: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..30).map(|i| (k * 100 + i) as f64).collect())
            .collect();
        let r = kruskal_wallis(&[("1", &g[0]), ("2", &g[1]), ("3", &g[2]), ("4", &g[3])]).unwrap();
        assert!(r.p < 0.001);
    }

    #[test]
    fn chi_square_two_by_two() {
        let r = chi_square_independence(&[vec![10.0, 20.0], vec![20.0, 10.0]]).unwrap();
        assert!((r.report.statistic - 20.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.report.df, Some(1.0));
        assert!(rel(r.report.p, 0.009823274507519235) < 1e-6, "{}", r.report.p);
        // hand computation: E = 15, var = 15 * 0.5 * 0.5
        let expected = -5.0 / (15.0f64 * 0.25).sqrt();
        assert!((r.adjusted_residuals[1][1] - expected).abs() < 1e-12);
        assert!((r.adjusted_residuals[1][1] + 2.582).abs() < 1e-3);
    }

    #[test]
    fn chi_square_reference_and_margins() {
        let t = vec![
            vec![12.0, 7.0, 9.0],
            vec![5.0, 14.0, 6.0],
            vec![8.0, 6.0, 13.0],
        ];
        let r = chi_square_independence(&t).unwrap();
        assert!(rel(r.report.statistic, 9.870949861426054) < 1e-6);
        assert!(rel(r.report.p, 0.04265853602393493) < 1e-6);
        #[allow(clippy::needless_range_loop)]
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| t[i][j] - r.expected[i][j]).sum();
            let col: f64 = (0..3).map(|j| t[j][i] - r.expected[j][i]).sum();
            assert!(row.abs() < 1e-9 && col.abs() < 1e-9);
        }
    }

    #[test]
    fn chi_square_independent_and_degenerate() {
        let r = chi_square_independence(&[vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(r.report.statistic.abs() < 1e-12);
        assert!(chi_square_independence(&[vec![0.0, 4.0], vec![0.0, 6.0]])
            .unwrap_err()
            .is_degenerate());
    }

    #[test]
    fn ks_reference() {
        let r = ks_normality(&X).unwrap();
        assert!(rel(r.statistic, 0.12525635341481856) < 1e-6);
        assert!(rel(r.p, 0.7343032996182737) < 1e-6, "{}", r.p);
    }

    #[test]
    fn kolmogorov_series_agree() {
        // both branches near the switch point
        for x in [0.3, 0.6, 0.99, 1.01, 1.5, 2.5] {
            let p = kolmogorov_sf(x);
            assert!((0.0..=1.0).contains(&p));
        }
        assert!((kolmogorov_sf(0.999_999) - kolmogorov_sf(1.000_001)).abs() < 1e-5);
        // K(1.0) survival, a standard tabulated value
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-10);
    }

    #[test]
    fn ks_errors_and_point_mass() {
        assert!(matches!(ks_normality(&[1.0, 2.0, 3.0, 4.0]), Err(Error::TooSmall { .. })));
        assert!(ks_normality(&[1.0; 10]).unwrap_err().is_degenerate());
        let mut xs = vec![0.0; 200];
        xs.extend([50.0, -40.0, 80.0]);
        assert!(ks_normality(&xs).unwrap().p < 0.001);
    }

    #[test]
    fn pearson_reference_and_identities() {
        let r = pearson_r(&X, &Y).unwrap();
        assert!(rel(r.statistic, 0.6305381033359189) < 1e-6);
        assert!(rel(r.p, 0.00018774795337931944) < 1e-6, "{}", r.p);
        assert_eq!(pearson_r(&X, &X).unwrap().statistic, 1.0);
        let neg: Vec<f64> = X.iter().map(|x| -2.0 * x + 7.0).collect();
        assert!((pearson_r(&X, &neg).unwrap().statistic + 1.0).abs() < 1e-12);
        assert!(pearson_r(&X, &Y[..29]).is_err());
        assert!(pearson_r(&[1.0; 5], &X[..5]).unwrap_err().is_degenerate());
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }
}

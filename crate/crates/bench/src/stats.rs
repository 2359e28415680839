use statrs::distribution::{Binomial, DiscreteCDF};

/// One-sided sign test of `H1: median difference > 0`. Zero differences
/// are dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub n: u64,
    pub positives: u64,
    pub p_value: f64,
}

impl SignTest {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < level
    }
}

pub fn sign_test(diffs: &[f64]) -> SignTest {
    let n = diffs.iter().filter(|d| **d != 0.0 && !d.is_nan()).count() as u64;
    let positives = diffs.iter().filter(|d| **d > 0.0).count() as u64;
    let p_value = if n == 0 || positives == 0 {
        1.0
    } else {
        // P(X >= positives) under Binomial(n, 1/2).
        let b = Binomial::new(0.5, n).expect("valid binomial");
        b.sf(positives - 1)
    };
    SignTest { n, positives, p_value }
}

/// Median of a non-empty slice, NaN when empty.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

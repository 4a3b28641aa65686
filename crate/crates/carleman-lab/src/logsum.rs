//! Max-shifted accumulation of sums of exponentials.
//!
//! The weighted quadratures integrate terms of the form `F_i * e^{2 s phi_i}`
//! where `2 s phi` reaches several thousands for large `s`. Every such
//! integral is therefore carried as its natural logarithm: terms are added
//! through [`LogSum`], which keeps a running maximum exponent and a shifted
//! mantissa sum, so nothing overflows up to `s ~ 1e3` and beyond.

/// Running representation of `ln(sum_i e^{l_i})`.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    sum: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Add a term with natural log `l` (`-inf` terms are skipped).
    pub fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l <= self.max {
            self.sum += (l - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - l).exp() + 1.0;
            self.max = l;
        }
    }

    /// Merge another accumulator (order-sensitive only at rounding level;
    /// callers merge in fixed chunk order for determinism).
    pub fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    /// `ln(sum)`; `-inf` when nothing was added.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY || self.sum <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Format a quantity given by its natural log in scientific notation,
/// including magnitudes far outside f64 range (e.g. `1.23456e+3040`).
pub fn format_from_ln(ln_value: f64) -> String {
    if ln_value == f64::NEG_INFINITY {
        return "0".to_string();
    }
    if ln_value.is_nan() {
        return "nan".to_string();
    }
    let log10 = ln_value / std::f64::consts::LN_10;
    if log10.abs() < 300.0 {
        return format!("{:.17e}", ln_value.exp());
    }
    let exp10 = log10.floor();
    let mantissa = 10f64.powf(log10 - exp10);
    format!("{:.17}e{}", mantissa, exp10 as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_in_range() {
        let terms = [0.5, 2.0, -1.0, 3.5];
        let mut acc = LogSum::new();
        for &t in &terms {
            acc.add(t);
        }
        let direct: f64 = terms.iter().map(|t| t.exp()).sum();
        assert!((acc.value() - direct.ln()).abs() < 1e-14);
    }

    #[test]
    fn survives_huge_exponents() {
        let mut acc = LogSum::new();
        acc.add(5000.0);
        acc.add(5001.0);
        // ln(e^5000 + e^5001) = 5001 + ln(1 + e^-1)
        let expect = 5001.0 + (1.0f64 + (-1.0f64).exp()).ln();
        assert!((acc.value() - expect).abs() < 1e-12);
    }

    #[test]
    fn merge_agrees_with_flat_accumulation() {
        let mut a = LogSum::new();
        let mut b = LogSum::new();
        let mut flat = LogSum::new();
        for i in 0..10 {
            let l = (i as f64) * 100.0 - 300.0;
            if i % 2 == 0 {
                a.add(l);
            } else {
                b.add(l);
            }
            flat.add(l);
        }
        a.merge(&b);
        assert!((a.value() - flat.value()).abs() < 1e-12);
    }

    #[test]
    fn empty_is_neg_inf_and_formats_as_zero() {
        let acc = LogSum::new();
        assert_eq!(acc.value(), f64::NEG_INFINITY);
        assert_eq!(format_from_ln(acc.value()), "0");
    }

    #[test]
    fn format_beyond_f64_range() {
        let s = format_from_ln(7000.0);
        // log10(e^7000) = 3040.06...
        assert!(s.ends_with("e3040"), "{s}");
    }

    #[test]
    fn logsumexp_symmetric() {
        assert!((logsumexp(1.0, 4.0) - logsumexp(4.0, 1.0)).abs() < 1e-15);
    }
}

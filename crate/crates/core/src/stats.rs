//! Small descriptive-statistics helpers shared across modules.

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (N - 1 denominator). Zero for fewer than two values.
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|&a| (a - m) * (a - m)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

/// Centers to mean 0 and scales to sample sd 1. A constant vector maps to zeros.
pub fn standardize(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    let s = sd(v);
    if s == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&a| (a - m) / s).collect()
}

/// Pearson correlation; `None` when either vector has (numerically) zero spread.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale_a = a
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let scale_b = b
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tiny = 1e-24 * a.len() as f64;
    if saa <= tiny * scale_a * scale_a || sbb <= tiny * scale_b * scale_b {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Linear-interpolation quantile (R type 7) of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_gives_unit_sd() {
        let z = standardize(&[1.0, 4.0, 2.0, 8.0]);
        assert!(mean(&z).abs() < 1e-15);
        assert!((sd(&z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_edge_cases() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(pearson(&a, &a), Some(1.0));
        assert_eq!(pearson(&a, &[-1.0, -2.0, -3.0]), Some(-1.0));
        assert_eq!(pearson(&a, &[5.0, 5.0, 5.0]), None);
    }

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
    }
}

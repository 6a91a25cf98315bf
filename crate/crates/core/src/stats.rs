//! Small numerical statistics helpers with deterministic reduction order.

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    /// Standard error of the mean; zero for a single sample.
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error, shifted by the first sample so that identical
/// samples give their common value and an exactly zero error.
pub fn sample_stats(xs: &[f64]) -> SampleStats {
    let n = xs.len();
    if n == 0 {
        return SampleStats { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let shift = xs[0];
    let d: alloc::vec::Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let mean_d = pairwise_sum(&d) / n as f64;
    let stderr = if n > 1 {
        let sq: alloc::vec::Vec<f64> = d.iter().map(|x| (x - mean_d) * (x - mean_d)).collect();
        libm::sqrt(pairwise_sum(&sq) / (n - 1) as f64 / n as f64)
    } else {
        0.0
    };
    SampleStats { mean: shift + mean_d, stderr, count: n }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; `None` for fewer than two
/// distinct abscissae.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = pairwise_sum(xs) / n as f64;
    let my = pairwise_sum(ys) / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_zero_error() {
        let s = sample_stats(&[1.0 / 3.0; 7]);
        assert_eq!(s.mean, 1.0 / 3.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(sample_stats(&[2.5]).stderr, 0.0);
    }

    #[test]
    fn mean_and_error() {
        let s = sample_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        // sample variance 5/3, stderr sqrt(5/12)
        assert!((s.stderr - libm::sqrt(5.0 / 12.0)).abs() < 1e-15);
    }

    #[test]
    fn exact_line() {
        let fit = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-15 && (fit.intercept - 1.0).abs() < 1e-15);
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}

use libm::erfc;
use statrs::function::erf::erfc_inv;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile.
pub fn quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `z_{1 - alpha/2}`.
pub fn two_sided_critical(alpha: f64) -> f64 {
    quantile(1.0 - 0.5 * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((cdf(-1.959963984540054) - 0.025).abs() < 1e-15);
        assert!((two_sided_critical(0.05) - 1.959963984540054).abs() < 1e-12);
        assert!((cdf(-10.0) - 7.619853024160527e-24).abs() < 1e-36);
        assert!((pdf(1.0) - 0.24197072451914337).abs() < 1e-16);
    }
}

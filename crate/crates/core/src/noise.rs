use rand::distr::Open01;
use rand::Rng;

/// Noise hook used by tests and fault-injection runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Laplace,
    /// Every Laplace draw is replaced by zero. Still consumes one uniform so
    /// that downstream randomness lines up with the noisy run.
    Disabled,
}

/// One draw of `Laplace(0, scale)` by inverse CDF from a single open-interval
/// uniform.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    let v = u - 0.5;
    -scale * v.signum() * (-2.0 * v.abs()).ln_1p()
}

pub fn draw<R: Rng + ?Sized>(rng: &mut R, scale: f64, mode: NoiseMode) -> f64 {
    let z = sample_laplace(rng, scale);
    match mode {
        NoiseMode::Laplace => z,
        NoiseMode::Disabled => 0.0,
    }
}

/// `ln E[exp(Z)]` for `Z ~ Laplace(b)`, `b < 1`: `-ln(1 - b²)`.
pub fn laplace_log_mgf_at_one(b: f64) -> f64 {
    -(-b * b).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let b = 0.4;
        let xs: Vec<f64> = (0..n).map(|_| sample_laplace(&mut rng, b)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        let mgf = xs.iter().map(|x| x.exp()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005);
        assert!((mean_abs - b).abs() < 0.005);
        assert!((mgf.ln() - laplace_log_mgf_at_one(b)).abs() < 0.01);
    }

    #[test]
    fn disabled_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(draw(&mut rng, 5.0, NoiseMode::Disabled), 0.0);
    }
}

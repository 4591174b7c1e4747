//! Diagonal-Gaussian policy-head math: reparameterized sampling, exact log
//! densities, and the tanh-squash correction used by soft actor-critic.

use rand::Rng;
use rand_distr::StandardNormal;

/// Clamp bounds for log standard deviations; keeps densities and their
/// gradients finite throughout training.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Numerically stable ln(1 + eˣ).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Reparameterized draw u = μ + σ·ε with ε ~ N(0, I). Returns (u, ε); the
/// noise vector is what gradient formulas need.
pub fn gaussian_sample<R: Rng + ?Sized>(
    mean: &[f64],
    log_std: &[f64],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(mean.len(), log_std.len());
    let mut u = Vec::with_capacity(mean.len());
    let mut eps = Vec::with_capacity(mean.len());
    for (&m, &ls) in mean.iter().zip(log_std) {
        let e: f64 = rng.sample(StandardNormal);
        eps.push(e);
        u.push(m + ls.exp() * e);
    }
    (u, eps)
}

/// Exact log density of `u` under the diagonal Gaussian N(μ, diag(σ²)).
pub fn gaussian_logprob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), u.len());
    let mut lp = 0.0;
    for ((&m, &ls), &ui) in mean.iter().zip(log_std).zip(u) {
        let z = (ui - m) * (-ls).exp();
        lp -= 0.5 * (z * z + LN_2PI) + ls;
    }
    lp
}

/// Σᵢ ln(1 − tanh²(uᵢ)), the Jacobian term subtracted from the Gaussian log
/// density when actions are squashed through tanh. Computed from the
/// pre-squash values via ln(1 − tanh²u) = 2(ln 2 − u − softplus(−2u)), which
/// stays finite for any u.
pub fn tanh_correction(u: &[f64]) -> f64 {
    u.iter().map(|&ui| 2.0 * (std::f64::consts::LN_2 - ui - softplus(-2.0 * ui))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn tiny_sigma_returns_the_mean() {
        let mut rng = StdRng::seed_from_u64(1);
        let mean = [0.3, -0.7, 1.2];
        let log_std = [LOG_STD_MIN; 3];
        let (u, _) = gaussian_sample(&mean, &log_std, &mut rng);
        for (a, m) in u.iter().zip(mean) {
            assert!((a - m).abs() < 1e-8);
            // Squashed variant collapses to tanh(mean).
            assert!((a.tanh() - m.tanh()).abs() < 1e-8);
        }
    }

    #[test]
    fn logprob_of_mean_at_unit_sigma() {
        let mean = [0.1, -0.5, 2.0, 0.0];
        let log_std = [0.0; 4];
        let lp = gaussian_logprob(&mean, &log_std, &mean);
        assert!((lp - (-0.5 * 4.0 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_concentrates() {
        let mut rng = StdRng::seed_from_u64(2);
        let mean = [0.4];
        let log_std = [0.0];
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (u, _) = gaussian_sample(&mean, &log_std, &mut rng);
            acc += u[0];
        }
        let avg = acc / n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!((avg - 0.4).abs() < bound, "sample mean {avg} outside ±{bound}");
    }

    #[test]
    fn tanh_correction_matches_direct_formula() {
        for &u in &[-3.0f64, -1.0, -0.2, 0.0, 0.5, 1.7, 4.0] {
            let direct = (1.0 - u.tanh() * u.tanh()).ln();
            let stable = tanh_correction(&[u]);
            assert!((direct - stable).abs() < 1e-9, "u={u}: {direct} vs {stable}");
        }
    }

    #[test]
    fn tanh_correction_stays_finite_in_the_tails() {
        // The naive ln(1 − tanh²u) underflows to ln(0) around |u| ≈ 20.
        for &u in &[-40.0, -25.0, 25.0, 40.0] {
            let c = tanh_correction(&[u]);
            assert!(c.is_finite());
            // ln(1−tanh²u) ≈ 2(ln2 − |u|) for large |u|.
            let asymptote = 2.0 * (std::f64::consts::LN_2 - u.abs());
            assert!((c - asymptote).abs() < 1e-6);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let draw = || {
            let mut rng = StdRng::seed_from_u64(7);
            gaussian_sample(&[0.0, 1.0], &[-0.5, 0.3], &mut rng)
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn logprob_integrates_to_one_in_1d() {
        // Riemann check that exp(logprob) is a density.
        let mean = [0.3];
        let log_std = [-0.2];
        let mut mass = 0.0;
        let h = 1e-3;
        let mut x = -6.0;
        while x < 6.0 {
            mass += gaussian_logprob(&mean, &log_std, &[x]).exp() * h;
            x += h;
        }
        assert!((mass - 1.0).abs() < 1e-3, "density mass {mass}");
    }
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::NnError;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a diagonal Gaussian, summed over dimensions.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> Result<f64, NnError> {
    if mean.len() != log_std.len() || mean.len() != action.len() {
        return Err(NnError::Shape(format!(
            "mean {}, log_std {}, action {}",
            mean.len(),
            log_std.len(),
            action.len()
        )));
    }
    Ok(log_prob_unchecked(mean, log_std, action))
}

#[inline]
pub(crate) fn log_prob_unchecked(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// `Σ_d (log_std_d + ½ ln(2πe))`.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + HALF_LN_2PI + 0.5).sum()
}

/// Draws `mean + exp(log_std) ⊙ z` and returns it with its log density.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m + ls.exp() * z
        })
        .collect();
    let lp = log_prob_unchecked(mean, log_std, &action);
    (action, lp)
}

/// Gradients of the log density w.r.t. the mean and the log standard deviation.
pub(crate) fn log_prob_grads(mean: &[f64], log_std: &[f64], action: &[f64], d_mean: &mut [f64], d_log_std: &mut [f64]) {
    for d in 0..mean.len() {
        let inv_var = (-2.0 * log_std[d]).exp();
        let diff = action[d] - mean[d];
        d_mean[d] = diff * inv_var;
        d_log_std[d] = diff * diff * inv_var - 1.0;
    }
}

pub fn clamp_log_std(log_std: &mut [f64]) {
    log_std.iter_mut().for_each(|v| *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX));
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_log_probs() {
        assert!((gaussian_log_prob(&[0.3], &[0.0], &[0.3]).unwrap() + 0.918_938_5).abs() < 1e-7);
        assert!((gaussian_log_prob(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 1.0]).unwrap() + 1.837_877_1).abs() < 1e-7);
        assert!((gaussian_log_prob(&[0.0], &[0.0], &[1.0]).unwrap() + 1.418_938_5).abs() < 1e-7);
    }

    #[test]
    fn shape_mismatch() {
        assert!(gaussian_log_prob(&[0.0], &[0.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn analytic_entropies() {
        assert!((gaussian_entropy(&[0.0]) - 1.418_938_5).abs() < 1e-7);
        assert!((gaussian_entropy(&[1.0]) - 2.418_938_5).abs() < 1e-7);
        assert!((gaussian_entropy(&[0.0, 0.0, 0.0]) - 4.256_815_6).abs() < 1e-7);
    }

    #[test]
    fn vanishing_variance_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = sample_action(&[0.25, -1.0], &[-20.0, -20.0], &mut rng);
        assert!((a[0] - 0.25).abs() < 1e-7 && (a[1] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let a = sample_action(&[0.0; 3], &[0.0; 3], &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_action(&[0.0; 3], &[0.0; 3], &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_action(&[0.0], &[0.0], &mut rng).0[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn density_integrates_to_one() {
        let n = 16_000;
        let h = 16.0 / n as f64;
        let f = |x: f64| gaussian_log_prob(&[0.0], &[0.0], &[x]).unwrap().exp();
        let mut total = 0.5 * (f(-8.0) + f(8.0));
        for i in 1..n {
            total += f(-8.0 + i as f64 * h);
        }
        assert!((total * h - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sampled_log_prob_matches_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let mean = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let ls = [rng.random_range(-3.0..1.0), rng.random_range(-3.0..1.0)];
            let (a, lp) = sample_action(&mean, &ls, &mut rng);
            assert!((lp - gaussian_log_prob(&mean, &ls, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_prob_grads_match_finite_differences() {
        let mean = [0.3, -0.4];
        let ls = [0.2, -0.5];
        let a = [1.0, 0.1];
        let mut dm = [0.0; 2];
        let mut dl = [0.0; 2];
        log_prob_grads(&mean, &ls, &a, &mut dm, &mut dl);
        let h = 1e-6;
        for d in 0..2 {
            let mut mp = mean;
            let mut mm = mean;
            mp[d] += h;
            mm[d] -= h;
            let fd = (log_prob_unchecked(&mp, &ls, &a) - log_prob_unchecked(&mm, &ls, &a)) / (2.0 * h);
            assert!((fd - dm[d]).abs() < 1e-6);
            let mut lp = ls;
            let mut lm = ls;
            lp[d] += h;
            lm[d] -= h;
            let fd = (log_prob_unchecked(&mean, &lp, &a) - log_prob_unchecked(&mean, &lm, &a)) / (2.0 * h);
            assert!((fd - dl[d]).abs() < 1e-6);
        }
    }
}

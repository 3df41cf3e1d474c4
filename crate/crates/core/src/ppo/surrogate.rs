/// Clipped surrogate term `min(r·Â, clip(r, 1−ε, 1+ε)·Â)` with `r = exp(logp_new − logp_old)`.
pub fn clipped_surrogate(log_prob_new: f64, log_prob_old: f64, advantage: f64, epsilon: f64) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    clipped_objective(ratio, advantage, epsilon)
}

/// The clipped objective evaluated at an explicit ratio.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    unclipped.min(clipped)
}

/// Derivative of the clipped objective w.r.t. `log_prob_new` (zero where the clip is active).
pub(crate) fn clipped_surrogate_grad(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if unclipped <= clipped {
        unclipped
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        assert_eq!(clipped_surrogate(-1.3, -1.3, 0.75, 0.2), 0.75);
        assert!((clipped_objective(1.5, 2.0, 0.2) - 2.4).abs() < 1e-15);
        assert!((clipped_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference_off_kinks() {
        for &(lp_new, adv) in &[(0.05, 1.0), (0.5, 1.0), (-0.5, 1.0), (0.05, -2.0), (0.5, -2.0), (-0.5, -2.0)] {
            let h = 1e-7;
            let fd = (clipped_surrogate(lp_new + h, 0.0, adv, 0.2) - clipped_surrogate(lp_new - h, 0.0, adv, 0.2)) / (2.0 * h);
            let g = clipped_surrogate_grad(f64::exp(lp_new), adv, 0.2);
            assert!((fd - g).abs() < 1e-6, "{lp_new} {adv}: {fd} vs {g}");
        }
    }
}

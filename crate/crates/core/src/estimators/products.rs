//! Closed-form products of the replicated examples, summed in log space.

/// `prod_{k<t} (1 - 2^{-k-1})`: the mass of the all-`{0}` cylinder of depth
/// `t` under `example42`.
pub fn delta_mass_example42(t: usize) -> f64 {
    (0..t).map(|k| (-(-(k as f64) - 1.0).exp2()).ln_1p()).sum::<f64>().exp()
}

/// `prod_{k<t} (1 - (2 - 2^{-11}) 2^{-k} / 4)`: the same cylinder under
/// `example45`.
pub fn delta_mass_example45(t: usize) -> f64 {
    let c = 0.25 * (2.0 - (-11f64).exp2());
    (0..t).map(|k| (-c * (-(k as f64)).exp2()).ln_1p()).sum::<f64>().exp()
}

/// Lower bound on the infinite all-`{0}` cylinder mass of `example42`:
/// the product of 64 factors times `1 - sum_{k>=64} 2^{-k-1}`.
pub fn delta_mass_example42_limit_lower() -> f64 {
    delta_mass_example42(64) * (1.0 - (-64f64).exp2())
}

/// As [`delta_mass_example42_limit_lower`] for `example45`.
pub fn delta_mass_example45_limit_lower() -> f64 {
    delta_mass_example45(64) * (1.0 - 0.5 * (-63f64).exp2())
}

/// `f_t = 1 - (1 - 2^{-t-1})^{t 2^t}`: the chance that one of the `t 2^t`
/// non-zero actions of a large stage-`(t-1)` set has a non-zero follow-up.
pub fn claim2_factor(t: usize) -> f64 {
    let k = t as f64 * (t as f64).exp2();
    -(k * (-(-(t as f64) - 1.0).exp2()).ln_1p()).exp_m1()
}

/// `prod_{1<=t<=t_max} f_t`.
pub fn claim2_product(t_max: usize) -> f64 {
    (1..=t_max).map(|t| claim2_factor(t).ln()).sum::<f64>().exp()
}

/// Lower bound on `prod_{t>=1} f_t`: 64 factors, then
/// `f_t >= 1 - e^{-t/2}` on the rest.
pub fn claim2_limit_lower() -> f64 {
    let tail: f64 = (-(65f64) / 2.0).exp() / (1.0 - (-0.5f64).exp());
    claim2_product(64) * (1.0 - tail)
}

/// `(F_q(n))^y` evaluated as `exp(y ln F)`.
pub fn cdf_power(f: f64, y: f64) -> f64 {
    if f <= 0.0 {
        return if y == 0.0 { 1.0 } else { 0.0 };
    }
    (y * f.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_claim2_factor() {
        assert!((claim2_factor(1) - 0.4375).abs() < 1e-15);
        assert!(claim2_product(6) < claim2_product(5));
        assert!(claim2_limit_lower() > 0.0 && claim2_limit_lower() < claim2_product(6));
    }

    #[test]
    fn delta_limits() {
        assert!(delta_mass_example42_limit_lower() <= delta_mass_example42(64));
        assert!((delta_mass_example42(1) - 0.5).abs() < 1e-15);
        assert!(delta_mass_example45_limit_lower() > 0.0);
    }
}

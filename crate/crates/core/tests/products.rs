//! Closed-form products checked in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use foresight::estimators::{claim2_factor, claim2_product, delta_mass_example42, delta_mass_example45};

fn pow2_inv(k: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << k)
}

fn close(exact: &BigRational, x: f64) -> bool {
    let e = exact.to_f64().unwrap();
    (e - x).abs() <= 1e-15 * e.abs().max(1e-300)
}

/// `1 - (1 - 2^-(t+1))^(t 2^t)`.
fn chain_factor(t: u32) -> BigRational {
    let base = BigRational::one() - pow2_inv(t + 1);
    let mut p = BigRational::one();
    for _ in 0..(t << t) {
        p *= &base;
    }
    BigRational::one() - p
}

#[test]
fn chain_factors_are_exact() {
    assert_eq!(chain_factor(1), BigRational::new(7.into(), 16.into()));
    let mut product = BigRational::one();
    for t in 1..=6 {
        let f = chain_factor(t);
        assert!(close(&f, claim2_factor(t as usize)), "t = {t}");
        product *= f;
        assert!(close(&product, claim2_product(t as usize)), "t = {t}");
    }
}

#[test]
fn cylinder_masses_are_exact() {
    let mut e42 = BigRational::one();
    let mut e45 = BigRational::one();
    for t in 0..16u32 {
        assert!(close(&e42, delta_mass_example42(t as usize)));
        assert!(close(&e45, delta_mass_example45(t as usize)));
        e42 *= BigRational::one() - pow2_inv(t + 1);
        // p_t({0}) = 1 - 2^-t (2 - 2^-11) / 4.
        let big = BigRational::from_integer(2.into()) - pow2_inv(11);
        e45 *= BigRational::one() - big * pow2_inv(t + 2);
    }
}

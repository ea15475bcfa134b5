//! Gegenbauer (ultraspherical) polynomials C_w^λ.
//!
//! Both routines run the forward recurrence
//! `w·C_w = 2(w+λ−1)·x·C_{w−1} − (w+2λ−2)·C_{w−2}` from C₀ = 1, C₁ = 2λx.
//! Negative degrees evaluate to zero.

use crate::error::{Error, Result};
use crate::scalar::{idx, Scalar};

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "Gegenbauer parameter must be positive, got {lambda}"
        )))
    }
}

/// Evaluates C_w^λ(x).
pub fn gegenbauer<T: Scalar>(w: i64, lambda: T, x: T) -> Result<T> {
    check_lambda(lambda)?;
    if w < 0 {
        return Ok(T::zero());
    }
    let two = idx::<T>(2);
    let mut prev = T::one();
    if w == 0 {
        return Ok(prev);
    }
    let mut cur = two * lambda * x;
    for k in 2..=(w as usize) {
        let kk = idx::<T>(k);
        let next = (two * (kk + lambda - T::one()) * x * cur - (kk + two * lambda - two) * prev) / kk;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Monomial coefficients of C_w^λ, index j = power of x. Empty for w < 0.
pub fn gegenbauer_coeffs<T: Scalar>(w: i64, lambda: T) -> Result<Vec<T>> {
    check_lambda(lambda)?;
    if w < 0 {
        return Ok(Vec::new());
    }
    let two = idx::<T>(2);
    let mut prev = vec![T::one()];
    if w == 0 {
        return Ok(prev);
    }
    let mut cur = vec![T::zero(), two * lambda];
    for k in 2..=(w as usize) {
        let kk = idx::<T>(k);
        let a = two * (kk + lambda - T::one()) / kk;
        let b = (kk + two * lambda - two) / kk;
        let mut next = vec![T::zero(); k + 1];
        for (j, &c) in cur.iter().enumerate() {
            next[j + 1] = next[j + 1] + a * c;
        }
        for (j, &c) in prev.iter().enumerate() {
            next[j] = next[j] - b * c;
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

//! Closed-form minimizers for the two univariate problems the BSUM updates
//! reduce to.
//!
//! Both cubics handled here are monotone (one real root), so Cardano's
//! formula applies without the three-root case. The two cube-root terms
//! `u = cbrt(q/2 + sqrt(D))` and `v = cbrt(q/2 - sqrt(D))` satisfy
//! `u v = -p/3` and `u^3 + v^3 = q`, so the root is evaluated as
//! `q / (u^2 - u v + v^2)`. For `p >= 0` every term of that denominator is
//! nonnegative, which avoids the cancellation in `u + v`.

use crate::error::{Error, Result};

/// `(a, b, c, d)` of the entry-wise quartic
/// `g(x) = a/4 e^4 + b/3 e^3 + c/2 e^2 + d e` with `e = x - x_cur`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CubicCoefficients {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    fn check(&self) -> Result<()> {
        if ![self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite()) {
            return Err(Error::Cubic(format!("non-finite coefficients {self:?}")));
        }
        if self.a <= 0.0 {
            return Err(Error::Cubic(format!("leading coefficient {} must be positive", self.a)));
        }
        Ok(())
    }

    /// The point the expansion is taken around, `b / (3a)`.
    pub fn expansion_point(&self) -> f64 {
        self.b / (3.0 * self.a)
    }

    /// Extra curvature added by the surrogate: `max(b^2/(3a) - c, 0)`.
    pub fn curvature_lift(&self) -> f64 {
        (self.b * self.b / (3.0 * self.a) - self.c).max(0.0)
    }
}

/// Real cube root, odd-symmetric for negative arguments.
#[inline]
pub fn signed_cbrt(v: f64) -> f64 {
    // f64::cbrt already takes the real branch
    v.cbrt()
}

/// The real root of `x^3 + p x - q = 0` for `p >= 0`.
fn cardano_monotone(p: f64, q: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let sqrt_disc = disc.max(0.0).sqrt();
    // larger-magnitude term first, then the product identity
    let u = signed_cbrt(q / 2.0 + q.signum() * sqrt_disc);
    if u == 0.0 {
        return 0.0;
    }
    let v = -p / (3.0 * u);
    q / (u * u - u * v + v * v)
}

/// Nonnegative minimizer of the surrogate `g~` over `x >= 0`.
///
/// With `c > b^2/(3a)` the stationarity condition is `x^3 + p x - q = 0`
/// where `p = (3ac - b^2)/(3a^2) > 0`; otherwise it collapses to a pure cube
/// and `w = cbrt(b^3/(27a^3) - d/a)`. The result is `max(w, 0)`.
pub fn solve_entry_surrogate(coeffs: CubicCoefficients) -> Result<f64> {
    coeffs.check()?;
    let CubicCoefficients { a, b, c, d } = coeffs;
    let w = if c > b * b / (3.0 * a) {
        let p = (3.0 * a * c - b * b) / (3.0 * a * a);
        let q = (9.0 * a * b * c - 27.0 * a * a * d - 2.0 * b * b * b) / (27.0 * a * a * a);
        let disc = q * q / 4.0 + p * p * p / 27.0;
        if disc < 0.0 && disc.abs() > 1e-14 * q * q {
            return Err(Error::Cubic(format!(
                "negative discriminant {disc} with c > b^2/(3a) for {coeffs:?}"
            )));
        }
        cardano_monotone(p, q)
    } else {
        signed_cbrt(b * b * b / (27.0 * a * a * a) - d / a)
    };
    Ok(w.max(0.0))
}

/// Nonnegative root `t` of `t^3 + s t - beta = 0` for `s, beta >= 0`.
pub fn solve_depressed_cubic(s: f64, beta: f64) -> Result<f64> {
    if !(s.is_finite() && beta.is_finite()) {
        return Err(Error::Cubic(format!("non-finite input s = {s}, beta = {beta}")));
    }
    if s < 0.0 || beta < 0.0 {
        return Err(Error::Cubic(format!(
            "depressed cubic needs s >= 0 and beta >= 0, got s = {s}, beta = {beta}"
        )));
    }
    Ok(cardano_monotone(s, beta).max(0.0))
}

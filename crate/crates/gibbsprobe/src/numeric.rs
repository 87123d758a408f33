//! Shared scalar numerics.

/// Distance kept between arctanh arguments and the singular points ±1.
pub(crate) const ATANH_GUARD: f64 = 1e-15;

/// arctanh in the symmetric form `½(ln(1+x) − ln(1−x))` via `ln_1p`:
/// accurate near ±1 and exactly odd (negating `x` swaps the two terms).
pub(crate) fn atanh_stable(x: f64) -> f64 {
    0.5 * (x.ln_1p() - (-x).ln_1p())
}

/// [`atanh_stable`] with the argument clamped away from ±1.
pub(crate) fn atanh_clamped(t: f64) -> f64 {
    atanh_stable(t.clamp(-(1.0 - ATANH_GUARD), 1.0 - ATANH_GUARD))
}

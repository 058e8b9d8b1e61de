//! Small helpers on `&[f64]` vectors.

use alloc::vec::Vec;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    super::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Concatenates the velocity and multiplier parts of a block vector.
pub fn concat(u: &[f64], p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len() + p.len());
    out.extend_from_slice(u);
    out.extend_from_slice(p);
    out
}

/// Relative distance `‖a - b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm2(b).max(f64::MIN_POSITIVE);
    norm2(&sub(a, b)) / denom
}

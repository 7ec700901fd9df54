//! Dense `f64` slice helpers. Dimensions here are tiny (tens at most), so plain
//! slices beat pulling in a matrix library.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(a: &mut [f64], s: f64) {
    a.iter_mut().for_each(|v| *v *= s);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Standard Gaussian vector.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, dim);
        let n = norm(&v);
        if n > 1e-300 {
            scale(&mut v, 1.0 / n);
            return v;
        }
    }
}

/// Uniform point in the unit ball (direction times `U^(1/dim)`).
pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v = random_unit(rng, dim);
    let r = rng.random::<f64>().powf(1.0 / dim as f64);
    scale(&mut v, r);
    v
}

/// Volume of the unit Euclidean ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2*pi/d * V_{d-2}
    let mut v = [1.0_f64, 2.0];
    if dim < 2 {
        return v[dim];
    }
    for d in 2..=dim {
        let next = 2.0 * std::f64::consts::PI / d as f64 * v[d % 2];
        v[d % 2] = next;
    }
    v[dim % 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((unit_ball_volume(2) - pi).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * pi / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(4) - pi * pi / 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_vectors_have_unit_norm() {
        let mut rng = crate::rng::seeded(3);
        for d in 1..8 {
            let v = random_unit(&mut rng, d);
            assert!((norm(&v) - 1.0).abs() < 1e-12);
            assert!(norm(&random_in_ball(&mut rng, d)) <= 1.0);
        }
    }
}

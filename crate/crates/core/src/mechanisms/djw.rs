//! Gradient-vector randomizer for the sequentially interactive variant.
//!
//! The input is written in an orthonormal basis of a public subspace and the
//! coordinate vector is privatized with the Euclidean-ball sampling scheme of
//! Duchi, Jordan and Wainwright: the coordinates are first rounded to one of
//! the two antipodal points `±r·c/‖c‖` (unbiasedly), then a uniformly random
//! direction is drawn from the hemisphere facing that point with probability
//! `e^ε/(e^ε+1)` and from the opposite hemisphere otherwise, and finally scaled
//! by a constant `B` that makes the output unbiased. The output density on the
//! sphere of radius `B` takes only two values with ratio `e^ε`.
//!
//! The ball radius `r` is the caller's ℓ1 bound on the coordinates, which also
//! bounds their ℓ2 norm. With `B² = r² / ((2π_ε - 1)² c_m²)`, where `c_m` is
//! the mean of `|z_1|` for `z` uniform on the unit sphere in `m` dimensions,
//! the error satisfies `E‖v̂ - v‖² ≤ B² ≤ C · r² · m / min(1, ε²)` with
//! `C = (π/2) · coth²(1/2) ≈ 7.35` (see [`djw_variance_constant`]).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mechanisms::MIN_EPSILON;
use crate::numeric::{axpy, dot, norm};

/// Tolerance on the Gram matrix of the supplied basis.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Largest accepted distance from the input to the span of the basis.
pub const SPAN_TOL: f64 = 1e-6;

/// `C` in `E‖v̂ - v‖² ≤ C · l1² · m / min(1, ε²)`.
///
/// `1/(m c_m²) ≤ π/2` follows from `Γ(x + 1/2)/Γ(x) ≤ √x`, and
/// `min(1, ε²) · coth²(ε/2)` peaks at `ε = 1`.
pub fn djw_variance_constant() -> f64 {
    let coth_half = 1.0 / 0.5f64.tanh();
    PI / 2.0 * coth_half * coth_half
}

/// The reported bound `C · l1² · m / min(1, ε²)`.
pub fn djw_second_moment_bound(dim: usize, l1_bound: f64, epsilon: f64) -> f64 {
    djw_variance_constant() * l1_bound * l1_bound * dim as f64 / epsilon.min(1.0).powi(2)
}

/// `E|z_1|` for `z` uniform on the unit sphere in `m` dimensions:
/// `Γ(m/2) / (√π Γ((m+1)/2))`, via `c_{m+2} = m/(m+1) · c_m`.
fn hemisphere_mean(dim: usize) -> f64 {
    let (mut c, mut m) = if dim % 2 == 1 { (1.0, 1) } else { (2.0 / PI, 2) };
    while m < dim {
        c *= m as f64 / (m + 1) as f64;
        m += 2;
    }
    c
}

/// Output radius `B` for an `m`-dimensional ball of radius `radius`.
pub fn djw_output_scale(dim: usize, radius: f64, epsilon: f64) -> f64 {
    let e = epsilon.exp();
    let bias = (e - 1.0) / (e + 1.0);
    radius / (bias * hemisphere_mean(dim))
}

/// Exact `E‖ĉ - c‖²` for coordinates `c` privatized in a ball of radius `radius`.
pub fn djw_exact_error(coords: &[f64], radius: f64, epsilon: f64) -> f64 {
    let b = djw_output_scale(coords.len(), radius, epsilon);
    b * b - dot(coords, coords)
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&z);
        if n > 1e-300 {
            return z.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Privatizes a coordinate vector with `‖coords‖₂ ≤ radius`.
pub fn djw_randomize_coordinates<R: Rng + ?Sized>(
    coords: &[f64],
    radius: f64,
    epsilon: f64,
    rng: &mut R,
) -> Vec<f64> {
    let m = coords.len();
    if m == 0 {
        return Vec::new();
    }
    let len = norm(coords);
    let direction = if len > 0.0 {
        coords.iter().map(|x| x / len).collect()
    } else {
        random_unit(m, rng)
    };
    let toward = rng.random::<f64>() < 0.5 + len / (2.0 * radius);
    let e = epsilon.exp();
    let same_side = rng.random::<f64>() < e / (e + 1.0);
    let mut z = random_unit(m, rng);
    let facing = dot(&z, &direction) >= 0.0;
    // flip z onto the hemisphere selected by (toward, same_side)
    if facing != (toward == same_side) {
        z.iter_mut().for_each(|x| *x = -*x);
    }
    let scale = djw_output_scale(m, radius, epsilon);
    z.into_iter().map(|x| x * scale).collect()
}

/// Privatizes `v`, which must lie in the span of the orthonormal `basis` with
/// coordinate ℓ1 norm at most `l1_bound`. The output lies in the same span and
/// is unbiased for `v`.
pub fn djw_vector_randomize<R: Rng + ?Sized>(
    v: &[f64],
    basis: &[Vec<f64>],
    l1_bound: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !epsilon.is_finite() || epsilon < MIN_EPSILON {
        return Err(Error::InvalidParams(format!("epsilon {epsilon} too small")));
    }
    if !(l1_bound > 0.0 && l1_bound.is_finite()) {
        return Err(Error::InvalidParams(format!("l1 bound {l1_bound} must be positive")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let p = v.len();
    if let Some(b) = basis.iter().find(|b| b.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: b.len(),
        });
    }
    let mut deviation = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((dot(a, b) - target).abs());
        }
    }
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }

    let coords: Vec<f64> = basis.iter().map(|b| dot(b, v)).collect();
    let mut residual = v.to_vec();
    for (c, b) in coords.iter().zip(basis) {
        axpy(-c, b, &mut residual);
    }
    let distance = norm(&residual);
    if distance > SPAN_TOL {
        return Err(Error::NotInSpan { distance });
    }
    let l1: f64 = coords.iter().map(|c| c.abs()).sum();
    if l1 > l1_bound * (1.0 + 1e-12) {
        return Err(Error::L1BoundViolated {
            norm: l1,
            bound: l1_bound,
        });
    }

    let noisy = djw_randomize_coordinates(&coords, l1_bound, epsilon, rng);
    let mut out = vec![0.0; p];
    for (c, b) in noisy.iter().zip(basis) {
        axpy(*c, b, &mut out);
    }
    Ok(out)
}

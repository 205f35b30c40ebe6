use crate::error::{Error, Result};
use crate::numeric::norm;

/// Euclidean ball of radius `R` centered at the origin in `R^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterDomain {
    dimension: usize,
    radius: f64,
}

impl ParameterDomain {
    pub fn new(dimension: usize, radius: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParams("domain dimension must be at least 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { dimension, radius })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dimension && norm(w) <= self.radius
    }

    /// Projects in place. Points already inside are left untouched.
    pub fn project_in_place(&self, w: &mut [f64]) {
        let n = norm(w);
        if n > self.radius {
            let scale = self.radius / n;
            w.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

/// Nearest point of the ball to `w`: `w` itself if `‖w‖ ≤ R`, else `w · R/‖w‖`.
pub fn project_ball(w: &[f64], domain: &ParameterDomain) -> Result<Vec<f64>> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if w.len() != domain.dimension() {
        return Err(Error::DimensionMismatch {
            expected: domain.dimension(),
            found: w.len(),
        });
    }
    let mut out = w.to_vec();
    domain.project_in_place(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_projection() {
        let d = ParameterDomain::new(2, 1.0).unwrap();
        let p = project_ball(&[3.0, 4.0], &d).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&[0.1, -0.2], &d).unwrap(), vec![0.1, -0.2]);
    }

    #[test]
    fn rejects_non_finite_and_bad_domains() {
        let d = ParameterDomain::new(2, 1.0).unwrap();
        assert!(matches!(project_ball(&[f64::NAN, 0.0], &d), Err(Error::NonFinite)));
        assert!(project_ball(&[1.0], &d).is_err());
        assert!(ParameterDomain::new(0, 1.0).is_err());
        assert!(ParameterDomain::new(2, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(
            w in prop::collection::vec(-100.0f64..100.0, 5),
            radius in 0.01f64..10.0,
        ) {
            let d = ParameterDomain::new(5, radius).unwrap();
            let once = project_ball(&w, &d).unwrap();
            prop_assert!(norm(&once) <= radius * (1.0 + 1e-12));
            let twice = project_ball(&once, &d).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12 * radius);
            }
        }
    }
}

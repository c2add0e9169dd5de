//! Quadratic cost functions and ellipsoidal constraint sets.
//!
//! The problem class is
//!
//! ```text
//! minimize   f(x) = 1/2 x'Qx + q'x        (Q symmetric positive semidefinite)
//! subject to g(x) = (x - v)'A(x - v) <= 1 (A symmetric positive definite)
//! ```
//!
//! Both f and g are polynomials, and so are their gradients. That is the
//! property the whole crate is built around: every quantity the solver needs
//! per iteration can be evaluated with additions and multiplications only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{dot, Matrix};

/// Asymmetry above this is accepted silently and averaged away.
const ASYMMETRY_WARN: f64 = 1e-9;
/// Asymmetry above this is treated as corrupted input and rejected.
const ASYMMETRY_REJECT: f64 = 1e-6;

/// f(x) = 1/2 x' Q x + q' x, with Q symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    hessian: Matrix,
    linear: Vec<f64>,
}

impl QuadraticCost {
    /// Validates and stores a cost. The matrix is symmetrized on input;
    /// asymmetry beyond [`ASYMMETRY_WARN`] logs a warning, beyond
    /// [`ASYMMETRY_REJECT`] the input is rejected. Positive semidefiniteness
    /// is checked by full eigendecomposition: the smallest eigenvalue must be
    /// at least -1e-10 times the largest magnitude eigenvalue.
    pub fn new(hessian: Matrix, linear: Vec<f64>) -> Result<Self> {
        if !hessian.is_finite() {
            return Err(Error::NonFinite { name: "Q" });
        }
        if !linear.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { name: "q" });
        }
        if linear.len() != hessian.n() {
            return Err(Error::DimensionMismatch {
                name: "q",
                expected: hessian.n(),
                got: linear.len(),
            });
        }
        let hessian = accept_symmetric(hessian, "Q")?;
        let eig = hessian.eigen_sym()?;
        let largest = eig
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if eig.values[0] < -1e-10 * largest {
            return Err(Error::NotPositiveSemidefinite {
                name: "Q",
                eigenvalue: eig.values[0],
            });
        }
        Ok(QuadraticCost { hessian, linear })
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }
}

/// The constraint set C = { x : (x - v)' A (x - v) <= 1 }.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    shape: Matrix,
    center: Vec<f64>,
}

impl Ellipsoid {
    /// Validates and stores a constraint ellipsoid. Same symmetrization
    /// policy as [`QuadraticCost::new`]; the smallest eigenvalue must exceed
    /// 1e-10 so that the set is bounded with a well-defined interior.
    pub fn new(shape: Matrix, center: Vec<f64>) -> Result<Self> {
        if !shape.is_finite() {
            return Err(Error::NonFinite { name: "A" });
        }
        if !center.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { name: "v" });
        }
        if center.len() != shape.n() {
            return Err(Error::DimensionMismatch {
                name: "v",
                expected: shape.n(),
                got: center.len(),
            });
        }
        let shape = accept_symmetric(shape, "A")?;
        let eig = shape.eigen_sym()?;
        if eig.values[0] <= 1e-10 {
            return Err(Error::NotPositiveDefinite {
                name: "A",
                eigenvalue: eig.values[0],
            });
        }
        Ok(Ellipsoid { shape, center })
    }

    pub fn shape(&self) -> &Matrix {
        &self.shape
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// g(x) = (x - v)' A (x - v).
    pub fn eval_g(&self, x: &[f64]) -> f64 {
        let d = sub(x, &self.center);
        self.shape.quad_form(&d)
    }

    /// grad g(x) = 2 A (x - v).
    pub fn grad_g(&self, x: &[f64]) -> Vec<f64> {
        let d = sub(x, &self.center);
        self.shape.matvec(&d).into_iter().map(|t| 2.0 * t).collect()
    }

    /// A^(-1/2), the linear map taking the unit sphere onto the boundary
    /// of the ellipsoid (after shifting by the center).
    pub fn shape_inverse_sqrt(&self) -> Result<Matrix> {
        self.shape.inverse_sqrt()
    }
}

/// Where a point sits relative to the constraint boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Interior,
    Boundary,
    Exterior,
}

/// A full problem instance: cost plus constraint of matching dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    cost: QuadraticCost,
    constraint: Ellipsoid,
}

impl Problem {
    pub fn new(cost: QuadraticCost, constraint: Ellipsoid) -> Result<Self> {
        if cost.dim() != constraint.dim() {
            return Err(Error::DimensionMismatch {
                name: "constraint",
                expected: cost.dim(),
                got: constraint.dim(),
            });
        }
        Ok(Problem { cost, constraint })
    }

    pub fn cost(&self) -> &QuadraticCost {
        &self.cost
    }

    pub fn constraint(&self) -> &Ellipsoid {
        &self.constraint
    }

    pub fn dim(&self) -> usize {
        self.cost.dim()
    }

    /// f(x) = 1/2 x' Q x + q' x.
    pub fn eval_f(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "eval_f dimension mismatch");
        0.5 * self.cost.hessian.quad_form(x) + dot(&self.cost.linear, x)
    }

    /// grad f(x) = Q x + q.
    pub fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "grad_f dimension mismatch");
        let mut g = self.cost.hessian.matvec(x);
        for (gi, qi) in g.iter_mut().zip(&self.cost.linear) {
            *gi += qi;
        }
        g
    }

    /// g(x) = (x - v)' A (x - v).
    pub fn eval_g(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "eval_g dimension mismatch");
        self.constraint.eval_g(x)
    }

    /// grad g(x) = 2 A (x - v).
    pub fn grad_g(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "grad_g dimension mismatch");
        self.constraint.grad_g(x)
    }

    /// Classifies x against the constraint boundary with absolute tolerance
    /// `tol` on the value of g.
    pub fn membership(&self, x: &[f64], tol: f64) -> Membership {
        assert!(tol >= 0.0, "membership tolerance must be nonnegative");
        let g = self.eval_g(x);
        if (g - 1.0).abs() <= tol {
            Membership::Boundary
        } else if g < 1.0 {
            Membership::Interior
        } else {
            Membership::Exterior
        }
    }
}

fn accept_symmetric(m: Matrix, name: &'static str) -> Result<Matrix> {
    let asym = m.asymmetry();
    if asym > ASYMMETRY_REJECT {
        return Err(Error::Asymmetric {
            name,
            asymmetry: asym,
        });
    }
    if asym > ASYMMETRY_WARN {
        log::warn!("{name} asymmetric by {asym:.3e}; averaging with its transpose");
    }
    Ok(m.symmetrized())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "vector dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Extreme eigenvalues of a symmetric positive semidefinite matrix, plus the
/// curvature radius r = sqrt(sigma_min) / sigma_max used by the invariance
/// scaling bound. r is meaningful for positive definite inputs; for a
/// singular or zero matrix it degrades to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub curvature_radius: f64,
}

/// Computes [`SpectralBounds`] by full eigendecomposition. Deterministic:
/// repeated calls on the same matrix give identical results.
pub fn spectral_bounds(m: &Matrix) -> Result<SpectralBounds> {
    let eig = m.eigen_sym()?;
    let sigma_min = eig.values[0].max(0.0);
    let sigma_max = eig.values[eig.values.len() - 1].max(0.0);
    let curvature_radius = if sigma_max > 0.0 {
        sigma_min.sqrt() / sigma_max
    } else {
        0.0
    };
    Ok(SpectralBounds {
        sigma_max,
        sigma_min,
        curvature_radius,
    })
}

/// Deterministic points on the constraint boundary.
///
/// Points are v + A^(-1/2) u with u running through a seeded low-discrepancy
/// sequence on the unit sphere, so the set for `count` samples is a prefix of
/// the set for any larger count. That nesting is what makes sampled scaling
/// estimates monotone in the sample budget. For n = 1 the boundary is just
/// two points and both are returned exactly, whatever `count` says.
pub fn boundary_samples(e: &Ellipsoid, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = e.dim();
    if n == 1 {
        let half_width = 1.0 / e.shape().get(0, 0).sqrt();
        return Ok(vec![
            vec![e.center()[0] - half_width],
            vec![e.center()[0] + half_width],
        ]);
    }
    let root = e.shape_inverse_sqrt()?;
    let dirs = unit_sphere_sequence(n, seed, count);
    Ok(dirs
        .into_iter()
        .map(|u| {
            let step = root.matvec(&u);
            e.center().iter().zip(step).map(|(c, s)| c + s).collect()
        })
        .collect())
}

/// Seeded low-discrepancy sequence of unit vectors.
///
/// A Kronecker (R_d) sequence fills the unit cube; each coordinate is pushed
/// through the standard normal inverse CDF and the result is normalized, so
/// directions are close to equidistributed on the sphere. The first `count`
/// points never change when `count` grows.
pub(crate) fn unit_sphere_sequence(n: usize, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let alphas = kronecker_alphas(n);
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0x6A09E667F3BCC909);
    let offsets: Vec<f64> = (0..n)
        .map(|_| splitmix64(&mut state) as f64 / 18446744073709551616.0)
        .collect();

    (0..count)
        .map(|j| {
            let mut z: Vec<f64> = (0..n)
                .map(|i| {
                    let u = (offsets[i] + (j as f64 + 1.0) * alphas[i]).fract();
                    inverse_normal_cdf(u.clamp(1e-12, 1.0 - 1e-12))
                })
                .collect();
            let len = dot(&z, &z).sqrt();
            if len < 1e-9 {
                z = vec![0.0; n];
                z[0] = 1.0;
            } else {
                for zi in z.iter_mut() {
                    *zi /= len;
                }
            }
            z
        })
        .collect()
}

/// Irrational step sizes for the R_d sequence: powers of the root of
/// x^(d+1) = x + 1.
fn kronecker_alphas(d: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..128 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (0..d)
        .map(|i| (1.0 / phi.powi(i as i32 + 1)).fract())
        .collect()
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Acklam's rational approximation to the standard normal inverse CDF.
/// Relative error stays below 1.2e-9, plenty for spreading sample
/// directions.
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::norm;
    use proptest::prelude::*;

    fn unit_interval_problem() -> Problem {
        // 1-D reference instance used throughout the crate: f = 0.25 x^2 - x
        // on the interval [-1, 1].
        let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0]).unwrap();
        let cons = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
        Problem::new(cost, cons).unwrap()
    }

    #[test]
    fn eval_f_matches_hand_values() {
        let p = unit_interval_problem();
        // 0.25 * 0.16 - 0.4 = -0.36
        assert!((p.eval_f(&[0.4]) - (-0.36)).abs() < 1e-15);
        assert_eq!(p.eval_f(&[0.0]), 0.0);
        assert!((p.eval_f(&[1.0]) - (-0.75)).abs() < 1e-15);
    }

    #[test]
    fn eval_f_quadratic_term_only() {
        let cost = QuadraticCost::new(
            Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let cons = Ellipsoid::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let p = Problem::new(cost, cons).unwrap();
        // 1/2 (2*1 + 4*9) = 19
        assert!((p.eval_f(&[1.0, 3.0]) - 19.0).abs() < 1e-12);
    }

    #[test]
    fn grad_f_matches_hand_values() {
        let p = unit_interval_problem();
        assert!((p.grad_f(&[0.4])[0] - (-0.8)).abs() < 1e-15);
        assert!((p.grad_f(&[1.0])[0] - (-0.5)).abs() < 1e-15);
        assert!((p.grad_f(&[2.0])[0] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn eval_g_measures_scaled_distance() {
        let e = Ellipsoid::new(Matrix::diagonal(&[4.0]), vec![1.0]).unwrap();
        assert_eq!(e.eval_g(&[1.0]), 0.0);
        assert!((e.eval_g(&[1.5]) - 1.0).abs() < 1e-15);
        assert!((e.eval_g(&[2.0]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn grad_g_is_twice_shape_times_offset() {
        let e = Ellipsoid::new(Matrix::diagonal(&[4.0]), vec![1.0]).unwrap();
        assert!((e.grad_g(&[1.5])[0] - 4.0).abs() < 1e-15);
        assert_eq!(e.grad_g(&[1.0])[0], 0.0);

        let e2 = Ellipsoid::new(
            Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let g = e2.grad_g(&[1.0, 1.0]);
        assert!((g[0] - 3.0).abs() < 1e-15);
        assert!((g[1] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn membership_classifies_with_tolerance() {
        let p = unit_interval_problem();
        assert_eq!(p.membership(&[0.5], 1e-9), Membership::Interior);
        assert_eq!(p.membership(&[1.0], 1e-9), Membership::Boundary);
        assert_eq!(p.membership(&[1.1], 1e-9), Membership::Exterior);
    }

    #[test]
    fn spectral_bounds_closed_form_2x2() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = spectral_bounds(&m).unwrap();
        assert!((b.sigma_max - 3.0).abs() < 1e-12);
        assert!((b.sigma_min - 1.0).abs() < 1e-12);
        assert!((b.curvature_radius - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_bounds_identity_and_zero() {
        let b = spectral_bounds(&Matrix::identity(3)).unwrap();
        assert_eq!((b.sigma_max, b.sigma_min, b.curvature_radius), (1.0, 1.0, 1.0));
        let z = spectral_bounds(&Matrix::zeros(2)).unwrap();
        assert_eq!((z.sigma_max, z.sigma_min, z.curvature_radius), (0.0, 0.0, 0.0));
    }

    #[test]
    fn boundary_samples_1d_returns_both_endpoints() {
        let e = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
        for count in [1, 2, 7, 100] {
            let pts = boundary_samples(&e, count, 42).unwrap();
            assert_eq!(pts, vec![vec![-1.0], vec![1.0]]);
        }
        let e4 = Ellipsoid::new(Matrix::diagonal(&[4.0]), vec![0.0]).unwrap();
        let pts = boundary_samples(&e4, 5, 0).unwrap();
        assert_eq!(pts, vec![vec![-0.5], vec![0.5]]);
    }

    #[test]
    fn boundary_samples_lie_on_the_boundary() {
        let e = Ellipsoid::new(
            Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap(),
            vec![0.5, -1.0],
        )
        .unwrap();
        for pt in boundary_samples(&e, 64, 7).unwrap() {
            assert!((e.eval_g(&pt) - 1.0).abs() <= 1e-9, "g = {}", e.eval_g(&pt));
        }
    }

    #[test]
    fn boundary_samples_nest_when_count_doubles() {
        let e = Ellipsoid::new(Matrix::identity(3), vec![0.0, 0.0, 0.0]).unwrap();
        let small = boundary_samples(&e, 32, 9).unwrap();
        let large = boundary_samples(&e, 64, 9).unwrap();
        assert_eq!(&large[..32], &small[..]);
    }

    #[test]
    fn constructors_reject_bad_input() {
        // Indefinite cost matrix.
        let err = QuadraticCost::new(Matrix::diagonal(&[1.0, -0.5]), vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemidefinite { name: "Q", .. }));

        // Singular constraint matrix.
        let err = Ellipsoid::new(Matrix::diagonal(&[1.0, 0.0]), vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { name: "A", .. }));

        // Grossly asymmetric constraint matrix.
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let err = Ellipsoid::new(m, vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Asymmetric { name: "A", .. }));

        // Non-finite center.
        let err = Ellipsoid::new(Matrix::identity(1), vec![f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { name: "v" }));

        // Dimension mismatch between cost and constraint.
        let cost = QuadraticCost::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let cons = Ellipsoid::new(Matrix::identity(3), vec![0.0; 3]).unwrap();
        assert!(matches!(
            Problem::new(cost, cons).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn tiny_asymmetry_is_averaged_away() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5 + 1e-13], vec![0.5, 1.0]]).unwrap();
        let e = Ellipsoid::new(m, vec![0.0, 0.0]).unwrap();
        assert_eq!(e.shape().get(0, 1), e.shape().get(1, 0));
    }

    proptest! {
        #[test]
        fn g_is_nonnegative_and_zero_only_at_center(
            a in 0.1f64..5.0,
            b in 0.1f64..5.0,
            c in -0.4f64..0.4,
            cx in -3.0f64..3.0,
            cy in -3.0f64..3.0,
            x in -5.0f64..5.0,
            y in -5.0f64..5.0,
        ) {
            // c scales the off-diagonal relative to sqrt(ab) so the matrix
            // stays positive definite.
            let off = c * (a * b).sqrt();
            let shape = Matrix::from_rows(&[vec![a, off], vec![off, b]]).unwrap();
            let e = Ellipsoid::new(shape, vec![cx, cy]).unwrap();
            let g = e.eval_g(&[x, y]);
            prop_assert!(g >= 0.0);
            let at_center = e.eval_g(&[cx, cy]);
            prop_assert!(at_center.abs() < 1e-12);
            if (x - cx).abs() > 1e-6 || (y - cy).abs() > 1e-6 {
                prop_assert!(g > 0.0);
            }
        }

        #[test]
        fn gradients_match_finite_differences(
            x in -2.0f64..2.0,
            y in -2.0f64..2.0,
        ) {
            let cost = QuadraticCost::new(
                Matrix::from_rows(&[vec![1.5, 0.25], vec![0.25, 0.75]]).unwrap(),
                vec![0.5, -1.0],
            ).unwrap();
            let cons = Ellipsoid::new(
                Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap(),
                vec![0.1, 0.2],
            ).unwrap();
            let p = Problem::new(cost, cons).unwrap();
            let h = 1e-6;
            let pt = [x, y];
            for i in 0..2 {
                let mut hi = pt.to_vec();
                let mut lo = pt.to_vec();
                hi[i] += h;
                lo[i] -= h;
                let df = (p.eval_f(&hi) - p.eval_f(&lo)) / (2.0 * h);
                let dg = (p.eval_g(&hi) - p.eval_g(&lo)) / (2.0 * h);
                prop_assert!((df - p.grad_f(&pt)[i]).abs() < 1e-6);
                prop_assert!((dg - p.grad_g(&pt)[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_sequence_is_deterministic_per_seed() {
        let a = unit_sphere_sequence(3, 5, 16);
        let b = unit_sphere_sequence(3, 5, 16);
        assert_eq!(a, b);
        let c = unit_sphere_sequence(3, 6, 16);
        assert_ne!(a, c);
        for u in &a {
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
    }
}

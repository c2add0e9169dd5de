//! Shared fixtures: the reference interval problem and a seeded generator
//! of random instances whose constraint spectra keep the invariance
//! requirement satisfiable (shape eigenvalues within a 3:1 ratio).
#![allow(dead_code)]

use polypen::{Ellipsoid, Matrix, Problem, QuadraticCost};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 0.25 x^2 - x over [-1, 1]: boundary-active with x* = 1, f* = -0.75.
pub fn interval_problem() -> Problem {
    let cost = QuadraticCost::new(Matrix::diagonal(&[0.5]), vec![-1.0]).unwrap();
    let cons = Ellipsoid::new(Matrix::diagonal(&[1.0]), vec![0.0]).unwrap();
    Problem::new(cost, cons).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random orthonormal basis via Gram-Schmidt on uniform vectors.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut cand: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for u in &basis {
            let proj: f64 = cand.iter().zip(u).map(|(c, ui)| c * ui).sum();
            for (c, ui) in cand.iter_mut().zip(u) {
                *c -= proj * ui;
            }
        }
        let norm = cand.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(cand.into_iter().map(|c| c / norm).collect());
        }
    }
    basis
}

/// Builds sum_k lambda_k u_k u_k'; exactly symmetric by construction.
pub fn matrix_from_spectrum(basis: &[Vec<f64>], eigs: &[f64]) -> Matrix {
    let n = eigs.len();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for (u, &l) in basis.iter().zip(eigs) {
                s += l * u[i] * u[j];
            }
            m.set(i, j, s);
        }
    }
    m
}

/// A random instance with a known-benign geometry: shape eigenvalues in
/// [0.6, 1.8] (condition number below the ratio where the invariance
/// requirement becomes infeasible), cost eigenvalues in [0, 4] with
/// occasional exact zeros, center in the unit cube.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> Problem {
    let basis = random_orthonormal(rng, n);
    let shape_eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
    let shape = matrix_from_spectrum(&basis, &shape_eigs);
    let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let cost_basis = random_orthonormal(rng, n);
    let cost_eigs: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen_range(0.5..4.0)
            }
        })
        .collect();
    let hessian = matrix_from_spectrum(&cost_basis, &cost_eigs);
    let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

    Problem::new(
        QuadraticCost::new(hessian, linear).unwrap(),
        Ellipsoid::new(shape, center).unwrap(),
    )
    .unwrap()
}

/// Like [`random_problem`] but with cost curvature at least 2, which makes
/// every step size at most 1/2 (used by the step-energy bound).
pub fn random_stiff_problem(rng: &mut ChaCha8Rng, n: usize) -> Problem {
    let basis = random_orthonormal(rng, n);
    let shape_eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
    let shape = matrix_from_spectrum(&basis, &shape_eigs);
    let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let cost_basis = random_orthonormal(rng, n);
    let cost_eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(2.0..6.0)).collect();
    let hessian = matrix_from_spectrum(&cost_basis, &cost_eigs);
    let linear: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

    Problem::new(
        QuadraticCost::new(hessian, linear).unwrap(),
        Ellipsoid::new(shape, center).unwrap(),
    )
    .unwrap()
}

/// True when the constrained optimum sits on the boundary of C.
pub fn boundary_active(p: &Problem) -> bool {
    let res = polypen::oracle::solve_constrained(p, 1e-9).unwrap();
    p.eval_g(&res.x_star) > 1.0 - 1e-6
}

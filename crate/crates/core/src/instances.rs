//! Synthetic problem instances with prescribed `mu`, `L` and bounded `dom h`.

use crate::error::{validate, Result};
use crate::problem::{CompositeProblem, LeastSquares, Logistic, Quadratic};
use crate::prox::Regularizer;
use crate::rng::RngStream;
use crate::solver::minimize_phi;
use crate::RealVector;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Tolerance of the deterministic solve that fixes `phi*` at creation.
pub const OPTIMUM_TOL: f64 = 1e-11;

fn check_moduli(dim: usize, mu: f64, lipschitz: f64) -> Result<()> {
    validate(dim >= 2, || format!("dimension must be at least 2, got {dim}"))?;
    validate(mu > 0.0 && mu.is_finite(), || format!("mu must be positive, got {mu}"))?;
    validate(lipschitz > mu && lipschitz.is_finite(), || {
        format!("need mu < L, got mu = {mu}, L = {lipschitz}")
    })
}

/// Spectrum with `mu` and `L` attained and the rest uniform in between.
fn spectrum<R: Rng>(dim: usize, mu: f64, lipschitz: f64, rng: &mut R) -> Vec<f64> {
    let mut eig: Vec<f64> = (0..dim).map(|_| rng.random_range(mu..=lipschitz)).collect();
    eig[0] = mu;
    eig[dim - 1] = lipschitz;
    eig
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Matrix with orthonormal columns, Haar distributed for square shapes.
fn orthonormal_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(rows, cols, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> RealVector {
    RealVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize()
}

fn finish(problem: CompositeProblem, start: RealVector) -> Result<CompositeProblem> {
    let optimum = minimize_phi(&problem, &start, OPTIMUM_TOL)?;
    problem.with_initial_point(start).map(|p| p.with_optimum(optimum))
}

/// `f(x) = 1/2 (x-c)^T Q (x-c)` with `spec(Q)` in `[mu, L]` (both attained), `h` the
/// indicator of the ball of radius `radius` at the origin.
///
/// The unconstrained minimizer `c` sits at a random radius in `[0.5, 2] * radius`,
/// so the constraint is active for some instances. The initial point is the
/// boundary point opposite to `c`.
pub fn quadratic_ball(dim: usize, mu: f64, lipschitz: f64, radius: f64, seed: u64) -> Result<CompositeProblem> {
    check_moduli(dim, mu, lipschitz)?;
    validate(radius > 0.0 && radius.is_finite(), || format!("radius must be positive, got {radius}"))?;
    let mut rng = RngStream::new(seed).child("quadratic-ball", dim as u64).rng();
    let eig = spectrum(dim, mu, lipschitz, &mut rng);
    let u = orthonormal_columns(dim, dim, &mut rng);
    let q = &u * DMatrix::from_diagonal(&RealVector::from_vec(eig)) * u.transpose();
    let q = (&q + q.transpose()) * 0.5;
    let dir = random_unit(dim, &mut rng);
    let center = &dir * (radius * rng.random_range(0.5..=2.0));
    let f = Quadratic::new(q, center, 0.0)?;
    let h = Regularizer::ball(RealVector::zeros(dim), radius)?;
    let problem = CompositeProblem::new(Arc::new(f), h, mu, lipschitz)?;
    finish(problem, -dir * radius)
}

/// Least squares over a pool of `pool` rows with `A^T A / N` having spectrum in
/// `[mu, L]` (both attained), plus `l1_weight |x|_1` and the box `[-half_width, half_width]^d`.
pub fn ridge_l1_box(
    dim: usize,
    mu: f64,
    lipschitz: f64,
    half_width: f64,
    l1_weight: f64,
    pool: usize,
    seed: u64,
) -> Result<CompositeProblem> {
    check_moduli(dim, mu, lipschitz)?;
    validate(pool >= dim, || format!("pool size {pool} must be at least the dimension {dim}"))?;
    validate(half_width > 0.0, || "box half width must be positive".into())?;
    let mut rng = RngStream::new(seed).child("ridge-l1-box", dim as u64).rng();
    let eig = spectrum(dim, mu, lipschitz, &mut rng);
    let v = orthonormal_columns(pool, dim, &mut rng);
    let u = orthonormal_columns(dim, dim, &mut rng);
    let scale = RealVector::from_iterator(dim, eig.iter().map(|e| e.sqrt()));
    let a = v * DMatrix::from_diagonal(&scale) * u.transpose() * (pool as f64).sqrt();
    let truth = RealVector::from_fn(dim, |_, _| rng.random_range(-half_width..=half_width));
    let targets = &a * &truth + RealVector::from_fn(pool, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let f = LeastSquares::new(a, targets)?;
    let h = Regularizer::l1_box(l1_weight, -half_width, half_width)?;
    let problem = CompositeProblem::new(Arc::new(f), h, mu, lipschitz)?;
    finish(problem, RealVector::from_element(dim, half_width))
}

/// Logistic regression with ridge `mu` on the ball of radius `radius`. The
/// design is scaled so that `mu + lambda_max(A^T A / N) / 4 = L`.
pub fn logreg_ridge_ball(
    dim: usize,
    mu: f64,
    lipschitz: f64,
    radius: f64,
    pool: usize,
    seed: u64,
) -> Result<CompositeProblem> {
    check_moduli(dim, mu, lipschitz)?;
    validate(pool >= 1, || "pool must be nonempty".into())?;
    validate(radius > 0.0, || "radius must be positive".into())?;
    let mut rng = RngStream::new(seed).child("logreg-ridge-ball", dim as u64).rng();
    let raw = gaussian_matrix(pool, dim, &mut rng);
    let gram = raw.tr_mul(&raw) / pool as f64;
    let top = SymmetricEigen::new(gram).eigenvalues.max();
    let a = raw * (4.0 * (lipschitz - mu) / top).sqrt();
    let truth = random_unit(dim, &mut rng) * (2.0 * radius);
    let labels = RealVector::from_fn(pool, |i, _| {
        let margin = (a.row(i) * &truth)[0];
        let p = 1.0 / (1.0 + (-margin).exp());
        if rng.random::<f64>() < p {
            1.0
        } else {
            -1.0
        }
    });
    let f = Logistic::new(a, labels, mu)?;
    let h = Regularizer::ball(RealVector::zeros(dim), radius)?;
    let problem = CompositeProblem::new(Arc::new(f), h, mu, lipschitz)?;
    let start = -truth.normalize() * radius;
    finish(problem, start)
}

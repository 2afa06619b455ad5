//! Composite problems `phi = f + h` and smooth parts `f`.

use crate::error::{validate, Result};
use crate::prox::Regularizer;
use crate::RealVector;
use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use std::fmt;
use std::sync::Arc;

/// The smooth, strongly convex part `f` with exact first-order information.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &RealVector) -> f64;
    fn gradient(&self, x: &RealVector) -> RealVector;
    /// Component access when `f` is an average of `len()` components.
    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        None
    }
}

/// `f = (1/N) sum_i f_i`.
pub trait FiniteSum: Send + Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn component_gradient(&self, i: usize, x: &RealVector) -> RealVector;
}

/// `f(x) = 1/2 (x - c)^T Q (x - c) + offset`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    hessian: DMatrix<f64>,
    center: RealVector,
    offset: f64,
}

impl Quadratic {
    pub fn new(hessian: DMatrix<f64>, center: RealVector, offset: f64) -> Result<Self> {
        validate(hessian.is_square() && hessian.nrows() == center.len(), || {
            format!(
                "hessian is {}x{} but center has length {}",
                hessian.nrows(),
                hessian.ncols(),
                center.len()
            )
        })?;
        let asym = (&hessian - hessian.transpose()).amax();
        validate(asym <= 1e-12 * (1.0 + hessian.amax()), || "hessian must be symmetric".into())?;
        Ok(Self {
            hessian,
            center,
            offset,
        })
    }

    /// `1/2 sum_i d_i x_i^2`.
    pub fn diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self {
            hessian: DMatrix::from_diagonal(&RealVector::from_column_slice(diag)),
            center: RealVector::zeros(d),
            offset: 0.0,
        }
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn center(&self) -> &RealVector {
        &self.center
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &RealVector) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.hessian * &d)) + self.offset
    }

    fn gradient(&self, x: &RealVector) -> RealVector {
        &self.hessian * (x - &self.center)
    }
}

/// Least squares `f(x) = (1/2N) |Ax - b|^2`, sampled one row at a time.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: DMatrix<f64>,
    targets: RealVector,
}

impl LeastSquares {
    pub fn new(design: DMatrix<f64>, targets: RealVector) -> Result<Self> {
        validate(design.nrows() == targets.len() && design.nrows() > 0, || {
            format!("design has {} rows but {} targets", design.nrows(), targets.len())
        })?;
        Ok(Self { design, targets })
    }

    fn residuals(&self, x: &RealVector) -> RealVector {
        &self.design * x - &self.targets
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &RealVector) -> f64 {
        self.residuals(x).norm_squared() / (2.0 * self.design.nrows() as f64)
    }

    fn gradient(&self, x: &RealVector) -> RealVector {
        self.design.tr_mul(&self.residuals(x)) / self.design.nrows() as f64
    }

    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        Some(self)
    }
}

impl FiniteSum for LeastSquares {
    fn len(&self) -> usize {
        self.design.nrows()
    }

    fn component_gradient(&self, i: usize, x: &RealVector) -> RealVector {
        let row = self.design.row(i);
        let r = (row * x)[0] - self.targets[i];
        row.transpose() * r
    }
}

/// Ridge-regularized logistic loss with labels in `{-1, +1}`.
#[derive(Debug, Clone)]
pub struct Logistic {
    design: DMatrix<f64>,
    labels: RealVector,
    ridge: f64,
}

impl Logistic {
    pub fn new(design: DMatrix<f64>, labels: RealVector, ridge: f64) -> Result<Self> {
        validate(design.nrows() == labels.len() && design.nrows() > 0, || {
            format!("design has {} rows but {} labels", design.nrows(), labels.len())
        })?;
        validate(labels.iter().all(|&y| y == 1.0 || y == -1.0), || "labels must be +-1".into())?;
        validate(ridge >= 0.0, || "ridge must be nonnegative".into())?;
        Ok(Self {
            design,
            labels,
            ridge,
        })
    }
}

/// `log(1 + exp(-m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

impl SmoothFunction for Logistic {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn value(&self, x: &RealVector) -> f64 {
        let margins = (&self.design * x).component_mul(&self.labels);
        let n = self.design.nrows() as f64;
        margins.iter().map(|&m| log1p_exp_neg(m)).sum::<f64>() / n + 0.5 * self.ridge * x.norm_squared()
    }

    fn gradient(&self, x: &RealVector) -> RealVector {
        let margins = (&self.design * x).component_mul(&self.labels);
        // d/dm log(1+e^{-m}) = -1/(1+e^{m})
        let weights = RealVector::from_iterator(
            margins.len(),
            margins
                .iter()
                .zip(self.labels.iter())
                .map(|(&m, &y)| -y / (1.0 + m.exp())),
        );
        self.design.tr_mul(&weights) / self.design.nrows() as f64 + x * self.ridge
    }
}

/// Known minimizer of `phi` and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: RealVector,
    pub value: f64,
}

/// `phi = f + h` with the structural constants the method consumes.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothFunction>,
    regularizer: Regularizer,
    mu: f64,
    lipschitz: f64,
    diameter: Option<f64>,
    optimum: Option<Optimum>,
    initial_point: Option<RealVector>,
}

impl CompositeProblem {
    /// `mu` is the strong convexity modulus of `f`, `lipschitz` the Lipschitz
    /// constant of its gradient. The diameter is read off `dom h` when bounded.
    pub fn new(
        smooth: Arc<dyn SmoothFunction>,
        regularizer: Regularizer,
        mu: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        validate(mu > 0.0 && mu.is_finite(), || format!("mu must be positive, got {mu}"))?;
        validate(lipschitz >= mu && lipschitz.is_finite(), || {
            format!("L must satisfy L >= mu, got L = {lipschitz}, mu = {mu}")
        })?;
        if let Regularizer::Ball { center, .. } = &regularizer {
            validate(center.len() == smooth.dim(), || "ball center has wrong dimension".into())?;
        }
        let diameter = regularizer.diameter(smooth.dim());
        Ok(Self {
            smooth,
            regularizer,
            mu,
            lipschitz,
            diameter,
            optimum: None,
            initial_point: None,
        })
    }

    /// Overrides the domain diameter. Supplying one for an unbounded `dom h`
    /// is accepted but the bounds that consume `D` are then not guaranteed.
    pub fn with_diameter(mut self, diameter: f64) -> Result<Self> {
        validate(diameter > 0.0 && diameter.is_finite(), || {
            format!("diameter must be positive, got {diameter}")
        })?;
        if self.regularizer.diameter(self.dim()).is_none() {
            warn!(
                "diameter {diameter} supplied for an unbounded dom h; bounds using D are unsound"
            );
        }
        self.diameter = Some(diameter);
        Ok(self)
    }

    pub fn with_optimum(mut self, optimum: Optimum) -> Self {
        self.optimum = Some(optimum);
        self
    }

    pub fn with_initial_point(mut self, x: RealVector) -> Result<Self> {
        validate(self.regularizer.contains(&x), || "initial point outside dom h".into())?;
        self.initial_point = Some(x);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }
    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }
    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn condition_number(&self) -> f64 {
        self.lipschitz / self.mu
    }
    pub fn diameter(&self) -> Option<f64> {
        self.diameter
    }
    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }
    pub fn initial_point(&self) -> Option<&RealVector> {
        self.initial_point.as_ref()
    }

    pub fn f_value(&self, x: &RealVector) -> f64 {
        self.smooth.value(x)
    }

    pub fn grad_f(&self, x: &RealVector) -> RealVector {
        self.smooth.gradient(x)
    }

    pub fn contains(&self, x: &RealVector) -> bool {
        x.len() == self.dim() && self.regularizer.contains(x)
    }

    /// `phi(x) = f(x) + h(x)`, `+inf` outside `dom h`.
    pub fn evaluate_phi(&self, x: &RealVector) -> f64 {
        let h = self.regularizer.value(x);
        if h.is_infinite() {
            return f64::INFINITY;
        }
        self.smooth.value(x) + h
    }

    /// `phi^lambda(x) = phi(x) + |x - center|^2 / (2 lambda)`.
    pub fn phi_lambda(&self, x: &RealVector, center: &RealVector, lambda: f64) -> f64 {
        self.evaluate_phi(x) + (x - center).norm_squared() / (2.0 * lambda)
    }

    /// `phi(x) - phi*` when the optimum is known.
    pub fn gap(&self, x: &RealVector) -> Option<f64> {
        self.optimum.as_ref().map(|o| self.evaluate_phi(x) - o.value)
    }

    /// A random point of `dom h`; unbounded domains are sampled in `[-1, 1]^d`.
    pub fn random_domain_point<R: Rng + ?Sized>(&self, rng: &mut R) -> RealVector {
        let d = self.dim();
        match &self.regularizer {
            Regularizer::Ball { center, radius } => {
                let dir = RealVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                center + dir.normalize() * r
            }
            Regularizer::L1Box { lower, upper, .. } => {
                RealVector::from_fn(d, |_, _| rng.random_range(*lower..=*upper))
            }
            _ => RealVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_square_1d(h: Regularizer) -> CompositeProblem {
        CompositeProblem::new(Arc::new(Quadratic::diagonal(&[1.0])), h, 1.0, 1.0).unwrap()
    }

    #[test]
    fn evaluate_phi_examples() {
        let p = half_square_1d(Regularizer::Zero);
        assert_eq!(p.evaluate_phi(&dvector![1.0]), 0.5);
        let ball = Regularizer::ball(dvector![0.0, 0.0], 1.0).unwrap();
        let p2 = CompositeProblem::new(Arc::new(Quadratic::diagonal(&[1.0, 1.0])), ball, 1.0, 1.0)
            .unwrap();
        assert_eq!(p2.evaluate_phi(&dvector![2.0, 0.0]), f64::INFINITY);
        assert_eq!(p2.diameter(), Some(2.0));
    }

    #[test]
    fn constructor_validation() {
        let f = Arc::new(Quadratic::diagonal(&[1.0]));
        assert!(CompositeProblem::new(f.clone(), Regularizer::Zero, 0.0, 1.0).is_err());
        assert!(CompositeProblem::new(f.clone(), Regularizer::Zero, 2.0, 1.0).is_err());
        let p = CompositeProblem::new(f, Regularizer::Zero, 1.0, 1.0).unwrap();
        assert_eq!(p.diameter(), None);
        let p = p.with_diameter(3.0).unwrap();
        assert_eq!(p.diameter(), Some(3.0));
        assert!(p.clone().with_diameter(-1.0).is_err());
    }

    fn finite_difference_check(f: &dyn SmoothFunction, x: &RealVector) {
        let g = f.gradient(x);
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = RealVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let labels = RealVector::from_fn(30, |i, _| if i % 3 == 0 { 1.0 } else { -1.0 });
        let x = RealVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.3 });
        finite_difference_check(&Quadratic::new(q, x.clone() * 0.5, 1.0).unwrap(), &x);
        finite_difference_check(&LeastSquares::new(a.clone(), b).unwrap(), &x);
        finite_difference_check(&Logistic::new(a, labels, 0.1).unwrap(), &x);
    }

    #[test]
    fn least_squares_components_average_to_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(17, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = RealVector::from_fn(17, |_, _| rng.random_range(-1.0..1.0));
        let ls = LeastSquares::new(a, b).unwrap();
        let x = dvector![0.2, -0.4, 0.9];
        let fs = ls.finite_sum().unwrap();
        let avg = (0..fs.len()).fold(RealVector::zeros(3), |acc, i| acc + fs.component_gradient(i, &x))
            / fs.len() as f64;
        assert!((avg - ls.gradient(&x)).norm() < 1e-12);
    }

    #[test]
    fn random_domain_points_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ball = Regularizer::ball(dvector![1.0, 1.0, 1.0], 0.5).unwrap();
        let p = CompositeProblem::new(Arc::new(Quadratic::diagonal(&[1.0, 2.0, 3.0])), ball, 1.0, 3.0)
            .unwrap();
        for _ in 0..200 {
            assert!(p.contains(&p.random_domain_point(&mut rng)));
        }
    }
}

//! Robust selection among candidates.
//!
//! [`sts`] (second tertile selection) keeps the indices whose distance to
//! their `m`-th nearest candidate (self included, `m = floor(2n/3) + 1`) is at
//! most the `m`-th smallest such radius. Whenever more than `2n/3` candidates
//! lie within `eps` of some point, every kept index lies within `3 eps` of it.
//! [`rge`] applies it to batch-mean gradients.

use crate::error::{validate, Error, Result};
use crate::oracle::Oracle;
use crate::prox::Regularizer;
use crate::rng::RngStream;
use crate::RealVector;

/// Order statistic used throughout: `floor(2n/3) + 1`.
pub fn tertile_rank(n: usize) -> usize {
    2 * n / 3 + 1
}

/// `m`-th smallest (1-based) of `values`.
fn order_statistic(values: &mut [f64], m: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(m - 1, f64::total_cmp);
    *v
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsOutcome {
    /// Selected indices (0-based, ascending).
    pub selected: Vec<usize>,
    /// `rho_j` for every candidate.
    pub radii: Vec<f64>,
    /// The second tertile `rho_bar`.
    pub threshold: f64,
}

impl StsOutcome {
    pub fn first(&self) -> usize {
        self.selected[0]
    }

    pub fn contains(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }
}

/// Second tertile selection over arbitrary items under the pseudo-metric `dist`.
pub fn sts<T, D>(points: &[T], mut dist: D) -> Result<StsOutcome>
where
    D: FnMut(&T, &T) -> Result<f64>,
{
    let n = points.len();
    validate(n >= 1, || "selection needs at least one candidate".into())?;
    let m = tertile_rank(n);
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&points[i], &points[j])?;
            if d.is_nan() || d < 0.0 {
                return Err(Error::Numeric {
                    message: format!("distance between candidates {i} and {j} is not a nonnegative number"),
                    residual: d,
                });
            }
            matrix[i * n + j] = d;
            matrix[j * n + i] = d;
        }
    }
    let radii: Vec<f64> = matrix
        .chunks_mut(n)
        .map(|row| order_statistic(row, m))
        .collect();
    let threshold = order_statistic(&mut radii.clone(), m);
    let selected = (0..n).filter(|&j| radii[j] <= threshold).collect();
    Ok(StsOutcome {
        selected,
        radii,
        threshold,
    })
}

fn euclidean(x: &RealVector, y: &RealVector) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// The metrics the booster selects under.
#[derive(Debug, Clone)]
pub enum SelectionMetric {
    Euclidean,
    /// `|h(x) - h(y) + <g, x - y>|` for a fixed shifted gradient estimate `g`.
    Dh { h: Regularizer, shifted_gradient: RealVector },
}

impl SelectionMetric {
    pub fn eval(&self, x: &RealVector, y: &RealVector) -> Result<f64> {
        match self {
            SelectionMetric::Euclidean => Ok(euclidean(x, y)),
            SelectionMetric::Dh { h, shifted_gradient } => {
                let (hx, hy) = (h.value(x), h.value(y));
                if hx.is_infinite() || hy.is_infinite() {
                    return Err(Error::Domain("d_h evaluated outside dom h".into()));
                }
                Ok((hx - hy + shifted_gradient.dot(&(x - y))).abs())
            }
        }
    }

    /// [`sts`] over `points` under this metric.
    pub fn select(&self, points: &[RealVector]) -> Result<StsOutcome> {
        match self {
            SelectionMetric::Euclidean => sts(points, |a, b| Ok(euclidean(a, b))),
            SelectionMetric::Dh { h, shifted_gradient } => {
                // d_h(x_i, x_j) = |a_i - a_j| with a_j = h(x_j) + <g, x_j>
                let mut offsets = Vec::with_capacity(points.len());
                for x in points {
                    let hx = h.value(x);
                    if hx.is_infinite() {
                        return Err(Error::Domain("d_h evaluated outside dom h".into()));
                    }
                    offsets.push(hx + shifted_gradient.dot(x));
                }
                sts(&offsets, |a, b| Ok((a - b).abs()))
            }
        }
    }
}

/// Inputs of the runtime metric: the gradient estimate `s_bar` at `w_tilde`,
/// the prox center `z_bar` and `lambda`.
#[derive(Debug, Clone)]
pub struct DhParams {
    pub h: Regularizer,
    pub s_bar: RealVector,
    pub w_tilde: RealVector,
    pub z_bar: RealVector,
    pub lambda: f64,
}

/// `d_h(x, y) = |h(x) - h(y) + <s_bar + (w_tilde - z_bar)/lambda, x - y>|`.
///
/// A pseudo-metric: symmetric, zero on the diagonal and subadditive, but it can
/// vanish for `x != y`.
pub fn make_dh(params: DhParams) -> Result<SelectionMetric> {
    validate(params.lambda > 0.0 && params.lambda.is_finite(), || "lambda must be positive".into())?;
    let shifted = &params.s_bar + (&params.w_tilde - &params.z_bar) / params.lambda;
    validate(shifted.iter().all(|v| v.is_finite()), || "shifted gradient estimate is not finite".into())?;
    Ok(SelectionMetric::Dh {
        h: params.h,
        shifted_gradient: shifted,
    })
}

/// Bregman divergence `D_h(x, z_hat) = h(x) - h(z_hat) + <g, x - z_hat>` where the
/// caller supplies `g = grad f(z_hat) + (z_hat - z_bar)/lambda`.
pub fn bregman_dh(h: &Regularizer, x: &RealVector, z_hat: &RealVector, g: &RealVector) -> Result<f64> {
    let (hx, hz) = (h.value(x), h.value(z_hat));
    if hx.is_infinite() || hz.is_infinite() {
        return Err(Error::Domain("Bregman divergence evaluated outside dom h".into()));
    }
    Ok(hx - hz + g.dot(&(x - z_hat)))
}

/// Robust gradient estimate at `x` from `n` batch means of `q` samples each.
/// Batch `j` draws from `stream.child("rge-batch", j)`. Returns the batch mean
/// with the smallest index kept by Euclidean [`sts`].
pub fn rge(oracle: &Oracle<'_>, x: &RealVector, n: usize, q: usize, stream: &RngStream) -> Result<RealVector> {
    validate(n >= 1 && q >= 1, || format!("rge needs n, q >= 1, got n = {n}, q = {q}"))?;
    let means = (0..n)
        .map(|j| oracle.batch_mean(x, q, &stream.child("rge-batch", j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let chosen = SelectionMetric::Euclidean.select(&means)?.first();
    Ok(means.into_iter().nth(chosen).expect("index from selection"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problem::{CompositeProblem, Quadratic};
    use nalgebra::dvector;
    use std::sync::Arc;

    fn scalars(v: &[f64]) -> Vec<RealVector> {
        v.iter().map(|&x| dvector![x]).collect()
    }

    #[test]
    fn hand_computed_selection() {
        // m = 3; rho = (2, 1, 2, 99), rho_bar = 2
        let out = SelectionMetric::Euclidean.select(&scalars(&[0.0, 1.0, 2.0, 100.0])).unwrap();
        assert_eq!(out.radii, vec![2.0, 1.0, 2.0, 99.0]);
        assert_eq!(out.threshold, 2.0);
        assert_eq!(out.selected, vec![0, 1, 2]);
    }

    #[test]
    fn identical_and_single_points() {
        let out = SelectionMetric::Euclidean.select(&scalars(&[3.0; 7])).unwrap();
        assert_eq!(out.selected, (0..7).collect::<Vec<_>>());
        assert!(out.radii.iter().all(|&r| r == 0.0));
        let one = SelectionMetric::Euclidean.select(&scalars(&[5.0])).unwrap();
        assert_eq!((one.selected.clone(), one.threshold), (vec![0], 0.0));
        assert_eq!(tertile_rank(1), 1);
        assert!(SelectionMetric::Euclidean.select(&[]).is_err());
    }

    #[test]
    fn works_on_opaque_items() {
        let words = ["aa", "ab", "abc", "zzzzzzzz"];
        let out = sts(&words, |a, b| Ok((a.len() as f64 - b.len() as f64).abs())).unwrap();
        assert!(!out.contains(3));
    }

    #[test]
    fn dh_examples() {
        let m = SelectionMetric::Dh {
            h: Regularizer::Zero,
            shifted_gradient: dvector![1.0, 0.0],
        };
        assert_eq!(m.eval(&dvector![1.0, 0.0], &dvector![0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(m.eval(&dvector![0.3, 0.7], &dvector![0.3, 0.7]).unwrap(), 0.0);
        let a = dvector![0.2, -1.0];
        let b = dvector![-0.5, 0.4];
        assert_eq!(m.eval(&a, &b).unwrap(), m.eval(&b, &a).unwrap());
        let ball = SelectionMetric::Dh {
            h: Regularizer::ball(dvector![0.0, 0.0], 1.0).unwrap(),
            shifted_gradient: dvector![1.0, 1.0],
        };
        assert!(matches!(ball.eval(&dvector![2.0, 0.0], &a), Err(Error::Domain(_))));
    }

    #[test]
    fn make_dh_shifts_the_estimate() {
        let metric = make_dh(DhParams {
            h: Regularizer::Zero,
            s_bar: dvector![1.0, 0.0],
            w_tilde: dvector![1.0, 1.0],
            z_bar: dvector![0.0, 1.0],
            lambda: 2.0,
        })
        .unwrap();
        match &metric {
            SelectionMetric::Dh { shifted_gradient, .. } => assert_eq!(*shifted_gradient, dvector![1.5, 0.0]),
            _ => unreachable!(),
        }
        assert!(make_dh(DhParams {
            h: Regularizer::Zero,
            s_bar: dvector![f64::NAN],
            w_tilde: dvector![0.0],
            z_bar: dvector![0.0],
            lambda: 1.0,
        })
        .is_err());
    }

    #[test]
    fn bregman_examples() {
        let z = dvector![0.1, 0.2];
        assert_eq!(bregman_dh(&Regularizer::Zero, &z, &z, &dvector![3.0, 1.0]).unwrap(), 0.0);
        assert_eq!(bregman_dh(&Regularizer::Zero, &dvector![5.0, -2.0], &z, &dvector![0.0, 0.0]).unwrap(), 0.0);
        // h = indicator [-0.3, 0.3], z_hat = 0.3, g = -0.2, x = 0: (-0.2)(-0.3)
        let h = Regularizer::ball(dvector![0.0], 0.3).unwrap();
        let v = bregman_dh(&h, &dvector![0.0], &dvector![0.3], &dvector![-0.2]).unwrap();
        assert!((v - 0.06).abs() < 1e-15);
        assert!(bregman_dh(&h, &dvector![1.0], &dvector![0.3], &dvector![-0.2]).is_err());
    }

    fn quad(dim: usize) -> CompositeProblem {
        CompositeProblem::new(Arc::new(Quadratic::diagonal(&vec![1.0; dim])), Regularizer::Zero, 1.0, 1.0)
            .unwrap()
    }

    #[test]
    fn rge_noiseless_and_degenerate() {
        let p = quad(3);
        let x = dvector![1.0, -2.0, 0.5];
        let noiseless = NoiseModel::noiseless();
        let o = Oracle::new(&p, &noiseless).unwrap();
        assert_eq!(rge(&o, &x, 9, 4, &RngStream::new(0)).unwrap(), x);
        assert_eq!(o.calls(), 36);

        let noise = NoiseModel::gaussian(1.0).unwrap();
        let o = Oracle::new(&p, &noise).unwrap();
        let s = RngStream::new(3);
        let single = rge(&o, &x, 1, 1, &s).unwrap();
        let direct = o
            .sample_gradient(&x, &s.child("rge-batch", 0).child("sample", 0))
            .unwrap();
        assert_eq!(single, direct);
    }
}

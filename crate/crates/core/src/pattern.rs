//! Power-family accuracy patterns and trend fitting.
//!
//! A learning trend is modelled as `value(x) = c - a * x^(-b)` with `a > 0`
//! and `b > 0`, which makes it strictly increasing and concave on
//! `(0, inf)` with horizontal asymptote `c`. Parameters are estimated by a
//! damped Gauss-Newton (Levenberg-Marquardt) iteration over
//! `(ln a, ln b, c)`, which keeps `a` and `b` positive without bound
//! constraints. An optional anchor adds the residual `c - anchor`, the
//! finite form of an observation placed at infinity.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of a learning curve: the accuracy measured after training on
/// the first `position` items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: u64,
    pub accuracy: f64,
}

impl Observation {
    pub fn new(position: u64, accuracy: f64) -> Result<Self> {
        if position == 0 {
            return Err(Error::NonPositivePosition(0.0));
        }
        if !(accuracy > 0.0 && accuracy <= 100.0) {
            return Err(Error::InvalidObservation { position, accuracy });
        }
        Ok(Observation { position, accuracy })
    }
}

/// A fitted member of the power family `c - a * x^(-b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Euclidean norm of the residual vector at the solution (anchor residual
    /// included when the fit was anchored).
    pub residual_norm: f64,
}

fn check_position(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositivePosition(x))
    }
}

impl PowerFit {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParameters { a, b, c });
        }
        Ok(PowerFit {
            a,
            b,
            c,
            residual_norm: 0.0,
        })
    }

    /// Predicted accuracy at position `x`.
    pub fn value(&self, x: f64) -> Result<f64> {
        check_position(x)?;
        Ok(self.c - self.a * x.powf(-self.b))
    }

    /// First derivative `a * b * x^(-(b + 1))`.
    pub fn slope(&self, x: f64) -> Result<f64> {
        check_position(x)?;
        Ok(self.a * self.b * x.powf(-(self.b + 1.0)))
    }

    pub fn asymptote(&self) -> f64 {
        self.c
    }
}

/// Most damped-step iterations before a fit is declared divergent.
pub const MAX_ITERATIONS: usize = 200;
/// Relative decrease of the residual norm below which the fit has converged.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

const MAX_DAMPING: f64 = 1e16;
const GRADIENT_TOLERANCE: f64 = 1e-12;
const STALLED_GRADIENT_TOLERANCE: f64 = 1e-6;
const ROUNDING_RMS: f64 = 1e-10;

struct Problem {
    ln_x: Vec<f64>,
    y: Vec<f64>,
    anchor: Option<f64>,
}

impl Problem {
    fn new(observations: &[Observation], anchor: Option<f64>) -> Result<Self> {
        if observations.len() < 3 {
            return Err(Error::FewerThanThreeObservations(observations.len()));
        }
        for pair in observations.windows(2) {
            if pair[1].position <= pair[0].position {
                return Err(Error::NonMonotonePositions {
                    previous: pair[0].position,
                    next: pair[1].position,
                });
            }
        }
        for obs in observations {
            if obs.position == 0 || !(obs.accuracy > 0.0 && obs.accuracy <= 100.0) {
                return Err(Error::InvalidObservation {
                    position: obs.position,
                    accuracy: obs.accuracy,
                });
            }
        }
        let first = observations[0].accuracy;
        if observations.iter().all(|o| o.accuracy == first) {
            return Err(Error::FitDiverged(
                "constant accuracies cannot be fitted by a strictly increasing pattern".into(),
            ));
        }
        if let Some(anchor) = anchor {
            if !anchor.is_finite() {
                return Err(Error::FitDiverged(format!("non-finite anchor {anchor}")));
            }
        }
        Ok(Problem {
            ln_x: observations
                .iter()
                .map(|o| (o.position as f64).ln())
                .collect(),
            y: observations.iter().map(|o| o.accuracy).collect(),
            anchor,
        })
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        let (u, b, c) = (p[0], p[1].exp(), p[2]);
        let mut sum = 0.0;
        for (ln_x, y) in self.ln_x.iter().zip(&self.y) {
            let r = c - (u - b * ln_x).exp() - y;
            sum += r * r;
        }
        if let Some(anchor) = self.anchor {
            sum += (c - anchor) * (c - anchor);
        }
        0.5 * sum
    }

    /// Returns `(J^T J, J^T r)`.
    fn normal_equations(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let (u, b, c) = (p[0], p[1].exp(), p[2]);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (ln_x, y) in self.ln_x.iter().zip(&self.y) {
            let g = (u - b * ln_x).exp();
            let r = c - g - y;
            let row = Vector3::new(-g, g * b * ln_x, 1.0);
            jtj += row * row.transpose();
            jtr += row * r;
        }
        if let Some(anchor) = self.anchor {
            let row = Vector3::new(0.0, 0.0, 1.0);
            jtj += row * row.transpose();
            jtr += row * (c - anchor);
        }
        (jtj, jtr)
    }

    /// Largest cosine between the residual vector and a Jacobian column.
    fn gradient_measure(&self, jtj: &Matrix3<f64>, jtr: &Vector3<f64>, cost: f64) -> f64 {
        let r_norm = (2.0 * cost).sqrt();
        if r_norm == 0.0 {
            return 0.0;
        }
        (0..3)
            .map(|i| {
                let col = jtj[(i, i)].sqrt();
                if col == 0.0 {
                    0.0
                } else {
                    jtr[i].abs() / (col * r_norm)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Closed-form starting point: `c0 = max(y) + 0.5` and a log-log
    /// regression of `c0 - y` against `x` for `a` and `b`.
    fn cold_start(&self) -> Vector3<f64> {
        let y_max = self.y.iter().cloned().fold(f64::MIN, f64::max);
        let c0 = y_max + 0.5;
        let n = self.y.len() as f64;
        let z: Vec<f64> = self.y.iter().map(|y| (c0 - y).ln()).collect();
        let mean_x = self.ln_x.iter().sum::<f64>() / n;
        let mean_z = z.iter().sum::<f64>() / n;
        let mut sxz = 0.0;
        let mut sxx = 0.0;
        for (lx, lz) in self.ln_x.iter().zip(&z) {
            sxz += (lx - mean_x) * (lz - mean_z);
            sxx += (lx - mean_x) * (lx - mean_x);
        }
        let slope = if sxx > 0.0 { sxz / sxx } else { 0.0 };
        let b0 = if slope < -1e-6 {
            (-slope).min(5.0)
        } else {
            0.5
        };
        let u0 = mean_z + b0 * mean_x;
        Vector3::new(u0, b0.ln(), c0)
    }

    /// For a fixed exponent the model is linear in `a` and `c`; returns the
    /// least-squares `(u, c, cost)` for exponent `b`, or `None` when the best
    /// linear fit is not increasing.
    fn linear_in_ac(&self, b: f64) -> Option<(f64, f64, f64)> {
        // minimise sum (c - a g_i - y_i)^2 [+ (c - anchor)^2]
        let (mut sgg, mut sg, mut n, mut sgy, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (ln_x, y) in self.ln_x.iter().zip(&self.y) {
            let g = (-b * ln_x).exp();
            sgg += g * g;
            sg += g;
            n += 1.0;
            sgy += g * y;
            sy += y;
        }
        if let Some(anchor) = self.anchor {
            n += 1.0;
            sy += anchor;
        }
        // normal equations in (a, c): [sgg, -sg; -sg, n] (a, c) = (-sgy, sy)
        let det = sgg * n - sg * sg;
        if det.is_nan() || det <= 0.0 {
            return None;
        }
        let a = (-sgy * n + sg * sy) / det;
        let c = (sgg * sy - sg * sgy) / det;
        if !(a > 0.0 && a.is_finite() && c.is_finite()) {
            return None;
        }
        let p = Vector3::new(a.ln(), b.ln(), c);
        Some((p[0], c, self.cost(&p)))
    }

    /// Start found by minimising the cost profile over the exponent, with
    /// `a` and `c` solved exactly for each exponent.
    fn profile_start(&self) -> Option<Vector3<f64>> {
        const LOW: f64 = -6.0;
        const HIGH: f64 = 2.0;
        const GRID: usize = 161;
        let profile = |v: f64| {
            self.linear_in_ac(v.exp())
                .map_or(f64::INFINITY, |(_, _, cost)| cost)
        };
        let spacing = (HIGH - LOW) / (GRID - 1) as f64;
        let best = (0..GRID)
            .map(|i| LOW + spacing * i as f64)
            .map(|v| (v, profile(v)))
            .filter(|(_, cost)| cost.is_finite())
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        let (mut lo, mut hi) = (best.0 - spacing, best.0 + spacing);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let m1 = hi - ratio * (hi - lo);
            let m2 = lo + ratio * (hi - lo);
            if profile(m1) <= profile(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let v = if profile(0.5 * (lo + hi)) <= best.1 {
            0.5 * (lo + hi)
        } else {
            best.0
        };
        let (u, c, _) = self.linear_in_ac(v.exp())?;
        Some(Vector3::new(u, v, c))
    }

    /// Regression start first, then the profile start if that fails.
    fn solve_cold(&self) -> Result<PowerFit> {
        match self.solve(self.cold_start()) {
            Err(Error::FitDiverged(first)) => match self.profile_start() {
                Some(start) => self.solve(start),
                None => Err(Error::FitDiverged(first)),
            },
            other => other,
        }
    }

    fn solve(&self, start: Vector3<f64>) -> Result<PowerFit> {
        let mut p = start;
        let mut cost = self.cost(&p);
        if !cost.is_finite() {
            return Err(Error::FitDiverged(
                "non-finite residuals at the start point".into(),
            ));
        }
        let exact = 1e-26 * (self.y.len() as f64);
        let mut damping = 1e-3;
        for _ in 0..MAX_ITERATIONS {
            if cost <= exact {
                return self.finish(&p, cost);
            }
            let (jtj, jtr) = self.normal_equations(&p);
            if self.gradient_measure(&jtj, &jtr, cost) <= GRADIENT_TOLERANCE {
                return self.finish(&p, cost);
            }
            loop {
                let mut lhs = jtj;
                for i in 0..3 {
                    lhs[(i, i)] += damping * jtj[(i, i)].max(1e-12);
                }
                let step = lhs.cholesky().map(|ch| ch.solve(&(-jtr)));
                if let Some(step) = step {
                    let candidate = p + step;
                    let candidate_cost = self.cost(&candidate);
                    if candidate_cost.is_finite() && candidate_cost < cost {
                        let relative = (cost - candidate_cost) / cost;
                        p = candidate;
                        cost = candidate_cost;
                        damping = (damping * 0.3).max(1e-15);
                        if relative < RELATIVE_TOLERANCE {
                            return self.finish(&p, cost);
                        }
                        break;
                    }
                }
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    // no downhill step left: a minimum if the gradient agrees
                    // or the residuals are down to rounding noise
                    if self.gradient_measure(&jtj, &jtr, cost) <= STALLED_GRADIENT_TOLERANCE
                        || cost <= self.rounding_floor()
                    {
                        return self.finish(&p, cost);
                    }
                    return Err(Error::FitDiverged("damping exhausted".into()));
                }
            }
        }
        Err(Error::FitDiverged(format!(
            "no convergence within {MAX_ITERATIONS} iterations"
        )))
    }

    fn rounding_floor(&self) -> f64 {
        let scale = self.y.iter().fold(0.0f64, |m, y| m.max(y.abs())) * ROUNDING_RMS;
        0.5 * (self.y.len() + 1) as f64 * scale * scale
    }

    fn finish(&self, p: &Vector3<f64>, cost: f64) -> Result<PowerFit> {
        let fit = PowerFit {
            a: p[0].exp(),
            b: p[1].exp(),
            c: p[2],
            residual_norm: (2.0 * cost).sqrt(),
        };
        if fit.a > 0.0 && fit.b > 0.0 && fit.a.is_finite() && fit.b.is_finite() && fit.c.is_finite()
        {
            Ok(fit)
        } else {
            Err(Error::FitDiverged(format!(
                "degenerate parameters a={}, b={}, c={}",
                fit.a, fit.b, fit.c
            )))
        }
    }
}

/// Fits a power-family trend to `observations`, optionally anchored at
/// `anchor` (the asymptote value the trend is pulled towards).
pub fn fit(observations: &[Observation], anchor: Option<f64>) -> Result<PowerFit> {
    let problem = Problem::new(observations, anchor)?;
    problem.solve_cold()
}

/// Like [`fit`], starting the iteration from `start`. Falls back to the cold
/// start when the warm-started iteration diverges.
pub fn fit_from(
    observations: &[Observation],
    anchor: Option<f64>,
    start: &PowerFit,
) -> Result<PowerFit> {
    let problem = Problem::new(observations, anchor)?;
    let warm = Vector3::new(start.a.ln(), start.b.ln(), start.c);
    match problem.solve(warm) {
        Ok(fit) => Ok(fit),
        Err(Error::FitDiverged(_)) => problem.solve_cold(),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(a: f64, b: f64, c: f64, positions: impl Iterator<Item = u64>) -> Vec<Observation> {
        positions
            .map(|x| Observation {
                position: x,
                accuracy: c - a * (x as f64).powf(-b),
            })
            .collect()
    }

    fn rel(x: f64, y: f64) -> f64 {
        ((x - y) / y).abs()
    }

    #[test]
    fn value_and_slope_closed_forms() {
        let f = PowerFit::new(100.0, 1.0, 99.0).unwrap();
        assert_eq!(f.value(100.0).unwrap(), 98.0);
        assert_eq!(f.slope(10.0).unwrap(), 1.0);
        assert!(matches!(f.value(0.0), Err(Error::NonPositivePosition(_))));
        assert!(matches!(f.slope(-3.0), Err(Error::NonPositivePosition(_))));
    }

    #[test]
    fn value_approaches_asymptote() {
        let f = PowerFit::new(542.5451, 0.3838, 99.2876).unwrap();
        assert_eq!(f.asymptote(), 99.2876);
        let far = f.value(1e300).unwrap();
        assert!(far <= 99.2876 && 99.2876 - far < 1e-12);
        assert!(f.value(1e6).unwrap() < 99.2876);
    }

    #[test]
    fn slope_matches_central_difference() {
        let f = PowerFit::new(542.5451, 0.3838, 99.2876).unwrap();
        let x = 1e4;
        let h = 1e-2;
        let fd = (f.value(x + h).unwrap() - f.value(x - h).unwrap()) / (2.0 * h);
        assert!(rel(f.slope(x).unwrap(), fd) < 1e-6);
    }

    #[test]
    fn recovers_published_curve() {
        let obs = sample(542.5451, 0.3838, 99.2876, (1..=160).map(|i| 5000 * i));
        let f = fit(&obs, None).unwrap();
        assert!(rel(f.a, 542.5451) < 1e-4, "{f:?}");
        assert!(rel(f.b, 0.3838) < 1e-4, "{f:?}");
        assert!(rel(f.c, 99.2876) < 1e-4, "{f:?}");
    }

    #[test]
    fn narrow_windows_are_fitted() {
        for kernel in [80_000u64, 135_000, 150_000] {
            for n in [3u64, 5, 12] {
                let obs = sample(542.5451, 0.3838, 99.2876, (0..n).map(|i| kernel + 5000 * i));
                let f = fit(&obs, None).unwrap();
                assert!(rel(f.c, 99.2876) < 1e-4, "{kernel} {n} {f:?}");
            }
        }
    }

    #[test]
    fn three_exact_points() {
        let obs = sample(100.0, 0.5, 99.0, [100, 400, 2500].into_iter());
        let f = fit(&obs, None).unwrap();
        assert!(f.residual_norm < 1e-6);
        assert!(
            rel(f.a, 100.0) < 1e-4 && rel(f.b, 0.5) < 1e-4 && rel(f.c, 99.0) < 1e-4,
            "{f:?}"
        );
    }

    #[test]
    fn anchored_fit_matches_grid_oracle() {
        let obs = sample(100.0, 0.5, 99.0, [100, 400, 1600, 6400].into_iter());
        let f = fit(&obs, Some(99.0)).unwrap();
        // brute-force grid search over (a, b, c) of the same objective
        let objective = |a: f64, b: f64, c: f64| {
            obs.iter()
                .map(|o| (c - a * (o.position as f64).powf(-b) - o.accuracy).powi(2))
                .sum::<f64>()
                + (c - 99.0).powi(2)
        };
        let mut best = (f64::MAX, 0.0);
        for ia in 0..=40 {
            let a = 80.0 + ia as f64;
            for ib in 0..=40 {
                let b = 0.4 + 0.005 * ib as f64;
                for ic in 0..=40 {
                    let c = 98.9 + 0.005 * ic as f64;
                    let v = objective(a, b, c);
                    if v < best.0 {
                        best = (v, c);
                    }
                }
            }
        }
        assert!((best.1 - 99.0).abs() < 1e-3);
        assert!((f.c - 99.0).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn input_errors() {
        let obs = sample(100.0, 0.5, 99.0, [100, 400].into_iter());
        assert_eq!(fit(&obs, None), Err(Error::FewerThanThreeObservations(2)));
        let mut obs = sample(100.0, 0.5, 99.0, [100, 400, 900].into_iter());
        obs.swap(1, 2);
        assert!(matches!(
            fit(&obs, None),
            Err(Error::NonMonotonePositions { .. })
        ));
        let flat: Vec<_> = [10, 20, 30]
            .iter()
            .map(|&p| Observation::new(p, 90.0).unwrap())
            .collect();
        assert!(matches!(fit(&flat, None), Err(Error::FitDiverged(_))));
        assert!(Observation::new(10, 100.5).is_err());
        assert!(Observation::new(0, 50.0).is_err());
    }

    #[test]
    fn refit_is_idempotent() {
        let obs = sample(300.0, 0.35, 97.5, (1..=40).map(|i| 5000 * i));
        let f = fit(&obs, None).unwrap();
        let regenerated = sample(f.a, f.b, f.c, (1..=40).map(|i| 5000 * i));
        let g = fit(&regenerated, None).unwrap();
        assert!(rel(g.a, f.a) < 1e-6 && rel(g.b, f.b) < 1e-6 && rel(g.c, f.c) < 1e-6);
    }

    #[test]
    fn noisy_fit_recovers_asymptote() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs: Vec<_> = (1..=120)
                .map(|i| {
                    let x = 5000 * i;
                    let y = 99.2876 - 542.5451 * (x as f64).powf(-0.3838);
                    Observation {
                        position: x,
                        accuracy: y + rng.gen_range(-0.1..=0.1),
                    }
                })
                .collect();
            let f = fit(&obs, None).unwrap();
            assert!((f.c - 99.2876).abs() < 0.5, "seed {seed}: {f:?}");
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let obs = sample(542.5451, 0.3838, 99.2876, (1..=30).map(|i| 5000 * i));
        let cold = fit(&obs, None).unwrap();
        let start = PowerFit::new(400.0, 0.3, 98.0).unwrap();
        let warm = fit_from(&obs, None, &start).unwrap();
        assert!(rel(warm.c, cold.c) < 1e-6);
    }
}

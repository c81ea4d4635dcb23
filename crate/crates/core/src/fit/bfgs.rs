//! Multi-start BFGS with a backtracking Armijo line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, uniform_range};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the gradient ∞-norm falls below this.
    pub grad_tol: f64,
    /// Initial points are drawn from Uniform(−init_range, init_range)^p.
    pub init_range: f64,
    /// Optional box `|θ_i| ≤ bound`, enforced by projection. `None` is unconstrained.
    pub bound: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 500,
            grad_tol: 1e-8,
            init_range: 1.0,
            bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const CURVATURE_EPS: f64 = 1e-12;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finite_eval<F>(f: &mut F, x: &[f64]) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    match f(x) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Some((v, g)),
        _ => None,
    }
}

fn project(x: &mut [f64], bound: Option<f64>) {
    if let Some(b) = bound {
        x.iter_mut().for_each(|v| *v = v.clamp(-b, b));
    }
}

/// Gradient with the components pinned against an active bound zeroed.
fn projected_gradient(x: &[f64], g: &[f64], bound: Option<f64>) -> Vec<f64> {
    match bound {
        None => g.to_vec(),
        Some(b) => x
            .iter()
            .zip(g)
            .map(|(&xi, &gi)| if (xi <= -b && gi > 0.0) || (xi >= b && gi < 0.0) { 0.0 } else { gi })
            .collect(),
    }
}

/// Single BFGS run from `x0`. Returns `None` if the starting point is not finite.
///
/// With `cfg.bound` set, iterates are projected onto the box and the stopping test uses
/// the projected gradient.
pub fn minimize_from<F>(f: &mut F, x0: &[f64], cfg: &OptimizerConfig) -> Option<FitResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let p = x0.len();
    let bound = cfg.bound;
    let mut x = x0.to_vec();
    project(&mut x, bound);
    let (mut fx, mut g) = finite_eval(f, &x)?;
    let mut pg = projected_gradient(&x, &g, bound);
    // inverse Hessian approximation, row-major
    let mut h = identity(p);
    let mut h_is_identity = true;
    let mut first_update = true;
    let mut iterations = 0;

    while iterations < cfg.max_iter && inf_norm(&pg) >= cfg.grad_tol {
        let mut d: Vec<f64> = mat_vec(&h, &pg).iter().map(|v| -v).collect();
        if bound.is_some() {
            d.iter_mut().zip(&pg).zip(&g).for_each(|((di, pgi), gi)| {
                if *pgi == 0.0 && *gi != 0.0 {
                    *di = 0.0;
                }
            });
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            h = identity(p);
            h_is_identity = true;
            d = pg.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut step = None;
        let mut alpha = 1.0;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let decrease = if bound.is_some() {
                project(&mut trial, bound);
                let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                dot(&g, &moved)
            } else {
                alpha * slope
            };
            if decrease < 0.0 {
                if let Some((ft, gt)) = finite_eval(f, &trial) {
                    if ft <= fx + ARMIJO_C1 * decrease {
                        step = Some((trial, ft, gt));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn)) = step else {
            if h_is_identity {
                break;
            }
            h = identity(p);
            h_is_identity = true;
            continue;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > CURVATURE_EPS * dot(&s, &s).sqrt() * yy.sqrt() && sy > 0.0 {
            if first_update {
                let scale = sy / yy;
                h.iter_mut().for_each(|v| *v *= scale);
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
            h_is_identity = false;
        }

        let moved = s.iter().any(|v| *v != 0.0);
        x = xn;
        fx = fn_;
        g = gn;
        pg = projected_gradient(&x, &g, bound);
        iterations += 1;
        if !moved {
            break;
        }
    }

    let grad_norm = inf_norm(&pg);
    Some(FitResult {
        theta_hat: x,
        loss: fx,
        grad_norm,
        iterations,
        restarts_used: 1,
        converged: grad_norm < cfg.grad_tol,
    })
}

/// Best of `cfg.restarts` BFGS runs from seeded uniform starting points.
///
/// Ties in the final loss go to the earlier restart.
pub fn optimize<F>(mut loss_fn: F, p: usize, cfg: &OptimizerConfig, seed: u64) -> Result<FitResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if p == 0 {
        return Err(Error::Optimization("no parameters to optimize".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::Config {
            field: "restarts".into(),
            message: "must be at least 1".into(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|_| (0..p).map(|_| uniform_range(&mut rng, -cfg.init_range, cfg.init_range)).collect())
        .collect();
    optimize_from_starts(&mut loss_fn, &starts, cfg)
}

/// Best BFGS run over the given starting points.
pub fn optimize_from_starts<F>(loss_fn: &mut F, starts: &[Vec<f64>], cfg: &OptimizerConfig) -> Result<FitResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut best: Option<FitResult> = None;
    let mut used = 0;
    for x0 in starts {
        let Some(r) = minimize_from(loss_fn, x0, cfg) else {
            continue;
        };
        used += 1;
        if best.as_ref().map_or(true, |b| r.loss < b.loss) {
            best = Some(r);
        }
    }
    let mut best = best.ok_or_else(|| {
        Error::Optimization(format!("all {} restarts produced a non-finite loss", starts.len()))
    })?;
    best.restarts_used = used;
    Ok(best)
}

fn identity(p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p * p];
    for i in 0..p {
        m[i * p + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let p = v.len();
    (0..p).map(|i| dot(&m[i * p..(i + 1) * p], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let p = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..p {
        for j in 0..p {
            h[i * p + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x: &[f64]| {
            let g: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            Ok((0.5 * dot(&g, &g), g))
        }
    }

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((v, g))
    }

    #[test]
    fn quadratic_converges_fast() {
        let c = vec![0.3, -2.0, 1.5, 4.0];
        let r = optimize(quadratic(c.clone()), 4, &OptimizerConfig::default(), 1).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 50);
        for (a, b) in r.theta_hat.iter().zip(&c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_reaches_optimum() {
        let mut f = rosenbrock;
        let r = minimize_from(&mut f, &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        assert!(r.loss < 1e-10, "loss {}", r.loss);
        let r = optimize(rosenbrock, 2, &OptimizerConfig::default(), 7).unwrap();
        assert!(r.loss < 1e-10);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = optimize(rosenbrock, 2, &OptimizerConfig::default(), 11).unwrap();
        let b = optimize(rosenbrock, 2, &OptimizerConfig::default(), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonfinite_everywhere_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(optimize(f, 1, &OptimizerConfig::default(), 0).is_err());
        assert!(optimize(quadratic(vec![]), 0, &OptimizerConfig::default(), 0).is_err());
    }

    #[test]
    fn unbounded_loss_terminates() {
        let f = |x: &[f64]| Ok((x[0], vec![1.0]));
        let cfg = OptimizerConfig {
            max_iter: 30,
            ..OptimizerConfig::default()
        };
        let r = optimize(f, 1, &cfg, 0).unwrap();
        assert!(!r.converged);
        assert!(r.iterations <= 30);
    }

    #[test]
    fn box_stops_unbounded_descent() {
        let f = |x: &[f64]| Ok((x[0] - 2.0 * x[1], vec![1.0, -2.0]));
        let cfg = OptimizerConfig {
            bound: Some(3.0),
            ..OptimizerConfig::default()
        };
        let r = optimize(f, 2, &cfg, 4).unwrap();
        assert_eq!(r.theta_hat, vec![-3.0, 3.0]);
        assert!(r.converged);
        assert_eq!(r.loss, -9.0);
    }

    #[test]
    fn box_with_interior_optimum_matches_unconstrained() {
        let c = vec![0.5, -1.5, 2.0];
        let boxed = OptimizerConfig {
            bound: Some(5.0),
            ..OptimizerConfig::default()
        };
        let r = optimize(quadratic(c.clone()), 3, &boxed, 2).unwrap();
        assert!(r.theta_hat.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn box_clips_quadratic_optimum() {
        let boxed = OptimizerConfig {
            bound: Some(1.0),
            ..OptimizerConfig::default()
        };
        let r = optimize(quadratic(vec![0.2, 4.0]), 2, &boxed, 9).unwrap();
        assert!((r.theta_hat[0] - 0.2).abs() < 1e-8);
        assert_eq!(r.theta_hat[1], 1.0);
        assert!(r.converged);
    }

    #[test]
    fn best_loss_not_above_any_start() {
        let cfg = OptimizerConfig::default();
        let mut rng = rng_from_seed(5);
        let starts: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| uniform_range(&mut rng, -2.0, 2.0)).collect())
            .collect();
        let mut f = rosenbrock;
        let r = optimize_from_starts(&mut f, &starts, &cfg).unwrap();
        for s in &starts {
            assert!(r.loss <= rosenbrock(s).unwrap().0);
        }
        assert_eq!(r.restarts_used, 4);
    }
}

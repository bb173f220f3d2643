//! L-BFGS on the non-negative orthant.
//!
//! Steps are clipped to the feasible ray before the line search, so every
//! evaluated point is non-negative; any component that rounds below zero
//! is projected back after the step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const N: usize = 4;
pub type Vector = [f64; N];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
    /// Length (infinity norm) of the first steepest-descent trial step.
    pub initial_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 50,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    NoDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vector,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

fn dot(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &Vector, a: f64, d: &Vector) -> Vector {
    std::array::from_fn(|i| x[i] + a * d[i])
}

fn project(x: Vector) -> Vector {
    x.map(|v| v.max(0.0))
}

/// Gradient with components that push into an active bound removed.
fn projected_gradient(x: &Vector, g: &Vector) -> Vector {
    std::array::from_fn(|i| if x[i] <= 0.0 && g[i] > 0.0 { 0.0 } else { g[i] })
}

fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Two-loop recursion: approximate inverse Hessian applied to `-g`.
fn direction(g: &Vector, mem: &VecDeque<(Vector, Vector, f64)>) -> Vector {
    let mut q = *g;
    let mut alpha = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q = axpy(&q, -a, y);
        alpha.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q = q.map(|v| v * gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q = axpy(&q, a - b, s);
    }
    q.map(|v| -v)
}

#[derive(Clone, Copy)]
struct Point {
    a: f64,
    f: f64,
    g: Vector,
    dphi: f64,
}

/// Strong-Wolfe line search on `x + a d`, `a` in `(0, a_max]`. Falls back to
/// the best sufficient-decrease point when the curvature condition cannot
/// be met (kinks, bound hits).
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    eval: &mut F,
    x: &Vector,
    f0: f64,
    g0: &Vector,
    d: &Vector,
    a_init: f64,
    a_max: f64,
    cfg: &LbfgsConfig,
    evals: &mut usize,
) -> Result<Option<Point>>
where
    F: FnMut(&Vector) -> Result<(f64, Vector)>,
{
    let dphi0 = dot(g0, d);
    let mut at = |a: f64, evals: &mut usize| -> Result<Point> {
        *evals += 1;
        let (f, g) = eval(&project(axpy(x, a, d)))?;
        Ok(Point { a, f, dphi: dot(&g, d), g })
    };
    let armijo = |p: &Point| p.f <= f0 + cfg.c1 * p.a * dphi0;
    let curvature = |p: &Point| p.dphi.abs() <= -cfg.c2 * dphi0;

    let mut prev = Point {
        a: 0.0,
        f: f0,
        g: *g0,
        dphi: dphi0,
    };
    let mut best: Option<Point> = None;
    let mut a = a_init.min(a_max);
    let mut budget = cfg.max_line_search;
    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return Ok(best);
        }
        budget -= 1;
        let p = at(a, evals)?;
        if !armijo(&p) || (prev.a > 0.0 && p.f >= prev.f) {
            lo = prev;
            hi = p;
            break;
        }
        if curvature(&p) {
            return Ok(Some(p));
        }
        if p.dphi >= 0.0 {
            hi = prev;
            lo = p;
            break;
        }
        if a >= a_max {
            return Ok(Some(p));
        }
        a = (2.0 * a).min(a_max);
        prev = p;
        best = Some(p);
    }

    // Zoom: `lo` satisfies sufficient decrease (or is the origin) and has the
    // lower value; the minimizer lies between `lo` and `hi`.
    while budget > 0 {
        budget -= 1;
        let a = quadratic_min(&lo, &hi).unwrap_or(0.5 * (lo.a + hi.a));
        if (a - lo.a).abs() < 1e-16 * lo.a.abs().max(1.0) {
            break;
        }
        let p = at(a, evals)?;
        if !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some(p));
            }
            if p.dphi * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    Ok(if lo.a > 0.0 { Some(lo) } else { best })
}

/// Minimizer of the quadratic through `lo` (value and slope) and `hi`
/// (value), kept inside the central 80% of the bracket.
fn quadratic_min(lo: &Point, hi: &Point) -> Option<f64> {
    let h = hi.a - lo.a;
    let c = (hi.f - lo.f - lo.dphi * h) / (h * h);
    if !(c > 0.0) || !c.is_finite() {
        return None;
    }
    let a = lo.a - lo.dphi / (2.0 * c);
    let (l, r) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
    let margin = 0.1 * (r - l);
    Some(a.clamp(l + margin, r - margin))
}

/// Minimizes `f` over `x >= 0` from `x0`. `eval` returns value and gradient.
pub fn minimize<F>(mut eval: F, x0: Vector, cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&Vector) -> Result<(f64, Vector)>,
{
    let mut x = project(x0);
    let (mut f, mut g) = eval(&x)?;
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut mem: VecDeque<(Vector, Vector, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let stop = loop {
        let pg = projected_gradient(&x, &g);
        if inf_norm(&pg) < cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }
        let mut d = direction(&pg, &mem);
        if dot(&d, &pg) >= 0.0 {
            mem.clear();
            d = pg.map(|v| -v);
        }
        // Do not move further into active bounds.
        for i in 0..N {
            if x[i] <= 0.0 && d[i] < 0.0 {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 || inf_norm(&d) == 0.0 {
            break StopReason::NoDescent;
        }
        let a_max = (0..N)
            .filter(|&i| d[i] < 0.0)
            .map(|i| -x[i] / d[i])
            .fold(f64::INFINITY, f64::min);
        let a_init = if mem.is_empty() { cfg.initial_step / inf_norm(&d) } else { 1.0 };
        let Some(p) = line_search(&mut eval, &x, f, &g, &d, a_init, a_max, cfg, &mut evaluations)? else {
            break StopReason::LineSearchFailed;
        };
        let xn = project(axpy(&x, p.a, &d));
        let s: Vector = std::array::from_fn(|i| xn[i] - x[i]);
        let y: Vector = std::array::from_fn(|i| p.g[i] - g[i]);
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = p.f;
        g = p.g;
        trace.push(f);
        iterations += 1;
    };
    Ok(Minimum {
        x,
        f,
        iterations,
        evaluations,
        trace,
        stop,
    })
}

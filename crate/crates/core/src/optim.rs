//! Derivative-free minimization over boxes with an optional feasibility
//! predicate.
//!
//! The solver is Nelder–Mead. Trial points are projected coordinate-wise
//! onto the box; points failing the predicate score `+inf`. After the
//! simplex collapses the search restarts from the best vertex with a fresh
//! simplex until a restart stops improving the objective.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Per-coordinate box plus an optional extra feasibility predicate.
#[derive(Clone)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    predicate: Option<Predicate>,
}

impl fmt::Debug for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bounds")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("predicate", &self.predicate.is_some())
            .finish()
    }
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument(
                "lower and upper bounds differ in length".into(),
            ));
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] <= upper[j])) {
            return Err(Error::InvalidArgument(format!(
                "bound {j}: lower {} > upper {}",
                lower[j], upper[j]
            )));
        }
        Ok(Self {
            lower,
            upper,
            predicate: None,
        })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            predicate: None,
        }
    }

    pub fn with_predicate(mut self, predicate: Predicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn project(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(j, &v)| v >= self.lower[j] && v <= self.upper[j])
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.in_box(x) && self.predicate.as_ref().map_or(true, |p| p(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub max_evals: usize,
    pub tol_f: f64,
    pub tol_x: f64,
    pub n_starts: usize,
    pub max_restarts: usize,
    /// Relative size of the initial simplex edges.
    pub initial_step: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_evals: 50_000,
            tol_f: 1e-10,
            tol_x: 1e-9,
            n_starts: 8,
            max_restarts: 4,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub restarts: usize,
    /// Index of the winning start for multistart runs.
    pub start_index: usize,
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn vertex_order(a: &Vertex, b: &Vertex) -> Ordering {
    a.f.total_cmp(&b.f).then_with(|| lexicographic(&a.x, &b.x))
}

struct Evaluator<'a, F> {
    objective: &'a F,
    bounds: &'a Bounds,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, mut x: Vec<f64>) -> Vertex {
        self.bounds.project(&mut x);
        self.evaluations += 1;
        let f = if self.bounds.predicate.as_ref().map_or(true, |p| p(&x)) {
            let v = (self.objective)(&x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        } else {
            f64::INFINITY
        };
        Vertex { x, f }
    }
}

fn initial_simplex<F: Fn(&[f64]) -> f64, R: Rng>(
    ev: &mut Evaluator<'_, F>,
    best: Vertex,
    step: f64,
    rng: Option<&mut R>,
) -> Vec<Vertex> {
    let n = best.x.len();
    let signs: Vec<f64> = match rng {
        Some(r) => (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        None => vec![1.0; n],
    };
    let mut simplex = Vec::with_capacity(n + 1);
    for j in 0..n {
        let xj = best.x[j];
        let mut h = if xj.abs() > 1e-8 { step * xj.abs() } else { 2.5e-4 };
        h *= signs[j];
        let (lo, hi) = (ev.bounds.lower[j], ev.bounds.upper[j]);
        if xj + h > hi || xj + h < lo {
            h = -h;
        }
        if xj + h > hi || xj + h < lo {
            // box narrower than the step: use half the room that exists
            h = if hi - xj >= xj - lo { (hi - xj) / 2.0 } else { (lo - xj) / 2.0 };
        }
        let mut x = best.x.clone();
        x[j] += h;
        simplex.push(ev.eval(x));
    }
    simplex.push(best);
    simplex.sort_by(vertex_order);
    simplex
}

fn converged(simplex: &[Vertex], config: &OptimConfig) -> bool {
    let best = &simplex[0];
    let worst = &simplex[simplex.len() - 1];
    let f_spread = worst.f - best.f;
    if !(f_spread <= config.tol_f * (1.0 + best.f.abs())) {
        return false;
    }
    simplex[1..].iter().all(|v| {
        v.x.iter()
            .zip(&best.x)
            .all(|(a, b)| (a - b).abs() <= config.tol_x * (1.0 + b.abs()))
    })
}

/// One Nelder–Mead descent. Returns the final simplex and whether it met
/// the tolerance before the evaluation budget ran out.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    ev: &mut Evaluator<'_, F>,
    mut simplex: Vec<Vertex>,
    config: &OptimConfig,
) -> (Vec<Vertex>, bool) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = simplex.len() - 1;
    loop {
        simplex.sort_by(vertex_order);
        if converged(&simplex, config) {
            return (simplex, true);
        }
        if ev.evaluations >= config.max_evals {
            return (simplex, false);
        }
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / n as f64;
            }
        }
        let worst_x = simplex[n].x.clone();
        let worst_f = simplex[n].f;
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_x)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = ev.eval(along(REFLECT));
        if reflected.f < simplex[0].f {
            let expanded = ev.eval(along(REFLECT * EXPAND));
            simplex[n] = if expanded.f < reflected.f {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.f < simplex[n - 1].f {
            simplex[n] = reflected;
            continue;
        }
        let contracted = if reflected.f < worst_f {
            ev.eval(along(REFLECT * CONTRACT))
        } else {
            ev.eval(along(-CONTRACT))
        };
        if contracted.f < reflected.f.min(worst_f) {
            simplex[n] = contracted;
            continue;
        }
        let best_x = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            let x = best_x
                .iter()
                .zip(&v.x)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            *v = ev.eval(x);
        }
    }
}

/// Minimizes `objective` from a feasible `start`.
pub fn minimize<F>(
    objective: &F,
    start: &[f64],
    bounds: &Bounds,
    seed: u64,
    config: &OptimConfig,
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    if start.len() != bounds.dim() {
        return Err(Error::InvalidArgument(format!(
            "start has dimension {}, bounds have {}",
            start.len(),
            bounds.dim()
        )));
    }
    if !bounds.is_feasible(start) {
        return Err(Error::Optim(format!("infeasible start {start:?}")));
    }
    let f0 = objective(start);
    if !f0.is_finite() {
        return Err(Error::Optim(format!(
            "objective is not finite at start ({f0})"
        )));
    }

    let mut ev = Evaluator {
        objective,
        bounds,
        evaluations: 1,
    };
    let mut rng = rng_from(seed);
    let mut best = Vertex {
        x: start.to_vec(),
        f: f0,
    };
    let mut runs = 0;
    let mut converged_flag;
    loop {
        let before = best.f;
        let simplex = if runs == 0 {
            initial_simplex::<F, rand_chacha::ChaCha8Rng>(&mut ev, best, config.initial_step, None)
        } else {
            initial_simplex(&mut ev, best, config.initial_step, Some(&mut rng))
        };
        let (mut simplex, ok) = nelder_mead(&mut ev, simplex, config);
        simplex.sort_by(vertex_order);
        best = simplex.swap_remove(0);
        converged_flag = ok;
        runs += 1;
        let improved = before - best.f > config.tol_f * (1.0 + best.f.abs());
        if !ok || runs > config.max_restarts || (runs > 1 && !improved) {
            break;
        }
    }
    let restarts = runs - 1;
    Ok(OptimResult {
        argmin: best.x,
        value: best.f,
        evaluations: ev.evaluations,
        converged: converged_flag,
        restarts,
        start_index: 0,
    })
}

/// Runs [`minimize`] from each feasible start and keeps the best result.
/// Ties go to the earliest start so the outcome does not depend on thread
/// scheduling.
pub fn multistart_minimize<F>(
    objective: &F,
    starts: &[Vec<f64>],
    bounds: &Bounds,
    seed: u64,
    config: &OptimConfig,
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if starts.is_empty() {
        return Err(Error::Optim("no starting points".into()));
    }
    let runs: Vec<Option<OptimResult>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            minimize(objective, s, bounds, derive_seed(seed, &[i as u64]), config)
                .ok()
                .map(|mut r| {
                    r.start_index = i;
                    r
                })
        })
        .collect();
    let total_evals: usize = runs.iter().flatten().map(|r| r.evaluations).sum();
    let mut best = runs
        .into_iter()
        .flatten()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.start_index.cmp(&b.start_index)))
        .ok_or_else(|| Error::Optim("all starting points are infeasible".into()))?;
    best.evaluations = total_evals;
    Ok(best)
}

/// The base point followed by `n - 1` seeded perturbations: ±20%
/// multiplicative on non-zero coordinates, ±0.2 additive on the γ
/// coordinate, each projected back onto the box.
pub fn perturbed_starts(
    base: &[f64],
    n: usize,
    gamma_index: Option<usize>,
    bounds: &Bounds,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let mut starts = vec![base.to_vec()];
    for _ in 1..n {
        let mut x: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let u: f64 = rng.random_range(-0.2..=0.2);
                if Some(j) == gamma_index {
                    v + u
                } else {
                    v * (1.0 + u)
                }
            })
            .collect();
        bounds.project(&mut x);
        starts.push(x);
    }
    starts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> OptimConfig {
        OptimConfig::default()
    }

    #[test]
    fn quadratic_bowl() {
        let f = |w: &[f64]| (w[0] - 1.0).powi(2) + (w[1] + 2.0).powi(2);
        let r = minimize(&f, &[0.0, 0.0], &Bounds::unbounded(2), 1, &cfg()).unwrap();
        assert!(r.value < 1e-8, "{r:?}");
        assert_abs_diff_eq!(r.argmin[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.argmin[1], -2.0, epsilon = 1e-4);
        assert!(r.converged);
    }

    #[test]
    fn boundary_optimum() {
        let f = |w: &[f64]| w[0];
        let b = Bounds::new(vec![0.0], vec![f64::INFINITY]).unwrap();
        let r = minimize(&f, &[5.0], &b, 0, &cfg()).unwrap();
        assert_eq!(r.argmin[0], 0.0);
    }

    #[test]
    fn clipped_optimum() {
        let f = |w: &[f64]| (w[0] - 3.0).powi(2);
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        let r = minimize(&f, &[0.5], &b, 0, &cfg()).unwrap();
        assert_eq!(r.argmin[0], 1.0);
    }

    #[test]
    fn rejects_bad_starts() {
        let f = |w: &[f64]| w[0];
        let b = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        assert!(minimize(&f, &[2.0], &b, 0, &cfg()).is_err());
        let g = |_: &[f64]| f64::NAN;
        assert!(minimize(&g, &[0.5], &b, 0, &cfg()).is_err());
        let pred = b.clone().with_predicate(Arc::new(|x: &[f64]| x[0] < 0.2));
        assert!(minimize(&f, &[0.5], &pred, 0, &cfg()).is_err());
    }

    #[test]
    fn predicate_is_respected() {
        let f = |w: &[f64]| (w[0] - 3.0).powi(2) + (w[1] - 3.0).powi(2);
        let b = Bounds::unbounded(2).with_predicate(Arc::new(|x: &[f64]| x[0] + x[1] <= 2.0));
        let seen_bad = std::sync::atomic::AtomicBool::new(false);
        let wrapped = |w: &[f64]| {
            if w[0] + w[1] > 2.0 {
                seen_bad.store(true, std::sync::atomic::Ordering::Relaxed);
            }
            f(w)
        };
        let r = minimize(&wrapped, &[0.0, 0.0], &b, 3, &cfg()).unwrap();
        assert!(!seen_bad.load(std::sync::atomic::Ordering::Relaxed));
        assert!(r.argmin[0] + r.argmin[1] <= 2.0);
        assert_abs_diff_eq!(r.argmin[0], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn deterministic() {
        let f = |w: &[f64]| (w[0] * w[1] - 1.0).powi(2) + 0.1 * (w[0] - w[1]).abs();
        let b = Bounds::unbounded(2);
        let a = minimize(&f, &[3.0, 0.2], &b, 11, &cfg()).unwrap();
        let c = minimize(&f, &[3.0, 0.2], &b, 11, &cfg()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn multistart_single_equals_minimize() {
        let f = |w: &[f64]| (w[0] - 1.0).powi(4) + w[1].powi(2);
        let b = Bounds::unbounded(2);
        let single = minimize(&f, &[4.0, 4.0], &b, derive_seed(5, &[0]), &cfg()).unwrap();
        let multi = multistart_minimize(&f, &[vec![4.0, 4.0]], &b, 5, &cfg()).unwrap();
        assert_eq!(single, multi);
    }

    #[test]
    fn multistart_finds_lower_basin() {
        // local basin at 5 (value 0.5) and global basin at 0 (value 0)
        let f = |w: &[f64]| (w[0] * w[0]).min((w[0] - 5.0).powi(2) + 0.5);
        let grid_best = (0..=10_000)
            .map(|i| -2.0 + 9.0 * i as f64 / 10_000.0)
            .min_by(|a, b| f(&[*a]).total_cmp(&f(&[*b])))
            .unwrap();
        assert_abs_diff_eq!(grid_best, 0.0, epsilon = 1e-3);
        let r = multistart_minimize(&f, &[vec![5.5], vec![-1.0]], &Bounds::unbounded(1), 2, &cfg())
            .unwrap();
        assert!(r.value < 1e-8);
        assert_abs_diff_eq!(r.argmin[0], grid_best, epsilon = 1e-3);
        assert_eq!(r.start_index, 1);
    }

    #[test]
    fn multistart_empty_is_error() {
        let f = |w: &[f64]| w[0];
        assert!(multistart_minimize(&f, &[], &Bounds::unbounded(1), 0, &cfg()).is_err());
    }

    #[test]
    fn perturbed_starts_stay_in_bounds() {
        let b = Bounds::new(vec![0.0, 0.0, f64::NEG_INFINITY, 0.01], vec![f64::INFINITY; 4]).unwrap();
        let s = perturbed_starts(&[1.0, 0.0, -3.0, 0.1], 8, Some(3), &b, 9);
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], vec![1.0, 0.0, -3.0, 0.1]);
        for x in &s {
            assert!(b.in_box(x));
            assert!(x[0] >= 0.8 && x[0] <= 1.2);
        }
    }
}

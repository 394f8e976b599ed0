//! Convex solvers for the coefficient problems: conditional gradients (CG),
//! pairwise conditional gradients (PCG) and blended pairwise conditional
//! gradients (BPCG) over a polytope, and Nesterov's accelerated gradient
//! descent (AGD) for the unconstrained quadratic.
//!
//! The Frank-Wolfe family is generic over an [`Objective`] and a
//! [`Polytope`] given by its linear minimization oracle; the OAVI problems
//! use [`QuadraticProblem`] over an [`L1Ball`], the linear classifier a
//! squared hinge loss over [`L1BallWithBias`].

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, norm1, Matrix};

/// Tolerance for feasibility of a starting point.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// A smooth convex function with an exact line search.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, y: &[f64]) -> f64;

    fn gradient(&self, y: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&self, y: &[f64]) -> (f64, Vec<f64>) {
        (self.value(y), self.gradient(y))
    }

    /// A minimizer of `gamma -> f(y + gamma * d)` over `[0, gamma_max]`.
    /// `grad` is the gradient at `y`.
    fn line_search(&self, y: &[f64], grad: &[f64], d: &[f64], gamma_max: f64) -> f64;
}

/// A polytope accessed only through its vertices and linear minimization
/// oracle.
pub trait Polytope {
    type Vertex: Copy + PartialEq + Debug;

    fn dim(&self) -> usize;

    /// A vertex minimizing `<grad, v>`.
    fn lmo(&self, grad: &[f64]) -> Self::Vertex;

    /// `<g, v>`
    fn vertex_dot(&self, v: Self::Vertex, g: &[f64]) -> f64;

    /// `out += scale * v`
    fn add_vertex(&self, v: Self::Vertex, scale: f64, out: &mut [f64]);

    fn contains(&self, y: &[f64], tol: f64) -> bool;

    /// Total order used for tie-breaking among active vertices.
    fn vertex_key(&self, v: Self::Vertex) -> (usize, usize);

    fn vertex_point(&self, v: Self::Vertex) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_vertex(v, 1.0, &mut out);
        out
    }
}

/// A vertex `sign * radius * e_index` of an l1 ball. `sign` is `+1` or `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct L1Vertex {
    pub index: usize,
    pub sign: i8,
}

impl L1Vertex {
    pub fn new(index: usize, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        L1Vertex { index, sign }
    }

    fn key(self) -> (usize, usize) {
        (self.index, usize::from(self.sign < 0))
    }
}

/// Vertex of `{ ||y||_1 <= radius }` minimizing `<gradient, v>`: the
/// coordinate of largest `|gradient_i|` with the opposite sign. Ties go to the
/// lowest index and then to the positive sign; a zero gradient gives `+e_1`.
pub fn lmo_l1(gradient: &[f64]) -> L1Vertex {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, g) in gradient.iter().enumerate() {
        if g.abs() > best_abs {
            best = i;
            best_abs = g.abs();
        }
    }
    let sign = if gradient.get(best).copied().unwrap_or(0.0) > 0.0 {
        -1
    } else {
        1
    };
    L1Vertex::new(best, sign)
}

/// `{ y in R^dim : ||y||_1 <= radius }`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Ball {
    pub dim: usize,
    pub radius: f64,
}

impl L1Ball {
    pub fn new(dim: usize, radius: f64) -> Self {
        L1Ball { dim, radius }
    }
}

impl Polytope for L1Ball {
    type Vertex = L1Vertex;

    fn dim(&self) -> usize {
        self.dim
    }

    fn lmo(&self, grad: &[f64]) -> L1Vertex {
        lmo_l1(grad)
    }

    fn vertex_dot(&self, v: L1Vertex, g: &[f64]) -> f64 {
        self.radius * f64::from(v.sign) * g[v.index]
    }

    fn add_vertex(&self, v: L1Vertex, scale: f64, out: &mut [f64]) {
        out[v.index] += scale * self.radius * f64::from(v.sign);
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.dim && norm1(y) <= self.radius + tol
    }

    fn vertex_key(&self, v: L1Vertex) -> (usize, usize) {
        v.key()
    }
}

/// `{ ||w||_1 <= radius } x [-bias_radius, bias_radius]` on `(w, bias)`; the
/// bias is the last coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1BallWithBias {
    pub weights: usize,
    pub radius: f64,
    pub bias_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiasVertex {
    pub weight: L1Vertex,
    pub bias_sign: i8,
}

impl Polytope for L1BallWithBias {
    type Vertex = BiasVertex;

    fn dim(&self) -> usize {
        self.weights + 1
    }

    fn lmo(&self, grad: &[f64]) -> BiasVertex {
        let weight = lmo_l1(&grad[..self.weights]);
        let bias_sign = if grad[self.weights] > 0.0 { -1 } else { 1 };
        BiasVertex { weight, bias_sign }
    }

    fn vertex_dot(&self, v: BiasVertex, g: &[f64]) -> f64 {
        let w = if self.weights > 0 {
            self.radius * f64::from(v.weight.sign) * g[v.weight.index]
        } else {
            0.0
        };
        w + self.bias_radius * f64::from(v.bias_sign) * g[self.weights]
    }

    fn add_vertex(&self, v: BiasVertex, scale: f64, out: &mut [f64]) {
        if self.weights > 0 {
            out[v.weight.index] += scale * self.radius * f64::from(v.weight.sign);
        }
        out[self.weights] += scale * self.bias_radius * f64::from(v.bias_sign);
    }

    fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.weights + 1
            && norm1(&y[..self.weights]) <= self.radius + tol
            && y[self.weights].abs() <= self.bias_radius + tol
    }

    fn vertex_key(&self, v: BiasVertex) -> (usize, usize) {
        let (i, s) = v.weight.key();
        (i, 2 * s + usize::from(v.bias_sign < 0))
    }
}

/// `f(y) = (1/m) (y^T B y + 2 r^T y + c0)`, i.e. `(1/m) ||A y + b||^2` with
/// `B = A^T A`, `r = A^T b`, `c0 = ||b||^2`, over an l1 ball of the given
/// radius (`f64::INFINITY` for the unconstrained problem).
#[derive(Clone, Debug)]
pub struct QuadraticProblem<'a> {
    pub gram: &'a Matrix,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub m: usize,
    pub radius: f64,
}

impl<'a> QuadraticProblem<'a> {
    pub fn new(
        gram: &'a Matrix,
        linear: Vec<f64>,
        constant: f64,
        m: usize,
        radius: f64,
    ) -> Result<Self> {
        check_dim(gram.rows(), gram.cols())?;
        check_dim(gram.rows(), linear.len())?;
        if m == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(radius >= 0.0) {
            return Err(Error::Parameter(format!(
                "radius must be nonnegative, got {radius}"
            )));
        }
        Ok(QuadraticProblem {
            gram,
            linear,
            constant,
            m,
            radius,
        })
    }

    pub fn is_constrained(&self) -> bool {
        self.radius.is_finite()
    }

    pub fn ball(&self) -> L1Ball {
        L1Ball::new(self.linear.len(), self.radius)
    }

    fn scale(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// The vertex of the ball with the smallest objective value.
    pub fn best_vertex(&self) -> L1Vertex {
        let mut best = L1Vertex::new(0, 1);
        let mut best_val = f64::INFINITY;
        let r = self.radius;
        for i in 0..self.linear.len() {
            for sign in [1i8, -1] {
                let s = f64::from(sign);
                let v = r * r * self.gram[(i, i)] + 2.0 * s * r * self.linear[i];
                if v < best_val {
                    best_val = v;
                    best = L1Vertex::new(i, sign);
                }
            }
        }
        best
    }

    /// The FW gap `<grad f(y), y - w>` with `w` from the l1 LMO.
    pub fn certify_gap(&self, y: &[f64]) -> f64 {
        let g = self.gradient(y);
        fw_gap(&self.ball(), &g, y).0
    }
}

impl Objective for QuadraticProblem<'_> {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.value_and_gradient(y).0
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        self.value_and_gradient(y).1
    }

    fn value_and_gradient(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let by = self.gram.mul_vec(y);
        let s = self.scale();
        let value = s * (dot(y, &by) + 2.0 * dot(&self.linear, y) + self.constant);
        let grad = by
            .iter()
            .zip(&self.linear)
            .map(|(a, b)| 2.0 * s * (a + b))
            .collect();
        (value.max(0.0), grad)
    }

    fn line_search(&self, _y: &[f64], grad: &[f64], d: &[f64], gamma_max: f64) -> f64 {
        let slope = dot(grad, d);
        let curvature = 2.0 * self.scale() * dot(d, &self.gram.mul_vec(d));
        quadratic_step(slope, curvature, gamma_max)
    }
}

fn quadratic_step(slope: f64, curvature: f64, gamma_max: f64) -> f64 {
    if slope >= 0.0 {
        return 0.0;
    }
    if curvature <= 0.0 {
        return gamma_max;
    }
    (-slope / curvature).clamp(0.0, gamma_max)
}

/// Closed-form minimizer of `f(y + gamma d)` over `[0, gamma_max]`.
pub fn exact_line_search(
    problem: &QuadraticProblem<'_>,
    y: &[f64],
    d: &[f64],
    gamma_max: f64,
) -> f64 {
    let g = problem.gradient(y);
    problem.line_search(y, &g, d, gamma_max)
}

/// Why a solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GapReached,
    MaxIters,
    ProgressStall,
    VanishingDetected,
    NonvanishingCertified,
}

/// Stop after `window` consecutive iterations improving the objective by
/// less than `threshold` each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StallRule {
    pub threshold: f64,
    pub window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// FW-gap tolerance (gradient norm for AGD).
    pub epsilon: f64,
    pub stall: Option<StallRule>,
    /// Stop as soon as the objective is at most this value.
    pub vanish_below: Option<f64>,
    /// Stop once `objective - gap` exceeds this value: the optimum cannot
    /// get below it.
    pub certify_above: Option<f64>,
}

impl SolveOptions {
    /// Plain accuracy-driven run without early decisions.
    pub fn accuracy(epsilon: f64, max_iters: usize) -> Self {
        SolveOptions {
            max_iters,
            epsilon,
            stall: None,
            vanish_below: None,
            certify_above: None,
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::accuracy(1e-8, 10_000)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub y: Vec<f64>,
    pub objective: f64,
    /// FW gap for the constrained solvers, gradient 2-norm for AGD.
    pub gap: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// Vertices with positive weight; the weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSet<V> {
    entries: Vec<(V, f64)>,
}

impl<V: Copy + PartialEq> ActiveSet<V> {
    pub fn single(v: V) -> Self {
        ActiveSet {
            entries: vec![(v, 1.0)],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(V, f64)] {
        &self.entries
    }

    pub fn weight_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    fn position(&self, v: V) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == v)
    }

    fn add(&mut self, v: V, w: f64) {
        match self.position(v) {
            Some(i) => self.entries[i].1 += w,
            None => self.entries.push((v, w)),
        }
    }

    fn prune(&mut self) {
        self.entries.retain(|e| e.1 > 0.0);
    }

    pub fn point<P: Polytope<Vertex = V>>(&self, poly: &P) -> Vec<f64> {
        let mut y = vec![0.0; poly.dim()];
        for &(v, w) in &self.entries {
            poly.add_vertex(v, w, &mut y);
        }
        y
    }
}

/// One solver iterate as seen by an observer.
#[derive(Debug)]
pub struct Iterate<'a, V> {
    pub iteration: usize,
    pub y: &'a [f64],
    pub objective: f64,
    pub gap: f64,
    pub active: Option<&'a ActiveSet<V>>,
}

fn fw_gap<P: Polytope>(poly: &P, grad: &[f64], y: &[f64]) -> (f64, P::Vertex) {
    let w = poly.lmo(grad);
    let gap = dot(grad, y) - poly.vertex_dot(w, grad);
    (gap.max(0.0), w)
}

/// Shared termination bookkeeping.
struct Monitor {
    opts: SolveOptions,
    prev: Option<f64>,
    stalled: usize,
}

impl Monitor {
    fn new(opts: SolveOptions) -> Self {
        Monitor {
            opts,
            prev: None,
            stalled: 0,
        }
    }

    fn check(&mut self, t: usize, objective: f64, gap: f64) -> Option<Termination> {
        if gap <= self.opts.epsilon {
            return Some(Termination::GapReached);
        }
        if self.opts.vanish_below.is_some_and(|v| objective <= v) {
            return Some(Termination::VanishingDetected);
        }
        if self.opts.certify_above.is_some_and(|c| objective - gap > c) {
            return Some(Termination::NonvanishingCertified);
        }
        if let (Some(rule), Some(prev)) = (self.opts.stall, self.prev) {
            if prev - objective < rule.threshold {
                self.stalled += 1;
            } else {
                self.stalled = 0;
            }
            if self.stalled >= rule.window.max(1) {
                return Some(Termination::ProgressStall);
            }
        }
        self.prev = Some(objective);
        if t >= self.opts.max_iters {
            return Some(Termination::MaxIters);
        }
        None
    }
}

/// Observer that ignores every iterate.
pub fn ignore<V>(_: &Iterate<'_, V>) {}

/// Vanilla Frank-Wolfe with exact line search from any feasible `y0`.
pub fn solve_cg<O, P>(obj: &O, poly: &P, y0: Vec<f64>, opts: SolveOptions) -> Result<SolverResult>
where
    O: Objective,
    P: Polytope,
{
    solve_cg_observed(obj, poly, y0, opts, &mut ignore)
}

pub fn solve_cg_observed<O, P>(
    obj: &O,
    poly: &P,
    y0: Vec<f64>,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&Iterate<'_, P::Vertex>),
) -> Result<SolverResult>
where
    O: Objective,
    P: Polytope,
{
    check_dim(obj.dim(), y0.len())?;
    check_dim(poly.dim(), y0.len())?;
    if !poly.contains(&y0, FEASIBILITY_TOLERANCE) {
        return Err(Error::Infeasible { norm: norm1(&y0) });
    }
    let mut y = y0;
    let mut monitor = Monitor::new(opts);
    let mut t = 0;
    loop {
        let (f, g) = obj.value_and_gradient(&y);
        let (gap, w) = fw_gap(poly, &g, &y);
        observer(&Iterate {
            iteration: t,
            y: &y,
            objective: f,
            gap,
            active: None,
        });
        if let Some(termination) = monitor.check(t, f, gap) {
            return Ok(SolverResult {
                y,
                objective: f,
                gap,
                iterations: t,
                termination,
            });
        }
        let mut d: Vec<f64> = y.iter().map(|v| -v).collect();
        poly.add_vertex(w, 1.0, &mut d);
        let gamma = obj.line_search(&y, &g, &d, 1.0);
        axpy(gamma, &d, &mut y);
        t += 1;
    }
}

/// Result of an active-set solver.
#[derive(Clone, Debug)]
pub struct ActiveSolution<V> {
    pub result: SolverResult,
    pub active: ActiveSet<V>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Pairwise,
    BlendedPairwise,
}

/// Pairwise conditional gradients from a vertex: every step moves weight
/// from the away vertex to the global FW vertex.
pub fn solve_pcg<O, P>(
    obj: &O,
    poly: &P,
    start: P::Vertex,
    opts: SolveOptions,
) -> Result<ActiveSolution<P::Vertex>>
where
    O: Objective,
    P: Polytope,
{
    active_set_solver(obj, poly, start, opts, Variant::Pairwise, &mut ignore)
}

pub fn solve_pcg_observed<O, P>(
    obj: &O,
    poly: &P,
    start: P::Vertex,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&Iterate<'_, P::Vertex>),
) -> Result<ActiveSolution<P::Vertex>>
where
    O: Objective,
    P: Polytope,
{
    active_set_solver(obj, poly, start, opts, Variant::Pairwise, observer)
}

/// Blended pairwise conditional gradients from a vertex: a local pairwise
/// step between the away and local FW vertex of the active set whenever its
/// gap dominates the global FW gap, a FW step otherwise.
pub fn solve_bpcg<O, P>(
    obj: &O,
    poly: &P,
    start: P::Vertex,
    opts: SolveOptions,
) -> Result<ActiveSolution<P::Vertex>>
where
    O: Objective,
    P: Polytope,
{
    active_set_solver(
        obj,
        poly,
        start,
        opts,
        Variant::BlendedPairwise,
        &mut ignore,
    )
}

pub fn solve_bpcg_observed<O, P>(
    obj: &O,
    poly: &P,
    start: P::Vertex,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&Iterate<'_, P::Vertex>),
) -> Result<ActiveSolution<P::Vertex>>
where
    O: Objective,
    P: Polytope,
{
    active_set_solver(obj, poly, start, opts, Variant::BlendedPairwise, observer)
}

fn active_set_solver<O, P>(
    obj: &O,
    poly: &P,
    start: P::Vertex,
    opts: SolveOptions,
    variant: Variant,
    observer: &mut dyn FnMut(&Iterate<'_, P::Vertex>),
) -> Result<ActiveSolution<P::Vertex>>
where
    O: Objective,
    P: Polytope,
{
    check_dim(obj.dim(), poly.dim())?;
    let mut active = ActiveSet::single(start);
    let mut monitor = Monitor::new(opts);
    let mut t = 0;
    loop {
        let y = active.point(poly);
        let (f, g) = obj.value_and_gradient(&y);
        let (gap, w) = fw_gap(poly, &g, &y);
        observer(&Iterate {
            iteration: t,
            y: &y,
            objective: f,
            gap,
            active: Some(&active),
        });
        if let Some(termination) = monitor.check(t, f, gap) {
            return Ok(ActiveSolution {
                result: SolverResult {
                    y,
                    objective: f,
                    gap,
                    iterations: t,
                    termination,
                },
                active,
            });
        }

        // Away vertex (max <g, v>) and local FW vertex (min <g, v>) over the
        // active set; ties by vertex order.
        let scored: Vec<(P::Vertex, f64, f64)> = active
            .entries()
            .iter()
            .map(|&(v, lambda)| (v, poly.vertex_dot(v, &g), lambda))
            .collect();
        let key = |v: P::Vertex| poly.vertex_key(v);
        let away = *scored
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| key(b.0).cmp(&key(a.0))))
            .expect("active set is never empty");
        let local = *scored
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| key(a.0).cmp(&key(b.0))))
            .expect("active set is never empty");

        let fw_dir_gain = poly.vertex_dot(w, &g) - dot(&g, &y);
        let pairwise_target = match variant {
            Variant::Pairwise => Some((w, poly.vertex_dot(w, &g))),
            Variant::BlendedPairwise if fw_dir_gain >= local.1 - away.1 => Some((local.0, local.1)),
            Variant::BlendedPairwise => None,
        };

        match pairwise_target {
            Some((target, _)) => {
                let (a, _, lambda_a) = away;
                if target == a {
                    // No pairwise direction left; the gap test above already
                    // failed, so only roundoff separates us from the optimum.
                    return Ok(ActiveSolution {
                        result: SolverResult {
                            y,
                            objective: f,
                            gap,
                            iterations: t,
                            termination: Termination::ProgressStall,
                        },
                        active,
                    });
                }
                let mut d = vec![0.0; poly.dim()];
                poly.add_vertex(target, 1.0, &mut d);
                poly.add_vertex(a, -1.0, &mut d);
                let gamma = obj.line_search(&y, &g, &d, lambda_a);
                if gamma >= lambda_a {
                    active.entries.retain(|e| e.0 != a);
                } else if let Some(i) = active.position(a) {
                    active.entries[i].1 -= gamma;
                }
                active.add(target, gamma);
            }
            None => {
                let mut d: Vec<f64> = y.iter().map(|v| -v).collect();
                poly.add_vertex(w, 1.0, &mut d);
                let gamma = obj.line_search(&y, &g, &d, 1.0);
                if gamma >= 1.0 {
                    active = ActiveSet::single(w);
                } else {
                    for e in active.entries.iter_mut() {
                        e.1 *= 1.0 - gamma;
                    }
                    active.add(w, gamma);
                }
            }
        }
        active.prune();
        t += 1;
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
pub fn power_iteration(a: &Matrix, iters: usize, tol: f64) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let av = a.mul_vec(&v);
        let next = dot(&v, &av);
        let norm = dot(&av, &av).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = av.into_iter().map(|x| x / norm).collect();
        let done = (next - lambda).abs() <= tol * next.abs().max(1.0);
        lambda = next;
        if done {
            break;
        }
    }
    // The Rayleigh quotient approaches from below; the norm of A v bounds
    // from above once v has converged.
    let av = a.mul_vec(&v);
    lambda.max(dot(&av, &av).sqrt())
}

/// Nesterov's accelerated gradient descent with constant step `1/L` on the
/// unconstrained quadratic. `gap` in the result is `||grad f(y)||_2`.
pub fn solve_agd(
    problem: &QuadraticProblem<'_>,
    y0: Vec<f64>,
    opts: SolveOptions,
) -> Result<SolverResult> {
    solve_agd_observed(problem, y0, opts, &mut ignore)
}

pub fn solve_agd_observed(
    problem: &QuadraticProblem<'_>,
    y0: Vec<f64>,
    opts: SolveOptions,
    observer: &mut dyn FnMut(&Iterate<'_, L1Vertex>),
) -> Result<SolverResult> {
    check_dim(problem.dim(), y0.len())?;
    let lipschitz = 2.0 / problem.m as f64 * power_iteration(problem.gram, 50, 1e-6);
    let step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        0.0
    };

    let mut monitor = Monitor::new(SolveOptions {
        certify_above: None,
        ..opts
    });
    let mut y = y0.clone();
    let mut z = y0;
    let mut momentum = 1.0f64;
    let mut t = 0;
    loop {
        let (f, g) = problem.value_and_gradient(&y);
        let gnorm = dot(&g, &g).sqrt();
        observer(&Iterate {
            iteration: t,
            y: &y,
            objective: f,
            gap: gnorm,
            active: None,
        });
        if let Some(termination) = monitor.check(t, f, gnorm) {
            return Ok(SolverResult {
                y,
                objective: f,
                gap: gnorm,
                iterations: t,
                termination,
            });
        }
        if step == 0.0 {
            return Ok(SolverResult {
                y,
                objective: f,
                gap: gnorm,
                iterations: t,
                termination: Termination::ProgressStall,
            });
        }
        let gz = if t == 0 { g } else { problem.gradient(&z) };
        let mut next = z.clone();
        axpy(-step, &gz, &mut next);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        z = next
            .iter()
            .zip(&y)
            .map(|(n, p)| n + beta * (n - p))
            .collect();
        y = next;
        momentum = next_momentum;
        t += 1;
    }
}

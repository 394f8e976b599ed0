//! The oracle approximate vanishing ideal algorithm.
//!
//! For each degree `d = 1, 2, ...` the border of the current order ideal `O`
//! is scanned in DegLex order. For a border term `u` the solver minimizes
//! `(1/m) ||A y + u(X)||^2` over `||y||_1 <= tau - 1`, where `A = O(X)`. If
//! the resulting `g = sum_j y_j t_j + u` has `mse(g, X) <= psi` it becomes a
//! generator, otherwise `u` joins `O`. The run ends at the first degree with
//! an empty border.
//!
//! Three execution modes:
//!
//! * `plain`: the solver starts from scratch (`0` for AGD, the best vertex
//!   of the ball otherwise).
//! * `ihb`: the solver (AGD or CG) starts at the unconstrained minimizer
//!   `-(A^T A)^{-1} A^T b`, read off the incrementally maintained inverse.
//!   The first time that start is infeasible (`||y0||_1 > tau - 1`) or the
//!   inverse cannot be updated, boosting is switched off for the rest of the
//!   run.
//! * `wihb`: CG from the boosted start decides whether a generator exists;
//!   only then is the problem re-solved with BPCG (or PCG) from a vertex to
//!   get a sparse coefficient vector, falling back to the CG one if the
//!   sparse candidate does not vanish.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm1, norm2_sq, Columns, EvalMatrix, GramInverseState};
use crate::solvers::{
    self, Iterate, L1Ball, L1Vertex, QuadraticProblem, SolveOptions, SolverResult, StallRule,
};
use crate::terms::{border, Term, TermList};

/// Slack allowed on the `[0, 1]` data range check.
pub const RANGE_TOLERANCE: f64 = 1e-9;

/// Model file schema tag.
pub const MODEL_SCHEMA: &str = "vanish-kit/model/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Agd,
    Cg,
    Pcg,
    Bpcg,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Agd,
        SolverKind::Cg,
        SolverKind::Pcg,
        SolverKind::Bpcg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Agd => "agd",
            SolverKind::Cg => "cg",
            SolverKind::Pcg => "pcg",
            SolverKind::Bpcg => "bpcg",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "agd" => Ok(SolverKind::Agd),
            "cg" => Ok(SolverKind::Cg),
            "pcg" => Ok(SolverKind::Pcg),
            "bpcg" => Ok(SolverKind::Bpcg),
            other => Err(Error::Parameter(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Ihb,
    Wihb,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Ihb => "ihb",
            Mode::Wihb => "wihb",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Ok(Mode::Plain),
            "ihb" => Ok(Mode::Ihb),
            "wihb" => Ok(Mode::Wihb),
            other => Err(Error::Parameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// Parameters of one OAVI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OaviConfig {
    pub psi: f64,
    pub tau: f64,
    pub solver: SolverKind,
    pub mode: Mode,
    pub max_iters: usize,
    /// Solver accuracy; `None` means `0.01 * psi`.
    pub epsilon: Option<f64>,
    /// Per-iteration progress threshold as a multiple of `psi`; `None`
    /// disables the stall rule.
    pub stall_factor: Option<f64>,
    /// Let solvers stop once the vanishing decision is settled.
    pub early_decisions: bool,
    /// Hard cap on the degree; `None` runs until the border is empty.
    pub max_degree: Option<u32>,
    pub trace: bool,
}

impl OaviConfig {
    pub fn new(psi: f64, tau: f64, solver: SolverKind, mode: Mode) -> Self {
        OaviConfig {
            psi,
            tau,
            solver,
            mode,
            max_iters: 10_000,
            epsilon: None,
            stall_factor: Some(1e-4),
            early_decisions: true,
            max_degree: None,
            trace: false,
        }
    }

    /// Run every solver to accuracy `epsilon` with no stall or early
    /// decision rule.
    pub fn exact(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self.stall_factor = None;
        self.early_decisions = false;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(0.01 * self.psi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0) || !self.psi.is_finite() {
            return Err(Error::Parameter(format!(
                "psi must be positive, got {}",
                self.psi
            )));
        }
        if !(self.tau >= 2.0) {
            return Err(Error::Parameter(format!(
                "tau must be at least 2, got {}",
                self.tau
            )));
        }
        check_compatible(self.solver, self.mode)
    }

    fn solve_options(&self, solver: SolverKind) -> SolveOptions {
        let window = if solver == SolverKind::Agd { 20 } else { 1 };
        SolveOptions {
            max_iters: self.max_iters,
            epsilon: self.epsilon(),
            stall: self.stall_factor.map(|f| StallRule {
                threshold: f * self.psi,
                window,
            }),
            vanish_below: self.early_decisions.then_some(self.psi),
            certify_above: (self.early_decisions && solver != SolverKind::Agd).then_some(self.psi),
        }
    }
}

/// Boosted starts need an interior-capable solver (AGD, CG); the weak
/// variant needs an active-set solver for its sparse re-solve.
pub fn check_compatible(solver: SolverKind, mode: Mode) -> Result<()> {
    match (mode, solver) {
        (Mode::Ihb, SolverKind::Pcg | SolverKind::Bpcg) => Err(Error::Parameter(format!(
            "{solver} needs a vertex start and cannot be combined with ihb; use wihb"
        ))),
        (Mode::Wihb, SolverKind::Agd | SolverKind::Cg) => Err(Error::Parameter(format!(
            "wihb re-solves with an active-set solver; use pcg or bpcg instead of {solver}"
        ))),
        _ => Ok(()),
    }
}

/// `g = lt(g) + sum_j coeffs[j] * O[j]`, over the first `coeffs.len()`
/// terms of the order ideal it was built with. The leading coefficient is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    leading: Term,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(leading: Term, coeffs: Vec<f64>) -> Self {
        Polynomial { leading, coeffs }
    }

    pub fn leading(&self) -> &Term {
        &self.leading
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn degree(&self) -> u32 {
        self.leading.degree()
    }

    /// `||g||_1 = 1 + ||coeffs||_1`
    pub fn l1_norm(&self) -> f64 {
        1.0 + norm1(&self.coeffs)
    }
}

/// Output of one OAVI run: generators `G` and order ideal `O`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorModel {
    pub n: usize,
    pub psi: f64,
    pub tau: f64,
    pub solver: SolverKind,
    pub mode: Mode,
    pub o: TermList,
    pub g: Vec<Polynomial>,
    /// Highest degree whose border was non-empty.
    pub max_degree_reached: u32,
    /// Candidate index at which boosting was switched off, if it was.
    pub ihb_active_until: Option<usize>,
}

impl GeneratorModel {
    /// Evaluate every generator over `z`; one column per generator.
    pub fn evaluate(&self, z: &Columns) -> Result<Vec<Vec<f64>>> {
        check_dim(self.n, z.num_vars())?;
        Ok(linalg::eval_polynomials(&self.g, &self.o, z))
    }

    pub fn max_generator_degree(&self) -> u32 {
        self.g.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelWire::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: ModelWire = serde_json::from_str(s)?;
        wire.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct PolynomialWire {
    leading: Term,
    basis: Vec<usize>,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelWire {
    schema: String,
    n: usize,
    psi: f64,
    tau: f64,
    solver: SolverKind,
    mode: Mode,
    max_degree_reached: u32,
    #[serde(default)]
    ihb_active_until: Option<usize>,
    #[serde(rename = "O")]
    o: Vec<Term>,
    #[serde(rename = "G")]
    g: Vec<PolynomialWire>,
}

impl From<&GeneratorModel> for ModelWire {
    fn from(m: &GeneratorModel) -> Self {
        ModelWire {
            schema: MODEL_SCHEMA.to_string(),
            n: m.n,
            psi: m.psi,
            tau: m.tau,
            solver: m.solver,
            mode: m.mode,
            max_degree_reached: m.max_degree_reached,
            ihb_active_until: m.ihb_active_until,
            o: m.o.terms().to_vec(),
            g: m.g
                .iter()
                .map(|p| PolynomialWire {
                    leading: p.leading.clone(),
                    basis: (0..p.coeffs.len()).collect(),
                    coeffs: p.coeffs.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelWire> for GeneratorModel {
    type Error = Error;

    fn try_from(w: ModelWire) -> Result<Self> {
        if w.schema != MODEL_SCHEMA {
            return Err(Error::Input(format!(
                "unsupported model schema '{}', expected '{MODEL_SCHEMA}'",
                w.schema
            )));
        }
        let o = TermList::from_terms(w.n, w.o.clone())?;
        if o.terms() != w.o.as_slice() || !o.terms().first().is_some_and(Term::is_one) {
            return Err(Error::Input(
                "O must be DegLex-sorted and start with 1".into(),
            ));
        }
        let mut g = Vec::with_capacity(w.g.len());
        for p in w.g {
            check_dim(w.n, p.leading.num_vars())?;
            check_dim(p.basis.len(), p.coeffs.len())?;
            if p.basis.iter().enumerate().any(|(i, &j)| i != j) || p.basis.len() > o.len() {
                return Err(Error::Input(format!(
                    "generator with leading term {} must use a prefix of O as its basis",
                    p.leading
                )));
            }
            g.push(Polynomial::new(p.leading, p.coeffs));
        }
        Ok(GeneratorModel {
            n: w.n,
            psi: w.psi,
            tau: w.tau,
            solver: w.solver,
            mode: w.mode,
            o,
            g,
            max_degree_reached: w.max_degree_reached,
            ihb_active_until: w.ihb_active_until,
        })
    }
}

/// Solver work done during a fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitStats {
    pub candidates: usize,
    pub solver_calls: usize,
    pub solver_iterations: usize,
}

/// One solver iterate, recorded when tracing is on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub candidate: usize,
    pub term: String,
    pub solver: SolverKind,
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub model: GeneratorModel,
    pub stats: FitStats,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

/// Smallest `D` with `4^{-D} <= psi`, i.e. `ceil(-log(psi) / log(4))`.
pub fn degree_bound(psi: f64) -> u32 {
    let mut d = 0;
    let mut level = 1.0f64;
    while level > psi && d < 1024 {
        level /= 4.0;
        d += 1;
    }
    d
}

/// Whether the run stayed within the degree bound for `psi`.
pub fn check_degree_bound(model: &GeneratorModel, psi: f64) -> bool {
    model.max_degree_reached <= degree_bound(psi)
}

/// `true` iff the boosted start is infeasible, `||y0||_1 > tau - 1`.
pub fn inf_check(y0: &[f64], tau: f64) -> bool {
    norm1(y0) > tau - 1.0
}

/// The unconstrained minimizer `-N A^T b` of `(1/m) ||A y + b||^2`, or
/// `None` when the inverse is no longer maintained.
pub fn ihb_start_vector(state: &GramInverseState, atb: &[f64]) -> Option<Vec<f64>> {
    state
        .inverse()
        .map(|n| n.mul_vec(atb).into_iter().map(|v| -v).collect())
}

pub fn oavi_fit(x: &Columns, config: &OaviConfig) -> Result<GeneratorModel> {
    oavi_fit_report(x, config).map(|r| r.model)
}

/// Run OAVI on `x`, which must already be scaled into `[0, 1]^n`.
pub fn oavi_fit_report(x: &Columns, config: &OaviConfig) -> Result<FitReport> {
    config.validate()?;
    let m = x.num_rows();
    let n = x.num_vars();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    for i in 0..n {
        if let Some(v) = x
            .column(i)
            .iter()
            .find(|v| !(**v >= -RANGE_TOLERANCE && **v <= 1.0 + RANGE_TOLERANCE))
        {
            return Err(Error::Input(format!(
                "feature {} has value {v} outside [0, 1]; scale the data first",
                i + 1
            )));
        }
    }
    let mut run = Run::new(x, config);
    if config.psi >= 1.0 {
        run.warnings.push(format!(
            "psi = {} >= 1: the degree bound does not apply",
            config.psi
        ));
    }

    let mut d = 1;
    loop {
        if config.max_degree.is_some_and(|cap| d > cap) {
            break;
        }
        let candidates = border(&run.o, d);
        if candidates.is_empty() {
            break;
        }
        run.max_degree = d;
        for u in candidates.iter() {
            run.process(u)?;
        }
        d += 1;
    }
    Ok(FitReport {
        model: GeneratorModel {
            n,
            psi: config.psi,
            tau: config.tau,
            solver: config.solver,
            mode: config.mode,
            o: run.o,
            g: run.g,
            max_degree_reached: run.max_degree,
            ihb_active_until: run.ihb_off_at,
        },
        stats: run.stats,
        trace: run.trace,
        warnings: run.warnings,
    })
}

/// Mutable state of one OAVI run.
struct Run<'a> {
    x: &'a Columns,
    config: &'a OaviConfig,
    m: usize,
    o: TermList,
    g: Vec<Polynomial>,
    a: EvalMatrix,
    gram: GramInverseState,
    boosting: bool,
    ihb_off_at: Option<usize>,
    max_degree: u32,
    stats: FitStats,
    trace: Vec<TraceRow>,
    warnings: Vec<String>,
}

/// Problem data for one border term.
struct Candidate<'t> {
    term: &'t Term,
    b: Vec<f64>,
    atb: Vec<f64>,
    bb: f64,
}

impl<'a> Run<'a> {
    fn new(x: &'a Columns, config: &'a OaviConfig) -> Self {
        let m = x.num_rows();
        let boosting = config.mode != Mode::Plain;
        let gram = GramInverseState::unit(m);
        Run {
            x,
            config,
            m,
            o: TermList::unit(x.num_vars()),
            g: Vec::new(),
            a: EvalMatrix::unit(m),
            gram: if boosting {
                gram
            } else {
                gram.without_inverse()
            },
            boosting,
            ihb_off_at: None,
            max_degree: 0,
            stats: FitStats::default(),
            trace: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn radius(&self) -> f64 {
        if self.config.solver == SolverKind::Agd {
            f64::INFINITY
        } else {
            self.config.tau - 1.0
        }
    }

    fn disable_boosting(&mut self, reason: &str) {
        if self.boosting {
            self.boosting = false;
            self.ihb_off_at = Some(self.stats.candidates);
            self.gram.invalidate();
            self.warnings.push(format!(
                "boosting switched off at candidate {}: {reason}",
                self.stats.candidates
            ));
        }
    }

    fn process(&mut self, u: &Term) -> Result<()> {
        let b = linalg::eval_term_column(u, &self.o, &self.a, self.x);
        let bb = norm2_sq(&b);
        let atb = if bb > 0.0 {
            self.a.transpose_mul(&b)
        } else {
            vec![0.0; self.a.num_cols()]
        };
        let cand = Candidate {
            term: u,
            b,
            atb,
            bb,
        };
        self.stats.candidates += 1;

        if cand.bb == 0.0 {
            // u vanishes on X by itself.
            self.g
                .push(Polynomial::new(u.clone(), vec![0.0; self.o.len()]));
            return Ok(());
        }

        let generator = match self.config.mode {
            Mode::Wihb => self.step_wihb(&cand)?,
            _ => {
                let coeffs = self.solve_boosted_or_plain(&cand)?;
                let mse = self.mse_of(&cand, &coeffs);
                (mse <= self.config.psi).then_some(coeffs)
            }
        };
        match generator {
            Some(coeffs) => self.g.push(Polynomial::new(u.clone(), coeffs)),
            None => self.extend_o(cand)?,
        }
        Ok(())
    }

    /// Coefficients from the configured solver, boosted while allowed.
    fn solve_boosted_or_plain(&mut self, cand: &Candidate<'_>) -> Result<Vec<f64>> {
        let solver = self.config.solver;
        if self.boosting {
            if let Some(y0) = self.boosted_start(cand) {
                return self.solve_from(cand, solver, Start::Point(y0));
            }
        }
        self.solve_from(cand, solver, Start::Default)
    }

    /// The boosted start, after the infeasibility check; switches boosting
    /// off permanently when the check fails.
    fn boosted_start(&mut self, cand: &Candidate<'_>) -> Option<Vec<f64>> {
        let y0 = ihb_start_vector(&self.gram, &cand.atb);
        match y0 {
            Some(y0) if self.radius().is_infinite() || !inf_check(&y0, self.config.tau) => Some(y0),
            Some(_) => {
                self.disable_boosting("boosted start is infeasible");
                None
            }
            None => {
                self.disable_boosting("Gram inverse is no longer reliable");
                None
            }
        }
    }

    fn step_wihb(&mut self, cand: &Candidate<'_>) -> Result<Option<Vec<f64>>> {
        let sparse_solver = self.config.solver;
        if self.boosting {
            if let Some(y0) = self.boosted_start(cand) {
                let dense = self.solve_from(cand, SolverKind::Cg, Start::Point(y0))?;
                if self.mse_of(cand, &dense) > self.config.psi {
                    return Ok(None);
                }
                let sparse = self.solve_from(cand, sparse_solver, Start::Default)?;
                if self.mse_of(cand, &sparse) <= self.config.psi {
                    return Ok(Some(sparse));
                }
                return Ok(Some(dense));
            }
        }
        let coeffs = self.solve_from(cand, sparse_solver, Start::Default)?;
        Ok((self.mse_of(cand, &coeffs) <= self.config.psi).then_some(coeffs))
    }

    fn solve_from(
        &mut self,
        cand: &Candidate<'_>,
        solver: SolverKind,
        start: Start,
    ) -> Result<Vec<f64>> {
        let radius = if solver == SolverKind::Agd {
            f64::INFINITY
        } else {
            self.config.tau - 1.0
        };
        let problem =
            QuadraticProblem::new(self.gram.gram(), cand.atb.clone(), cand.bb, self.m, radius)?;
        let opts = self.config.solve_options(solver);
        let ball = L1Ball::new(cand.atb.len(), radius);
        let candidate_index = self.stats.candidates;
        let term_label = cand.term.to_string();
        let tracing = self.config.trace;
        let trace = &mut self.trace;
        let mut observer = |it: &Iterate<'_, L1Vertex>| {
            if tracing {
                trace.push(TraceRow {
                    candidate: candidate_index,
                    term: term_label.clone(),
                    solver,
                    iteration: it.iteration,
                    objective: it.objective,
                    gap: it.gap,
                });
            }
        };
        let result: SolverResult = match (solver, start) {
            (SolverKind::Agd, Start::Point(y0)) => {
                solvers::solve_agd_observed(&problem, y0, opts, &mut observer)?
            }
            (SolverKind::Agd, Start::Default) => solvers::solve_agd_observed(
                &problem,
                vec![0.0; cand.atb.len()],
                opts,
                &mut observer,
            )?,
            (SolverKind::Cg, Start::Point(y0)) => {
                solvers::solve_cg_observed(&problem, &ball, y0, opts, &mut observer)?
            }
            (SolverKind::Cg, Start::Default) => {
                let v = problem.best_vertex();
                solvers::solve_cg_observed(
                    &problem,
                    &ball,
                    ball_point(&ball, v),
                    opts,
                    &mut observer,
                )?
            }
            (SolverKind::Pcg, _) => {
                solvers::solve_pcg_observed(
                    &problem,
                    &ball,
                    problem.best_vertex(),
                    opts,
                    &mut observer,
                )?
                .result
            }
            (SolverKind::Bpcg, _) => {
                solvers::solve_bpcg_observed(
                    &problem,
                    &ball,
                    problem.best_vertex(),
                    opts,
                    &mut observer,
                )?
                .result
            }
        };
        self.stats.solver_calls += 1;
        self.stats.solver_iterations += result.iterations;
        Ok(result.y)
    }

    /// `mse(g, X)` evaluated directly from `A y + b`.
    fn mse_of(&self, cand: &Candidate<'_>, coeffs: &[f64]) -> f64 {
        let v = self.a.mul_add(coeffs, &cand.b);
        norm2_sq(&v) / self.m as f64
    }

    fn extend_o(&mut self, cand: Candidate<'_>) -> Result<()> {
        let still_valid = self.gram.append(&cand.atb, cand.bb);
        if self.boosting && !still_valid {
            self.disable_boosting("Gram inverse update failed");
        }
        self.o.push_max(cand.term.clone())?;
        self.a.push(cand.b);
        Ok(())
    }
}

enum Start {
    Default,
    Point(Vec<f64>),
}

fn ball_point(ball: &L1Ball, v: L1Vertex) -> Vec<f64> {
    use crate::solvers::Polytope;
    ball.vertex_point(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Term;
    use crate::testutil::{gauss_jordan_inverse, normal_equations_minimizer};
    use rand::{Rng, SeedableRng};

    fn cols(rows: &[Vec<f64>]) -> Columns {
        Columns::from_rows(rows).unwrap()
    }

    fn t(e: &[u32]) -> Term {
        Term::new(e.to_vec())
    }

    fn random_points(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    }

    /// `(leading term, coefficients, mse)`
    type OracleGenerator = (Term, Vec<f64>, f64);

    /// OAVI with exact unconstrained least squares by Gauss-Jordan, terms
    /// evaluated pointwise. Returns `(O, G as (leading, coeffs, mse))`.
    fn least_squares_oavi(points: &[Vec<f64>], psi: f64) -> (Vec<Term>, Vec<OracleGenerator>) {
        let n = points[0].len();
        let m = points.len() as f64;
        let mut o = TermList::unit(n);
        let mut g = Vec::new();
        for d in 1.. {
            let candidates = border(&o, d);
            if candidates.is_empty() {
                break;
            }
            for u in candidates.iter() {
                let a: Vec<Vec<f64>> = o
                    .iter()
                    .map(|s| points.iter().map(|p| s.eval(p)).collect())
                    .collect();
                let b: Vec<f64> = points.iter().map(|p| u.eval(p)).collect();
                let dotp = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
                let gram: Vec<Vec<f64>> = a
                    .iter()
                    .map(|x| a.iter().map(|y| dotp(x, y)).collect())
                    .collect();
                let atb: Vec<f64> = a.iter().map(|x| dotp(x, &b)).collect();
                let c = normal_equations_minimizer(&Matrix::from_rows(&gram).unwrap(), &atb);
                let resid: Vec<f64> = (0..b.len())
                    .map(|r| b[r] + a.iter().zip(&c).map(|(col, cj)| cj * col[r]).sum::<f64>())
                    .collect();
                let mse = dotp(&resid, &resid) / m;
                if mse <= psi {
                    g.push((u.clone(), c, mse));
                } else {
                    o.push_max(u.clone()).unwrap();
                }
            }
        }
        (o.terms().to_vec(), g)
    }

    use crate::linalg::Matrix;

    #[test]
    fn worked_example_all_solvers() {
        let x = cols(&[vec![0.0], vec![1.0]]);
        for (solver, mode) in [
            (SolverKind::Agd, Mode::Plain),
            (SolverKind::Agd, Mode::Ihb),
            (SolverKind::Cg, Mode::Plain),
            (SolverKind::Cg, Mode::Ihb),
            (SolverKind::Pcg, Mode::Plain),
            (SolverKind::Pcg, Mode::Wihb),
            (SolverKind::Bpcg, Mode::Plain),
            (SolverKind::Bpcg, Mode::Wihb),
        ] {
            let cfg = OaviConfig::new(0.1, 10.0, solver, mode).exact(1e-14);
            let model = oavi_fit(&x, &cfg).unwrap();
            assert_eq!(model.o.terms(), &[t(&[0]), t(&[1])], "{solver}/{mode}");
            assert_eq!(model.g.len(), 1);
            assert_eq!(model.g[0].leading(), &t(&[2]));
            let c = model.g[0].coeffs();
            assert!(
                c[0].abs() <= 1e-8 && (c[1] + 1.0).abs() <= 1e-8,
                "{solver}/{mode}: {c:?}"
            );
            assert_eq!(model.max_degree_reached, 2);
        }
    }

    #[test]
    fn single_point_makes_x_vanish() {
        let x = cols(&[vec![0.0]]);
        let model = oavi_fit(
            &x,
            &OaviConfig::new(0.01, 10.0, SolverKind::Cg, Mode::Plain),
        )
        .unwrap();
        assert_eq!(model.o.terms(), &[t(&[0])]);
        assert_eq!(model.g.len(), 1);
        assert_eq!(model.g[0].leading(), &t(&[1]));
        assert_eq!(model.g[0].coeffs(), &[0.0]);
    }

    #[test]
    fn large_psi_makes_every_variable_a_generator() {
        // Any [0, 1] column has variance at most 1/4.
        let x = cols(&random_points(4, 30, 3));
        for solver in SolverKind::ALL {
            let model = oavi_fit(&x, &OaviConfig::new(0.3, 10.0, solver, Mode::Plain)).unwrap();
            assert_eq!(model.o.len(), 1);
            let leads: Vec<Term> = model.g.iter().map(|p| p.leading().clone()).collect();
            assert_eq!(leads, vec![t(&[1, 0, 0]), t(&[0, 1, 0]), t(&[0, 0, 1])]);
        }
    }

    #[test]
    fn degree_bound_examples() {
        assert_eq!(degree_bound(0.25), 1);
        assert_eq!(degree_bound(0.1), 2);
        assert_eq!(degree_bound(0.005), 4);
        assert_eq!(degree_bound(1e-6), 10);
        assert_eq!(degree_bound(1.0), 0);
    }

    #[test]
    fn inf_check_examples() {
        assert!(!inf_check(&[1.0, -1.0], 3.0));
        assert!(inf_check(&[1.0, -1.0], 2.9));
        assert!(!inf_check(&[0.0], 2.0));
    }

    fn orthogonal_eval() -> EvalMatrix {
        let mut a = EvalMatrix::unit(4);
        a.push(vec![1.0, -1.0, 1.0, -1.0]);
        a.push(vec![1.0, 1.0, -1.0, -1.0]);
        a
    }

    #[test]
    fn ihb_vector_examples() {
        let a = orthogonal_eval();
        let state = GramInverseState::from_eval(&a);
        // B = 4 I, so y0 = -A^T b / 4.
        let b = [1.0, 2.0, 3.0, 4.0];
        let atb = a.transpose_mul(&b);
        let y0 = ihb_start_vector(&state, &atb).unwrap();
        for (y, r) in y0.iter().zip(&atb) {
            assert!((y + r / 4.0).abs() <= 1e-15);
        }
        let p = QuadraticProblem::new(state.gram(), atb, norm2_sq(&b), 4, f64::INFINITY).unwrap();
        use crate::solvers::Objective;
        assert!(p.gradient(&y0).iter().all(|g| g.abs() <= 1e-8));
        assert_eq!(ihb_start_vector(&state, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(ihb_start_vector(&state.without_inverse(), &[0.0; 3]).is_none());
    }

    #[test]
    fn ihb_vector_matches_direct_inverse() {
        let pts = random_points(11, 12, 1);
        let mut a = EvalMatrix::unit(12);
        for k in 1..4 {
            a.push(pts.iter().map(|p| p[0].powi(k)).collect());
        }
        let mut state = GramInverseState::unit(12);
        let mut sofar = EvalMatrix::unit(12);
        for k in 1..4 {
            let col = a.column(k).to_vec();
            assert!(crate::linalg::gram_append(&mut state, &sofar, &col));
            sofar.push(col);
        }
        let b: Vec<f64> = pts.iter().map(|p| p[0].powi(4)).collect();
        let atb = a.transpose_mul(&b);
        let direct = gauss_jordan_inverse(state.gram()).mul_vec(&atb);
        let y0 = ihb_start_vector(&state, &atb).unwrap();
        for (y, d) in y0.iter().zip(&direct) {
            assert!((y + d).abs() <= 1e-6 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn matches_least_squares_oracle() {
        let psi = 0.02;
        let mut compared = 0;
        for seed in 0..30 {
            let n = 1 + (seed % 2) as usize;
            let m = 6 + (seed % 5) as usize;
            let pts = random_points(100 + seed, m, n);
            let (o_ref, g_ref) = least_squares_oavi(&pts, psi);
            let tight = g_ref.iter().any(|g| (g.2 - psi).abs() < 1e-4);
            let bounded = g_ref.iter().all(|g| norm1(&g.1) <= 50.0);
            if tight || !bounded {
                continue;
            }
            compared += 1;
            let x = cols(&pts);
            for (solver, mode) in [
                (SolverKind::Agd, Mode::Ihb),
                (SolverKind::Cg, Mode::Ihb),
                (SolverKind::Bpcg, Mode::Plain),
            ] {
                let mut cfg = OaviConfig::new(psi, 100.0, solver, mode).exact(1e-10);
                cfg.max_iters = 100_000;
                let model = oavi_fit(&x, &cfg).unwrap();
                assert_eq!(
                    model.o.terms(),
                    o_ref.as_slice(),
                    "seed {seed} {solver}/{mode}"
                );
                assert_eq!(model.g.len(), g_ref.len());
                for (p, (lead, c, _)) in model.g.iter().zip(&g_ref) {
                    assert_eq!(p.leading(), lead);
                    let mse = crate::linalg::mse(&crate::linalg::eval_polynomial(p, &model.o, &x))
                        .unwrap();
                    assert!(mse <= psi);
                    if solver != SolverKind::Bpcg {
                        for (u, v) in p.coeffs().iter().zip(c) {
                            assert!(
                                (u - v).abs() <= 1e-6 * (1.0 + v.abs()),
                                "seed {seed}: {u} vs {v}"
                            );
                        }
                    }
                }
            }
        }
        assert!(compared >= 10, "only {compared} datasets compared");
    }

    #[test]
    fn boosting_does_not_change_agd_decisions() {
        for seed in 0..5 {
            let x = cols(&random_points(seed, 40, 2));
            let plain = oavi_fit(
                &x,
                &OaviConfig::new(0.01, 1000.0, SolverKind::Agd, Mode::Plain).exact(1e-9),
            )
            .unwrap();
            let ihb = oavi_fit(
                &x,
                &OaviConfig::new(0.01, 1000.0, SolverKind::Agd, Mode::Ihb).exact(1e-9),
            )
            .unwrap();
            assert_eq!(plain.o, ihb.o);
            assert_eq!(plain.g.len(), ihb.g.len());
        }
    }

    #[test]
    fn generators_respect_psi_and_tau() {
        let x = cols(&random_points(3, 60, 2));
        for (solver, mode) in [
            (SolverKind::Cg, Mode::Ihb),
            (SolverKind::Cg, Mode::Plain),
            (SolverKind::Pcg, Mode::Wihb),
            (SolverKind::Bpcg, Mode::Wihb),
            (SolverKind::Bpcg, Mode::Plain),
        ] {
            let model = oavi_fit(&x, &OaviConfig::new(0.01, 20.0, solver, mode)).unwrap();
            let values = model.evaluate(&x).unwrap();
            for (p, v) in model.g.iter().zip(&values) {
                assert!(crate::linalg::mse(v).unwrap() <= 0.01, "{solver}/{mode}");
                assert!(p.l1_norm() <= 20.0 + 1e-9);
            }
        }
    }

    #[test]
    fn small_tau_switches_boosting_off() {
        let x = cols(&random_points(8, 50, 2));
        let report =
            oavi_fit_report(&x, &OaviConfig::new(0.001, 2.0, SolverKind::Cg, Mode::Ihb)).unwrap();
        assert!(report.model.ihb_active_until.is_some());
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("infeasible"));
        let report = oavi_fit_report(
            &x,
            &OaviConfig::new(0.001, 2.0, SolverKind::Bpcg, Mode::Wihb),
        )
        .unwrap();
        assert!(report.model.ihb_active_until.is_some());
    }

    #[test]
    fn json_round_trip() {
        let x = cols(&random_points(2, 30, 2));
        let model = oavi_fit(&x, &OaviConfig::new(0.01, 100.0, SolverKind::Cg, Mode::Ihb)).unwrap();
        let back = GeneratorModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let bad = model
            .to_json()
            .unwrap()
            .replace(MODEL_SCHEMA, "vanish-kit/model/v0");
        assert!(matches!(
            GeneratorModel::from_json(&bad),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn parameter_errors() {
        let x = cols(&[vec![0.5]]);
        let bad = [
            OaviConfig::new(0.0, 10.0, SolverKind::Cg, Mode::Plain),
            OaviConfig::new(0.1, 1.5, SolverKind::Cg, Mode::Plain),
            OaviConfig::new(0.1, 10.0, SolverKind::Bpcg, Mode::Ihb),
            OaviConfig::new(0.1, 10.0, SolverKind::Pcg, Mode::Ihb),
            OaviConfig::new(0.1, 10.0, SolverKind::Cg, Mode::Wihb),
            OaviConfig::new(0.1, 10.0, SolverKind::Agd, Mode::Wihb),
        ];
        for cfg in bad {
            assert!(
                matches!(oavi_fit(&x, &cfg), Err(Error::Parameter(_))),
                "{cfg:?}"
            );
        }
        assert!("newton".parse::<SolverKind>().is_err());
        assert_eq!("bpcg".parse::<SolverKind>().unwrap(), SolverKind::Bpcg);
        assert_eq!("wihb".parse::<Mode>().unwrap(), Mode::Wihb);
    }

    #[test]
    fn unscaled_input_is_rejected() {
        let x = cols(&[vec![0.5], vec![1.5]]);
        let err =
            oavi_fit(&x, &OaviConfig::new(0.1, 10.0, SolverKind::Cg, Mode::Plain)).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn psi_at_least_one_warns() {
        let x = cols(&[vec![0.5], vec![0.2]]);
        let report =
            oavi_fit_report(&x, &OaviConfig::new(1.0, 10.0, SolverKind::Cg, Mode::Plain)).unwrap();
        assert!(report.warnings.iter().any(|w| w.contains("degree bound")));
        assert_eq!(report.model.o.len(), 1);
    }

    #[test]
    fn trace_records_iterates() {
        let x = cols(&random_points(5, 20, 1));
        let mut cfg = OaviConfig::new(0.01, 10.0, SolverKind::Bpcg, Mode::Plain);
        cfg.trace = true;
        let report = oavi_fit_report(&x, &cfg).unwrap();
        assert!(!report.trace.is_empty());
        assert!(report.trace.len() >= report.stats.solver_calls);
        assert!(report
            .trace
            .iter()
            .all(|r| r.solver == SolverKind::Bpcg && r.gap >= 0.0));
    }

    #[test]
    fn max_degree_caps_the_run() {
        let x = cols(&random_points(6, 30, 2));
        let mut cfg = OaviConfig::new(1e-6, 1000.0, SolverKind::Agd, Mode::Ihb);
        cfg.max_degree = Some(2);
        let model = oavi_fit(&x, &cfg).unwrap();
        assert_eq!(model.max_degree_reached, 2);
        assert!(model.o.iter().all(|u| u.degree() <= 2));
    }
}

//! Constrained elastic-energy minimization for a closing finger.
//!
//! The finger configuration under a held tendon excursion is the minimizer of
//! the joint elastic energy subject to the tendon take-up inequality
//! r_p·Δθp + r_d·Δθd ≥ excursion (the inextensible tendon cannot stretch, but
//! it can go slack) and non-penetration inequalities against the scenario
//! obstacles. The problem is two-dimensional, the energy is quadratic apart
//! from the smooth one-sided travel-limit term, and the constraints are
//! smooth, so an active-set Newton iteration on the KKT system suffices.
//! Contact normal forces and the tendon tension are the constraint
//! multipliers; elastic (padded) surfaces enter as compliant rows
//! c(q) + λ/k = 0, so their multipliers are the pad forces and their
//! penetrations the pad compressions.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finger::{
    elastic_energy_gradient, planar_link_point, planar_link_point_jacobian, ContactLink,
    ContactRecord, FingerParams, FingerState, GraspPhase,
};

/// Geometric obstacle in the finger plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleGeometry {
    /// Feasible side satisfies normal·p ≥ offset.
    HalfPlane { normal: [f64; 2], offset: f64 },
    Circle { center: [f64; 2], radius: f64 },
}

/// Contact surface model. `Rigid` is a unilateral constraint with zero
/// penetration; `Elastic` stores energy ½k·penetration² and reports the
/// penalty force, which models a compliant pad layer on the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surface {
    Rigid,
    Elastic { stiffness: f64 },
}

/// One obstacle paired with the single link it may touch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub geometry: ObstacleGeometry,
    pub link: ContactLink,
    pub surface: Surface,
}

impl Obstacle {
    pub fn rigid(geometry: ObstacleGeometry, link: ContactLink) -> Self {
        Obstacle {
            geometry,
            link,
            surface: Surface::Rigid,
        }
    }

    /// Signed clearance between this obstacle and its link at planar joint
    /// angles (θp, θd); negative means penetration.
    pub fn clearance(&self, params: &FingerParams, theta_proximal: f64, theta_distal: f64) -> f64 {
        eval_gap(params, [theta_proximal, theta_distal], self).value
    }
}

/// A single equilibrium problem: one finger, one excursion, a set of
/// obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProblem {
    pub params: FingerParams,
    /// Tendon take-up, mm.
    pub tendon_excursion: f64,
    pub obstacles: Vec<Obstacle>,
    /// Convergence threshold on the projected-gradient (KKT stationarity)
    /// norm.
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl EquilibriumProblem {
    pub fn new(params: FingerParams, tendon_excursion: f64) -> Self {
        EquilibriumProblem {
            params,
            tendon_excursion,
            obstacles: Vec::new(),
            solver_tolerance: 1e-8,
            max_iterations: 500,
        }
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Obstacle>) -> Self {
        self.obstacles = obstacles;
        self
    }

    fn validate(&self) -> Result<(), SolveError> {
        self.params.validate().map_err(|e| SolveError::InvalidProblem {
            message: e.to_string(),
        })?;
        if !(self.solver_tolerance > 0.0) {
            return Err(SolveError::InvalidProblem {
                message: "solver_tolerance must be > 0".into(),
            });
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidProblem {
                message: "max_iterations must be ≥ 1".into(),
            });
        }
        if !self.tendon_excursion.is_finite() || self.tendon_excursion < 0.0 {
            return Err(SolveError::InvalidProblem {
                message: "tendon_excursion must be finite and ≥ 0".into(),
            });
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if let ObstacleGeometry::Circle { center, radius } = &obs.geometry {
                if !(*radius > 0.0) {
                    return Err(SolveError::InvalidProblem {
                        message: format!("obstacles[{i}].radius must be > 0"),
                    });
                }
                // An object overlapping the finger base leaves no feasible
                // configuration.
                if Vector2::new(center[0], center[1]).norm() <= *radius {
                    return Err(SolveError::InfeasibleGeometry {
                        reason: format!("obstacles[{i}] overlaps the finger base"),
                    });
                }
            }
            if let Surface::Elastic { stiffness } = obs.surface {
                if !(stiffness > 0.0) {
                    return Err(SolveError::InvalidProblem {
                        message: format!("obstacles[{i}].surface.stiffness must be > 0"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Which constraints held at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveConstraint {
    Tendon,
    Contact { obstacle: usize },
    TravelLimit,
}

/// Converged solution of an [`EquilibriumProblem`].
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub state: FingerState,
    /// Total stored elastic energy: joint springs, travel-limit penalty and
    /// elastic-surface compression, N·mm.
    pub energy: f64,
    pub active_constraints: Vec<ActiveConstraint>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("infeasible geometry: {reason}")]
    InfeasibleGeometry { reason: String },
    #[error("invalid problem: {message}")]
    InvalidProblem { message: String },
}

/// A solver error tagged with the trajectory sample where it occurred.
#[derive(Debug, Clone, Error)]
#[error("trajectory sample {index} (excursion {excursion} mm): {source}")]
pub struct TrajectoryError {
    pub index: usize,
    pub excursion: f64,
    #[source]
    pub source: SolveError,
}

/// Gap evaluation for one obstacle at configuration q.
#[derive(Debug, Clone)]
pub(crate) struct GapEval {
    pub value: f64,
    pub grad: Vector2<f64>,
    pub link: ContactLink,
    /// Arc position of the touching point along its link, mm.
    pub location: f64,
    /// Unit normal pointing from the obstacle towards the finger.
    pub normal: Vector2<f64>,
}

fn link_span(params: &FingerParams, link: ContactLink) -> f64 {
    match link {
        ContactLink::Proximal => params.proximal_length,
        ContactLink::Distal => params.distal_length,
        ContactLink::Fingertip => params.distal_length,
    }
}

/// Signed clearance between an obstacle and its link, with gradient.
pub(crate) fn eval_gap(
    params: &FingerParams,
    q: [f64; 2],
    obstacle: &Obstacle,
) -> GapEval {
    let link = obstacle.link;
    match &obstacle.geometry {
        ObstacleGeometry::HalfPlane { normal, offset } => {
            let n = Vector2::new(normal[0], normal[1]).normalize();
            let arcs: &[f64] = match link {
                // Linear gap over a segment attains its minimum at an
                // endpoint; on ties the more distal point wins.
                ContactLink::Proximal | ContactLink::Distal => &[0.0, link_span(params, link)],
                ContactLink::Fingertip => &[params.distal_length],
            };
            let mut best: Option<(f64, f64)> = None;
            for &s in arcs {
                let p = planar_link_point(params, q, link, s);
                let g = n.dot(&p) - offset;
                let better = match best {
                    None => true,
                    Some((bg, bs)) => g < bg - 1e-12 || ((g - bg).abs() <= 1e-12 && s > bs),
                };
                if better {
                    best = Some((g, s));
                }
            }
            let (value, s) = best.unwrap();
            let jac = planar_link_point_jacobian(params, q, link, s);
            GapEval {
                value,
                grad: Vector2::new(n.dot(&jac[0]), n.dot(&jac[1])),
                link,
                location: s,
                normal: n,
            }
        }
        ObstacleGeometry::Circle { center, radius } => {
            let c = Vector2::new(center[0], center[1]);
            let span = link_span(params, link);
            let (a, s) = match link {
                ContactLink::Proximal => (Vector2::zeros(), {
                    let u = planar_link_point(params, q, link, span) / span;
                    (c.dot(&u)).clamp(0.0, span)
                }),
                ContactLink::Distal => {
                    let a = planar_link_point(params, q, link, 0.0);
                    let b = planar_link_point(params, q, link, span);
                    let u = (b - a) / span;
                    (a, ((c - a).dot(&u)).clamp(0.0, span))
                }
                ContactLink::Fingertip => (planar_link_point(params, q, link, 0.0), span),
            };
            let x = match link {
                ContactLink::Proximal => planar_link_point(params, q, link, s),
                _ => {
                    let b = planar_link_point(params, q, ContactLink::Distal, span);
                    a + (b - a) * (s / span)
                }
            };
            let v = x - c;
            let dist = v.norm().max(1e-12);
            let normal = v / dist;
            // Envelope: the derivative of the clamped closest-point parameter
            // does not enter because v ⊥ link direction at an interior
            // optimum.
            let jac = planar_link_point_jacobian(params, q, link, s);
            GapEval {
                value: dist - radius,
                grad: Vector2::new(normal.dot(&jac[0]), normal.dot(&jac[1])),
                link,
                location: s,
                normal,
            }
        }
    }
}

/// Central finite difference of the analytic gap gradient; the curvature of
/// the gap feeds the Lagrangian Hessian.
pub(crate) fn gap_hessian_fd(
    params: &FingerParams,
    q: [f64; 2],
    obstacle: &Obstacle,
) -> Matrix2<f64> {
    let h = 1e-6;
    let mut out = Matrix2::zeros();
    for i in 0..2 {
        let mut hi = q;
        let mut lo = q;
        hi[i] += h;
        lo[i] -= h;
        let ghi = eval_gap(params, hi, obstacle).grad;
        let glo = eval_gap(params, lo, obstacle).grad;
        let col = (ghi - glo) / (2.0 * h);
        out[(0, i)] = col[0];
        out[(1, i)] = col[1];
    }
    // Symmetrize away finite-difference noise.
    0.5 * (out + out.transpose())
}

struct Potential<'a> {
    problem: &'a EquilibriumProblem,
}

impl Potential<'_> {
    /// Joint-spring and travel-limit energy; pad compression energy is
    /// accounted through the constraint multipliers.
    fn value(&self, q: [f64; 2]) -> f64 {
        let p = &self.problem.params;
        let state = planar_state(p, q, self.problem.tendon_excursion);
        crate::finger::elastic_energy(p, &state)
    }

    /// Total stored elastic energy including pad compression.
    fn total_energy(&self, q: [f64; 2]) -> f64 {
        let p = &self.problem.params;
        let mut u = self.value(q);
        for obs in &self.problem.obstacles {
            if let Surface::Elastic { stiffness } = obs.surface {
                let pen = (-eval_gap(p, q, obs).value).max(0.0);
                u += 0.5 * stiffness * pen * pen;
            }
        }
        u
    }

    fn gradient(&self, q: [f64; 2]) -> Vector2<f64> {
        let p = &self.problem.params;
        let state = planar_state(p, q, self.problem.tendon_excursion);
        let g = elastic_energy_gradient(p, &state);
        Vector2::new(g[0], g[1])
    }

    fn hessian(&self, q: [f64; 2]) -> Matrix2<f64> {
        let p = &self.problem.params;
        let mut h = Matrix2::new(p.k_proximal, 0.0, 0.0, p.k_distal_bend);
        if q[1] > p.travel_limit_distal {
            h[(1, 1)] += p.travel_limit_stiffness;
        }
        h
    }
}

fn planar_state(_params: &FingerParams, q: [f64; 2], excursion: f64) -> FingerState {
    FingerState {
        theta_proximal: q[0],
        theta_distal: q[1],
        twist_distal: 0.0,
        tendon_excursion: excursion,
        tendon_tension: 0.0,
        phase: GraspPhase::Sweep,
        contacts: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    Tendon,
    Contact(usize),
}

/// Constraint compliance: 0 for the tendon and rigid surfaces, 1/stiffness
/// for elastic surfaces. An active elastic row satisfies c(q) + λ/k = 0, so
/// its multiplier is the pad force and its penetration the pad compression.
fn constraint_compliance(problem: &EquilibriumProblem, c: Constraint) -> f64 {
    match c {
        Constraint::Tendon => 0.0,
        Constraint::Contact(i) => match problem.obstacles[i].surface {
            Surface::Rigid => 0.0,
            Surface::Elastic { stiffness } => 1.0 / stiffness,
        },
    }
}

struct ConstraintEval {
    value: f64,
    grad: Vector2<f64>,
    curvature: Matrix2<f64>,
}

fn eval_constraint(problem: &EquilibriumProblem, q: [f64; 2], c: Constraint) -> ConstraintEval {
    match c {
        Constraint::Tendon => {
            let p = &problem.params;
            let value = p.r_proximal * (q[0] - p.rest_angles[0])
                + p.r_distal * (q[1] - p.rest_angles[1])
                - problem.tendon_excursion;
            ConstraintEval {
                value,
                grad: Vector2::new(p.r_proximal, p.r_distal),
                curvature: Matrix2::zeros(),
            }
        }
        Constraint::Contact(i) => {
            let obs = &problem.obstacles[i];
            let gap = eval_gap(&problem.params, q, obs);
            ConstraintEval {
                value: gap.value,
                grad: gap.grad,
                curvature: gap_hessian_fd(&problem.params, q, obs),
            }
        }
    }
}

/// Closed-form free-closing minimizer used as the cold start:
/// Δθi = λ·r_i/k_i with λ = excursion/(r_p²/k_p + r_d²/k_d).
fn free_closing_closed_form(params: &FingerParams, excursion: f64) -> ([f64; 2], f64) {
    let d = params.r_proximal.powi(2) / params.k_proximal
        + params.r_distal.powi(2) / params.k_distal_bend;
    let lambda = excursion / d;
    (
        [
            params.rest_angles[0] + lambda * params.r_proximal / params.k_proximal,
            params.rest_angles[1] + lambda * params.r_distal / params.k_distal_bend,
        ],
        lambda,
    )
}

struct NewtonOutcome {
    q: [f64; 2],
    multipliers: Vec<f64>,
    iterations: usize,
    converged: bool,
    residual: f64,
    singular: bool,
}

/// Newton iteration on the KKT system of the active-set subproblem:
/// stationarity of U(q) − Σμ_j·c_j(q) together with c_j(q) + s_j·μ_j = 0,
/// where s_j is the constraint compliance (zero for rigid rows).
fn newton_equality_solve(
    problem: &EquilibriumProblem,
    potential: &Potential,
    q0: [f64; 2],
    active: &[Constraint],
    iteration_budget: usize,
) -> NewtonOutcome {
    let m = active.len();
    let dim = 2 + m;
    let mut q = q0;
    let mut mu = vec![0.0; m];
    let grad_tol = problem.solver_tolerance;
    let feas_tol = (problem.solver_tolerance * 1e-2).max(1e-12);
    let compliances: Vec<f64> = active
        .iter()
        .map(|&c| constraint_compliance(problem, c))
        .collect();

    let residual = |q: [f64; 2], mu: &[f64]| -> (DVector<f64>, f64, f64) {
        let mut r = DVector::zeros(dim);
        let g = potential.gradient(q);
        let mut stat = g;
        let mut feas: f64 = 0.0;
        for (j, &c) in active.iter().enumerate() {
            let ce = eval_constraint(problem, q, c);
            stat -= mu[j] * ce.grad;
            r[2 + j] = ce.value + compliances[j] * mu[j];
            feas = feas.max(r[2 + j].abs());
        }
        r[0] = stat[0];
        r[1] = stat[1];
        let scale = potential.gradient(q).norm().max(1.0);
        (r, stat.norm() / scale, feas)
    };

    let mut iterations = 0;
    let mut singular = false;
    loop {
        let (r, stat_norm, feas) = residual(q, &mu);
        if stat_norm <= grad_tol && feas <= feas_tol {
            return NewtonOutcome {
                q,
                multipliers: mu,
                iterations,
                converged: true,
                residual: stat_norm.max(feas),
                singular: false,
            };
        }
        if iterations >= iteration_budget {
            return NewtonOutcome {
                q,
                multipliers: mu,
                iterations,
                converged: false,
                residual: stat_norm.max(feas),
                singular,
            };
        }
        iterations += 1;

        // KKT matrix: [∇²L  −Cᵀ; C  S] with S = diag(compliances).
        let mut hl = potential.hessian(q);
        let mut rows: Vec<ConstraintEval> = Vec::with_capacity(m);
        for (j, &c) in active.iter().enumerate() {
            let ce = eval_constraint(problem, q, c);
            hl -= mu[j] * ce.curvature;
            rows.push(ce);
        }
        let mut kkt = DMatrix::zeros(dim, dim);
        for i in 0..2 {
            for j in 0..2 {
                kkt[(i, j)] = hl[(i, j)];
            }
        }
        for (j, ce) in rows.iter().enumerate() {
            kkt[(0, 2 + j)] = -ce.grad[0];
            kkt[(1, 2 + j)] = -ce.grad[1];
            kkt[(2 + j, 0)] = ce.grad[0];
            kkt[(2 + j, 1)] = ce.grad[1];
            kkt[(2 + j, 2 + j)] = compliances[j];
        }
        let rhs = -&r;
        let lu = kkt.clone().full_piv_lu();
        let step = match lu.solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                // Regularize once; if the system stays singular the active
                // set is degenerate.
                let mut reg = kkt.clone();
                for i in 0..2 {
                    reg[(i, i)] += 1e-9 * (1.0 + hl.trace().abs());
                }
                match reg.full_piv_lu().solve(&rhs) {
                    Some(s) if s.iter().all(|v| v.is_finite()) => {
                        singular = true;
                        s
                    }
                    _ => {
                        return NewtonOutcome {
                            q,
                            multipliers: mu,
                            iterations,
                            converged: false,
                            residual: r.norm(),
                            singular: true,
                        }
                    }
                }
            }
        };

        // Backtracking line search on the full KKT residual norm.
        let base = r.norm();
        let mut alpha = 1.0;
        for _ in 0..30 {
            let qa = [q[0] + alpha * step[0], q[1] + alpha * step[1]];
            let mua: Vec<f64> = mu
                .iter()
                .enumerate()
                .map(|(j, &v)| v + alpha * step[2 + j])
                .collect();
            let (ra, _, _) = residual(qa, &mua);
            if ra.norm() <= (1.0 - 0.1 * alpha) * base || alpha < 1e-4 {
                q = qa;
                mu = mua;
                break;
            }
            alpha *= 0.5;
        }
    }
}

struct SolveOutcome {
    q: [f64; 2],
    tension: f64,
    contact_multipliers: Vec<(usize, f64)>,
    active: Vec<Constraint>,
    iterations: usize,
}

/// Fallback for snap-through folds: when a link slides off an obstacle
/// edge, the contact branch the Newton iteration is tracking ceases to
/// exist and no nearby feasible configuration remains. The quasi-static
/// outcome is the energy minimum of the feasible region reachable from the
/// rest configuration (the snap cannot carry the finger through an
/// obstacle), located here by a coarse flood-filled grid search and then
/// polished by the active-set iteration.
fn reachable_grid_restart(problem: &EquilibriumProblem) -> Option<[f64; 2]> {
    let params = &problem.params;
    let potential = Potential { problem };
    let n = 200usize;
    let p_range = 1.7;
    let slope = params.r_proximal / params.r_distal;
    let d_range = (1.3 * slope * p_range).max(1.7);
    let (lo_p, hi_p) = (
        params.rest_angles[0] - 0.1,
        params.rest_angles[0] + p_range - 0.1,
    );
    let (lo_d, hi_d) = (
        params.rest_angles[1] - 0.2,
        params.rest_angles[1] + d_range - 0.2,
    );
    let at = |i: usize, j: usize| {
        (
            lo_p + (hi_p - lo_p) * i as f64 / (n - 1) as f64,
            lo_d + (hi_d - lo_d) * j as f64 / (n - 1) as f64,
        )
    };
    let feasible = |i: usize, j: usize| {
        let (tp, td) = at(i, j);
        problem
            .obstacles
            .iter()
            .filter(|o| o.surface == Surface::Rigid)
            .all(|o| eval_gap(params, [tp, td], o).value >= 0.0)
    };
    let cell_of = |v: f64, lo: f64, hi: f64| {
        (((v - lo) / (hi - lo) * (n - 1) as f64).round() as isize).clamp(0, n as isize - 1)
            as usize
    };
    let start = (
        cell_of(params.rest_angles[0], lo_p, hi_p),
        cell_of(params.rest_angles[1], lo_d, hi_d),
    );
    let mut reachable = vec![false; n * n];
    let mut stack = vec![start];
    while let Some((i, j)) = stack.pop() {
        let idx = i * n + j;
        if reachable[idx] || !feasible(i, j) {
            continue;
        }
        reachable[idx] = true;
        if i > 0 {
            stack.push((i - 1, j));
        }
        if i + 1 < n {
            stack.push((i + 1, j));
        }
        if j > 0 {
            stack.push((i, j - 1));
        }
        if j + 1 < n {
            stack.push((i, j + 1));
        }
    }
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 0..n {
        for j in 0..n {
            if !reachable[i * n + j] {
                continue;
            }
            let (tp, td) = at(i, j);
            let tendon = params.r_proximal * (tp - params.rest_angles[0])
                + params.r_distal * (td - params.rest_angles[1])
                - problem.tendon_excursion;
            if tendon < 0.0 {
                continue;
            }
            let e = potential.total_energy([tp, td]);
            if best.map_or(true, |(be, _)| e < be) {
                best = Some((e, [tp, td]));
            }
        }
    }
    best.map(|(_, q)| q)
}

/// Cold starts against obstacles ramp the excursion up from rest so the
/// solver tracks the quasi-statically reachable branch instead of jumping
/// through an obstacle to a lower-energy far-side minimum.
fn active_set_solve(
    problem: &EquilibriumProblem,
    warm: Option<[f64; 2]>,
) -> Result<SolveOutcome, SolveError> {
    if warm.is_none() && !problem.obstacles.is_empty() && problem.tendon_excursion > 0.0 {
        let steps = 10usize;
        let mut q = problem.params.rest_angles;
        let mut iterations = 0usize;
        let mut outcome = None;
        for k in 1..=steps {
            let sub = EquilibriumProblem {
                tendon_excursion: problem.tendon_excursion * k as f64 / steps as f64,
                ..problem.clone()
            };
            let mut out = active_set_solve_single(&sub, q)?;
            q = out.q;
            iterations += out.iterations;
            if k == steps {
                out.iterations = iterations;
                outcome = Some(out);
            }
        }
        return Ok(outcome.unwrap());
    }
    let q0 = warm.unwrap_or_else(|| {
        if problem.obstacles.is_empty() {
            free_closing_closed_form(&problem.params, problem.tendon_excursion).0
        } else {
            problem.params.rest_angles
        }
    });
    active_set_solve_single(problem, q0)
}

fn active_set_solve_single(
    problem: &EquilibriumProblem,
    q_init: [f64; 2],
) -> Result<SolveOutcome, SolveError> {
    let potential = Potential { problem };
    let mut q = q_init;
    let candidates: Vec<usize> = (0..problem.obstacles.len()).collect();
    // Carry contacts that are already closed at the starting configuration,
    // otherwise the first unconstrained Newton step can tunnel through an
    // obstacle and settle on a far-side stationary point the closing motion
    // could never reach.
    let mut active: Vec<Constraint> = vec![Constraint::Tendon];
    for &i in &candidates {
        if eval_gap(&problem.params, q, &problem.obstacles[i]).value <= 1e-6 {
            active.push(Constraint::Contact(i));
        }
    }

    let mut total_iterations = 0;
    let mut fold_restart_used = false;
    let feas_tol = 1e-9;
    let mult_tol = 1e-9;
    let outer_cap = 12 + 4 * (candidates.len() + 1);

    for _ in 0..outer_cap {
        let budget = problem.max_iterations.saturating_sub(total_iterations);
        if budget == 0 {
            return Err(SolveError::NonConvergence {
                iterations: total_iterations,
                residual: f64::NAN,
            });
        }
        let out = newton_equality_solve(problem, &potential, q, &active, budget.min(80));
        total_iterations += out.iterations;
        if !out.converged {
            if out.singular && active.len() > 1 {
                // Degenerate constraint set: drop the weakest multiplier and
                // retry before giving up.
                let weakest = out
                    .multipliers
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                    .map(|(j, _)| j)
                    .unwrap();
                active.remove(weakest);
                continue;
            }
            if !fold_restart_used {
                // Snap-through fold: restart from the lowest-energy feasible
                // configuration reachable from rest. The tendon is often
                // slack there (the snap released the taut branch), so it is
                // only re-seeded when it still binds.
                fold_restart_used = true;
                let Some(restart) = reachable_grid_restart(problem) else {
                    return Err(SolveError::InfeasibleGeometry {
                        reason: "no reachable feasible configuration".into(),
                    });
                };
                q = restart;
                total_iterations += 1;
                active = Vec::new();
                if eval_constraint(problem, q, Constraint::Tendon).value <= 1e-6 {
                    active.push(Constraint::Tendon);
                }
                for &i in &candidates {
                    if eval_gap(&problem.params, q, &problem.obstacles[i]).value <= 1e-6 {
                        active.push(Constraint::Contact(i));
                    }
                }
                continue;
            }
            return Err(SolveError::NonConvergence {
                iterations: total_iterations,
                residual: out.residual,
            });
        }
        q = out.q;

        // Drop the most negative multiplier, if any.
        let mut drop_idx: Option<usize> = None;
        let mut most_negative = -mult_tol;
        for (j, &mu) in out.multipliers.iter().enumerate() {
            if mu < most_negative {
                most_negative = mu;
                drop_idx = Some(j);
            }
        }
        if let Some(j) = drop_idx {
            active.remove(j);
            continue;
        }

        // Add the most violated inactive constraint, if any.
        let mut add: Option<(Constraint, f64)> = None;
        let tendon_active = active.contains(&Constraint::Tendon);
        if !tendon_active {
            let ce = eval_constraint(problem, q, Constraint::Tendon);
            if ce.value < -feas_tol {
                add = Some((Constraint::Tendon, ce.value));
            }
        }
        for &i in &candidates {
            if active.contains(&Constraint::Contact(i)) {
                continue;
            }
            let ce = eval_constraint(problem, q, Constraint::Contact(i));
            if ce.value < -feas_tol && add.map_or(true, |(_, v)| ce.value < v) {
                add = Some((Constraint::Contact(i), ce.value));
            }
        }
        match add {
            Some((c, _)) => {
                // Elastic rows regularize the system; only incompliant rows
                // consume degrees of freedom. Two planar joint angles admit
                // at most two independent rigid equality constraints.
                let rigid_rows = active
                    .iter()
                    .chain(std::iter::once(&c))
                    .filter(|&&a| constraint_compliance(problem, a) == 0.0)
                    .count();
                if rigid_rows > 2 {
                    return Err(SolveError::InfeasibleGeometry {
                        reason: format!(
                            "finger fully constrained before reaching excursion {} mm",
                            problem.tendon_excursion
                        ),
                    });
                }
                active.push(c);
            }
            None => {
                let mut tension = 0.0;
                let mut contact_multipliers = Vec::new();
                for (j, &c) in active.iter().enumerate() {
                    match c {
                        Constraint::Tendon => tension = out.multipliers[j].max(0.0),
                        Constraint::Contact(i) => {
                            contact_multipliers.push((i, out.multipliers[j].max(0.0)))
                        }
                    }
                }
                return Ok(SolveOutcome {
                    q,
                    tension,
                    contact_multipliers,
                    active,
                    iterations: total_iterations.max(1),
                });
            }
        }
    }
    Err(SolveError::NonConvergence {
        iterations: total_iterations,
        residual: f64::NAN,
    })
}

fn assemble_solution(
    problem: &EquilibriumProblem,
    outcome: SolveOutcome,
) -> EquilibriumSolution {
    let params = &problem.params;
    let q = outcome.q;
    let potential = Potential { problem };

    let mut contacts: Vec<ContactRecord> = Vec::new();
    let mut active_constraints: Vec<ActiveConstraint> = Vec::new();
    if outcome.active.contains(&Constraint::Tendon) {
        active_constraints.push(ActiveConstraint::Tendon);
    }
    for &(i, force) in &outcome.contact_multipliers {
        let gap = eval_gap(params, q, &problem.obstacles[i]);
        contacts.push(ContactRecord {
            link: gap.link,
            location: gap.location,
            normal: Vector3::new(gap.normal[0], gap.normal[1], 0.0),
            normal_force: force,
        });
        active_constraints.push(ActiveConstraint::Contact { obstacle: i });
    }
    let travel_engaged = q[1] >= params.travel_limit_distal;
    if travel_engaged {
        active_constraints.push(ActiveConstraint::TravelLimit);
    }

    let contacted_links: std::collections::BTreeSet<u8> = contacts
        .iter()
        .map(|c| match c.link {
            ContactLink::Proximal => 0u8,
            ContactLink::Distal => 1,
            ContactLink::Fingertip => 2,
        })
        .collect();
    let phase = if travel_engaged || contacted_links.len() >= 2 {
        GraspPhase::Closed
    } else if !contacted_links.is_empty() {
        GraspPhase::Cage
    } else {
        GraspPhase::Sweep
    };

    let energy = potential.total_energy(q);
    let state = FingerState {
        theta_proximal: q[0],
        theta_distal: q[1],
        twist_distal: 0.0,
        tendon_excursion: problem.tendon_excursion,
        tendon_tension: outcome.tension,
        phase,
        contacts,
    };
    EquilibriumSolution {
        state,
        energy,
        active_constraints,
        converged: true,
        iterations: outcome.iterations,
    }
}

fn solve(
    problem: &EquilibriumProblem,
    warm: Option<[f64; 2]>,
) -> Result<EquilibriumSolution, SolveError> {
    problem.validate()?;
    let outcome = active_set_solve(problem, warm)?;
    Ok(assemble_solution(problem, outcome))
}

/// Equilibrium of a free-closing finger (no obstacles): the minimizer of the
/// elastic energy on the tendon constraint, matching the closed-form
/// Δθi = λ·r_i/k_i with λ = excursion/(r_p²/k_p + r_d²/k_d) whenever the
/// travel limit stays disengaged.
pub fn solve_free_closing(problem: &EquilibriumProblem) -> Result<EquilibriumSolution, SolveError> {
    if !problem.obstacles.is_empty() {
        return Err(SolveError::InvalidProblem {
            message: "free closing requires an empty obstacle list".into(),
        });
    }
    solve(problem, None)
}

/// Equilibrium against obstacles; contact normal forces are the constraint
/// multipliers.
pub fn solve_contact_equilibrium(
    problem: &EquilibriumProblem,
) -> Result<EquilibriumSolution, SolveError> {
    if problem.obstacles.is_empty() {
        return Err(SolveError::InvalidProblem {
            message: "contact equilibrium requires at least one obstacle".into(),
        });
    }
    solve(problem, None)
}

/// Equilibrium with a caller-provided warm start, used while marching along
/// excursion or object-displacement schedules.
pub(crate) fn solve_warm(
    problem: &EquilibriumProblem,
    warm: Option<[f64; 2]>,
) -> Result<EquilibriumSolution, SolveError> {
    solve(problem, warm)
}

/// One equilibrium per excursion sample, each warm-started from the previous
/// solution. Phase labels are monotone (Sweep → Cage → Closed): once a
/// closing finger has reached a phase it does not regress.
pub fn closing_trajectory(
    problem: &EquilibriumProblem,
    excursion_samples: &[f64],
) -> Result<Vec<EquilibriumSolution>, TrajectoryError> {
    if excursion_samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(TrajectoryError {
            index: 0,
            excursion: f64::NAN,
            source: SolveError::InvalidProblem {
                message: "excursion_samples must be sorted ascending".into(),
            },
        });
    }
    let mut out = Vec::with_capacity(excursion_samples.len());
    let mut warm: Option<[f64; 2]> = None;
    let mut phase_floor = GraspPhase::Sweep;
    for (index, &excursion) in excursion_samples.iter().enumerate() {
        let sub = EquilibriumProblem {
            tendon_excursion: excursion,
            ..problem.clone()
        };
        let mut sol = solve(&sub, warm).map_err(|source| TrajectoryError {
            index,
            excursion,
            source,
        })?;
        warm = Some([sol.state.theta_proximal, sol.state.theta_distal]);
        if sol.state.phase < phase_floor {
            sol.state.phase = phase_floor;
        }
        phase_floor = sol.state.phase;
        out.push(sol);
    }
    Ok(out)
}

/// KKT residual of a solution against its problem: the largest of the
/// stationarity, feasibility and complementarity violations.
pub fn kkt_residual(problem: &EquilibriumProblem, solution: &EquilibriumSolution) -> f64 {
    let potential = Potential { problem };
    let q = [
        solution.state.theta_proximal,
        solution.state.theta_distal,
    ];
    let mut stat = potential.gradient(q);
    let mut worst: f64 = 0.0;

    let tendon = eval_constraint(problem, q, Constraint::Tendon);
    let tension = solution.state.tendon_tension;
    stat -= tension * tendon.grad;
    worst = worst.max((tension * tendon.value).abs());
    worst = worst.max((-tendon.value).max(0.0)); // tendon feasibility

    // Contact records were emitted in the same order as the Contact entries
    // of active_constraints.
    let contact_indices: Vec<usize> = solution
        .active_constraints
        .iter()
        .filter_map(|c| match c {
            ActiveConstraint::Contact { obstacle } => Some(*obstacle),
            _ => None,
        })
        .collect();
    for (rec, &obstacle) in solution.state.contacts.iter().zip(&contact_indices) {
        let ce = eval_constraint(problem, q, Constraint::Contact(obstacle));
        let s_j = constraint_compliance(problem, Constraint::Contact(obstacle));
        stat -= rec.normal_force * ce.grad;
        // Elastic rows trade gap for pad compression: c + λ/k = 0; rigid
        // rows keep exact complementarity and non-penetration.
        if s_j == 0.0 {
            worst = worst.max((rec.normal_force * ce.value).abs());
            worst = worst.max((-ce.value).max(0.0));
        } else {
            worst = worst.max((ce.value + s_j * rec.normal_force).abs());
        }
    }
    worst.max(stat.norm() / potential.gradient(q).norm().max(1.0))
}

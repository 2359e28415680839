//! Dense log-barrier interior-point method for small smooth convex programs
//! whose nonlinear parts are sums of cubic-perspective and inverse-power
//! terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `w · x^3 / t^2`, with `t` a variable or the constant `t_const`.
    PerspCube {
        w: f64,
        x: usize,
        t: Option<usize>,
        t_const: f64,
    },
    /// `c · (Σ a_j z_j + offset)^(−p)`.
    InvPow {
        c: f64,
        lin: Vec<(usize, f64)>,
        offset: f64,
        p: f64,
    },
}

impl Term {
    fn value(&self, z: &[f64]) -> Option<f64> {
        match self {
            Term::PerspCube { w, x, t, t_const } => {
                let tv = t.map_or(*t_const, |i| z[i]);
                (tv > 0.0).then(|| w * z[*x].powi(3) / (tv * tv))
            }
            Term::InvPow { c, lin, offset, p } => {
                let s = lin.iter().map(|(j, a)| a * z[*j]).sum::<f64>() + offset;
                (s > 0.0).then(|| c * s.powf(-p))
            }
        }
    }

    /// Adds `scale · ∇term` into `grad` and `scale · ∇²term` into `hess`.
    fn accumulate(&self, z: &[f64], scale: f64, grad: &mut [f64], hess: Option<&mut DMatrix<f64>>) {
        match self {
            Term::PerspCube { w, x, t, t_const } => {
                let xv = z[*x];
                let tv = t.map_or(*t_const, |i| z[i]);
                let t2 = tv * tv;
                grad[*x] += scale * 3.0 * w * xv * xv / t2;
                if let Some(ti) = t {
                    grad[*ti] -= scale * 2.0 * w * xv.powi(3) / (t2 * tv);
                }
                if let Some(h) = hess {
                    h[(*x, *x)] += scale * 6.0 * w * xv / t2;
                    if let Some(ti) = t {
                        let cross = -scale * 6.0 * w * xv * xv / (t2 * tv);
                        h[(*x, *ti)] += cross;
                        h[(*ti, *x)] += cross;
                        h[(*ti, *ti)] += scale * 6.0 * w * xv.powi(3) / (t2 * t2);
                    }
                }
            }
            Term::InvPow { c, lin, offset, p } => {
                let s = lin.iter().map(|(j, a)| a * z[*j]).sum::<f64>() + offset;
                let d1 = -p * c * s.powf(-p - 1.0);
                for (j, a) in lin {
                    grad[*j] += scale * d1 * a;
                }
                if let Some(h) = hess {
                    let d2 = p * (p + 1.0) * c * s.powf(-p - 2.0);
                    for (i, ai) in lin {
                        for (j, aj) in lin {
                            h[(*i, *j)] += scale * d2 * ai * aj;
                        }
                    }
                }
            }
        }
    }
}

/// `Σ a_j z_j + Σ terms − rhs ≤ 0`. Hard constraints stay enforced in
/// phase I (they define the domain, e.g. non-negativity).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraint {
    pub linear: Vec<(usize, f64)>,
    pub terms: Vec<Term>,
    pub rhs: f64,
    pub hard: bool,
}

impl Constraint {
    pub fn linear(linear: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            linear,
            terms: Vec::new(),
            rhs,
            hard: false,
        }
    }

    /// `−z_j ≤ 0`.
    pub fn nonneg(j: usize) -> Self {
        Self {
            linear: vec![(j, -1.0)],
            terms: Vec::new(),
            rhs: 0.0,
            hard: true,
        }
    }

    pub fn value(&self, z: &[f64]) -> Option<f64> {
        let mut v = self.linear.iter().map(|(j, a)| a * z[*j]).sum::<f64>() - self.rhs;
        for t in &self.terms {
            v += t.value(z)?;
        }
        Some(v)
    }

    pub fn gradient(&self, z: &[f64], n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (j, a) in &self.linear {
            g[*j] += a;
        }
        for t in &self.terms {
            t.accumulate(z, 1.0, &mut g, None);
        }
        g
    }

    fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.linear.iter().map(|(j, _)| *j).collect();
        for t in &self.terms {
            match t {
                Term::PerspCube { x, t, .. } => {
                    s.push(*x);
                    if let Some(ti) = t {
                        s.push(*ti);
                    }
                }
                Term::InvPow { lin, .. } => s.extend(lin.iter().map(|(j, _)| *j)),
            }
        }
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub num_vars: usize,
    pub obj_linear: Vec<(usize, f64)>,
    pub obj_terms: Vec<Term>,
    pub constraints: Vec<Constraint>,
}

impl Problem {
    pub fn objective(&self, z: &[f64]) -> Option<f64> {
        let mut v: f64 = self.obj_linear.iter().map(|(j, a)| a * z[*j]).sum();
        for t in &self.obj_terms {
            v += t.value(z)?;
        }
        Some(v)
    }

    pub fn objective_gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.num_vars];
        for (j, a) in &self.obj_linear {
            g[*j] += a;
        }
        for t in &self.obj_terms {
            t.accumulate(z, 1.0, &mut g, None);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Duality-gap target relative to `max(|f|, gap_floor)`.
    pub rel_gap: f64,
    pub gap_floor: f64,
    pub mu: f64,
    pub max_newton: usize,
    /// Phase-I optimum below which the soft constraints are relaxed by a
    /// few multiples of it instead of declaring infeasibility (feasible
    /// sets with empty interior).
    pub feas_tol: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-8,
            gap_floor: 1.0,
            mu: 12.0,
            max_newton: 2000,
            feas_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub z: Vec<f64>,
    /// One multiplier per constraint, in problem order.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
}

/// Barrier subproblem state: objective weight `t` on `f0`, and which
/// constraints are shifted by the phase-I variable.
struct Barrier<'a> {
    prob: &'a Problem,
    /// Index of the phase-I variable `s`; objective is then `s` alone.
    phase1: Option<usize>,
}

impl Barrier<'_> {
    fn n(&self) -> usize {
        self.prob.num_vars + usize::from(self.phase1.is_some())
    }

    fn f0(&self, z: &[f64]) -> Option<f64> {
        match self.phase1 {
            Some(s) => Some(z[s]),
            None => self.prob.objective(z),
        }
    }

    fn g(&self, c: &Constraint, z: &[f64]) -> Option<f64> {
        let v = c.value(z)?;
        Some(match self.phase1 {
            Some(s) if !c.hard => v - z[s],
            _ => v,
        })
    }

    fn value(&self, z: &[f64], t: f64) -> Option<f64> {
        let mut v = t * self.f0(z)?;
        for c in &self.prob.constraints {
            let g = self.g(c, z)?;
            if !(g < 0.0) {
                return None;
            }
            v -= (-g).ln();
        }
        v.is_finite().then_some(v)
    }

    fn grad_hess(&self, z: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::zeros(n, n);
        match self.phase1 {
            Some(s) => grad[s] += t,
            None => {
                for (j, a) in &self.prob.obj_linear {
                    grad[*j] += t * a;
                }
                for term in &self.prob.obj_terms {
                    term.accumulate(z, t, &mut grad, Some(&mut hess));
                }
            }
        }
        for c in &self.prob.constraints {
            let g = self.g(c, z).expect("iterate in domain");
            let inv = -1.0 / g;
            let mut gc = c.gradient(z, n);
            let mut supp = c.support();
            if let Some(s) = self.phase1 {
                if !c.hard {
                    gc[s] -= 1.0;
                    supp.push(s);
                }
            }
            for &i in &supp {
                grad[i] += inv * gc[i];
            }
            for &i in &supp {
                for &j in &supp {
                    hess[(i, j)] += inv * inv * gc[i] * gc[j];
                }
            }
            for term in &c.terms {
                term.accumulate(z, inv, &mut vec![0.0; n], Some(&mut hess));
            }
        }
        (DVector::from_vec(grad), hess)
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    // Symmetric diagonal scaling first; barrier Hessians span many decades.
    let n = hess.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = hess[(i, i)];
            if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * d[i] * d[j]);
    let rhs = DVector::from_fn(n, |i, _| -grad[i] * d[i]);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut h = scaled.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(DVector::from_fn(n, |i, _| y[i] * d[i]));
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

/// Newton steps spent on one centering before moving on; close to the
/// centre progress is limited by rounding rather than curvature.
const PER_CENTERING: usize = 60;

/// Minimizes the barrier at fixed `t` starting from `z` (strictly
/// feasible). Returns the number of Newton steps, or stops early when
/// `stop` holds for an iterate.
fn center(
    bar: &Barrier,
    z: &mut Vec<f64>,
    t: f64,
    budget: usize,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<(usize, bool)> {
    let mut steps = 0;
    let mut phi = bar.value(z, t).ok_or_else(|| Error::Domain("start point outside the domain".into()))?;
    loop {
        if stop(z) {
            return Ok((steps, true));
        }
        if steps >= budget {
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: f64::NAN,
            });
        }
        let (grad, hess) = bar.grad_hess(z, t);
        let Some(dir) = newton_direction(&hess, &grad) else {
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: f64::NAN,
            });
        };
        let dec = -grad.dot(&dir);
        if dec / 2.0 <= 1e-10 || steps >= PER_CENTERING {
            return Ok((steps, false));
        }
        steps += 1;
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..80 {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if trial == *z {
                break;
            }
            if let Some(v) = bar.value(&trial, t) {
                // Close to the centre the barrier value is swamped by
                // rounding in `t f0`; take the (domain-safe) Newton step.
                let noise = 1e-12 * (phi.abs() + 1.0);
                if v <= phi - 0.25 * step * dec + noise {
                    *z = trial;
                    phi = v;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            // Decrement too small to resolve in floating point.
            return Ok((steps, false));
        }
    }
}

fn run_barrier(
    bar: &Barrier,
    z: &mut Vec<f64>,
    opts: &IpmOptions,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<(f64, usize, bool)> {
    let m = bar.prob.constraints.len() as f64;
    let f_init = bar.f0(z).unwrap_or(1.0).abs();
    let mut t = m / (f_init.max(opts.gap_floor));
    let mut total = 0;
    loop {
        let (steps, stopped) = center(bar, z, t, opts.max_newton.saturating_sub(total), stop)?;
        total += steps;
        if stopped {
            return Ok((t, total, true));
        }
        let f = bar.f0(z).unwrap_or(f64::NAN).abs();
        if m / t <= opts.rel_gap * f.max(opts.gap_floor) {
            return Ok((t, total, false));
        }
        t *= opts.mu;
    }
}

/// Solves `prob` from a start point satisfying the hard constraints
/// strictly. A phase-I problem `min s : g_i <= s` finds an interior point;
/// `Infeasible` is returned when its optimum is non-negative.
pub fn solve(prob: &Problem, start: &[f64], opts: &IpmOptions) -> Result<IpmResult> {
    let n = prob.num_vars;
    assert_eq!(start.len(), n);
    let mut z = start.to_vec();
    for c in prob.constraints.iter().filter(|c| c.hard) {
        match c.value(&z) {
            Some(v) if v < 0.0 => {}
            _ => return Err(Error::Domain("start point violates a hard constraint".into())),
        }
    }
    let soft_max = prob
        .constraints
        .iter()
        .filter(|c| !c.hard)
        .map(|c| c.value(&z).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut steps = 0;
    let mut relaxed: Option<Problem> = None;
    if !(soft_max < 0.0) {
        if !soft_max.is_finite() {
            return Err(Error::Domain("start point outside the domain".into()));
        }
        let bar = Barrier {
            prob,
            phase1: Some(n),
        };
        z.push(soft_max + 0.1 * (1.0 + soft_max.abs()));
        let strictly_feasible = |w: &[f64]| {
            prob.constraints
                .iter()
                .filter(|c| !c.hard)
                .all(|c| c.value(w).is_some_and(|v| v < 0.0))
        };
        let p1_opts = IpmOptions {
            rel_gap: 1e-12,
            gap_floor: 1.0,
            ..*opts
        };
        let (_, s_steps, found) = run_barrier(&bar, &mut z, &p1_opts, &strictly_feasible)?;
        steps += s_steps;
        let s_star = z[n];
        z.truncate(n);
        if !found {
            if s_star > opts.feas_tol {
                return Err(Error::Infeasible {
                    reason: format!("no strictly feasible point (phase-I optimum {s_star:.3e})"),
                    required: None,
                });
            }
            let shift = 2.0 * s_star.max(0.0) + opts.feas_tol;
            let mut p = prob.clone();
            for c in p.constraints.iter_mut().filter(|c| !c.hard) {
                c.rhs += shift;
            }
            relaxed = Some(p);
        }
    }
    let prob = relaxed.as_ref().unwrap_or(prob);
    let bar = Barrier { prob, phase1: None };
    let (t, s2, _) = run_barrier(&bar, &mut z, opts, &|_| false)?;
    steps += s2;
    let barrier_duals: Vec<f64> = prob
        .constraints
        .iter()
        .map(|c| 1.0 / (-t * c.value(&z).expect("interior")))
        .collect();
    let duals = polish_duals(prob, &z, barrier_duals);
    let objective = prob.objective(&z).expect("interior");
    Ok(IpmResult {
        z,
        duals,
        objective,
        newton_steps: steps,
    })
}

/// Barrier multipliers `1/(−t g)` lose digits when `g` is a small difference
/// of O(1) numbers. Re-fit the clearly active ones to the stationarity
/// equations by ridge least squares anchored at the barrier values.
fn polish_duals(prob: &Problem, z: &[f64], duals: Vec<f64>) -> Vec<f64> {
    let n = prob.num_vars;
    let umax = duals.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..duals.len()).filter(|&i| duals[i] > 1e-6 * umax).collect();
    if active.is_empty() {
        return duals;
    }
    let grads: Vec<Vec<f64>> = prob.constraints.iter().map(|c| c.gradient(z, n)).collect();
    let mut r = prob.objective_gradient(z);
    for (g, u) in grads.iter().zip(&duals) {
        for i in 0..n {
            r[i] += u * g[i];
        }
    }
    let a = active.len();
    let gmat = DMatrix::from_fn(n, a, |i, j| grads[active[j]][i]);
    let mut normal = gmat.transpose() * &gmat;
    let trace = (0..a).map(|j| normal[(j, j)]).sum::<f64>() / a as f64;
    for j in 0..a {
        normal[(j, j)] += 1e-12 * trace.max(f64::MIN_POSITIVE);
    }
    let rhs = -(gmat.transpose() * DVector::from_vec(r));
    let Some(delta) = normal.cholesky().map(|c| c.solve(&rhs)) else {
        return duals;
    };
    let mut polished = duals.clone();
    for (j, &i) in active.iter().enumerate() {
        polished[i] = (duals[i] + delta[j]).max(0.0);
    }
    if kkt_residual(prob, z, &polished) < kkt_residual(prob, z, &duals) {
        polished
    } else {
        duals
    }
}

/// Largest KKT violation: stationarity (relative to the objective gradient
/// scale), primal infeasibility, negative multipliers, and complementary
/// slackness.
pub fn kkt_residual(prob: &Problem, z: &[f64], duals: &[f64]) -> f64 {
    let n = prob.num_vars;
    let g0 = prob.objective_gradient(z);
    let scale = g0.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut stat = g0.clone();
    let mut worst = 0.0f64;
    for (c, u) in prob.constraints.iter().zip(duals) {
        let gc = c.gradient(z, n);
        for i in 0..n {
            stat[i] += u * gc[i];
        }
        let g = c.value(z).unwrap_or(f64::INFINITY);
        worst = worst.max(g.max(0.0)).max((-u).max(0.0)).max((u * g).abs());
    }
    let stat_norm = stat.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
    worst.max(stat_norm)
}

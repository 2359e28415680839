//! CPU-frequency allocation for a fixed schedule and fixed slot durations.
//!
//! Task `n` (the `n`-th arrival) may be processed in compute slots
//! `n+1..=K+1`. The allocator minimizes `Σ κ f_{n,m}^3 Δt_m` subject to the
//! per-slot capacity `Σ_n f_{n,m} <= F_max` and per-task completion
//! `Σ_m f_{n,m} Δt_m >= F_n`.
//!
//! The optimum has a rigid shape: every row is constant up to a common
//! *transition slot*, after which capacity binds in every remaining slot
//! and rows decrease (possibly to zero). The transition slot is found in
//! closed form; only the capacity prices of binding slots and the task
//! prices need iteration. Capacity prices are found by bisection on the
//! per-slot capacity equation, task prices by a projected Newton-scaled
//! dual step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::TimeAllocation;

/// Dense storage for quantities indexed by arrival order `n in 1..=K` and
/// slot `m in 0..=K+1`; only `m > n` is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SlotMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            data: vec![0.0; k * (k + 2)],
        }
    }

    pub fn num_tasks(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn at(&self, n: usize, m: usize) -> f64 {
        debug_assert!(n >= 1 && n <= self.k && m > n && m <= self.k + 1);
        self.data[(n - 1) * (self.k + 2) + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        debug_assert!(n >= 1 && n <= self.k && m > n && m <= self.k + 1);
        self.data[(n - 1) * (self.k + 2) + m] = v;
    }

    /// `(n, m)` pairs in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let k = self.k;
        (1..=k).flat_map(move |n| (n + 1..=k + 1).map(move |m| (n, m)))
    }

    pub fn row_sum(&self, n: usize) -> f64 {
        (n + 1..=self.k + 1).map(|m| self.at(n, m)).sum()
    }

    pub fn col_sum(&self, m: usize) -> f64 {
        (1..m.min(self.k + 1)).map(|n| self.at(n, m)).sum()
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(self.k);
        for (n, m) in self.indices() {
            out.set(n, m, f(n, m, self.at(n, m)));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Frequencies `f_{n,m}` in Hz.
pub type FrequencyPlan = SlotMatrix;

/// Multipliers of the capacity (`alpha`, indexed by slot, zero for slots
/// 0 and 1) and completion (`beta`, indexed by `n - 1`) constraints.
/// With these, `f_{n,m} = sqrt([β_n/(3κ) − α_m/(3κΔt_m)]^+)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqDuals {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FreqDuals {
    pub fn zeros(k: usize) -> Self {
        Self {
            alpha: vec![0.0; k + 2],
            beta: vec![0.0; k],
        }
    }

    /// `α_m / Δt_m`, the per-slot price in the same units as `β`.
    pub fn alpha_rate(&self, m: usize, dt: &TimeAllocation) -> f64 {
        if dt[m] > 0.0 {
            self.alpha[m] / dt[m]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionVerdict {
    NoTransition,
    /// First slot at which capacity binds and every running task slows down.
    TransitionAt(usize),
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocOptions {
    /// Bisection bracket width relative to the bracket's upper end.
    pub eps0: f64,
    /// Relative completion residual at which the task prices are accepted.
    pub eps1: f64,
    pub max_iter: usize,
}

impl Default for AllocOptions {
    fn default() -> Self {
        Self {
            eps0: 1e-13,
            eps1: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FreqAllocation {
    pub plan: FrequencyPlan,
    pub duals: FreqDuals,
    pub energy: f64,
    pub transition: TransitionVerdict,
    pub iterations: usize,
    /// Bisection calls performed, a proxy for work done.
    pub bisections: usize,
}

fn check_shapes(cycles: &[f64], dt: &TimeAllocation) -> Result<usize> {
    let k = cycles.len();
    if k == 0 || dt.dt.len() != k + 2 {
        return Err(Error::Domain(format!(
            "expected {} slot durations for {k} tasks, got {}",
            k + 2,
            dt.dt.len()
        )));
    }
    if cycles.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Domain("cycles must be finite and non-negative".into()));
    }
    Ok(k)
}

/// Compute time available to task `n`: `Σ_{m=n+1}^{K+1} Δt_m`.
fn window(dt: &TimeAllocation, n: usize) -> f64 {
    let k = dt.num_devices();
    dt.dt[n + 1..=k + 1].iter().sum()
}

/// Smallest capacity for which the allocation problem is feasible:
/// `max_n (Σ_{i>=n} F_i) / (Σ_{m=n+1}^{K+1} Δt_m)`.
pub fn required_fmax(cycles: &[f64], dt: &TimeAllocation) -> Result<f64> {
    let k = check_shapes(cycles, dt)?;
    let mut best = 0.0f64;
    let mut tail_cycles = 0.0;
    let mut tail_time = 0.0;
    for n in (1..=k).rev() {
        tail_cycles += cycles[n - 1];
        tail_time += dt[n + 1];
        if tail_cycles > 0.0 {
            if tail_time <= 0.0 {
                return Err(Error::Infeasible {
                    reason: format!("tasks from arrival {n} on have no compute time"),
                    required: Some(f64::INFINITY),
                });
            }
            best = best.max(tail_cycles / tail_time);
        }
    }
    Ok(best)
}

/// `ℱ(i) = Σ_{n=1}^{i-2} F_n / W_n + (Σ_{n>=i-1} F_n) / (Σ_{m>=i} Δt_m)` for
/// `2 <= i <= K+1`, where `W_n` is task `n`'s compute window.
pub fn transition_thresholds(cycles: &[f64], dt: &TimeAllocation) -> Result<Vec<f64>> {
    let k = check_shapes(cycles, dt)?;
    let mut out = vec![0.0; k + 2];
    for i in 2..=k + 1 {
        let mut v = 0.0;
        for n in 1..=i.saturating_sub(2) {
            let w = window(dt, n);
            if cycles[n - 1] > 0.0 {
                v += cycles[n - 1] / w;
            }
        }
        let tail: f64 = cycles[i - 2..].iter().sum();
        let time: f64 = dt.dt[i..=k + 1].iter().sum();
        if tail > 0.0 {
            v += tail / time;
        }
        out[i] = v;
    }
    Ok(out)
}

/// Capacity regime located with the thresholds `ℱ`. Only `ℱ(K+1)` is an
/// exact boundary: the intermediate thresholds can sit above the capacities
/// at which the optimum actually switches, so `TransitionAt(i)` may name a
/// slot earlier than the first decreasing one in the optimal plan.
pub fn transition_point(cycles: &[f64], dt: &TimeAllocation, f_max: f64) -> Result<TransitionVerdict> {
    let k = check_shapes(cycles, dt)?;
    let required = match required_fmax(cycles, dt) {
        Ok(r) => r,
        Err(Error::Infeasible { .. }) => return Ok(TransitionVerdict::Infeasible),
        Err(e) => return Err(e),
    };
    if f_max < required {
        return Ok(TransitionVerdict::Infeasible);
    }
    let thr = transition_thresholds(cycles, dt)?;
    if f_max >= thr[k + 1] {
        return Ok(TransitionVerdict::NoTransition);
    }
    for i in 3..=k + 1 {
        if thr[i - 1] <= f_max && f_max < thr[i] {
            return Ok(TransitionVerdict::TransitionAt(i));
        }
    }
    // Feasible but below ℱ(2) cannot happen since ℱ(2) <= required; keep a
    // safe answer for rounding at the boundary.
    Ok(TransitionVerdict::TransitionAt(3.min(k + 1)))
}

/// Frequencies implied by a dual point.
pub fn primal_from_duals(duals: &FreqDuals, dt: &TimeAllocation, kappa: f64) -> FrequencyPlan {
    let k = duals.beta.len();
    let mut plan = FrequencyPlan::zeros(k);
    for n in 1..=k {
        for m in n + 1..=k + 1 {
            if dt[m] <= 0.0 {
                continue;
            }
            let v = (duals.beta[n - 1] - duals.alpha[m] / dt[m]) / (3.0 * kappa);
            plan.set(n, m, v.max(0.0).sqrt());
        }
    }
    plan
}

/// `G(m, a) = Σ_{n<m} sqrt([β_n − a]^+ / (3κ))` with `a = α_m / Δt_m`.
pub fn slot_load(beta: &[f64], m: usize, rate: f64, kappa: f64) -> f64 {
    beta[..m - 1]
        .iter()
        .map(|b| ((b - rate) / (3.0 * kappa)).max(0.0).sqrt())
        .sum()
}

/// Bisection for the capacity price of slot `m`: returns `α_m` such that
/// `G(m, α_m/Δt_m) = F_max`, searching `α_m/Δt_m` in `[lower, upper]`.
/// The bracket must satisfy `G(lower) >= F_max >= G(upper)`.
#[allow(clippy::too_many_arguments)]
pub fn bisect_alpha(
    m: usize,
    beta: &[f64],
    dt_m: f64,
    f_max: f64,
    kappa: f64,
    lower: f64,
    upper: f64,
    eps0: f64,
) -> Result<f64> {
    if m < 2 || m > beta.len() + 1 {
        return Err(Error::Domain(format!("slot {m} is not a compute slot")));
    }
    let g_lo = slot_load(beta, m, lower, kappa);
    let g_hi = slot_load(beta, m, upper, kappa);
    if !(lower <= upper) || g_lo < f_max || g_hi > f_max {
        return Err(Error::Domain(format!(
            "invalid bracket for slot {m}: G({lower:.6e})={g_lo:.6e}, G({upper:.6e})={g_hi:.6e}, F_max={f_max:.6e}"
        )));
    }
    let (mut lo, mut hi) = (lower, upper);
    let width = eps0 * upper.abs().max(f64::MIN_POSITIVE);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slot_load(beta, m, mid, kappa) > f_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) * dt_m)
}

/// `Σ κ f_{n,m}^3 Δt_m`.
pub fn eval_energy(plan: &FrequencyPlan, dt: &TimeAllocation, kappa: f64) -> f64 {
    plan.indices()
        .map(|(n, m)| {
            let f = plan.at(n, m);
            kappa * f * f * f * dt[m]
        })
        .sum()
}

fn equal_split(cycles: &[f64], dt: &TimeAllocation) -> FrequencyPlan {
    let k = cycles.len();
    let mut plan = FrequencyPlan::zeros(k);
    for n in 1..=k {
        let w = window(dt, n);
        if cycles[n - 1] <= 0.0 || w <= 0.0 {
            continue;
        }
        let f = cycles[n - 1] / w;
        for m in n + 1..=k + 1 {
            if dt[m] > 0.0 {
                plan.set(n, m, f);
            }
        }
    }
    plan
}

struct Workspace<'a> {
    cycles: &'a [f64],
    dt: &'a TimeAllocation,
    f_max: f64,
    kappa: f64,
    first_binding: usize,
    eps0: f64,
    bisections: usize,
}

impl Workspace<'_> {
    fn k(&self) -> usize {
        self.cycles.len()
    }

    /// Capacity prices (`α_m/Δt_m`) of slots `first_binding..=K+1` given task
    /// prices, respecting the non-decreasing order of binding prices.
    fn rates(&mut self, beta: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut rates = vec![0.0; k + 2];
        let mut prev = 0.0f64;
        for m in self.first_binding..=k + 1 {
            if self.dt[m] <= 0.0 {
                continue;
            }
            let upper = beta[..m - 1].iter().cloned().fold(0.0, f64::max);
            if slot_load(beta, m, 0.0, self.kappa) <= self.f_max {
                rates[m] = 0.0;
                continue;
            }
            let lower = if prev <= upper && slot_load(beta, m, prev, self.kappa) >= self.f_max {
                prev
            } else {
                0.0
            };
            self.bisections += 1;
            let alpha = bisect_alpha(m, beta, 1.0, self.f_max, self.kappa, lower, upper, self.eps0)
                .expect("bracket checked above");
            rates[m] = alpha;
            prev = alpha;
        }
        rates
    }

    fn freq(&self, beta: &[f64], rates: &[f64], n: usize, m: usize) -> f64 {
        if self.dt[m] <= 0.0 {
            return 0.0;
        }
        ((beta[n - 1] - rates[m]) / (3.0 * self.kappa)).max(0.0).sqrt()
    }

    /// Completion surplus `Σ_m f Δt − F_n` per task.
    fn residual(&self, beta: &[f64], rates: &[f64]) -> Vec<f64> {
        let k = self.k();
        (1..=k)
            .map(|n| {
                if self.cycles[n - 1] <= 0.0 {
                    return 0.0;
                }
                let done: f64 = (n + 1..=k + 1)
                    .map(|m| self.freq(beta, rates, n, m) * self.dt[m])
                    .sum();
                done - self.cycles[n - 1]
            })
            .collect()
    }

    fn rel_norm(&self, r: &[f64]) -> f64 {
        r.iter()
            .zip(self.cycles)
            .filter(|(_, c)| **c > 0.0)
            .map(|(v, c)| (v / c).abs())
            .fold(0.0, f64::max)
    }

    /// Tasks priced out of every slot of their window have an empty Jacobian
    /// row; reset each one to the price that completes it at the current
    /// slot rates. Returns whether any price changed.
    fn revive(&self, beta: &mut [f64], rates: &[f64]) -> bool {
        let k = self.k();
        let mut changed = false;
        for n in 1..=k {
            let slots: Vec<usize> = (n + 1..=k + 1).filter(|&m| self.dt[m] > 0.0).collect();
            if self.cycles[n - 1] <= 0.0 || slots.iter().any(|&m| self.freq(beta, rates, n, m) > 0.0) {
                continue;
            }
            let work = |b: f64| -> f64 {
                slots
                    .iter()
                    .map(|&m| ((b - rates[m]) / (3.0 * self.kappa)).max(0.0).sqrt() * self.dt[m])
                    .sum()
            };
            let w = window(self.dt, n);
            let mut lo = slots.iter().map(|&m| rates[m]).fold(f64::INFINITY, f64::min);
            let mut hi = slots.iter().map(|&m| rates[m]).fold(0.0, f64::max) + 3.0 * self.kappa * (self.cycles[n - 1] / w).powi(2);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if work(mid) < self.cycles[n - 1] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            beta[n - 1] = hi;
            changed = true;
        }
        changed
    }

    /// Jacobian of the completion surplus w.r.t. task prices, with the
    /// binding capacity prices eliminated (they move to keep `G = F_max`).
    fn reduced_jacobian(&self, beta: &[f64], rates: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let c = 1.0 / (6.0 * self.kappa);
        let mut jac = DMatrix::zeros(k, k);
        for m in 2..=k + 1 {
            if self.dt[m] <= 0.0 {
                continue;
            }
            let active: Vec<(usize, f64)> = (1..m)
                .filter_map(|n| {
                    let f = self.freq(beta, rates, n, m);
                    (f > 0.0 && self.cycles[n - 1] > 0.0).then_some((n, 1.0 / f))
                })
                .collect();
            let binding = rates[m] > 0.0;
            let total_w: f64 = active.iter().map(|(_, w)| w).sum();
            for &(n, wn) in &active {
                let d = self.dt[m] * c * wn;
                jac[(n - 1, n - 1)] += d;
                if binding && total_w > 0.0 {
                    for &(j, wj) in &active {
                        jac[(n - 1, j - 1)] -= d * wj / total_w;
                    }
                }
            }
        }
        for n in 1..=k {
            if self.cycles[n - 1] <= 0.0 {
                for j in 0..k {
                    jac[(n - 1, j)] = 0.0;
                    jac[(j, n - 1)] = 0.0;
                }
                jac[(n - 1, n - 1)] = 1.0;
            }
        }
        jac
    }
}

/// Damped Newton on the task prices; returns prices, slot rates and the
/// iteration count.
fn newton_prices(ws: &mut Workspace<'_>, mut beta: Vec<f64>, opts: &AllocOptions) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let k = ws.k();
    let cycles = ws.cycles;
    let mut rates = ws.rates(&beta);
    let mut resid = ws.residual(&beta, &rates);
    let mut norm = ws.rel_norm(&resid);
    let mut iterations = 0;
    while norm > opts.eps1 {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;

        if ws.revive(&mut beta, &rates) {
            rates = ws.rates(&beta);
            resid = ws.residual(&beta, &rates);
            norm = ws.rel_norm(&resid);
            continue;
        }

        let jac = ws.reduced_jacobian(&beta, &rates);
        let rhs = DVector::from_iterator(k, resid.iter().map(|r| -r));
        let step = jac
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| {
                // Diagonal scaling when the reduced system is singular.
                DVector::from_iterator(
                    k,
                    (0..k).map(|i| {
                        let d = jac[(i, i)];
                        if d > 0.0 { rhs[i] / d } else { 0.0 }
                    }),
                )
            });

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..k)
                .map(|i| {
                    if cycles[i] > 0.0 {
                        (beta[i] + t * step[i]).max(beta[i] * 1e-3)
                    } else {
                        0.0
                    }
                })
                .collect();
            let trial_rates = ws.rates(&trial);
            let trial_resid = ws.residual(&trial, &trial_rates);
            let trial_norm = ws.rel_norm(&trial_resid);
            if trial_norm < norm {
                beta = trial;
                rates = trial_rates;
                resid = trial_resid;
                norm = trial_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No further decrease representable at this precision.
            if norm <= opts.eps1.sqrt() * 1e-2 {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: norm,
            });
        }
    }

    Ok((beta, rates, iterations))
}

/// Optimal frequencies for fixed slot durations.
pub fn allocate_frequencies(
    cycles: &[f64],
    dt: &TimeAllocation,
    f_max: f64,
    kappa: f64,
    opts: &AllocOptions,
) -> Result<FreqAllocation> {
    let k = check_shapes(cycles, dt)?;
    let required = required_fmax(cycles, dt)?;
    if f_max < required {
        return Err(Error::Infeasible {
            reason: format!(
                "server capacity {f_max:.6e} Hz is below the required {required:.6e} Hz"
            ),
            required: Some(required),
        });
    }
    let transition = transition_point(cycles, dt, f_max)?;

    // Task prices start at the equal-split level.
    let beta: Vec<f64> = (1..=k)
        .map(|n| {
            let w = window(dt, n);
            if cycles[n - 1] > 0.0 && w > 0.0 {
                3.0 * kappa * (cycles[n - 1] / w).powi(2)
            } else {
                0.0
            }
        })
        .collect();

    let first_binding = match transition {
        TransitionVerdict::NoTransition => {
            let plan = equal_split(cycles, dt);
            let energy = eval_energy(&plan, dt, kappa);
            return Ok(FreqAllocation {
                plan,
                duals: FreqDuals {
                    alpha: vec![0.0; k + 2],
                    beta,
                },
                energy,
                transition,
                iterations: 0,
                bisections: 0,
            });
        }
        TransitionVerdict::TransitionAt(i) => i,
        TransitionVerdict::Infeasible => unreachable!("feasibility checked above"),
    };

    let mut ws = Workspace {
        cycles,
        dt,
        f_max,
        kappa,
        first_binding,
        eps0: opts.eps0,
        bisections: 0,
    };

    let start = beta.clone();
    let (mut beta, mut rates, mut iterations) = newton_prices(&mut ws, beta, opts)?;
    // The predicted transition slot is never later than the true one in
    // practice; if a pinned slot still ends up overloaded, let every slot bind.
    if ws.first_binding > 2 && (2..ws.first_binding).any(|m| dt[m] > 0.0 && slot_load(&beta, m, 0.0, kappa) > f_max * (1.0 + 1e-9)) {
        ws.first_binding = 2;
        let (b2, r2, it2) = newton_prices(&mut ws, start, opts)?;
        (beta, rates) = (b2, r2);
        iterations += it2;
    }

    let mut duals = FreqDuals { alpha: vec![0.0; k + 2], beta };
    for m in 2..=k + 1 {
        duals.alpha[m] = rates[m] * dt[m];
    }
    let plan = primal_from_duals(&duals, dt, kappa);
    let energy = eval_energy(&plan, dt, kappa);
    Ok(FreqAllocation {
        plan,
        duals,
        energy,
        transition,
        iterations,
        bisections: ws.bisections,
    })
}

/// Observed first slot at which some running task's frequency drops by more
/// than `tol`, or `None` when every row is constant.
pub fn observed_break(plan: &FrequencyPlan, tol: f64) -> Option<usize> {
    let k = plan.num_tasks();
    (3..=k + 1).find(|&m| (1..m - 1).any(|n| plan.at(n, m - 1) - plan.at(n, m) > tol))
}

/// Checks every row is constant, then strictly decreasing, then zero (any
/// phase may be empty), classifying differences with tolerance `tol`.
pub fn row_pattern_ok(plan: &FrequencyPlan, tol: f64) -> bool {
    let k = plan.num_tasks();
    (1..=k).all(|n| {
        #[derive(PartialEq, PartialOrd, Clone, Copy)]
        enum Phase {
            Constant,
            Decreasing,
            Zero,
        }
        let mut phase = Phase::Constant;
        let mut prev = plan.at(n, n + 1);
        if prev <= tol {
            phase = Phase::Zero;
        }
        for m in n + 2..=k + 1 {
            let cur = plan.at(n, m);
            let next = if cur <= tol {
                Phase::Zero
            } else if prev - cur > tol {
                Phase::Decreasing
            } else if (prev - cur).abs() <= tol {
                if phase == Phase::Constant {
                    Phase::Constant
                } else {
                    return false;
                }
            } else {
                return false;
            };
            if next < phase {
                return false;
            }
            phase = next;
            prev = cur;
        }
        true
    })
}

/// Row property: `f_{n,n+1} >= f_{n,n+2} >= ...` within `tol`.
pub fn rows_non_increasing(plan: &FrequencyPlan, tol: f64) -> bool {
    let k = plan.num_tasks();
    (1..=k).all(|n| (n + 2..=k + 1).all(|m| plan.at(n, m) <= plan.at(n, m - 1) + tol))
}

/// Column property: for each adjacent slot pair `(m, m+1)` with `3 <= m <= K`
/// where every task `n < m` still has work in the pair, the shifts
/// `f_{n,m} − f_{n,m+1}` are either all zero or all positive.
pub fn column_coincidence_ok(plan: &FrequencyPlan, dt: &TimeAllocation, tol: f64) -> bool {
    let k = plan.num_tasks();
    (3..=k).all(|m| {
        let rows: Vec<usize> = (1..m).collect();
        let all_working = rows
            .iter()
            .all(|&n| plan.at(n, m) * dt[m] + plan.at(n, m + 1) * dt[m + 1] > tol * (dt[m] + dt[m + 1]));
        if !all_working {
            return true;
        }
        let zero = rows.iter().all(|&n| (plan.at(n, m) - plan.at(n, m + 1)).abs() <= tol);
        let positive = rows.iter().all(|&n| plan.at(n, m) - plan.at(n, m + 1) > tol);
        zero || positive
    })
}

/// Capacity price ordering: zero before the transition slot, strictly
/// increasing from it.
pub fn alpha_ordering_ok(duals: &FreqDuals, dt: &TimeAllocation, verdict: TransitionVerdict, tol: f64) -> bool {
    let k = duals.beta.len();
    let scale = duals.beta.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rates: Vec<f64> = (0..=k + 1).map(|m| duals.alpha_rate(m, dt)).collect();
    let first = match verdict {
        TransitionVerdict::NoTransition => k + 2,
        TransitionVerdict::TransitionAt(i) => i,
        TransitionVerdict::Infeasible => return false,
    };
    let zeros_ok = (2..first.min(k + 2)).all(|m| rates[m].abs() <= tol * scale);
    let inc_ok = (first..=k + 1).all(|m| rates[m] > tol * scale && (m == first || rates[m] > rates[m - 1]));
    zeros_ok && inc_ok
}

/// Capacity and completion violations of a plan, relative to `F_max` and
/// `F_n`.
pub fn plan_violation(plan: &FrequencyPlan, cycles: &[f64], dt: &TimeAllocation, f_max: f64) -> f64 {
    let k = plan.num_tasks();
    let mut worst = 0.0f64;
    for m in 2..=k + 1 {
        worst = worst.max((plan.col_sum(m) - f_max) / f_max);
    }
    for n in 1..=k {
        if cycles[n - 1] > 0.0 {
            let done: f64 = (n + 1..=k + 1).map(|m| plan.at(n, m) * dt[m]).sum();
            worst = worst.max((cycles[n - 1] - done) / cycles[n - 1]);
        }
    }
    for (n, m) in plan.indices() {
        worst = worst.max(-plan.at(n, m));
    }
    worst
}

//! Primal log-barrier method with damped Newton steps.
//!
//! The barrier function is `F(z) = t z_obj - sum ln(-g_j(z)) - sum ln det(Omega_i - shift I)`.
//! The bit-split equalities are kept exact by eliminating `d_C,k`: every step
//! moves `d_C,k` by the negative of the `d_E,k` step.

use crate::error::SolverError;

use super::program::ConvexProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Barrier weight multiplier per stage.
    pub growth: f64,
    /// Stop once `m / t <= gap_rel * |objective|`.
    pub gap_rel: f64,
    /// Final stage ends when half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    /// Same, for the intermediate stages.
    pub stage_tol: f64,
    pub max_newton_per_stage: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub max_halvings: usize,
    /// Squared decrement below which a stall is accepted as convergence.
    pub stall_tolerance: f64,
    /// Gradient-residual Newton steps after the last stage.
    pub max_polish_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            growth: 10.0,
            gap_rel: 1e-6,
            newton_tol: 1e-9,
            stage_tol: 1e-2,
            max_newton_per_stage: 500,
            armijo: 0.3,
            shrink: 0.5,
            max_halvings: 50,
            stall_tolerance: 1e-6,
            max_polish_steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub start_objective: f64,
    /// Objective at the end of each barrier stage.
    pub stage_objectives: Vec<f64>,
    pub newton_steps: usize,
    /// Final barrier weight `t`.
    pub barrier_weight: f64,
    /// Newton decrement at the returned point.
    pub decrement: f64,
    /// Ended early because no barrier decrease could be verified.
    pub stalled: bool,
}

/// Barrier value split into objective and barrier parts, plus slacks.
struct Eval {
    slacks: Vec<f64>,
    ln_dets: Vec<f64>,
}

fn evaluate(p: &ConvexProgram, z: &[f64]) -> Option<Eval> {
    let mut slacks = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let v = c.value(z)?;
        if !(v < 0.0) {
            return None;
        }
        slacks.push(-v);
    }
    let mut ln_dets = Vec::with_capacity(p.lmis.len());
    for l in &p.lmis {
        ln_dets.push(l.ln_det(z)?);
    }
    Some(Eval { slacks, ln_dets })
}

/// Gradient and Hessian of the barrier function in the reduced space. Only
/// the lower triangle of the row-major Hessian is filled.
pub(crate) struct System {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub dim: usize,
}

/// Gradient and Hessian of the barrier function at weight `t`.
pub(crate) fn barrier_derivs(p: &ConvexProgram, red: &Reduction, z: &[f64], t: f64) -> Option<System> {
    let n = red.dim;
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    let tt = p.layout.tau_total;
    g[red.index[tt]] += red.sign[tt] * t;
    let mut rows = Vec::new();
    let mut signs = Vec::new();
    let mut scaled = Vec::new();
    for c in &p.constraints {
        let x = c.gather(z);
        let (value, grad) = c.value_grad(&x)?;
        if !(value < 0.0) {
            return None;
        }
        let inv = 1.0 / -value;
        rows.clear();
        signs.clear();
        scaled.clear();
        for (a, &ga) in c.support.iter().enumerate() {
            let ra = red.index[ga];
            let s = red.sign[ga];
            rows.push(ra);
            signs.push(s);
            let da = s * grad[a] * inv;
            scaled.push(da);
            if ra != PINNED {
                g[ra] += da;
            }
        }
        for (a, &ra) in rows.iter().enumerate() {
            let da = scaled[a];
            if da == 0.0 || ra == PINNED {
                continue;
            }
            let row = &mut h[ra * n..(ra + 1) * n];
            for (b, &rb) in rows.iter().enumerate() {
                if rb <= ra {
                    // A pinned `rb` has a zero scaled entry.
                    row[rb] += da * scaled[b];
                }
            }
        }
        c.hessian_into(&x, inv, &mut |a, b, v| {
            let (ra, rb) = (rows[a], rows[b]);
            if rb <= ra && ra != PINNED {
                h[ra * n + rb] += signs[a] * signs[b] * v;
            }
        })?;
    }
    for l in &p.lmis {
        let d = l.derivs(z)?;
        for (a, &ga) in l.support.iter().enumerate() {
            let (ra, sa) = (red.index[ga], red.sign[ga]);
            g[ra] += sa * d.grad[a];
            for (b, &gb) in l.support.iter().enumerate() {
                let rb = red.index[gb];
                if rb <= ra {
                    h[ra * n + rb] += sa * red.sign[gb] * d.hess[(a, b)];
                }
            }
        }
    }
    Some(System { g, h, dim: n })
}

const PINNED: usize = usize::MAX;

/// Maps full variables to the reduced space that keeps the equalities.
/// Entries above the diagonal of each transmit factor and the imaginary parts
/// of its diagonal are pinned, which removes the unitary freedom `Q~ U`.
pub(crate) struct Reduction {
    index: Vec<usize>,
    sign: Vec<f64>,
    pub dim: usize,
}

impl Reduction {
    pub fn new(p: &ConvexProgram) -> Self {
        let n = p.layout.len;
        let pairs = p.layout.equality_pairs();
        let mut eliminated = vec![false; n];
        for &(_, c) in &pairs {
            eliminated[c] = true;
        }
        let mut pinned = vec![false; n];
        let m = p.layout.m_i;
        for edge in [true, false] {
            for k in 0..p.layout.n_ids {
                let Some(o) = p.layout.q_block(edge, k) else { continue };
                for r in 0..m {
                    for c in r..m {
                        let at = o + 2 * (r * m + c);
                        pinned[at] = c > r;
                        pinned[at + 1] = true;
                    }
                }
            }
        }
        let mut index = vec![PINNED; n];
        let mut dim = 0;
        for j in 0..n {
            if !eliminated[j] && !pinned[j] {
                index[j] = dim;
                dim += 1;
            }
        }
        let mut sign: Vec<f64> = pinned.iter().map(|&p| if p { 0.0 } else { 1.0 }).collect();
        for &(e, c) in &pairs {
            index[c] = index[e];
            sign[c] = -1.0;
        }
        Self { index, sign, dim }
    }

    /// Reduced coordinate of full variable `j`, or `None` if pinned.
    pub fn index_of(&self, j: usize) -> Option<usize> {
        (self.index[j] != PINNED).then_some(self.index[j])
    }

    pub fn expand(&self, d: &[f64]) -> Vec<f64> {
        self.index.iter().zip(&self.sign).map(|(&i, &s)| if i == PINNED { 0.0 } else { s * d[i] }).collect()
    }
}

/// In-place Cholesky of a row-major symmetric matrix; the lower triangle is
/// overwritten with the factor.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let row_j = &a[j * n..j * n + j + 1];
        let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            row_i[j] = (row_i[j] - dot(&row_i[..j], row_j)) / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        b[i] = (b[i] - dot(&l[i * n..i * n + i], &b[..i])) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `H d = -g` from the lower triangle of `H` with Jacobi scaling,
/// increasing the diagonal regularization until the factorization succeeds.
fn newton_direction(h: &[f64], g: &[f64]) -> Result<Vec<f64>, SolverError> {
    let n = g.len();
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let d = h[j * n + j];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut hs = vec![0.0; n * n];
    // Scaled diagonal is 1; this shift sits at the rounding level of the
    // assembled Hessian and avoids most refactorizations.
    let mut reg = 1e-12;
    for _ in 0..12 {
        for a in 0..n {
            for b in 0..=a {
                hs[a * n + b] = h[a * n + b] * scale[a] * scale[b];
            }
            hs[a * n + a] += reg;
        }
        if cholesky_in_place(&mut hs, n) {
            let mut y: Vec<f64> = (0..n).map(|j| -g[j] * scale[j]).collect();
            cholesky_solve(&hs, n, &mut y);
            if y.iter().all(|v| v.is_finite()) {
                return Ok((0..n).map(|j| y[j] * scale[j]).collect());
            }
        }
        reg *= 100.0;
    }
    Err(SolverError::SingularNewtonSystem)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let x: &[f64; 8] = x.try_into().unwrap();
        let y: &[f64; 8] = y.try_into().unwrap();
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = acc.iter().sum::<f64>();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `F(z + step) - F(z)` computed from slack ratios.
fn barrier_change(t: f64, obj_step: f64, before: &Eval, after: &Eval) -> f64 {
    let mut d = t * obj_step;
    for (a, b) in after.slacks.iter().zip(&before.slacks) {
        d -= (a / b).ln();
    }
    for (a, b) in after.ln_dets.iter().zip(&before.ln_dets) {
        d -= a - b;
    }
    d
}

/// Newton decrement `sqrt(g^T H^-1 g)` of the reduced barrier function.
pub(crate) fn newton_decrement(p: &ConvexProgram, z: &[f64], t: f64) -> Option<f64> {
    let red = Reduction::new(p);
    let sys = barrier_derivs(p, &red, z, t)?;
    let d = newton_direction(&sys.h, &sys.g).ok()?;
    Some((-dot(&sys.g, &d)).max(0.0).sqrt())
}

/// Initial barrier weight: the `t` that best centers `z`, clamped between
/// `m / |obj|` and the final weight.
fn initial_weight(p: &ConvexProgram, red: &Reduction, z: &[f64], t_lo: f64, t_hi: f64) -> f64 {
    let Some(sys) = barrier_derivs(p, red, z, 0.0) else {
        return t_lo;
    };
    let mut c = vec![0.0; sys.dim];
    let tt = p.layout.tau_total;
    c[red.index[tt]] = red.sign[tt];
    let (Ok(hg), Ok(hc)) = (newton_direction(&sys.h, &sys.g), newton_direction(&sys.h, &c)) else {
        return t_lo;
    };
    // hg = -H^-1 g and hc = -H^-1 c; this t minimizes || t c + g ||_{H^-1}
    let t = -dot(&c, &hg) / dot(&c, &hc);
    if t.is_finite() && t > t_lo {
        t.min(t_hi)
    } else {
        t_lo
    }
}

/// Outcome of one centering stage.
struct StageEnd {
    decrement: f64,
    /// No step could be verified to decrease the barrier function.
    stalled: bool,
}

fn stage(
    p: &ConvexProgram,
    red: &Reduction,
    z: &mut Vec<f64>,
    t: f64,
    tol: f64,
    settings: &SolverSettings,
    steps: &mut usize,
) -> Result<StageEnd, SolverError> {
    let mut decrement = f64::INFINITY;
    for _ in 0..settings.max_newton_per_stage {
        let here = evaluate(p, z).ok_or_else(|| infeasible(p, z))?;
        let sys = barrier_derivs(p, red, z, t).ok_or_else(|| infeasible(p, z))?;
        let dr = newton_direction(&sys.h, &sys.g)?;
        let lambda2 = -dot(&sys.g, &dr);
        decrement = lambda2.max(0.0).sqrt();
        if lambda2 / 2.0 <= tol {
            break;
        }
        let dz = red.expand(&dr);
        let slope = -lambda2;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + alpha * b).collect();
            if let Some(there) = evaluate(p, &trial) {
                let obj_step = trial[p.layout.tau_total] - z[p.layout.tau_total];
                let change = barrier_change(t, obj_step, &here, &there);
                if change <= settings.armijo * alpha * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= settings.shrink;
        }
        *steps += 1;
        // Inside the quadratic region a full step should pass; heavy damping
        // there means the test is deciding on rounding noise.
        let noise = lambda2 <= settings.stall_tolerance && alpha < 0.25;
        match accepted {
            Some(next) if !noise => *z = next,
            _ => {
                return Ok(StageEnd {
                    decrement,
                    stalled: true,
                })
            }
        }
    }
    Ok(StageEnd {
        decrement,
        stalled: false,
    })
}

/// Weighted residual `sum_j (w_j g_j)^2` at `z`.
fn residual(p: &ConvexProgram, red: &Reduction, z: &[f64], t: f64, w: &[f64]) -> Option<f64> {
    let sys = barrier_derivs(p, red, z, t)?;
    Some(sys.g.iter().zip(w).map(|(g, w)| (g * w) * (g * w)).sum())
}

/// Newton steps at the final weight accepted on gradient decrease. Near the
/// optimum the barrier value is dominated by `t * tau_total` and its rounding
/// hides the decrease that the Armijo test needs.
fn polish(p: &ConvexProgram, red: &Reduction, z: &mut Vec<f64>, t: f64, settings: &SolverSettings, steps: &mut usize) {
    for _ in 0..settings.max_polish_steps {
        let Some(sys) = barrier_derivs(p, red, z, t) else {
            return;
        };
        let w: Vec<f64> = (0..sys.dim).map(|i| 1.0 / sys.h[i * sys.dim + i].sqrt().max(f64::MIN_POSITIVE)).collect();
        let here: f64 = sys.g.iter().zip(&w).map(|(g, w)| (g * w) * (g * w)).sum();
        let Ok(dr) = newton_direction(&sys.h, &sys.g) else {
            return;
        };
        let dz = red.expand(&dr);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + alpha * b).collect();
            if p.is_strictly_feasible(&trial) {
                if let Some(r) = residual(p, red, &trial, t, &w) {
                    if r < here * (1.0 - settings.armijo * alpha) {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            alpha *= settings.shrink;
        }
        *steps += 1;
        match accepted {
            Some(next) => *z = next,
            None => return,
        }
    }
}

fn infeasible(p: &ConvexProgram, z: &[f64]) -> SolverError {
    match p.first_violation(z) {
        Some((family, index, value)) => SolverError::InfeasibleStart {
            family: family.as_str(),
            index,
            value,
        },
        None => SolverError::SingularNewtonSystem,
    }
}

/// Minimizes `tau_total` over the program from a strictly feasible start.
pub fn solve(p: &ConvexProgram, start: &[f64], settings: &SolverSettings) -> Result<SolveOutcome, SolverError> {
    if let Some((family, index, value)) = p.first_violation(start) {
        return Err(SolverError::InfeasibleStart {
            family: family.as_str(),
            index,
            value,
        });
    }
    let red = Reduction::new(p);
    let m = p.barrier_size() as f64;
    let start_objective = p.objective(start);
    let scale = start_objective.abs().max(f64::MIN_POSITIVE);
    // Weight at which m / t meets the relative gap at the current objective.
    let target = |z: &[f64]| m / (settings.gap_rel * p.objective(z).abs().max(f64::MIN_POSITIVE));
    let mut t = initial_weight(p, &red, start, m / scale, target(start));
    let mut z = start.to_vec();
    let mut stage_objectives = Vec::new();
    let mut steps = 0;
    let mut stalled = false;
    let mut decrement;
    loop {
        let tol = if t >= target(&z) { settings.newton_tol } else { settings.stage_tol };
        let end = stage(p, &red, &mut z, t, tol, settings, &mut steps)?;
        decrement = end.decrement;
        if end.stalled {
            // Past the first stage a stall means the slacks have reached the
            // rounding floor of the constraint evaluations.
            if stage_objectives.is_empty() && decrement * decrement > settings.stall_tolerance {
                return Err(SolverError::LineSearchStalled {
                    halvings: settings.max_halvings,
                    decrement: decrement * decrement,
                });
            }
            stalled = true;
        }
        stage_objectives.push(p.objective(&z));
        if stalled || t >= target(&z) {
            break;
        }
        // Overshooting the target twofold absorbs the objective decrease
        // of the final stage.
        t = (t * settings.growth).min(2.0 * target(&z));
    }
    polish(p, &red, &mut z, t, settings, &mut steps);
    if let Some(d) = newton_decrement(p, &z, t) {
        decrement = d;
    }
    let objective = p.objective(&z);
    if objective > start_objective {
        z = start.to_vec();
    }
    Ok(SolveOutcome {
        objective: p.objective(&z),
        z,
        start_objective,
        stage_objectives,
        newton_steps: steps,
        barrier_weight: t,
        decrement,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sca::{init_point, update_auxiliaries};
    use crate::scenario::{generate_scenario, FLConfig, Scenario, Scheme, SystemConfig};
    use crate::subsolver::{assemble_subproblem, check_kkt, SubproblemOptions};

    fn program(n_ids: usize, n_aps: usize, m_i: usize, seed: u64, scheme: Scheme) -> (Scenario, ConvexProgram, Vec<f64>) {
        let sys = SystemConfig {
            seed,
            n_aps,
            m_i,
            ..SystemConfig::with_ids(n_ids)
        };
        let s = generate_scenario(&sys, &FLConfig::default()).unwrap();
        let opts = SubproblemOptions::new(scheme);
        let x = init_point(&s, &opts).unwrap();
        let aux = update_auxiliaries(&s, &x).unwrap();
        let p = assemble_subproblem(&s, &aux, opts).unwrap();
        let z = p.layout.pack(&x);
        (s, p, z)
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let n = 7;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { 2.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut l = a.clone();
        assert!(cholesky_in_place(&mut l, n));
        let mut x = b.clone();
        cholesky_solve(&l, n, &mut x);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let mut indefinite = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut indefinite, 2));
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..19).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn solve_decreases_objective_along_the_path() {
        for (seed, scheme) in [(0, Scheme::RateSplit), (1, Scheme::EdgeOnly), (2, Scheme::CloudOnly)] {
            let (_, p, z) = program(3, 2, 2, seed, scheme);
            let out = solve(&p, &z, &SolverSettings::default()).unwrap();
            assert!(out.objective <= out.start_objective + 1e-9);
            assert!(p.is_strictly_feasible(&out.z));
            assert!(p.max_violation(&out.z) <= 1e-9);
            for w in out.stage_objectives.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", out.stage_objectives);
            }
        }
    }

    #[test]
    fn equalities_hold_exactly_enough() {
        let (_, p, z) = program(3, 2, 1, 4, Scheme::RateSplit);
        let out = solve(&p, &z, &SolverSettings::default()).unwrap();
        let d = p.layout.bits_per_model;
        for (e, c) in p.layout.equality_pairs() {
            assert!((out.z[e] + out.z[c] - d).abs() <= 1e-9 * d);
        }
    }

    #[test]
    fn re_solving_from_the_optimum_changes_little() {
        let (_, p, z) = program(2, 2, 1, 6, Scheme::RateSplit);
        let first = solve(&p, &z, &SolverSettings::default()).unwrap();
        let second = solve(&p, &first.z, &SolverSettings::default()).unwrap();
        let rel = (second.objective - first.objective).abs() / first.objective;
        assert!(rel <= 1e-7, "{rel:e}");
    }

    #[test]
    fn solved_point_passes_kkt_and_perturbation_breaks_it() {
        let (_, p, z) = program(2, 2, 1, 8, Scheme::RateSplit);
        let out = solve(&p, &z, &SolverSettings::default()).unwrap();
        let rep = check_kkt(&p, &out.z, out.barrier_weight);
        assert!(rep.max_violation <= 1e-9, "{rep:?}");
        assert!(rep.complementarity <= 1.01 * SolverSettings::default().gap_rel, "{rep:?}");
        assert!(rep.stationarity <= 1e-7, "{rep:?}");
        assert!(rep.gradient_error <= 1e-4, "{rep:?}");

        let j = p.layout.q_block(true, 0).unwrap();
        let mut bumped = out.z.clone();
        bumped[j] *= 1.01;
        // An infeasible bump reports infinite stationarity.
        let rep = check_kkt(&p, &bumped, out.barrier_weight);
        assert!(rep.stationarity > 1e-4, "{rep:?}");
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for (n, a, m) in [(6, 3, 2), (3, 2, 2), (2, 2, 1), (2, 3, 2)] {
            let (_, p, z) = program(n, a, m, 0, Scheme::RateSplit);
            let red = Reduction::new(&p);
            let t = 100.0;
            let sys = barrier_derivs(&p, &red, &z, t).unwrap();
            let dim = sys.dim;
            let diag = |i: usize| sys.h[i * dim + i].abs().sqrt();
            for j in 0..p.layout.len {
                if red.index[j] == PINNED || red.sign[j] != 1.0 {
                    continue;
                }
                let rj = red.index[j];
                let h = 1e-6 * z[j].abs().max(1e-3);
                let dr: Vec<f64> = (0..dim).map(|i| if i == rj { h } else { 0.0 }).collect();
                let dz = red.expand(&dr);
                let zp: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
                let zm: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a - b).collect();
                let (Some(gp), Some(gm)) = (barrier_derivs(&p, &red, &zp, t), barrier_derivs(&p, &red, &zm, t)) else {
                    continue;
                };
                for i in 0..dim {
                    let fd = (gp.g[i] - gm.g[i]) / (2.0 * h);
                    let an = if i >= rj { sys.h[i * dim + rj] } else { sys.h[rj * dim + i] };
                    let floor = 1e-3 * diag(i) * diag(rj);
                    assert!((fd - an).abs() <= 1e-2 * an.abs().max(fd.abs()).max(floor), "{n} {a} {m}: ({i}, {rj}) {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn pinned_factor_entries_do_not_move() {
        let (_, p, z) = program(2, 2, 2, 3, Scheme::RateSplit);
        let out = solve(&p, &z, &SolverSettings::default()).unwrap();
        let o = p.layout.q_block(true, 0).unwrap();
        // (0, 1) entry and the imaginary part of (0, 0)
        assert_eq!(out.z[o + 2], z[o + 2]);
        assert_eq!(out.z[o + 3], z[o + 3]);
        assert_eq!(out.z[o + 1], z[o + 1]);
        assert_ne!(out.z[o], z[o]);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let (_, p, mut z) = program(2, 1, 1, 0, Scheme::RateSplit);
        z[p.layout.tau_total] = -1.0;
        assert!(matches!(
            solve(&p, &z, &SolverSettings::default()),
            Err(SolverError::InfeasibleStart { .. })
        ));
    }
}

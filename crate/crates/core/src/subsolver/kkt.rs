//! Optimality diagnostics and derivative checks for a [`ConvexProgram`].

use super::barrier::{barrier_derivs, Reduction};
use super::layout::VarGroup;
use super::program::ConvexProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest constraint value (0 when strictly feasible) or equality residual.
    pub max_violation: f64,
    /// Duality-gap bound `m / t` of the barrier duals, relative to the objective.
    pub complementarity: f64,
    /// Largest scaled Lagrangian-gradient component with barrier multipliers,
    /// `max_j scale_j |c_j + sum_i u_i dg_i/dz_j| / |objective|`.
    pub stationarity: f64,
    /// Largest relative mismatch between analytic and finite-difference gradients.
    pub gradient_error: f64,
}

/// Perturbation scale per variable: the largest magnitude in its matrix
/// block for matrix entries, the magnitude itself for scalars.
pub fn variable_scales(p: &ConvexProgram, z: &[f64]) -> Vec<f64> {
    let lay = &p.layout;
    let mut q_max: f64 = 0.0;
    let mut w_max: f64 = 0.0;
    for (j, v) in z.iter().enumerate() {
        match lay.group_of(j) {
            VarGroup::TransmitFactor => q_max = q_max.max(v.abs()),
            VarGroup::Quantizer => w_max = w_max.max(v.abs()),
            VarGroup::Scalar => {}
        }
    }
    z.iter()
        .enumerate()
        .map(|(j, v)| {
            let s = match lay.group_of(j) {
                VarGroup::TransmitFactor => q_max,
                VarGroup::Quantizer => w_max,
                VarGroup::Scalar => v.abs(),
            };
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Compares analytic constraint gradients with central differences using
/// step `1e-6 * scale_j`. Returns the largest scaled relative error.
pub fn gradient_check(p: &ConvexProgram, z: &[f64]) -> f64 {
    let scales = variable_scales(p, z);
    let mut worst: f64 = 0.0;
    let mut check = |support: &[usize], grad: &[f64], f: &dyn Fn(&[f64]) -> Option<f64>| {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        let mut zz = z.to_vec();
        for (a, &j) in support.iter().enumerate() {
            let h = 1e-6 * scales[j];
            zz[j] = z[j] + h;
            let up = f(&zz);
            zz[j] = z[j] - h;
            let down = f(&zz);
            zz[j] = z[j];
            let (Some(up), Some(down)) = (up, down) else {
                continue;
            };
            let fd = (up - down) / (2.0 * h);
            num = num.max((fd - grad[a]).abs() * scales[j]);
            den = den.max(grad[a].abs() * scales[j]);
        }
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    };
    for c in &p.constraints {
        if let Some(d) = c.derivs(z) {
            check(&c.support, &d.grad, &|x| c.value(x));
        }
    }
    for l in &p.lmis {
        if let Some(d) = l.derivs(z) {
            check(&l.support, &d.grad, &|x| l.ln_det(x).map(|v| -v));
        }
    }
    worst
}

/// Lagrangian stationarity with multipliers `u_i = 1 / (t (-g_i))`, in the
/// equality-reduced space and scaled by the variable magnitudes.
pub fn stationarity(p: &ConvexProgram, z: &[f64], barrier_weight: f64) -> Option<f64> {
    let red = Reduction::new(p);
    let sys = barrier_derivs(p, &red, z, barrier_weight)?;
    let scales = variable_scales(p, z);
    let mut reduced_scale = vec![0.0f64; red.dim];
    for (j, &sc) in scales.iter().enumerate() {
        if let Some(r) = red.index_of(j) {
            reduced_scale[r] = reduced_scale[r].max(sc);
        }
    }
    let obj = p.objective(z).abs().max(f64::MIN_POSITIVE);
    let worst = sys
        .g
        .iter()
        .zip(&reduced_scale)
        .map(|(g, sc)| (g / barrier_weight).abs() * sc)
        .fold(0.0, f64::max);
    Some(worst / obj)
}

/// Residuals of `z` as an approximate minimizer at barrier weight `t`.
pub fn check_kkt(p: &ConvexProgram, z: &[f64], barrier_weight: f64) -> KktReport {
    let max_violation = p.max_violation(z);
    let obj = p.objective(z).abs().max(f64::MIN_POSITIVE);
    let stationarity = if !p.is_strictly_feasible(z) {
        f64::INFINITY
    } else {
        stationarity(p, z, barrier_weight).unwrap_or(f64::INFINITY)
    };
    KktReport {
        max_violation,
        complementarity: p.barrier_size() as f64 / barrier_weight / obj,
        stationarity,
        gradient_error: gradient_check(p, z),
    }
}

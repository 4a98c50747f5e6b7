//! Exhaustive grid search for scalar instances (one ID, one AP, single
//! antennas), used as a reference optimum.
//!
//! The completion time separates as `n_G(eta) (n_L(eta) a + X)` where `X =
//! tau_W + tau_F` does not depend on `eta`, so the grid minimizes `X` over
//! powers, quantization noise and bit split, then picks `eta` for that `X`.

use crate::error::HarnessError;
use crate::matrixcore::{ComplexMatrix, HermitianMatrix};
use crate::phymodel::{
    iteration_bounds, latency_breakdown_full, rates, BitSplit, Forwarding, LatencyReport, QuantizerCovariances,
    TransmitCovariances,
};
use crate::scenario::Scenario;
use crate::subsolver::RATE_FLOOR;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    /// Points per power axis on the simplex `q_E + q_C <= P`.
    pub power_points: usize,
    pub omega_points: usize,
    /// Range of `omega / sigma^2`, log-spaced.
    pub omega_range: (f64, f64),
    pub bit_points: usize,
    pub eta_points: usize,
    pub eta_range: (f64, f64),
    /// Step halvings of the coordinate refinement.
    pub refinements: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            power_points: 61,
            omega_points: 61,
            omega_range: (1e-3, 1e3),
            bit_points: 41,
            eta_points: 99,
            eta_range: (0.01, 0.99),
            refinements: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// After refinement.
    pub tau_total: f64,
    /// Best value on the grid alone.
    pub grid_tau_total: f64,
    pub q_e: f64,
    pub q_c: f64,
    pub omega: f64,
    pub d_e: f64,
    pub eta_l: f64,
    pub latency: LatencyReport,
}

fn is_scalar(s: &Scenario) -> bool {
    s.n_ids() == 1 && s.n_aps() == 1 && s.m_i() == 1 && s.m_a() == 1
}

fn covariances(q_e: f64, q_c: f64, omega: f64) -> (TransmitCovariances, QuantizerCovariances) {
    let f = |q: f64| ComplexMatrix::scaled_identity(1, q.max(0.0).sqrt());
    (
        TransmitCovariances {
            edge: vec![f(q_e)],
            cloud: vec![f(q_c)],
        },
        QuantizerCovariances {
            omega: vec![HermitianMatrix::scaled_identity(1, omega)],
        },
    )
}

/// `tau_W + tau_F` from rates, or `None` if a split carrying bits has a rate
/// below the floor.
fn link_time(s: &Scenario, r_e: f64, r_c: f64, g: f64, d_e: f64) -> Option<f64> {
    let d_c = s.fl.bits_per_model - d_e;
    let mut tau_w: f64 = 0.0;
    for (bits, rate) in [(d_e, r_e), (d_c, r_c)] {
        if bits > 0.0 {
            if !(rate >= RATE_FLOOR) {
                return None;
            }
            tau_w = tau_w.max(bits / rate);
        }
    }
    let tau_f = (d_e + s.system.bandwidth_hz * tau_w * g) / s.system.fronthaul_bps;
    Some(tau_w + tau_f)
}

/// Exact completion time at a scalar operating point.
fn evaluate(s: &Scenario, c: &[f64; 5]) -> Option<LatencyReport> {
    let [q_e, q_c, ln_omega, d_e, eta] = *c;
    let (q, w) = covariances(q_e, q_c, ln_omega.exp());
    let d = s.fl.bits_per_model;
    let bits = BitSplit {
        edge: vec![d_e],
        cloud: vec![d - d_e],
    };
    let l = latency_breakdown_full(s, &q, &w, &bits, eta, Forwarding::Quantized, false).ok()?;
    let floor_ok = (d_e <= 0.0 || l.r_e[0] >= RATE_FLOOR) && (d - d_e <= 0.0 || l.r_c[0] >= RATE_FLOOR);
    (floor_ok && l.tau_total.is_finite()).then_some(l)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

/// Grid minimum of the completion time followed by a coordinate refinement.
pub fn brute_force_tiny(s: &Scenario, grid: &OracleGrid) -> Result<OracleResult, HarnessError> {
    if !is_scalar(s) {
        return Err(HarnessError::Oracle("needs one ID, one AP and single antennas".into()));
    }
    if grid.power_points < 2 || grid.omega_points < 1 || grid.bit_points < 2 || grid.eta_points < 1 {
        return Err(HarnessError::Oracle("grid too coarse".into()));
    }
    let p = s.p_tx();
    let sigma2 = s.noise();
    let d = s.fl.bits_per_model;
    let np = grid.power_points - 1;
    let ln_omegas = linspace(
        (grid.omega_range.0 * sigma2).ln(),
        (grid.omega_range.1 * sigma2).ln(),
        grid.omega_points,
    );
    let d_es = linspace(0.0, d, grid.bit_points);

    let mut best: Option<(f64, [f64; 4])> = None;
    for a in 0..=np {
        for b in 0..=(np - a) {
            let (q_e, q_c) = (p * a as f64 / np as f64, p * b as f64 / np as f64);
            for &lw in &ln_omegas {
                let (q, w) = covariances(q_e, q_c, lw.exp());
                let Ok(r) = rates(s, &q, &w) else { continue };
                for &d_e in &d_es {
                    if let Some(x) = link_time(s, r.r_e[0], r.r_c[0], r.g[0], d_e) {
                        if best.map_or(true, |(bx, _)| x < bx) {
                            best = Some((x, [q_e, q_c, lw, d_e]));
                        }
                    }
                }
            }
        }
    }
    let Some((x, [q_e, q_c, lw, d_e])) = best else {
        return Err(HarnessError::Oracle("infeasible: no grid point serves the model update".into()));
    };

    let a = s.fl.compute_time_per_iteration();
    let mut eta_best = (f64::INFINITY, grid.eta_range.0);
    for eta in linspace(grid.eta_range.0, grid.eta_range.1, grid.eta_points) {
        let (n_l, n_g) = iteration_bounds(&s.fl, eta)?;
        let tau = n_g * (n_l * a + x);
        if tau < eta_best.0 {
            eta_best = (tau, eta);
        }
    }

    let mut c = [q_e, q_c, lw, d_e, eta_best.1];
    let mut current = evaluate(s, &c).ok_or_else(|| HarnessError::Oracle("grid optimum does not evaluate".into()))?;
    let grid_tau_total = current.tau_total;
    let mut step = [
        p / np as f64,
        p / np as f64,
        (ln_omegas.last().unwrap() - ln_omegas[0]) / (grid.omega_points.max(2) - 1) as f64,
        d / (grid.bit_points - 1) as f64,
        (grid.eta_range.1 - grid.eta_range.0) / (grid.eta_points.max(2) - 1) as f64,
    ];
    let project = |c: &mut [f64; 5]| {
        c[0] = c[0].clamp(0.0, p);
        c[1] = c[1].clamp(0.0, p - c[0]);
        c[3] = c[3].clamp(0.0, d);
        c[4] = c[4].clamp(1e-6, 1.0 - 1e-6);
    };
    for _ in 0..=grid.refinements {
        for j in 0..5 {
            for dir in [1.0, -1.0] {
                loop {
                    let mut trial = c;
                    trial[j] += dir * step[j];
                    project(&mut trial);
                    match evaluate(s, &trial) {
                        Some(l) if l.tau_total < current.tau_total => {
                            c = trial;
                            current = l;
                        }
                        _ => break,
                    }
                }
            }
        }
        for st in &mut step {
            *st *= 0.5;
        }
    }
    Ok(OracleResult {
        tau_total: current.tau_total,
        grid_tau_total,
        q_e: c[0],
        q_c: c[1],
        omega: c[2].exp(),
        d_e: c[3],
        eta_l: c[4],
        latency: current,
    })
}

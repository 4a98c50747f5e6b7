//! Alternating optimization: closed-form auxiliary updates followed by a
//! convex subproblem solve, repeated until the true completion time settles.

use std::time::Instant;

use crate::error::{ModelError, SolverError};
use crate::matrixcore::{ComplexMatrix, HermitianMatrix};
use crate::phymodel::{
    interference_covariances, latency_breakdown_full, rates, BitSplit, Forwarding, LatencyReport,
    QuantizerCovariances, TransmitCovariances,
};
use crate::scenario::{Scenario, Scheme};
use crate::subsolver::{
    assemble_subproblem, solve, Family, Layout, PrimalPoint, SolverSettings, SubproblemOptions, ETA_FLOOR,
    MU_FLOOR, OMEGA_FLOOR_REL, RATE_FLOOR, TAU_FLOOR,
};

/// Relative slack given to the scalar variables of every subproblem start.
pub const START_MARGIN: f64 = 1e-3;
/// Smaller slacks tried in turn when a rate sits too close to its floor for
/// [`START_MARGIN`].
pub const FALLBACK_MARGINS: [f64; 3] = [1e-5, 1e-7, 1e-9];
/// Relative clamp applied to the physical variables when they touch a bound.
pub const PHYSICAL_MARGIN: f64 = 1e-9;
/// Smallest fraction of `d_k` kept on either split under rate splitting.
pub const MIN_BIT_FRACTION: f64 = 1e-12;
/// Power fractions tried for the empty split when embedding a baseline point.
pub const EMBED_POWER_FRACTIONS: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
/// Number of tenfold quantizer-noise reductions tried for an edge-only embedding.
pub const EMBED_OMEGA_SHRINKS: usize = 16;

/// Auxiliary variables of the quadratic-transform surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPoint {
    pub lambda_total: f64,
    /// `None` for a split that carries no bits.
    pub lambda_w_edge: Vec<Option<f64>>,
    pub lambda_w_cloud: Vec<Option<f64>>,
    pub lambda_f: Vec<f64>,
    pub gamma_e: Vec<HermitianMatrix>,
    pub gamma_c: Vec<HermitianMatrix>,
    pub theta_e: Vec<ComplexMatrix>,
    pub theta_c: Vec<ComplexMatrix>,
    pub sigma_f: Vec<HermitianMatrix>,
}

/// `(Gamma, Theta)` making the rate surrogate tight at `F = H Q~`.
fn quadratic_transform(w: &HermitianMatrix, f: &ComplexMatrix) -> Result<(HermitianMatrix, ComplexMatrix), ModelError> {
    let m = f.cols();
    if f.is_zero() {
        return Ok((HermitianMatrix::zeros(m), ComplexMatrix::zeros(f.rows(), m)));
    }
    let winv_f = crate::matrixcore::solve_hpd(w, f)?;
    let gamma = HermitianMatrix::from_raw(&f.adjoint() * &winv_f);
    let total = w.add(&f.gram());
    let theta = crate::matrixcore::solve_hpd(&total, f)?;
    Ok((gamma, theta))
}

/// Closed-form auxiliary values at `x`; each surrogate is tight there.
pub fn update_auxiliaries(s: &Scenario, x: &PrimalPoint) -> Result<AuxPoint, ModelError> {
    let inter = interference_covariances(s, &x.q, &x.w)?;
    let mut gamma_e = Vec::with_capacity(s.n_ids());
    let mut theta_e = Vec::with_capacity(s.n_ids());
    let mut gamma_c = Vec::with_capacity(s.n_ids());
    let mut theta_c = Vec::with_capacity(s.n_ids());
    for k in 0..s.n_ids() {
        let fe = s.channel(s.association[k], k) * &x.q.edge[k];
        let (g, t) = quadratic_transform(&inter.edge[k], &fe)?;
        gamma_e.push(g);
        theta_e.push(t);
        let fc = &s.stacked_channel(k) * &x.q.cloud[k];
        let (g, t) = quadratic_transform(&inter.cloud[k], &fc)?;
        gamma_c.push(g);
        theta_c.push(t);
    }
    let sqrt_w = x.tau_w.max(0.0).sqrt();
    let lambda_w = |d: &[f64]| -> Vec<Option<f64>> { d.iter().map(|&d| (d > 0.0).then(|| sqrt_w / d)).collect() };
    Ok(AuxPoint {
        lambda_total: x.tau_total.max(0.0).sqrt() / x.n_g,
        lambda_w_edge: lambda_w(&x.bits.edge),
        lambda_w_cloud: lambda_w(&x.bits.cloud),
        lambda_f: x.mu_f.iter().map(|&mu| mu.max(0.0).sqrt() / x.tau_w).collect(),
        gamma_e,
        gamma_c,
        theta_e,
        theta_c,
        sigma_f: inter.residual.iter().zip(&x.w.omega).map(|(a, o)| a.add(o)).collect(),
    })
}

/// Builds a strictly feasible point from the physical variables `(Q~, Omega, d, eta_L)`.
/// Power, accuracy and quantizer noise are clamped into the interior only if
/// they touch a bound; every scalar variable is set at `margin` relative
/// distance from its bound.
pub fn interior_point(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
    bits: &BitSplit,
    eta_l: f64,
    opts: &SubproblemOptions,
    margin: f64,
) -> Result<PrimalPoint, ModelError> {
    let lay = Layout::new(s, opts.scheme, opts.forwarding);
    let up = 1.0 + margin;
    let p = s.p_tx();
    let fl = &s.fl;
    let d_k = fl.bits_per_model;

    let mut q = q.clone();
    for k in 0..s.n_ids() {
        if !lay.scheme.has_edge() {
            q.edge[k] = ComplexMatrix::zeros(s.m_i(), s.m_i());
        }
        if !lay.scheme.has_cloud() {
            q.cloud[k] = ComplexMatrix::zeros(s.m_i(), s.m_i());
        }
        let used = q.power(k);
        let cap = p * (1.0 - PHYSICAL_MARGIN);
        if used > cap {
            let f = (cap / used).sqrt();
            q.edge[k] = q.edge[k].scale(f);
            q.cloud[k] = q.cloud[k].scale(f);
        }
    }

    let floor = OMEGA_FLOOR_REL * s.noise();
    let w = QuantizerCovariances {
        omega: w
            .omega
            .iter()
            .map(|o| {
                let lo = o.min_eigenvalue();
                if lo <= 2.0 * floor {
                    o.add_scaled_identity(2.0 * floor - lo + floor)
                } else {
                    o.clone()
                }
            })
            .collect(),
    };

    let eta_l = eta_l.clamp(2.0 * ETA_FLOOR, 1.0 - 2.0 * ETA_FLOOR);
    let bits = match lay.scheme {
        Scheme::EdgeOnly => BitSplit::all_edge(s.n_ids(), d_k),
        Scheme::CloudOnly => BitSplit::all_cloud(s.n_ids(), d_k),
        Scheme::RateSplit => {
            let lo = MIN_BIT_FRACTION * d_k;
            let edge: Vec<f64> = bits.edge.iter().map(|&e| e.clamp(lo, d_k - lo)).collect();
            let cloud = edge.iter().map(|&e| d_k - e).collect();
            BitSplit { edge, cloud }
        }
    };

    let r = rates(s, &q, &w)?;
    let bw = s.system.bandwidth_hz;
    let shrink = |k: usize, achieved: f64| -> Result<f64, ModelError> {
        if !(achieved > RATE_FLOOR * (1.0 + 2.0 * margin)) {
            return Err(ModelError::Degenerate(format!(
                "ID {k} rate {achieved:e} bits/s at or below the {RATE_FLOOR} bits/s floor"
            )));
        }
        Ok(RATE_FLOOR + (achieved - RATE_FLOOR) * (1.0 - margin))
    };
    let mut r_e = vec![0.0; s.n_ids()];
    let mut r_c = vec![0.0; s.n_ids()];
    let mut tau_w: f64 = TAU_FLOOR;
    for k in 0..s.n_ids() {
        if lay.scheme.has_edge() {
            r_e[k] = shrink(k, r.r_e[k])?;
            tau_w = tau_w.max(bits.edge[k] / r_e[k]);
        }
        if lay.scheme.has_cloud() {
            r_c[k] = shrink(k, r.r_c[k])?;
            tau_w = tau_w.max(bits.cloud[k] / r_c[k]);
        }
    }
    let tau_w = tau_w * up;

    let quantized = lay.forwarding == Forwarding::Quantized;
    let (r_f, mu_f): (Vec<f64>, Vec<f64>) = if quantized {
        r.g.iter()
            .map(|&g| {
                let rf = g * up;
                (rf, (tau_w * rf * up).max(2.0 * MU_FLOOR))
            })
            .unzip()
    } else {
        (vec![0.0; s.n_aps()], vec![0.0; s.n_aps()])
    };

    let mut tau_f: f64 = TAU_FLOOR;
    for i in 0..s.n_aps() {
        let decoded: f64 = crate::phymodel::fronthaul_ids(s, i, opts.fronthaul_all_ids)
            .iter()
            .map(|&k| bits.edge[k])
            .sum();
        tau_f = tau_f.max((decoded + bw * mu_f[i]) / s.system.fronthaul_bps);
    }
    let tau_f = tau_f * up;

    let n_l = -fl.v_l() * eta_l.log2() * up;
    let tau_c = (n_l * fl.compute_time_per_iteration()).max(TAU_FLOOR) * up;
    let n_g = fl.v_g() / (1.0 - eta_l) * up;
    let tau_total = n_g * (tau_c + tau_w + tau_f) * up;

    Ok(PrimalPoint {
        q,
        w,
        bits,
        r_e,
        r_c,
        r_f,
        mu_f,
        tau_c,
        tau_w,
        tau_f,
        tau_total,
        eta_l,
        n_l,
        n_g,
    })
}

/// Transmit factors `sqrt(P / (splits M_I)) I` on each active split.
pub fn default_factors(s: &Scenario, scheme: Scheme) -> TransmitCovariances {
    let splits = if scheme == Scheme::RateSplit { 2.0 } else { 1.0 };
    let amp = (s.p_tx() / (splits * s.m_i() as f64)).sqrt();
    let f = ComplexMatrix::scaled_identity(s.m_i(), amp);
    let z = ComplexMatrix::zeros(s.m_i(), s.m_i());
    TransmitCovariances {
        edge: vec![if scheme.has_edge() { f.clone() } else { z.clone() }; s.n_ids()],
        cloud: vec![if scheme.has_cloud() { f } else { z }; s.n_ids()],
    }
}

/// Algorithm start: equal power per split, `Omega_i = sigma^2 I`, bits split in
/// proportion to the achieved rates, `eta_L = 1/2`.
pub fn init_point(s: &Scenario, opts: &SubproblemOptions) -> Result<PrimalPoint, ModelError> {
    let q = default_factors(s, opts.scheme);
    let w = QuantizerCovariances::scaled_identity(s.n_aps(), s.m_a(), s.noise());
    let r = rates(s, &q, &w)?;
    let d_k = s.fl.bits_per_model;
    let mut edge = Vec::with_capacity(s.n_ids());
    for k in 0..s.n_ids() {
        let (re, rc) = match opts.scheme {
            Scheme::RateSplit => (r.r_e[k], r.r_c[k]),
            Scheme::EdgeOnly => (r.r_e[k], 0.0),
            Scheme::CloudOnly => (0.0, r.r_c[k]),
        };
        if !(re + rc > 0.0) {
            return Err(ModelError::Degenerate(format!("ID {k} has zero achievable rate")));
        }
        edge.push(d_k * re / (re + rc));
    }
    let bits = BitSplit {
        cloud: edge.iter().map(|e| d_k - e).collect(),
        edge,
    };
    interior_point(s, &q, &w, &bits, 0.5, opts, START_MARGIN)
}

/// True completion time of the physical variables of `x`.
pub fn true_latency(s: &Scenario, x: &PrimalPoint, opts: &SubproblemOptions) -> Result<LatencyReport, ModelError> {
    let forwarding = if opts.scheme.has_cloud() {
        Forwarding::Quantized
    } else {
        opts.forwarding
    };
    latency_breakdown_full(s, &x.q, &x.w, &x.bits, x.eta_l, forwarding, opts.fronthaul_all_ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    pub e_th: f64,
    pub t_max: usize,
    pub subproblem: SubproblemOptions,
    pub solver: SolverSettings,
}

impl ScaOptions {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            e_th: 1e-4,
            t_max: 100,
            subproblem: SubproblemOptions::new(scheme),
            solver: SolverSettings::default(),
        }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self {
            subproblem: SubproblemOptions {
                scheme,
                ..self.subproblem
            },
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Threshold,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemStats {
    pub newton_steps: usize,
    pub stages: usize,
    pub start_objective: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub scheme: Scheme,
    /// True completion time of the start and after every iteration.
    pub trajectory: Vec<f64>,
    pub point: PrimalPoint,
    pub latency: LatencyReport,
    pub iterations: usize,
    pub terminated_by: Termination,
    pub wall_time: f64,
    pub subproblems: Vec<SubproblemStats>,
}

impl SolveReport {
    pub fn tau_total(&self) -> f64 {
        self.latency.tau_total
    }

    /// Transmit covariances `Q_m,k = Q~ Q~^H`.
    pub fn covariances(&self) -> (Vec<HermitianMatrix>, Vec<HermitianMatrix>) {
        let q = &self.point.q;
        ((0..q.edge.len()).map(|k| q.q_edge(k)).collect(), (0..q.cloud.len()).map(|k| q.q_cloud(k)).collect())
    }
}

/// Runs the algorithm from [`init_point`].
pub fn run(s: &Scenario, opts: &ScaOptions) -> Result<SolveReport, SolverError> {
    let start = init_point(s, &opts.subproblem)?;
    run_from(s, &start, opts)
}

/// Runs the algorithm from the physical variables of `start`.
pub fn run_from(s: &Scenario, start: &PrimalPoint, opts: &ScaOptions) -> Result<SolveReport, SolverError> {
    let clock = Instant::now();
    let sub = &opts.subproblem;
    let tighten = |x: &PrimalPoint| {
        let q = x.q.canonical();
        let mut out = interior_point(s, &q, &x.w, &x.bits, x.eta_l, sub, START_MARGIN);
        for &m in &FALLBACK_MARGINS {
            if out.is_ok() {
                break;
            }
            out = interior_point(s, &q, &x.w, &x.bits, x.eta_l, sub, m);
        }
        out
    };
    let mut x = tighten(start)?;
    let mut latency = true_latency(s, &x, sub)?;
    let mut trajectory = vec![latency.tau_total];
    let mut stats = Vec::new();
    let mut t = 0;
    let terminated_by = loop {
        t += 1;
        let wrap = |e: SolverError| SolverError::Iteration {
            iteration: t,
            source: Box::new(e),
        };
        let step = || -> Result<(PrimalPoint, SubproblemStats), SolverError> {
            let tight = tighten(&x)?;
            let aux = update_auxiliaries(s, &tight)?;
            let prog = assemble_subproblem(s, &aux, *sub)?;
            let out = solve(&prog, &prog.layout.pack(&tight), &opts.solver)?;
            let stat = SubproblemStats {
                newton_steps: out.newton_steps,
                stages: out.stage_objectives.len(),
                start_objective: out.start_objective,
                objective: out.objective,
            };
            Ok((prog.layout.unpack(&out.z), stat))
        };
        let (next, stat) = step().map_err(wrap)?;
        let next_latency = true_latency(s, &next, sub).map_err(|e| wrap(e.into()))?;
        stats.push(stat);
        let prev = latency.tau_total;
        x = next;
        latency = next_latency;
        trajectory.push(latency.tau_total);
        if (latency.tau_total - prev).abs() < opts.e_th {
            break Termination::Threshold;
        }
        if t >= opts.t_max {
            break Termination::MaxIter;
        }
    };
    Ok(SolveReport {
        scheme: sub.scheme,
        trajectory,
        point: x,
        latency,
        iterations: t,
        terminated_by,
        wall_time: clock.elapsed().as_secs_f64(),
        subproblems: stats,
    })
}

/// Places a baseline solution in the rate-splitting variable space with a
/// fixed power fraction on the empty split and a negligible share of the
/// bits; the quantizer noise is multiplied by `omega_scale`.
pub fn embed_with(s: &Scenario, x: &PrimalPoint, from: Scheme, power_fraction: f64, omega_scale: f64) -> PrimalPoint {
    let amp = (power_fraction * s.p_tx() / s.m_i() as f64).sqrt();
    let keep = (1.0 - power_fraction).sqrt();
    let small = ComplexMatrix::scaled_identity(s.m_i(), amp);
    let d_k = s.fl.bits_per_model;
    let mut y = x.clone();
    let edge_fraction = match from {
        Scheme::EdgeOnly => 1.0 - MIN_BIT_FRACTION,
        Scheme::CloudOnly => MIN_BIT_FRACTION,
        Scheme::RateSplit => return y,
    };
    for k in 0..s.n_ids() {
        match from {
            Scheme::EdgeOnly => {
                y.q.edge[k] = x.q.edge[k].scale(keep);
                y.q.cloud[k] = small.clone();
            }
            _ => {
                y.q.cloud[k] = x.q.cloud[k].scale(keep);
                y.q.edge[k] = small.clone();
            }
        }
    }
    for o in &mut y.w.omega {
        *o = o.scale(omega_scale);
    }
    y.bits = BitSplit::from_fractions(d_k, &vec![edge_fraction; s.n_ids()]);
    y
}

/// The [`embed_with`] candidate with the lowest true completion time among
/// those whose empty split clears the rate floor. An edge-only solution may
/// have pushed the quantizer noise so high that the cloud split needs it
/// reduced first.
pub fn embed_baseline(s: &Scenario, x: &PrimalPoint, from: Scheme) -> Result<PrimalPoint, ModelError> {
    let opts = SubproblemOptions::new(Scheme::RateSplit);
    let shrinks = if from == Scheme::EdgeOnly { EMBED_OMEGA_SHRINKS } else { 0 };
    let mut best: Option<(f64, PrimalPoint)> = None;
    let mut last_err = None;
    for &f in &EMBED_POWER_FRACTIONS {
        for j in 0..=shrinks {
            let y = embed_with(s, x, from, f, 10f64.powi(-(j as i32)));
            let tried = interior_point(s, &y.q, &y.w, &y.bits, y.eta_l, &opts, START_MARGIN)
                .and_then(|p| true_latency(s, &p, &opts).map(|l| (l.tau_total, y)));
            match tried {
                Ok((tau, y)) => {
                    if best.as_ref().map_or(true, |(b, _)| tau < *b) {
                        best = Some((tau, y));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
    }
    best.map(|(_, y)| y)
        .ok_or_else(|| last_err.unwrap_or_else(|| ModelError::Degenerate("no embedding".into())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartReport {
    pub best: SolveReport,
    /// Final completion time per start, in the order default, edge, cloud, warm.
    pub starts: Vec<(&'static str, Option<f64>)>,
}

/// Rate-splitting runs from the default start, the embedded baseline
/// solutions and an optional warm start; the best result is reported.
pub fn run_multistart(
    s: &Scenario,
    opts: &ScaOptions,
    edge: Option<&SolveReport>,
    cloud: Option<&SolveReport>,
    warm: Option<&PrimalPoint>,
) -> Result<MultistartReport, SolverError> {
    let opts = opts.with_scheme(Scheme::RateSplit);
    let mut starts: Vec<(&'static str, Result<PrimalPoint, SolverError>)> = vec![(
        "default",
        init_point(s, &opts.subproblem).map_err(SolverError::from),
    )];
    if let Some(e) = edge {
        starts.push(("edge", embed_baseline(s, &e.point, Scheme::EdgeOnly).map_err(SolverError::from)));
    }
    if let Some(c) = cloud {
        starts.push(("cloud", embed_baseline(s, &c.point, Scheme::CloudOnly).map_err(SolverError::from)));
    }
    if let Some(w) = warm {
        starts.push(("warm", Ok(w.clone())));
    }
    let mut best: Option<SolveReport> = None;
    let mut first_err = None;
    let mut summary = Vec::new();
    for (label, start) in starts {
        match start.and_then(|x| run_from(s, &x, &opts)) {
            Ok(r) => {
                summary.push((label, Some(r.tau_total())));
                if best.as_ref().map_or(true, |b| r.tau_total() < b.tau_total()) {
                    best = Some(r);
                }
            }
            Err(e) => {
                summary.push((label, None));
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(best) => Ok(MultistartReport { best, starts: summary }),
        None => Err(first_err.expect("at least one start")),
    }
}

/// One original/surrogate comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub family: Family,
    pub index: usize,
    /// Slack of the original (non-convex) constraint.
    pub original: f64,
    /// Slack of its convexified counterpart.
    pub surrogate: f64,
}

impl Residual {
    /// Original minus surrogate slack; nonnegative, zero when tight.
    pub fn gap(&self) -> f64 {
        self.original - self.surrogate
    }
}

/// Slacks of the original constraints next to those of the surrogates
/// assembled from `aux`, for every convexified family.
pub fn convexified_residuals(
    s: &Scenario,
    x: &PrimalPoint,
    aux: &AuxPoint,
    opts: &SubproblemOptions,
) -> Result<Vec<Residual>, SolverError> {
    let prog = assemble_subproblem(s, aux, *opts)?;
    let z = prog.layout.pack(x);
    let r = rates(s, &x.q, &x.w)?;
    let bw = s.system.bandwidth_hz;
    let mut out = Vec::new();
    for c in &prog.constraints {
        let original = match c.family {
            Family::Epigraph => x.tau_total / x.n_g - (x.tau_c + x.tau_w + x.tau_f),
            Family::Wireless => {
                let k = c.index / 2;
                let (d, rate) = if c.index % 2 == 0 {
                    (x.bits.edge[k], x.r_e[k])
                } else {
                    (x.bits.cloud[k], x.r_c[k])
                };
                x.tau_w / d - 1.0 / rate
            }
            Family::FronthaulRate => x.mu_f[c.index] / x.tau_w - x.r_f[c.index],
            Family::EdgeRate => r.r_e[c.index] / bw - x.r_e[c.index] / bw,
            Family::CloudRate => r.r_c[c.index] / bw - x.r_c[c.index] / bw,
            Family::Compression => x.r_f[c.index] - r.g[c.index],
            _ => continue,
        };
        let surrogate = -c.value(&z).unwrap_or(f64::NEG_INFINITY);
        out.push(Residual {
            family: c.family,
            index: c.index,
            original,
            surrogate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, FLConfig, SystemConfig};

    fn scenario(n_ids: usize, n_aps: usize, m_i: usize, seed: u64) -> Scenario {
        let sys = SystemConfig {
            seed,
            n_aps,
            m_i,
            ..SystemConfig::with_ids(n_ids)
        };
        generate_scenario(&sys, &FLConfig::default()).unwrap()
    }

    #[test]
    fn default_factors_use_full_power() {
        let s = scenario(3, 2, 2, 1);
        for scheme in Scheme::ALL {
            let q = default_factors(&s, scheme);
            for k in 0..s.n_ids() {
                assert!((q.power(k) - s.p_tx()).abs() <= 1e-12 * s.p_tx(), "{scheme}");
            }
        }
    }

    #[test]
    fn init_point_is_deterministic_and_feasible() {
        let s = scenario(3, 2, 2, 4);
        for scheme in Scheme::ALL {
            let opts = SubproblemOptions::new(scheme);
            let x = init_point(&s, &opts).unwrap();
            assert_eq!(x, init_point(&scenario(3, 2, 2, 4), &opts).unwrap());
            let aux = update_auxiliaries(&s, &x).unwrap();
            let p = assemble_subproblem(&s, &aux, opts).unwrap();
            assert!(p.is_strictly_feasible(&p.layout.pack(&x)), "{scheme}");
            assert_eq!(x.eta_l, 0.5);
        }
    }

    #[test]
    fn surrogates_are_tight_at_their_own_point() {
        for seed in 0..4 {
            let s = scenario(3, 2, 2, seed);
            let opts = SubproblemOptions::new(Scheme::RateSplit);
            let x = init_point(&s, &opts).unwrap();
            let aux = update_auxiliaries(&s, &x).unwrap();
            let res = convexified_residuals(&s, &x, &aux, &opts).unwrap();
            assert!(res.iter().any(|r| r.family == Family::Compression));
            for r in &res {
                let tol = if r.family == Family::Compression { 1e-9 } else { 1e-8 };
                assert!(r.gap().abs() <= tol * r.original.abs().max(1.0), "{r:?}");
            }
        }
    }

    #[test]
    fn scaled_epigraph_weight_loosens_the_bound() {
        let s = scenario(2, 2, 1, 2);
        let opts = SubproblemOptions::new(Scheme::RateSplit);
        let x = init_point(&s, &opts).unwrap();
        let mut aux = update_auxiliaries(&s, &x).unwrap();
        aux.lambda_total *= 1.1;
        let res = convexified_residuals(&s, &x, &aux, &opts).unwrap();
        let epi = res.iter().find(|r| r.family == Family::Epigraph).unwrap();
        assert!(epi.gap() > 0.0, "{epi:?}");
    }

    #[test]
    fn rate_above_achievable_gives_negative_gap() {
        let s = scenario(2, 2, 1, 3);
        let opts = SubproblemOptions::new(Scheme::RateSplit);
        let x = init_point(&s, &opts).unwrap();
        let aux = update_auxiliaries(&s, &x).unwrap();
        let mut y = x.clone();
        y.r_e[0] *= 2.0;
        let res = convexified_residuals(&s, &y, &aux, &opts).unwrap();
        let edge = res.iter().find(|r| r.family == Family::EdgeRate && r.index == 0).unwrap();
        assert!(edge.original < 0.0 && edge.surrogate < 0.0, "{edge:?}");
    }

    #[test]
    fn huge_threshold_stops_after_one_iteration() {
        let s = scenario(2, 2, 1, 5);
        let mut opts = ScaOptions::new(Scheme::RateSplit);
        opts.e_th = 1e9;
        let r = run(&s, &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.terminated_by, Termination::Threshold);
        assert_eq!(r.trajectory.len(), 2);
    }

    #[test]
    fn trajectory_is_nonincreasing_and_reproducible() {
        let s = scenario(3, 2, 1, 6);
        for scheme in Scheme::ALL {
            let opts = ScaOptions::new(scheme);
            let r = run(&s, &opts).unwrap();
            for w in r.trajectory.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "{scheme}: {w:?}");
            }
            assert_eq!(r.trajectory, run(&s, &opts).unwrap().trajectory);
            assert!(r.point.eta_l > 0.0 && r.point.eta_l < 1.0);
        }
    }

    #[test]
    fn baselines_keep_their_split_frozen() {
        let s = scenario(3, 2, 2, 7);
        let e = run(&s, &ScaOptions::new(Scheme::EdgeOnly)).unwrap();
        let c = run(&s, &ScaOptions::new(Scheme::CloudOnly)).unwrap();
        let d_k = s.fl.bits_per_model;
        for k in 0..s.n_ids() {
            assert_eq!(e.point.bits.edge[k], d_k);
            assert!(e.point.q.cloud[k].is_zero());
            assert_eq!(c.point.bits.edge[k], 0.0);
            assert!(c.point.q.edge[k].is_zero());
        }
        let (qe, _) = e.covariances();
        assert!((qe[0].trace() - e.point.q.edge[0].frobenius_norm_sq()).abs() <= 1e-9 * qe[0].trace());
    }

    #[test]
    fn unlimited_fronthaul_is_no_slower() {
        let mut sys = SystemConfig {
            seed: 8,
            ..SystemConfig::with_ids(2)
        };
        sys.fronthaul_bps = 50e6;
        let slow = generate_scenario(&sys, &FLConfig::default()).unwrap();
        sys.fronthaul_bps = 1e12;
        let fast = generate_scenario(&sys, &FLConfig::default()).unwrap();
        for scheme in Scheme::ALL {
            let opts = ScaOptions::new(scheme);
            let a = run(&slow, &opts).unwrap().tau_total();
            let b = run(&fast, &opts).unwrap().tau_total();
            assert!(b <= a * (1.0 + 1e-3), "{scheme}: {b} > {a}");
        }
    }

    #[test]
    fn embedded_baselines_are_valid_starts() {
        let s = scenario(3, 2, 1, 9);
        for from in [Scheme::EdgeOnly, Scheme::CloudOnly] {
            let r = run(&s, &ScaOptions::new(from)).unwrap();
            let y = embed_baseline(&s, &r.point, from).unwrap();
            let opts = SubproblemOptions::new(Scheme::RateSplit);
            let tau = true_latency(&s, &y, &opts).unwrap().tau_total;
            assert!(tau <= r.tau_total() * 1.01, "{from}: {tau} vs {}", r.tau_total());
        }
    }

    #[test]
    fn single_ap_edge_only_fronthaul_components() {
        let s = scenario(3, 1, 1, 10);
        let d_k = s.fl.bits_per_model;
        let decoded = 3.0 * d_k / s.system.fronthaul_bps;
        let q = ScaOptions::new(Scheme::EdgeOnly);
        let mut d = q.clone();
        d.subproblem.forwarding = Forwarding::DecodedOnly;
        let rq = run(&s, &q).unwrap();
        let rd = run(&s, &d).unwrap();
        assert!(rq.latency.r_f[0] > 0.0);
        assert!(rq.latency.tau_f > decoded);
        assert!((rd.latency.tau_f - decoded).abs() <= 1e-9 * decoded, "{} vs {decoded}", rd.latency.tau_f);
        assert!(rd.tau_total() <= rq.tau_total() * (1.0 + 1e-3));
    }
}

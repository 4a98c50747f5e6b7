#![allow(dead_code)]

use fogfl_core::matrixcore::ComplexMatrix;
use fogfl_core::phymodel::{BitSplit, QuantizerCovariances, TransmitCovariances};
use fogfl_core::sca::{interior_point, START_MARGIN};
use fogfl_core::scenario::rng::Stream;
use fogfl_core::scenario::{generate_scenario, FLConfig, Scenario, Scheme, SystemConfig};
use fogfl_core::subsolver::{PrimalPoint, SubproblemOptions};

pub fn system(n_ids: usize, n_aps: usize, m_i: usize, seed: u64) -> SystemConfig {
    SystemConfig {
        seed,
        n_aps,
        m_i,
        ..SystemConfig::with_ids(n_ids)
    }
}

pub fn scenario(n_ids: usize, n_aps: usize, m_i: usize, seed: u64) -> Scenario {
    generate_scenario(&system(n_ids, n_aps, m_i, seed), &FLConfig::default()).unwrap()
}

pub fn uniform(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

fn gaussian_matrix(rng: &mut Stream, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// Random transmit factors using a random share of the power budget, split
/// randomly between the active splits.
pub fn random_factors(s: &Scenario, scheme: Scheme, rng: &mut Stream) -> TransmitCovariances {
    let m = s.m_i();
    let mut q = TransmitCovariances::zeros(s.n_ids(), m);
    for k in 0..s.n_ids() {
        let budget = s.p_tx() * uniform(rng, 0.2, 0.95);
        let share = match scheme {
            Scheme::RateSplit => uniform(rng, 0.1, 0.9),
            Scheme::EdgeOnly => 1.0,
            Scheme::CloudOnly => 0.0,
        };
        let mut fit = |power: f64| {
            let g = gaussian_matrix(rng, m, m);
            g.scale((power / g.frobenius_norm_sq()).sqrt())
        };
        if share > 0.0 {
            q.edge[k] = fit(budget * share);
        }
        if share < 1.0 {
            q.cloud[k] = fit(budget * (1.0 - share));
        }
    }
    q
}

/// `sigma^2 (a I + c G G^H)` with log-uniform `a` and random `G`.
pub fn random_quantizers(s: &Scenario, rng: &mut Stream) -> QuantizerCovariances {
    let m = s.m_a();
    QuantizerCovariances {
        omega: (0..s.n_aps())
            .map(|_| {
                let a = 10f64.powf(uniform(rng, -2.0, 1.0));
                let g = gaussian_matrix(rng, m, m);
                let c = uniform(rng, 0.0, 0.5) * a / m as f64;
                g.gram().scale(c * s.noise()).add_scaled_identity(a * s.noise())
            })
            .collect(),
    }
}

pub fn random_bits(s: &Scenario, rng: &mut Stream) -> BitSplit {
    let f: Vec<f64> = (0..s.n_ids()).map(|_| uniform(rng, 0.05, 0.95)).collect();
    BitSplit::from_fractions(s.fl.bits_per_model, &f)
}

/// A strictly feasible point of the subproblem built around random physical
/// variables.
pub fn random_point(s: &Scenario, opts: &SubproblemOptions, rng: &mut Stream) -> PrimalPoint {
    loop {
        let q = random_factors(s, opts.scheme, rng);
        let w = random_quantizers(s, rng);
        let bits = random_bits(s, rng);
        let eta = uniform(rng, 0.05, 0.95);
        if let Ok(x) = interior_point(s, &q, &w, &bits, eta, opts, START_MARGIN) {
            return x;
        }
    }
}

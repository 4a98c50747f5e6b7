//! Reproducible network instances: node placement, fading channels and the
//! AP-ID association.

mod config;
pub mod rng;

pub use config::{parse_config, render_config, ExperimentConfig, FLConfig, Scheme, SystemConfig, KEYS};

use crate::error::ModelError;
use crate::matrixcore::ComplexMatrix;
use rng::{channel_stream, Stream, POSITION_STREAM};

/// Maximum rejection-sampling draws before giving up on a placement.
pub const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemConfig,
    pub fl: FLConfig,
    pub ap_positions: Vec<[f64; 2]>,
    pub id_positions: Vec<[f64; 2]>,
    /// `channels[i][k]` is `H_{i,k}` (`m_a x m_i`) from ID `k` to AP `i`.
    pub channels: Vec<Vec<ComplexMatrix>>,
    /// Serving AP `i_k` of each ID.
    pub association: Vec<usize>,
    /// `served[i]` lists the IDs with `i_k = i`, ascending.
    pub served: Vec<Vec<usize>>,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Amplitude gain `rho_0 (dist / dist_0)^(-gamma/2)` with `rho_0` in dB
/// applied as an amplitude factor `10^(rho_0/20)`.
pub fn pathloss_amplitude(sys: &SystemConfig, dist: f64) -> f64 {
    10f64.powf(sys.ref_gain_db / 20.0) * (dist / sys.ref_dist_m).powf(-sys.pathloss_exp / 2.0)
}

/// Places `n_aps` APs followed by `n_ids` IDs uniformly in the disc, keeping
/// every pair at least `min_sep_m` apart.
fn place_nodes(sys: &SystemConfig) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>), ModelError> {
    let mut stream = Stream::new(sys.seed, POSITION_STREAM);
    let total = sys.n_aps + sys.n_ids;
    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(total);
    let mut attempts = 0u64;
    while placed.len() < total {
        if attempts >= MAX_PLACEMENT_ATTEMPTS {
            return Err(ModelError::InfeasibleGeometry { attempts });
        }
        attempts += 1;
        let p = stream.point_in_disc(sys.radius_m);
        if placed.iter().all(|&q| distance(p, q) >= sys.min_sep_m) {
            placed.push(p);
        }
    }
    let ids = placed.split_off(sys.n_aps);
    Ok((placed, ids))
}

/// Small-scale fading `H~_{i,k}` with i.i.d. `CN(0, 1)` entries, row-major
/// draw order.
pub fn fading_matrix(sys: &SystemConfig, ap: usize, id: usize) -> ComplexMatrix {
    let mut stream = Stream::new(sys.seed, channel_stream(ap, id, sys.n_ids));
    let mut m = ComplexMatrix::zeros(sys.m_a, sys.m_i);
    for r in 0..sys.m_a {
        for c in 0..sys.m_i {
            m.set(r, c, stream.complex_normal());
        }
    }
    m
}

pub fn generate_scenario(sys: &SystemConfig, fl: &FLConfig) -> Result<Scenario, ModelError> {
    sys.validate()
        .and_then(|_| fl.validate())
        .map_err(|e| ModelError::Degenerate(e.to_string()))?;
    let (ap_positions, id_positions) = place_nodes(sys)?;
    let channels = (0..sys.n_aps)
        .map(|i| {
            (0..sys.n_ids)
                .map(|k| {
                    let gain = pathloss_amplitude(sys, distance(ap_positions[i], id_positions[k]));
                    fading_matrix(sys, i, k).scale(gain)
                })
                .collect()
        })
        .collect();
    let association: Vec<usize> = id_positions
        .iter()
        .map(|&p| {
            let mut best = 0;
            for i in 1..sys.n_aps {
                if distance(p, ap_positions[i]) < distance(p, ap_positions[best]) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Scenario::from_parts(sys.clone(), fl.clone(), ap_positions, id_positions, channels, association)
}

impl Scenario {
    /// Assembles a scenario from explicit channels, e.g. for hand-built test
    /// instances. Positions may be empty.
    pub fn from_parts(
        system: SystemConfig,
        fl: FLConfig,
        ap_positions: Vec<[f64; 2]>,
        id_positions: Vec<[f64; 2]>,
        channels: Vec<Vec<ComplexMatrix>>,
        association: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let (na, ni) = (system.n_aps, system.n_ids);
        if channels.len() != na || channels.iter().any(|row| row.len() != ni) {
            return Err(ModelError::Dimension(format!("expected {na}x{ni} channel matrices")));
        }
        for row in &channels {
            for h in row {
                if h.rows() != system.m_a || h.cols() != system.m_i {
                    return Err(ModelError::Dimension(format!(
                        "channel is {}x{}, expected {}x{}",
                        h.rows(),
                        h.cols(),
                        system.m_a,
                        system.m_i
                    )));
                }
                if !h.is_finite() {
                    return Err(ModelError::Degenerate("non-finite channel".into()));
                }
            }
        }
        if association.len() != ni || association.iter().any(|&i| i >= na) {
            return Err(ModelError::Dimension("association must map every ID to an AP".into()));
        }
        let mut served = vec![Vec::new(); na];
        for (k, &i) in association.iter().enumerate() {
            served[i].push(k);
        }
        Ok(Self {
            system,
            fl,
            ap_positions,
            id_positions,
            channels,
            association,
            served,
        })
    }

    pub fn n_ids(&self) -> usize {
        self.system.n_ids
    }

    pub fn n_aps(&self) -> usize {
        self.system.n_aps
    }

    pub fn m_i(&self) -> usize {
        self.system.m_i
    }

    pub fn m_a(&self) -> usize {
        self.system.m_a
    }

    pub fn p_tx(&self) -> f64 {
        self.system.p_tx()
    }

    pub fn noise(&self) -> f64 {
        self.system.noise_power
    }

    pub fn channel(&self, ap: usize, id: usize) -> &ComplexMatrix {
        &self.channels[ap][id]
    }

    /// `H_k`: all APs' channels from ID `k`, stacked vertically.
    pub fn stacked_channel(&self, id: usize) -> ComplexMatrix {
        let parts: Vec<&ComplexMatrix> = (0..self.n_aps()).map(|i| &self.channels[i][id]).collect();
        ComplexMatrix::vstack(&parts).expect("channels share m_i columns")
    }

    pub fn is_served_by(&self, id: usize, ap: usize) -> bool {
        self.association[id] == ap
    }

    /// Same topology and channels with different system constants that do
    /// not affect generation (fronthaul capacity, bandwidth, power).
    pub fn with_system(&self, system: SystemConfig) -> Self {
        Self {
            system,
            ..self.clone()
        }
    }
}

//! Closed-form model quantities: interference covariances, achievable rates,
//! compression rate, iteration bounds and the completion-time breakdown.
//!
//! Rates are computed by whitening with a Cholesky factor of the interference
//! covariance, `log2 det(I + (L^-1 H Q~)^H (L^-1 H Q~))`, which is exact and
//! returns zero for a zero covariance.

use crate::error::ModelError;
use crate::matrixcore::{forward_substitute, logdet2, ComplexMatrix, HermitianMatrix};
use crate::scenario::{FLConfig, Scenario};

/// Square-root factors `Q~_{m,k}` of the transmit covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariances {
    pub edge: Vec<ComplexMatrix>,
    pub cloud: Vec<ComplexMatrix>,
}

impl TransmitCovariances {
    pub fn zeros(n_ids: usize, m_i: usize) -> Self {
        Self {
            edge: vec![ComplexMatrix::zeros(m_i, m_i); n_ids],
            cloud: vec![ComplexMatrix::zeros(m_i, m_i); n_ids],
        }
    }

    pub fn q_edge(&self, k: usize) -> HermitianMatrix {
        self.edge[k].gram()
    }

    pub fn q_cloud(&self, k: usize) -> HermitianMatrix {
        self.cloud[k].gram()
    }

    /// Same covariances with every factor lower triangular with a real
    /// diagonal.
    pub fn canonical(&self) -> Self {
        Self {
            edge: self.edge.iter().map(|f| f.lower_triangular_factor()).collect(),
            cloud: self.cloud.iter().map(|f| f.lower_triangular_factor()).collect(),
        }
    }

    /// `tr(Q_E,k) + tr(Q_C,k)`.
    pub fn power(&self, k: usize) -> f64 {
        self.edge[k].frobenius_norm_sq() + self.cloud[k].frobenius_norm_sq()
    }
}

/// Quantization-noise covariances `Omega_i`, one per AP.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerCovariances {
    pub omega: Vec<HermitianMatrix>,
}

impl QuantizerCovariances {
    pub fn scaled_identity(n_aps: usize, m_a: usize, s: f64) -> Self {
        Self {
            omega: vec![HermitianMatrix::scaled_identity(m_a, s); n_aps],
        }
    }

    /// Block-diagonal `Omega-bar`.
    pub fn stacked(&self) -> HermitianMatrix {
        HermitianMatrix::block_diag(&self.omega)
    }
}

/// Bits of each model update sent through edge and cloud decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct BitSplit {
    pub edge: Vec<f64>,
    pub cloud: Vec<f64>,
}

impl BitSplit {
    /// Splits `d_k` with `edge_fraction[k]` of the bits going to the edge.
    pub fn from_fractions(d_k: f64, edge_fraction: &[f64]) -> Self {
        let edge: Vec<f64> = edge_fraction.iter().map(|f| d_k * f).collect();
        let cloud = edge.iter().map(|e| d_k - e).collect();
        Self { edge, cloud }
    }

    pub fn all_edge(n_ids: usize, d_k: f64) -> Self {
        Self {
            edge: vec![d_k; n_ids],
            cloud: vec![0.0; n_ids],
        }
    }

    pub fn all_cloud(n_ids: usize, d_k: f64) -> Self {
        Self {
            edge: vec![0.0; n_ids],
            cloud: vec![d_k; n_ids],
        }
    }
}

/// Interference-plus-noise covariances seen by each decoder.
#[derive(Debug, Clone)]
pub struct Interference {
    /// `W_E,k` at the serving AP of ID `k`.
    pub edge: Vec<HermitianMatrix>,
    /// `W_A,i`: covariance of AP `i`'s SIC residual.
    pub residual: Vec<HermitianMatrix>,
    /// `W_C,k` at the cloud, stacked over APs.
    pub cloud: Vec<HermitianMatrix>,
}

fn check_dims(s: &Scenario, q: &TransmitCovariances, w: Option<&QuantizerCovariances>) -> Result<(), ModelError> {
    let (ni, mi) = (s.n_ids(), s.m_i());
    if q.edge.len() != ni || q.cloud.len() != ni {
        return Err(ModelError::Dimension(format!("expected {ni} transmit factors per split")));
    }
    for f in q.edge.iter().chain(&q.cloud) {
        if f.rows() != mi || f.cols() != mi {
            return Err(ModelError::Dimension(format!("transmit factor must be {mi}x{mi}")));
        }
    }
    if let Some(w) = w {
        if w.omega.len() != s.n_aps() || w.omega.iter().any(|o| o.dim() != s.m_a()) {
            return Err(ModelError::Dimension(format!(
                "expected {} quantizer covariances of size {}",
                s.n_aps(),
                s.m_a()
            )));
        }
    }
    Ok(())
}

/// `sigma^2 I + sum_l H_{ap,l} Q_{m,l} H^H` over the selected `(split, l)` pairs.
fn received_covariance(
    s: &Scenario,
    q: &TransmitCovariances,
    ap: usize,
    include: impl Fn(bool, usize) -> bool,
) -> HermitianMatrix {
    let mut acc = HermitianMatrix::scaled_identity(s.m_a(), s.noise());
    for l in 0..s.n_ids() {
        let h = s.channel(ap, l);
        for (is_edge, factor) in [(true, &q.edge[l]), (false, &q.cloud[l])] {
            if include(is_edge, l) && !factor.is_zero() {
                let hf = h * factor;
                acc = acc.add(&hf.gram());
            }
        }
    }
    acc
}

fn edge_interference(s: &Scenario, q: &TransmitCovariances, k: usize) -> HermitianMatrix {
    let ap = s.association[k];
    received_covariance(s, q, ap, |is_edge, l| !(is_edge && l == k))
}

fn residual_covariance(s: &Scenario, q: &TransmitCovariances, i: usize) -> HermitianMatrix {
    received_covariance(s, q, i, |is_edge, l| !(is_edge && s.is_served_by(l, i)))
}

fn cloud_interference(s: &Scenario, q: &TransmitCovariances, w: &QuantizerCovariances, k: usize) -> HermitianMatrix {
    let n = s.n_aps() * s.m_a();
    let mut acc = w.stacked().add_scaled_identity(s.noise());
    debug_assert_eq!(acc.dim(), n);
    for l in 0..s.n_ids() {
        if l != k && !q.cloud[l].is_zero() {
            let hf = &s.stacked_channel(l) * &q.cloud[l];
            acc = acc.add(&hf.gram());
        }
    }
    acc
}

pub fn interference_covariances(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
) -> Result<Interference, ModelError> {
    check_dims(s, q, Some(w))?;
    Ok(Interference {
        edge: (0..s.n_ids()).map(|k| edge_interference(s, q, k)).collect(),
        residual: (0..s.n_aps()).map(|i| residual_covariance(s, q, i)).collect(),
        cloud: (0..s.n_ids()).map(|k| cloud_interference(s, q, w, k)).collect(),
    })
}

/// `log2 det(I + W^-1 H Q~ Q~^H H^H)` via whitening.
pub fn whitened_rate(w: &HermitianMatrix, h_factor: &ComplexMatrix) -> Result<f64, ModelError> {
    if h_factor.is_zero() {
        return Ok(0.0);
    }
    let l = w.cholesky()?;
    let m = forward_substitute(&l, h_factor);
    let g = m.adjoint().gram();
    Ok(logdet2(&g.add_scaled_identity(1.0))?)
}

/// `R_E,k = B f_E,k` in bits/s.
pub fn edge_rate(s: &Scenario, q: &TransmitCovariances, k: usize) -> Result<f64, ModelError> {
    check_dims(s, q, None)?;
    let w = edge_interference(s, q, k);
    let hf = s.channel(s.association[k], k) * &q.edge[k];
    Ok(s.system.bandwidth_hz * whitened_rate(&w, &hf)?)
}

/// `R_C,k = B f_C,k` in bits/s.
pub fn cloud_rate(s: &Scenario, q: &TransmitCovariances, w: &QuantizerCovariances, k: usize) -> Result<f64, ModelError> {
    check_dims(s, q, Some(w))?;
    let wc = cloud_interference(s, q, w, k);
    let hf = &s.stacked_channel(k) * &q.cloud[k];
    Ok(s.system.bandwidth_hz * whitened_rate(&wc, &hf)?)
}

/// `g_i = log2 det(I + Omega_i^-1 W_A,i)` in bits per symbol.
pub fn compression_rate(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
    i: usize,
) -> Result<f64, ModelError> {
    check_dims(s, q, Some(w))?;
    compression_from_parts(&w.omega[i], &residual_covariance(s, q, i))
}

fn compression_from_parts(omega: &HermitianMatrix, residual: &HermitianMatrix) -> Result<f64, ModelError> {
    let l = omega.cholesky()?;
    let x = forward_substitute(&l, residual.as_matrix());
    let m = HermitianMatrix::from_raw(forward_substitute(&l, &x.adjoint()));
    Ok(logdet2(&m.add_scaled_identity(1.0))?)
}

/// Lower bounds `(n_L, n_G)` on the local and global iteration counts.
pub fn iteration_bounds(fl: &FLConfig, eta_l: f64) -> Result<(f64, f64), ModelError> {
    if !(eta_l > 0.0 && eta_l < 1.0) {
        return Err(ModelError::AccuracyOutOfRange(eta_l));
    }
    Ok((-fl.v_l() * eta_l.log2(), fl.v_g() / (1.0 - eta_l)))
}

/// Whether APs forward the quantized SIC residual on fronthaul.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forwarding {
    /// Every AP sends `B tau_W g_i` quantization bits.
    Quantized,
    /// No quantized stream; only decoded edge bits use the fronthaul.
    DecodedOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub tau_c: f64,
    pub tau_w: f64,
    pub tau_f: f64,
    pub tau_total: f64,
    pub n_l: f64,
    pub n_g: f64,
    /// `(ceil(n_L), ceil(n_G))`.
    pub n_ceil: (f64, f64),
    pub r_e: Vec<f64>,
    pub r_c: Vec<f64>,
    /// Compression rate `g_i`, bits per symbol.
    pub r_f: Vec<f64>,
}

/// Achievable rates at a given operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub r_e: Vec<f64>,
    pub r_c: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn rates(s: &Scenario, q: &TransmitCovariances, w: &QuantizerCovariances) -> Result<Rates, ModelError> {
    let inter = interference_covariances(s, q, w)?;
    let b = s.system.bandwidth_hz;
    let mut r_e = Vec::with_capacity(s.n_ids());
    let mut r_c = Vec::with_capacity(s.n_ids());
    for k in 0..s.n_ids() {
        let he = s.channel(s.association[k], k) * &q.edge[k];
        r_e.push(b * whitened_rate(&inter.edge[k], &he)?);
        let hc = &s.stacked_channel(k) * &q.cloud[k];
        r_c.push(b * whitened_rate(&inter.cloud[k], &hc)?);
    }
    let g = (0..s.n_aps())
        .map(|i| compression_from_parts(&w.omega[i], &inter.residual[i]))
        .collect::<Result<_, _>>()?;
    Ok(Rates { r_e, r_c, g })
}

/// Ids to sum over in the fronthaul-latency numerator of AP `i`.
pub fn fronthaul_ids(s: &Scenario, i: usize, all_ids: bool) -> Vec<usize> {
    if all_ids {
        (0..s.n_ids()).collect()
    } else {
        s.served[i].clone()
    }
}

pub fn latency_breakdown(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
    b: &BitSplit,
    eta_l: f64,
) -> Result<LatencyReport, ModelError> {
    latency_breakdown_with(s, q, w, b, eta_l, Forwarding::Quantized)
}

/// True completion time with `n_L`, `n_G` at their lower bounds. Splits with
/// zero bits are excluded from the wireless maximum.
pub fn latency_breakdown_with(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
    b: &BitSplit,
    eta_l: f64,
    forwarding: Forwarding,
) -> Result<LatencyReport, ModelError> {
    latency_breakdown_full(s, q, w, b, eta_l, forwarding, false)
}

/// As [`latency_breakdown_with`], optionally summing decoded bits of every ID
/// on each fronthaul link.
pub fn latency_breakdown_full(
    s: &Scenario,
    q: &TransmitCovariances,
    w: &QuantizerCovariances,
    b: &BitSplit,
    eta_l: f64,
    forwarding: Forwarding,
    fronthaul_all_ids: bool,
) -> Result<LatencyReport, ModelError> {
    if b.edge.len() != s.n_ids() || b.cloud.len() != s.n_ids() {
        return Err(ModelError::Dimension("bit split length".into()));
    }
    let (n_l, n_g) = iteration_bounds(&s.fl, eta_l)?;
    let rates = rates(s, q, w)?;

    let tau_c = n_l * s.fl.compute_time_per_iteration();

    let mut tau_w: f64 = 0.0;
    for k in 0..s.n_ids() {
        for (bits, rate) in [(b.edge[k], rates.r_e[k]), (b.cloud[k], rates.r_c[k])] {
            if bits > 0.0 {
                if !(rate > 0.0) {
                    return Err(ModelError::UnservableSplit { id: k, bits });
                }
                tau_w = tau_w.max(bits / rate);
            }
        }
    }

    let bw = s.system.bandwidth_hz;
    let mut tau_f: f64 = 0.0;
    for i in 0..s.n_aps() {
        let decoded: f64 = fronthaul_ids(s, i, fronthaul_all_ids).iter().map(|&k| b.edge[k]).sum();
        let quantized = match forwarding {
            Forwarding::Quantized => bw * tau_w * rates.g[i],
            Forwarding::DecodedOnly => 0.0,
        };
        tau_f = tau_f.max((decoded + quantized) / s.system.fronthaul_bps);
    }

    let r_f = match forwarding {
        Forwarding::Quantized => rates.g,
        Forwarding::DecodedOnly => vec![0.0; s.n_aps()],
    };
    Ok(LatencyReport {
        tau_c,
        tau_w,
        tau_f,
        tau_total: n_g * (tau_c + tau_w + tau_f),
        n_l,
        n_g,
        n_ceil: (n_l.ceil(), n_g.ceil()),
        r_e: rates.r_e,
        r_c: rates.r_c,
        r_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::C64;
    use crate::scenario::SystemConfig;

    /// One ID, one AP, scalar antennas, `|h|^2 = 1`, `sigma^2 = 1`, `B = 1`.
    fn scalar_scenario() -> Scenario {
        let sys = SystemConfig {
            n_aps: 1,
            m_i: 1,
            m_a: 1,
            bandwidth_hz: 1.0,
            ..SystemConfig::with_ids(1)
        };
        let h = ComplexMatrix::from_row_slice(1, 1, &[C64::new(0.6, 0.8)]).unwrap();
        Scenario::from_parts(sys, FLConfig::default(), vec![], vec![], vec![vec![h]], vec![0]).unwrap()
    }

    fn scalar_q(q_e: f64, q_c: f64) -> TransmitCovariances {
        TransmitCovariances {
            edge: vec![ComplexMatrix::from_real_diagonal(&[q_e.sqrt()])],
            cloud: vec![ComplexMatrix::from_real_diagonal(&[q_c.sqrt()])],
        }
    }

    fn omega(v: f64) -> QuantizerCovariances {
        QuantizerCovariances::scaled_identity(1, 1, v)
    }

    #[test]
    fn zero_power_leaves_noise() {
        let s = scalar_scenario();
        let inter = interference_covariances(&s, &scalar_q(0.0, 0.0), &omega(0.5)).unwrap();
        assert_eq!(inter.edge[0].get(0, 0).re, 1.0);
        assert_eq!(inter.residual[0].get(0, 0).re, 1.0);
        assert_eq!(inter.cloud[0].get(0, 0).re, 1.5);
    }

    #[test]
    fn scalar_edge_interference() {
        let s = scalar_scenario();
        let inter = interference_covariances(&s, &scalar_q(0.0, 2.0), &omega(1.0)).unwrap();
        assert!((inter.edge[0].get(0, 0).re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_edge_rates() {
        let s = scalar_scenario();
        assert_eq!(edge_rate(&s, &scalar_q(0.0, 1.0), 0).unwrap(), 0.0);
        assert!((edge_rate(&s, &scalar_q(1.0, 0.0), 0).unwrap() - 1.0).abs() < 1e-14);
        assert!((edge_rate(&s, &scalar_q(1.0, 1.0), 0).unwrap() - 1.5f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn scalar_cloud_rates() {
        let s = scalar_scenario();
        assert_eq!(cloud_rate(&s, &scalar_q(1.0, 0.0), &omega(1.0), 0).unwrap(), 0.0);
        let r = cloud_rate(&s, &scalar_q(0.0, 1.0), &omega(1.0), 0).unwrap();
        assert!((r - 1.5f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn two_ap_cloud_rate() {
        let sys = SystemConfig {
            n_aps: 2,
            m_i: 1,
            m_a: 1,
            bandwidth_hz: 1.0,
            ..SystemConfig::with_ids(1)
        };
        let h = ComplexMatrix::identity(1);
        let s = Scenario::from_parts(sys, FLConfig::default(), vec![], vec![], vec![vec![h.clone()], vec![h]], vec![0])
            .unwrap();
        let q = TransmitCovariances {
            edge: vec![ComplexMatrix::zeros(1, 1)],
            cloud: vec![ComplexMatrix::identity(1)],
        };
        let r = cloud_rate(&s, &q, &QuantizerCovariances::scaled_identity(2, 1, 1.0), 0).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn compression_limits() {
        let s = scalar_scenario();
        let g = compression_rate(&s, &scalar_q(0.0, 0.0), &omega(1.0), 0).unwrap();
        assert!((g - 1.0).abs() < 1e-14);
        let g = compression_rate(&s, &scalar_q(0.0, 0.0), &omega(1e9), 0).unwrap();
        assert!(g >= 0.0 && g < 1e-8);
    }

    #[test]
    fn iteration_bound_values() {
        let fl = FLConfig::default();
        let (n_l, n_g) = iteration_bounds(&fl, 0.5).unwrap();
        assert!((n_l - 4.0).abs() < 1e-12);
        assert!((n_g - 1105.2).abs() < 0.1);
        let (n_l, n_g) = iteration_bounds(&fl, 1.0 - 1e-12).unwrap();
        assert!(n_l < 1e-9 && n_g > 1e13);
        assert!(iteration_bounds(&fl, 0.0).is_err());
        assert!(iteration_bounds(&fl, 1.0).is_err());
    }

    #[test]
    fn wireless_time_is_bits_over_rate() {
        let mut s = scalar_scenario();
        // R_E = B log2(1 + 1) = B; d_E = B bits gives one second.
        s.system.bandwidth_hz = 28e3;
        s.fl.bits_per_model = 28e3;
        let b = BitSplit::all_edge(1, 28e3);
        let rep = latency_breakdown(&s, &scalar_q(1.0, 0.0), &omega(1.0), &b, 0.5).unwrap();
        assert!((rep.tau_w - 1.0).abs() < 1e-12);
        assert!((rep.tau_total - rep.n_g * (rep.tau_c + rep.tau_w + rep.tau_f)).abs() <= 1e-9 * rep.tau_total);
    }

    #[test]
    fn compute_time_from_reference_values() {
        let s = scalar_scenario();
        let b = BitSplit::all_edge(1, 28e3);
        let rep = latency_breakdown(&s, &scalar_q(1.0, 0.0), &omega(1.0), &b, 0.5).unwrap();
        assert!((rep.tau_c - 4.0 * 200.0 * 500.0 / 3e9).abs() < 1e-15);
        assert_eq!(rep.n_ceil, (4.0, 1106.0));
    }

    #[test]
    fn no_fronthaul_load_gives_zero_fronthaul_time() {
        let s = scalar_scenario();
        let b = BitSplit::all_cloud(1, 28e3);
        let rep =
            latency_breakdown_with(&s, &scalar_q(0.0, 1.0), &omega(1.0), &b, 0.5, Forwarding::DecodedOnly).unwrap();
        assert_eq!(rep.tau_f, 0.0);
    }

    #[test]
    fn unservable_split_is_an_error() {
        let s = scalar_scenario();
        let b = BitSplit::from_fractions(28e3, &[0.5]);
        let err = latency_breakdown(&s, &scalar_q(1.0, 0.0), &omega(1.0), &b, 0.5).unwrap_err();
        assert!(matches!(err, ModelError::UnservableSplit { id: 0, .. }));
    }

    #[test]
    fn zero_split_ignores_zero_rate() {
        let s = scalar_scenario();
        let b = BitSplit::all_edge(1, 28e3);
        assert!(latency_breakdown(&s, &scalar_q(1.0, 0.0), &omega(1.0), &b, 0.5).is_ok());
    }
}

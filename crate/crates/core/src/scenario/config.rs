//! Flat `key = value` experiment configuration.
//!
//! Lines are UTF-8, `#` starts a comment (whole-line or trailing), blank
//! lines are ignored. Every key except `n_ids` has a default taken from the
//! reference simulation setup; unknown or repeated keys are rejected.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

/// Which decoding strategy the IDs use for their model upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Split each message into an edge-decoded and a cloud-decoded part.
    RateSplit,
    /// `d_E = d_k`: the serving AP decodes everything.
    EdgeOnly,
    /// `d_E = 0`: the cloud decodes everything from quantized signals.
    CloudOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RateSplit, Scheme::EdgeOnly, Scheme::CloudOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::RateSplit => "rate_split",
            Scheme::EdgeOnly => "edge_only",
            Scheme::CloudOnly => "cloud_only",
        }
    }

    pub fn has_edge(self) -> bool {
        !matches!(self, Scheme::CloudOnly)
    }

    pub fn has_cloud(self) -> bool {
        !matches!(self, Scheme::EdgeOnly)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rate_split" => Ok(Scheme::RateSplit),
            "edge_only" => Ok(Scheme::EdgeOnly),
            "cloud_only" => Ok(Scheme::CloudOnly),
            other => Err(ConfigError::InvalidValue {
                key: "scheme".into(),
                reason: format!("`{other}` is not one of rate_split, edge_only, cloud_only"),
            }),
        }
    }
}

/// Network, radio and topology constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_ids: usize,
    pub n_aps: usize,
    pub m_i: usize,
    pub m_a: usize,
    pub bandwidth_hz: f64,
    pub fronthaul_bps: f64,
    /// `P_tx / sigma_z^2` in dB.
    pub snr_db: f64,
    /// `sigma_z^2`; fixed to 1.
    pub noise_power: f64,
    pub radius_m: f64,
    pub min_sep_m: f64,
    pub ref_gain_db: f64,
    pub ref_dist_m: f64,
    pub pathloss_exp: f64,
    pub seed: u64,
}

impl SystemConfig {
    /// Reference setup with `n_ids` devices.
    pub fn with_ids(n_ids: usize) -> Self {
        Self {
            n_ids,
            n_aps: 2,
            m_i: 1,
            m_a: 2,
            bandwidth_hz: 20e6,
            fronthaul_bps: 100e6,
            snr_db: 10.0,
            noise_power: 1.0,
            radius_m: 200.0,
            min_sep_m: 10.0,
            ref_gain_db: 10.0,
            ref_dist_m: 50.0,
            pathloss_exp: 3.0,
            seed: 0,
        }
    }

    /// Transmit power `P_tx` in linear units.
    pub fn p_tx(&self) -> f64 {
        self.noise_power * 10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("n_ids", self.n_ids),
            ("n_aps", self.n_aps),
            ("m_i", self.m_i),
            ("m_a", self.m_a),
        ] {
            if v == 0 {
                return Err(ConfigError::Invariant(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("fronthaul_bps", self.fronthaul_bps),
            ("radius_m", self.radius_m),
            ("ref_dist_m", self.ref_dist_m),
            ("pathloss_exp", self.pathloss_exp),
            ("noise_power", self.noise_power),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invariant(format!("{name} must be positive and finite")));
            }
        }
        if !self.snr_db.is_finite() || !self.ref_gain_db.is_finite() {
            return Err(ConfigError::Invariant("snr_db and ref_gain_db must be finite".into()));
        }
        if !(self.min_sep_m >= 0.0) || self.min_sep_m >= self.radius_m {
            return Err(ConfigError::Invariant("min_sep_m must lie in [0, radius_m)".into()));
        }
        Ok(())
    }
}

/// Training constants that fix the iteration-count bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FLConfig {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub xi: f64,
    pub eta_g: f64,
    pub samples_per_id: f64,
    pub bits_per_model: f64,
    pub cpu_hz: f64,
    pub cycles_per_sample: f64,
}

impl Default for FLConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 4.0,
            delta: 0.25,
            xi: 0.1,
            eta_g: 1e-3,
            samples_per_id: 500.0,
            bits_per_model: 28e3,
            cpu_hz: 3e9,
            cycles_per_sample: 200.0,
        }
    }
}

impl FLConfig {
    /// `v_L = 2 / ((2 - beta*delta) * delta * alpha)`.
    pub fn v_l(&self) -> f64 {
        2.0 / ((2.0 - self.beta * self.delta) * self.delta * self.alpha)
    }

    /// `v_G = -2 beta^2 ln(eta_G) / (alpha^2 xi)`.
    pub fn v_g(&self) -> f64 {
        -(2.0 * self.beta * self.beta * self.eta_g.ln()) / (self.alpha * self.alpha * self.xi)
    }

    /// Seconds of local computation per local iteration, `n_C D_k / c_k`.
    pub fn compute_time_per_iteration(&self) -> f64 {
        self.cycles_per_sample * self.samples_per_id / self.cpu_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
            ("samples_per_id", self.samples_per_id),
            ("bits_per_model", self.bits_per_model),
            ("cpu_hz", self.cpu_hz),
            ("cycles_per_sample", self.cycles_per_sample),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invariant(format!("{name} must be positive and finite")));
            }
        }
        if !(self.xi > 0.0 && self.xi <= self.alpha / self.beta) {
            return Err(ConfigError::Invariant("xi must lie in (0, alpha/beta]".into()));
        }
        if !(self.eta_g > 0.0 && self.eta_g < 1.0) {
            return Err(ConfigError::Invariant("eta_g must lie in (0, 1)".into()));
        }
        if !((2.0 - self.beta * self.delta) * self.delta * self.alpha > 0.0) {
            return Err(ConfigError::Invariant("(2−βδ)δα must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub fl: FLConfig,
    pub scheme: Scheme,
    /// Convergence threshold on the completion time, seconds.
    pub e_th: f64,
    pub t_max: usize,
}

pub const KEYS: [&str; 25] = [
    "n_ids",
    "n_aps",
    "m_i",
    "m_a",
    "bandwidth_hz",
    "fronthaul_bps",
    "snr_db",
    "radius_m",
    "min_sep_m",
    "ref_gain_db",
    "ref_dist_m",
    "pathloss_exp",
    "seed",
    "alpha",
    "beta",
    "delta",
    "xi",
    "eta_g",
    "samples_per_id",
    "bits_per_model",
    "cpu_hz",
    "cycles_per_sample",
    "scheme",
    "e_th",
    "t_max",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn parse_real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut sys = SystemConfig::with_ids(0);
    let mut fl = FLConfig::default();
    let mut scheme = Scheme::RateSplit;
    let mut e_th = 1e-4;
    let mut t_max = 100usize;
    let mut seen = HashSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or(ConfigError::Syntax { line: lineno + 1 })?;
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: lineno + 1 });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        match key {
            "n_ids" => sys.n_ids = parse_num(key, value)?,
            "n_aps" => sys.n_aps = parse_num(key, value)?,
            "m_i" => sys.m_i = parse_num(key, value)?,
            "m_a" => sys.m_a = parse_num(key, value)?,
            "bandwidth_hz" => sys.bandwidth_hz = parse_real(key, value)?,
            "fronthaul_bps" => sys.fronthaul_bps = parse_real(key, value)?,
            "snr_db" => sys.snr_db = parse_real(key, value)?,
            "radius_m" => sys.radius_m = parse_real(key, value)?,
            "min_sep_m" => sys.min_sep_m = parse_real(key, value)?,
            "ref_gain_db" => sys.ref_gain_db = parse_real(key, value)?,
            "ref_dist_m" => sys.ref_dist_m = parse_real(key, value)?,
            "pathloss_exp" => sys.pathloss_exp = parse_real(key, value)?,
            "seed" => sys.seed = parse_num(key, value)?,
            "alpha" => fl.alpha = parse_real(key, value)?,
            "beta" => fl.beta = parse_real(key, value)?,
            "delta" => fl.delta = parse_real(key, value)?,
            "xi" => fl.xi = parse_real(key, value)?,
            "eta_g" => fl.eta_g = parse_real(key, value)?,
            "samples_per_id" => fl.samples_per_id = parse_real(key, value)?,
            "bits_per_model" => fl.bits_per_model = parse_real(key, value)?,
            "cpu_hz" => fl.cpu_hz = parse_real(key, value)?,
            "cycles_per_sample" => fl.cycles_per_sample = parse_real(key, value)?,
            "scheme" => scheme = value.parse()?,
            "e_th" => e_th = parse_real(key, value)?,
            "t_max" => t_max = parse_num(key, value)?,
            _ => unreachable!("key list checked above"),
        }
    }

    if !seen.contains("n_ids") {
        return Err(ConfigError::Missing("n_ids"));
    }
    sys.validate()?;
    fl.validate()?;
    if !(e_th > 0.0) {
        return Err(ConfigError::Invariant("e_th must be positive".into()));
    }
    if t_max == 0 {
        return Err(ConfigError::Invariant("t_max must be at least 1".into()));
    }
    Ok(ExperimentConfig {
        system: sys,
        fl,
        scheme,
        e_th,
        t_max,
    })
}

/// Renders a config back to the file format, one key per line.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let s = &cfg.system;
    let f = &cfg.fl;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("n_ids", s.n_ids.to_string());
    kv("n_aps", s.n_aps.to_string());
    kv("m_i", s.m_i.to_string());
    kv("m_a", s.m_a.to_string());
    kv("bandwidth_hz", format!("{:?}", s.bandwidth_hz));
    kv("fronthaul_bps", format!("{:?}", s.fronthaul_bps));
    kv("snr_db", format!("{:?}", s.snr_db));
    kv("radius_m", format!("{:?}", s.radius_m));
    kv("min_sep_m", format!("{:?}", s.min_sep_m));
    kv("ref_gain_db", format!("{:?}", s.ref_gain_db));
    kv("ref_dist_m", format!("{:?}", s.ref_dist_m));
    kv("pathloss_exp", format!("{:?}", s.pathloss_exp));
    kv("seed", s.seed.to_string());
    kv("alpha", format!("{:?}", f.alpha));
    kv("beta", format!("{:?}", f.beta));
    kv("delta", format!("{:?}", f.delta));
    kv("xi", format!("{:?}", f.xi));
    kv("eta_g", format!("{:?}", f.eta_g));
    kv("samples_per_id", format!("{:?}", f.samples_per_id));
    kv("bits_per_model", format!("{:?}", f.bits_per_model));
    kv("cpu_hz", format!("{:?}", f.cpu_hz));
    kv("cycles_per_sample", format!("{:?}", f.cycles_per_sample));
    kv("scheme", cfg.scheme.to_string());
    kv("e_th", format!("{:?}", cfg.e_th));
    kv("t_max", cfg.t_max.to_string());
    out
}

//! Experiment driver: baseline runs, parameter sweeps and the grid oracle
//! for scalar instances.

pub mod oracle;
pub mod results;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::HarnessError;
use crate::phymodel::Forwarding;
use crate::sca::{run, run_from, run_multistart, ScaOptions, SolveReport};
use crate::scenario::{generate_scenario, ExperimentConfig, Scenario, Scheme, SystemConfig};
use crate::subsolver::PrimalPoint;

pub use oracle::{brute_force_tiny, OracleGrid, OracleResult};
pub use results::{parse_csv, parse_row, to_csv_string, write_csv, ResultRow, CSV_HEADER};

/// IDs per scenario when `--full` is given.
pub const FULL_SCALE_IDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    FronthaulBps,
    NAps,
    SnrDb,
}

impl SweepKey {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKey::FronthaulBps => "fronthaul_bps",
            SweepKey::NAps => "n_aps",
            SweepKey::SnrDb => "snr_db",
        }
    }

    pub fn apply(self, sys: &mut SystemConfig, value: f64) -> Result<(), HarnessError> {
        match self {
            SweepKey::FronthaulBps => sys.fronthaul_bps = value,
            SweepKey::SnrDb => sys.snr_db = value,
            SweepKey::NAps => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(HarnessError::Sweep(format!("n_aps value {value} is not a positive integer")));
                }
                sys.n_aps = value as usize;
            }
        }
        sys.validate()?;
        Ok(())
    }

    /// Whether a solution at one value stays dimensionally valid at the next.
    pub fn keeps_dimensions(self) -> bool {
        !matches!(self, SweepKey::NAps)
    }
}

impl fmt::Display for SweepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKey {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fronthaul_bps" => Ok(SweepKey::FronthaulBps),
            "n_aps" => Ok(SweepKey::NAps),
            "snr_db" => Ok(SweepKey::SnrDb),
            other => Err(HarnessError::Sweep(format!(
                "unknown sweep key `{other}` (expected fronthaul_bps, n_aps or snr_db)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub key: SweepKey,
    /// Strictly increasing.
    pub values: Vec<f64>,
    /// Seeds `base.system.seed .. base.system.seed + trials`.
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    /// Start each value from the previous value's solution of the same scheme.
    pub warm_start: bool,
    /// Rate splitting also starts from the embedded baseline solutions.
    pub multistart: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    /// Fronthaul forwarding used by edge-only decoding.
    pub forwarding: Forwarding,
}

impl SweepSpec {
    pub fn new(base: ExperimentConfig, key: SweepKey, values: Vec<f64>, trials: usize) -> Result<Self, HarnessError> {
        let spec = Self {
            base,
            key,
            values,
            trials,
            schemes: Scheme::ALL.to_vec(),
            warm_start: false,
            multistart: true,
            jobs: 0,
            forwarding: Forwarding::Quantized,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::Sweep("value list is empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HarnessError::Sweep("values must be finite and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Sweep("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Sweep("scheme list is empty".into()));
        }
        let mut sys = self.base.system.clone();
        for &v in &self.values {
            self.key.apply(&mut sys, v)?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.trials as u64).map(|t| self.base.system.seed + t)
    }

    /// Scales the base scenario up to the full simulation size.
    pub fn full_scale(mut self) -> Self {
        self.base.system.n_ids = FULL_SCALE_IDS;
        self
    }

    pub fn scenario(&self, seed: u64, value: f64) -> Result<Scenario, HarnessError> {
        let mut sys = self.base.system.clone();
        sys.seed = seed;
        self.key.apply(&mut sys, value)?;
        Ok(generate_scenario(&sys, &self.base.fl)?)
    }
}

/// Algorithm options for a scheme from the config's stopping rule.
pub fn sca_options(cfg: &ExperimentConfig, scheme: Scheme) -> ScaOptions {
    let mut o = ScaOptions::new(scheme);
    o.e_th = cfg.e_th;
    o.t_max = cfg.t_max;
    o
}

/// Runs edge-only or cloud-only decoding with the other split frozen.
pub fn run_baseline(s: &Scenario, scheme: Scheme, opts: &ScaOptions) -> Result<SolveReport, HarnessError> {
    if scheme == Scheme::RateSplit {
        return Err(HarnessError::Sweep("rate_split is not a baseline scheme".into()));
    }
    Ok(run(s, &opts.with_scheme(scheme))?)
}

/// Final report and elapsed time of one scheme at one point.
type Outcome = (Result<SolveReport, HarnessError>, f64);

/// Solves every requested scheme at one scenario. Baselines run first so that
/// rate splitting can start from them.
fn solve_point(
    s: &Scenario,
    spec: &SweepSpec,
    warm: &[(Scheme, Option<PrimalPoint>)],
) -> Vec<(Scheme, Outcome)> {
    let warm_of = |scheme: Scheme| warm.iter().find(|(k, _)| *k == scheme).and_then(|(_, p)| p.as_ref());
    let want = |scheme: Scheme| spec.schemes.contains(&scheme);
    let need_baselines = want(Scheme::RateSplit) && spec.multistart;
    let mut out: Vec<(Scheme, Outcome)> = Vec::new();
    for scheme in [Scheme::EdgeOnly, Scheme::CloudOnly] {
        if !(want(scheme) || need_baselines) {
            continue;
        }
        let clock = Instant::now();
        let mut opts = sca_options(&spec.base, scheme);
        opts.subproblem.forwarding = spec.forwarding;
        let r = match warm_of(scheme) {
            Some(p) => run_from(s, p, &opts).map_err(HarnessError::from),
            None => run_baseline(s, scheme, &opts),
        };
        out.push((scheme, (r, clock.elapsed().as_secs_f64())));
    }
    if want(Scheme::RateSplit) {
        let clock = Instant::now();
        let opts = sca_options(&spec.base, Scheme::RateSplit);
        let base = |k: Scheme| out.iter().find(|(x, _)| *x == k).and_then(|(_, (r, _))| r.as_ref().ok());
        let r = if spec.multistart {
            run_multistart(s, &opts, base(Scheme::EdgeOnly), base(Scheme::CloudOnly), warm_of(Scheme::RateSplit))
                .map(|m| m.best)
                .map_err(HarnessError::from)
        } else {
            match warm_of(Scheme::RateSplit) {
                Some(p) => run_from(s, p, &opts).map_err(HarnessError::from),
                None => run(s, &opts).map_err(HarnessError::from),
            }
        };
        out.push((Scheme::RateSplit, (r, clock.elapsed().as_secs_f64())));
    }
    out
}

/// All rows for one seed, walking the sweep axis in order.
fn run_seed(spec: &SweepSpec, seed: u64) -> Vec<ResultRow> {
    let key = spec.key.as_str();
    let mut rows = Vec::new();
    let mut warm: Vec<(Scheme, Option<PrimalPoint>)> = Vec::new();
    for &value in &spec.values {
        let s = match spec.scenario(seed, value) {
            Ok(s) => s,
            Err(_) => {
                rows.extend(spec.schemes.iter().map(|&k| ResultRow::failed(seed, k, key, value, 0.0)));
                warm.clear();
                continue;
            }
        };
        let solved = solve_point(&s, spec, &warm);
        warm.clear();
        for (scheme, (r, wall)) in &solved {
            if spec.warm_start && spec.key.keeps_dimensions() {
                warm.push((*scheme, r.as_ref().ok().map(|r| r.point.clone())));
            }
            if spec.schemes.contains(scheme) {
                rows.push(match r {
                    Ok(r) => ResultRow::from_report(seed, key, value, r, *wall),
                    Err(_) => ResultRow::failed(seed, *scheme, key, value, *wall),
                });
            }
        }
    }
    rows
}

/// Runs the sweep and returns its rows in (seed, scheme, value) order, the
/// scheme order being that of `spec.schemes`.
pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| HarnessError::Sweep(e.to_string()))?;
    let per_seed: Vec<Vec<ResultRow>> = pool.install(|| seeds.par_iter().map(|&seed| run_seed(spec, seed)).collect());
    let rank = |k: Scheme| spec.schemes.iter().position(|&x| x == k).unwrap_or(usize::MAX);
    let mut rows: Vec<ResultRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.seed, rank(a.scheme))
            .cmp(&(b.seed, rank(b.scheme)))
            .then(a.swept_value.total_cmp(&b.swept_value))
    });
    Ok(rows)
}

/// Mean and standard deviation of `tau_total` at one (scheme, value).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub scheme: Scheme,
    pub value: f64,
    /// Rows with a finite completion time.
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub non_converged: usize,
    pub points: Vec<PointSummary>,
}

impl Summary {
    pub fn from_rows(spec: &SweepSpec, rows: &[ResultRow]) -> Self {
        let mut points = Vec::new();
        for &scheme in &spec.schemes {
            for &value in &spec.values {
                let value = results::round9(value);
                let at: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| r.scheme == scheme && r.swept_value == value)
                    .collect();
                let taus: Vec<f64> = at.iter().map(|r| r.tau_total).filter(|t| t.is_finite()).collect();
                let n = taus.len() as f64;
                let mean = taus.iter().sum::<f64>() / n;
                let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
                points.push(PointSummary {
                    scheme,
                    value,
                    count: taus.len(),
                    failures: at.len() - taus.len(),
                    mean,
                    std: var.sqrt(),
                });
            }
        }
        Self {
            rows: rows.len(),
            non_converged: rows.iter().filter(|r| !r.converged).count(),
            points,
        }
    }

    pub fn to_csv_string(&self) -> String {
        let f = results::format_float;
        let mut out = String::from("scheme,swept_value,count,failures,mean_tau_total,std_tau_total\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.scheme,
                f(p.value),
                p.count,
                p.failures,
                f(p.mean),
                f(p.std)
            ));
        }
        out
    }
}

/// Where the per-point summary of `out` is written.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_summary.csv"))
}

/// Runs the sweep, writes the rows to `out` and the per-point summary next to it.
pub fn run_experiment(spec: &SweepSpec, out: &Path) -> Result<Summary, HarnessError> {
    let file = std::fs::File::create(out)?;
    let rows = sweep_rows(spec)?;
    write_csv(std::io::BufWriter::new(file), &rows)?;
    let summary = Summary::from_rows(spec, &rows);
    std::fs::write(summary_path(out), summary.to_csv_string())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> ExperimentConfig {
        let mut cfg = crate::scenario::parse_config("n_ids = 2\nn_aps = 2\n").unwrap();
        cfg.t_max = 3;
        cfg
    }

    #[test]
    fn spec_invariants() {
        let base = tiny_base();
        assert!(SweepSpec::new(base.clone(), SweepKey::FronthaulBps, vec![], 1).is_err());
        assert!(SweepSpec::new(base.clone(), SweepKey::FronthaulBps, vec![2e8, 1e8], 1).is_err());
        assert!(SweepSpec::new(base.clone(), SweepKey::FronthaulBps, vec![1e8], 0).is_err());
        assert!(SweepSpec::new(base.clone(), SweepKey::NAps, vec![1.5], 1).is_err());
        assert!(SweepSpec::new(base.clone(), SweepKey::FronthaulBps, vec![-1.0], 1).is_err());
        assert!(SweepSpec::new(base, SweepKey::NAps, vec![2.0, 3.0], 2).is_ok());
    }

    #[test]
    fn sweep_key_names() {
        for k in [SweepKey::FronthaulBps, SweepKey::NAps, SweepKey::SnrDb] {
            assert_eq!(k.as_str().parse::<SweepKey>().unwrap(), k);
        }
        assert!("n_ids".parse::<SweepKey>().is_err());
    }

    #[test]
    fn one_seed_one_value_three_rows() {
        let spec = SweepSpec::new(tiny_base(), SweepKey::FronthaulBps, vec![1e8], 1).unwrap();
        let rows = sweep_rows(&spec).unwrap();
        assert_eq!(rows.len(), 3);
        let order: Vec<Scheme> = rows.iter().map(|r| r.scheme).collect();
        assert_eq!(order, Scheme::ALL.to_vec());
        assert!(rows.iter().all(|r| r.tau_total.is_finite()));
    }

    #[test]
    fn baseline_rejects_rate_split() {
        let cfg = tiny_base();
        let s = generate_scenario(&cfg.system, &cfg.fl).unwrap();
        assert!(run_baseline(&s, Scheme::RateSplit, &ScaOptions::new(Scheme::RateSplit)).is_err());
    }

    #[test]
    fn baselines_freeze_the_split() {
        let cfg = tiny_base();
        let s = generate_scenario(&cfg.system, &cfg.fl).unwrap();
        let opts = sca_options(&cfg, Scheme::EdgeOnly);
        let e = run_baseline(&s, Scheme::EdgeOnly, &opts).unwrap();
        assert_eq!(e.point.bits.cloud.iter().sum::<f64>(), 0.0);
        let c = run_baseline(&s, Scheme::CloudOnly, &opts).unwrap();
        assert_eq!(c.point.bits.edge.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn summary_statistics() {
        let spec = SweepSpec::new(tiny_base(), SweepKey::FronthaulBps, vec![1e8], 2).unwrap();
        let mk = |seed, tau| ResultRow::new(seed, Scheme::EdgeOnly, "fronthaul_bps", 1e8, [tau, 0.0, 0.0, 0.0], [0.5, 1.0, 1.0], 1, true, 0.0);
        let rows = vec![mk(0, 1.0), mk(1, 3.0), ResultRow::failed(2, Scheme::EdgeOnly, "fronthaul_bps", 1e8, 0.0)];
        let sum = Summary::from_rows(&spec, &rows);
        let p = sum.points.iter().find(|p| p.scheme == Scheme::EdgeOnly).unwrap();
        assert_eq!((p.count, p.failures), (2, 1));
        assert!((p.mean - 2.0).abs() < 1e-12 && (p.std - 1.0).abs() < 1e-12);
        assert_eq!(sum.non_converged, 1);
    }

    #[test]
    fn summary_file_name() {
        assert_eq!(summary_path(Path::new("/tmp/a/run.csv")), PathBuf::from("/tmp/a/run_summary.csv"));
    }
}

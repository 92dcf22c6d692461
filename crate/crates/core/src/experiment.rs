//! Parameter sweeps and single-instance runs over random channel draws,
//! with CSV and JSON output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_model::{db_to_watts, draw_correlations, sample_main, ChannelRealization};
use crate::error::{domain, Error, Result};
use crate::montecarlo::{empirical_outage, rate_at_outage, McConfig, McReport};
use crate::power_alloc::{
    allocate_grid, allocate_window, prepare_design, traditional_design, DesignFlag, DesignOptions,
    DesignOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rho,
    Power,
    Epsilon,
    Antennas,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Rho, Axis::Power, Axis::Epsilon, Axis::Antennas];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Rho => "rho",
            Axis::Power => "power",
            Axis::Epsilon => "epsilon",
            Axis::Antennas => "antennas",
        }
    }

    /// Default sweep grid for the axis.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::Rho => (1..=8).map(|k| k as f64 / 10.0).collect(),
            Axis::Power => (0..=5).map(|k| 3.0 * k as f64).collect(),
            Axis::Epsilon => (1..=10).map(|k| (5 * k) as f64 / 100.0).collect(),
            Axis::Antennas => (1..=6).map(|k| 2.0 * k as f64).collect(),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown axis '{s}'; expected rho, power, epsilon or antennas"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Traditional,
    BruteForce,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Traditional, Scheme::BruteForce];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Traditional => "traditional",
            Scheme::BruteForce => "brute_force",
        }
    }
}

/// System parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub sigma_d_sq: f64,
    pub sigma_e_sq: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub p_dbw: f64,
    pub ns: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            sigma_d_sq: 1.0,
            sigma_e_sq: 1.0,
            rho: 0.5,
            epsilon: 0.15,
            p_dbw: 10.0,
            ns: 8,
        }
    }
}

impl SystemParams {
    pub fn with_axis(&self, axis: Axis, value: f64) -> Result<Self> {
        let mut p = *self;
        match axis {
            Axis::Rho => p.rho = value,
            Axis::Power => p.p_dbw = value,
            Axis::Epsilon => p.epsilon = value,
            Axis::Antennas => {
                if value.fract() != 0.0 || value < 2.0 {
                    return domain(format!("antenna count must be an integer ≥ 2, got {value}"));
                }
                p.ns = value as usize;
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_d_sq > 0.0 && self.sigma_e_sq > 0.0) {
            return domain("channel variances must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return domain(format!("ρ must lie in [0, 1), got {}", self.rho));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return domain(format!("ε must lie in (0, 1), got {}", self.epsilon));
        }
        if !self.p_dbw.is_finite() {
            return domain("transmit power must be finite");
        }
        if self.ns < 2 {
            return domain(format!("need at least two antennas, got {}", self.ns));
        }
        Ok(())
    }

    pub fn power_watts(&self) -> f64 {
        db_to_watts(self.p_dbw)
    }

    /// Draws `h` and the per-antenna correlations from `seed`.
    pub fn instance(&self, seed: u64) -> Result<ChannelRealization> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_main(self.ns, self.sigma_d_sq, &mut rng)?;
        let rho = draw_correlations(self.rho, self.ns, &mut rng);
        ChannelRealization::new(h, self.sigma_d_sq, self.sigma_e_sq, rho)
    }
}

/// Configuration file contents: system parameters plus optional sweep
/// settings; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sigma_d_sq: Option<f64>,
    pub sigma_e_sq: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub p_dbw: Option<f64>,
    pub ns: Option<usize>,
    pub values: Option<Vec<f64>>,
    pub schemes: Option<Vec<Scheme>>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub brute_force_grid: Option<usize>,
    pub joint: Option<bool>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<SystemParams> {
        let d = SystemParams::default();
        let p = SystemParams {
            sigma_d_sq: self.sigma_d_sq.unwrap_or(d.sigma_d_sq),
            sigma_e_sq: self.sigma_e_sq.unwrap_or(d.sigma_e_sq),
            rho: self.rho.unwrap_or(d.rho),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            p_dbw: self.p_dbw.unwrap_or(d.p_dbw),
            ns: self.ns.unwrap_or(d.ns),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            joint: self.joint.unwrap_or(false),
            ..DesignOptions::default()
        }
    }

    pub fn sweep_spec(&self, axis: Axis) -> Result<SweepSpec> {
        Ok(SweepSpec {
            axis,
            values: self.values.clone().unwrap_or_else(|| axis.default_values()),
            fixed: self.params()?,
            schemes: self.schemes.clone().unwrap_or_else(|| Scheme::ALL.to_vec()),
            replications: self.replications.unwrap_or(DEFAULT_REPLICATIONS),
            seed: self.seed.unwrap_or(0),
            brute_force_grid: self.brute_force_grid.unwrap_or(DEFAULT_BRUTE_FORCE_GRID),
            options: self.design_options(),
            timing: true,
        })
    }
}

pub const DEFAULT_REPLICATIONS: usize = 200;
pub const DEFAULT_BRUTE_FORCE_GRID: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: SystemParams,
    pub schemes: Vec<Scheme>,
    pub replications: usize,
    pub seed: u64,
    pub brute_force_grid: usize,
    pub options: DesignOptions,
    /// Record wall-clock runtimes; when off they are reported as zero so
    /// that output is byte-reproducible.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(axis: Axis, fixed: SystemParams) -> Self {
        Self {
            axis,
            values: axis.default_values(),
            fixed,
            schemes: Scheme::ALL.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            brute_force_grid: DEFAULT_BRUTE_FORCE_GRID,
            options: DesignOptions::default(),
            timing: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return domain("sweep needs at least one axis value");
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return domain("sweep values must be strictly increasing");
        }
        if self.schemes.is_empty() || self.replications == 0 {
            return domain("sweep needs at least one scheme and one replication");
        }
        if self.brute_force_grid == 0 {
            return domain("brute-force grid needs at least one point");
        }
        for &v in &self.values {
            self.fixed.with_axis(self.axis, v)?;
        }
        Ok(())
    }

    /// Seeds of the channel draws, shared by every axis value.
    pub fn instance_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.replications).map(|_| rng.next_u64()).collect()
    }
}

/// One scheme evaluated on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub rs: f64,
    pub phi: f64,
    pub runtime_ms: f64,
    pub flags: Vec<DesignFlag>,
}

fn elapsed_ms(t: Instant, timing: bool) -> f64 {
    if timing {
        t.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn scheme_run(scheme: Scheme, out: &DesignOutcome, runtime_ms: f64) -> SchemeRun {
    SchemeRun {
        scheme,
        rs: out.design.rs,
        phi: out.design.phi,
        runtime_ms,
        flags: out.flags.clone(),
    }
}

/// Runs the requested schemes on one channel. The proposed and brute-force
/// schemes share the AN direction and beamformer and differ only in how the
/// split is searched.
pub fn run_schemes(
    ch: &ChannelRealization,
    params: &SystemParams,
    schemes: &[Scheme],
    brute_force_grid: usize,
    opts: &DesignOptions,
    timing: bool,
) -> Result<Vec<(SchemeRun, DesignOutcome)>> {
    let p = params.power_watts();
    let eps = params.epsilon;
    let mut out = Vec::with_capacity(schemes.len());
    let needs_prepared = schemes.iter().any(|s| *s != Scheme::Traditional);
    let prepared = if needs_prepared {
        let t = Instant::now();
        let prep = prepare_design(ch, p, eps, opts)?;
        Some((prep, elapsed_ms(t, timing)))
    } else {
        None
    };
    for &scheme in schemes {
        let t = Instant::now();
        let outcome = match scheme {
            Scheme::Traditional => traditional_design(ch, p, eps, opts)?,
            Scheme::Proposed | Scheme::BruteForce => {
                let (prep, _) = prepared.as_ref().expect("prepared design");
                if scheme == Scheme::Proposed {
                    allocate_window(prep.clone(), ch, p, eps, opts)?
                } else {
                    allocate_grid(prep.clone(), ch, p, eps, brute_force_grid, opts)?
                }
            }
        };
        let mut ms = elapsed_ms(t, timing);
        if scheme != Scheme::Traditional {
            ms += prepared.as_ref().map_or(0.0, |(_, prep_ms)| *prep_ms);
        }
        out.push((scheme_run(scheme, &outcome, ms), outcome));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub rs_mean: f64,
    pub rs_se: f64,
    pub runtime_ms: f64,
    pub instance_seeds: Vec<u64>,
    pub failures: Vec<u64>,
    pub flag_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub fixed: SystemParams,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, value: f64, scheme: Scheme) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.axis_value == value && r.scheme == scheme)
    }

    /// Mean rate per axis value for one scheme, in axis order.
    pub fn means(&self, scheme: Scheme) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.rs_mean)
            .collect()
    }

    pub fn failure_count(&self) -> usize {
        self.rows.iter().map(|r| r.failures.len()).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "axis_value",
            "scheme",
            "rs_mean",
            "rs_se",
            "runtime_ms",
            "instance_seed_list",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            let seeds: Vec<String> = r.instance_seeds.iter().map(u64::to_string).collect();
            out.write_record([
                r.axis_value.to_string(),
                r.scheme.name().to_string(),
                format!("{:.6}", r.rs_mean),
                format!("{:.6}", r.rs_se),
                format!("{:.3}", r.runtime_ms),
                seeds.join(";"),
            ])
            .map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn flag_name(f: DesignFlag) -> String {
    format!("{f:?}")
}

/// Runs every (axis value, replication) pair; failures are logged with the
/// instance seed and left out of the averages.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let seeds = spec.instance_seeds();
    let tasks: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<(usize, u64, Result<Vec<SchemeRun>>)> = tasks
        .par_iter()
        .map(|&(v, seed)| {
            let run = || -> Result<Vec<SchemeRun>> {
                let params = spec.fixed.with_axis(spec.axis, spec.values[v])?;
                let ch = params.instance(seed)?;
                let runs = run_schemes(
                    &ch,
                    &params,
                    &spec.schemes,
                    spec.brute_force_grid,
                    &spec.options,
                    spec.timing,
                )?;
                Ok(runs.into_iter().map(|(r, _)| r).collect())
            };
            (v, seed, run())
        })
        .collect();

    let mut rows = Vec::new();
    for (v, &value) in spec.values.iter().enumerate() {
        for &scheme in &spec.schemes {
            let mut rates = Vec::new();
            let mut times = Vec::new();
            let mut ok_seeds = Vec::new();
            let mut failures = Vec::new();
            let mut flag_counts = BTreeMap::new();
            for (tv, seed, res) in &results {
                if *tv != v {
                    continue;
                }
                match res {
                    Ok(runs) => {
                        let r = runs
                            .iter()
                            .find(|r| r.scheme == scheme)
                            .expect("scheme was run");
                        rates.push(r.rs);
                        times.push(r.runtime_ms);
                        ok_seeds.push(*seed);
                        for f in &r.flags {
                            *flag_counts.entry(flag_name(*f)).or_insert(0) += 1;
                        }
                    }
                    Err(e) => {
                        log::warn!("{} = {value}, instance seed {seed}: {e}", spec.axis.name());
                        failures.push(*seed);
                    }
                }
            }
            let (rs_mean, rs_se) = mean_se(&rates);
            let runtime_ms = mean_se(&times).0;
            rows.push(SweepRow {
                axis_value: value,
                scheme,
                rs_mean,
                rs_se,
                runtime_ms: if runtime_ms.is_nan() { 0.0 } else { runtime_ms },
                instance_seeds: ok_seeds,
                failures,
                flag_counts,
            });
        }
    }
    Ok(SweepResult {
        axis: spec.axis,
        fixed: spec.fixed,
        replications: spec.replications,
        seed: spec.seed,
        rows,
    })
}

/// One scheme on one instance together with its Monte Carlo check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleDesign {
    pub run: SchemeRun,
    pub phi0: f64,
    pub beam_rs: f64,
    pub mc: McReport,
    /// Empirical `ε`-quantile of the secrecy capacity.
    pub mc_rate_at_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleReport {
    pub seed: u64,
    pub params: SystemParams,
    pub rho: Vec<f64>,
    pub designs: Vec<SingleDesign>,
}

pub fn run_single(
    params: &SystemParams,
    seed: u64,
    schemes: &[Scheme],
    brute_force_grid: usize,
    mc_samples: usize,
    opts: &DesignOptions,
    timing: bool,
) -> Result<SingleReport> {
    params.validate()?;
    let ch = params.instance(seed)?;
    let runs = run_schemes(&ch, params, schemes, brute_force_grid, opts, timing)?;
    let cfg = McConfig::new(mc_samples, seed);
    let designs = runs
        .into_iter()
        .map(|(run, out)| {
            let mc = empirical_outage(&out.design, &ch, out.design.rs, &cfg)?;
            let mc_rate_at_eps = rate_at_outage(&out.design, &ch, params.epsilon, &cfg)?;
            Ok(SingleDesign {
                run,
                phi0: out.alloc.phi0,
                beam_rs: out.beam_rs,
                mc,
                mc_rate_at_eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingleReport {
        seed,
        params: *params,
        rho: ch.rho().to_vec(),
        designs,
    })
}

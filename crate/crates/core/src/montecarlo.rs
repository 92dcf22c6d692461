//! Simulation oracle: empirical secrecy capacity and outage of a design,
//! Bernstein-type tail checks for Gaussian quadratic forms, and the
//! channel-model validation against the conditional power density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::beamformer::{bernstein_lhs, BernsteinData};
use crate::channel_model::{
    conditional_power_pdf, shifted_stats, standard_cn, wiretap_stats, ChannelRealization,
    WiretapSampler,
};
use crate::distributions::NcChiSq2;
use crate::error::{domain, Error, Result};
use crate::linalg::{CVector, C64};
use crate::power_alloc::{
    brute_force_design, traditional_design, DesignOptions, DesignOutcome, TransmitDesign,
};

/// Fewest samples behind any reported statistic.
pub const MIN_SAMPLES: usize = 1000;

/// Which AN leakage drives Eve's SINR in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeakageMode {
    /// The true `|gᴴa|²` (or `gᴴΠg/(Ns−1)` for isotropic AN).
    Exact,
    /// The per-antenna surrogate `Σ_i w_i |g̃_i|²` used by the analytic model.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub leakage: LeakageMode,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            leakage: LeakageMode::Exact,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return domain(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                self.samples
            ));
        }
        Ok(())
    }
}

/// Secrecy-capacity draws plus both leakage means.
#[derive(Debug, Clone, PartialEq)]
pub struct CsSamples {
    pub cs: Vec<f64>,
    pub exact_leakage_mean: f64,
    pub diagonal_leakage_mean: f64,
}

/// `Cs = [log2(1+δd) − log2(1+δe)]⁺` over independent wiretap draws.
pub fn secrecy_capacity_samples(
    design: &TransmitDesign,
    ch: &ChannelRealization,
    cfg: &McConfig,
) -> Result<CsSamples> {
    cfg.validate()?;
    if design.w.len() != ch.ns() {
        return domain("design and channel dimensions differ");
    }
    let h = ch.h();
    let cm = (1.0 + design.delta_d(h)).log2();
    let sampler = WiretapSampler::new(ch);
    let stats = shifted_stats(ch);
    let shift: Vec<C64> = stats
        .mean
        .iter()
        .zip(wiretap_mean(ch).iter())
        .map(|(shifted, full)| full - shifted)
        .collect();
    let weights = design.an.diagonal_weights(h);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = CVector::zeros(ch.ns());
    let mut cs = Vec::with_capacity(cfg.samples);
    let (mut exact_sum, mut diag_sum) = (0.0, 0.0);
    for _ in 0..cfg.samples {
        sampler.sample_into(g.as_mut_slice(), &mut rng);
        let exact = design.an.leakage(&g, h);
        let diag: f64 = g
            .iter()
            .zip(&shift)
            .zip(&weights)
            .map(|((gi, si), wi)| wi * (gi - si).norm_sqr())
            .sum();
        exact_sum += exact;
        diag_sum += diag;
        let leak = match cfg.leakage {
            LeakageMode::Exact => exact,
            LeakageMode::Diagonal => diag,
        };
        let cw = (1.0 + design.delta_e(&g, leak)).log2();
        cs.push((cm - cw).max(0.0));
    }
    let n = cfg.samples as f64;
    Ok(CsSamples {
        cs,
        exact_leakage_mean: exact_sum / n,
        diagonal_leakage_mean: diag_sum / n,
    })
}

fn wiretap_mean(ch: &ChannelRealization) -> CVector {
    wiretap_stats(ch).mean
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub samples: usize,
    pub rs: f64,
    pub outage: f64,
    pub outage_se: f64,
    pub cs_mean: f64,
    /// Empirical 5%, 50% and 95% quantiles of `Cs`.
    pub cs_quantiles: [f64; 3],
    pub exact_leakage_mean: f64,
    pub diagonal_leakage_mean: f64,
    /// `exact − diagonal` mean AN leakage at Eve.
    pub leakage_gap: f64,
}

/// Binomial standard error `√(p(1−p)/n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let k = ((q * v.len() as f64).floor() as usize).min(v.len() - 1);
    v[k]
}

/// Largest `Rs` whose empirical outage `#{Cs < Rs}/n` is at most `ε`.
pub fn outage_quantile(sorted_cs: &[f64], eps: f64) -> f64 {
    quantile_sorted(sorted_cs, eps)
}

/// `Pr{Cs < Rs}` with its standard error.
pub fn empirical_outage(
    design: &TransmitDesign,
    ch: &ChannelRealization,
    rs: f64,
    cfg: &McConfig,
) -> Result<McReport> {
    let s = secrecy_capacity_samples(design, ch, cfg)?;
    let n = s.cs.len();
    let below = s.cs.iter().filter(|&&c| c < rs).count();
    let outage = below as f64 / n as f64;
    let cs_mean = s.cs.iter().sum::<f64>() / n as f64;
    let cs = sorted(s.cs);
    Ok(McReport {
        samples: n,
        rs,
        outage,
        outage_se: binomial_se(outage, n),
        cs_mean,
        cs_quantiles: [0.05, 0.5, 0.95].map(|q| quantile_sorted(&cs, q)),
        exact_leakage_mean: s.exact_leakage_mean,
        diagonal_leakage_mean: s.diagonal_leakage_mean,
        leakage_gap: s.exact_leakage_mean - s.diagonal_leakage_mean,
    })
}

/// Empirical `ε`-quantile of the secrecy capacity.
pub fn rate_at_outage(
    design: &TransmitDesign,
    ch: &ChannelRealization,
    eps: f64,
    cfg: &McConfig,
) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("outage target must lie in (0,1), got {eps}"));
    }
    let s = secrecy_capacity_samples(design, ch, cfg)?;
    Ok(outage_quantile(&sorted(s.cs), eps))
}

/// The maximum-ratio baseline with isotropic AN.
pub fn traditional(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    traditional_design(ch, p, eps, opts)
}

/// The proposed design with a uniform `grid`-point search over the split.
pub fn brute_force_phi(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    grid: usize,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    if grid < 50 {
        return domain(format!(
            "brute-force grid needs at least 50 points, got {grid}"
        ));
    }
    brute_force_design(ch, p, eps, grid, opts)
}

/// Fraction of `z ~ CN(0, I)` draws with `zᴴΛz + 2Re(zᴴx)` at or above the
/// Bernstein threshold, and its standard error.
pub fn bernstein_exceedance(d: &BernsteinData, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < MIN_SAMPLES {
        return domain(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        ));
    }
    // the threshold omits the constant budget term
    let threshold = bernstein_lhs(d);
    let n = d.x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = CVector::zeros(n);
    let mut hits = 0usize;
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = standard_cn(&mut rng);
        }
        let quad = z.dotc(&(&d.lambda * &z)).re;
        let lin = 2.0 * z.dotc(&d.x).re;
        if quad + lin >= threshold {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok((p, binomial_se(p, samples)))
}

/// One row of the channel-validation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableICase {
    pub id: u8,
    pub sigma_d_sq: f64,
    pub sigma_e_sq: f64,
    pub rho: f64,
    pub h_sq: f64,
}

pub const TABLE_I: [TableICase; 4] = [
    TableICase {
        id: 1,
        sigma_d_sq: 1.0,
        sigma_e_sq: 1.0,
        rho: 0.5,
        h_sq: 0.1535,
    },
    TableICase {
        id: 2,
        sigma_d_sq: 1.0,
        sigma_e_sq: 1.0,
        rho: 0.3,
        h_sq: 0.2826,
    },
    TableICase {
        id: 3,
        sigma_d_sq: 1.0,
        sigma_e_sq: 1.0,
        rho: 0.7,
        h_sq: 1.6469,
    },
    TableICase {
        id: 4,
        sigma_d_sq: 0.5,
        sigma_e_sq: 0.5,
        rho: 0.5,
        h_sq: 0.4681,
    },
];

pub fn table_i_case(id: u8) -> Result<TableICase> {
    TABLE_I
        .iter()
        .copied()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::Domain(format!("unknown validation case {id}; expected 1 to 4")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBin {
    pub center: f64,
    pub empirical: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelValidation {
    pub case: TableICase,
    pub samples: usize,
    pub ks: f64,
    pub bins: Vec<DensityBin>,
}

/// Number of histogram bins and the upper quantile they span.
pub const VALIDATION_BINS: usize = 200;
pub const VALIDATION_TAIL: f64 = 1e-4;

/// Kolmogorov–Smirnov distance between sorted samples and a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted_samples: &[f64], cdf: F) -> f64 {
    let n = sorted_samples.len() as f64;
    sorted_samples.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs())
    })
}

/// Samples `|g|²` for a fixed main gain and compares with the conditional
/// power density.
pub fn validate_case(case: &TableICase, samples: usize, seed: u64) -> Result<ChannelValidation> {
    if samples < MIN_SAMPLES {
        return domain(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        ));
    }
    let h = CVector::from_vec(vec![C64::new(case.h_sq.sqrt(), 0.0), C64::new(0.0, 0.0)]);
    let ch = ChannelRealization::uniform(h, case.sigma_d_sq, case.sigma_e_sq, case.rho)?;
    let sampler = WiretapSampler::new(&ch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = [C64::new(0.0, 0.0); 2];
    let mut powers: Vec<f64> = (0..samples)
        .map(|_| {
            sampler.sample_into(&mut g, &mut rng);
            g[0].norm_sqr()
        })
        .collect();
    powers.sort_by(f64::total_cmp);

    let law = NcChiSq2::new(
        (1.0 - case.rho) * case.sigma_e_sq / 2.0,
        (case.h_sq * case.rho * case.sigma_e_sq / case.sigma_d_sq).sqrt(),
    )?;
    let ks = ks_statistic(&powers, |x| law.cdf(x));

    let upper = law.upper_quantile(VALIDATION_TAIL);
    let width = upper / VALIDATION_BINS as f64;
    let mut counts = vec![0usize; VALIDATION_BINS];
    for &x in &powers {
        let k = (x / width) as usize;
        if k < VALIDATION_BINS {
            counts[k] += 1;
        }
    }
    let bins = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let center = (k as f64 + 0.5) * width;
            let analytic = conditional_power_pdf(
                center,
                case.h_sq,
                case.rho,
                case.sigma_d_sq,
                case.sigma_e_sq,
            )?;
            Ok(DensityBin {
                center,
                empirical: c as f64 / (samples as f64 * width),
                analytic,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelValidation {
        case: *case,
        samples,
        ks,
        bins,
    })
}

pub fn validate_channel_model(case_id: u8, cfg: &McConfig) -> Result<ChannelValidation> {
    validate_case(&table_i_case(case_id)?, cfg.samples, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::power_alloc::ArtificialNoise;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn toy() -> (ChannelRealization, TransmitDesign) {
        let h = CVector::from_vec(vec![c(1.0, 0.2), c(-0.4, 0.8), c(0.3, -0.5)]);
        let ch = ChannelRealization::new(h.clone(), 1.0, 1.0, vec![0.4, 0.6, 0.5]).unwrap();
        let w = h.unscale(h.norm());
        let design = TransmitDesign {
            w,
            an: ArtificialNoise::Isotropic,
            phi: 0.6,
            p: 10.0,
            rs: 0.0,
        };
        (ch, design)
    }

    #[test]
    fn zero_rate_never_outages() {
        let (ch, d) = toy();
        let r = empirical_outage(&d, &ch, 0.0, &McConfig::new(5000, 1)).unwrap();
        assert_eq!(r.outage, 0.0);
    }

    #[test]
    fn rate_above_main_capacity_always_outages() {
        let (ch, d) = toy();
        let cm = (1.0 + d.delta_d(ch.h())).log2();
        let r = empirical_outage(&d, &ch, cm + 1e-9, &McConfig::new(5000, 1)).unwrap();
        assert_eq!(r.outage, 1.0);
    }

    #[test]
    fn quantile_is_monotone_and_reaches_the_maximum() {
        let (ch, d) = toy();
        let cfg = McConfig::new(4000, 3);
        let s = secrecy_capacity_samples(&d, &ch, &cfg).unwrap();
        let v = sorted(s.cs);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..100 {
            let q = outage_quantile(&v, k as f64 / 100.0);
            assert!(q >= prev);
            prev = q;
        }
        assert_eq!(outage_quantile(&v, 1.0 - 1e-9), *v.last().unwrap());
        // the quantile rate satisfies the empirical outage target
        let rs = outage_quantile(&v, 0.1);
        assert!(v.iter().filter(|&&x| x < rs).count() as f64 / v.len() as f64 <= 0.1);
    }

    #[test]
    fn reports_are_reproducible() {
        let (ch, d) = toy();
        let cfg = McConfig::new(2000, 11);
        assert_eq!(
            empirical_outage(&d, &ch, 0.5, &cfg).unwrap(),
            empirical_outage(&d, &ch, 0.5, &cfg).unwrap()
        );
    }

    #[test]
    fn directional_leakage_gap_is_measured() {
        let (ch, mut d) = toy();
        let a = crate::an_optimizer::oracle_an(&ch).unwrap().a;
        d.an = ArtificialNoise::Directional(a.clone());
        let r = empirical_outage(&d, &ch, 0.5, &McConfig::new(200_000, 5)).unwrap();
        let stats = shifted_stats(&ch);
        // the surrogate mean is Σ|a_i|²(2σ_i² + s̃_i²)
        let expect: f64 = a
            .iter()
            .zip(stats.second_moments())
            .map(|(ai, m)| ai.norm_sqr() * m)
            .sum();
        assert!((r.diagonal_leakage_mean - expect).abs() < 0.02 * expect);
        assert!((r.leakage_gap - (r.exact_leakage_mean - r.diagonal_leakage_mean)).abs() < 1e-15);
    }

    #[test]
    fn ks_of_exact_samples_is_small() {
        let law = NcChiSq2::new(0.5, 0.0).unwrap();
        let n = 1000;
        let v: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        assert!(ks_statistic(&v, |x| law.cdf(x)) <= 0.5 / n as f64 + 1e-12);
    }

    #[test]
    fn uncorrelated_validation_is_exponential() {
        let case = TableICase {
            id: 0,
            sigma_d_sq: 1.0,
            sigma_e_sq: 1.0,
            rho: 0.0,
            h_sq: 0.7,
        };
        let r = validate_case(&case, 200_000, 9).unwrap();
        assert!(r.ks < 0.005, "ks {}", r.ks);
        assert_eq!(r.bins.len(), VALIDATION_BINS);
        for b in &r.bins[..10] {
            assert!((b.analytic - (-b.center).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(table_i_case(5).is_err());
        assert!(McConfig::new(10, 0).validate().is_err());
    }
}

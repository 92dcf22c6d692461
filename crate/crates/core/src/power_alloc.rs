//! Power split between the information signal and artificial noise.
//!
//! A smooth proxy `H(φ)` (the rate gap with Eve's channel terms replaced by
//! their means) has a single stationary point `φ₀`, found by bisection on
//! `H′`. A short grid search around `φ₀` on the exact outage-rate equation
//! then picks the split. `run_design` chains AN optimization, the
//! beamformer and this search into a complete transmit design.

use serde::Serialize;
use std::f64::consts::LN_2;

use crate::an_optimizer::{optimize_an, AnOptions};
use crate::beamformer::{max_rate_bisection, BisectionOptions};
use crate::channel_model::{shifted_stats, ChannelRealization};
use crate::distributions::{
    signal_leakage_params, solve_outage_rate_with, DeltaEModel, OutageRate, XiSqDistribution,
    XiSqTable,
};
use crate::error::{domain, Error, Result};
use crate::linalg::CVector;

/// Bounds of the power-split search.
pub const PHI_MIN: f64 = 0.01;
pub const PHI_MAX: f64 = 0.99;

/// How the AN power is spread over the null space of `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArtificialNoise {
    /// Unit-norm direction `a` with `hᴴa = 0`.
    Directional(CVector),
    /// Equal power on every direction of an orthonormal null-space basis.
    Isotropic,
}

impl ArtificialNoise {
    /// Eve's AN power per unit transmit AN power, `|gᴴa|²` or `gᴴΠg/(Ns−1)`.
    pub fn leakage(&self, g: &CVector, h: &CVector) -> f64 {
        match self {
            Self::Directional(a) => g.dotc(a).norm_sqr(),
            Self::Isotropic => {
                let along_h = h.dotc(g).norm_sqr() / h.norm_squared();
                (g.norm_squared() - along_h).max(0.0) / (h.len() - 1) as f64
            }
        }
    }

    /// Per-antenna weights of the diagonal leakage surrogate.
    pub fn diagonal_weights(&self, h: &CVector) -> Vec<f64> {
        match self {
            Self::Directional(a) => a.iter().map(|z| z.norm_sqr()).collect(),
            Self::Isotropic => {
                let n = h.len();
                let norm_sq = h.norm_squared();
                h.iter()
                    .map(|z| (1.0 - z.norm_sqr() / norm_sq) / (n - 1) as f64)
                    .collect()
            }
        }
    }

    pub fn xi_distribution(&self, ch: &ChannelRealization) -> Result<XiSqDistribution> {
        let stats = shifted_stats(ch);
        match self {
            Self::Directional(a) => XiSqDistribution::from_an(a, &stats),
            Self::Isotropic => XiSqDistribution::isotropic(ch.h(), &stats),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitDesign {
    pub w: CVector,
    pub an: ArtificialNoise,
    pub phi: f64,
    pub p: f64,
    pub rs: f64,
}

impl TransmitDesign {
    /// Bob's SNR `δd = φP|hᴴw|²`.
    pub fn delta_d(&self, h: &CVector) -> f64 {
        self.phi * self.p * h.dotc(&self.w).norm_sqr()
    }

    /// Eve's SINR `δe = φP|gᴴw|² / (1 + (1−φ)P·leakage)`.
    pub fn delta_e(&self, g: &CVector, leakage: f64) -> f64 {
        self.phi * self.p * g.dotc(&self.w).norm_sqr() / (1.0 + (1.0 - self.phi) * self.p * leakage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocResult {
    pub phi0: f64,
    pub phi_star: f64,
    pub rs_star: f64,
    /// `(φ, Rs)` for every evaluated point, ordered by `φ`.
    pub trace: Vec<(f64, f64)>,
    /// Points whose outage-rate evaluation failed and were skipped.
    pub failed_points: usize,
}

/// `H′₁(φ) − H′₂(φ)` with Eve's terms replaced by their means.
pub fn h_prime(phi: f64, p: f64, hw_sq: f64, gw_sq_mean: f64, ga_sq_mean: f64) -> f64 {
    let h1 = p * hw_sq / (1.0 + phi * p * hw_sq);
    let an = 1.0 + (1.0 - phi) * p * ga_sq_mean;
    let h2 = p * gw_sq_mean * (1.0 + p * ga_sq_mean) / (an * (an + phi * p * gw_sq_mean));
    (h1 - h2) / LN_2
}

/// The proxy `H(φ)` itself, in bits.
pub fn h_proxy(phi: f64, p: f64, hw_sq: f64, gw_sq_mean: f64, ga_sq_mean: f64) -> f64 {
    let eve = phi * p * gw_sq_mean / (1.0 + (1.0 - phi) * p * ga_sq_mean);
    (1.0 + phi * p * hw_sq).log2() - (1.0 + eve).log2()
}

/// Root of `H′` on `[0, 1]`, or the boundary where `H′` keeps one sign.
pub fn find_phi0(p: f64, hw_sq: f64, gw_sq_mean: f64, ga_sq_mean: f64, tol: f64) -> Result<f64> {
    if !(p > 0.0) || !(tol > 0.0) || !(hw_sq >= 0.0 && gw_sq_mean >= 0.0 && ga_sq_mean >= 0.0) {
        return domain(format!(
            "need P > 0, tol > 0 and nonnegative powers; got {p}, {tol}, {hw_sq}, {gw_sq_mean}, {ga_sq_mean}"
        ));
    }
    let f = |phi: f64| h_prime(phi, p, hw_sq, gw_sq_mean, ga_sq_mean);
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    if f(1.0) >= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outage-constrained rate of a fixed `(w, AN)` pair as a function of `φ`.
#[derive(Debug, Clone)]
pub struct RateEvaluator {
    model: DeltaEModel,
    hw_sq: f64,
    p: f64,
    eps: f64,
    tol: f64,
}

impl RateEvaluator {
    pub fn new(
        ch: &ChannelRealization,
        w: &CVector,
        an: &XiSqDistribution,
        p: f64,
        eps: f64,
        tol: f64,
    ) -> Result<Self> {
        Self::with_table(ch, w, XiSqTable::build(an)?, p, eps, tol)
    }

    /// Reuse a prebuilt AN table, which depends on neither `w` nor `φ`.
    pub fn with_table(
        ch: &ChannelRealization,
        w: &CVector,
        table: XiSqTable,
        p: f64,
        eps: f64,
        tol: f64,
    ) -> Result<Self> {
        if !(p > 0.0) || !(eps > 0.0 && eps < 1.0) || !(tol > 0.0) {
            return domain(format!(
                "need P > 0, ε ∈ (0,1), tol > 0; got {p}, {eps}, {tol}"
            ));
        }
        let signal = signal_leakage_params(w, ch)?;
        let hw_sq = ch.h().dotc(w).norm_sqr();
        Ok(Self {
            model: DeltaEModel::with_table(signal, table),
            hw_sq,
            p,
            eps,
            tol,
        })
    }

    pub fn hw_sq(&self) -> f64 {
        self.hw_sq
    }

    pub fn gw_sq_mean(&self) -> f64 {
        self.model.signal().mean()
    }

    pub fn rate(&self, phi: f64) -> Result<OutageRate> {
        solve_outage_rate_with(
            &self.model,
            phi * self.p * self.hw_sq,
            self.eps,
            phi,
            self.p,
            self.tol,
        )
    }
}

/// Grid `φ₀ − Δ/2, φ₀ − Δ/2 + step, …` clipped to `[PHI_MIN, PHI_MAX]`.
pub fn window_grid(phi0: f64, delta: f64, step: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !(step > 0.0) {
        return domain(format!(
            "window width and step must be positive, got {delta}, {step}"
        ));
    }
    let n = (delta / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n)
        .map(|k| (phi0 - delta / 2.0 + k as f64 * step).clamp(PHI_MIN, PHI_MAX))
        .collect();
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(grid)
}

/// Uniform grid of `points` values on `[PHI_MIN, PHI_MAX]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (PHI_MIN + PHI_MAX)];
    }
    (0..points)
        .map(|k| PHI_MIN + (PHI_MAX - PHI_MIN) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Evaluates the rate at every grid point and keeps the best; failing points
/// are logged and skipped.
pub fn search_grid<F>(phi0: f64, grid: &[f64], mut rate: F) -> Result<AllocResult>
where
    F: FnMut(f64) -> Result<OutageRate>,
{
    let mut trace = Vec::with_capacity(grid.len());
    let mut failed = 0;
    for &phi in grid {
        match rate(phi) {
            Ok(r) => trace.push((phi, r.rate)),
            Err(e) => {
                failed += 1;
                log::warn!("rate evaluation failed at φ = {phi}: {e}");
            }
        }
    }
    let best = trace
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, pt| match best {
            Some(b) if b.1 >= pt.1 => Some(b),
            _ => Some(pt),
        });
    let (phi_star, rs_star) =
        best.ok_or_else(|| Error::Numerical("no power split could be evaluated".into()))?;
    Ok(AllocResult {
        phi0,
        phi_star,
        rs_star,
        trace,
        failed_points: failed,
    })
}

pub fn local_search(phi0: f64, delta: f64, step: f64, eval: &RateEvaluator) -> Result<AllocResult> {
    search_grid(phi0, &window_grid(phi0, delta, step)?, |phi| eval.rate(phi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub an: AnOptions,
    pub bisection: BisectionOptions,
    pub delta: f64,
    pub step: f64,
    pub phi0_tol: f64,
    pub rate_tol: f64,
    /// Recompute the beamformer at every window point instead of once.
    pub joint: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            an: AnOptions::default(),
            bisection: BisectionOptions::default(),
            delta: 0.2,
            step: 0.01,
            phi0_tol: 1e-6,
            rate_tol: 1e-4,
            joint: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignFlag {
    /// The AN optimizer hit its iteration limit.
    AnNotConverged,
    /// The Bernstein restriction certified no positive rate; maximum-ratio
    /// transmission was used.
    BeamformerInfeasible,
    /// Rank-one recovery used the principal eigenvector.
    RankOneFallback,
    /// Some conic solves failed numerically during the rate bisection.
    ConicFailures,
    /// Some window points could not be evaluated.
    SkippedPoints,
    /// Even a zero rate violates the outage target at the chosen split.
    OutageInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub design: TransmitDesign,
    pub alloc: AllocResult,
    /// Split at which the beamformer was computed.
    pub phi_ref: f64,
    /// Rate certified by the Bernstein restriction at `phi_ref`.
    pub beam_rs: f64,
    pub flags: Vec<DesignFlag>,
}

fn check_design_inputs(ch: &ChannelRealization, p: f64, eps: f64) -> Result<()> {
    if ch.ns() < 2 {
        return domain("artificial noise needs at least two antennas");
    }
    if !(p > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return domain(format!("need P > 0 and ε ∈ (0,1); got {p}, {eps}"));
    }
    Ok(())
}

fn mrt(ch: &ChannelRealization) -> CVector {
    ch.h().unscale(ch.h().norm())
}

/// Stationary point of the proxy for a given beamformer, kept inside the
/// search bounds.
fn proxy_root(ch: &ChannelRealization, w: &CVector, ga_mean: f64, p: f64, tol: f64) -> Result<f64> {
    let gw_mean = signal_leakage_params(w, ch)?.mean();
    let hw_sq = ch.h().dotc(w).norm_sqr();
    find_phi0(p, hw_sq, gw_mean, ga_mean, tol)
}

/// Everything a power-split search needs: the AN direction, its leakage
/// table, the beamformer and the proxy root.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    pub a: CVector,
    pub table: XiSqTable,
    pub w: CVector,
    pub phi_ref: f64,
    pub beam_rs: f64,
    pub phi0: f64,
    pub flags: Vec<DesignFlag>,
}

impl PreparedDesign {
    pub fn evaluator(
        &self,
        ch: &ChannelRealization,
        p: f64,
        eps: f64,
        tol: f64,
    ) -> Result<RateEvaluator> {
        RateEvaluator::with_table(ch, &self.w, self.table.clone(), p, eps, tol)
    }
}

/// AN optimization, beamforming at a reference split and the proxy root.
pub fn prepare_design(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    opts: &DesignOptions,
) -> Result<PreparedDesign> {
    check_design_inputs(ch, p, eps)?;
    let mut flags = Vec::new();
    let an_sol = optimize_an(ch, &opts.an)?;
    if !an_sol.converged {
        flags.push(DesignFlag::AnNotConverged);
    }
    let xi = ArtificialNoise::Directional(an_sol.a.clone()).xi_distribution(ch)?;
    let ga_mean = xi.mean();
    let table = XiSqTable::build(&xi)?;

    // the beamformer needs a split before the proxy root for it exists
    let phi_ref = proxy_root(ch, &mrt(ch), ga_mean, p, opts.phi0_tol)?.clamp(PHI_MIN, PHI_MAX);
    let beam = max_rate_bisection(phi_ref, p, &an_sol.a, ch, eps, &opts.bisection)?;
    if !beam.feasible {
        flags.push(DesignFlag::BeamformerInfeasible);
    } else if beam.fallback {
        flags.push(DesignFlag::RankOneFallback);
    }
    if beam.numerical_failures > 0 {
        flags.push(DesignFlag::ConicFailures);
    }
    let phi0 = proxy_root(ch, &beam.w, ga_mean, p, opts.phi0_tol)?;
    Ok(PreparedDesign {
        a: an_sol.a,
        table,
        w: beam.w,
        phi_ref,
        beam_rs: beam.rs,
        phi0,
        flags,
    })
}

fn finish(prep: PreparedDesign, alloc: AllocResult, w: CVector, p: f64) -> DesignOutcome {
    let mut flags = prep.flags;
    if alloc.failed_points > 0 {
        flags.push(DesignFlag::SkippedPoints);
    }
    if alloc.rs_star == 0.0 {
        flags.push(DesignFlag::OutageInfeasible);
    }
    let design = TransmitDesign {
        w,
        an: ArtificialNoise::Directional(prep.a),
        phi: alloc.phi_star,
        p,
        rs: alloc.rs_star,
    };
    DesignOutcome {
        design,
        alloc,
        phi_ref: prep.phi_ref,
        beam_rs: prep.beam_rs,
        flags,
    }
}

/// AN optimization, beamforming at a reference split, proxy root and local
/// search.
pub fn run_design(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    allocate_window(prepare_design(ch, p, eps, opts)?, ch, p, eps, opts)
}

/// Window search around the proxy root of a prepared design.
pub fn allocate_window(
    prep: PreparedDesign,
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    let phi0 = prep.phi0;
    let (alloc, w) = if opts.joint {
        let grid = window_grid(phi0, opts.delta, opts.step)?;
        let mut beams = Vec::with_capacity(grid.len());
        let alloc = search_grid(phi0, &grid, |phi| {
            let b = max_rate_bisection(phi, p, &prep.a, ch, eps, &opts.bisection)?;
            let eval =
                RateEvaluator::with_table(ch, &b.w, prep.table.clone(), p, eps, opts.rate_tol)?;
            beams.push((phi, b.w));
            eval.rate(phi)
        })?;
        let w = beams
            .into_iter()
            .find(|(phi, _)| *phi == alloc.phi_star)
            .map(|(_, w)| w)
            .unwrap_or_else(|| prep.w.clone());
        (alloc, w)
    } else {
        let eval = prep.evaluator(ch, p, eps, opts.rate_tol)?;
        (
            local_search(phi0, opts.delta, opts.step, &eval)?,
            prep.w.clone(),
        )
    };
    Ok(finish(prep, alloc, w, p))
}

/// The proposed design with the split chosen over a uniform grid on
/// `[PHI_MIN, PHI_MAX]` instead of the window around the proxy root.
pub fn brute_force_design(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    points: usize,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    allocate_grid(prepare_design(ch, p, eps, opts)?, ch, p, eps, points, opts)
}

/// Uniform-grid search over `[PHI_MIN, PHI_MAX]` for a prepared design.
pub fn allocate_grid(
    prep: PreparedDesign,
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    points: usize,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    if points == 0 {
        return domain("brute-force grid needs at least one point");
    }
    let eval = prep.evaluator(ch, p, eps, opts.rate_tol)?;
    let alloc = search_grid(prep.phi0, &uniform_grid(points), |phi| eval.rate(phi))?;
    let w = prep.w.clone();
    Ok(finish(prep, alloc, w, p))
}

/// Maximum-ratio beamformer with isotropic null-space AN; the split is
/// chosen by the same proxy root and local search.
pub fn traditional_design(
    ch: &ChannelRealization,
    p: f64,
    eps: f64,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    check_design_inputs(ch, p, eps)?;
    let w = mrt(ch);
    let an = ArtificialNoise::Isotropic;
    let xi = an.xi_distribution(ch)?;
    let phi0 = proxy_root(ch, &w, xi.mean(), p, opts.phi0_tol)?;
    let eval = RateEvaluator::new(ch, &w, &xi, p, eps, opts.rate_tol)?;
    let alloc = local_search(phi0, opts.delta, opts.step, &eval)?;
    let mut flags = Vec::new();
    if alloc.failed_points > 0 {
        flags.push(DesignFlag::SkippedPoints);
    }
    if alloc.rs_star == 0.0 {
        flags.push(DesignFlag::OutageInfeasible);
    }
    let design = TransmitDesign {
        w,
        an,
        phi: alloc.phi_star,
        p,
        rs: alloc.rs_star,
    };
    Ok(DesignOutcome {
        design,
        alloc,
        phi_ref: phi0,
        beam_rs: 0.0,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::an_optimizer::random_instance;
    use crate::channel_model::{draw_correlations, sample_main};
    use crate::linalg::{null_projector, quad_form, C64};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table2_instance(seed: u64, rho: f64) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_main(8, 1.0, &mut rng).unwrap();
        let r = draw_correlations(rho, 8, &mut rng);
        ChannelRealization::new(h, 1.0, 1.0, r).unwrap()
    }

    #[test]
    fn derivative_without_leakage_is_positive() {
        for phi in [0.0, 0.3, 0.9, 1.0] {
            let d = h_prime(phi, 10.0, 3.0, 0.0, 0.4);
            assert!((d - 30.0 / (1.0 + phi * 30.0) / LN_2).abs() < 1e-12);
            assert!(d > 0.0);
        }
        assert_eq!(find_phi0(10.0, 3.0, 0.0, 0.4, 1e-6).unwrap(), 1.0);
    }

    #[test]
    fn derivative_at_zero_split() {
        let d = h_prime(0.0, 10.0, 2.0, 1.5, 0.0);
        assert!((d - (20.0 - 15.0) / LN_2).abs() < 1e-12);
        assert_eq!(find_phi0(10.0, 1.0, 2.0, 0.0, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let (p, hw, gw, ga) = (10.0, 4.0, 1.3, 0.6);
        for phi in [0.1, 0.4, 0.8] {
            let e = 1e-6;
            let fd =
                (h_proxy(phi + e, p, hw, gw, ga) - h_proxy(phi - e, p, hw, gw, ga)) / (2.0 * e);
            assert!((fd - h_prime(phi, p, hw, gw, ga)).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // fails when Eve's mean gain exceeds Bob's: with ga = 0 and gw > hw
        // the derivative increases, although φ₀ = 0 there anyway
        #[test]
        fn derivative_is_decreasing(
            p in 1.0..40.0f64, hw in 0.5..12.0f64, gw_frac in 0.01..1.0f64, ga in 0.0..2.0f64,
        ) {
            let gw = gw_frac * hw;
            let mut prev = f64::INFINITY;
            for k in 0..1000 {
                let d = h_prime(k as f64 / 999.0, p, hw, gw, ga);
                prop_assert!(d < prev + 1e-12);
                prev = d;
            }
        }

        #[test]
        fn root_maximizes_the_proxy(
            p in 1.0..40.0f64, hw in 0.5..12.0f64, gw in 0.05..6.0f64, ga in 0.0..2.0f64,
        ) {
            let phi0 = find_phi0(p, hw, gw, ga, 1e-6).unwrap();
            let n = 10_000;
            let best = (0..=n)
                .map(|k| k as f64 / n as f64)
                .max_by(|a, b| h_proxy(*a, p, hw, gw, ga).total_cmp(&h_proxy(*b, p, hw, gw, ga)))
                .unwrap();
            prop_assert!((best - phi0).abs() <= 2e-4, "grid {} root {}", best, phi0);
        }
    }

    #[test]
    fn window_is_clipped_and_ordered() {
        let g = window_grid(0.5, 0.2, 0.01).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[0] - 0.4).abs() < 1e-12 && (g[20] - 0.6).abs() < 1e-12);
        let g = window_grid(0.98, 0.2, 0.01).unwrap();
        assert!(g.iter().all(|&x| (PHI_MIN..=PHI_MAX).contains(&x)));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(window_grid(0.3, 0.005, 0.01).unwrap(), vec![0.3 - 0.0025]);
        let u = uniform_grid(100);
        assert!((u[0] - 0.01).abs() < 1e-15 && (u[99] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn single_point_window_returns_that_point() {
        let r = search_grid(0.4, &[0.4], |_| {
            Ok(OutageRate {
                rate: 0.7,
                feasible: true,
            })
        })
        .unwrap();
        assert_eq!((r.phi_star, r.rs_star), (0.4, 0.7));
    }

    #[test]
    fn failing_points_are_skipped() {
        let r = search_grid(0.5, &[0.4, 0.5, 0.6], |phi| {
            if phi == 0.5 {
                Err(Error::Numerical("x".into()))
            } else {
                Ok(OutageRate {
                    rate: phi,
                    feasible: true,
                })
            }
        })
        .unwrap();
        assert_eq!(r.failed_points, 1);
        assert_eq!(r.phi_star, 0.6);
        assert_eq!(r.trace.len(), 2);
    }

    #[test]
    fn isotropic_weights_and_leakage_agree_on_average() {
        let h = CVector::from_vec(vec![
            C64::new(1.0, 0.5),
            C64::new(-0.3, 0.2),
            C64::new(0.1, -0.9),
        ]);
        let w = ArtificialNoise::Isotropic.diagonal_weights(&h);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // with identity-covariance g, E[gᴴΠg]/(Ns−1) = 1 = Σ weights
        let e: f64 = (0..3)
            .map(|i| {
                let mut g = CVector::zeros(3);
                g[i] = C64::new(1.0, 0.0);
                ArtificialNoise::Isotropic.leakage(&g, &h)
            })
            .sum();
        assert!((e - 1.0).abs() < 1e-12);
        let g = CVector::from_vec(vec![
            C64::new(0.2, -1.0),
            C64::new(0.7, 0.1),
            C64::new(-0.5, 0.4),
        ]);
        let direct = quad_form(&null_projector(&h), &g) / 2.0;
        assert!((ArtificialNoise::Isotropic.leakage(&g, &h) - direct).abs() < 1e-12);
    }

    #[test]
    fn design_is_deterministic_and_consistent() {
        let ch = table2_instance(3, 0.5);
        let opts = DesignOptions::default();
        let a = run_design(&ch, 10.0, 0.15, &opts).unwrap();
        let b = run_design(&ch, 10.0, 0.15, &opts).unwrap();
        assert_eq!(a, b);
        let d = &a.design;
        assert!(d.w.norm_squared() <= 1.0 + 1e-9);
        if let ArtificialNoise::Directional(an) = &d.an {
            assert!(ch.h().dotc(an).norm() <= 1e-6 * ch.h().norm());
        } else {
            panic!("proposed design must use directional AN");
        }
        let lo = (a.alloc.phi0 - 0.1).max(0.0) - 1e-12;
        let hi = (a.alloc.phi0 + 0.1).min(1.0) + 1e-12;
        assert!((lo..=hi).contains(&d.phi));
        let max = a.alloc.trace.iter().map(|t| t.1).fold(0.0, f64::max);
        assert_eq!(max, d.rs);
    }

    #[test]
    fn local_search_is_no_worse_than_its_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_instance(4, 0.8, &mut rng).unwrap();
        let a = optimize_an(&ch, &AnOptions::default()).unwrap().a;
        let xi = ArtificialNoise::Directional(a)
            .xi_distribution(&ch)
            .unwrap();
        let eval = RateEvaluator::new(&ch, &mrt(&ch), &xi, 10.0, 0.2, 1e-4).unwrap();
        let phi0 = find_phi0(10.0, eval.hw_sq(), eval.gw_sq_mean(), xi.mean(), 1e-6)
            .unwrap()
            .clamp(PHI_MIN, PHI_MAX);
        let r = local_search(phi0, 0.2, 0.01, &eval).unwrap();
        assert!(r.rs_star >= eval.rate(phi0).unwrap().rate - 1e-12);
    }

    #[test]
    fn traditional_uses_maximum_ratio_transmission() {
        let ch = table2_instance(4, 0.5);
        let t = traditional_design(&ch, 10.0, 0.15, &DesignOptions::default()).unwrap();
        assert!(
            (t.design.delta_d(ch.h()) - t.design.phi * 10.0 * ch.h().norm_squared()).abs() < 1e-9
        );
        assert_eq!(t.design.an, ArtificialNoise::Isotropic);
    }
}

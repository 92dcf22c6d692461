//! Correlated MISO wiretap channel model.
//!
//! The main channel `h` is known exactly at the transmitter. Each wiretap
//! subchannel `g_i` is correlated with `h_i` through its power correlation
//! coefficient `ρ_i`, which makes `g_i` complex Gaussian with a mean
//! proportional to `h_i`:
//!
//! ```text
//! g_i = σe √ρ_i / σd · h_i + σe √(1-ρ_i) · z_i,   z_i ~ CN(0, 1)
//! ```
//!
//! so conditional on `h_i` the power `|g_i|²` is noncentral χ² with two
//! degrees of freedom.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{domain, Error, Result};
use crate::linalg::{CVector, C64};

/// Above this argument the power series gives way to the asymptotic expansion.
const SERIES_LIMIT: f64 = 20.0;

/// Exponentially scaled modified Bessel function `e^{-x} I₀(x)` for `x ≥ 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        (-x).exp() * i0_series(x)
    } else {
        // I₀(x) ~ e^x/√(2πx) · Σ ((2k-1)!!)² / (k! (8x)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (k as f64 * 8.0 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

fn i0_series(x: f64) -> f64 {
    // Σ ((x/2)^k / k!)²
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Modified Bessel function of the first kind, order zero.
///
/// Arguments whose result is not representable as `f64` yield
/// [`Error::Overflow`].
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("bessel_i0 expects a finite x >= 0, got {x}"));
    }
    if x < SERIES_LIMIT {
        return Ok(i0_series(x));
    }
    let log_value = x + bessel_i0e(x).ln();
    if log_value >= f64::MAX.ln() {
        return Err(Error::Overflow(format!("I0({x})")));
    }
    Ok(log_value.exp())
}

fn check_variances(sigma_d_sq: f64, sigma_e_sq: f64) -> Result<()> {
    if !(sigma_d_sq > 0.0 && sigma_e_sq > 0.0) || !sigma_d_sq.is_finite() || !sigma_e_sq.is_finite()
    {
        return domain(format!(
            "variances must be positive, got {sigma_d_sq}, {sigma_e_sq}"
        ));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return domain(format!("power correlation must lie in [0, 1), got {rho}"));
    }
    Ok(())
}

/// Joint density of the main power `x = |h_i|²` and wiretap power `y = |g_i|²`.
pub fn joint_power_pdf(x: f64, y: f64, rho: f64, sigma_d_sq: f64, sigma_e_sq: f64) -> Result<f64> {
    check_rho(rho)?;
    check_variances(sigma_d_sq, sigma_e_sq)?;
    if x <= 0.0 || y <= 0.0 {
        return Ok(0.0);
    }
    let one_minus = 1.0 - rho;
    let arg = 2.0 / one_minus * (rho * x * y / (sigma_d_sq * sigma_e_sq)).sqrt();
    let exponent = -(x / sigma_d_sq + y / sigma_e_sq) / one_minus;
    Ok(bessel_i0e(arg) * (exponent + arg).exp() / (one_minus * sigma_d_sq * sigma_e_sq))
}

/// Exponential density of the main-channel power `|h_i|²`.
pub fn main_power_pdf(y: f64, sigma_d_sq: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-y / sigma_d_sq).exp() / sigma_d_sq
    }
}

/// Density of the wiretap power `x = |g_i|²` given the main power `y_i = |h_i|²`.
pub fn conditional_power_pdf(
    x: f64,
    y_i: f64,
    rho_i: f64,
    sigma_d_sq: f64,
    sigma_e_sq: f64,
) -> Result<f64> {
    check_rho(rho_i)?;
    check_variances(sigma_d_sq, sigma_e_sq)?;
    if y_i < 0.0 {
        return domain(format!("main power must be nonnegative, got {y_i}"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let sigma_sq = (1.0 - rho_i) * sigma_e_sq / 2.0;
    let s = (y_i * rho_i * sigma_e_sq / sigma_d_sq).sqrt();
    let arg = s * x.sqrt() / sigma_sq;
    // e^{-(s²+x)/2σ²} I₀(arg) = e^{-(s-√x)²/2σ²} · I₀e(arg)
    let d = s - x.sqrt();
    Ok((-d * d / (2.0 * sigma_sq)).exp() * bessel_i0e(arg) / (2.0 * sigma_sq))
}

/// One block of the correlated wiretap channel: the main channel `h`, the
/// gain variances and the per-antenna power correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h: CVector,
    sigma_d_sq: f64,
    sigma_e_sq: f64,
    rho: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(h: CVector, sigma_d_sq: f64, sigma_e_sq: f64, rho: Vec<f64>) -> Result<Self> {
        if h.len() < 2 {
            return domain(format!(
                "need at least two transmit antennas, got {}",
                h.len()
            ));
        }
        if rho.len() != h.len() {
            return Err(Error::DimensionMismatch {
                expected: h.len(),
                got: rho.len(),
            });
        }
        check_variances(sigma_d_sq, sigma_e_sq)?;
        for &r in &rho {
            check_rho(r)?;
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("main channel has non-finite entries");
        }
        if h.norm_squared() == 0.0 {
            return domain("main channel is identically zero");
        }
        Ok(Self {
            h,
            sigma_d_sq,
            sigma_e_sq,
            rho,
        })
    }

    /// Same correlation on every antenna.
    pub fn uniform(h: CVector, sigma_d_sq: f64, sigma_e_sq: f64, rho: f64) -> Result<Self> {
        let n = h.len();
        Self::new(h, sigma_d_sq, sigma_e_sq, vec![rho; n])
    }

    pub fn ns(&self) -> usize {
        self.h.len()
    }
    pub fn h(&self) -> &CVector {
        &self.h
    }
    pub fn sigma_d_sq(&self) -> f64 {
        self.sigma_d_sq
    }
    pub fn sigma_e_sq(&self) -> f64 {
        self.sigma_e_sq
    }
    pub fn sigma_d(&self) -> f64 {
        self.sigma_d_sq.sqrt()
    }
    pub fn sigma_e(&self) -> f64 {
        self.sigma_e_sq.sqrt()
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `h̃ = √Θ h`.
    pub fn h_tilde(&self) -> CVector {
        CVector::from_iterator(
            self.ns(),
            self.h.iter().zip(&self.rho).map(|(h, r)| h * r.sqrt()),
        )
    }

    /// Diagonal of `√(I - Θ)`.
    pub fn sqrt_one_minus_rho(&self) -> Vec<f64> {
        self.rho.iter().map(|r| (1.0 - r).sqrt()).collect()
    }
}

/// Per-antenna complex Gaussian law of `g` given `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapStats {
    pub mean: CVector,
    pub var: Vec<f64>,
}

pub fn wiretap_stats(ch: &ChannelRealization) -> WiretapStats {
    let ratio = ch.sigma_e() / ch.sigma_d();
    let mean = CVector::from_iterator(
        ch.ns(),
        ch.h.iter()
            .zip(&ch.rho)
            .map(|(h, r)| h * (ratio * r.sqrt())),
    );
    let var = ch.rho.iter().map(|r| ch.sigma_e_sq * (1.0 - r)).collect();
    WiretapStats { mean, var }
}

/// Law of the shifted wiretap channel `g̃ = g - σe√ρ₀/σd · h`, which is what
/// artificial noise in the null space of `h` actually sees.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedWiretapStats {
    pub rho0: f64,
    pub mean: CVector,
    pub var: Vec<f64>,
    /// Squared noncentrality `s̃_i² = |E g̃_i|²`.
    pub s_tilde_sq: Vec<f64>,
    /// Per-component variance `σ_i² = (1-ρ_i)σe²/2`.
    pub sigma_i_sq: Vec<f64>,
}

impl ShiftedWiretapStats {
    /// `E|g̃_i|² = 2σ_i² + s̃_i²`.
    pub fn second_moments(&self) -> Vec<f64> {
        self.sigma_i_sq
            .iter()
            .zip(&self.s_tilde_sq)
            .map(|(s2, st2)| 2.0 * s2 + st2)
            .collect()
    }

    pub fn ns(&self) -> usize {
        self.var.len()
    }
}

pub fn shifted_stats(ch: &ChannelRealization) -> ShiftedWiretapStats {
    let rho0 = ch.rho.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = ch.sigma_e() / ch.sigma_d();
    let sqrt_rho0 = rho0.sqrt();
    let mean = CVector::from_iterator(
        ch.ns(),
        ch.h.iter()
            .zip(&ch.rho)
            .map(|(h, r)| h * (ratio * (r.sqrt() - sqrt_rho0))),
    );
    let var: Vec<f64> = ch.rho.iter().map(|r| ch.sigma_e_sq * (1.0 - r)).collect();
    let s_tilde_sq = mean.iter().map(|m| m.norm_sqr()).collect();
    let sigma_i_sq = var.iter().map(|v| v / 2.0).collect();
    ShiftedWiretapStats {
        rho0,
        mean,
        var,
        s_tilde_sq,
        sigma_i_sq,
    }
}

/// One `CN(0, 1)` draw.
#[inline]
pub fn standard_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Precomputed mean/scale for repeated wiretap draws.
#[derive(Debug, Clone)]
pub struct WiretapSampler {
    mean: Vec<C64>,
    scale: Vec<f64>,
}

impl WiretapSampler {
    pub fn new(ch: &ChannelRealization) -> Self {
        let stats = wiretap_stats(ch);
        Self {
            mean: stats.mean.iter().copied().collect(),
            scale: stats.var.iter().map(|v| v.sqrt()).collect(),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [C64], rng: &mut R) {
        for ((g, m), s) in out.iter_mut().zip(&self.mean).zip(&self.scale) {
            *g = m + standard_cn(rng) * *s;
        }
    }
}

/// One draw of `g = σe/σd √Θ h + σe √(I-Θ) z`.
pub fn sample_wiretap<R: Rng + ?Sized>(ch: &ChannelRealization, rng: &mut R) -> CVector {
    let mut out = vec![C64::new(0.0, 0.0); ch.ns()];
    WiretapSampler::new(ch).sample_into(&mut out, rng);
    CVector::from_vec(out)
}

/// One draw of `h ~ CN(0, σd² I)`.
pub fn sample_main<R: Rng + ?Sized>(ns: usize, sigma_d_sq: f64, rng: &mut R) -> Result<CVector> {
    if ns < 2 {
        return domain(format!("need at least two transmit antennas, got {ns}"));
    }
    if !(sigma_d_sq > 0.0) || !sigma_d_sq.is_finite() {
        return domain(format!(
            "main-channel variance must be positive, got {sigma_d_sq}"
        ));
    }
    let sd = sigma_d_sq.sqrt();
    Ok(CVector::from_iterator(
        ns,
        (0..ns).map(|_| standard_cn(rng) * sd),
    ))
}

/// Per-antenna correlations fluctuating uniformly in `[ρ-0.2, ρ+0.2]`,
/// clipped to `[0, 0.99]`.
pub fn draw_correlations<R: Rng + ?Sized>(rho: f64, ns: usize, rng: &mut R) -> Vec<f64> {
    let u = Uniform::new(-0.2, 0.2).expect("valid range");
    (0..ns)
        .map(|_| (rho + u.sample(rng)).clamp(0.0, 0.99))
        .collect()
}

pub fn db_to_watts(p_dbw: f64) -> f64 {
    10f64.powf(p_dbw / 10.0)
}

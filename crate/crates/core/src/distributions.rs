//! Distribution machinery behind the outage-rate equation.
//!
//! * `ζ² = |gᴴw|²` (signal leakage) is noncentral χ² with two degrees of freedom.
//! * `ξ² = Σ a_i² |g̃_i|²` (artificial-noise leakage, diagonal form) is a
//!   weighted sum of independent noncentral χ² variables. Its law is only
//!   available through its characteristic function, which is inverted
//!   numerically along a Talbot contour.
//! * `δe = φP ζ² / (1 + (1-φ)P ξ²)` is Eve's SNR; its CDF drives the
//!   achievable secrecy rate at a given outage probability.

use std::f64::consts::PI;

use crate::channel_model::{bessel_i0e, ChannelRealization, ShiftedWiretapStats};
use crate::error::{domain, Error, Result};
use crate::linalg::{CVector, C64};
use crate::quad;

/// Nodes used on the Talbot contour.
const TALBOT_NODES: usize = 24;
/// Grid intervals of the tabulated AN-leakage CDF.
const TABLE_INTERVALS: usize = 512;
/// Tail mass ignored when truncating distributions.
const TAIL_MASS: f64 = 1e-13;

/// Noncentral χ² with two degrees of freedom: the law of `|c|²` for
/// `c ~ CN(m, 2σ²)` with `|m| = s`.
///
/// `sigma_sq = 0` is accepted and describes the point mass at `s²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcChiSq2 {
    pub sigma_sq: f64,
    pub s: f64,
}

impl NcChiSq2 {
    pub fn new(sigma_sq: f64, s: f64) -> Result<Self> {
        if !(sigma_sq >= 0.0) || !(s >= 0.0) || !sigma_sq.is_finite() || !s.is_finite() {
            return domain(format!(
                "invalid noncentral chi-square parameters ({sigma_sq}, {s})"
            ));
        }
        Ok(Self { sigma_sq, s })
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_sq == 0.0
    }

    pub fn mean(&self) -> f64 {
        self.s * self.s + 2.0 * self.sigma_sq
    }

    pub fn variance(&self) -> f64 {
        4.0 * self.sigma_sq * (self.sigma_sq + self.s * self.s)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        ncx2_pdf(x, self)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        ncx2_cdf(x, self)
    }

    pub fn sf(&self, x: f64) -> f64 {
        ncx2_sf(x, self)
    }

    /// Smallest `x` with survival below `tail`, to relative precision 1e-10.
    pub fn upper_quantile(&self, tail: f64) -> f64 {
        if self.is_degenerate() {
            return self.s * self.s;
        }
        let mut hi = self.mean() + 10.0 * self.variance().sqrt();
        while self.sf(hi) > tail {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-10 * hi {
            let mid = 0.5 * (lo + hi);
            if self.sf(mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

pub fn ncx2_pdf(x: f64, p: &NcChiSq2) -> f64 {
    if x <= 0.0 || p.is_degenerate() {
        return 0.0;
    }
    let two_s2 = 2.0 * p.sigma_sq;
    let rx = x.sqrt();
    let d = rx - p.s;
    (-d * d / two_s2).exp() * bessel_i0e(p.s * rx / p.sigma_sq) / two_s2
}

/// `(S, F)`: survival and CDF through the Poisson mixture
/// `X/σ² ~ Σ_k Pois(k; λ/2) χ²_{2k+2}`, `λ = s²/σ²`.
fn ncx2_tails(x: f64, p: &NcChiSq2) -> (f64, f64) {
    if p.is_degenerate() {
        return if x >= p.s * p.s {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        };
    }
    if x <= 0.0 {
        return (1.0, 0.0);
    }
    let mu = 0.5 * p.s * p.s / p.sigma_sq;
    let y = 0.5 * x / p.sigma_sq;
    // S = Pr(M ≤ K) with K ~ Pois(μ), M ~ Pois(y) independent
    let k_max = (mu + 12.0 * mu.sqrt() + 40.0).ceil() as usize;
    let ln_mu = mu.ln();
    let ln_y = y.ln();
    let mut ln_fact = 0.0;
    let mut m_cdf = 0.0;
    let mut sf = 0.0;
    for k in 0..=k_max {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        m_cdf += (-y + k as f64 * ln_y - ln_fact).exp();
        let pk = if mu == 0.0 {
            if k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-mu + k as f64 * ln_mu - ln_fact).exp()
        };
        sf += pk * m_cdf.min(1.0);
        if mu == 0.0 {
            break;
        }
    }
    let sf = sf.clamp(0.0, 1.0);
    (sf, 1.0 - sf)
}

pub fn ncx2_cdf(x: f64, p: &NcChiSq2) -> f64 {
    ncx2_tails(x, p).1
}

pub fn ncx2_sf(x: f64, p: &NcChiSq2) -> f64 {
    ncx2_tails(x, p).0
}

/// Law of `ζ² = |gᴴw|²`.
pub fn signal_leakage_params(w: &CVector, ch: &ChannelRealization) -> Result<NcChiSq2> {
    if w.len() != ch.ns() {
        return Err(Error::DimensionMismatch {
            expected: ch.ns(),
            got: w.len(),
        });
    }
    if w.norm_squared() > 1.0 + 1e-9 {
        return domain(format!("beamformer norm² {} exceeds 1", w.norm_squared()));
    }
    let weighted: f64 = w
        .iter()
        .zip(ch.rho())
        .map(|(wi, r)| (1.0 - r) * wi.norm_sqr())
        .sum();
    let sigma_sq = ch.sigma_e_sq() / 2.0 * weighted;
    let s = ch.sigma_e() / ch.sigma_d() * ch.h_tilde().dotc(w).norm();
    NcChiSq2::new(sigma_sq, s)
}

fn cf_component(freq: C64, sigma_i_sq: f64, s_tilde_sq: f64) -> C64 {
    let j = C64::new(0.0, 1.0);
    let denom = C64::new(1.0, 0.0) - j * freq * (2.0 * sigma_i_sq);
    (j * freq * s_tilde_sq / denom).exp() / denom
}

/// Characteristic function of `|g̃_i|²`.
pub fn cf_gtilde_sq(w_freq: f64, sigma_i_sq: f64, s_tilde_sq: f64) -> C64 {
    cf_component(C64::new(w_freq, 0.0), sigma_i_sq, s_tilde_sq)
}

/// Law of the diagonal AN leakage `ξ² = Σ_i weight_i · |g̃_i|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSqDistribution {
    weights: Vec<f64>,
    sigma_i_sq: Vec<f64>,
    s_tilde_sq: Vec<f64>,
}

impl XiSqDistribution {
    pub fn new(weights: Vec<f64>, sigma_i_sq: Vec<f64>, s_tilde_sq: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        for len in [sigma_i_sq.len(), s_tilde_sq.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("leakage weights must be nonnegative");
        }
        if weights.iter().sum::<f64>() > 1.0 + 1e-6 {
            return domain("leakage weights must sum to at most one");
        }
        if sigma_i_sq.iter().any(|s| !(*s > 0.0)) || s_tilde_sq.iter().any(|s| !(*s >= 0.0)) {
            return domain("invalid per-antenna leakage parameters");
        }
        Ok(Self {
            weights,
            sigma_i_sq,
            s_tilde_sq,
        })
    }

    /// Weights `|a_i|²` of a directional AN vector.
    pub fn from_an(a: &CVector, stats: &ShiftedWiretapStats) -> Result<Self> {
        if a.len() != stats.ns() {
            return Err(Error::DimensionMismatch {
                expected: stats.ns(),
                got: a.len(),
            });
        }
        Self::new(
            a.iter().map(|z| z.norm_sqr()).collect(),
            stats.sigma_i_sq.clone(),
            stats.s_tilde_sq.clone(),
        )
    }

    /// AN spread isotropically over the null space of `h`: the diagonal of
    /// the null-space projector divided by its rank.
    pub fn isotropic(h: &CVector, stats: &ShiftedWiretapStats) -> Result<Self> {
        let n = h.len();
        let norm_sq = h.norm_squared();
        let weights = h
            .iter()
            .map(|z| (1.0 - z.norm_sqr() / norm_sq) / (n - 1) as f64)
            .collect();
        Self::new(weights, stats.sigma_i_sq.clone(), stats.s_tilde_sq.clone())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn sigma_i_sq(&self) -> &[f64] {
        &self.sigma_i_sq
    }
    pub fn s_tilde_sq(&self) -> &[f64] {
        &self.s_tilde_sq
    }

    fn active(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.sigma_i_sq)
            .zip(&self.s_tilde_sq)
            .filter(|((w, _), _)| **w > 0.0)
            .map(|((w, s2), st2)| (*w, *s2, *st2))
    }

    pub fn is_degenerate(&self) -> bool {
        self.active().next().is_none()
    }

    pub fn mean(&self) -> f64 {
        self.active().map(|(w, s2, st2)| w * (2.0 * s2 + st2)).sum()
    }

    pub fn variance(&self) -> f64 {
        self.active()
            .map(|(w, s2, st2)| w * w * 4.0 * s2 * (s2 + st2))
            .sum()
    }

    /// `E[e^{-sξ²}]` for complex `s` (analytic off the negative real axis).
    pub fn laplace(&self, s: C64) -> C64 {
        let one = C64::new(1.0, 0.0);
        self.active().fold(one, |acc, (w, s2, st2)| {
            let denom = one + s * (2.0 * w * s2);
            acc * (-(s * (w * st2)) / denom).exp() / denom
        })
    }

    /// Log moment generating function `ln E[e^{θξ²}]`, finite for `θ < θ_max`.
    fn log_mgf(&self, theta: f64) -> f64 {
        self.active()
            .map(|(w, s2, st2)| {
                let d = 1.0 - 2.0 * theta * w * s2;
                theta * w * st2 / d - d.ln()
            })
            .sum()
    }

    fn theta_max(&self) -> f64 {
        self.active()
            .map(|(w, s2, _)| 1.0 / (2.0 * w * s2))
            .fold(f64::INFINITY, f64::min)
    }

    /// Chernoff bound `inf_θ E[e^{θξ²}] e^{-θy}` on `Pr(ξ² ≥ y)`.
    pub fn chernoff_tail(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            return if y <= 0.0 { 1.0 } else { 0.0 };
        }
        let tmax = self.theta_max();
        let objective = |t: f64| self.log_mgf(t) - t * y;
        // convex in θ: golden-section search on (0, θ_max)
        let (mut lo, mut hi) = (0.0, tmax * (1.0 - 1e-12));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (objective(x1), objective(x2));
        for _ in 0..200 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = objective(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = objective(x2);
            }
        }
        f1.min(f2).min(0.0).exp()
    }

    /// Smallest grid point `y` with Chernoff tail below `tail`.
    pub fn tail_cutoff(&self, tail: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let mut y = self.mean() + 4.0 * self.variance().sqrt();
        while self.chernoff_tail(y) > tail {
            y *= 1.25;
        }
        y
    }
}

/// Characteristic function of `ξ²`: product of per-antenna factors at scaled
/// frequency.
pub fn cf_xi_sq(w_freq: f64, d: &XiSqDistribution) -> C64 {
    d.active().fold(C64::new(1.0, 0.0), |acc, (w, s2, st2)| {
        acc * cf_gtilde_sq(w * w_freq, s2, st2)
    })
}

/// Fixed-Talbot inversion of a Laplace transform at `t > 0`.
fn talbot_invert<F: Fn(C64) -> C64>(transform: F, t: f64, nodes: usize) -> f64 {
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut sum = 0.5 * (transform(C64::new(r, 0.0)) * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * PI / m;
        let cot = theta.cos() / theta.sin();
        let s = C64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s) * C64::new(1.0, sigma);
        sum += term.re;
    }
    r / m * sum
}

fn density_floor(d: &XiSqDistribution) -> f64 {
    1e-8 * (1.0 / d.mean()).max(1.0)
}

/// Density of `ξ²` by numerical inversion of its transform.
pub fn pdf_xi_sq(x: f64, d: &XiSqDistribution) -> Result<f64> {
    if x < 0.0 {
        return domain(format!("density argument must be nonnegative, got {x}"));
    }
    if d.is_degenerate() {
        return Ok(0.0);
    }
    if x == 0.0 {
        let mut active = d.active();
        let first = active.next().expect("nondegenerate");
        return Ok(if active.next().is_none() {
            let (w, s2, st2) = first;
            (-st2 / (2.0 * s2)).exp() / (2.0 * w * s2)
        } else {
            0.0
        });
    }
    let v = talbot_invert(|s| d.laplace(s), x, TALBOT_NODES);
    if v < -density_floor(d) || !v.is_finite() {
        return Err(Error::Numerical(format!(
            "density inversion produced {v} at x = {x}"
        )));
    }
    Ok(v.max(0.0))
}

/// CDF of `ξ²` by numerical inversion of `L(s)/s`.
pub fn cdf_xi_sq(x: f64, d: &XiSqDistribution) -> Result<f64> {
    if x <= 0.0 || d.is_degenerate() {
        return Ok(if d.is_degenerate() && x >= 0.0 {
            1.0
        } else {
            0.0
        });
    }
    let v = talbot_invert(|s| d.laplace(s) / s, x, TALBOT_NODES);
    if !v.is_finite() || !(-1e-8..=1.0 + 1e-8).contains(&v) {
        return Err(Error::Numerical(format!(
            "CDF inversion produced {v} at x = {x}"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// CDF and density of `ξ²` tabulated on `y_k = y_max (k/N)²`, interpolated
/// by cubic Hermite segments.
#[derive(Debug, Clone)]
pub struct XiSqTable {
    y_max: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    degenerate: bool,
}

impl XiSqTable {
    pub fn build(d: &XiSqDistribution) -> Result<Self> {
        if d.is_degenerate() {
            return Ok(Self {
                y_max: 0.0,
                cdf: vec![1.0],
                pdf: vec![0.0],
                degenerate: true,
            });
        }
        let y_max = d.tail_cutoff(TAIL_MASS);
        let n = TABLE_INTERVALS;
        let mut cdf = Vec::with_capacity(n + 1);
        let mut pdf = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let y = Self::node(y_max, k);
            cdf.push(cdf_xi_sq(y, d)?);
            pdf.push(pdf_xi_sq(y, d)?);
        }
        // enforce monotonicity against inversion round-off
        for k in 1..=n {
            if cdf[k] < cdf[k - 1] {
                cdf[k] = cdf[k - 1];
            }
        }
        Ok(Self {
            y_max,
            cdf,
            pdf,
            degenerate: false,
        })
    }

    fn node(y_max: f64, k: usize) -> f64 {
        let u = k as f64 / TABLE_INTERVALS as f64;
        y_max * u * u
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if self.degenerate || y >= self.y_max {
            return 1.0;
        }
        let pos = (y / self.y_max).sqrt() * TABLE_INTERVALS as f64;
        let k = (pos.floor() as usize).min(TABLE_INTERVALS - 1);
        let y0 = Self::node(self.y_max, k);
        let y1 = Self::node(self.y_max, k + 1);
        let h = y1 - y0;
        let t = (y - y0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[k]
            + (t3 - 2.0 * t2 + t) * h * self.pdf[k]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[k + 1]
            + (t3 - t2) * h * self.pdf[k + 1];
        v.clamp(self.cdf[k], self.cdf[k + 1])
    }

    pub fn sf(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }
}

/// Law of Eve's SNR `δe = φPζ²/(1 + (1-φ)Pξ²)` for fixed `(w, a)`; the
/// AN-leakage table is independent of `φ` and `P` and is built once.
#[derive(Debug, Clone)]
pub struct DeltaEModel {
    signal: NcChiSq2,
    an: XiSqTable,
    signal_upper: f64,
}

impl DeltaEModel {
    pub fn new(signal: NcChiSq2, an: &XiSqDistribution) -> Result<Self> {
        Ok(Self::with_table(signal, XiSqTable::build(an)?))
    }

    pub fn with_table(signal: NcChiSq2, an: XiSqTable) -> Self {
        let signal_upper = signal.upper_quantile(TAIL_MASS);
        Self {
            signal,
            an,
            signal_upper,
        }
    }

    pub fn signal(&self) -> &NcChiSq2 {
        &self.signal
    }

    pub fn table(&self) -> &XiSqTable {
        &self.an
    }

    /// `Pr(δe ≤ x)`.
    pub fn cdf(&self, x: f64, phi: f64, p: f64) -> Result<f64> {
        if !(phi > 0.0 && phi <= 1.0) || !(p > 0.0) {
            return domain(format!("need 0 < φ ≤ 1 and P > 0, got φ = {phi}, P = {p}"));
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        // δe ≤ x  ⇔  ζ² ≤ c + d·ξ²
        let c = x / (phi * p);
        let d = x * (1.0 - phi) / phi;
        let base = self.signal.cdf(c);
        if d == 0.0 || self.signal.is_degenerate() {
            return Ok(if self.signal.is_degenerate() {
                if self.signal.s * self.signal.s <= c {
                    1.0
                } else {
                    self.an
                        .sf((self.signal.s.powi(2) - c) / d.max(f64::MIN_POSITIVE))
                }
            } else {
                base
            });
        }
        let upper = self.signal_upper.min(c + d * self.an.y_max());
        if upper <= c {
            return Ok(base.min(1.0));
        }
        let r = quad::integrate(
            |t| self.signal.pdf(t) * self.an.sf((t - c) / d),
            c,
            upper,
            1e-11,
            1e-10,
            400,
        );
        if !r.converged && r.abs_error > 1e-7 {
            return Err(Error::Numerical(format!(
                "δe CDF quadrature did not converge (error {:.2e})",
                r.abs_error
            )));
        }
        Ok((base + r.value).clamp(0.0, 1.0))
    }
}

/// CDF of `δe` at `x`.
pub fn cdf_delta_e(x: f64, sig: &NcChiSq2, d: &XiSqDistribution, phi: f64, p: f64) -> Result<f64> {
    DeltaEModel::new(*sig, d)?.cdf(x, phi, p)
}

/// Outcome of the outage-rate equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageRate {
    pub rate: f64,
    /// False when even a zero rate violates the outage target.
    pub feasible: bool,
}

/// Largest `Rs` with `1 - F_δe((1+δd)/2^Rs - 1) ≤ ε`, by bisection.
pub fn solve_outage_rate_with(
    model: &DeltaEModel,
    delta_d: f64,
    eps: f64,
    phi: f64,
    p: f64,
    tol: f64,
) -> Result<OutageRate> {
    if !(delta_d >= 0.0) || !(eps > 0.0 && eps < 1.0) || !(tol > 0.0) {
        return domain(format!(
            "need δd ≥ 0, ε ∈ (0,1), tol > 0; got {delta_d}, {eps}, {tol}"
        ));
    }
    let outage = |rs: f64| -> Result<f64> {
        let y = ((1.0 + delta_d) * (-rs).exp2() - 1.0).max(0.0);
        Ok(1.0 - model.cdf(y, phi, p)?)
    };
    if outage(0.0)? > eps {
        return Ok(OutageRate {
            rate: 0.0,
            feasible: false,
        });
    }
    let mut lo = 0.0;
    let mut hi = (1.0 + delta_d).log2();
    if outage(hi)? <= eps {
        return Ok(OutageRate {
            rate: hi,
            feasible: true,
        });
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if outage(mid)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OutageRate {
        rate: lo,
        feasible: true,
    })
}

pub fn solve_outage_rate(
    delta_d: f64,
    eps: f64,
    sig: &NcChiSq2,
    d: &XiSqDistribution,
    phi: f64,
    p: f64,
    tol: f64,
) -> Result<OutageRate> {
    solve_outage_rate_with(&DeltaEModel::new(*sig, d)?, delta_d, eps, phi, p, tol)
}

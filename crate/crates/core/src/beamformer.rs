//! Information beamformer under a conservative outage constraint.
//!
//! Non-outage at rate `Rs` means `gᴴAg ≤ ω` with
//! `A = φP·W − (1−φ)P·ω·aaᴴ` and `ω = 2^{−Rs}(1 + φP·hᴴWh) − 1`. Writing
//! `g = (σe/σd)h̃ + σe√(I−Θ)z` turns the left side into a Gaussian quadratic
//! form `zᴴΛz + 2Re(zᴴx) + const`, whose tail the Bernstein-type bound
//! controls. The bound is convex in the lifted beamformer `W = wwᴴ`, which
//! gives a conic power-minimization program; bisection over `Rs` on top of
//! it finds the largest rate reachable with unit power.

use crate::channel_model::ChannelRealization;
use crate::conic_adapter::{
    self, CExpr, ConicProgram, ConicStatus, HermitianExpr, HermitianVar, LinExpr, ScalarVar,
};
use crate::error::{domain, Error, Result};
use crate::linalg::{lambda_max, principal_eigenvector, psd_sqrt, trace_re, CMatrix, CVector, C64};

/// Slack allowed on `Tr(W) ≤ 1` when deciding feasibility.
pub const POWER_SLACK: f64 = 1e-7;

/// `ω = 2^{−Rs}(1 + φP·hᴴWh) − 1`.
pub fn omega(rs: f64, phi: f64, p: f64, h_w: f64) -> f64 {
    (-rs).exp2() * (1.0 + phi * p * h_w) - 1.0
}

/// Numeric data of the quadratic-form restriction for a fixed `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinData {
    pub a_mat: CMatrix,
    pub lambda: CMatrix,
    pub x: CVector,
    pub sigma: f64,
    pub omega: f64,
    /// `c = ω − (σe²/σd²)·h̃ᴴAh̃`, the budget left for the random part.
    pub budget: f64,
}

fn check_inputs(a: &CVector, phi: f64, p: f64, ch: &ChannelRealization, eps: f64) -> Result<()> {
    if a.len() != ch.ns() {
        return Err(Error::DimensionMismatch {
            expected: ch.ns(),
            got: a.len(),
        });
    }
    if a.norm_squared() > 1.0 + 1e-6 {
        return domain("AN vector must have norm at most one");
    }
    if !(0.0..=1.0).contains(&phi) || !(p > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return domain(format!(
            "need φ ∈ [0,1], P > 0, ε ∈ (0,1); got {phi}, {p}, {eps}"
        ));
    }
    Ok(())
}

pub fn bernstein_data(
    w: &CMatrix,
    a: &CVector,
    phi: f64,
    p: f64,
    omega: f64,
    ch: &ChannelRealization,
    eps: f64,
) -> Result<BernsteinData> {
    check_inputs(a, phi, p, ch, eps)?;
    if w.nrows() != ch.ns() || w.ncols() != ch.ns() {
        return Err(Error::DimensionMismatch {
            expected: ch.ns(),
            got: w.nrows(),
        });
    }
    let n = ch.ns();
    let s = ch.sqrt_one_minus_rho();
    let ht = ch.h_tilde();
    let se2 = ch.sigma_e_sq();
    let a_mat = w.scale(phi * p) - (a * a.adjoint()).scale((1.0 - phi) * p * omega);
    let lambda = CMatrix::from_fn(n, n, |i, j| a_mat[(i, j)] * (se2 * s[i] * s[j]));
    let a_ht = &a_mat * &ht;
    let x = CVector::from_fn(n, |i, _| a_ht[i] * (se2 / ch.sigma_d() * s[i]));
    let budget = omega - se2 / ch.sigma_d_sq() * ht.dotc(&a_ht).re;
    Ok(BernsteinData {
        a_mat,
        lambda,
        x,
        sigma: -eps.ln(),
        omega,
        budget,
    })
}

/// `Tr(Λ) + √(2σ)·√(‖Λ‖_F² + 2‖x‖²) + σ·max{λ_max(Λ), 0}`.
pub fn bernstein_lhs(d: &BernsteinData) -> f64 {
    let fro_sq = d.lambda.norm_squared();
    trace_re(&d.lambda)
        + (2.0 * d.sigma).sqrt() * (fro_sq + 2.0 * d.x.norm_squared()).sqrt()
        + d.sigma * lambda_max(&d.lambda).max(0.0)
}

/// The power-minimization program at a given rate with its variable handles.
#[derive(Debug, Clone)]
pub struct PowerMinSdp {
    pub program: ConicProgram,
    pub w: HermitianVar,
    pub alpha: ScalarVar,
    pub beta: ScalarVar,
    /// Affine expressions of `Λ`, `x` and the budget `c` in the variables.
    pub lambda: HermitianExpr,
    pub x: Vec<CExpr>,
    pub budget: LinExpr,
}

pub fn build_power_min_sdp(
    rs: f64,
    phi: f64,
    p: f64,
    a: &CVector,
    ch: &ChannelRealization,
    eps: f64,
) -> Result<PowerMinSdp> {
    check_inputs(a, phi, p, ch, eps)?;
    if !(rs >= 0.0) {
        return domain(format!("rate must be nonnegative, got {rs}"));
    }
    let n = ch.ns();
    let h = ch.h();
    let ht = ch.h_tilde();
    let s = ch.sqrt_one_minus_rho();
    let se2 = ch.sigma_e_sq();
    let sigma = -eps.ln();

    let mut prog = ConicProgram::new();
    let w = prog.add_hermitian("W", n);
    let alpha = prog.add_scalar("alpha");
    let beta = prog.add_scalar("beta");

    // hᴴWh
    let mut h_w = CExpr::default();
    for i in 0..n {
        for j in 0..n {
            h_w = h_w.axpy(h[i].conj() * h[j], &w.entry(i, j));
        }
    }
    let scale = (-rs).exp2();
    let omega = h_w.re.scale(scale * phi * p).plus_constant(scale - 1.0);

    let a_entry = |i: usize, j: usize| -> CExpr {
        w.entry(i, j).scale(C64::new(phi * p, 0.0)).axpy(
            -(a[i] * a[j].conj()) * ((1.0 - phi) * p),
            &CExpr::real(omega.clone()),
        )
    };
    let a_full: Vec<CExpr> = (0..n * n).map(|k| a_entry(k / n, k % n)).collect();
    let lambda = HermitianExpr::from_upper(n, |i, j| {
        a_full[i * n + j].scale(C64::new(se2 * s[i] * s[j], 0.0))
    });
    let a_ht: Vec<CExpr> = (0..n)
        .map(|i| {
            (0..n).fold(CExpr::default(), |acc, j| {
                acc.axpy(ht[j], &a_full[i * n + j])
            })
        })
        .collect();
    let x: Vec<CExpr> = (0..n)
        .map(|i| a_ht[i].scale(C64::new(se2 / ch.sigma_d() * s[i], 0.0)))
        .collect();
    let quad = (0..n).fold(CExpr::default(), |acc, i| acc.axpy(ht[i].conj(), &a_ht[i]));
    let budget = omega.axpy(-se2 / ch.sigma_d_sq(), &quad.re);

    let trace_lambda = (0..n).fold(LinExpr::default(), |acc, i| acc.add(&lambda.entry(i, i).re));
    prog.minimize(w.trace());
    prog.nonneg(
        "bernstein",
        budget
            .sub(&trace_lambda)
            .axpy(-(2.0 * sigma).sqrt(), &alpha.expr())
            .axpy(-sigma, &beta.expr()),
    );
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut tail = Vec::with_capacity(n * n + 2 * n);
    for i in 0..n {
        tail.push(lambda.entry(i, i).re.clone());
    }
    for i in 0..n {
        for j in i + 1..n {
            tail.push(lambda.entry(i, j).re.scale(sqrt2));
            tail.push(lambda.entry(i, j).im.scale(sqrt2));
        }
    }
    for xi in &x {
        tail.push(xi.re.scale(sqrt2));
        tail.push(xi.im.scale(sqrt2));
    }
    prog.second_order("frobenius", alpha.expr(), tail);
    let beta_minus_lambda = HermitianExpr::from_upper(n, |i, j| {
        let neg = lambda.entry(i, j).scale(C64::new(-1.0, 0.0));
        if i == j {
            neg.add(&CExpr::real(beta.expr()))
        } else {
            neg
        }
    });
    prog.hermitian_psd("beta I - Lambda", beta_minus_lambda);
    prog.nonneg("beta", beta.expr());
    prog.hermitian_psd("W", w.expr());

    Ok(PowerMinSdp {
        program: prog,
        w,
        alpha,
        beta,
        lambda,
        x,
        budget,
    })
}

/// Beamformer recovered from a lifted solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub w: CVector,
    /// True when `W^{1/2}h̃` vanished and the principal eigenvector was used.
    pub fallback: bool,
}

/// Projection recovery: `Ŵ = W^{1/2} Π W^{1/2}` with `Π` the projector onto
/// `W^{1/2}h̃`, factored as `ŵŵᴴ`.
pub fn extract_rank_one(w: &CMatrix, h_tilde: &CVector) -> Result<RankOne> {
    if w.nrows() != h_tilde.len() || w.ncols() != h_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: h_tilde.len(),
            got: w.nrows(),
        });
    }
    // the conic solver is accurate to about 1e-7 relative to the matrix scale
    let floor = 1e-9 + 1e-7 * trace_re(w).abs();
    let root = psd_sqrt(w, floor)
        .ok_or_else(|| Error::Numerical("lifted beamformer is not positive semidefinite".into()))?;
    let v = &root * h_tilde;
    let scale = w.norm() * h_tilde.norm();
    if v.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) || v.norm() == 0.0 {
        let (lam, u) = principal_eigenvector(w);
        return Ok(RankOne {
            w: u * C64::new(lam.max(0.0).sqrt(), 0.0),
            fallback: true,
        });
    }
    let proj = (&v * v.adjoint()).unscale(v.norm_squared());
    let w_hat = &root * proj * &root;
    let (lam, u) = principal_eigenvector(&w_hat);
    Ok(RankOne {
        w: u * C64::new(lam.max(0.0).sqrt(), 0.0),
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    /// Unit-norm beamformer.
    pub w: CVector,
    pub w_lifted: CMatrix,
    pub rs: f64,
    /// False when no positive rate passed the feasibility test.
    pub feasible: bool,
    /// Rank-one recovery fell back to the principal eigenvector.
    pub fallback: bool,
    pub solves: usize,
    pub numerical_failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    pub tol: f64,
    pub solver_tol: f64,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            solver_tol: conic_adapter::DEFAULT_TOL,
        }
    }
}

/// Outcome of one feasibility test.
#[derive(Debug, Clone)]
pub struct PowerMinResult {
    pub status: ConicStatus,
    pub power: f64,
    pub w: CMatrix,
}

impl PowerMinResult {
    pub fn feasible(&self) -> bool {
        self.status == ConicStatus::Optimal && self.power <= 1.0 + POWER_SLACK
    }
}

pub fn solve_power_min(
    rs: f64,
    phi: f64,
    p: f64,
    a: &CVector,
    ch: &ChannelRealization,
    eps: f64,
    solver_tol: f64,
) -> Result<PowerMinResult> {
    let sdp = build_power_min_sdp(rs, phi, p, a, ch, eps)?;
    let sol = conic_adapter::solve(&sdp.program, solver_tol)?;
    let w = sol.hermitian(&sdp.w);
    Ok(PowerMinResult {
        status: sol.status,
        power: trace_re(&w),
        w,
    })
}

/// Largest rate whose power-minimization program needs at most unit power.
pub fn max_rate_bisection(
    phi: f64,
    p: f64,
    a: &CVector,
    ch: &ChannelRealization,
    eps: f64,
    opts: &BisectionOptions,
) -> Result<BeamSolution> {
    check_inputs(a, phi, p, ch, eps)?;
    if !(opts.tol > 0.0) {
        return domain("bisection tolerance must be positive");
    }
    let mut lo = 0.0;
    let mut hi = (1.0 + phi * p * ch.h().norm_squared()).log2();
    let mut best: Option<CMatrix> = None;
    let mut solves = 0;
    let mut failures = 0;
    // feasibility is monotone in the rate, so failing at the first step
    // above zero settles the search
    if hi > opts.tol {
        let r = solve_power_min(opts.tol, phi, p, a, ch, eps, opts.solver_tol)?;
        solves += 1;
        if r.status == ConicStatus::NumericalFailure {
            failures += 1;
        }
        if r.feasible() {
            lo = opts.tol;
            best = Some(r.w);
        } else {
            hi = opts.tol;
        }
    }
    while hi - lo >= opts.tol {
        let mid = 0.5 * (lo + hi);
        let r = solve_power_min(mid, phi, p, a, ch, eps, opts.solver_tol)?;
        solves += 1;
        if r.status == ConicStatus::NumericalFailure {
            failures += 1;
            log::debug!("power-min program failed numerically at Rs = {mid}");
        }
        if r.feasible() {
            lo = mid;
            best = Some(r.w);
        } else {
            hi = mid;
        }
    }
    let n = ch.ns();
    match best {
        Some(w_lifted) => {
            let r1 = extract_rank_one(&w_lifted, &ch.h_tilde())?;
            let recovered = &r1.w * r1.w.adjoint();
            let h_w = ch.h().dotc(&(&recovered * ch.h())).re;
            let d = bernstein_data(&recovered, a, phi, p, omega(lo, phi, p, h_w), ch, eps)?;
            let slack = d.budget - bernstein_lhs(&d);
            if slack < -1e-7 {
                log::info!(
                    "rank-one recovery violates the restriction at Rs = {lo} by {}",
                    -slack
                );
            }
            let norm = r1.w.norm();
            let w = if norm > 0.0 {
                r1.w.unscale(norm)
            } else {
                ch.h().unscale(ch.h().norm())
            };
            Ok(BeamSolution {
                w,
                w_lifted,
                rs: lo,
                feasible: true,
                fallback: r1.fallback,
                solves,
                numerical_failures: failures,
            })
        }
        None => {
            log::warn!(
                "no positive rate passed the power test; returning maximum-ratio beamformer"
            );
            Ok(BeamSolution {
                w: ch.h().unscale(ch.h().norm()),
                w_lifted: CMatrix::zeros(n, n),
                rs: 0.0,
                feasible: false,
                fallback: true,
                solves,
                numerical_failures: failures,
            })
        }
    }
}

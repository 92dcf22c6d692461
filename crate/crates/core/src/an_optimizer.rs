//! Artificial-noise direction: maximize the expected leakage `Σ|a_i|² E|g̃_i|²`
//! over unit-power vectors in the null space of `h`, via an augmented
//! Lagrangian method.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel_model::{shifted_stats, ChannelRealization, ShiftedWiretapStats};
use crate::error::{domain, Error, Result};
use crate::linalg::{null_projector, principal_eigenvector, real_diag, CVector, C64};

/// Upper limit on the penalty parameter.
pub const KAPPA_CAP: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AnSolution {
    pub a: CVector,
    /// Expected leakage `J(a)`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Judgement value after each outer iteration.
    pub trace: Vec<f64>,
}

/// Multipliers and penalty schedule of the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmState {
    /// Multiplier of `‖a‖² ≤ 1`.
    pub mu: f64,
    /// Multiplier of `hᴴa = 0`.
    pub nu: C64,
    pub kappa: f64,
    pub theta: f64,
    pub c: f64,
}

impl AlmState {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0)
            || !(self.kappa > 0.0 && self.kappa <= KAPPA_CAP)
            || !(self.theta > 0.0 && self.theta < 1.0)
            || !(self.c > 1.0)
            || !self.nu.re.is_finite()
            || !self.nu.im.is_finite()
        {
            return domain(format!("invalid augmented-Lagrangian state {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnOptions {
    pub kappa0: f64,
    pub mu0: f64,
    pub nu0: C64,
    pub theta: f64,
    pub c: f64,
    pub max_outer: usize,
    /// Stop once the judgement value drops below this.
    pub tol: f64,
    pub max_inner: usize,
    pub grad_tol: f64,
    /// Seed of the deterministic starting vector.
    pub start_seed: u64,
}

impl Default for AnOptions {
    fn default() -> Self {
        Self {
            kappa0: 1.0,
            mu0: 0.0,
            nu0: C64::new(0.0, 0.0),
            theta: 0.25,
            c: 2.0,
            max_outer: 50,
            tol: 1e-10,
            max_inner: 200,
            grad_tol: 1e-8,
            start_seed: 0x5eed,
        }
    }
}

fn check_dims(a: &CVector, n: usize) -> Result<()> {
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    Ok(())
}

/// `J(a) = Σ|a_i|² (2σ_i² + s̃_i²)`.
pub fn expected_leakage(a: &CVector, stats: &ShiftedWiretapStats) -> Result<f64> {
    check_dims(a, stats.ns())?;
    Ok(a.iter()
        .zip(stats.second_moments())
        .map(|(z, m)| z.norm_sqr() * m)
        .sum())
}

fn penalty_terms(a: &CVector, state: &AlmState, h: &CVector) -> f64 {
    let g = a.norm_squared() - 1.0;
    let m = (state.mu + state.kappa * g).max(0.0);
    let ha = h.dotc(a);
    (m * m - state.mu * state.mu) / (2.0 * state.kappa)
        + (state.nu.conj() * ha).re
        + 0.5 * state.kappa * ha.norm_sqr()
}

/// `L(a, μ, ν) = J + (max{0, μ+κg}² − μ²)/(2κ) + Re(ν̄ hᴴa) + κ/2 |hᴴa|²`
/// with `g(a) = ‖a‖² − 1`.
pub fn augmented_lagrangian(
    a: &CVector,
    state: &AlmState,
    h: &CVector,
    stats: &ShiftedWiretapStats,
) -> Result<f64> {
    check_dims(a, stats.ns())?;
    check_dims(h, stats.ns())?;
    state.validate()?;
    Ok(expected_leakage(a, stats)? + penalty_terms(a, state, h))
}

/// Feasibility/complementarity measure `√(|hᴴa|² + max{g(a), −μ/κ}²)`.
pub fn judgement(a: &CVector, state: &AlmState, h: &CVector) -> Result<f64> {
    check_dims(h, a.len())?;
    state.validate()?;
    let g = a.norm_squared() - 1.0;
    let slack = g.max(-state.mu / state.kappa);
    Ok((h.dotc(a).norm_sqr() + slack * slack).sqrt())
}

/// The function minimized by the inner solver: leakage enters with a negative
/// sign since the outer problem maximizes it. Works on the real coordinates
/// `x = (Re a_1, Im a_1, Re a_2, ...)`.
struct Merit<'a> {
    d: &'a [f64],
    /// Real forms of `Re(hᴴa)` and `Im(hᴴa)`.
    u_re: DVector<f64>,
    u_im: DVector<f64>,
    state: AlmState,
}

impl<'a> Merit<'a> {
    fn new(d: &'a [f64], h: &CVector, state: AlmState) -> Self {
        let n = h.len();
        let mut u_re = DVector::zeros(2 * n);
        let mut u_im = DVector::zeros(2 * n);
        for (i, hi) in h.iter().enumerate() {
            u_re[2 * i] = hi.re;
            u_re[2 * i + 1] = hi.im;
            u_im[2 * i] = -hi.im;
            u_im[2 * i + 1] = hi.re;
        }
        Self {
            d,
            u_re,
            u_im,
            state,
        }
    }

    fn parts(&self, x: &DVector<f64>) -> (f64, f64, f64) {
        let g = x.norm_squared() - 1.0;
        (g, self.u_re.dot(x), self.u_im.dot(x))
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let s = &self.state;
        let (g, hr, hi) = self.parts(x);
        let leak: f64 = (0..self.d.len())
            .map(|i| self.d[i] * (x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1]))
            .sum();
        let m = (s.mu + s.kappa * g).max(0.0);
        -leak
            + (m * m - s.mu * s.mu) / (2.0 * s.kappa)
            + s.nu.re * hr
            + s.nu.im * hi
            + 0.5 * s.kappa * (hr * hr + hi * hi)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = &self.state;
        let (g, hr, hi) = self.parts(x);
        let m = (s.mu + s.kappa * g).max(0.0);
        let mut grad = x * (2.0 * m);
        for i in 0..self.d.len() {
            grad[2 * i] -= 2.0 * self.d[i] * x[2 * i];
            grad[2 * i + 1] -= 2.0 * self.d[i] * x[2 * i + 1];
        }
        grad += &self.u_re * (s.nu.re + s.kappa * hr);
        grad += &self.u_im * (s.nu.im + s.kappa * hi);
        grad
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = &self.state;
        let n2 = x.len();
        let (g, _, _) = self.parts(x);
        let m = s.mu + s.kappa * g;
        let mut hess = DMatrix::zeros(n2, n2);
        for i in 0..self.d.len() {
            hess[(2 * i, 2 * i)] = -2.0 * self.d[i];
            hess[(2 * i + 1, 2 * i + 1)] = -2.0 * self.d[i];
        }
        if m > 0.0 {
            for k in 0..n2 {
                hess[(k, k)] += 2.0 * m;
            }
            hess += x * x.transpose() * (4.0 * s.kappa);
        }
        hess += &self.u_re * self.u_re.transpose() * s.kappa;
        hess += &self.u_im * self.u_im.transpose() * s.kappa;
        hess
    }
}

/// Newton's method with eigenvalue-modified Hessian, backtracking and
/// negative-curvature steps. Coordinate `frozen` is held fixed. Returns the
/// iteration count.
fn minimize_merit(
    merit: &Merit,
    x: &mut DVector<f64>,
    frozen: usize,
    max_iter: usize,
    grad_tol: f64,
) -> usize {
    let mut f = merit.value(x);
    for it in 0..max_iter {
        let mut grad = merit.gradient(x);
        let mut hess = merit.hessian(x);
        grad[frozen] = 0.0;
        hess.row_mut(frozen).fill(0.0);
        hess.column_mut(frozen).fill(0.0);
        hess[(frozen, frozen)] = 1.0;
        let eig = hess.symmetric_eigen();
        let scale = eig
            .eigenvalues
            .iter()
            .fold(1.0_f64, |acc, v| acc.max(v.abs()));
        let floor = 1e-10 * scale;
        let (min_idx, min_val) =
            eig.eigenvalues
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc },
                );

        let gnorm = grad.norm();
        let dir = if gnorm < grad_tol {
            if min_val >= -1e-8 * scale {
                return it;
            }
            // stationary but not a minimum: move along negative curvature
            let mut v = eig.eigenvectors.column(min_idx).into_owned();
            v[frozen] = 0.0;
            let sign = if v.dot(&grad) > 0.0 { -1.0 } else { 1.0 };
            v * (sign * 0.1)
        } else {
            let coords = eig.eigenvectors.transpose() * &grad;
            let scaled = DVector::from_iterator(
                coords.len(),
                coords
                    .iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(c, l)| -c / l.abs().max(floor)),
            );
            &eig.eigenvectors * scaled
        };

        let slope = grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &*x + &dir * step;
            let ft = merit.value(&trial);
            if ft <= f + 1e-4 * step * slope.min(0.0) && ft <= f {
                *x = trial;
                f = rescale_along_ray(merit, x, ft);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return it;
        }
    }
    max_iter
}

/// Minimize the merit along the ray through `x` with safeguarded 1-D Newton
/// steps. Straight Newton steps drift off the sphere the stiff norm penalty
/// pins the iterates to; this pulls them back.
fn rescale_along_ray(merit: &Merit, x: &mut DVector<f64>, mut f: f64) -> f64 {
    for _ in 0..20 {
        let d1 = merit.gradient(x).dot(x);
        let d2 = (merit.hessian(x) * &*x).dot(x);
        if d2 <= 0.0 || !d1.is_finite() {
            break;
        }
        let mut dt = -d1 / d2;
        let mut improved = false;
        for _ in 0..30 {
            let trial = &*x * (1.0 + dt);
            let ft = merit.value(&trial);
            if ft < f {
                *x = trial;
                f = ft;
                improved = true;
                break;
            }
            dt *= 0.5;
        }
        if !improved || dt.abs() < 1e-14 {
            break;
        }
    }
    f
}

fn to_real(a: &CVector) -> DVector<f64> {
    DVector::from_iterator(2 * a.len(), a.iter().flat_map(|z| [z.re, z.im]))
}

fn to_complex(x: &DVector<f64>) -> CVector {
    CVector::from_iterator(
        x.len() / 2,
        (0..x.len() / 2).map(|i| C64::new(x[2 * i], x[2 * i + 1])),
    )
}

/// Deterministic pseudo-random unit vector in the null space of `h`.
fn start_vector(h: &CVector, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h.len();
    let proj = null_projector(h);
    loop {
        let v = CVector::from_iterator(
            n,
            (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        );
        let p = &proj * v;
        let norm = p.norm();
        if norm > 1e-3 {
            return p.unscale(norm);
        }
    }
}

/// Augmented Lagrangian search for the AN direction.
///
/// The equality constraint is applied to `h/‖h‖`, which describes the same
/// feasible set and keeps the penalty scale independent of the channel gain.
///
/// The leakage is invariant under a global phase of `a`, and with a free
/// phase the inner minimizer anti-aligns `hᴴa` with `ν` so the multiplier
/// never settles. Before each inner solve the largest entry of `a` is rotated
/// to the real axis (with `ν` rotated alongside, leaving the Lagrangian
/// unchanged) and its imaginary part is held at zero.
pub fn optimize_an(ch: &ChannelRealization, opts: &AnOptions) -> Result<AnSolution> {
    let stats = shifted_stats(ch);
    let d = stats.second_moments();
    let h_unit = ch.h().unscale(ch.h().norm());
    let mut state = AlmState {
        mu: opts.mu0,
        nu: opts.nu0,
        kappa: opts.kappa0.min(KAPPA_CAP),
        theta: opts.theta,
        c: opts.c,
    };
    state.validate()?;

    let mut a = start_vector(&h_unit, opts.start_seed);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_outer {
        iterations += 1;
        let prev = judgement(&a, &state, &h_unit)?;
        let pivot = a
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, z)| {
                if z.norm() > acc.1 {
                    (i, z.norm())
                } else {
                    acc
                }
            })
            .0;
        let rot = C64::from_polar(1.0, -a[pivot].arg());
        a *= rot;
        a[pivot].im = 0.0;
        state.nu *= rot;
        let mut x = to_real(&a);
        let merit = Merit::new(&d, &h_unit, state);
        minimize_merit(&merit, &mut x, 2 * pivot + 1, opts.max_inner, opts.grad_tol);
        a = to_complex(&x);
        let current = judgement(&a, &state, &h_unit)?;
        trace.push(current);
        if current < opts.tol {
            converged = true;
            break;
        }
        if current >= state.theta * prev {
            state.kappa = (state.c * state.kappa).min(KAPPA_CAP);
        }
        state.nu += h_unit.dotc(&a) * state.kappa;
        state.mu = (state.mu + state.kappa * (a.norm_squared() - 1.0)).max(0.0);
    }
    if !converged {
        log::warn!("AN optimizer stopped after {iterations} outer iterations without converging");
    }
    let objective = expected_leakage(&a, &stats)?;
    Ok(AnSolution {
        a,
        objective,
        iterations,
        converged,
        trace,
    })
}

/// Exact solution: the principal eigenvector of `PDP`, `P` the projector onto
/// the null space of `h`, `D = diag(E|g̃_i|²)`.
pub fn oracle_an(ch: &ChannelRealization) -> Result<AnSolution> {
    let stats = shifted_stats(ch);
    let proj = null_projector(ch.h());
    let m = &proj * real_diag(&stats.second_moments()) * &proj;
    let (_, v) = principal_eigenvector(&m);
    let a = &proj * v;
    let a = a.unscale(a.norm());
    let objective = expected_leakage(&a, &stats)?;
    Ok(AnSolution {
        a,
        objective,
        iterations: 0,
        converged: true,
        trace: Vec::new(),
    })
}

/// Leakage of AN spread evenly over an orthonormal null-space basis.
pub fn isotropic_leakage(ch: &ChannelRealization) -> f64 {
    let stats = shifted_stats(ch);
    let h = ch.h();
    let norm_sq = h.norm_squared();
    let n = ch.ns() as f64;
    h.iter()
        .zip(stats.second_moments())
        .map(|(z, m)| (1.0 - z.norm_sqr() / norm_sq) / (n - 1.0) * m)
        .sum()
}

/// Random channel with per-antenna correlations drawn uniformly from
/// `[0, rho_max)`; shared by tests and experiments.
pub fn random_instance<R: Rng + ?Sized>(
    ns: usize,
    rho_max: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let h = crate::channel_model::sample_main(ns, 1.0, rng)?;
    let rho = (0..ns).map(|_| rng.random::<f64>() * rho_max).collect();
    ChannelRealization::new(h, 1.0, 1.0, rho)
}

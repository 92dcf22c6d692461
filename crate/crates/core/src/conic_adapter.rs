//! Linear conic programs over Hermitian-matrix and scalar variables, solved
//! by the Clarabel interior-point solver.
//!
//! Hermitian variables are stored by their free real parameters (diagonal,
//! then real and imaginary parts of the strict upper triangle), so symmetry
//! holds by construction. A Hermitian PSD constraint `M ⪰ 0` is passed to the
//! solver as the real symmetric embedding `[[Re M, -Im M], [Im M, Re M]] ⪰ 0`.

use std::path::Path;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolution, DefaultSolver, IPSolver,
    SolverStatus, SupportedConeT,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub const DEFAULT_TOL: f64 = 1e-7;

/// Real affine function `constant + Σ coeffs[k]·x_k`; missing trailing
/// coefficients are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinExpr {
    pub constant: f64,
    pub coeffs: Vec<f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            coeffs: Vec::new(),
        }
    }

    pub fn var(index: usize) -> Self {
        let mut coeffs = vec![0.0; index + 1];
        coeffs[index] = 1.0;
        Self {
            constant: 0.0,
            coeffs,
        }
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &LinExpr) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self {
            constant: self.constant + s * other.constant,
            coeffs: (0..n).map(|k| self.coeff(k) + s * other.coeff(k)).collect(),
        }
    }

    pub fn add(&self, other: &LinExpr) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &LinExpr) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn plus_constant(&self, c: f64) -> Self {
        Self {
            constant: self.constant + c,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Complex affine function of the (real) program variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CExpr {
    pub fn constant(c: C64) -> Self {
        Self {
            re: LinExpr::constant(c.re),
            im: LinExpr::constant(c.im),
        }
    }

    pub fn real(re: LinExpr) -> Self {
        Self {
            re,
            im: LinExpr::default(),
        }
    }

    pub fn add(&self, other: &CExpr) -> Self {
        Self {
            re: self.re.add(&other.re),
            im: self.im.add(&other.im),
        }
    }

    pub fn sub(&self, other: &CExpr) -> Self {
        Self {
            re: self.re.sub(&other.re),
            im: self.im.sub(&other.im),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            re: self.re.scale(s.re).axpy(-s.im, &self.im),
            im: self.im.scale(s.re).axpy(s.im, &self.re),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: C64, other: &CExpr) -> Self {
        self.add(&other.scale(s))
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.scale(-1.0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Square Hermitian matrix of affine expressions, stored in full.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermitianExpr {
    dim: usize,
    entries: Vec<CExpr>,
}

impl HermitianExpr {
    /// Builds from the upper triangle `i ≤ j`; the diagonal keeps its real
    /// part and the lower triangle is the conjugate mirror.
    pub fn from_upper<F: FnMut(usize, usize) -> CExpr>(dim: usize, mut f: F) -> Self {
        let mut entries = vec![CExpr::default(); dim * dim];
        for j in 0..dim {
            for i in 0..=j {
                let e = f(i, j);
                if i == j {
                    entries[i * dim + i] = CExpr::real(e.re);
                } else {
                    entries[j * dim + i] = e.conj();
                    entries[i * dim + j] = e;
                }
            }
        }
        Self { dim, entries }
    }

    /// Constant Hermitian matrix; only the Hermitian part of `m` is kept.
    pub fn constant(m: &CMatrix) -> Self {
        Self::from_upper(m.nrows(), |i, j| {
            CExpr::constant(0.5 * (m[(i, j)] + m[(j, i)].conj()))
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `self - m` for a constant Hermitian `m`.
    pub fn sub_constant(&self, m: &CMatrix) -> Self {
        Self::from_upper(self.dim, |i, j| {
            self.entry(i, j).sub(&CExpr::constant(m[(i, j)]))
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> &CExpr {
        &self.entries[i * self.dim + j]
    }

    pub fn eval(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval(x))
    }
}

/// Handle to a Hermitian matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HermitianVar {
    offset: usize,
    dim: usize,
}

impl HermitianVar {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        // position of (i, j), i < j, among strict-upper entries in row-major order
        let n = self.dim;
        i * (2 * n - i - 1) / 2 + (j - i - 1)
    }

    fn n_params(dim: usize) -> usize {
        dim * dim
    }

    /// Affine expression for entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> CExpr {
        let n = self.dim;
        if i == j {
            return CExpr::real(LinExpr::var(self.offset + i));
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = self.upper_index(a, b);
        let n_upper = n * (n - 1) / 2;
        CExpr {
            re: LinExpr::var(self.offset + n + k),
            im: LinExpr::var(self.offset + n + n_upper + k).scale(sign),
        }
    }

    pub fn expr(&self) -> HermitianExpr {
        HermitianExpr::from_upper(self.dim, |i, j| self.entry(i, j))
    }

    pub fn trace(&self) -> LinExpr {
        (0..self.dim).fold(LinExpr::default(), |acc, i| {
            acc.add(&LinExpr::var(self.offset + i))
        })
    }
}

/// Handle to a real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScalarVar {
    index: usize,
}

impl ScalarVar {
    pub fn expr(&self) -> LinExpr {
        LinExpr::var(self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum VarKind {
    Hermitian(HermitianVar),
    Scalar(ScalarVar),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Constraint {
    /// `expr ≥ 0`.
    Nonneg { name: String, expr: LinExpr },
    /// `expr = 0`.
    Zero { name: String, expr: LinExpr },
    /// `‖tail‖₂ ≤ head`.
    SecondOrder {
        name: String,
        head: LinExpr,
        tail: Vec<LinExpr>,
    },
    /// `matrix ⪰ 0`.
    HermitianPsd { name: String, matrix: HermitianExpr },
}

/// Minimize a linear objective subject to conic constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConicProgram {
    n_vars: usize,
    blocks: Vec<VarBlock>,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn add_hermitian(&mut self, name: &str, dim: usize) -> HermitianVar {
        let v = HermitianVar {
            offset: self.n_vars,
            dim,
        };
        self.n_vars += HermitianVar::n_params(dim);
        self.blocks.push(VarBlock {
            name: name.into(),
            kind: VarKind::Hermitian(v),
        });
        v
    }

    pub fn add_scalar(&mut self, name: &str) -> ScalarVar {
        let v = ScalarVar { index: self.n_vars };
        self.n_vars += 1;
        self.blocks.push(VarBlock {
            name: name.into(),
            kind: VarKind::Scalar(v),
        });
        v
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn nonneg(&mut self, name: &str, expr: LinExpr) {
        self.constraints.push(Constraint::Nonneg {
            name: name.into(),
            expr,
        });
    }

    pub fn zero(&mut self, name: &str, expr: LinExpr) {
        self.constraints.push(Constraint::Zero {
            name: name.into(),
            expr,
        });
    }

    pub fn second_order(&mut self, name: &str, head: LinExpr, tail: Vec<LinExpr>) {
        self.constraints.push(Constraint::SecondOrder {
            name: name.into(),
            head,
            tail,
        });
    }

    pub fn hermitian_psd(&mut self, name: &str, matrix: HermitianExpr) {
        self.constraints.push(Constraint::HermitianPsd {
            name: name.into(),
            matrix,
        });
    }

    /// Self-describing JSON rendering of the program.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let exprs = self.constraints.iter().flat_map(|c| -> Vec<&LinExpr> {
            match c {
                Constraint::Nonneg { expr, .. } | Constraint::Zero { expr, .. } => vec![expr],
                Constraint::SecondOrder { head, tail, .. } => {
                    std::iter::once(head).chain(tail.iter()).collect()
                }
                Constraint::HermitianPsd { matrix, .. } => {
                    matrix.entries.iter().flat_map(|e| [&e.re, &e.im]).collect()
                }
            }
        });
        for e in exprs.chain(std::iter::once(&self.objective)) {
            if e.coeffs.len() > self.n_vars {
                return Err(Error::DimensionMismatch {
                    expected: self.n_vars,
                    got: e.coeffs.len(),
                });
            }
            if !e.constant.is_finite() || e.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Solver("non-finite program data".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// Raw solver status, for diagnostics.
    pub solver_status: String,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }

    pub fn hermitian(&self, v: &HermitianVar) -> CMatrix {
        v.expr().eval(&self.x)
    }

    pub fn scalar(&self, v: &ScalarVar) -> f64 {
        self.x[v.index]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }
}

/// Rows of the solver's `Ax + s = b` form: each row is an expression that
/// must lie in the cone.
struct Rows {
    exprs: Vec<LinExpr>,
    cones: Vec<SupportedConeT<f64>>,
}

fn psd_embedding_rows(m: &HermitianExpr, rows: &mut Vec<LinExpr>) {
    let n = m.dim();
    let sqrt2 = std::f64::consts::SQRT_2;
    let embedded = |r: usize, c: usize| -> LinExpr {
        let (ri, rb) = (r % n, r / n);
        let (ci, cb) = (c % n, c / n);
        let e = m.entry(ri, ci);
        match (rb, cb) {
            (0, 0) | (1, 1) => e.re.clone(),
            (0, 1) => e.im.scale(-1.0),
            _ => e.im.clone(),
        }
    };
    // upper triangle, column by column, off-diagonals scaled by √2
    for c in 0..2 * n {
        for r in 0..=c {
            let e = embedded(r, c);
            rows.push(if r == c { e } else { e.scale(sqrt2) });
        }
    }
}

fn assemble(p: &ConicProgram) -> Rows {
    let mut exprs = Vec::new();
    let mut cones = Vec::new();
    for c in &p.constraints {
        match c {
            Constraint::Nonneg { expr, .. } => {
                exprs.push(expr.clone());
                cones.push(SupportedConeT::NonnegativeConeT(1));
            }
            Constraint::Zero { expr, .. } => {
                exprs.push(expr.clone());
                cones.push(SupportedConeT::ZeroConeT(1));
            }
            Constraint::SecondOrder { head, tail, .. } => {
                exprs.push(head.clone());
                exprs.extend(tail.iter().cloned());
                cones.push(SupportedConeT::SecondOrderConeT(1 + tail.len()));
            }
            Constraint::HermitianPsd { matrix, .. } => {
                psd_embedding_rows(matrix, &mut exprs);
                cones.push(SupportedConeT::PSDTriangleConeT(2 * matrix.dim()));
            }
        }
    }
    Rows { exprs, cones }
}

/// Solver stopping criteria sit two decades below the accuracy promised to
/// callers: Clarabel's gap and feasibility tests are relative, and the
/// returned point can miss by roughly the tolerance times the data scale.
/// When that tighter target stalls, the solve is repeated at `tol` itself.
fn settings(tol: f64) -> DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .max_iter(200)
        .max_threads(1)
        .build()
        .expect("valid solver settings")
}

/// Solve `p` to feasibility/optimality tolerance `tol`.
pub fn solve(p: &ConicProgram, tol: f64) -> Result<ConicSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    p.check()?;
    let n = p.n_vars;
    let rows = assemble(p);
    let m = rows.exprs.len();

    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::with_capacity(m);
    for (r, e) in rows.exprs.iter().enumerate() {
        // expr = b0 + G x ∈ K  ⇔  s = b - A x with A = -G, b = b0
        b.push(e.constant);
        for (k, &c) in e.coeffs.iter().enumerate() {
            if c != 0.0 {
                ii.push(r);
                jj.push(k);
                vv.push(-c);
            }
        }
    }
    let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
    let q: Vec<f64> = (0..n).map(|k| p.objective.coeff(k)).collect();
    let pmat = CscMatrix::zeros((n, n));

    let run = |inner_tol: f64| -> Result<DefaultSolution<f64>> {
        let mut solver = DefaultSolver::new(&pmat, &q, &a, &b, &rows.cones, settings(inner_tol))
            .map_err(|e| Error::Solver(e.to_string()))?;
        solver.solve();
        Ok(solver.solution)
    };
    let mut sol = run(1e-2 * tol)?;
    if !matches!(
        sol.status,
        SolverStatus::Solved | SolverStatus::PrimalInfeasible
    ) {
        let retry = run(tol)?;
        if retry.status == SolverStatus::Solved || sol.status != SolverStatus::AlmostSolved {
            sol = retry;
        }
    }

    let status = match sol.status {
        SolverStatus::Solved => ConicStatus::Optimal,
        SolverStatus::AlmostSolved if sol.r_prim <= tol && sol.r_dual <= tol => {
            ConicStatus::Optimal
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            ConicStatus::Infeasible
        }
        _ => ConicStatus::NumericalFailure,
    };
    if status == ConicStatus::NumericalFailure {
        log::debug!("conic solve ended with {:?}", sol.status);
    }
    Ok(ConicSolution {
        status,
        solver_status: format!("{:?}", sol.status),
        x: sol.x.clone(),
        objective_value: sol.obj_val + p.objective.constant,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_part, lambda_max};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        hermitian_part(&m)
    }

    #[test]
    fn hermitian_variable_layout_is_bijective() {
        let mut p = ConicProgram::new();
        let w = p.add_hermitian("W", 4);
        assert_eq!(p.n_vars(), 16);
        let mut seen = vec![0; 16];
        for i in 0..4 {
            for j in 0..4 {
                let e = w.entry(i, j);
                for (k, count) in seen.iter_mut().enumerate() {
                    if i <= j && (e.re.coeff(k) != 0.0 || e.im.coeff(k) != 0.0) {
                        *count += 1;
                    }
                }
                assert_eq!(e, w.entry(j, i).conj());
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "{seen:?}");
    }

    #[test]
    fn minimal_trace_with_unit_lower_bound() {
        let mut p = ConicProgram::new();
        let w = p.add_hermitian("W", 3);
        p.minimize(w.trace());
        p.hermitian_psd("W psd", w.expr());
        p.nonneg("trace at least one", w.trace().plus_constant(-1.0));
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective_value - 1.0).abs() < 1e-7);
        let wv = s.hermitian(&w);
        assert!((&wv - wv.adjoint()).norm() < 1e-10);
    }

    #[test]
    fn second_order_cone_gives_the_norm() {
        let mut p = ConicProgram::new();
        let alpha = p.add_scalar("alpha");
        let x = p.add_scalar("x");
        let y = p.add_scalar("y");
        p.minimize(alpha.expr());
        p.zero("x fixed", x.expr().plus_constant(-3.0));
        p.zero("y fixed", y.expr().plus_constant(-4.0));
        p.second_order("norm", alpha.expr(), vec![x.expr(), y.expr()]);
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert!((s.scalar(&alpha) - 5.0).abs() < 1e-7, "{s:?}");
    }

    #[test]
    fn smallest_dominating_multiple_of_identity_is_lambda_max() {
        for seed in 0..10 {
            let lam = random_hermitian(8, seed);
            let mut p = ConicProgram::new();
            let beta = p.add_scalar("beta");
            p.minimize(beta.expr());
            let m = HermitianExpr::from_upper(8, |i, j| {
                let c = CExpr::constant(-lam[(i, j)]);
                if i == j {
                    c.add(&CExpr::real(beta.expr()))
                } else {
                    c
                }
            });
            p.hermitian_psd("beta I - L", m);
            let s = solve(&p, DEFAULT_TOL).unwrap();
            assert!(s.is_optimal());
            let oracle = lambda_max(&lam);
            assert!(
                (s.scalar(&beta) - oracle).abs() < 1e-7,
                "{} vs {oracle}",
                s.scalar(&beta)
            );
        }
    }

    #[test]
    fn complex_coupling_is_respected() {
        // max Re(c̄ W₀₁) s.t. W ⪰ 0, W₀₀ = W₁₁ = 1: optimum |c| at W₀₁ = c/|c|
        let c = C64::new(0.6, -0.8);
        let mut p = ConicProgram::new();
        let w = p.add_hermitian("W", 2);
        p.minimize(w.entry(0, 1).scale(-c.conj()).re);
        p.zero("w00", w.entry(0, 0).re.plus_constant(-1.0));
        p.zero("w11", w.entry(1, 1).re.plus_constant(-1.0));
        p.hermitian_psd("W psd", w.expr());
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        let wv = s.hermitian(&w);
        assert!((wv[(0, 1)] - c).norm() < 1e-6, "{}", wv[(0, 1)]);
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut p = ConicProgram::new();
        let w = p.add_hermitian("W", 2);
        p.minimize(w.trace());
        p.hermitian_psd("W psd", w.expr());
        p.nonneg("negative trace", w.trace().scale(-1.0).plus_constant(-1.0));
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, ConicStatus::Infeasible);
    }

    #[test]
    fn solves_are_deterministic_and_dump_parses() {
        let lam = random_hermitian(4, 99);
        let build = || {
            let mut p = ConicProgram::new();
            let w = p.add_hermitian("W", 4);
            p.minimize(w.trace());
            p.hermitian_psd("W - L psd", w.expr().sub_constant(&lam));
            p
        };
        let a = solve(&build(), DEFAULT_TOL).unwrap();
        let b = solve(&build(), DEFAULT_TOL).unwrap();
        assert_eq!(a.status, b.status);
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
        let json: serde_json::Value = serde_json::from_str(&build().to_json().unwrap()).unwrap();
        assert_eq!(json["n_vars"], 16);
    }
}

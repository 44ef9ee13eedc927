//! Discrete gradient flows in the mesh-dependent `H^2_h` metric.
//!
//! Every step solves a linear system with the matrix
//! `A = G / tau + w Q + K(x)`, where `G` is the Gram matrix of the flow metric,
//! `Q` the matrix of `E_h^B + S_h`, `w` the weight of the quadratic part and
//! `K(x)` the linearized stretching form at the base point `x`. The three
//! components share `A`. Constrained steps restrict the increment to the
//! per-cell tangent space of the metric constraint by eliminating the three
//! constraint rows of each cell with a local orthonormal null-space basis; the
//! reduced system stays symmetric positive definite and keeps the cell-block
//! pattern of `A`.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::dgspace::VectorField;
use crate::discretization::Discretization;
use crate::energy::{
    broken_hessian_matrix, dot, jump_matrix, mass_matrix, EnergyBreakdown, MaterialParams, MetricField, PenaltyParams,
    PlateEnergy, QuadraticForm,
};
use crate::error::{Error, Result};
use crate::hessian::BoundarySample;
use crate::linalg::SymmetricSolver;
use crate::mesh::Vec2;
use crate::registry::Registry;
use crate::sparse::{BlockAssembler, BlockMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintMode {
    None,
    Aver,
    Bary,
}

impl ConstraintMode {
    pub fn parse(s: &str) -> Result<ConstraintMode> {
        match s {
            "none" => Ok(ConstraintMode::None),
            "aver" => Ok(ConstraintMode::Aver),
            "bary" => Ok(ConstraintMode::Bary),
            _ => Err(Error::InvalidParameter(format!("unknown constraint mode '{s}' (expected none, aver or bary)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintMode::None => "none",
            ConstraintMode::Aver => "aver",
            ConstraintMode::Bary => "bary",
        }
    }

    /// Name of the registered scheme implementing this mode.
    pub fn scheme_name(&self) -> &'static str {
        match self {
            ConstraintMode::None => "linearized",
            ConstraintMode::Aver => "tangent-aver",
            ConstraintMode::Bary => "tangent-bary",
        }
    }
}

/// Which metric defect a flow reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectKind {
    Aver,
    Bary,
}

/// The energy a flow decreases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// `E_h^S + s^2 (E_h^B + S_h - F)`.
    Preasymptotic { s2: f64 },
    /// `E_h^B + S_h - F`.
    Prestrain,
    /// `E_h^B + S_h - F - N_h`, plus `(alpha/2) int |Z|^2` when `constant_term` is set.
    Bilayer { constant_term: bool },
    /// `1/2 int |grad y^T grad y - g|^2`.
    SimplifiedStretching,
}

impl Objective {
    pub fn default_defect(&self) -> DefectKind {
        match self {
            Objective::Bilayer { .. } => DefectKind::Bary,
            _ => DefectKind::Aver,
        }
    }

    /// Weight of `E_h^B + S_h - F` in the objective.
    pub fn quadratic_weight(&self) -> f64 {
        match self {
            Objective::Preasymptotic { s2 } => *s2,
            Objective::Prestrain | Objective::Bilayer { .. } => 1.0,
            Objective::SimplifiedStretching => 0.0,
        }
    }
}

/// `sigma = 0` when Dirichlet or mixed conditions are present, `1` otherwise.
pub fn gram_sigma(disc: &Discretization) -> f64 {
    if disc.active.has_essential_bc() {
        0.0
    } else {
        1.0
    }
}

/// Gram matrix of `(v, w)_{H^2_h}`, shared by the three components.
pub fn gram_matrix(disc: &Discretization) -> BlockMatrix {
    let seminorm = broken_hessian_matrix(disc).combine(1.0, &jump_matrix(disc, 1.0, 1.0, 1.0), 1.0);
    let sigma = gram_sigma(disc);
    if sigma == 0.0 {
        seminorm
    } else {
        seminorm.combine(1.0, &mass_matrix(disc), sigma)
    }
}

/// `(v, v)_{H^2_h}` summed over components.
pub fn gram_norm_squared(gram: &BlockMatrix, v: &VectorField) -> f64 {
    (0..3).map(|m| gram.quad_form(v.component(m))).sum()
}

/// An energy with its assembled quadratic part and the flow metric.
pub struct FlowProblem {
    pub energy: PlateEnergy,
    pub objective: Objective,
    pub defect_kind: DefectKind,
    pub gram: BlockMatrix,
    pub bending: QuadraticForm,
    pub stabilization: QuadraticForm,
    /// `Q` of `E_h^B + S_h - F`.
    quad_matrix: BlockMatrix,
    /// `b + f` of `E_h^B + S_h - F`.
    quad_rhs: [Vec<f64>; 3],
}

impl FlowProblem {
    pub fn new(energy: PlateEnergy, objective: Objective) -> FlowProblem {
        let gram = gram_matrix(&energy.disc);
        FlowProblem::with_gram(energy, objective, gram)
    }

    /// Reuses an already assembled Gram matrix of the same discretization.
    pub fn with_gram(energy: PlateEnergy, objective: Objective, gram: BlockMatrix) -> FlowProblem {
        let bending = energy.bending_form();
        let stabilization = energy.stabilization_form();
        let quad_matrix = bending.matrix.combine(1.0, &stabilization.matrix, 1.0);
        let quad_rhs = [0, 1, 2].map(|m| {
            (0..bending.rhs[m].len()).map(|i| bending.rhs[m][i] + stabilization.rhs[m][i] + energy.force[m][i]).collect()
        });
        FlowProblem {
            defect_kind: objective.default_defect(),
            energy,
            objective,
            gram,
            bending,
            stabilization,
            quad_matrix,
            quad_rhs,
        }
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.energy.disc
    }

    pub fn n_dofs(&self) -> usize {
        self.energy.disc.n_dofs()
    }

    pub fn defect(&self, y: &VectorField) -> f64 {
        match self.defect_kind {
            DefectKind::Aver => self.energy.defect_aver(y),
            DefectKind::Bary => self.energy.defect_bary(y),
        }
    }

    /// All energy terms of `y` and the objective value.
    pub fn breakdown(&self, y: &VectorField) -> EnergyBreakdown {
        let e = &self.energy;
        let mut b = EnergyBreakdown { defect: self.defect(y), ..Default::default() };
        match self.objective {
            Objective::SimplifiedStretching => {
                b.stretching = e.simplified_stretching(y);
                b.total = b.stretching;
                return b;
            }
            Objective::Preasymptotic { .. } => b.stretching = e.stretching_energy(y),
            Objective::Bilayer { .. } => b.cubic = e.cubic_term(y),
            Objective::Prestrain => {}
        }
        b.bending = self.bending.eval(y);
        b.stabilization = self.stabilization.eval(y);
        b.forcing = e.forcing(y);
        let quad = b.bending + b.stabilization - b.forcing;
        b.total = match self.objective {
            Objective::Preasymptotic { s2 } => b.stretching + s2 * quad,
            Objective::Bilayer { constant_term } => quad - b.cubic + if constant_term { e.curvature_constant() } else { 0.0 },
            _ => quad,
        };
        b
    }

    pub fn total(&self, y: &VectorField) -> f64 {
        self.breakdown(y).total
    }

    /// Linearized stretching matrix at `x`, if the objective has one.
    fn linearized_matrix(&self, x: &VectorField) -> Option<BlockMatrix> {
        match self.objective {
            Objective::Preasymptotic { .. } => Some(self.energy.stretching_matrix(x)),
            Objective::SimplifiedStretching => Some(self.energy.simplified_stretching_matrix(x)),
            _ => None,
        }
    }

    /// The part of the gradient treated explicitly (the cubic bilayer term enters with a minus sign).
    fn explicit_force(&self, x: &VectorField) -> Option<VectorField> {
        match self.objective {
            Objective::Bilayer { .. } => Some(self.energy.cubic_gradient(x)),
            _ => None,
        }
    }

    /// `G / tau + w Q`.
    fn base_matrix(&self, tau: f64) -> BlockMatrix {
        let w = self.objective.quadratic_weight();
        self.gram.combine(1.0 / tau, &self.quad_matrix, w)
    }

    /// `A(x) = G / tau + w Q + K(x)` from the cached base.
    fn step_matrix(&self, base: &BlockMatrix, x: &VectorField) -> BlockMatrix {
        let mut a = base.clone();
        if let Some(k) = self.linearized_matrix(x) {
            a.add_assign_scaled(1.0, &k);
        }
        a
    }

    /// `G x / tau + w (b + f) + N'(x)`.
    fn step_rhs(&self, tau: f64, x: &VectorField) -> [Vec<f64>; 3] {
        let w = self.objective.quadratic_weight();
        let explicit = self.explicit_force(x);
        [0, 1, 2].map(|m| {
            let mut r = self.gram.mul_vec(x.component(m));
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = *ri / tau + w * self.quad_rhs[m][i];
            }
            if let Some(n) = &explicit {
                for (ri, ni) in r.iter_mut().zip(n.component(m)) {
                    *ri += ni;
                }
            }
            r
        })
    }
}

/// Symmetric per-cell multipliers, stored as `(11, 12, 22)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierField {
    pub values: Vec<[f64; 3]>,
}

impl MultiplierField {
    pub fn matrix(&self, c: usize) -> nalgebra::Matrix2<f64> {
        let [a, b, d] = self.values[c];
        nalgebra::Matrix2::new(a, b, b, d)
    }
}

pub struct StepOutcome {
    pub y: VectorField,
    pub multipliers: Option<MultiplierField>,
    /// Largest per-cell Frobenius norm of the linearized constraint applied to the increment.
    pub constraint_residual: Option<f64>,
}

/// One step of a discrete gradient flow.
pub trait FlowScheme {
    fn name(&self) -> &'static str;
    fn constraint(&self) -> ConstraintMode;
    /// Computes the next iterate from the base point `x` (`y^n`, or `v^n` when accelerated).
    fn step(&mut self, problem: &FlowProblem, tau: f64, x: &VectorField) -> Result<StepOutcome>;
}

/// Cached `G / tau + w Q` for the current `tau`.
#[derive(Default)]
struct BaseCache {
    tau: f64,
    matrix: Option<BlockMatrix>,
}

impl BaseCache {
    fn get(&mut self, problem: &FlowProblem, tau: f64) -> &BlockMatrix {
        if self.matrix.is_none() || self.tau != tau {
            self.matrix = Some(problem.base_matrix(tau));
            self.tau = tau;
        }
        self.matrix.as_ref().unwrap()
    }
}

/// Unconstrained linearized step.
///
/// The step matrix differs between iterates only by the block-diagonal
/// linearized stretching matrix, so one factorization is reused across steps
/// and refreshed when the correction sweeps stop contracting fast enough.
#[derive(Default)]
pub struct LinearizedScheme {
    base: BaseCache,
    solver: SymmetricSolver,
    factored_tau: Option<f64>,
    k_ref: Option<BlockMatrix>,
    /// Increment of the previous step, used as the initial guess.
    last_step: Option<Vec<Vec<f64>>>,
}

impl FlowScheme for LinearizedScheme {
    fn name(&self) -> &'static str {
        "linearized"
    }

    fn constraint(&self) -> ConstraintMode {
        ConstraintMode::None
    }

    fn step(&mut self, problem: &FlowProblem, tau: f64, x: &VectorField) -> Result<StepOutcome> {
        let rhs = problem.step_rhs(tau, x);
        let k = problem.linearized_matrix(x);
        let fresh = self.factored_tau != Some(tau) || (k.is_some() != self.k_ref.is_some());
        if !fresh {
            if let (Some(k), Some(k_ref)) = (&k, &self.k_ref) {
                let (k, k_ref) = (k.clone(), k_ref.clone());
                if let Some(y) = self.correct(&k, &k_ref, &rhs, x)? {
                    return Ok(self.finish(x, y));
                }
            } else {
                let y = self.solver.solve(&rhs)?;
                return Ok(self.finish(x, y));
            }
        }
        let mut a = self.base.get(problem, tau).clone();
        if let Some(k) = &k {
            a.add_assign_scaled(1.0, k);
        }
        self.solver.factor(&a)?;
        self.factored_tau = Some(tau);
        self.k_ref = k;
        let y = self.solver.solve(&rhs)?;
        Ok(self.finish(x, y))
    }
}

impl LinearizedScheme {
    fn finish(&mut self, x: &VectorField, y: Vec<Vec<f64>>) -> StepOutcome {
        self.last_step = Some((0..3).map(|m| y[m].iter().zip(x.component(m)).map(|(a, b)| a - b).collect()).collect());
        let [y0, y1, y2]: [Vec<f64>; 3] = y.try_into().unwrap();
        StepOutcome { y: VectorField::from_components([y0, y1, y2]), multipliers: None, constraint_residual: None }
    }

    /// Solves `(M + K - K_ref) y = rhs` with the factorization of `M` by the
    /// iteration `y <- M^{-1} (rhs - (K - K_ref) y)`. Returns `None` when it
    /// does not reach round-off within a few sweeps, so the caller refactors.
    fn correct(
        &mut self,
        k: &BlockMatrix,
        k_ref: &BlockMatrix,
        rhs: &[Vec<f64>; 3],
        x: &VectorField,
    ) -> Result<Option<Vec<Vec<f64>>>> {
        const SWEEPS: usize = 6;
        let mut y: Vec<Vec<f64>> = (0..3)
            .map(|m| match &self.last_step {
                Some(d) => x.component(m).iter().zip(&d[m]).map(|(a, b)| a + b).collect(),
                None => x.component(m).to_vec(),
            })
            .collect();
        let scale = y.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut prev = f64::INFINITY;
        for _ in 0..SWEEPS {
            let b: Vec<Vec<f64>> = (0..3)
                .map(|m| {
                    let kv = k.mul_vec(&y[m]);
                    let kr = k_ref.mul_vec(&y[m]);
                    rhs[m].iter().zip(kv.iter().zip(&kr)).map(|(r, (a, b))| r - a + b).collect()
                })
                .collect();
            let next = self.solver.solve(&b)?;
            let change = next.iter().flatten().zip(y.iter().flatten()).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            y = next;
            // remaining error is about rate / (1 - rate) times the last change
            let rate = change / prev;
            if change <= 1e-14 * scale || (prev.is_finite() && rate < 0.1 && change * rate <= 1e-14 * scale) {
                return Ok(Some(y));
            }
            prev = change;
        }
        Ok(None)
    }
}

/// Per-cell linearized constraint rows `(11, 12, 22)` at `y`, columns `m nb + a`.
pub fn constraint_rows(disc: &Discretization, mode: ConstraintMode, y: &VectorField, c: usize) -> DMatrix<f64> {
    let space = &disc.space;
    let nb = space.nb;
    let mut b = DMatrix::zeros(3, 3 * nb);
    let mut add = |w: f64, grads: &[Vec2], f: &nalgebra::Matrix3x2<f64>| {
        for m in 0..3 {
            let dy = Vec2::new(f[(m, 0)], f[(m, 1)]);
            for (a, g) in grads.iter().enumerate() {
                let col = m * nb + a;
                b[(0, col)] += w * 2.0 * g.x * dy.x;
                b[(1, col)] += w * (g.x * dy.y + dy.x * g.y);
                b[(2, col)] += w * 2.0 * g.y * dy.y;
            }
        }
    };
    match mode {
        ConstraintMode::Aver => {
            let cq = &space.cells[c];
            for q in 0..space.n_quad() {
                let f = space.deformation_gradient(y, c, q);
                add(cq.w[q], &cq.grad[q * nb..(q + 1) * nb], &f);
            }
        }
        ConstraintMode::Bary => {
            let f = space.deformation_gradient_at_point(y, c, [0.5, 0.5]);
            add(1.0, &space.eval_cell(c, [0.5, 0.5]).grad, &f);
        }
        ConstraintMode::None => {}
    }
    b
}

/// Frobenius norm of the symmetric matrix stored as `(11, 12, 22)`.
fn sym_norm(r: &[f64]) -> f64 {
    (r[0] * r[0] + 2.0 * r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Orthonormal basis of the null space of a `3 x n` matrix whose rows should
/// have size comparable to `reference`.
fn null_space(b: &DMatrix<f64>, reference: f64, cell: usize) -> Result<DMatrix<f64>> {
    let n = b.ncols();
    let mut aug = DMatrix::zeros(n, n + 3);
    aug.view_mut((0, 0), (n, 3)).copy_from(&b.transpose());
    aug.view_mut((0, 3), (n, n)).fill_with_identity();
    let qr = aug.qr();
    let r = qr.r();
    for i in 0..3 {
        if !(r[(i, i)].abs() > 1e-8 * reference) {
            return Err(Error::RankDeficientConstraint { cell });
        }
    }
    Ok(qr.q().columns(3, n - 3).into_owned())
}

/// Step restricted to the per-cell tangent space of the metric constraint.
pub struct TangentScheme {
    mode: ConstraintMode,
    base: BaseCache,
    solver: SymmetricSolver,
}

impl TangentScheme {
    pub fn new(mode: ConstraintMode) -> TangentScheme {
        assert!(mode != ConstraintMode::None);
        TangentScheme { mode, base: BaseCache::default(), solver: SymmetricSolver::new() }
    }
}

impl FlowScheme for TangentScheme {
    fn name(&self) -> &'static str {
        self.mode.scheme_name()
    }

    fn constraint(&self) -> ConstraintMode {
        self.mode
    }

    fn step(&mut self, problem: &FlowProblem, tau: f64, x: &VectorField) -> Result<StepOutcome> {
        let disc = problem.disc().clone();
        let nb = disc.space.nb;
        let n = problem.n_dofs();
        let n_cells = disc.space.n_cells;
        let base = self.base.get(problem, tau);
        let a = problem.step_matrix(base, x);
        let rhs = problem.step_rhs(tau, x);
        // residual of the full equation at the base point: r = rhs - A x
        let r: [Vec<f64>; 3] = [0, 1, 2].map(|m| {
            let ax = a.mul_vec(x.component(m));
            rhs[m].iter().zip(&ax).map(|(u, v)| u - v).collect()
        });
        let loc = |v: &[Vec<f64>; 3], c: usize| -> DVector<f64> {
            DVector::from_iterator(3 * nb, (0..3).flat_map(|m| v[m][c * nb..(c + 1) * nb].iter().copied()))
        };
        let mut rows = Vec::with_capacity(n_cells);
        let mut z = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let b = constraint_rows(&disc, self.mode, x, c);
            // row size for a unit deformation gradient
            let mesh = disc.mesh();
            let area = if self.mode == ConstraintMode::Aver { mesh.cell_area(c) } else { 1.0 };
            z.push(null_space(&b, area / mesh.cell_diameter(c), c)?);
            rows.push(b);
        }
        let nr = 3 * nb - 3;
        let mut asm = BlockAssembler::new(n_cells, nr);
        for i in 0..n_cells {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                let akl = DMatrix::from_row_slice(nb, nb, a.block(k));
                let mut red = DMatrix::<f64>::zeros(nr, nr);
                for m in 0..3 {
                    let zi = z[i].rows(m * nb, nb);
                    let zj = z[j].rows(m * nb, nb);
                    red += zi.transpose() * (&akl * zj);
                }
                let blk = asm.block_mut(i, j);
                for p in 0..nr {
                    for q in 0..nr {
                        blk[p * nr + q] += red[(p, q)];
                    }
                }
            }
        }
        let reduced = asm.finish();
        let mut g = vec![0.0; n_cells * nr];
        for c in 0..n_cells {
            let gc = z[c].transpose() * loc(&r, c);
            g[c * nr..(c + 1) * nr].copy_from_slice(gc.as_slice());
        }
        self.solver.factor(&reduced)?;
        let u = self.solver.solve(&[g])?.remove(0);
        let mut delta = VectorField::zeros(n);
        let mut residual: f64 = 0.0;
        for c in 0..n_cells {
            let dc = &z[c] * DVector::from_column_slice(&u[c * nr..(c + 1) * nr]);
            for m in 0..3 {
                delta.component_mut(m)[c * nb..(c + 1) * nb].copy_from_slice(&dc.as_slice()[m * nb..(m + 1) * nb]);
            }
            residual = residual.max(sym_norm((&rows[c] * &dc).as_slice()));
        }
        let ad: [Vec<f64>; 3] = [0, 1, 2].map(|m| a.mul_vec(delta.component(m)));
        let left: [Vec<f64>; 3] = [0, 1, 2].map(|m| r[m].iter().zip(&ad[m]).map(|(u, v)| u - v).collect());
        let mut values = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let b = &rows[c];
            let bbt = b * b.transpose();
            let lam = bbt.lu().solve(&(b * loc(&left, c))).unwrap_or_else(|| DVector::zeros(3));
            values.push([lam[0], lam[1], lam[2]]);
        }
        Ok(StepOutcome {
            y: x.axpy(1.0, &delta),
            multipliers: Some(MultiplierField { values }),
            constraint_residual: Some(residual),
        })
    }
}

pub type SchemeFactory = fn() -> Box<dyn FlowScheme>;

/// Registered flow schemes.
pub fn scheme_registry() -> Registry<SchemeFactory> {
    let mut r: Registry<SchemeFactory> = Registry::new("flow scheme");
    r.register("linearized", "unconstrained step, stretching linearized at the base point", || {
        Box::new(LinearizedScheme::default())
    });
    r.register("tangent-aver", "increments in the cell-averaged tangent space", || {
        Box::new(TangentScheme::new(ConstraintMode::Aver))
    });
    r.register("tangent-bary", "increments in the barycentric tangent space", || {
        Box::new(TangentScheme::new(ConstraintMode::Bary))
    });
    r
}

pub fn scheme_for(mode: ConstraintMode) -> Box<dyn FlowScheme> {
    (scheme_registry().get(mode.scheme_name()).unwrap())()
}

/// Extrapolation weights `t_1 = 1`, `t_{n+1} = sqrt(t_n^2 + 1/4) + 1/2`, `eta_{n+1} = (t_{n+1} - 1) / t_{n+2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccelState {
    /// `t_{n+1}` before step `n`.
    pub t: f64,
}

impl Default for AccelState {
    fn default() -> Self {
        AccelState { t: 1.0 }
    }
}

impl AccelState {
    pub fn next_t(t: f64) -> f64 {
        (t * t + 0.25).sqrt() + 0.5
    }

    /// Advances the sequence and returns `eta_{n+1}`.
    pub fn advance(&mut self) -> f64 {
        let t_next = AccelState::next_t(self.t);
        let eta = (self.t - 1.0) / t_next;
        self.t = t_next;
        eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub accelerate: bool,
    pub constraint: ConstraintMode,
    /// Halve `tau` and retry when an unconstrained step increases the energy.
    pub adaptive_tau: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            tau: 0.01,
            tol: 1e-6,
            max_iter: 100_000,
            accelerate: false,
            constraint: ConstraintMode::None,
            adaptive_tau: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("flow needs tau > 0 and tol > 0 (got {}, {})", self.tau, self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.accelerate && self.constraint != ConstraintMode::None {
            return Err(Error::InvalidParameter("acceleration applies to unconstrained flows only".into()));
        }
        Ok(())
    }
}

/// Metric preprocessing parameters `tau~`, `tol~`, `eps~_0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub tau: f64,
    pub tol: f64,
    pub eps0: f64,
    pub max_iter: usize,
    pub accelerate: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { tau: 0.05, tol: 1e-6, eps0: 0.0, max_iter: 10_000, accelerate: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    DefectTarget,
    MaxIter,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::DefectTarget => "defect_target",
            StopReason::MaxIter => "max_iter",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub energy: EnergyBreakdown,
    pub step_norm: f64,
    pub tau: f64,
    pub wall_ms: f64,
    pub constraint_residual: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLog {
    pub rows: Vec<LogRow>,
}

impl EnergyLog {
    pub const HEADER: &'static str = "iter,E_total,E_S,E_B,S_h,F,N_h,defect,step_norm,tau,wall_ms";

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", EnergyLog::HEADER)?;
        for r in &self.rows {
            let e = &r.energy;
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:.3}",
                r.iter,
                e.total,
                e.stretching,
                e.bending,
                e.stabilization,
                e.forcing,
                e.cubic,
                e.defect,
                r.step_norm,
                r.tau,
                r.wall_ms
            )?;
        }
        Ok(())
    }

    pub fn totals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy.total).collect()
    }
}

pub struct FlowReport {
    pub y: VectorField,
    pub initial: EnergyBreakdown,
    pub last: EnergyBreakdown,
    pub log: EnergyLog,
    pub iterations: usize,
    pub stopped_by: StopReason,
    pub multipliers: Option<MultiplierField>,
    /// Largest defect seen over the run, the implied `epsilon` of the admissible set.
    pub max_defect: f64,
    pub max_constraint_residual: f64,
}

/// Runs a flow from `y0` until `tau^{-1} |E(y^{n+1}) - E(y^n)| <= tol`, the defect
/// target (when given) is reached, or `max_iter` steps were taken.
pub fn run_flow(
    problem: &FlowProblem,
    scheme: &mut dyn FlowScheme,
    config: &FlowConfig,
    y0: VectorField,
    defect_target: Option<f64>,
) -> Result<FlowReport> {
    config.validate()?;
    if scheme.constraint() != config.constraint {
        return Err(Error::InvalidParameter(format!(
            "scheme '{}' does not implement constraint mode '{}'",
            scheme.name(),
            config.constraint.name()
        )));
    }
    let start = Instant::now();
    let initial = problem.breakdown(&y0);
    let mut y = y0;
    let mut v = y.clone();
    let mut current = initial;
    let mut accel = AccelState::default();
    let mut tau = config.tau;
    let mut log = EnergyLog::default();
    let mut multipliers = None;
    let mut max_defect = initial.defect;
    let mut max_residual: f64 = 0.0;
    let mut stopped_by = StopReason::MaxIter;
    for iter in 1..=config.max_iter {
        let base = if config.accelerate { &v } else { &y };
        let mut outcome = scheme.step(problem, tau, base)?;
        let mut next = problem.breakdown(&outcome.y);
        if config.adaptive_tau && config.constraint == ConstraintMode::None {
            let mut halvings = 0;
            while next.total > current.total && halvings < 30 {
                tau *= 0.5;
                halvings += 1;
                outcome = scheme.step(problem, tau, base)?;
                next = problem.breakdown(&outcome.y);
            }
        }
        if !next.total.is_finite() {
            return Err(Error::Solver(format!("energy is not finite at iteration {iter}")));
        }
        let step = outcome.y.sub(&y);
        let step_norm = gram_norm_squared(&problem.gram, &step).max(0.0).sqrt();
        if let Some(r) = outcome.constraint_residual {
            max_residual = max_residual.max(r);
        }
        max_defect = max_defect.max(next.defect);
        log.rows.push(LogRow {
            iter,
            energy: next,
            step_norm,
            tau,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            constraint_residual: outcome.constraint_residual,
        });
        if config.accelerate {
            let eta = accel.advance();
            v = outcome.y.axpy(eta, &step);
        }
        let change = (next.total - current.total).abs() / tau;
        // momentum turning points have a small energy change too, so accelerated runs stop only on a descent
        let settled = change <= config.tol && !(config.accelerate && next.total > current.total);
        y = outcome.y;
        multipliers = outcome.multipliers;
        current = next;
        if settled {
            stopped_by = StopReason::Tolerance;
            break;
        }
        if defect_target.is_some_and(|eps| current.defect <= eps) {
            stopped_by = StopReason::DefectTarget;
            break;
        }
    }
    Ok(FlowReport {
        iterations: log.rows.len(),
        y,
        initial,
        last: current,
        log,
        stopped_by,
        multipliers,
        max_defect,
        max_constraint_residual: max_residual,
    })
}

/// BC preprocessing: minimizes `E_h^B + S_h - F^` with `mu = 6`, `lambda = 0`, `g = I`.
///
/// An `L^2` term is added when no Dirichlet, mixed or pointwise condition pins
/// the affine functions.
pub fn bc_preprocess(
    disc: Arc<Discretization>,
    penalties: PenaltyParams,
    bc: &BoundarySample,
    force: Option<&dyn Fn(Vec2) -> Vector3<f64>>,
) -> Result<VectorField> {
    let metric = MetricField::identity(&disc);
    let material = MaterialParams { mu: 6.0, lambda: 0.0, thickness: 0.0 };
    let mut energy = PlateEnergy::new(disc.clone(), material, penalties, metric);
    energy.set_boundary(bc.clone());
    if let Some(f) = force {
        energy.set_force(f);
    }
    let form = energy.bending_form().add(&energy.stabilization_form());
    let matrix = if disc.has_boundary_conditions() { form.matrix } else { form.matrix.combine(1.0, &mass_matrix(&disc), 1.0) };
    let rhs = [0, 1, 2].map(|m| form.rhs[m].iter().zip(&energy.force[m]).map(|(a, b)| a + b).collect::<Vec<f64>>());
    let mut solver = SymmetricSolver::new();
    solver.factor(&matrix)?;
    let [y0, y1, y2]: [Vec<f64>; 3] = solver.solve(&rhs)?.try_into().unwrap();
    Ok(VectorField::from_components([y0, y1, y2]))
}

/// Incremental BC preprocessing: `y_prev` plus the solution for the data increment `bc - bc_prev`.
pub fn bc_preprocess_increment(
    disc: Arc<Discretization>,
    penalties: PenaltyParams,
    bc: &BoundarySample,
    bc_prev: &BoundarySample,
    y_prev: &VectorField,
) -> Result<VectorField> {
    let delta = bc_preprocess(disc, penalties, &bc.difference(bc_prev), None)?;
    Ok(y_prev.axpy(1.0, &delta))
}

/// Metric preprocessing: a flow on `E_h^str` stopped by `tol~` or the defect target `eps~_0`.
pub fn metric_preprocess(
    disc: Arc<Discretization>,
    metric: MetricField,
    defect_kind: DefectKind,
    config: &PreprocessConfig,
    y0: VectorField,
) -> Result<FlowReport> {
    let mut energy = PlateEnergy::new(disc, MaterialParams::default(), PenaltyParams::default(), metric);
    energy.curvature = None;
    let mut problem = FlowProblem::new(energy, Objective::SimplifiedStretching);
    problem.defect_kind = defect_kind;
    let flow = FlowConfig {
        tau: config.tau,
        tol: config.tol,
        max_iter: config.max_iter,
        accelerate: config.accelerate,
        constraint: ConstraintMode::None,
        adaptive_tau: false,
    };
    let mut scheme = LinearizedScheme::default();
    run_flow(&problem, &mut scheme, &flow, y0, Some(config.eps0))
}

/// `sum_m (A v_m) . w_m` for a matrix shared by the components.
pub fn component_bilinear(a: &BlockMatrix, v: &VectorField, w: &VectorField) -> f64 {
    (0..3).map(|m| dot(&a.mul_vec(v.component(m)), w.component(m))).sum()
}

//! Turns a validated configuration into discretizations, energies and boundary data.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3x2, Vector3};

use platebend::dgspace::VectorField;
use platebend::energy::{CurvatureField, MaterialParams, MetricField, PenaltyParams, PlateEnergy};
use platebend::flow::{FlowProblem, Objective};
use platebend::hessian::BoundarySample;
use platebend::mesh::{EdgeTopology, MeshData, Vec2};
use platebend::Discretization;

use crate::catalog::{self, BoundaryProgram, ForceFn, Immersion, MetricFn};
use crate::config::{BoundaryKind, CurvatureValue, FieldSpec, Model, ProblemConfig};
use crate::expr::{MatExpr, VecExpr};
use crate::{meshes, AppError};

const FD_STEP: f64 = 1e-6;

/// An immersion given by expressions; its gradient is a central difference.
struct ExprImmersion(VecExpr);

impl Immersion for ExprImmersion {
    fn value(&self, x: Vec2, t: f64) -> Vector3<f64> {
        self.0.eval(x, t)
    }

    fn gradient(&self, x: Vec2, t: f64) -> Matrix3x2<f64> {
        let d1 = (self.0.eval(x + Vec2::new(FD_STEP, 0.0), t) - self.0.eval(x - Vec2::new(FD_STEP, 0.0), t)) / (2.0 * FD_STEP);
        let d2 = (self.0.eval(x + Vec2::new(0.0, FD_STEP), t) - self.0.eval(x - Vec2::new(0.0, FD_STEP), t)) / (2.0 * FD_STEP);
        Matrix3x2::from_columns(&[d1, d2])
    }
}

/// Expressions for `phi` with explicit rows of `Phi`.
struct ExprBoundary {
    value: VecExpr,
    gradient: [MatRow; 3],
}

type MatRow = [crate::expr::Expr; 2];

impl Immersion for ExprBoundary {
    fn value(&self, x: Vec2, t: f64) -> Vector3<f64> {
        self.value.eval(x, t)
    }

    fn gradient(&self, x: Vec2, t: f64) -> Matrix3x2<f64> {
        let g = &self.gradient;
        Matrix3x2::new(
            g[0][0].eval(x, t),
            g[0][1].eval(x, t),
            g[1][0].eval(x, t),
            g[1][1].eval(x, t),
            g[2][0].eval(x, t),
            g[2][1].eval(x, t),
        )
    }
}

fn config_err(what: &str) -> impl Fn(String) -> AppError + '_ {
    move |e| AppError::Config(format!("{what}: {e}"))
}

pub fn field_immersion(spec: &FieldSpec, what: &str) -> Result<Box<dyn Immersion>, AppError> {
    match (&spec.builtin, &spec.expr) {
        (Some(name), None) => catalog::immersion(name, &spec.params),
        (None, Some(e)) if spec.params.is_empty() => Ok(Box::new(ExprImmersion(VecExpr::parse(e).map_err(config_err(what))?))),
        _ => Err(AppError::Config(format!("{what}: give either builtin (with params) or expr"))),
    }
}

fn field_force(spec: &FieldSpec) -> Result<ForceFn, AppError> {
    match (&spec.builtin, &spec.expr) {
        (Some(name), None) => catalog::force(name, &spec.params),
        (None, Some(e)) if spec.params.is_empty() => {
            let f = VecExpr::parse(e).map_err(config_err("force"))?;
            Ok(Box::new(move |x, t| f.eval(x, t)))
        }
        _ => Err(AppError::Config("force: give either builtin (with params) or expr".into())),
    }
}

fn curvature_matrix(v: &CurvatureValue) -> Matrix2<f64> {
    match v {
        CurvatureValue::Scalar(s) => Matrix2::identity() * *s,
        CurvatureValue::Matrix(m) => Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
    }
}

/// Pointwise conditions: fixed expressions or a catalog program.
enum Points {
    Exprs(Vec<(Vec2, VecExpr)>),
    Program(Box<dyn BoundaryProgram>),
}

pub struct Setup {
    pub config: ProblemConfig,
    /// Mesh with the edge labels of the boundary kind and no point labels.
    pub mesh: MeshData,
    metric: MetricFn,
    boundary: Box<dyn Immersion>,
    points: Points,
    force: Option<ForceFn>,
    fictitious: Option<VecExpr>,
}

impl Setup {
    pub fn new(config: &ProblemConfig) -> Result<Setup, AppError> {
        let mut mesh = meshes::build(&config.mesh, |p| config.resolve(p))?;
        let b = &config.boundary;
        if b.kind != BoundaryKind::Mesh {
            let topo = EdgeTopology::build(&mesh.mesh)?;
            let all: Vec<[usize; 2]> = topo.edges.iter().filter(|e| e.is_boundary()).map(|e| e.vertices).collect();
            mesh.labels.dirichlet.clear();
            mesh.labels.mixed.clear();
            match b.kind {
                BoundaryKind::Clamped => mesh.labels.dirichlet = all,
                BoundaryKind::Mixed => mesh.labels.mixed = all,
                _ => {}
            }
        }
        mesh.labels.points.clear();

        let m = &config.metric;
        let metric: MetricFn = if let Some(name) = &m.builtin {
            catalog::metric(name, &m.params)?
        } else if let Some(rows) = &m.components {
            if !m.params.is_empty() {
                return Err(AppError::Config("metric: params apply to builtin metrics only".into()));
            }
            let g = MatExpr::parse(rows).map_err(config_err("metric.components"))?;
            Box::new(move |x| g.eval(x, 0.0))
        } else if let Some(spec) = &m.immersion {
            let y = field_immersion(spec, "metric.immersion")?;
            Box::new(move |x| y.metric(x))
        } else {
            Box::new(|_| Matrix2::identity())
        };

        let boundary: Box<dyn Immersion> = match (&b.immersion, &b.value, &b.gradient) {
            (Some(spec), _, _) => field_immersion(spec, "boundary.immersion")?,
            (None, Some(v), Some(g)) => {
                let row = |r: &[String; 2]| -> Result<MatRow, AppError> {
                    Ok([
                        crate::expr::Expr::parse(&r[0]).map_err(config_err("boundary.gradient"))?,
                        crate::expr::Expr::parse(&r[1]).map_err(config_err("boundary.gradient"))?,
                    ])
                };
                Box::new(ExprBoundary {
                    value: VecExpr::parse(v).map_err(config_err("boundary.value"))?,
                    gradient: [row(&g[0])?, row(&g[1])?, row(&g[2])?],
                })
            }
            (None, Some(v), None) => Box::new(ExprImmersion(VecExpr::parse(v).map_err(config_err("boundary.value"))?)),
            (None, None, Some(_)) => return Err(AppError::Config("boundary.gradient: needs boundary.value".into())),
            (None, None, None) => catalog::immersion("identity", &Default::default())?,
        };

        let points = match &b.program {
            Some(p) => Points::Program(catalog::program(&p.name, &p.params)?),
            None => Points::Exprs(
                b.points
                    .iter()
                    .map(|p| Ok((Vec2::new(p.at[0], p.at[1]), VecExpr::parse(&p.value).map_err(config_err("boundary.points"))?)))
                    .collect::<Result<_, AppError>>()?,
            ),
        };
        let force = config.force.as_ref().map(field_force).transpose()?;
        let fictitious =
            config.preprocess.force.as_ref().map(|f| VecExpr::parse(f).map_err(config_err("preprocess.force"))).transpose()?;
        Ok(Setup { config: config.clone(), mesh, metric, boundary, points, force, fictitious })
    }

    pub fn has_program(&self) -> bool {
        matches!(self.points, Points::Program(_))
    }

    /// Pointwise conditions at time `t`; `initial` selects the program's initialization set.
    pub fn point_data(&self, t: f64, initial: bool) -> Vec<(Vec2, Vector3<f64>)> {
        match &self.points {
            Points::Exprs(p) => p.iter().map(|(x, e)| (*x, e.eval(*x, t))).collect(),
            Points::Program(p) if initial => p.initial_points(),
            Points::Program(p) => p.points(t),
        }
    }

    fn nearest_vertex(&self, x: Vec2) -> Result<usize, AppError> {
        let verts = &self.mesh.mesh.vertices;
        let (i, d) = verts
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v - x).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| AppError::Config("empty mesh".into()))?;
        if d > 1e-8 * (1.0 + x.norm()) {
            return Err(AppError::Config(format!(
                "boundary point ({}, {}) is not a mesh vertex (nearest at distance {d:e})",
                x.x, x.y
            )));
        }
        Ok(i)
    }

    /// Discretization with point conditions at the given locations.
    pub fn discretize(&self, points: &[(Vec2, Vector3<f64>)]) -> Result<Arc<Discretization>, AppError> {
        let mut data = self.mesh.clone();
        data.labels.points = points.iter().map(|(x, _)| self.nearest_vertex(*x)).collect::<Result<_, _>>()?;
        Ok(Arc::new(Discretization::new(data, self.config.degree)?))
    }

    /// Boundary data at time `t` for the labels of `disc`.
    pub fn boundary_sample(
        &self,
        disc: &Discretization,
        t: f64,
        points: &[(Vec2, Vector3<f64>)],
    ) -> Result<BoundarySample, AppError> {
        let mut values = Vec::with_capacity(disc.points.len());
        for stencil in &disc.points {
            let mut found = None;
            for (x, v) in points {
                if self.nearest_vertex(*x)? == stencil.vertex {
                    found = Some([v.x, v.y, v.z]);
                }
            }
            values.push(found.ok_or_else(|| AppError::Config(format!("no value for point vertex {}", stencil.vertex)))?);
        }
        let y = &self.boundary;
        let value = |x: Vec2| {
            let v = y.value(x, t);
            [v.x, v.y, v.z]
        };
        let gradient = |x: Vec2| y.gradient(x, t);
        Ok(BoundarySample::sample(&disc.space, &disc.active, &value, &gradient, &values))
    }

    pub fn metric_field(&self, disc: &Discretization) -> Result<MetricField, AppError> {
        Ok(MetricField::sample(disc, &*self.metric)?)
    }

    pub fn material(&self) -> Result<MaterialParams, AppError> {
        let m = &self.config.material;
        MaterialParams::new(m.mu, m.lambda, m.s2.max(0.0).sqrt()).map_err(|e| AppError::Config(format!("material: {e}")))
    }

    pub fn penalties(&self) -> Result<PenaltyParams, AppError> {
        let p = &self.config.penalties;
        PenaltyParams::new(p.gamma0, p.gamma1, p.gamma2).map_err(|e| AppError::Config(format!("penalties: {e}")))
    }

    pub fn objective(&self) -> Objective {
        match self.config.model {
            Model::Preasymptotic => Objective::Preasymptotic { s2: self.config.material.s2 },
            Model::Prestrain => Objective::Prestrain,
            Model::Bilayer => {
                Objective::Bilayer { constant_term: self.config.curvature.as_ref().is_some_and(|z| z.constant_term) }
            }
        }
    }

    /// The main energy with data evaluated at time `t`.
    pub fn energy(&self, disc: &Arc<Discretization>, t: f64, bc: &BoundarySample) -> Result<PlateEnergy, AppError> {
        let mut e = PlateEnergy::new(disc.clone(), self.material()?, self.penalties()?, self.metric_field(disc)?);
        e.set_boundary(bc.clone());
        if let Some(f) = &self.force {
            e.set_force(&|x| f(x, t));
        }
        if let Some(z) = &self.config.curvature {
            let field = match (&z.regions, &z.constant) {
                (Some(regions), _) => CurvatureField::from_regions(disc, &|r| regions.get(&r.to_string()).map(curvature_matrix))
                    .map_err(|e| AppError::Config(format!("curvature: {e}")))?,
                (None, Some(c)) => CurvatureField::constant(disc, curvature_matrix(c)),
                (None, None) => unreachable!("validated"),
            };
            e.set_curvature(field);
        }
        Ok(e)
    }

    pub fn problem(&self, disc: &Arc<Discretization>, t: f64, bc: &BoundarySample) -> Result<FlowProblem, AppError> {
        Ok(FlowProblem::new(self.energy(disc, t, bc)?, self.objective()))
    }

    pub fn fictitious_force(&self) -> Option<impl Fn(Vec2) -> Vector3<f64> + '_> {
        self.fictitious.as_ref().map(|f| move |x| f.eval(x, 0.0))
    }

    /// Interpolant of the configured initial immersion.
    pub fn interpolate_initial(&self, disc: &Discretization) -> Result<VectorField, AppError> {
        let spec = self.config.initial.as_ref().and_then(|i| i.immersion.as_ref());
        let y = match spec {
            Some(s) => field_immersion(s, "initial.immersion")?,
            None => catalog::immersion("identity", &Default::default())?,
        };
        let v = disc.space.interpolate_vector(|x| y.value(x, 0.0));
        if v.data.iter().any(|c| !c.is_finite()) {
            return Err(AppError::Config("initial.immersion: not finite on the mesh".into()));
        }
        Ok(v)
    }
}

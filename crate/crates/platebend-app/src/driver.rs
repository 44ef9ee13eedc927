//! Static and quasi-static pipelines: BC preprocessing, metric preprocessing, main flow.

use std::sync::Arc;

use nalgebra::Vector3;

use platebend::dgspace::VectorField;
use platebend::flow::{
    bc_preprocess, bc_preprocess_increment, metric_preprocess, run_flow, scheme_registry, FlowConfig, FlowProblem, FlowReport,
    PreprocessConfig, StopReason,
};
use platebend::hessian::BoundarySample;
use platebend::mesh::Vec2;
use platebend::Discretization;

use crate::config::InitialKind;
use crate::setup::Setup;
use crate::AppError;

/// What a preprocessing stage or flow did.
#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub name: &'static str,
    pub iterations: usize,
    pub stopped_by: Option<StopReason>,
    pub energy: f64,
    pub defect: f64,
}

impl StageReport {
    fn from_flow(name: &'static str, r: &FlowReport) -> StageReport {
        StageReport {
            name,
            iterations: r.iterations,
            stopped_by: Some(r.stopped_by),
            energy: r.last.total,
            defect: r.last.defect,
        }
    }
}

/// A discretization with its boundary data at one time.
pub struct Stage {
    pub disc: Arc<Discretization>,
    pub bc: BoundarySample,
    pub t: f64,
}

impl Stage {
    pub fn new(setup: &Setup, t: f64, points: &[(Vec2, Vector3<f64>)]) -> Result<Stage, AppError> {
        let disc = setup.discretize(points)?;
        let bc = setup.boundary_sample(&disc, t, points)?;
        Ok(Stage { disc, bc, t })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSummary {
    pub step: usize,
    pub t: f64,
    pub stages: Vec<StageReport>,
}

impl StepSummary {
    pub fn flow(&self) -> &StageReport {
        self.stages.last().unwrap()
    }
}

pub struct RunOutput {
    pub problem: FlowProblem,
    pub report: FlowReport,
    pub stages: Vec<StageReport>,
    pub t: f64,
}

impl RunOutput {
    pub fn disc(&self) -> &Arc<Discretization> {
        self.problem.disc()
    }
}

pub fn flow_config(setup: &Setup) -> FlowConfig {
    let f = &setup.config.flow;
    FlowConfig {
        tau: f.tau,
        tol: f.tol,
        max_iter: f.max_iter,
        accelerate: f.accelerate,
        constraint: setup.config.constraint(),
        adaptive_tau: f.adaptive_tau,
    }
}

fn preprocess_config(setup: &Setup) -> PreprocessConfig {
    let p = &setup.config.preprocess;
    PreprocessConfig { tau: p.tau, tol: p.tol, eps0: p.eps0, max_iter: p.max_iter, accelerate: p.accelerate }
}

fn bc_stage(setup: &Setup, stage: &Stage) -> Result<(VectorField, StageReport), AppError> {
    let f = setup.fictitious_force();
    let y =
        bc_preprocess(stage.disc.clone(), setup.penalties()?, &stage.bc, f.as_ref().map(|f| f as &dyn Fn(Vec2) -> Vector3<f64>))?;
    let report = StageReport { name: "bc_preprocess", iterations: 1, stopped_by: None, energy: f64::NAN, defect: f64::NAN };
    Ok((y, report))
}

fn metric_stage(setup: &Setup, stage: &Stage, y: VectorField) -> Result<(VectorField, StageReport), AppError> {
    let kind = setup.objective().default_defect();
    let r = metric_preprocess(stage.disc.clone(), setup.metric_field(&stage.disc)?, kind, &preprocess_config(setup), y)?;
    Ok((r.y.clone(), StageReport::from_flow("metric_preprocess", &r)))
}

/// The initial deformation of a static run and the preprocessing stages that produced it.
pub fn initial_state(setup: &Setup, stage: &Stage) -> Result<(VectorField, Vec<StageReport>), AppError> {
    match setup.config.initial_kind() {
        InitialKind::Identity => Ok((stage.disc.space.interpolate_vector(|x| Vector3::new(x.x, x.y, 0.0)), Vec::new())),
        InitialKind::Immersion => Ok((setup.interpolate_initial(&stage.disc)?, Vec::new())),
        InitialKind::Preprocess => {
            let (y, bc) = bc_stage(setup, stage)?;
            if !setup.config.preprocess.metric {
                return Ok((y, vec![bc]));
            }
            let (y, metric) = metric_stage(setup, stage, y)?;
            Ok((y, vec![bc, metric]))
        }
    }
}

pub fn main_flow(setup: &Setup, stage: &Stage, y0: VectorField) -> Result<(FlowProblem, FlowReport), AppError> {
    let problem = setup.problem(&stage.disc, stage.t, &stage.bc)?;
    let name = setup.config.flow.scheme.as_deref().unwrap_or(setup.config.constraint().scheme_name());
    let registry = scheme_registry();
    let factory = registry.get(name).map_err(|e| AppError::Config(format!("flow.scheme: {e}")))?;
    let mut scheme = factory();
    let report = run_flow(&problem, scheme.as_mut(), &flow_config(setup), y0, None)?;
    Ok((problem, report))
}

/// The three-stage pipeline at `t = 0`; a boundary program contributes its initialization points.
pub fn run_static(setup: &Setup) -> Result<RunOutput, AppError> {
    let stage = Stage::new(setup, 0.0, &setup.point_data(0.0, true))?;
    let (y0, mut stages) = initial_state(setup, &stage)?;
    let (problem, report) = main_flow(setup, &stage, y0)?;
    stages.push(StageReport::from_flow("flow", &report));
    Ok(RunOutput { problem, report, stages, t: 0.0 })
}

/// Preprocessing stages only.
pub fn run_preprocess(setup: &Setup) -> Result<(Arc<Discretization>, VectorField, Vec<StageReport>), AppError> {
    let stage = Stage::new(setup, 0.0, &setup.point_data(0.0, true))?;
    let (y, mut stages) = match setup.config.initial_kind() {
        InitialKind::Preprocess => initial_state(setup, &stage)?,
        _ => {
            let (y, bc) = bc_stage(setup, &stage)?;
            let (y, m) = metric_stage(setup, &stage, y)?;
            (y, vec![bc, m])
        }
    };
    stages.retain(|s| s.name != "flow");
    Ok((stage.disc, y, stages))
}

/// Quasi-static evolution over `t_m = m dt`, `m = 1..=steps`.
///
/// The initialization at `t = 0` uses the initial state (only the BC stage
/// when preprocessing). Each step solves the BC preprocessing problem for the
/// data increment, runs the metric stage when the initial state is
/// preprocessed, and then the main flow with data at `t_m`. `observe` is called
/// after every step.
pub fn run_dynamics(
    setup: &Setup,
    observe: &mut dyn FnMut(usize, &RunOutput) -> Result<(), AppError>,
) -> Result<Vec<StepSummary>, AppError> {
    let dynamics =
        setup.config.dynamics.ok_or_else(|| AppError::Config("dynamics: section required for a time-dependent run".into()))?;
    let init = Stage::new(setup, 0.0, &setup.point_data(0.0, true))?;
    let preprocessed = setup.config.initial_kind() == InitialKind::Preprocess;
    let mut y = match setup.config.initial_kind() {
        InitialKind::Preprocess => bc_stage(setup, &init)?.0,
        _ => initial_state(setup, &init)?.0,
    };
    // the point locations of the main stages do not depend on t
    let main_disc = if setup.has_program() { setup.discretize(&setup.point_data(0.0, false))? } else { init.disc.clone() };
    let at = |t: f64| -> Result<Stage, AppError> {
        let bc = setup.boundary_sample(&main_disc, t, &setup.point_data(t, false))?;
        Ok(Stage { disc: main_disc.clone(), bc, t })
    };
    let mut prev = at(0.0)?;
    let mut out = Vec::with_capacity(dynamics.steps);
    for m in 1..=dynamics.steps {
        let wrap = |e: AppError| e.at_step(m);
        let stage = at(m as f64 * dynamics.dt).map_err(wrap)?;
        let y_hat = bc_preprocess_increment(stage.disc.clone(), setup.penalties()?, &stage.bc, &prev.bc, &y)
            .map_err(|e| wrap(e.into()))?;
        let mut stages =
            vec![StageReport { name: "bc_increment", iterations: 1, stopped_by: None, energy: f64::NAN, defect: f64::NAN }];
        let y_tilde = if preprocessed && setup.config.preprocess.metric {
            let (y, r) = metric_stage(setup, &stage, y_hat).map_err(wrap)?;
            stages.push(r);
            y
        } else {
            y_hat
        };
        let (problem, report) = main_flow(setup, &stage, y_tilde).map_err(wrap)?;
        stages.push(StageReport::from_flow("flow", &report));
        y = report.y.clone();
        let run = RunOutput { problem, report, stages, t: stage.t };
        observe(m, &run)?;
        out.push(StepSummary { step: m, t: run.t, stages: run.stages });
        prev = stage;
    }
    Ok(out)
}

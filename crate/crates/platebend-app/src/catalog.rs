//! Named immersions, metrics, forces, boundary programs and scenarios.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3x2, Vector3};
use serde_json::{json, Value};

use platebend::mesh::Vec2;
use platebend::registry::Registry;

use crate::config::Params;
use crate::AppError;

/// Reads catalog parameters, rejecting names the entry does not know.
pub struct ParamReader<'a> {
    entry: &'a str,
    params: &'a Params,
    known: Vec<&'static str>,
}

impl<'a> ParamReader<'a> {
    pub fn new(entry: &'a str, params: &'a Params) -> ParamReader<'a> {
        ParamReader { entry, params, known: Vec::new() }
    }

    pub fn get(&mut self, name: &'static str, default: f64) -> f64 {
        self.known.push(name);
        self.params.get(name).copied().unwrap_or(default)
    }

    pub fn finish(self) -> Result<(), AppError> {
        match self.params.keys().find(|k| !self.known.contains(&k.as_str())) {
            Some(k) => {
                Err(AppError::Config(format!("{}: unknown parameter '{k}' (known: {})", self.entry, self.known.join(", "))))
            }
            None => Ok(()),
        }
    }
}

fn lookup<'r, T>(registry: &'r Registry<T>, name: &str) -> Result<&'r T, AppError> {
    registry.get(name).map_err(|e| AppError::Config(e.to_string().replace("invalid parameter: ", "")))
}

// ---- immersions --------------------------------------------------------------

/// A map `Omega -> R^3`, possibly time dependent, with its gradient.
pub trait Immersion {
    fn value(&self, x: Vec2, t: f64) -> Vector3<f64>;
    fn gradient(&self, x: Vec2, t: f64) -> Matrix3x2<f64>;

    /// First fundamental form `grad y^T grad y`.
    fn metric(&self, x: Vec2) -> Matrix2<f64> {
        let f = self.gradient(x, 0.0);
        f.transpose() * f
    }
}

type ImmersionFactory = fn(&Params) -> Result<Box<dyn Immersion>, AppError>;

/// `(x1, x2, h(x))` for a height function with known gradient.
struct Graph<H, G> {
    h: H,
    dh: G,
}

impl<H: Fn(Vec2) -> f64, G: Fn(Vec2) -> Vec2> Immersion for Graph<H, G> {
    fn value(&self, x: Vec2, _t: f64) -> Vector3<f64> {
        Vector3::new(x.x, x.y, (self.h)(x))
    }

    fn gradient(&self, x: Vec2, _t: f64) -> Matrix3x2<f64> {
        let d = (self.dh)(x);
        Matrix3x2::new(1.0, 0.0, 0.0, 1.0, d.x, d.y)
    }
}

fn graph(h: impl Fn(Vec2) -> f64 + 'static, dh: impl Fn(Vec2) -> Vec2 + 'static) -> Box<dyn Immersion> {
    Box::new(Graph { h, dh })
}

pub fn immersions() -> Registry<ImmersionFactory> {
    let mut r: Registry<ImmersionFactory> = Registry::new("immersion");
    r.register("identity", "the flat plate (x1, x2, 0)", |p| {
        ParamReader::new("immersion identity", p).finish()?;
        Ok(graph(|_| 0.0, |_| Vec2::zeros()))
    });
    r.register("paraboloid", "(x1, x2, a x1^2 + b x2^2), defaults a = -1/16, b = 1/16", |p| {
        let mut rd = ParamReader::new("immersion paraboloid", p);
        let (a, b) = (rd.get("a", -1.0 / 16.0), rd.get("b", 1.0 / 16.0));
        rd.finish()?;
        Ok(graph(move |x| a * x.x * x.x + b * x.y * x.y, move |x| Vec2::new(2.0 * a * x.x, 2.0 * b * x.y)))
    });
    r.register("oscillating_disc", "(x1, x2, amplitude r^4 sin(waves theta)), defaults 0.2 and 6", |p| {
        let mut rd = ParamReader::new("immersion oscillating_disc", p);
        let (amp, k) = (rd.get("amplitude", 0.2), rd.get("waves", 6.0));
        rd.finish()?;
        Ok(graph(
            move |x| {
                let (r, th) = (x.norm(), x.y.atan2(x.x));
                amp * r.powi(4) * (k * th).sin()
            },
            move |x| {
                let (r, th) = (x.norm(), x.y.atan2(x.x));
                // d_r h e_r + r^{-1} d_theta h e_theta, both O(r^3)
                let (dr, dth) = (4.0 * amp * r.powi(3) * (k * th).sin(), k * amp * r.powi(3) * (k * th).cos());
                let (c, s) = (th.cos(), th.sin());
                Vec2::new(dr * c - dth * s, dr * s + dth * c)
            },
        ))
    });
    r.register("half_sphere", "(x1, x2, sqrt(1 + eps - r^2)), default eps = 1e-3", |p| {
        let mut rd = ParamReader::new("immersion half_sphere", p);
        let eps = rd.get("eps", 1e-3);
        rd.finish()?;
        if !(eps > 0.0) {
            return Err(AppError::Config("immersion half_sphere: eps must be positive".into()));
        }
        Ok(graph(move |x| (1.0 + eps - x.norm_squared()).sqrt(), move |x| -x / (1.0 + eps - x.norm_squared()).sqrt()))
    });
    r
}

pub fn immersion(name: &str, params: &Params) -> Result<Box<dyn Immersion>, AppError> {
    (lookup(&immersions(), name)?)(params)
}

// ---- metrics -----------------------------------------------------------------

pub type MetricFn = Box<dyn Fn(Vec2) -> Matrix2<f64>>;
type MetricFactory = fn(&Params) -> Result<MetricFn, AppError>;

/// `I + alpha (pi^2/4) cos(pi (1 - r)/2)^2 x x^T / r^2`, equal to `I` at the centre.
pub fn bubble_metric(alpha: f64, x: Vec2) -> Matrix2<f64> {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Matrix2::identity();
    }
    let c = (0.5 * PI * (1.0 - r2.sqrt())).cos();
    let f = alpha * PI * PI / 4.0 * c * c / r2;
    Matrix2::new(1.0 + f * x.x * x.x, f * x.x * x.y, f * x.x * x.y, 1.0 + f * x.y * x.y)
}

pub fn metrics() -> Registry<MetricFactory> {
    let mut r: Registry<MetricFactory> = Registry::new("metric");
    r.register("identity", "the Euclidean metric", |p| {
        ParamReader::new("metric identity", p).finish()?;
        Ok(Box::new(|_| Matrix2::identity()))
    });
    r.register("bubble", "radial bubble of positive Gaussian curvature, default alpha = 0.2", |p| {
        let mut rd = ParamReader::new("metric bubble", p);
        let alpha = rd.get("alpha", 0.2);
        rd.finish()?;
        if !(alpha > -4.0 / (PI * PI)) {
            return Err(AppError::Config("metric bubble: alpha must exceed -4/pi^2".into()));
        }
        Ok(Box::new(move |x| bubble_metric(alpha, x)))
    });
    r.register("half_sphere", "induced by the half_sphere immersion", |p| {
        let y = immersion("half_sphere", p)?;
        Ok(Box::new(move |x| y.metric(x)))
    });
    r.register("oscillating_disc", "induced by the oscillating_disc immersion", |p| {
        let y = immersion("oscillating_disc", p)?;
        Ok(Box::new(move |x| y.metric(x)))
    });
    r
}

pub fn metric(name: &str, params: &Params) -> Result<MetricFn, AppError> {
    (lookup(&metrics(), name)?)(params)
}

// ---- forces ------------------------------------------------------------------

pub type ForceFn = Box<dyn Fn(Vec2, f64) -> Vector3<f64>>;
type ForceFactory = fn(&Params) -> Result<ForceFn, AppError>;

pub fn forces() -> Registry<ForceFactory> {
    let mut r: Registry<ForceFactory> = Registry::new("force");
    r.register("half_sphere", "-scale t y / sqrt(1 + eps) along the half_sphere immersion", |p| {
        let mut rd = ParamReader::new("force half_sphere", p);
        let (eps, scale) = (rd.get("eps", 1e-3), rd.get("scale", 1.0));
        rd.finish()?;
        let y = immersion("half_sphere", &Params::from([("eps".to_string(), eps)]))?;
        Ok(Box::new(move |x, t| y.value(x, t) * (-scale * t / (1.0 + eps).sqrt())))
    });
    r
}

pub fn force(name: &str, params: &Params) -> Result<ForceFn, AppError> {
    (lookup(&forces(), name)?)(params)
}

// ---- boundary programs -------------------------------------------------------

/// Time-dependent pointwise conditions, with a separate set for the initialization at `t = 0`.
pub trait BoundaryProgram {
    fn initial_points(&self) -> Vec<(Vec2, Vector3<f64>)>;
    fn points(&self, t: f64) -> Vec<(Vec2, Vector3<f64>)>;
}

type ProgramFactory = fn(&Params) -> Result<Box<dyn BoundaryProgram>, AppError>;

/// Dodecagon corners `x_i` at angles `(i - 1) pi/6`; the odd-numbered ones are
/// pulled towards the centre as `(1 - 2 c_r t) x_i`. At `t = 0` the even-numbered
/// corners are lifted to height `lift`.
pub struct Starshade {
    pub radius: f64,
    pub rate: f64,
    pub lift: f64,
}

impl Starshade {
    pub fn corner(&self, i: usize) -> Vec2 {
        let th = (i as f64 - 1.0) * PI / 6.0;
        Vec2::new(th.cos(), th.sin()) * self.radius
    }

    fn valley(&self, t: f64) -> Vec<(Vec2, Vector3<f64>)> {
        (1..=12)
            .step_by(2)
            .map(|i| {
                let x = self.corner(i);
                let s = 1.0 - 2.0 * self.rate * t;
                (x, Vector3::new(s * x.x, s * x.y, 0.0))
            })
            .collect()
    }
}

impl BoundaryProgram for Starshade {
    fn initial_points(&self) -> Vec<(Vec2, Vector3<f64>)> {
        let mut p = self.valley(0.0);
        p.extend((2..=12).step_by(2).map(|i| {
            let x = self.corner(i);
            (x, Vector3::new(x.x, x.y, self.lift))
        }));
        p
    }

    fn points(&self, t: f64) -> Vec<(Vec2, Vector3<f64>)> {
        self.valley(t)
    }
}

pub fn programs() -> Registry<ProgramFactory> {
    let mut r: Registry<ProgramFactory> = Registry::new("boundary program");
    r.register("starshade", "compress the six valley corners of the dodecagon (radius 7, rate 0.25, lift 1.5)", |p| {
        let mut rd = ParamReader::new("program starshade", p);
        let s = Starshade { radius: rd.get("radius", 7.0), rate: rd.get("rate", 0.25), lift: rd.get("lift", 1.5) };
        rd.finish()?;
        Ok(Box::new(s))
    });
    r
}

pub fn program(name: &str, params: &Params) -> Result<Box<dyn BoundaryProgram>, AppError> {
    (lookup(&programs(), name)?)(params)
}

// ---- scenarios ---------------------------------------------------------------

type ScenarioFactory = fn() -> Value;

pub fn scenarios() -> Registry<ScenarioFactory> {
    let mut r: Registry<ScenarioFactory> = Registry::new("scenario");
    r.register("bubble", "preasymptotic disc with the bubble metric, saddle start", || {
        json!({
            "model": "preasymptotic",
            "mesh": {"kind": "bundled", "name": "disc320"},
            "material": {"s2": 1e-3},
            "metric": {"builtin": "bubble", "params": {"alpha": 0.2}},
            "initial": {"kind": "immersion", "immersion": {"builtin": "paraboloid"}},
            "flow": {"tau": 0.01, "tol": 1e-6}
        })
    });
    r.register("oscillating_disc", "preasymptotic disc with the metric of a six-wave immersion", || {
        json!({
            "model": "preasymptotic",
            "mesh": {"kind": "bundled", "name": "disc320"},
            "material": {"s2": 0.1},
            "metric": {"builtin": "oscillating_disc"},
            "initial": {"kind": "immersion", "immersion": {"builtin": "oscillating_disc"}},
            "flow": {"tau": 0.01, "tol": 1e-8}
        })
    });
    r.register("diamond", "bilayer diamond with two creases and alternating curvature", || {
        json!({
            "model": "bilayer",
            "mesh": {"kind": "bundled", "name": "diamond"},
            "material": {"mu": 6.0, "lambda": 0.0},
            "curvature": {"regions": {"1": 0.6, "2": -0.6, "3": 0.6}, "constant_term": true},
            "initial": {"kind": "identity"},
            "flow": {"tau": 0.1, "tol": 1e-3}
        })
    });
    r.register("half_sphere", "prestrained half-sphere under a growing axial force", || {
        json!({
            "model": "prestrain",
            "mesh": {"kind": "bundled", "name": "half_sphere"},
            "metric": {"builtin": "half_sphere"},
            "boundary": {"kind": "mixed", "immersion": {"builtin": "half_sphere"}},
            "force": {"builtin": "half_sphere"},
            "initial": {"kind": "immersion", "immersion": {"builtin": "half_sphere"}},
            "flow": {"tau": 0.2, "tol": 1e-3},
            "dynamics": {"dt": 5.0, "steps": 45}
        })
    });
    r.register("starshade", "folding dodecagon compressed at its valley corners", || {
        json!({
            "model": "prestrain",
            "mesh": {"kind": "bundled", "name": "starshade"},
            "penalties": {"gamma0": 10.0, "gamma1": 10.0, "gamma2": 10.0},
            "boundary": {"program": {"name": "starshade"}},
            "initial": {"kind": "preprocess"},
            "preprocess": {"tau": 0.01, "tol": 0.5, "eps0": 0.5},
            "flow": {"tau": 0.05, "tol": 0.1},
            "dynamics": {"dt": 0.05, "steps": 35}
        })
    });
    r
}

pub fn scenario_document(name: &str) -> Result<Value, AppError> {
    Ok((lookup(&scenarios(), name)?)())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bubble_metric_values() {
        let g = metric("bubble", &Params::new()).unwrap();
        assert_eq!(g(Vec2::zeros()), Matrix2::identity());
        let m = g(Vec2::new(0.5, 0.0));
        assert!((m[(0, 0)] - (1.0 + 0.2 * PI * PI / 8.0)).abs() < 1e-15);
        assert_eq!((m[(0, 1)], m[(1, 0)], m[(1, 1)]), (0.0, 0.0, 1.0));
        // continuity at the centre
        assert!((g(Vec2::new(1e-9, 0.0)) - Matrix2::identity()).norm() < 1e-15);
    }

    #[test]
    fn induced_metrics_match_closed_forms() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let eps = 1e-3;
        let sphere = metric("half_sphere", &Params::new()).unwrap();
        let wave = metric("oscillating_disc", &Params::new()).unwrap();
        assert_eq!(sphere(Vec2::zeros()), Matrix2::identity());
        for _ in 0..100 {
            let (r, th) = (rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
            let x = Vec2::new(r * th.cos(), r * th.sin());
            // the gradient of sqrt(1 + eps - r^2) is -x / sqrt(1 + eps - r^2)
            let expected = Matrix2::identity() + x * x.transpose() / (1.0 + eps - r * r);
            assert!((sphere(x) - expected).norm() <= 1e-12 * expected.norm());
            // grad(r^4 sin 6 theta) in polar components: (4 r^3 sin 6 theta, 6 r^3 cos 6 theta)
            let (er, et) = (Vec2::new(th.cos(), th.sin()), Vec2::new(-th.sin(), th.cos()));
            let dh = (er * 0.8 * (6.0 * th).sin() + et * 1.2 * (6.0 * th).cos()) * r.powi(3);
            let expected = Matrix2::identity() + dh * dh.transpose();
            assert!((wave(x) - expected).norm() <= 1e-12);
        }
    }

    #[test]
    fn half_sphere_stays_inside_its_sphere() {
        let y = immersion("half_sphere", &Params::new()).unwrap();
        for x in [Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(0.6, -0.8)] {
            let p = y.value(x, 0.0);
            assert!((p.norm_squared() - 1.001).abs() < 1e-14);
        }
        let f = force("half_sphere", &Params::new()).unwrap();
        let v = f(Vec2::new(0.3, 0.1), 2.0);
        assert!((v + y.value(Vec2::new(0.3, 0.1), 0.0) * (2.0 / 1.001f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn unknown_entries_and_parameters() {
        let err = metric("bubbles", &Params::new()).err().unwrap().to_string();
        assert!(err.contains("unknown metric 'bubbles'") && err.contains("bubble"), "{err}");
        let err = metric("bubble", &Params::from([("beta".to_string(), 1.0)])).err().unwrap().to_string();
        assert!(err.contains("unknown parameter 'beta'"), "{err}");
    }

    #[test]
    fn starshade_program() {
        let p = program("starshade", &Params::new()).unwrap();
        let init = p.initial_points();
        assert_eq!(init.len(), 12);
        assert!(init[6..].iter().all(|(_, v)| v.z == 1.5));
        let later = p.points(1.0);
        assert_eq!(later.len(), 6);
        for (x, v) in later {
            assert!((v.xy() - x * 0.5).norm() < 1e-14 && v.z == 0.0);
            assert!((x.norm() - 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scenario_documents_parse() {
        for (name, _) in scenarios().describe() {
            crate::config::parse_config_value(json!({"scenario": name}), std::path::Path::new(".")).unwrap();
        }
    }
}

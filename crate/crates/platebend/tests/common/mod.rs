#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{Matrix2, Vector3};
use platebend::energy::{MaterialParams, MetricField, PenaltyParams, PlateEnergy};
use platebend::mesh::{rectangle_mesh, structured_mesh, Mesh, MeshData, Vec2};
use platebend::Discretization;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn free(mesh: Mesh, k: usize) -> Arc<Discretization> {
    Arc::new(Discretization::new(MeshData::free(mesh), k).unwrap())
}

pub fn unit_square(n: usize) -> Mesh {
    rectangle_mesh([0.0, 1.0], [0.0, 1.0], n, n).unwrap()
}

/// Non-affine cells: a smooth interior perturbation of the unit square grid.
pub fn distorted_square(n: usize) -> Mesh {
    structured_mesh(n, n, |p| {
        let b = (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin();
        Vec2::new(p.x + 0.08 * b, p.y - 0.05 * b + 0.03 * (p.x * p.y))
    })
    .unwrap()
}

/// Parallelograms only.
pub fn sheared_square(n: usize) -> Mesh {
    structured_mesh(n, n, |p| Vec2::new(p.x + 0.3 * p.y, 0.9 * p.y - 0.2 * p.x)).unwrap()
}

pub fn plate(disc: &Arc<Discretization>, mu: f64, lambda: f64) -> PlateEnergy {
    PlateEnergy::new(
        disc.clone(),
        MaterialParams::new(mu, lambda, 0.0).unwrap(),
        PenaltyParams::default(),
        MetricField::identity(disc),
    )
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// `n` uniform samples in `[-1, 1]`.
pub fn rvec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn identity_map(x: Vec2) -> Vector3<f64> {
    Vector3::new(x.x, x.y, 0.0)
}

pub fn max_matrix_err(a: &[Matrix2<f64>], b: &[Matrix2<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max)
}

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use memovis_core::scene::Mesh;
use memovis_core::{RenderConfig, SceneModel, Viewpoint};

pub const RED: [u8; 3] = [220, 40, 40];
pub const GREEN: [u8; 3] = [40, 200, 60];
pub const BLUE: [u8; 3] = [40, 60, 220];

/// Unit cubes A, B, C centered at x = -1.5, 0, 1.5.
pub fn three_cubes() -> SceneModel {
    SceneModel::new(vec![
        Mesh::cuboid([-1.5, 0.0, 0.0], [0.5; 3], RED).with_name("A"),
        Mesh::cuboid([0.0, 0.0, 0.0], [0.5; 3], GREEN).with_name("B"),
        Mesh::cuboid([1.5, 0.0, 0.0], [0.5; 3], BLUE).with_name("C"),
    ])
    .unwrap()
}

/// Looking down -Z at the scene center from twice the bounding radius.
pub fn front_view() -> Viewpoint {
    Viewpoint::new(FRAC_PI_2, FRAC_PI_2, 2.0, [0.0; 3])
}

pub fn small_config(size: u32) -> RenderConfig {
    RenderConfig::default().with_size(size, size)
}

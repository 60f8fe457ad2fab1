use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{SceneError, SceneModel};

/// Orbit-camera pose: latitude `alpha` from +Y, longitude `beta` in the XZ
/// plane, orbit distance `r` as a multiple of the scene's bounding-sphere
/// radius, and the look-at target in scene units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Viewpoint {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl Viewpoint {
    pub fn new(alpha: f64, beta: f64, r: f64, target: [f64; 3]) -> Self {
        Self {
            alpha,
            beta,
            r,
            tx: target[0],
            ty: target[1],
            tz: target[2],
        }
    }

    pub fn target(&self) -> [f64; 3] {
        [self.tx, self.ty, self.tz]
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let err = |msg: String| Err(SceneError::InvalidViewpoint(msg));
        if !(0.0..=PI).contains(&self.alpha) {
            return err(format!("alpha {} outside [0, pi]", self.alpha));
        }
        if !(0.0..TAU).contains(&self.beta) {
            return err(format!("beta {} outside [0, 2pi)", self.beta));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return err(format!("r {} must be positive", self.r));
        }
        if !self.target().iter().all(|c| c.is_finite()) {
            return err("target must be finite".into());
        }
        Ok(())
    }
}

/// Intrinsics shared by every render of a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Vertical field of view in degrees.
    pub fov_y_deg: f64,
    pub background: [u8; 3],
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            fov_y_deg: 60.0,
            background: [255, 255, 255],
        }
    }
}

impl RenderConfig {
    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidPose("viewport must be non-empty".into()));
        }
        if self.width > crate::raster::MAX_DIMENSION || self.height > crate::raster::MAX_DIMENSION {
            return Err(SceneError::InvalidPose("viewport too large".into()));
        }
        if !(self.fov_y_deg > 0.0 && self.fov_y_deg < 180.0) {
            return Err(SceneError::InvalidPose(format!(
                "fov {} outside (0, 180)",
                self.fov_y_deg
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fwd = sub(self.target, self.eye);
        if norm(fwd) == 0.0 {
            return Err(SceneError::InvalidPose("eye equals target".into()));
        }
        if (norm(self.up) - 1.0).abs() > 1e-9 {
            return Err(SceneError::InvalidPose("up is not unit length".into()));
        }
        if norm(cross(fwd, self.up)) <= 1e-12 * norm(fwd) {
            return Err(SceneError::InvalidPose("up is parallel to view direction".into()));
        }
        if self.width == 0 || self.height == 0 || !(self.fov_y > 0.0 && self.fov_y < PI) {
            return Err(SceneError::InvalidPose("bad intrinsics".into()));
        }
        Ok(())
    }
}

/// Places the orbit camera. The eye sits at
/// `target + r * R * (sin a cos b, cos a, sin a sin b)` where `R` is the
/// scene's bounding-sphere radius.
pub fn orbit_to_pose(
    v: &Viewpoint,
    scene: &SceneModel,
    config: &RenderConfig,
) -> Result<CameraPose, SceneError> {
    v.validate()?;
    config.validate()?;
    let radius = scene.bounding_radius();
    if radius.is_nan() || radius <= 0.0 {
        return Err(SceneError::Degenerate);
    }
    let dist = v.r * radius;
    let (sa, ca) = v.alpha.sin_cos();
    let (sb, cb) = v.beta.sin_cos();
    let target = v.target();
    let eye = [
        target[0] + dist * sa * cb,
        target[1] + dist * ca,
        target[2] + dist * sa * sb,
    ];
    let up = if ca.abs() > 0.999 {
        [0.0, 0.0, 1.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    Ok(CameraPose {
        eye,
        target,
        up,
        fov_y: config.fov_y_deg.to_radians(),
        width: config.width,
        height: config.height,
    })
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;
    use crate::scene::Mesh;

    /// Scene whose bounding-sphere radius is exactly `radius`.
    fn scene_with_radius(radius: f32) -> SceneModel {
        // A cube of half side h has radius h * sqrt(3); use a flat diagonal
        // segment instead so the radius is exact.
        let a = radius / 2f32.sqrt();
        let mesh = Mesh::new(
            vec![[-a, -a, 0.0], [a, a, 0.0], [a, -a, 0.0]],
            vec![[0, 1, 2]],
            [0; 3],
        );
        SceneModel::new(vec![mesh]).unwrap()
    }

    fn assert_close(a: [f64; 3], b: [f64; 3]) {
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-6, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn equator_beta_zero_is_plus_x() {
        let scene = scene_with_radius(1.0);
        let pose = orbit_to_pose(
            &Viewpoint::new(FRAC_PI_2, 0.0, 1.0, [0.0; 3]),
            &scene,
            &RenderConfig::default(),
        )
        .unwrap();
        assert_close(pose.eye, [1.0, 0.0, 0.0]);
        assert_eq!(pose.up, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn pole_switches_up_to_z() {
        let scene = scene_with_radius(1.0);
        for beta in [0.0, 1.0, 4.0] {
            let pose = orbit_to_pose(
                &Viewpoint::new(0.0, beta, 1.0, [0.0; 3]),
                &scene,
                &RenderConfig::default(),
            )
            .unwrap();
            assert_eq!(pose.up, [0.0, 0.0, 1.0]);
            pose.validate().unwrap();
        }
    }

    #[test]
    fn offset_target_and_radius() {
        // Independent spherical-coordinate evaluation: (r R) = 3, direction
        // at alpha = beta = 90 degrees is +Z, so eye = (1, 0, 0) + (0, 0, 3).
        let scene = scene_with_radius(1.5);
        assert!((scene.bounding_radius() - 1.5).abs() < 1e-6);
        let pose = orbit_to_pose(
            &Viewpoint::new(FRAC_PI_2, FRAC_PI_2, 2.0, [1.0, 0.0, 0.0]),
            &scene,
            &RenderConfig::default(),
        )
        .unwrap();
        assert_close(pose.eye, [1.0, 0.0, 3.0]);
    }

    #[test]
    fn rejects_invalid_viewpoints() {
        let scene = scene_with_radius(1.0);
        let cfg = RenderConfig::default();
        for v in [
            Viewpoint::new(-0.1, 0.0, 1.0, [0.0; 3]),
            Viewpoint::new(0.5, TAU, 1.0, [0.0; 3]),
            Viewpoint::new(0.5, 0.0, 0.0, [0.0; 3]),
            Viewpoint::new(0.5, 0.0, 1.0, [f64::NAN, 0.0, 0.0]),
        ] {
            assert!(orbit_to_pose(&v, &scene, &cfg).is_err());
        }
    }

    #[test]
    fn degenerate_scene_is_rejected() {
        let point = Mesh::new(vec![[1.0, 1.0, 1.0]; 3], vec![[0, 1, 2]], [0; 3]);
        let scene = SceneModel::new(vec![point]).unwrap();
        let err = orbit_to_pose(
            &Viewpoint::new(1.0, 0.0, 1.0, [0.0; 3]),
            &scene,
            &RenderConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SceneError::Degenerate));
    }

    proptest! {
        #[test]
        fn eye_distance_is_r_times_radius(
            alpha in 0.0..=PI,
            beta in 0.0..TAU,
            r in 0.05f64..5.0,
            radius in 0.1f32..10.0,
            t in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let scene = scene_with_radius(radius);
            let pose = orbit_to_pose(&Viewpoint::new(alpha, beta, r, t), &scene, &RenderConfig::default()).unwrap();
            let expected = r * scene.bounding_radius();
            let d = norm(sub(pose.eye, pose.target));
            prop_assert!((d - expected).abs() <= 1e-6 * expected);
            prop_assert!(pose.validate().is_ok());
        }
    }
}

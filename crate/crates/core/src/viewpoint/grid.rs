use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scene::{SceneModel, Viewpoint};

use super::IndexError;

/// Upper bound on grid size, so a bad config cannot exhaust memory.
pub const MAX_GRID_ROWS: usize = 1 << 24;

/// Discretization of the viewpoint space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Target positions per bounding-box axis.
    pub bins_per_axis: u32,
    /// Angular spacing in degrees; must divide 180.
    pub angle_step_deg: u32,
    /// Orbit distances as multiples of the bounding-sphere radius.
    pub radii: Vec<f64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            bins_per_axis: 5,
            angle_step_deg: 30,
            radii: vec![0.5, 1.0, 1.5],
        }
    }
}

impl SamplingConfig {
    pub fn alpha_steps(&self) -> u32 {
        180 / self.angle_step_deg
    }

    pub fn beta_steps(&self) -> u32 {
        360 / self.angle_step_deg
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        let err = |m: String| Err(IndexError::InvalidConfig(m));
        if self.bins_per_axis == 0 {
            return err("bins_per_axis must be positive".into());
        }
        if self.angle_step_deg == 0 || 180 % self.angle_step_deg != 0 {
            return err(format!("angle step {} does not divide 180", self.angle_step_deg));
        }
        if self.radii.is_empty() {
            return err("radii must not be empty".into());
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return err(format!("radius {r} must be positive"));
        }
        match self.checked_count() {
            Some(n) if n <= MAX_GRID_ROWS => Ok(()),
            _ => err(format!("grid exceeds {MAX_GRID_ROWS} viewpoints")),
        }
    }

    fn checked_count(&self) -> Option<usize> {
        let bins = self.bins_per_axis as usize;
        bins.checked_mul(bins)?
            .checked_mul(bins)?
            .checked_mul(self.alpha_steps() as usize * self.beta_steps() as usize)?
            .checked_mul(self.radii.len())
    }

    /// Number of viewpoints the grid produces. Call [`validate`](Self::validate) first.
    pub fn count(&self) -> usize {
        self.checked_count().unwrap_or(usize::MAX)
    }

    /// Grid coordinates of row `row` in sampling order.
    pub fn coord(&self, row: usize) -> GridCoord {
        let radii = self.radii.len();
        let betas = self.beta_steps() as usize;
        let alphas = self.alpha_steps() as usize;
        let bins = self.bins_per_axis as usize;
        let mut rest = row;
        let mut take = |n: usize| {
            let v = rest % n;
            rest /= n;
            v as u32
        };
        let radius = take(radii);
        let beta = take(betas);
        let alpha = take(alphas);
        let z = take(bins);
        let y = take(bins);
        let x = take(bins);
        GridCoord {
            target: [x, y, z],
            alpha,
            beta,
            radius,
        }
    }
}

/// Position of a viewpoint within the sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridCoord {
    pub target: [u32; 3],
    pub alpha: u32,
    pub beta: u32,
    pub radius: u32,
}

impl fmt::Display for GridCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z] = self.target;
        write!(
            f,
            "target=({x},{y},{z}) alpha={} beta={} radius={}",
            self.alpha, self.beta, self.radius
        )
    }
}

/// All grid viewpoints, ordered by target (x, then y, then z), then alpha,
/// beta and radius.
pub fn sample_grid(scene: &SceneModel, cfg: &SamplingConfig) -> Result<Vec<Viewpoint>, IndexError> {
    cfg.validate()?;
    let bounds = scene.bounds();
    let bins = cfg.bins_per_axis;
    let axis = |k: usize, i: u32| {
        bounds.min[k] + (i as f64 + 0.5) * (bounds.max[k] - bounds.min[k]) / bins as f64
    };
    let step = (cfg.angle_step_deg as f64).to_radians();
    let mut out = Vec::with_capacity(cfg.count());
    for ix in 0..bins {
        for iy in 0..bins {
            for iz in 0..bins {
                let target = [axis(0, ix), axis(1, iy), axis(2, iz)];
                for ia in 0..cfg.alpha_steps() {
                    let alpha = (ia as f64 + 0.5) * step;
                    for ib in 0..cfg.beta_steps() {
                        let beta = (ib as f64 + 0.5) * step;
                        for &r in &cfg.radii {
                            out.push(Viewpoint::new(alpha, beta, r, target));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Mesh;

    fn scene() -> SceneModel {
        SceneModel::new(vec![Mesh::cuboid([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1, 2, 3])]).unwrap()
    }

    fn cfg(bins: u32, step: u32, radii: &[f64]) -> SamplingConfig {
        SamplingConfig {
            bins_per_axis: bins,
            angle_step_deg: step,
            radii: radii.to_vec(),
        }
    }

    #[test]
    fn grid_counts() {
        let s = scene();
        assert_eq!(sample_grid(&s, &SamplingConfig::default()).unwrap().len(), 27_000);
        assert_eq!(sample_grid(&s, &cfg(1, 90, &[1.0])).unwrap().len(), 8);
        assert_eq!(sample_grid(&s, &cfg(2, 60, &[1.0, 2.0])).unwrap().len(), 288);
    }

    #[test]
    fn bad_configs() {
        for c in [cfg(0, 30, &[1.0]), cfg(1, 0, &[1.0]), cfg(1, 50, &[1.0]), cfg(1, 30, &[]), cfg(1, 30, &[-1.0])] {
            assert!(matches!(c.validate(), Err(IndexError::InvalidConfig(_))), "{c:?}");
        }
        assert!(cfg(100_000, 1, &[1.0]).validate().is_err());
    }

    #[test]
    fn single_bin_targets_box_center_and_angles_are_bin_centers() {
        let grid = sample_grid(&scene(), &cfg(1, 90, &[1.0])).unwrap();
        let q = std::f64::consts::FRAC_PI_4;
        let expected: Vec<(f64, f64)> = [(1.0, 1.0), (1.0, 3.0), (1.0, 5.0), (1.0, 7.0), (3.0, 1.0), (3.0, 3.0), (3.0, 5.0), (3.0, 7.0)]
            .iter()
            .map(|(a, b)| (a * q, b * q))
            .collect();
        for (v, (a, b)) in grid.iter().zip(expected) {
            assert_eq!(v.target(), [1.0, 2.0, 3.0]);
            assert!((v.alpha - a).abs() < 1e-12 && (v.beta - b).abs() < 1e-12);
            v.validate().unwrap();
        }
    }

    #[test]
    fn coord_matches_enumeration_order() {
        let c = cfg(2, 60, &[1.0, 2.0]);
        let grid = sample_grid(&scene(), &c).unwrap();
        // Box spans [0,2]x[0,4]x[0,6]; two bins put targets at 1/4 and 3/4.
        for (row, v) in grid.iter().enumerate() {
            let g = c.coord(row);
            let step = 60f64.to_radians();
            assert!((v.alpha - (g.alpha as f64 + 0.5) * step).abs() < 1e-12);
            assert!((v.beta - (g.beta as f64 + 0.5) * step).abs() < 1e-12);
            assert_eq!(v.r, c.radii[g.radius as usize]);
            let ext = [2.0, 4.0, 6.0];
            for (k, e) in ext.iter().enumerate() {
                assert!((v.target()[k] - (g.target[k] as f64 * 2.0 + 1.0) * e / 4.0).abs() < 1e-9);
            }
        }
        assert_eq!(c.coord(0).to_string(), "target=(0,0,0) alpha=0 beta=0 radius=0");
    }
}

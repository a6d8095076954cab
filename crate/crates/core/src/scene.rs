//! Procedural road scenes paired with vehicle states.
//!
//! Each scene is a sky gradient above a horizon, grass below it, and an
//! asphalt road narrowing toward a vanishing point. The road bends with
//! the scene curvature and is shifted sideways by the vehicle's lane offset.
//! Solid white edge lines and a dashed centre line are painted on it, and
//! up to a few coloured rectangles stand on the road as obstacles.
//!
//! The paired state's `goal_dx` always has the same sign as the curvature,
//! so the navigation goal agrees with the rendered lane direction.

use crate::error::{Error, Result};
use crate::rng::{stream_key, StreamRng};
use crate::types::{ImageDims, ImageTensor, Sample, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub dims: ImageDims,
    /// Curvature is drawn from ±[0.1, 1]·`max_curvature`.
    pub max_curvature: f64,
    pub obstacles: (usize, usize),
    /// Brightness is drawn from [1 − lighting, 1].
    pub lighting: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(dims: ImageDims, seed: u64) -> Self {
        Self {
            dims,
            max_curvature: 1.0,
            obstacles: (0, 2),
            lighting: 0.4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.channels != 3 || self.dims.height < 8 || self.dims.width < 8 {
            return Err(Error::InvalidArgument(format!(
                "scenes need 3 channels and at least 8x8 pixels, got {:?}",
                self.dims
            )));
        }
        if !(self.max_curvature >= 0.0) || !(0.0..1.0).contains(&self.lighting) || self.obstacles.0 > self.obstacles.1 {
            return Err(Error::InvalidArgument("invalid scene ranges".into()));
        }
        Ok(())
    }
}

/// Geometry drawn for one scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneLayout {
    pub curvature: f64,
    /// Lateral vehicle offset in road half-widths, positive to the right.
    pub lane_offset: f64,
    pub brightness: f64,
}

const OBSTACLE_COLORS: [[f64; 3]; 4] = [[0.9, 0.1, 0.1], [0.95, 0.5, 0.05], [0.1, 0.2, 0.85], [0.95, 0.9, 0.1]];

struct Canvas {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Canvas {
    fn set(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        for (c, v) in rgb.iter().enumerate() {
            self.data[(c * self.h + y) * self.w + x] = *v;
        }
    }
}

/// Renders scene `index` of the dataset described by `spec`.
pub fn generate_scene(spec: &SceneSpec, index: u64) -> Result<(Sample, SceneLayout)> {
    spec.validate()?;
    let mut rng = StreamRng::new(spec.seed, stream_key(&[0x5C, index]));
    let (h, w) = (spec.dims.height, spec.dims.width);
    let sign = if rng.bit() { 1.0 } else { -1.0 };
    let curvature = sign * spec.max_curvature * rng.uniform_range(0.1, 1.0);
    let lane_offset = rng.uniform_range(-0.6, 0.6);
    let brightness = rng.uniform_range(1.0 - spec.lighting, 1.0);
    let n_obstacles = spec.obstacles.0 + rng.below(spec.obstacles.1 - spec.obstacles.0 + 1);

    let horizon = (h as f64 * 0.4).round() as usize;
    let wf = w as f64;
    let mut canvas = Canvas {
        h,
        w,
        data: vec![0.0; 3 * h * w],
    };
    for y in 0..horizon {
        let t = y as f64 / horizon.max(1) as f64;
        for x in 0..w {
            canvas.set(y, x, [0.45 + 0.3 * t, 0.6 + 0.25 * t, 0.9]);
        }
    }
    // t runs from 0 at the horizon to 1 at the bottom row
    let depth = |y: usize| (y + 1 - horizon) as f64 / (h - horizon) as f64;
    let centre = |t: f64| wf / 2.0 + curvature * 0.35 * wf * (1.0 - t).powi(2) - lane_offset * 0.4 * wf * t;
    let half_width = |t: f64| wf * (0.03 + 0.42 * t);
    for y in horizon..h {
        let t = depth(y);
        let (c, hw) = (centre(t), half_width(t));
        let line = (0.6 + 1.2 * t).max(1.0);
        let dash = ((1.0 - t) * 9.0).floor() as i64 % 2 == 0;
        for x in 0..w {
            let px = x as f64 + 0.5;
            let d = px - c;
            let rgb = if d.abs() > hw {
                [0.3, 0.55, 0.25]
            } else if (hw - d.abs()) < line || (dash && d.abs() < line * 0.5) {
                [0.95, 0.95, 0.92]
            } else {
                [0.38, 0.38, 0.4]
            };
            canvas.set(y, x, rgb);
        }
    }
    for _ in 0..n_obstacles {
        let t = rng.uniform_range(0.35, 0.95);
        let (c, hw) = (centre(t), half_width(t));
        let x_mid = c + rng.uniform_range(-0.6, 0.6) * hw;
        let ow = (hw * rng.uniform_range(0.3, 0.5)).max(1.0);
        let oh = (ow * rng.uniform_range(0.5, 0.9)).max(1.0);
        let y_bottom = horizon as f64 + t * (h - horizon) as f64;
        let color = OBSTACLE_COLORS[rng.below(OBSTACLE_COLORS.len())];
        let (y0, y1) = ((y_bottom - oh).max(0.0) as usize, (y_bottom as usize).min(h));
        let (x0, x1) = (
            (x_mid - ow / 2.0).max(0.0) as usize,
            ((x_mid + ow / 2.0).max(0.0) as usize).min(w),
        );
        for y in y0..y1 {
            for x in x0..x1 {
                canvas.set(y, x, color);
            }
        }
    }
    for v in &mut canvas.data {
        *v = (*v * brightness).clamp(0.0, 1.0);
    }
    let image = ImageTensor::new(3, h, w, canvas.data)?;

    let state = StateVector {
        speed: rng.uniform_range(0.0, 1.0),
        throttle: rng.uniform_range(0.0, 1.0),
        brake: if rng.uniform() < 0.2 { rng.uniform() } else { 0.0 },
        steer: rng.uniform_range(-0.3, 0.3),
        goal_dx: curvature * rng.uniform_range(0.5, 1.0),
        goal_dy: rng.uniform_range(0.3, 1.0),
    };
    let layout = SceneLayout {
        curvature,
        lane_offset,
        brightness,
    };
    Ok((Sample { image, state }, layout))
}

/// `count` scenes, index 0 upward. A longer dataset extends a shorter one.
pub fn generate_dataset(spec: &SceneSpec, count: usize) -> Result<Vec<Sample>> {
    generate_dataset_from(spec, 0, count)
}

/// Scenes `start..start + count`; disjoint ranges give disjoint splits.
pub fn generate_dataset_from(spec: &SceneSpec, start: u64, count: usize) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    (start..start + count as u64)
        .map(|i| generate_scene(spec, i).map(|(s, _)| s))
        .collect()
}

//! Spherical direction math shared by every pipeline stage.
//!
//! Convention: z points up, x points forward (yaw 0, pitch 0), yaw turns
//! counter-clockwise about z so yaw +90 is the y axis. Equirectangular maps
//! put yaw -180 at the left edge and pitch +90 on the top row.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default horizontal field of view in degrees.
pub const DEFAULT_H_FOV: f64 = 120.0;
/// Default vertical field of view in degrees.
pub const DEFAULT_V_FOV: f64 = 90.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("pitch {0} outside [-90, 90]")]
    PitchOutOfRange(f64),
    #[error("non-finite angle")]
    NonFinite,
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    PixelOutOfRange {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("smoothing window must be odd and >= 1 (got {0})")]
    InvalidWindow(usize),
    #[error("field of view {h_fov}x{v_fov} outside (0, 360] x (0, 180]")]
    InvalidFov { h_fov: f64, v_fov: f64 },
    #[error("viewing path is empty")]
    EmptyPath,
}

/// A unit vector on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction {
    /// Normalizes `(x, y, z)`. Returns `None` for a zero or non-finite vector.
    pub fn from_vector(x: f64, y: f64, z: f64) -> Option<Direction> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return None;
        }
        Some(Direction {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn forward() -> Direction {
        Direction {
            x: 1.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Yaw in degrees, normalized into [-180, 180).
    pub fn yaw(&self) -> f64 {
        normalize_yaw(self.y.atan2(self.x).to_degrees())
    }

    /// Pitch in degrees, in [-90, 90].
    pub fn pitch(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).asin().to_degrees()
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn negate(&self) -> Direction {
        Direction {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Renormalized mean of a set of directions. `None` when the vectors cancel.
    pub fn mean<'a, I>(dirs: I) -> Option<Direction>
    where
        I: IntoIterator<Item = &'a Direction>,
    {
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        for d in dirs {
            sx += d.x;
            sy += d.y;
            sz += d.z;
        }
        Direction::from_vector(sx, sy, sz)
    }

    /// Applies a row-major 3x3 rotation matrix.
    pub fn rotate(&self, m: &[[f64; 3]; 3]) -> Direction {
        let v = self.as_array();
        let r = |row: &[f64; 3]| row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        // Rotations preserve the norm up to rounding; renormalize to keep the invariant tight.
        Direction::from_vector(r(&m[0]), r(&m[1]), r(&m[2])).unwrap_or(*self)
    }
}

/// Wraps any yaw in degrees into [-180, 180).
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = (yaw + 180.0).rem_euclid(360.0) - 180.0;
    if y >= 180.0 {
        y - 360.0
    } else {
        y
    }
}

pub fn dir_from_angles(yaw: f64, pitch: f64) -> Result<Direction, GeometryError> {
    if !yaw.is_finite() || !pitch.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if !(-90.0..=90.0).contains(&pitch) {
        return Err(GeometryError::PitchOutOfRange(pitch));
    }
    let (yaw, pitch) = (normalize_yaw(yaw).to_radians(), pitch.to_radians());
    Ok(Direction {
        x: pitch.cos() * yaw.cos(),
        y: pitch.cos() * yaw.sin(),
        z: pitch.sin(),
    })
}

/// Great-circle angle between two directions, in degrees.
pub fn angular_distance(a: &Direction, b: &Direction) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Maps a pixel of an equirectangular image to the direction of its center.
pub fn pixel_to_direction(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> Result<Direction, GeometryError> {
    image_point_to_direction(x as f64, y as f64, width, height)
}

/// Like [`pixel_to_direction`] but for fractional pixel coordinates such as
/// region centroids. `x` may lie anywhere in `[-0.5, width - 0.5)`.
pub fn image_point_to_direction(
    x: f64,
    y: f64,
    width: usize,
    height: usize,
) -> Result<Direction, GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::EmptyImage { width, height });
    }
    let (w, h) = (width as f64, height as f64);
    if !(x.is_finite() && y.is_finite()) || x < -0.5 || x >= w || y < -0.5 || y > h - 0.5 {
        return Err(GeometryError::PixelOutOfRange {
            x,
            y,
            width,
            height,
        });
    }
    let yaw = ((x + 0.5) / w - 0.5) * 360.0;
    let pitch = ((0.5 - (y + 0.5) / h) * 180.0).clamp(-90.0, 90.0);
    dir_from_angles(yaw, pitch)
}

/// Inverse of [`pixel_to_direction`]: the pixel whose area contains `d`.
pub fn direction_to_pixel(
    d: &Direction,
    width: usize,
    height: usize,
) -> Result<(usize, usize), GeometryError> {
    if width == 0 || height == 0 {
        return Err(GeometryError::EmptyImage { width, height });
    }
    let (w, h) = (width as f64, height as f64);
    let px = ((d.yaw() / 360.0 + 0.5) * w).floor();
    let py = ((0.5 - d.pitch() / 180.0) * h).floor();
    let x = (px as i64).rem_euclid(width as i64) as usize;
    let y = (py.max(0.0) as usize).min(height - 1);
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fov {
    pub h_fov: f64,
    pub v_fov: f64,
}

impl Default for Fov {
    fn default() -> Self {
        Fov {
            h_fov: DEFAULT_H_FOV,
            v_fov: DEFAULT_V_FOV,
        }
    }
}

impl Fov {
    pub fn new(h_fov: f64, v_fov: f64) -> Result<Fov, GeometryError> {
        if !(h_fov > 0.0 && h_fov <= 360.0 && v_fov > 0.0 && v_fov <= 180.0) {
            return Err(GeometryError::InvalidFov { h_fov, v_fov });
        }
        Ok(Fov { h_fov, v_fov })
    }
}

/// A rectangular field of view centered on a viewing direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub center: Direction,
    pub fov: Fov,
}

impl Viewport {
    pub fn new(center: Direction, fov: Fov) -> Viewport {
        Viewport { center, fov }
    }

    pub fn with_default_fov(center: Direction) -> Viewport {
        Viewport::new(center, Fov::default())
    }

    /// Rotation taking the viewport center to the forward axis: undo the
    /// center yaw about z, then undo the center pitch about y.
    fn local_frame(&self) -> [[f64; 3]; 3] {
        let (yaw, pitch) = (
            self.center.y.atan2(self.center.x),
            self.center.z.clamp(-1.0, 1.0).asin(),
        );
        let (cy, sy) = (yaw.cos(), yaw.sin());
        let (cp, sp) = (pitch.cos(), pitch.sin());
        // R_y(pitch) * R_z(-yaw)
        [
            [cp * cy, cp * sy, sp],
            [-sy, cy, 0.0],
            [-sp * cy, -sp * sy, cp],
        ]
    }

    /// Yaw and pitch of `d` measured in the viewport's local frame.
    pub fn local_angles(&self, d: &Direction) -> (f64, f64) {
        let local = d.rotate(&self.local_frame());
        (
            local.y.atan2(local.x).to_degrees(),
            local.z.clamp(-1.0, 1.0).asin().to_degrees(),
        )
    }

    pub fn contains(&self, d: &Direction) -> bool {
        in_viewport(d, self)
    }

    /// Precomputed containment test for checking many directions against
    /// one viewport.
    pub fn containment(&self) -> Containment {
        Containment {
            rotation: self.local_frame(),
            half_h: self.fov.h_fov / 2.0 + CONTAINMENT_EPS,
            half_v: self.fov.v_fov / 2.0 + CONTAINMENT_EPS,
        }
    }
}

const CONTAINMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct Containment {
    rotation: [[f64; 3]; 3],
    half_h: f64,
    half_v: f64,
}

impl Containment {
    pub fn contains(&self, d: &Direction) -> bool {
        let m = &self.rotation;
        let v = d.as_array();
        let x = m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2];
        let y = m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2];
        let z = m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2];
        let pitch = z.clamp(-1.0, 1.0).asin().to_degrees();
        pitch.abs() <= self.half_v && y.atan2(x).to_degrees().abs() <= self.half_h
    }
}

pub fn in_viewport(d: &Direction, vp: &Viewport) -> bool {
    vp.containment().contains(d)
}

/// Frame-indexed track of viewing directions on the 1 fps grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewingPath {
    start_frame: usize,
    directions: Vec<Direction>,
}

impl ViewingPath {
    pub fn new(start_frame: usize, directions: Vec<Direction>) -> Result<Self, GeometryError> {
        if directions.is_empty() {
            return Err(GeometryError::EmptyPath);
        }
        Ok(ViewingPath {
            start_frame,
            directions,
        })
    }

    pub fn constant(start_frame: usize, len: usize, d: Direction) -> Result<Self, GeometryError> {
        ViewingPath::new(start_frame, vec![d; len])
    }

    pub fn start_frame(&self) -> usize {
        self.start_frame
    }

    /// Last covered frame, inclusive.
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.directions.len() - 1
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn at_frame(&self, frame: usize) -> Option<&Direction> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|i| self.directions.get(i))
    }

    pub fn same_span(&self, other: &ViewingPath) -> bool {
        self.start_frame == other.start_frame && self.len() == other.len()
    }
}

/// Centered moving average of unit vectors, renormalized. The window is
/// truncated at the path ends.
pub fn smooth_path(path: &ViewingPath, window: usize) -> Result<ViewingPath, GeometryError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(GeometryError::InvalidWindow(window));
    }
    let half = window / 2;
    let dirs = path.directions();
    let smoothed = (0..dirs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(dirs.len() - 1);
            // Opposing vectors in one window are the only way the mean vanishes; keep the input.
            Direction::mean(&dirs[lo..=hi]).unwrap_or(dirs[i])
        })
        .collect();
    ViewingPath::new(path.start_frame, smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn axis_convention() {
        let d = dir_from_angles(0.0, 0.0).unwrap();
        assert!(close(d.x(), 1.0, 1e-12) && close(d.y(), 0.0, 1e-12) && close(d.z(), 0.0, 1e-12));
        let d = dir_from_angles(90.0, 0.0).unwrap();
        assert!(close(d.x(), 0.0, 1e-12) && close(d.y(), 1.0, 1e-12));
        let d = dir_from_angles(0.0, 90.0).unwrap();
        assert!(close(d.z(), 1.0, 1e-12));
    }

    #[test]
    fn yaw_normalized() {
        let d = dir_from_angles(180.0, 0.0).unwrap();
        assert!(close(d.yaw(), -180.0, 1e-9));
        let d = dir_from_angles(270.0, 10.0).unwrap();
        assert!(close(d.yaw(), -90.0, 1e-9));
        assert!(close(d.pitch(), 10.0, 1e-9));
        assert_eq!(normalize_yaw(180.0), -180.0);
        assert_eq!(normalize_yaw(-180.0), -180.0);
    }

    #[test]
    fn pitch_out_of_range_is_rejected() {
        assert_eq!(
            dir_from_angles(0.0, 90.5),
            Err(GeometryError::PitchOutOfRange(90.5))
        );
        assert!(dir_from_angles(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn angular_distance_cases() {
        let a = dir_from_angles(30.0, 20.0).unwrap();
        assert!(close(angular_distance(&a, &a), 0.0, 1e-6));
        assert!(close(angular_distance(&a, &a.negate()), 180.0, 1e-9));
        let x = dir_from_angles(0.0, 0.0).unwrap();
        let z = dir_from_angles(0.0, 90.0).unwrap();
        assert!(close(angular_distance(&x, &z), 90.0, 1e-9));
    }

    #[test]
    fn pixel_mapping_examples() {
        let d = pixel_to_direction(32, 16, 64, 32).unwrap();
        // Pixel centers sit half a pixel off the exact center.
        assert!(close(d.yaw(), 360.0 / 64.0 / 2.0, 1e-9));
        assert!(close(d.pitch(), -180.0 / 32.0 / 2.0, 1e-9));

        let d = pixel_to_direction(0, 180, 720, 360).unwrap();
        assert!(close(d.yaw(), -179.75, 1e-9));
        let d = pixel_to_direction(360, 0, 720, 360).unwrap();
        assert!(close(d.pitch(), 89.75, 1e-9));

        assert_eq!(
            pixel_to_direction(0, 0, 0, 4),
            Err(GeometryError::EmptyImage {
                width: 0,
                height: 4
            })
        );
        assert!(pixel_to_direction(8, 0, 8, 4).is_err());
    }

    #[test]
    fn pixel_round_trip_on_small_grid() {
        for y in 0..4 {
            for x in 0..8 {
                let d = pixel_to_direction(x, y, 8, 4).unwrap();
                assert_eq!(direction_to_pixel(&d, 8, 4).unwrap(), (x, y));
            }
        }
    }

    #[test]
    fn viewport_edges() {
        let center = dir_from_angles(20.0, 10.0).unwrap();
        let vp = Viewport::with_default_fov(center);
        assert!(in_viewport(&center, &vp));

        let flat = Viewport::with_default_fov(Direction::forward());
        assert!(!in_viewport(&dir_from_angles(61.0, 0.0).unwrap(), &flat));
        assert!(in_viewport(&dir_from_angles(59.0, 0.0).unwrap(), &flat));
        assert!(!in_viewport(&dir_from_angles(0.0, 46.0).unwrap(), &flat));
        assert!(in_viewport(&dir_from_angles(0.0, -44.0).unwrap(), &flat));

        // Pure-pitch offsets from a tilted center are measured in the local frame.
        let tilted = Viewport::with_default_fov(dir_from_angles(0.0, 60.0).unwrap());
        assert!(!in_viewport(&dir_from_angles(0.0, 14.0).unwrap(), &tilted));
        assert!(in_viewport(&dir_from_angles(180.0, 76.0).unwrap(), &tilted));
    }

    #[test]
    fn full_sphere_viewport_accepts_all() {
        let vp = Viewport::new(
            dir_from_angles(-45.0, 30.0).unwrap(),
            Fov::new(360.0, 180.0).unwrap(),
        );
        for yaw in (-180..180).step_by(15) {
            for pitch in (-90..=90).step_by(15) {
                let d = dir_from_angles(yaw as f64, pitch as f64).unwrap();
                assert!(in_viewport(&d, &vp), "yaw {yaw} pitch {pitch}");
            }
        }
    }

    #[test]
    fn fov_bounds() {
        assert!(Fov::new(0.0, 90.0).is_err());
        assert!(Fov::new(120.0, 181.0).is_err());
        assert!(Fov::new(360.0, 180.0).is_ok());
    }

    #[test]
    fn smoothing_examples() {
        let d = dir_from_angles(40.0, -5.0).unwrap();
        let constant = ViewingPath::constant(3, 7, d).unwrap();
        let out = smooth_path(&constant, 5).unwrap();
        assert_eq!(out.start_frame(), 3);
        for o in out.directions() {
            assert!(angular_distance(o, &d) < 1e-6);
        }

        let single = ViewingPath::constant(0, 1, d).unwrap();
        assert_eq!(smooth_path(&single, 5).unwrap(), single);

        let three = ViewingPath::new(
            0,
            vec![
                dir_from_angles(0.0, 0.0).unwrap(),
                dir_from_angles(10.0, 0.0).unwrap(),
                dir_from_angles(0.0, 0.0).unwrap(),
            ],
        )
        .unwrap();
        let out = smooth_path(&three, 3).unwrap();
        // Vector mean of (1,0,0), (cos10, sin10, 0), (1,0,0): atan2(sin10, 2 + cos10).
        let expected = (10f64.to_radians().sin())
            .atan2(2.0 + 10f64.to_radians().cos())
            .to_degrees();
        assert!(close(expected, 3.3297, 1e-3));
        assert!(close(out.directions()[1].yaw(), expected, 1e-9));
        // The truncated end windows average frames 0-1 and 1-2.
        assert!(close(out.directions()[0].yaw(), 5.0, 1e-9));
    }

    #[test]
    fn even_window_rejected() {
        let p = ViewingPath::constant(0, 3, Direction::forward()).unwrap();
        assert_eq!(smooth_path(&p, 4), Err(GeometryError::InvalidWindow(4)));
        assert_eq!(smooth_path(&p, 0), Err(GeometryError::InvalidWindow(0)));
    }

    #[test]
    fn empty_path_rejected() {
        assert_eq!(ViewingPath::new(0, vec![]), Err(GeometryError::EmptyPath));
    }
}

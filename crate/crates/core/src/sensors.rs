//! Synthetic sensing: a pinhole camera that renders lane boundaries, a noisy
//! range-bearing sensor with a depth envelope, and a stand-in object detector
//! whose output passes through a confidence gate.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::world::{wrap_angle, Point2, Pose2D, Sign, SignKind, Track};

/// Closest valid depth reading (m).
pub const MIN_RANGE: f64 = 0.2;
/// Farthest valid depth reading (m).
pub const MAX_RANGE: f64 = 20.0;
/// Detections at or below this confidence are never published.
pub const CONFIDENCE_GATE: f64 = 0.8;

pub const LANE_COLOR: [u8; 3] = [255, 255, 0];
pub const GROUND_COLOR: [u8; 3] = [90, 90, 90];
pub const SKY_COLOR: [u8; 3] = [0, 0, 0];

/// Row-major RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    /// # Panics
    /// Panics if either dimension is zero.
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be non-zero");
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    /// Returns `None` when `pixels.len() != width * height` or a dimension is
    /// zero.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Option<Self> {
        (width >= 1 && height >= 1 && pixels.len() == width * height).then_some(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn row(&self, y: usize) -> &[[u8; 3]] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.pixels[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// Forward-looking pinhole camera mounted on the robot.
///
/// Image coordinates are continuous with pixel `(u, v)` covering
/// `[u, u + 1) x [v, v + 1)`; the optical axis passes through
/// `(width / 2, height / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Full horizontal field of view (rad), in `(0, PI)`.
    pub horizontal_fov: f64,
    /// Height of the optical centre above the ground (m).
    pub mount_height: f64,
    /// Downward tilt of the optical axis (rad).
    pub pitch: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            horizontal_fov: 110f64.to_radians(),
            mount_height: 0.3,
            pitch: 0.5,
        }
    }
}

impl CameraModel {
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.horizontal_fov / 2.0).tan()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn in_fov(&self, bearing: f64) -> bool {
        bearing.abs() <= self.horizontal_fov / 2.0
    }

    /// Ground-plane geometry of image row `v`: `(forward distance, metres per
    /// unit of normalised image x)`, or `None` above the horizon.
    fn ground_row(&self, v: usize) -> Option<(f64, f64)> {
        let (_, cy) = self.principal_point();
        let yc = (v as f64 + 0.5 - cy) / self.focal();
        let (sp, cp) = self.pitch.sin_cos();
        let denom = sp + yc * cp;
        if denom <= 1e-9 {
            return None;
        }
        let t = self.mount_height / denom;
        let forward = t * (cp - yc * sp);
        (forward > 0.0).then_some((forward, t))
    }

    /// Image column of a point at camera height seen at `bearing`.
    pub fn column_for_bearing(&self, bearing: f64) -> f64 {
        let (cx, _) = self.principal_point();
        cx - self.focal() * bearing.tan() / self.pitch.cos()
    }

    /// Inverse of [`CameraModel::column_for_bearing`].
    pub fn bearing_for_column(&self, u: f64) -> f64 {
        let (cx, _) = self.principal_point();
        ((cx - u) * self.pitch.cos() / self.focal()).atan()
    }

    /// Row on which points at camera height project (the horizon).
    pub fn horizon_row(&self) -> f64 {
        let (_, cy) = self.principal_point();
        cy - self.focal() * self.pitch.tan()
    }
}

/// Renders the forward camera view: black sky, grey ground, and both lane
/// boundaries as 3-pixel-wide yellow strokes.
pub fn render_camera(track: &Track, pose: &Pose2D, cam: &CameraModel) -> RasterImage {
    let mut img = RasterImage::new(cam.width, cam.height, SKY_COLOR);
    let (cx, _) = cam.principal_point();
    let f = cam.focal();

    let (left, right) = track.boundaries();
    let local: Vec<Vec<(f64, f64)>> = [left, right]
        .iter()
        .map(|line| line.iter().map(|p| pose.to_local(*p)).collect())
        .collect();

    let mut crossings = Vec::new();
    for v in 0..cam.height {
        let Some((forward, t)) = cam.ground_row(v) else {
            continue;
        };
        for u in 0..cam.width {
            img.set(u, v, GROUND_COLOR);
        }
        crossings.clear();
        for line in &local {
            for w in line.windows(2) {
                let ((fa, la), (fb, lb)) = (w[0], w[1]);
                if fa == fb || (fa - forward) * (fb - forward) > 0.0 {
                    continue;
                }
                let s = (forward - fa) / (fb - fa);
                crossings.push(la + s * (lb - la));
            }
        }
        for &lateral in &crossings {
            let col = cx - lateral * f / t;
            if !col.is_finite() {
                continue;
            }
            let k = col.floor();
            for du in -1..=1 {
                let u = k + du as f64;
                if u >= 0.0 && u < cam.width as f64 {
                    img.set(u as usize, v, LANE_COLOR);
                }
            }
        }
    }
    img
}

/// Standard deviations of range-bearing noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RangeBearingNoise {
    pub sigma_range: f64,
    pub sigma_bearing: f64,
}

/// A range-bearing reading in the sensor frame (bearing 0 = robot heading,
/// positive to the left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBearing {
    pub range: f64,
    pub bearing: f64,
    pub noise: RangeBearingNoise,
}

impl RangeBearing {
    pub fn exact(range: f64, bearing: f64) -> Self {
        Self {
            range,
            bearing,
            noise: RangeBearingNoise::default(),
        }
    }
}

/// Noise-free range and sensor-frame bearing from `pose` to `target`.
pub fn true_range_bearing(pose: &Pose2D, target: Point2) -> (f64, f64) {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    let range = (dx * dx + dy * dy).sqrt();
    let bearing = wrap_angle(dy.atan2(dx) - pose.psi);
    (range, bearing)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Simulates one depth/bearing reading of `sign`.
///
/// Two normal deviates are always drawn so the random stream advances
/// identically whether or not the reading is valid. Returns `None` when the
/// noisy range leaves `[MIN_RANGE, MAX_RANGE]` or the noisy bearing leaves
/// the camera's horizontal field of view.
pub fn sense_range_bearing<R: Rng + ?Sized>(
    pose: &Pose2D,
    sign: &Sign,
    noise: RangeBearingNoise,
    horizontal_fov: f64,
    rng: &mut R,
) -> Option<RangeBearing> {
    let (range, bearing) = true_range_bearing(pose, sign.position);
    let range = range + gaussian(rng, noise.sigma_range);
    let bearing = wrap_angle(bearing + gaussian(rng, noise.sigma_bearing));
    let in_range = (MIN_RANGE..=MAX_RANGE).contains(&range);
    (in_range && bearing.abs() <= horizontal_fov / 2.0).then_some(RangeBearing { range, bearing, noise })
}

/// Axis-aligned box in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub kind: SignKind,
    pub confidence: f64,
    pub bbox: BoundingBox,
    pub centroid: (f64, f64),
    /// Index of the ground-truth sign; simulation bookkeeping only.
    pub sign_index: usize,
}

/// Confidence is `floor + (1 - floor) * X` with `X ~ Beta(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfidenceModel {
    pub alpha: f64,
    pub beta: f64,
    pub floor: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        // About 93% of draws clear the 0.8 gate.
        Self {
            alpha: 8.0,
            beta: 2.0,
            floor: 0.5,
        }
    }
}

impl ConfidenceModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = Beta::new(self.alpha, self.beta).map(|d| d.sample(rng)).unwrap_or(1.0);
        self.floor + (1.0 - self.floor) * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub miss_rate: f64,
    pub confidence: ConfidenceModel,
    /// Bearing noise of the detected centroid (rad).
    pub sigma_bearing: f64,
    /// Physical sign width (m), sets the bounding-box size.
    pub sign_size: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            miss_rate: 0.0,
            confidence: ConfidenceModel::default(),
            sigma_bearing: 0.0,
            sign_size: 0.2,
        }
    }
}

pub fn passes_confidence_gate(confidence: f64) -> bool {
    confidence > CONFIDENCE_GATE
}

/// Every detection the simulated network produces this frame, before the
/// confidence gate.
///
/// Signs inside the field of view and the depth envelope are each detected
/// with probability `1 - miss_rate`. Each sign in view consumes exactly three
/// random draws (miss, confidence, centroid noise).
pub fn simulate_detector<R: Rng + ?Sized>(
    pose: &Pose2D,
    signs: &[Sign],
    cam: &CameraModel,
    cfg: &DetectorConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let f = cam.focal();
    let mut out = Vec::new();
    for (sign_index, sign) in signs.iter().enumerate() {
        let (range, bearing) = true_range_bearing(pose, sign.position);
        if !(MIN_RANGE..=MAX_RANGE).contains(&range) || !cam.in_fov(bearing) {
            continue;
        }
        let u_miss: f64 = rng.random();
        let confidence = cfg.confidence.sample(rng);
        let seen_bearing = bearing + gaussian(rng, cfg.sigma_bearing);
        if u_miss < cfg.miss_rate {
            continue;
        }
        let u = cam.column_for_bearing(seen_bearing);
        let v = cam.horizon_row();
        let half = (f * cfg.sign_size / (2.0 * range)).max(1.0);
        let bbox = BoundingBox {
            x_min: u - half,
            y_min: v - half,
            x_max: u + half,
            y_max: v + half,
        };
        out.push(Detection {
            kind: sign.kind,
            confidence,
            bbox,
            centroid: bbox.center(),
            sign_index,
        });
    }
    out
}

/// Detections that clear the confidence gate.
pub fn detect_signs<R: Rng + ?Sized>(
    pose: &Pose2D,
    signs: &[Sign],
    cam: &CameraModel,
    cfg: &DetectorConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let mut all = simulate_detector(pose, signs, cam, cfg, rng);
    all.retain(|d| passes_confidence_gate(d.confidence));
    all
}

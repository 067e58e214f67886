//! Lane detection: Gaussian blur, yellow HSV mask, region-of-interest mask,
//! standard Hough line transform, boundary pairing and lane-centre offset.
//!
//! Pixel coordinates in this module are integer indices: column `x`
//! (rightwards) and row `y` (downwards).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensors::RasterImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("blur kernel size must be odd, got {0}")]
    EvenKernel(usize),
    #[error("blur sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("region of interest polygon is degenerate")]
    DegeneratePolygon,
    #[error("invalid Hough parameters: {0}")]
    Hough(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Set pixels as `(x, y)`, row-major.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Normalised 1-D Gaussian weights for offsets `-r..=r`.
pub fn gaussian_kernel(kernel_size: usize, sigma: f64) -> Result<Vec<f64>, VisionError> {
    if kernel_size.is_multiple_of(2) {
        return Err(VisionError::EvenKernel(kernel_size));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(VisionError::Sigma(sigma));
    }
    let r = (kernel_size / 2) as i64;
    let mut w: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    Ok(w)
}

/// Separable Gaussian blur with edge replication. Intermediate values stay
/// in floating point; the result is rounded once.
pub fn gaussian_blur(img: &RasterImage, kernel_size: usize, sigma: f64) -> Result<RasterImage, VisionError> {
    let kernel = gaussian_kernel(kernel_size, sigma)?;
    if kernel_size == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let r = (kernel_size / 2) as isize;
    let clampi = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        let row = img.row(y);
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, wk) in kernel.iter().enumerate() {
                let p = row[clampi(x as isize + k as isize - r, w)];
                for c in 0..3 {
                    acc[c] += wk * p[c] as f64;
                }
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, wk) in kernel.iter().enumerate() {
                let p = horiz[clampi(y as isize + k as isize - r, h) * w + x];
                for c in 0..3 {
                    acc[c] += wk * p[c];
                }
            }
            out.push(acc.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    Ok(RasterImage::from_pixels(w, h, out).expect("dimensions preserved"))
}

/// RGB to `(hue degrees in [0, 360), saturation, value)`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

/// Hue window in degrees. `min > max` wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueRange {
    pub min: f64,
    pub max: f64,
}

impl HueRange {
    pub fn contains(&self, hue: f64) -> bool {
        if self.min <= self.max {
            hue >= self.min && hue <= self.max
        } else {
            hue >= self.min || hue <= self.max
        }
    }
}

pub fn yellow_mask(img: &RasterImage, hue: HueRange, s_min: f64, v_min: f64) -> BinaryMask {
    let w = img.width();
    let mut m = BinaryMask::new(w, img.height());
    for (i, p) in img.pixels().iter().enumerate() {
        let (h, s, v) = rgb_to_hsv(*p);
        if hue.contains(h) && s >= s_min && v >= v_min {
            m.bits[i] = true;
        }
    }
    m
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    if cross.abs() > 1e-9 {
        return false;
    }
    p.0 >= a.0.min(b.0) - 1e-9 && p.0 <= a.0.max(b.0) + 1e-9 && p.1 >= a.1.min(b.1) - 1e-9 && p.1 <= a.1.max(b.1) + 1e-9
}

/// Even-odd point-in-polygon test; points on an edge count as inside.
pub fn point_in_polygon(p: (f64, f64), polygon: &[(f64, f64)]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x_cross = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Clears every bit outside `polygon` (pixel index coordinates).
pub fn roi_mask(mask: &BinaryMask, polygon: &[(f64, f64)]) -> Result<BinaryMask, VisionError> {
    if polygon.len() < 3 || polygon.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(VisionError::DegeneratePolygon);
    }
    let area2: f64 = (0..polygon.len())
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % polygon.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    if area2.abs() < 1e-12 {
        return Err(VisionError::DegeneratePolygon);
    }
    let mut out = mask.clone();
    for y in 0..mask.height {
        for x in 0..mask.width {
            let i = y * mask.width + x;
            if out.bits[i] && !point_in_polygon((x as f64, y as f64), polygon) {
                out.bits[i] = false;
            }
        }
    }
    Ok(out)
}

/// Trapezoid spanning the full bottom row and the middle 60% of the centre
/// row.
pub fn default_roi(width: usize, height: usize) -> Vec<(f64, f64)> {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    let top = (height / 2) as f64;
    vec![(0.0, h), (w, h), (0.8 * w, top), (0.2 * w, top)]
}

/// A Hough line `rho = x cos(theta) + y sin(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSegmentPolar {
    pub rho: f64,
    pub theta: f64,
    pub votes: u32,
}

impl LineSegmentPolar {
    /// Column where the line crosses row `y`; `None` for horizontal lines.
    pub fn x_at_row(&self, y: f64) -> Option<f64> {
        let c = self.theta.cos();
        (c.abs() > 1e-12).then(|| (self.rho - y * self.theta.sin()) / c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughParams {
    pub rho_res: f64,
    pub theta_res: f64,
    pub threshold: u32,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            rho_res: 1.0,
            theta_res: 1f64.to_radians(),
            threshold: 20,
        }
    }
}

impl HoughParams {
    fn validate(&self) -> Result<(), VisionError> {
        if !(self.rho_res > 0.0) || !(self.theta_res > 0.0) || self.threshold < 1 {
            return Err(VisionError::Hough(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Geometry of the `(theta, rho)` voting grid for a `width x height` mask.
///
/// Theta cell `i` is `i * theta_res` for `i < theta_bins`, covering
/// `[0, PI)`. Rho cell `j` is `(j - rho_offset) * rho_res`, covering
/// `[-D, D]` with `D` the image diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughGrid {
    pub theta_bins: usize,
    pub rho_bins: usize,
    pub rho_offset: usize,
    pub rho_res: f64,
    pub theta_res: f64,
}

impl HoughGrid {
    pub fn new(width: usize, height: usize, params: &HoughParams) -> Self {
        let diag = ((width * width + height * height) as f64).sqrt();
        let rho_offset = (diag / params.rho_res).ceil() as usize;
        let theta_bins = ((PI / params.theta_res) - 1e-9).ceil().max(1.0) as usize;
        Self {
            theta_bins,
            rho_bins: 2 * rho_offset + 1,
            rho_offset,
            rho_res: params.rho_res,
            theta_res: params.theta_res,
        }
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.theta_res
    }

    pub fn rho(&self, j: usize) -> f64 {
        (j as f64 - self.rho_offset as f64) * self.rho_res
    }

    /// Rho cell receiving the vote of pixel `(x, y)` at angle `(cos, sin)`.
    pub fn rho_cell(&self, x: usize, y: usize, cos: f64, sin: f64) -> usize {
        let rho = x as f64 * cos + y as f64 * sin;
        ((rho / self.rho_res).round() as i64 + self.rho_offset as i64) as usize
    }
}

/// Vote counts indexed `[theta][rho]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughAccumulator {
    pub grid: HoughGrid,
    votes: Vec<u32>,
}

impl HoughAccumulator {
    pub fn vote(mask: &BinaryMask, params: &HoughParams) -> Result<Self, VisionError> {
        params.validate()?;
        let grid = HoughGrid::new(mask.width, mask.height, params);
        let trig: Vec<(f64, f64)> = (0..grid.theta_bins)
            .map(|i| (grid.theta(i).cos(), grid.theta(i).sin()))
            .collect();
        let mut votes = vec![0u32; grid.theta_bins * grid.rho_bins];
        for (x, y) in mask.points() {
            for (i, (c, s)) in trig.iter().enumerate() {
                votes[i * grid.rho_bins + grid.rho_cell(x, y, *c, *s)] += 1;
            }
        }
        Ok(Self { grid, votes })
    }

    pub fn get(&self, theta_idx: usize, rho_idx: usize) -> u32 {
        self.votes[theta_idx * self.grid.rho_bins + rho_idx]
    }

    /// Cells beating all eight neighbours, where equal votes are won by the
    /// lower `(theta, rho)` index. Sorted by votes descending, then index.
    pub fn peaks(&self, threshold: u32) -> Vec<(usize, usize, u32)> {
        let (nt, nr) = (self.grid.theta_bins as isize, self.grid.rho_bins as isize);
        let mut out = Vec::new();
        for i in 0..nt {
            for j in 0..nr {
                let v = self.get(i as usize, j as usize);
                if v < threshold {
                    continue;
                }
                let mut is_peak = true;
                'nbr: for di in -1..=1isize {
                    for dj in -1..=1isize {
                        let (ni, nj) = (i + di, j + dj);
                        if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= nt || nj >= nr {
                            continue;
                        }
                        let nv = self.get(ni as usize, nj as usize);
                        if nv > v || (nv == v && (ni, nj) < (i, j)) {
                            is_peak = false;
                            break 'nbr;
                        }
                    }
                }
                if is_peak {
                    out.push((i as usize, j as usize, v));
                }
            }
        }
        out.sort_by(|a, b| b.2.cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        out
    }
}

/// Standard Hough line transform over the set bits of `mask`.
pub fn hough_lines(mask: &BinaryMask, params: &HoughParams) -> Result<Vec<LineSegmentPolar>, VisionError> {
    let acc = HoughAccumulator::vote(mask, params)?;
    Ok(acc
        .peaks(params.threshold)
        .into_iter()
        .map(|(i, j, votes)| LineSegmentPolar {
            rho: acc.grid.rho(j),
            theta: acc.grid.theta(i),
            votes,
        })
        .collect())
}

/// Lines within this angle of horizontal cannot be lane boundaries.
pub const NEAR_HORIZONTAL: f64 = 0.1;

/// Splits lines into left/right candidates by their intercept at
/// `reference_row` relative to `image_width / 2`; the most-voted candidate
/// on each side wins (first in input order on ties).
pub fn classify_boundaries(
    lines: &[LineSegmentPolar],
    image_width: usize,
    reference_row: usize,
) -> (Option<LineSegmentPolar>, Option<LineSegmentPolar>) {
    let half = image_width as f64 / 2.0;
    let mut left: Option<LineSegmentPolar> = None;
    let mut right: Option<LineSegmentPolar> = None;
    for line in lines {
        if (line.theta - FRAC_PI_2).abs() < NEAR_HORIZONTAL {
            continue;
        }
        let Some(x) = line.x_at_row(reference_row as f64) else {
            continue;
        };
        let slot = if x < half { &mut left } else { &mut right };
        if slot.is_none_or(|best| line.votes > best.votes) {
            *slot = Some(*line);
        }
    }
    (left, right)
}

/// `(x_left + x_right) / 2 - image_width / 2` at `reference_row`; positive
/// when the lane centre lies right of the image centre.
pub fn center_offset(
    left: Option<&LineSegmentPolar>,
    right: Option<&LineSegmentPolar>,
    image_width: usize,
    reference_row: usize,
) -> Option<f64> {
    let y = reference_row as f64;
    let xl = left?.x_at_row(y)?;
    let xr = right?.x_at_row(y)?;
    let off = (xl + xr) / 2.0 - image_width as f64 / 2.0;
    off.is_finite().then_some(off)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneObservation {
    pub left: Option<LineSegmentPolar>,
    pub right: Option<LineSegmentPolar>,
    /// `None` when either boundary is missing.
    pub center_offset: Option<f64>,
}

impl LaneObservation {
    pub fn is_valid(&self) -> bool {
        self.center_offset.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisionConfig {
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub hue_min: f64,
    pub hue_max: f64,
    pub s_min: f64,
    pub v_min: f64,
    /// Polygon in pixel coordinates; `None` selects [`default_roi`].
    pub roi: Option<Vec<[f64; 2]>>,
    pub rho_res: f64,
    pub theta_res_deg: f64,
    pub hough_threshold: u32,
    /// Row for intercepts and the midpoint; `None` selects the bottom row.
    pub reference_row: Option<usize>,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            blur_kernel: 5,
            blur_sigma: 1.0,
            hue_min: 40.0,
            hue_max: 80.0,
            s_min: 0.4,
            v_min: 0.4,
            roi: None,
            rho_res: 1.0,
            theta_res_deg: 1.0,
            hough_threshold: 20,
            reference_row: None,
        }
    }
}

impl VisionConfig {
    pub fn hough(&self) -> HoughParams {
        HoughParams {
            rho_res: self.rho_res,
            theta_res: self.theta_res_deg.to_radians(),
            threshold: self.hough_threshold,
        }
    }

    pub fn hue(&self) -> HueRange {
        HueRange {
            min: self.hue_min,
            max: self.hue_max,
        }
    }

    pub fn roi_polygon(&self, width: usize, height: usize) -> Vec<(f64, f64)> {
        match &self.roi {
            Some(p) => p.iter().map(|v| (v[0], v[1])).collect(),
            None => default_roi(width, height),
        }
    }

    pub fn reference_row(&self, height: usize) -> usize {
        self.reference_row.unwrap_or(height - 1).min(height - 1)
    }
}

/// Intermediate products of one pass of the lane pipeline.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub blurred: RasterImage,
    pub color_mask: BinaryMask,
    pub roi_mask: BinaryMask,
    pub lines: Vec<LineSegmentPolar>,
    pub observation: LaneObservation,
}

/// Blur, colour mask, ROI mask, Hough, boundary pairing, offset.
pub fn process_frame(img: &RasterImage, cfg: &VisionConfig) -> Result<FrameAnalysis, VisionError> {
    let (w, h) = (img.width(), img.height());
    let blurred = gaussian_blur(img, cfg.blur_kernel, cfg.blur_sigma)?;
    let color_mask = yellow_mask(&blurred, cfg.hue(), cfg.s_min, cfg.v_min);
    let roi = roi_mask(&color_mask, &cfg.roi_polygon(w, h))?;
    let lines = hough_lines(&roi, &cfg.hough())?;
    let row = cfg.reference_row(h);
    let (left, right) = classify_boundaries(&lines, w, row);
    let offset = center_offset(left.as_ref(), right.as_ref(), w, row);
    Ok(FrameAnalysis {
        blurred,
        color_mask,
        roi_mask: roi,
        lines,
        observation: LaneObservation {
            left,
            right,
            center_offset: offset,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(rho: f64, theta: f64, votes: u32) -> LineSegmentPolar {
        LineSegmentPolar { rho, theta, votes }
    }

    #[test]
    fn blur_identity_kernel() {
        let img = RasterImage::from_pixels(3, 2, (0..6).map(|i| [i * 40, 255 - i * 40, 7]).collect()).unwrap();
        assert_eq!(gaussian_blur(&img, 1, 0.5).unwrap(), img);
    }

    #[test]
    fn blur_uniform_image() {
        let img = RasterImage::new(9, 7, [90, 90, 90]);
        assert_eq!(gaussian_blur(&img, 5, 1.3).unwrap(), img);
    }

    #[test]
    fn blur_impulse_center_weight() {
        // Oracle: 2-D weight at the origin is g(0)^2 / (sum_i g(i))^2 with
        // g(i) = exp(-i^2 / (2 sigma^2)), i in {-1, 0, 1}.
        let sigma: f64 = 0.8;
        let g1 = (-1.0 / (2.0 * sigma * sigma)).exp();
        let w00 = 1.0 / ((1.0 + 2.0 * g1) * (1.0 + 2.0 * g1));
        let expected = (255.0 * w00).round() as u8;
        assert_eq!(expected, 69);

        let mut img = RasterImage::new(5, 5, [0, 0, 0]);
        img.set(2, 2, [255, 255, 255]);
        let out = gaussian_blur(&img, 3, sigma).unwrap();
        assert_eq!(out.get(2, 2), [expected; 3]);
        // Corner weight g1^2 / norm.
        let corner = (255.0 * g1 * g1 * w00).round() as u8;
        assert_eq!(out.get(1, 1)[0], corner);
    }

    #[test]
    fn blur_rejects_bad_parameters() {
        let img = RasterImage::new(3, 3, [0, 0, 0]);
        assert_eq!(gaussian_blur(&img, 4, 1.0), Err(VisionError::EvenKernel(4)));
        assert!(matches!(gaussian_blur(&img, 3, 0.0), Err(VisionError::Sigma(_))));
    }

    #[test]
    fn hsv_examples() {
        assert_eq!(rgb_to_hsv([255, 255, 0]), (60.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv([0, 0, 0]).2, 0.0);
        assert_eq!(rgb_to_hsv([90, 90, 90]).1, 0.0);
        assert_eq!(rgb_to_hsv([255, 0, 0]).0, 0.0);
        assert_eq!(rgb_to_hsv([0, 0, 255]).0, 240.0);
        assert_eq!(rgb_to_hsv([255, 0, 128]).0.round(), 330.0);
    }

    #[test]
    fn yellow_mask_examples() {
        let img = RasterImage::from_pixels(3, 1, vec![[255, 255, 0], [0, 0, 0], [90, 90, 90]]).unwrap();
        let cfg = VisionConfig::default();
        let m = yellow_mask(&img, cfg.hue(), cfg.s_min, cfg.v_min);
        assert!(m.get(0, 0));
        assert!(!m.get(1, 0));
        assert!(!m.get(2, 0));
    }

    #[test]
    fn hue_range_wraps() {
        let r = HueRange { min: 340.0, max: 20.0 };
        assert!(r.contains(350.0) && r.contains(5.0) && !r.contains(60.0));
    }

    #[test]
    fn roi_full_rectangle_is_identity() {
        let m = BinaryMask::from_fn(8, 6, |x, y| (x + y) % 3 == 0);
        let rect = [(0.0, 0.0), (7.0, 0.0), (7.0, 5.0), (0.0, 5.0)];
        assert_eq!(roi_mask(&m, &rect).unwrap(), m);
    }

    #[test]
    fn roi_without_set_bits_clears() {
        let m = BinaryMask::from_fn(8, 6, |x, _| x < 2);
        let tri = [(4.0, 1.0), (7.0, 1.0), (6.0, 4.0)];
        assert_eq!(roi_mask(&m, &tri).unwrap().count(), 0);
    }

    #[test]
    fn default_roi_clears_upper_half() {
        let m = BinaryMask::from_fn(160, 120, |_, _| true);
        let out = roi_mask(&m, &default_roi(160, 120)).unwrap();
        for y in 0..60 {
            for x in 0..160 {
                assert!(!out.get(x, y));
            }
        }
        assert!(out.get(0, 119) && out.get(159, 119) && out.get(80, 60));
    }

    #[test]
    fn roi_rejects_degenerate() {
        let m = BinaryMask::new(4, 4);
        assert_eq!(
            roi_mask(&m, &[(0.0, 0.0), (1.0, 1.0)]),
            Err(VisionError::DegeneratePolygon)
        );
        assert_eq!(
            roi_mask(&m, &[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]),
            Err(VisionError::DegeneratePolygon)
        );
    }

    #[test]
    fn polygon_boundary_counts_inside() {
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        assert!(point_in_polygon((2.0, 1.0), &sq));
        assert!(point_in_polygon((0.0, 0.0), &sq));
        assert!(point_in_polygon((1.0, 1.0), &sq));
        assert!(!point_in_polygon((2.1, 1.0), &sq));
    }

    #[test]
    fn hough_vertical_line() {
        let m = BinaryMask::from_fn(11, 11, |x, _| x == 5);
        let lines = hough_lines(
            &m,
            &HoughParams {
                threshold: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let top = lines[0];
        assert!((top.rho - 5.0).abs() <= 1.0);
        assert!(top.theta.abs() <= 1f64.to_radians());
        assert_eq!(top.votes, 11);
    }

    #[test]
    fn hough_horizontal_line() {
        // On a narrow mask neighbouring angles tie on the full vote count and
        // the lowest angle wins, so use a camera-sized frame.
        let m = BinaryMask::from_fn(160, 120, |_, y| y == 7);
        let lines = hough_lines(
            &m,
            &HoughParams {
                threshold: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let top = lines[0];
        assert!((top.rho - 7.0).abs() <= 1.0);
        assert!((top.theta - FRAC_PI_2).abs() <= 1f64.to_radians());
        assert_eq!(top.votes, 160);
    }

    #[test]
    fn hough_empty_and_bad_params() {
        let m = BinaryMask::new(5, 5);
        assert!(hough_lines(&m, &HoughParams::default()).unwrap().is_empty());
        assert!(hough_lines(
            &m,
            &HoughParams {
                rho_res: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(hough_lines(
            &m,
            &HoughParams {
                threshold: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn hough_grid_shape() {
        let g = HoughGrid::new(160, 120, &HoughParams::default());
        assert_eq!(g.theta_bins, 180);
        assert_eq!(g.rho_offset, 200);
        assert_eq!(g.rho(200), 0.0);
    }

    #[test]
    fn classify_examples() {
        // Vertical lines: x-intercept equals rho.
        let a = line(20.0, 0.0, 40);
        let b = line(80.0, 0.0, 35);
        let (l, r) = classify_boundaries(&[a, b], 100, 99);
        assert_eq!((l, r), (Some(a), Some(b)));

        let (l, r) = classify_boundaries(&[a], 100, 99);
        assert_eq!((l, r), (Some(a), None));

        let weak = line(30.0, 0.0, 30);
        let strong = line(25.0, 0.0, 50);
        let (l, _) = classify_boundaries(&[weak, strong], 100, 99);
        assert_eq!(l, Some(strong));

        let flat = line(50.0, FRAC_PI_2 - 0.05, 500);
        assert_eq!(classify_boundaries(&[flat], 100, 99), (None, None));
    }

    #[test]
    fn center_offset_examples() {
        let v = |x: f64| line(x, 0.0, 30);
        assert_eq!(center_offset(Some(&v(20.0)), Some(&v(80.0)), 100, 10), Some(0.0));
        assert_eq!(center_offset(Some(&v(40.0)), Some(&v(90.0)), 100, 10), Some(15.0));
        assert_eq!(center_offset(Some(&v(0.0)), Some(&v(60.0)), 100, 10), Some(-20.0));
        assert_eq!(center_offset(Some(&v(0.0)), None, 100, 10), None);
    }
}

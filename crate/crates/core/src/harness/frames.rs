//! Binary Netpbm output of camera frames (PPM) and masks (PGM).

use std::io;
use std::path::Path;

use super::episode::FrameView;
use crate::sensors::RasterImage;
use crate::vision::BinaryMask;

pub fn encode_ppm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().flatten());
    out
}

/// Set pixels are written as 255, clear ones as 0.
pub fn encode_pgm(mask: &BinaryMask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            out.push(if mask.get(x, y) { 255 } else { 0 });
        }
    }
    out
}

/// Writes `camera_NNNNN.ppm`, `color_NNNNN.pgm` and `roi_NNNNN.pgm` for one
/// tick into `dir`.
pub fn dump_frame(dir: &Path, view: &FrameView) -> io::Result<()> {
    let t = view.tick;
    std::fs::write(dir.join(format!("camera_{t:05}.ppm")), encode_ppm(view.camera))?;
    std::fs::write(
        dir.join(format!("color_{t:05}.pgm")),
        encode_pgm(&view.analysis.color_mask),
    )?;
    std::fs::write(dir.join(format!("roi_{t:05}.pgm")), encode_pgm(&view.analysis.roi_mask))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_layout() {
        let mut img = RasterImage::new(2, 1, [0, 0, 0]);
        img.set(1, 0, [1, 2, 3]);
        assert_eq!(encode_ppm(&img), b"P6\n2 1\n255\n\x00\x00\x00\x01\x02\x03");
    }

    #[test]
    fn pgm_layout() {
        let m = BinaryMask::from_fn(3, 2, |x, y| x == y);
        assert_eq!(encode_pgm(&m), b"P5\n3 2\n255\n\xff\x00\x00\x00\xff\x00");
    }
}

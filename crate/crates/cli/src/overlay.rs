//! End-systolic overlays: reference and predicted landmarks on the image.

use std::path::Path;

use myoinr_core::{Image, Point};

use crate::error::{CliError, CliResult};

/// Fixed point-class palette (RGB).
pub const PALETTE: [[u8; 3]; 8] = [
    [0, 0, 0],
    [255, 255, 255],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
];
pub const REFERENCE_CLASS: usize = 3;
pub const PREDICTED_CLASS: usize = 2;
pub const SCALE: usize = 4;

/// RGB pixels of the overlay, `SCALE` times the image size per side.
pub fn overlay_rgb(image: &Image, layers: &[(&[Point], usize)]) -> (usize, Vec<u8>) {
    let n = image.size();
    let side = n * SCALE;
    let mut rgb = vec![0u8; side * side * 3];
    for row in 0..side {
        for col in 0..side {
            let v = (image.get(row / SCALE, col / SCALE).clamp(0.0, 1.0) * 255.0).round() as u8;
            rgb[(row * side + col) * 3..][..3].copy_from_slice(&[v, v, v]);
        }
    }
    for &(points, class) in layers {
        let color = PALETTE[class % PALETTE.len()];
        for p in points {
            let cx = ((p[0] + 0.5) * SCALE as f64).floor() as i64;
            let cy = ((p[1] + 0.5) * SCALE as f64).floor() as i64;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (cx + dx, cy + dy);
                    if x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side {
                        rgb[(y as usize * side + x as usize) * 3..][..3].copy_from_slice(&color);
                    }
                }
            }
        }
    }
    (side, rgb)
}

pub fn encode_png(side: usize, rgb: &[u8]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, side as u32, side as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| CliError::data(e.to_string()))?;
        writer
            .write_image_data(rgb)
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    Ok(out)
}

pub fn write_overlay(
    path: &Path,
    image: &Image,
    reference: &[Point],
    predicted: &[Point],
) -> CliResult<()> {
    let (side, rgb) = overlay_rgb(
        image,
        &[(reference, REFERENCE_CLASS), (predicted, PREDICTED_CLASS)],
    );
    let bytes = encode_png(side, &rgb)?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_drawn_in_palette_colors() {
        let image = Image::new(4, vec![0.5; 16]).unwrap();
        let (side, rgb) = overlay_rgb(&image, &[(&[[1.0, 2.0]], REFERENCE_CLASS)]);
        assert_eq!(side, 16);
        let px = |x: usize, y: usize| &rgb[(y * side + x) * 3..][..3];
        assert_eq!(px(6, 10), &PALETTE[REFERENCE_CLASS]);
        assert_eq!(px(0, 0), &[128, 128, 128]);
        let bytes = encode_png(side, &rgb).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}

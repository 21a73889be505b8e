//! Static PNG emission: field heatmaps with min/max annotations and simple
//! cross-section line plots. Rendering is deterministic; a fixed diverging
//! colormap (blue through white to red, symmetric about zero) is used for
//! all heatmaps.

use crate::data::atomic_write;
use crate::error::{Error, Result};
use crate::grid::Field;
use std::path::Path;

/// Pixel scale applied to heatmaps so 64-node grids stay legible.
const HEATMAP_SCALE: u32 = 4;
/// Text strip height under the heatmap.
const STRIP_H: u32 = 12;

/// Blue-white-red diverging map over [-m, m] where m = max |value|.
fn diverging(v: f64, m: f64) -> [u8; 3] {
    if m == 0.0 {
        return [255, 255, 255];
    }
    let t = (v / m).clamp(-1.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s) as u8;
    if t < 0.0 {
        let s = 1.0 + t; // 0 at -1, 1 at 0
        [lerp(40.0, 255.0, s), lerp(60.0, 255.0, s), lerp(180.0, 255.0, s)]
    } else {
        let s = 1.0 - t;
        [lerp(200.0, 255.0, s), lerp(40.0, 255.0, s), lerp(40.0, 255.0, s)]
    }
}

// 3x5 bitmap glyphs for the characters that appear in the annotations.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '+' => [0b000, 0b010, 0b111, 0b010, 0b000],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        'e' => [0b000, 0b111, 0b111, 0b100, 0b111],
        'm' => [0b000, 0b110, 0b111, 0b101, 0b101],
        'a' => [0b000, 0b011, 0b101, 0b101, 0b011],
        'x' => [0b000, 0b101, 0b010, 0b010, 0b101],
        'i' => [0b010, 0b000, 0b010, 0b010, 0b010],
        'n' => [0b000, 0b110, 0b101, 0b101, 0b101],
        '=' => [0b000, 0b111, 0b000, 0b111, 0b000],
        ' ' => [0; 5],
        _ => [0b111, 0b111, 0b111, 0b111, 0b111],
    }
}

fn draw_text(img: &mut image::RgbImage, x0: u32, y0: u32, text: &str) {
    let mut x = x0;
    for c in text.chars() {
        let g = glyph(c);
        for (row, bits) in g.iter().enumerate() {
            for col in 0..3u32 {
                if bits & (0b100 >> col) != 0 {
                    let (px, py) = (x + col, y0 + row as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, image::Rgb([0, 0, 0]));
                    }
                }
            }
        }
        x += 4;
    }
}

/// Render a field as a heatmap PNG with `min=... max=...` annotated below.
/// Axis 0 runs left to right, axis 1 bottom to top.
pub fn heatmap(field: &Field, path: &Path) -> Result<()> {
    let spec = field.spec();
    let m = field.linf_norm();
    let (w, h) = (
        spec.nx as u32 * HEATMAP_SCALE,
        spec.ny as u32 * HEATMAP_SCALE,
    );
    let mut img = image::RgbImage::from_pixel(w, h + STRIP_H, image::Rgb([255, 255, 255]));
    for i in 0..spec.nx {
        for j in 0..spec.ny {
            let c = diverging(field.get(i, j), m);
            for dx in 0..HEATMAP_SCALE {
                for dy in 0..HEATMAP_SCALE {
                    let px = i as u32 * HEATMAP_SCALE + dx;
                    let py = h - 1 - (j as u32 * HEATMAP_SCALE + dy);
                    img.put_pixel(px, py, image::Rgb(c));
                }
            }
        }
    }
    let min = field.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = field.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    draw_text(&mut img, 2, h + 3, &format!("min={min:+.3e} max={max:+.3e}"));
    encode_png(&img, path)
}

/// Render 1D profiles as a polyline plot. Each series is (label, values);
/// the first series is blue, the second red, further ones grey.
pub fn profile_plot(series: &[(&str, &[f64])], path: &Path) -> Result<()> {
    if series.is_empty() || series.iter().any(|(_, v)| v.len() < 2) {
        return Err(Error::InvalidParameter(
            "profile plot needs at least one series of >= 2 points".into(),
        ));
    }
    let (w, h) = (640u32, 400u32);
    let margin = 24u32;
    let mut img = image::RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
    let lo = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let colors = [
        image::Rgb([30u8, 80, 200]),
        image::Rgb([200u8, 40, 40]),
        image::Rgb([120u8, 120, 120]),
    ];
    // Axes.
    for x in margin..w - margin {
        img.put_pixel(x, h - margin, image::Rgb([0, 0, 0]));
    }
    for y in margin..h - margin {
        img.put_pixel(margin, y, image::Rgb([0, 0, 0]));
    }
    let plot_w = (w - 2 * margin) as f64;
    let plot_h = (h - 2 * margin) as f64;
    for (si, (_, values)) in series.iter().enumerate() {
        let color = colors[si.min(colors.len() - 1)];
        let n = values.len();
        let to_px = |k: usize, v: f64| -> (i64, i64) {
            let x = margin as f64 + plot_w * k as f64 / (n - 1) as f64;
            let y = (h - margin) as f64 - plot_h * (v - lo) / span;
            (x as i64, y as i64)
        };
        for k in 0..n - 1 {
            let (x0, y0) = to_px(k, values[k]);
            let (x1, y1) = to_px(k + 1, values[k + 1]);
            draw_line(&mut img, x0, y0, x1, y1, color);
        }
    }
    draw_text(&mut img, margin + 2, 4, &format!("min={lo:+.3e} max={hi:+.3e}"));
    encode_png(&img, path)
}

fn draw_line(img: &mut image::RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, c: image::Rgb<u8>) {
    // Bresenham.
    let (mut x, mut y) = (x0, y0);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, c);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn encode_png(img: &image::RgbImage, path: &Path) -> Result<()> {
    let mut bytes: Vec<u8> = Vec::new();
    img.write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageFormat::Png,
    )
    .map_err(|e| Error::Format(format!("png encoding failed: {e}")))?;
    atomic_write(path, &bytes)
}

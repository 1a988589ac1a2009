//! North-up landmark map images and their PPM/PNG encodings.

mod font;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point2, Pose};
use crate::mapping::{Occupancy, OccupancyGrid};
use crate::memory::{Landmark, LandmarkCategory, MemoryBank};

pub use font::{glyph, GLYPH_HEIGHT, GLYPH_WIDTH};

pub const IMAGE_WIDTH: usize = 640;
/// Pixels around the map area, wide enough for the compass letters.
pub const BORDER: usize = 20;
pub const FONT_SCALE: usize = 2;
pub const GLYPH_RADIUS: f64 = 6.0;
/// World margin (m) around the explored area and landmarks.
pub const MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

pub const UNKNOWN: Rgb = Rgb(160, 160, 160);
pub const FREE: Rgb = Rgb(255, 255, 255);
pub const OCCUPIED: Rgb = Rgb(0, 0, 0);
pub const BACKGROUND: Rgb = Rgb(255, 255, 255);
pub const TEXT: Rgb = Rgb(0, 0, 0);
pub const TRAJECTORY: Rgb = Rgb(200, 0, 200);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegendEntry {
    pub name: &'static str,
    pub icon: char,
    pub color: Rgb,
}

pub const ROBOT_LEGEND: LegendEntry = LegendEntry {
    name: "robot",
    icon: '▲',
    color: Rgb(220, 20, 20),
};

pub fn legend(category: LandmarkCategory) -> LegendEntry {
    match category {
        LandmarkCategory::Door => LegendEntry {
            name: "door",
            icon: '▉',
            color: Rgb(139, 69, 19),
        },
        LandmarkCategory::Sign => LegendEntry {
            name: "sign",
            icon: '◆',
            color: Rgb(30, 90, 220),
        },
        LandmarkCategory::Person => LegendEntry {
            name: "person",
            icon: '●',
            color: Rgb(20, 160, 60),
        },
        LandmarkCategory::Frontier => LegendEntry {
            name: "frontier",
            icon: '★',
            color: Rgb(255, 140, 0),
        },
    }
}

/// Where a landmark's index was printed (top-left corner of the text).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPlacement {
    pub index: u32,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, top row first.
    pub pixels: Vec<u8>,
    /// Pixels per meter.
    pub scale: f64,
    /// World x at the left edge of the map area.
    pub min_x: f64,
    /// World y at the top edge of the map area.
    pub max_y: f64,
    pub border: usize,
    pub labels: Vec<LabelPlacement>,
}

impl MapImage {
    pub fn blank(width: usize, height: usize, fill: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&[fill.0, fill.1, fill.2]);
        }
        Self {
            width,
            height,
            pixels,
            scale: 1.0,
            min_x: 0.0,
            max_y: 0.0,
            border: 0,
            labels: Vec::new(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        Rgb(self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.pixels[i..i + 3].copy_from_slice(&[color.0, color.1, color.2]);
        }
    }

    fn set_signed(&mut self, x: i64, y: i64, color: Rgb) {
        if x >= 0 && y >= 0 {
            self.set(x as usize, y as usize, color);
        }
    }

    /// Continuous pixel coordinates of a world point (x right, y down).
    pub fn world_to_pixel(&self, p: Point2) -> (f64, f64) {
        (
            self.border as f64 + (p.x - self.min_x) * self.scale,
            self.border as f64 + (self.max_y - p.y) * self.scale,
        )
    }

    pub fn pixel_to_world(&self, px: f64, py: f64) -> Point2 {
        Point2::new(
            self.min_x + (px - self.border as f64) / self.scale,
            self.max_y - (py - self.border as f64) / self.scale,
        )
    }
}

fn desaturate(c: Rgb) -> Rgb {
    let l = 0.299 * f64::from(c.0) + 0.587 * f64::from(c.1) + 0.114 * f64::from(c.2);
    let half = |v: u8| (l + 0.5 * (f64::from(v) - l)).round().clamp(0.0, 255.0) as u8;
    Rgb(half(c.0), half(c.1), half(c.2))
}

fn fill_where(img: &mut MapImage, cx: f64, cy: f64, radius: f64, color: Rgb, inside: impl Fn(f64, f64) -> bool) {
    let (x0, x1) = ((cx - radius).floor() as i64, (cx + radius).ceil() as i64);
    let (y0, y1) = ((cy - radius).floor() as i64, (cy + radius).ceil() as i64);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if inside(dx, dy) {
                img.set_signed(x, y, color);
            }
        }
    }
}

/// Even-odd point-in-polygon.
fn in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn draw_category(img: &mut MapImage, category: LandmarkCategory, cx: f64, cy: f64, color: Rgb) {
    let r = GLYPH_RADIUS;
    match category {
        LandmarkCategory::Door => fill_where(img, cx, cy, r, color, |dx, dy| dx.abs() <= r && dy.abs() <= r),
        LandmarkCategory::Sign => fill_where(img, cx, cy, r + 1.0, color, |dx, dy| dx.abs() + dy.abs() <= r + 1.0),
        LandmarkCategory::Person => fill_where(img, cx, cy, r, color, |dx, dy| dx * dx + dy * dy <= r * r),
        LandmarkCategory::Frontier => {
            let star: Vec<(f64, f64)> = (0..10)
                .map(|k| {
                    let radius = if k % 2 == 0 { r + 1.5 } else { (r + 1.5) * 0.45 };
                    let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
                    (radius * a.cos(), radius * a.sin())
                })
                .collect();
            fill_where(img, cx, cy, r + 2.0, color, |dx, dy| in_polygon(&star, dx, dy));
        }
    }
}

fn draw_robot(img: &mut MapImage, cx: f64, cy: f64, yaw: f64) {
    let r = GLYPH_RADIUS + 2.0;
    // Pixel rows grow downward, so the heading's y component flips.
    let vertex = |a: f64| (r * a.cos(), -r * a.sin());
    let triangle = [vertex(yaw), vertex(yaw + 2.5), vertex(yaw - 2.5)];
    fill_where(img, cx, cy, r, ROBOT_LEGEND.color, |dx, dy| in_polygon(&triangle, dx, dy));
}

/// Width in pixels of `text` at `scale`.
pub fn text_width(text: &str, scale: usize) -> usize {
    let n = text.chars().count();
    if n == 0 {
        0
    } else {
        n * GLYPH_WIDTH * scale + (n - 1) * scale
    }
}

/// Draws text with a one-pixel halo in the background color.
pub fn draw_text(img: &mut MapImage, x: usize, y: usize, text: &str, scale: usize, color: Rgb) {
    for pass in 0..2 {
        let mut pen = x as i64;
        for ch in text.chars() {
            if let Some(rows) = glyph(ch) {
                for (row, bits) in rows.iter().enumerate() {
                    for col in 0..GLYPH_WIDTH {
                        if bits & (1 << (GLYPH_WIDTH - 1 - col)) == 0 {
                            continue;
                        }
                        for sy in 0..scale {
                            for sx in 0..scale {
                                let px = pen + (col * scale + sx) as i64;
                                let py = y as i64 + (row * scale + sy) as i64;
                                if pass == 0 {
                                    for (ox, oy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                                        img.set_signed(px + ox, py + oy, BACKGROUND);
                                    }
                                } else {
                                    img.set_signed(px, py, color);
                                }
                            }
                        }
                    }
                }
            }
            pen += ((GLYPH_WIDTH + 1) * scale) as i64;
        }
    }
}

fn draw_line(img: &mut MapImage, a: (f64, f64), b: (f64, f64), color: Rgb) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = a.0 + (b.0 - a.0) * t;
        let y = a.1 + (b.1 - a.1) * t;
        img.set_signed(x.floor() as i64, y.floor() as i64, color);
    }
}

fn world_bounds(grid: &OccupancyGrid, bank: &MemoryBank, pose: Pose) -> (Point2, Point2) {
    let mut lo = pose.position();
    let mut hi = pose.position();
    let mut include = |p: Point2| {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    if let Some((min_cell, max_cell)) = grid.explored_bounds() {
        let res = grid.resolution();
        include(Point2::new(f64::from(min_cell.x) * res, f64::from(min_cell.y) * res));
        include(Point2::new(f64::from(max_cell.x + 1) * res, f64::from(max_cell.y + 1) * res));
    }
    for landmark in bank.landmarks() {
        include(landmark.position);
    }
    (lo - Point2::new(MARGIN, MARGIN), hi + Point2::new(MARGIN, MARGIN))
}

/// Renders the occupancy grid North-up with a glyph and index per landmark
/// and the robot marker.
pub fn render_map(grid: &OccupancyGrid, bank: &MemoryBank, pose: Pose) -> MapImage {
    render(grid, bank, pose, None)
}

/// Like [`render_map`] with the driven trajectory overlaid; for debugging
/// output only.
pub fn render_map_with_trajectory(
    grid: &OccupancyGrid,
    bank: &MemoryBank,
    pose: Pose,
    trajectory: &[Point2],
) -> MapImage {
    render(grid, bank, pose, Some(trajectory))
}

fn render(grid: &OccupancyGrid, bank: &MemoryBank, pose: Pose, trajectory: Option<&[Point2]>) -> MapImage {
    let (lo, hi) = world_bounds(grid, bank, pose);
    let inner_width = IMAGE_WIDTH - 2 * BORDER;
    let scale = inner_width as f64 / (hi.x - lo.x);
    let inner_height = ((hi.y - lo.y) * scale).ceil().max(1.0) as usize;
    let mut img = MapImage::blank(IMAGE_WIDTH, inner_height + 2 * BORDER, BACKGROUND);
    img.scale = scale;
    img.min_x = lo.x;
    img.max_y = hi.y;
    img.border = BORDER;

    for py in 0..inner_height {
        for px in 0..inner_width {
            let world = img.pixel_to_world((BORDER + px) as f64 + 0.5, (BORDER + py) as f64 + 0.5);
            let color = match grid.get(grid.cell_of(world)) {
                Occupancy::Unknown => UNKNOWN,
                Occupancy::Free => FREE,
                Occupancy::Occupied => OCCUPIED,
            };
            img.set(BORDER + px, BORDER + py, color);
        }
    }

    let (w, h) = (img.width, img.height);
    let letter_w = text_width("N", FONT_SCALE);
    let letter_h = GLYPH_HEIGHT * FONT_SCALE;
    let pad = (BORDER - letter_h.min(BORDER)) / 2;
    draw_text(&mut img, (w - letter_w) / 2, pad, "N", FONT_SCALE, TEXT);
    draw_text(&mut img, (w - letter_w) / 2, h - BORDER + pad, "S", FONT_SCALE, TEXT);
    draw_text(&mut img, (BORDER - letter_w) / 2, (h - letter_h) / 2, "W", FONT_SCALE, TEXT);
    draw_text(&mut img, w - BORDER + (BORDER - letter_w) / 2, (h - letter_h) / 2, "E", FONT_SCALE, TEXT);

    if let Some(points) = trajectory {
        for pair in points.windows(2) {
            let a = img.world_to_pixel(pair[0]);
            let b = img.world_to_pixel(pair[1]);
            draw_line(&mut img, a, b, TRAJECTORY);
        }
    }

    let landmarks: Vec<&Landmark> = bank.landmarks().collect();
    let mut centers = Vec::with_capacity(landmarks.len());
    for landmark in &landmarks {
        let (cx, cy) = img.world_to_pixel(landmark.position);
        let mut color = legend(landmark.category).color;
        if landmark.visited {
            color = desaturate(color);
        }
        draw_category(&mut img, landmark.category, cx, cy, color);
        centers.push((landmark.index, cx, cy));
    }
    let (rx, ry) = img.world_to_pixel(pose.position());
    draw_robot(&mut img, rx, ry, pose.yaw);

    for (index, cx, cy) in centers {
        let text = index.to_string();
        let tw = text_width(&text, FONT_SCALE);
        let th = GLYPH_HEIGHT * FONT_SCALE;
        let x = (cx - tw as f64 / 2.0).round().clamp(0.0, (w - tw) as f64) as usize;
        let y = (cy - GLYPH_RADIUS - 3.0 - th as f64).round().clamp(0.0, (h - th) as f64) as usize;
        draw_text(&mut img, x, y, &text, FONT_SCALE, TEXT);
        img.labels.push(LabelPlacement { index, x, y });
    }
    img
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl FromStr for ImageFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ppm" => Ok(ImageFormat::Ppm),
            "png" => Ok(ImageFormat::Png),
            other => Err(RenderError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("unsupported image format {0:?}")]
    UnsupportedFormat(String),
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error("malformed ppm: {0}")]
    Ppm(String),
}

pub fn encode_image(img: &MapImage, format: ImageFormat) -> Result<Vec<u8>, RenderError> {
    match format {
        ImageFormat::Ppm => {
            let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend_from_slice(&img.pixels);
            Ok(out)
        }
        ImageFormat::Png => {
            let mut out = Vec::new();
            {
                let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
                encoder.set_color(png::ColorType::Rgb);
                encoder.set_depth(png::BitDepth::Eight);
                let mut writer = encoder.write_header().map_err(|e| RenderError::Png(e.to_string()))?;
                writer
                    .write_image_data(&img.pixels)
                    .map_err(|e| RenderError::Png(e.to_string()))?;
                writer.finish().map_err(|e| RenderError::Png(e.to_string()))?;
            }
            Ok(out)
        }
    }
}

/// Reads a binary P6 file with maxval 255 back into a pixel buffer.
pub fn decode_ppm(bytes: &[u8]) -> Result<MapImage, RenderError> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(RenderError::Ppm("truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(RenderError::Ppm(format!("magic {:?}", fields[0])));
    }
    let number = |s: &str| s.parse::<usize>().map_err(|_| RenderError::Ppm(format!("bad number {s:?}")));
    let (width, height, maxval) = (number(&fields[1])?, number(&fields[2])?, number(&fields[3])?);
    if maxval != 255 {
        return Err(RenderError::Ppm(format!("maxval {maxval}")));
    }
    let data = &bytes[i + 1..];
    if data.len() != width * height * 3 {
        return Err(RenderError::Ppm(format!(
            "expected {} bytes of pixels, found {}",
            width * height * 3,
            data.len()
        )));
    }
    let mut img = MapImage::blank(width, height, BACKGROUND);
    img.pixels.copy_from_slice(data);
    Ok(img)
}

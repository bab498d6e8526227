use std::path::Path;

use super::PreprocError;
use crate::corpus::Region;

/// Bytes in the raw dump header: width, height, channels as LE `u32`.
pub const RAW_HEADER_LEN: usize = 12;

/// 8-bit image stored channel-planar: all of channel 0, then channel 1, ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<u8>,
}

impl PixelGrid {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<u8>) -> Result<Self, PreprocError> {
        let expected = width as usize * height as usize * channels as usize;
        if channels == 0 || data.len() != expected {
            return Err(PreprocError::Image(format!(
                "{width}x{height}x{channels} grid needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: u32, height: u32, channels: u32, value: u8) -> Self {
        Self { width, height, channels, data: vec![value; width as usize * height as usize * channels as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn get(&self, channel: u32, x: u32, y: u32) -> u8 {
        self.data[channel as usize * self.plane_len() + y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, channel: u32, x: u32, y: u32, value: u8) {
        let i = channel as usize * self.plane_len() + y as usize * self.width as usize + x as usize;
        self.data[i] = value;
    }

    pub fn from_raw(bytes: &[u8]) -> Result<Self, PreprocError> {
        if bytes.len() < RAW_HEADER_LEN {
            return Err(PreprocError::Image("raw dump shorter than its header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        Self::new(word(0), word(4), word(8), bytes[RAW_HEADER_LEN..].to_vec())
    }

    pub fn to_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RAW_HEADER_LEN + self.data.len());
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    /// Loads a PNG (by extension) or a raw planar dump.
    pub fn load(path: &Path) -> Result<Self, PreprocError> {
        if is_png(path) {
            let img = image::open(path).map_err(|e| PreprocError::Image(format!("{}: {e}", path.display())))?;
            let (w, h) = (img.width(), img.height());
            if img.color().channel_count() == 1 {
                return Self::new(w, h, 1, img.to_luma8().into_raw());
            }
            let interleaved = img.to_rgb8().into_raw();
            let plane = w as usize * h as usize;
            let mut data = vec![0u8; plane * 3];
            for (i, px) in interleaved.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    data[c * plane + i] = px[c];
                }
            }
            return Self::new(w, h, 3, data);
        }
        Self::from_raw(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PreprocError> {
        if !is_png(path) {
            return Ok(std::fs::write(path, self.to_raw())?);
        }
        let plane = self.plane_len();
        let (color, interleaved) = match self.channels {
            1 => (image::ExtendedColorType::L8, self.data.clone()),
            3 => {
                let mut buf = Vec::with_capacity(plane * 3);
                for i in 0..plane {
                    for c in 0..3 {
                        buf.push(self.data[c * plane + i]);
                    }
                }
                (image::ExtendedColorType::Rgb8, buf)
            }
            n => return Err(PreprocError::Image(format!("cannot write {n}-channel PNG"))),
        };
        image::save_buffer(path, &interleaved, self.width, self.height, color)
            .map_err(|e| PreprocError::Image(e.to_string()))
    }
}

fn is_png(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Pixels `(x, y)` whose integer coordinates fall inside `region`.
///
/// Boxes are half-open: `x_min <= x < x_max`, `y_min <= y < y_max`.
/// Polygons use even-odd fill along each row `y`, with the same half-open
/// rule between consecutive edge crossings.
pub fn covered_pixels(region: &Region, width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let span = |lo: f64, hi: f64, limit: u32| {
        let a = lo.ceil().max(0.0);
        let b = hi.ceil().min(limit as f64);
        (a as u32)..(if b > a { b as u32 } else { a as u32 })
    };
    match region {
        Region::Box { x_min, y_min, x_max, y_max } => {
            for y in span(*y_min, *y_max, height) {
                for x in span(*x_min, *x_max, width) {
                    out.push((x, y));
                }
            }
        }
        Region::Polygon(pts) => {
            let mut xs = Vec::new();
            for y in 0..height {
                let yf = y as f64;
                xs.clear();
                for i in 0..pts.len() {
                    let (x0, y0) = pts[i];
                    let (x1, y1) = pts[(i + 1) % pts.len()];
                    if (y0 <= yf) != (y1 <= yf) {
                        xs.push(x0 + (yf - y0) * (x1 - x0) / (y1 - y0));
                    }
                }
                xs.sort_by(f64::total_cmp);
                for pair in xs.chunks_exact(2) {
                    for x in span(pair[0], pair[1], width) {
                        out.push((x, y));
                    }
                }
            }
        }
    }
    out
}

/// Zeroes every pixel covered by any region. Returns the new grid and the
/// number of distinct pixel positions zeroed.
pub fn apply_region_mask(image: &PixelGrid, regions: &[Region]) -> Result<(PixelGrid, usize), PreprocError> {
    for (index, r) in regions.iter().enumerate() {
        if !r.is_well_formed() {
            return Err(PreprocError::MalformedRegion { index });
        }
        if !r.within(image.width, image.height) {
            return Err(PreprocError::OutOfBounds { index, width: image.width, height: image.height });
        }
    }
    let mut covered = vec![false; image.plane_len()];
    for r in regions {
        for (x, y) in covered_pixels(r, image.width, image.height) {
            covered[y as usize * image.width as usize + x as usize] = true;
        }
    }
    let mut out = image.clone();
    let plane = image.plane_len();
    for c in 0..image.channels as usize {
        for (i, _) in covered.iter().enumerate().filter(|(_, hit)| **hit) {
            out.data[c * plane + i] = 0;
        }
    }
    Ok((out, covered.iter().filter(|h| **h).count()))
}

/// Normalized grayscale histogram with `buckets` equal-width bins.
pub fn gray_histogram(image: &PixelGrid, buckets: usize) -> Vec<f64> {
    let mut hist = vec![0.0; buckets];
    let n = image.plane_len();
    if buckets == 0 || n == 0 {
        return hist;
    }
    for i in 0..n {
        let gray = if image.channels >= 3 {
            let r = image.data[i] as u32;
            let g = image.data[n + i] as u32;
            let b = image.data[2 * n + i] as u32;
            (299 * r + 587 * g + 114 * b) / 1000
        } else {
            image.data[i] as u32
        };
        hist[gray as usize * buckets / 256] += 1.0;
    }
    hist.iter_mut().for_each(|h| *h /= n as f64);
    hist
}

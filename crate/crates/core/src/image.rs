//! Cartesian image buffers, bilinear sampling and PNG IO.
//!
//! Samples are stored as `f32` in row-major, channel-interleaved order
//! (`[y][x][c]`). Values nominally live in `[0, 1]`; intermediates may
//! overshoot slightly and are clamped only when written to disk.

use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use crate::error::{Error, Result};

/// Bit depth used when encoding a PNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// An `H×W×C` raster of samples, `C ∈ {1, 3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl CartesianImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
        .expect("valid channel count")
    }

    /// Builds an image by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(height, width, channels, data).expect("valid channel count")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Lattice value with zero padding outside the image.
    #[inline]
    fn get_padded(&self, x: isize, y: isize, c: usize) -> f32 {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            0.0
        } else {
            self.get(x as usize, y as usize, c)
        }
    }

    /// Bilinear interpolation at sub-pixel `(x, y)`; the lattice is zero-padded.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f32 {
        if !(x > -1.0 && y > -1.0 && x < self.width as f64 && y < self.height as f64) {
            return 0.0;
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let tx = (x - x0) as f32;
        let ty = (y - y0) as f32;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_padded(xi, yi, c);
        let p10 = self.get_padded(xi + 1, yi, c);
        let p01 = self.get_padded(xi, yi + 1, c);
        let p11 = self.get_padded(xi + 1, yi + 1, c);
        let top = p00 + (p10 - p00) * tx;
        let bottom = p01 + (p11 - p01) * tx;
        top + (bottom - top) * ty
    }

    /// Copy with every sample clamped to `[0, 1]`.
    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    /// ITU-R BT.601 luma; single-channel images are returned unchanged.
    pub fn luminance(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Self::new(self.height, self.width, 1, data).expect("valid shape")
    }

    /// Replicates or averages channels to reach `channels`.
    pub fn with_channels(&self, channels: usize) -> Result<Self> {
        match (self.channels, channels) {
            (a, b) if a == b => Ok(self.clone()),
            (1, 3) => {
                let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
                Self::new(self.height, self.width, 3, data)
            }
            (3, 1) => Ok(self.luminance()),
            (_, b) => Err(Error::InvalidArgument(format!(
                "cannot convert to {b} channels"
            ))),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

/// Loads an 8- or 16-bit PNG. Alpha is dropped; palette images expand to RGB.
pub fn load_raster(path: impl AsRef<Path>) -> Result<CartesianImage> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::Io(e)),
    };
    let corrupt = |e: png::DecodingError| Error::CorruptRaster {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };

    let probe = png::Decoder::new(Cursor::new(&bytes[..]))
        .read_info()
        .map_err(corrupt)?;
    let (color, depth) = {
        let info = probe.info();
        (info.color_type, info.bit_depth)
    };
    drop(probe);

    let mut decoder = png::Decoder::new(Cursor::new(&bytes[..]));
    if color == png::ColorType::Indexed {
        decoder.set_transformations(png::Transformations::EXPAND);
    } else {
        match depth {
            png::BitDepth::Eight | png::BitDepth::Sixteen => {}
            other => {
                return Err(Error::UnsupportedBitDepth {
                    path: path.to_path_buf(),
                    depth: other as u8,
                })
            }
        }
        decoder.set_transformations(png::Transformations::IDENTITY);
    }
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::CorruptRaster {
            path: path.to_path_buf(),
            reason: "image too large".into(),
        })?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (width, height) = (frame.width as usize, frame.height as usize);

    let (src_channels, keep) = match frame.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => {
            return Err(Error::CorruptRaster {
                path: path.to_path_buf(),
                reason: "palette was not expanded".into(),
            })
        }
    };
    let sixteen = frame.bit_depth == png::BitDepth::Sixteen;
    let sample_bytes = if sixteen { 2 } else { 1 };
    let mut data = Vec::with_capacity(width * height * keep);
    for row in buf[..frame.buffer_size()].chunks_exact(frame.line_size) {
        for px in
            row[..width * src_channels * sample_bytes].chunks_exact(src_channels * sample_bytes)
        {
            for c in 0..keep {
                let v = if sixteen {
                    u16::from_be_bytes([px[2 * c], px[2 * c + 1]]) as f32 / 65535.0
                } else {
                    px[c] as f32 / 255.0
                };
                data.push(v);
            }
        }
    }
    CartesianImage::new(height, width, keep, data)
}

/// Writes an 8-bit PNG.
pub fn save_raster(img: &CartesianImage, path: impl AsRef<Path>) -> Result<()> {
    save_raster_with_depth(img, path, BitDepth::Eight)
}

/// Writes a PNG at the requested bit depth; samples are clamped to `[0, 1]`.
pub fn save_raster_with_depth(
    img: &CartesianImage,
    path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<()> {
    let path = path.as_ref();
    let unwritable = |reason: String| Error::Unwritable {
        path: path.to_path_buf(),
        reason,
    };
    let file = fs::File::create(path).map_err(|e| unwritable(e.to_string()))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    encoder.set_color(if img.channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    let bytes: Vec<u8> = match depth {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            img.data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            img.data
                .iter()
                .flat_map(|v| ((v.clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes())
                .collect()
        }
    };
    let mut writer = encoder
        .write_header()
        .map_err(|e| unwritable(e.to_string()))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| unwritable(e.to_string()))?;
    writer.finish().map_err(|e| unwritable(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_gray16(path: &Path, values: &[u16], w: u32, h: u32) {
        let file = fs::File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut wr = enc.write_header().unwrap();
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
        wr.write_image_data(&bytes).unwrap();
    }

    fn write_gray8(path: &Path, values: &[u8], w: u32, h: u32, depth: png::BitDepth) {
        let file = fs::File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut wr = enc.write_header().unwrap();
        wr.write_image_data(values).unwrap();
    }

    #[test]
    fn eight_bit_extremes_scale_to_unit_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_gray8(&p, &[255, 0], 2, 1, png::BitDepth::Eight);
        let img = load_raster(&p).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(1, 0, 0), 0.0);
    }

    #[test]
    fn sixteen_bit_midpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g16.png");
        write_gray16(&p, &[32768], 1, 1);
        let img = load_raster(&p).unwrap();
        assert!((img.get(0, 0, 0) - 0.500_007_63).abs() < 1e-7);
    }

    #[test]
    fn distinct_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = load_raster(dir.path().join("nope.png")).unwrap_err();
        assert_eq!(missing.kind(), "missing_file");

        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"definitely not a png").unwrap();
        assert_eq!(load_raster(&junk).unwrap_err().kind(), "corrupt_raster");

        let low = dir.path().join("low.png");
        // 4 pixels packed at 4 bits each.
        write_gray8(&low, &[0x0f, 0xf0], 4, 1, png::BitDepth::Four);
        assert_eq!(
            load_raster(&low).unwrap_err().kind(),
            "unsupported_bit_depth"
        );
    }

    #[test]
    fn alpha_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgba.png");
        let file = fs::File::create(&p).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), 1, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut wr = enc.write_header().unwrap();
        wr.write_image_data(&[255, 0, 51, 7]).unwrap();
        drop(wr);
        let img = load_raster(&p).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[1.0, 0.0, 0.2]);
    }

    #[test]
    fn constant_half_quantizes_to_neighbor_level() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.png");
        save_raster(&CartesianImage::filled(4, 5, 1, 0.5), &p).unwrap();
        let back = load_raster(&p).unwrap();
        for &v in back.data() {
            assert!(v == 127.0 / 255.0 || v == 128.0 / 255.0);
        }
    }

    #[test]
    fn single_black_pixel_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("black.png");
        save_raster(&CartesianImage::filled(1, 1, 1, 0.0), &p).unwrap();
        assert_eq!(load_raster(&p).unwrap().data(), &[0.0]);
    }

    #[test]
    fn rgb_roundtrip_within_quantization() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let img = CartesianImage::from_fn(320, 320, 3, |_, _, _| rng.random::<f32>());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        save_raster(&img, &p).unwrap();
        let back = load_raster(&p).unwrap();
        assert!(back.same_shape(&img));
        let max_err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 255.0, "max error {max_err}");
    }

    #[test]
    fn unwritable_path() {
        let err = save_raster(
            &CartesianImage::filled(1, 1, 1, 0.0),
            "/nonexistent-dir/x/y.png",
        )
        .unwrap_err();
        assert_eq!(err.kind(), "unwritable");
    }

    #[test]
    fn bilinear_examples() {
        let img = CartesianImage::from_fn(8, 8, 1, |x, y, _| (x * 10 + y) as f32 / 100.0);
        assert_eq!(img.sample_bilinear(3.0, 5.0, 0), img.get(3, 5, 0));
        let two = CartesianImage::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(two.sample_bilinear(0.5, 0.0, 0), 0.5);
        assert_eq!(img.sample_bilinear(-10.0, -10.0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn bilinear_stays_within_support(
            vals in proptest::collection::vec(0.0f32..1.0, 16),
            x in 0.0f64..3.0,
            y in 0.0f64..3.0,
        ) {
            let img = CartesianImage::new(4, 4, 1, vals).unwrap();
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let support = [
                img.get(x0, y0, 0),
                img.get(x0 + 1, y0, 0),
                img.get(x0, y0 + 1, 0),
                img.get(x0 + 1, y0 + 1, 0),
            ];
            let lo = support.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = support.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let v = img.sample_bilinear(x, y, 0);
            prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
        }

        #[test]
        fn bilinear_is_linear_along_rows(a in 0.0f32..1.0, b in 0.0f32..1.0, t in 0.0f64..1.0) {
            let img = CartesianImage::new(1, 2, 1, vec![a, b]).unwrap();
            let v = img.sample_bilinear(t, 0.0, 0);
            prop_assert!((v - (a + (b - a) * t as f32)).abs() < 1e-6);
        }
    }
}

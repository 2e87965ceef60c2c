//! 8-bit grayscale rasters: loading, saving, cropping and column conversion.
//!
//! Binary PGM (`P5`, maxval 255) is read and written by a small codec in this
//! module so that a save/load cycle is bit-exact. Every other extension is
//! handed to the `image` crate; color sources are reduced to gray with the
//! rounded luma weights 0.299/0.587/0.114.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image data: {0}")]
    CorruptData(String),
    #[error("invalid dimensions {rows}x{cols}")]
    InvalidDimensions { rows: usize, cols: usize },
    #[error("column has {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// A row-major 8-bit grayscale raster with at least one pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if rows == 0 || cols == 0 {
            return Err(ImageError::InvalidDimensions { rows, cols });
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or(ImageError::InvalidDimensions { rows, cols })?;
        if pixels.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self { rows, cols, pixels })
    }

    /// Builds an image by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(rows.saturating_mul(cols));
        for r in 0..rows {
            for c in 0..cols {
                pixels.push(f(r, c));
            }
        }
        Self::new(rows, cols, pixels)
    }

    pub fn filled(rows: usize, cols: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(rows, cols, vec![value; rows.saturating_mul(cols)])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Top-left anchored sub-window. Dimensions are clamped to the image.
    pub fn window(&self, rows: usize, cols: usize) -> Image {
        let rows = rows.clamp(1, self.rows);
        let cols = cols.clamp(1, self.cols);
        if rows == self.rows && cols == self.cols {
            return self.clone();
        }
        let mut pixels = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let start = r * self.cols;
            pixels.extend_from_slice(&self.pixels[start..start + cols]);
        }
        Image { rows, cols, pixels }
    }

    pub fn to_column(&self) -> PixelColumn {
        to_column(self)
    }
}

/// Flattened pixel values with the shape they came from.
///
/// Values are real so that fractional engine outputs can be carried until the
/// final conversion back to an [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelColumn {
    pub values: Vec<f64>,
    pub source_rows: usize,
    pub source_cols: usize,
}

impl PixelColumn {
    pub fn new(values: Vec<f64>, source_rows: usize, source_cols: usize) -> Self {
        Self {
            values,
            source_rows,
            source_cols,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn to_column(img: &Image) -> PixelColumn {
    PixelColumn {
        values: img.pixels.iter().map(|&p| f64::from(p)).collect(),
        source_rows: img.rows,
        source_cols: img.cols,
    }
}

pub fn from_column(col: &PixelColumn) -> Result<Image, ImageError> {
    let expected = col.source_rows.saturating_mul(col.source_cols);
    if col.values.len() != expected {
        return Err(ImageError::LengthMismatch {
            expected,
            actual: col.values.len(),
        });
    }
    let pixels = col.values.iter().map(|&v| quantize(v)).collect();
    Image::new(col.source_rows, col.source_cols, pixels)
}

/// Round half-up, then clamp to `[0, 255]`. NaN maps to 0.
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Crops both images to their common top-left window.
pub fn crop_to_common(a: &Image, b: &Image) -> (Image, Image) {
    let rows = a.rows.min(b.rows);
    let cols = a.cols.min(b.cols);
    (a.window(rows, cols), b.window(rows, cols))
}

/// Rounded ITU-R BT.601 luma.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    quantize(y)
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ImageError::FileNotFound(display.clone()),
        _ => ImageError::Io {
            path: display.clone(),
            source: e,
        },
    })?;
    if is_pgm(path) || bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    decode_with_image_crate(&bytes, path)
}

fn decode_with_image_crate(bytes: &[u8], path: &Path) -> Result<Image, ImageError> {
    use image::DynamicImage;

    let format = image::guess_format(bytes)
        .or_else(|_| image::ImageFormat::from_path(path))
        .map_err(|_| ImageError::UnsupportedFormat(path.display().to_string()))?;
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(u) => ImageError::UnsupportedFormat(u.to_string()),
        other => ImageError::CorruptData(other.to_string()),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Image::new(h, w, pixels).map_err(|e| ImageError::CorruptData(e.to_string()))
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let io_err = |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    };
    if is_pgm(path) {
        let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        file.write_all(&encode_pgm(img)).map_err(io_err)?;
        return file.flush().map_err(io_err);
    }
    let format = image::ImageFormat::from_path(path)
        .map_err(|_| ImageError::UnsupportedFormat(path.display().to_string()))?;
    let buf = image::GrayImage::from_raw(img.cols as u32, img.rows as u32, img.pixels.clone())
        .expect("pixel buffer matches dimensions");
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    buf.write_to(&mut file, format).map_err(|e| match e {
        image::ImageError::IoError(source) => io_err(source),
        image::ImageError::Unsupported(u) => ImageError::UnsupportedFormat(u.to_string()),
        other => ImageError::CorruptData(other.to_string()),
    })?;
    file.flush().map_err(io_err)
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols, img.rows).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image, ImageError> {
    let corrupt = |msg: &str| ImageError::CorruptData(msg.to_string());
    if !bytes.starts_with(b"P5") {
        return Err(ImageError::UnsupportedFormat(
            "only binary PGM (P5) is supported".into(),
        ));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        // whitespace and '#' comments between header fields
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt("truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(corrupt("expected a number in PGM header"));
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("PGM header number out of range"))?;
    }
    let [cols, rows, maxval] = header;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!(
            "PGM maxval {maxval} (only 255 is supported)"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("missing separator after PGM header"));
    }
    pos += 1;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| corrupt("PGM dimensions overflow"))?;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| corrupt("truncated PGM raster"))?;
    Image::new(rows, cols, raster.to_vec()).map_err(|e| ImageError::CorruptData(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(rows: usize, cols: usize, px: &[u8]) -> Image {
        Image::new(rows, cols, px.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Image::new(0, 3, vec![]),
            Err(ImageError::InvalidDimensions { .. })
        ));
        assert!(matches!(
            Image::new(2, 2, vec![1, 2, 3]),
            Err(ImageError::LengthMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn pgm_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        fs::write(&path, b"P5\n2 2\n255\n\x00\x55\xaa\xff").unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded, img(2, 2, &[0, 85, 170, 255]));

        let one = img(1, 1, &[42]);
        save_image(&one, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), one);

        let wide = img(2, 3, &[1, 2, 3, 4, 5, 6]);
        save_image(&wide, &path).unwrap();
        assert_eq!(load_image(&path).unwrap().dims(), (2, 3));
    }

    #[test]
    fn pgm_header_comments() {
        let bytes = b"P5 # made by hand\n# another\n3 1\n255\n\x01\x02\x03";
        assert_eq!(decode_pgm(bytes).unwrap(), img(1, 3, &[1, 2, 3]));
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x00"),
            Err(ImageError::CorruptData(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n1 1\n65535\n\x00\x00"),
            Err(ImageError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n0"),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn every_single_pixel_value_round_trips_through_pgm() {
        for v in 0..=255u8 {
            let im = img(1, 1, &[v]);
            assert_eq!(decode_pgm(&encode_pgm(&im)).unwrap(), im);
        }
    }

    #[test]
    fn png_gray_and_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let im = img(2, 3, &[0, 10, 20, 200, 250, 255]);
        save_image(&im, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), im);

        let rgb_path = dir.path().join("c.png");
        let rgb = image::RgbImage::from_raw(2, 1, vec![255, 255, 255, 100, 200, 50]).unwrap();
        rgb.save(&rgb_path).unwrap();
        assert_eq!(load_image(&rgb_path).unwrap().pixels(), &[255, 153]);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(ImageError::FileNotFound(_))
        ));
        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        assert!(matches!(load_image(&junk), Err(ImageError::CorruptData(_))));
        let txt = dir.path().join("notes.txt");
        fs::write(&txt, b"hello").unwrap();
        assert!(matches!(
            load_image(&txt),
            Err(ImageError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn save_into_missing_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope").join("x.pgm");
        assert!(matches!(
            save_image(&img(1, 1, &[1]), path),
            Err(ImageError::Io { .. })
        ));
    }

    #[test]
    fn luma_weights() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(100, 200, 50), 153);
        assert_eq!(luma(0, 0, 0), 0);
    }

    #[test]
    fn crop_cases() {
        let a = Image::filled(4, 4, 1).unwrap();
        let b = Image::filled(4, 4, 2).unwrap();
        let (ca, cb) = crop_to_common(&a, &b);
        assert_eq!((ca, cb), (a, b));

        let a = Image::filled(4, 6, 0).unwrap();
        let b = Image::filled(5, 3, 0).unwrap();
        let (ca, cb) = crop_to_common(&a, &b);
        assert_eq!(ca.dims(), (4, 3));
        assert_eq!(cb.dims(), (4, 3));

        let a = img(3, 3, &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let b = Image::filled(2, 2, 0).unwrap();
        assert_eq!(crop_to_common(&a, &b).0.pixels(), &[1, 2, 4, 5]);
    }

    #[test]
    fn column_conversion() {
        let im = img(2, 2, &[1, 2, 3, 4]);
        assert_eq!(to_column(&im).values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(to_column(&img(1, 1, &[7])).values, vec![7.0]);
        assert_eq!(to_column(&Image::filled(3, 5, 0).unwrap()).len(), 15);

        let col = PixelColumn::new(vec![254.6, -3.0, 127.5, 300.0], 2, 2);
        assert_eq!(from_column(&col).unwrap().pixels(), &[255, 0, 128, 255]);

        let short = PixelColumn::new(vec![1.0; 3], 2, 2);
        assert!(matches!(
            from_column(&short),
            Err(ImageError::LengthMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
            proptest::collection::vec(any::<u8>(), r * c)
                .prop_map(move |px| Image::new(r, c, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn column_round_trip(im in arb_image()) {
            prop_assert_eq!(from_column(&to_column(&im)).unwrap(), im);
        }

        #[test]
        fn pgm_round_trip(im in arb_image()) {
            prop_assert_eq!(decode_pgm(&encode_pgm(&im)).unwrap(), im);
        }

        #[test]
        fn crop_is_idempotent(a in arb_image(), b in arb_image()) {
            let (ca, cb) = crop_to_common(&a, &b);
            let (cca, ccb) = crop_to_common(&ca, &cb);
            prop_assert_eq!(&cca, &ca);
            prop_assert_eq!(&ccb, &cb);
            prop_assert_eq!(ca.dims(), (a.rows().min(b.rows()), a.cols().min(b.cols())));
        }

        #[test]
        fn quantize_stays_in_range(v in proptest::num::f64::ANY) {
            let q = quantize(v);
            if v.is_finite() && (0.0..=254.5).contains(&v) {
                prop_assert!((f64::from(q) - v).abs() <= 0.5);
            }
        }
    }
}

//! On-disk encodings of disparity, depth and view images.
//!
//! * sub-pixel disparity: single-channel 32-bit float TIFF, `0.0` = invalid
//! * pixel-level disparity: 8-bit grayscale PNG, half-up rounded, `0` = invalid
//! * depth: 16-bit PNG in millimeters or 32-bit float TIFF, `0` = invalid
//! * views: 8-bit RGB PNG

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek};
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use serde::Serialize;
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};

use crate::error::{Error, Result};
use crate::maps::{is_valid_disparity, DepthMap, DisparityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Container {
    Png,
    Tiff,
}

fn sniff(path: &Path) -> Result<Container> {
    let mut magic = [0u8; 4];
    let mut f = File::open(path).map_err(|e| open_error(path, e))?;
    f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    match &magic {
        [0x89, b'P', b'N', b'G'] => Ok(Container::Png),
        [b'I', b'I', 42, 0] | [b'M', b'M', 0, 42] => Ok(Container::Tiff),
        _ => Err(Error::Format(format!(
            "{} is neither PNG nor TIFF",
            path.display()
        ))),
    }
}

fn open_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::NotFound(path.display().to_string())
    } else {
        Error::io(path, e)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_tiff_f32(path: &Path, width: usize, height: usize, data: &[f32]) -> Result<()> {
    let mut out = create(path)?;
    TiffEncoder::new(&mut out)?.write_image::<colortype::Gray32Float>(
        width as u32,
        height as u32,
        data,
    )?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

enum TiffPlane {
    F32(Vec<f32>),
    U16(Vec<u16>),
}

fn read_tiff_plane<R: Read + Seek>(reader: R, path: &Path) -> Result<(usize, usize, TiffPlane)> {
    let mut dec = Decoder::new(reader)?;
    let (w, h) = dec.dimensions()?;
    let colortype = dec.colortype()?;
    if !matches!(colortype, tiff::ColorType::Gray(_)) {
        return Err(Error::Format(format!(
            "{}: expected single-channel TIFF, found {colortype:?}",
            path.display()
        )));
    }
    let plane = match dec.read_image()? {
        DecodingResult::F32(v) => TiffPlane::F32(v),
        DecodingResult::U16(v) => TiffPlane::U16(v),
        _ => {
            return Err(Error::Format(format!(
                "{}: unsupported TIFF sample type {colortype:?}",
                path.display()
            )))
        }
    };
    Ok((w as usize, h as usize, plane))
}

/// Writes a bit-exact single-channel float TIFF.
pub fn write_disparity_subpixel(path: impl AsRef<Path>, map: &DisparityMap) -> Result<()> {
    write_tiff_f32(path.as_ref(), map.width(), map.height(), map.as_slice())
}

/// Outcome of quantizing a map to 8 bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QuantizationReport {
    pub valid_in: usize,
    pub valid_out: usize,
    /// Valid disparities below 0.5 that rounded to 0 and became invalid.
    pub vanished: usize,
}

/// Half-up rounding of one disparity to the 8-bit encoding.
#[inline]
pub fn quantize_disparity(d: f32) -> Option<u32> {
    if !is_valid_disparity(d) {
        return Some(0);
    }
    let q = (d as f64 + 0.5).floor();
    (q < 256.0).then_some(q as u32)
}

/// Rounds every disparity half-up to an integer. Fails if any value would
/// need more than 8 bits.
pub fn quantize_map(map: &DisparityMap) -> Result<(GrayImage, QuantizationReport)> {
    let mut report = QuantizationReport::default();
    let mut img = GrayImage::new(map.width() as u32, map.height() as u32);
    for y in 0..map.height() {
        for x in 0..map.width() {
            let d = map.get(x, y);
            let q = quantize_disparity(d).ok_or(Error::RangeOverflow { value: d, x, y })?;
            if is_valid_disparity(d) {
                report.valid_in += 1;
                if q == 0 {
                    report.vanished += 1;
                }
            }
            if q > 0 {
                report.valid_out += 1;
            }
            img.put_pixel(x as u32, y as u32, Luma([q as u8]));
        }
    }
    Ok((img, report))
}

/// Writes the pixel-precision 8-bit PNG variant.
pub fn write_disparity_pixel(path: impl AsRef<Path>, map: &DisparityMap) -> Result<QuantizationReport> {
    let path = path.as_ref();
    let (img, report) = quantize_map(map)?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    if report.vanished > 0 {
        log::warn!(
            "{}: {} disparities below 0.5 px became invalid under 8-bit quantization",
            path.display(),
            report.vanished
        );
    }
    Ok(report)
}

/// Reads either disparity encoding; precision follows the container.
pub fn read_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    match sniff(path)? {
        Container::Png => {
            let img = image::open(path)?;
            let image::DynamicImage::ImageLuma8(gray) = img else {
                return Err(Error::Format(format!(
                    "{}: disparity PNG must be 8-bit grayscale, found {:?}",
                    path.display(),
                    img.color()
                )));
            };
            let (w, h) = gray.dimensions();
            let data = gray.into_raw().into_iter().map(f32::from).collect();
            DisparityMap::from_vec(w as usize, h as usize, data)
        }
        Container::Tiff => {
            let file = File::open(path).map_err(|e| open_error(path, e))?;
            match read_tiff_plane(BufReader::new(file), path)? {
                (w, h, TiffPlane::F32(data)) => DisparityMap::from_vec(w, h, data),
                _ => Err(Error::Format(format!(
                    "{}: disparity TIFF must be 32-bit float",
                    path.display()
                ))),
            }
        }
    }
}

/// Reads a depth map in millimeters from a 16-bit PNG or a float TIFF.
pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    match sniff(path)? {
        Container::Png => {
            let img = image::open(path)?;
            let image::DynamicImage::ImageLuma16(gray) = img else {
                return Err(Error::Format(format!(
                    "{}: depth PNG must be 16-bit grayscale, found {:?}",
                    path.display(),
                    img.color()
                )));
            };
            let (w, h) = gray.dimensions();
            let data = gray.into_raw().into_iter().map(f32::from).collect();
            DepthMap::from_vec(w as usize, h as usize, data)
        }
        Container::Tiff => {
            let file = File::open(path).map_err(|e| open_error(path, e))?;
            match read_tiff_plane(BufReader::new(file), path)? {
                (w, h, TiffPlane::F32(data)) => DepthMap::from_vec(w, h, data),
                (w, h, TiffPlane::U16(data)) => {
                    DepthMap::from_vec(w, h, data.into_iter().map(f32::from).collect())
                }
            }
        }
    }
}

pub fn write_depth_tiff(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    write_tiff_f32(path.as_ref(), depth.width(), depth.height(), depth.as_slice())
}

/// Writes depth as 16-bit millimeters (rounded; values beyond 65535 mm fail).
pub fn write_depth_png16(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let mut raw = Vec::with_capacity(depth.as_slice().len());
    for &z in depth.as_slice() {
        let mm = if z.is_finite() && z > 0.0 { z.round() } else { 0.0 };
        if mm > u16::MAX as f32 {
            return Err(Error::Format(format!("depth {z} mm exceeds 16 bits")));
        }
        raw.push(mm as u16);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer sized from the map");
    img.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.display().to_string()));
    }
    Ok(image::open(path)?.to_rgb8())
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    img.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
    Ok(())
}

/// Disparity written with the encoding implied by the extension
/// (`.tif`/`.tiff` float, `.png` 8-bit).
pub fn write_disparity(path: impl AsRef<Path>, map: &DisparityMap) -> Result<Option<QuantizationReport>> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("tif" | "tiff") => write_disparity_subpixel(path, map).map(|_| None),
        Some("png") => write_disparity_pixel(path, map).map(Some),
        _ => Err(Error::Format(format!(
            "{}: disparity output must end in .tiff or .png",
            path.display()
        ))),
    }
}

pub(crate) fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tiff_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tiff");
        let map = DisparityMap::from_fn(5, 3, |x, y| if x == 2 && y == 1 { 231.724 } else { x as f32 * 0.1 });
        write_disparity_subpixel(&p, &map).unwrap();
        let back = read_disparity(&p).unwrap();
        assert_eq!(back.get(2, 1).to_bits(), 231.724f32.to_bits());
        assert_eq!(back, map);

        let zeros = DisparityMap::new(4, 4);
        write_disparity_subpixel(&p, &zeros).unwrap();
        assert_eq!(read_disparity(&p).unwrap().valid_count(), 0);
    }

    #[test]
    fn png_rounding_contract() {
        assert_eq!(quantize_disparity(231.4), Some(231));
        assert_eq!(quantize_disparity(231.5), Some(232));
        assert_eq!(quantize_disparity(0.2), Some(0));
        assert_eq!(quantize_disparity(255.49), Some(255));
        assert_eq!(quantize_disparity(255.5), None);
        assert_eq!(quantize_disparity(0.0), Some(0));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        let map = DisparityMap::from_vec(4, 1, vec![231.4, 231.5, 0.2, 0.0]).unwrap();
        let report = write_disparity_pixel(&p, &map).unwrap();
        assert_eq!(report.vanished, 1);
        assert_eq!(report.valid_in, 3);
        assert_eq!(report.valid_out, 2);
        let back = read_disparity(&p).unwrap();
        assert_eq!(back.as_slice(), &[231.0, 232.0, 0.0, 0.0]);

        let too_big = DisparityMap::from_vec(1, 1, vec![300.0]).unwrap();
        assert!(matches!(
            write_disparity_pixel(&p, &too_big),
            Err(Error::RangeOverflow { .. })
        ));
    }

    #[test]
    fn unsupported_depths_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        write_rgb(&p, &RgbImage::new(2, 2)).unwrap();
        assert!(matches!(read_disparity(&p), Err(Error::Format(_))));
        assert!(matches!(read_depth(&p), Err(Error::Format(_))));

        let junk = dir.path().join("junk.tiff");
        std::fs::write(&junk, b"hello world").unwrap();
        assert!(matches!(read_disparity(&junk), Err(Error::Format(_))));
        assert!(matches!(
            read_disparity(dir.path().join("missing.tiff")),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn depth_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let depth = DepthMap::from_fn(6, 4, |x, y| if x == y { 0.0 } else { 500.0 + x as f32 * 7.0 });
        let png = dir.path().join("z.png");
        write_depth_png16(&png, &depth).unwrap();
        assert_eq!(read_depth(&png).unwrap(), depth);
        let tif = dir.path().join("z.tiff");
        let fine = DepthMap::from_fn(6, 4, |x, _| 512.25 + x as f32 / 3.0);
        write_depth_tiff(&tif, &fine).unwrap();
        assert_eq!(read_depth(&tif).unwrap(), fine);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn png_error_is_at_most_half_a_pixel(
            vals in proptest::collection::vec(prop_oneof![Just(0.0f32), 0.5f32..255.49], 64)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("q.png");
            let map = DisparityMap::from_vec(8, 8, vals).unwrap();
            write_disparity_pixel(&p, &map).unwrap();
            let back = read_disparity(&p).unwrap();
            for (a, b) in map.as_slice().iter().zip(back.as_slice()) {
                if *a > 0.0 {
                    prop_assert!((a - b).abs() <= 0.5);
                    prop_assert!(*b > 0.0);
                } else {
                    prop_assert_eq!(*b, 0.0);
                }
            }
        }
    }
}

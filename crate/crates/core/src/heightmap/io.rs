use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::HeightMap;
use crate::error::{Error, Result};

/// JSON sidecar describing a height raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub lateral_resolution_um: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_scale_nm: Option<f64>,
    #[serde(default)]
    pub painting_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_px: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_px: Option<usize>,
}

/// Load a 16-bit single-channel PNG or TIFF together with its JSON sidecar.
pub fn load_heightmap(image_path: &Path, metadata_path: &Path) -> Result<HeightMap> {
    let text = fs::read_to_string(metadata_path).map_err(|e| Error::io(metadata_path, e))?;
    let meta: MapMetadata = serde_json::from_str(&text).map_err(|e| Error::json(metadata_path, e))?;
    let resolution = meta.lateral_resolution_um.ok_or(Error::MissingField {
        path: metadata_path.to_path_buf(),
        field: "lateral_resolution_um",
    })?;

    if !image_path.exists() {
        return Err(Error::io(
            image_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let img = image::ImageReader::open(image_path)
        .map_err(|e| Error::io(image_path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(image_path, e))?
        .decode()
        .map_err(|e| Error::Image {
            path: image_path.to_path_buf(),
            message: e.to_string(),
        })?;
    let buf = match img {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::BitDepth {
                path: image_path.to_path_buf(),
                found: format!("{:?}", other.color()),
            })
        }
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    if let (Some(dw), Some(dh)) = (meta.width_px, meta.height_px) {
        if dw != w || dh != h {
            return Err(Error::DimensionMismatch {
                declared_w: dw,
                declared_h: dh,
                actual_w: w,
                actual_h: h,
            });
        }
    }

    let source_id = meta.painting_id.clone().unwrap_or_else(|| {
        image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let values = buf.into_raw().into_iter().map(f64::from).collect();
    let mut map = HeightMap::new(source_id, w, h, resolution, values)?;
    map.height_scale_nm = meta.height_scale_nm;
    Ok(map)
}

/// Write `map` as a 16-bit grayscale PNG plus JSON sidecar.
///
/// Values are rounded and clamped to `0..=65535`; callers are expected to
/// have shifted them into range already.
pub fn save_heightmap(map: &HeightMap, image_path: &Path, metadata_path: &Path) -> Result<()> {
    let raw: Vec<u16> = map
        .values
        .iter()
        .map(|v| v.round().clamp(0.0, 65535.0) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width_px as u32, map.height_px as u32, raw)
            .ok_or_else(|| Error::InvalidMap("buffer size does not match dimensions".into()))?;
    buf.save_with_format(image_path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: image_path.to_path_buf(),
            message: e.to_string(),
        })?;
    let meta = MapMetadata {
        lateral_resolution_um: Some(map.lateral_resolution_um),
        height_scale_nm: map.height_scale_nm,
        painting_id: Some(map.source_id.clone()),
        width_px: Some(map.width_px),
        height_px: Some(map.height_px),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(metadata_path, e))?;
    fs::write(metadata_path, text).map_err(|e| Error::io(metadata_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_meta(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("map.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_16bit_png_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..200 * 200).map(|i| (i % 65536) as f64).collect();
        let mut map = HeightMap::new("p1", 200, 200, 50.0, values).unwrap();
        map.height_scale_nm = Some(10.0);
        let img = dir.path().join("map.png");
        let meta = dir.path().join("map.json");
        save_heightmap(&map, &img, &meta).unwrap();

        let back = load_heightmap(&img, &meta).unwrap();
        assert_eq!(back.width_px, 200);
        assert_eq!(back.height_px, 200);
        assert_eq!(back.lateral_resolution_um, 50.0);
        assert_eq!(back.height_scale_nm, Some(10.0));
        assert_eq!(back.values, map.values);
    }

    #[test]
    fn loads_16bit_tiff() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("map.tif");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(20, 10, |x, y| Luma([(x * 100 + y) as u16]));
        buf.save_with_format(&img, image::ImageFormat::Tiff).unwrap();
        let meta = write_meta(dir.path(), r#"{"lateral_resolution_um": 50.0}"#);
        let map = load_heightmap(&img, &meta).unwrap();
        assert_eq!((map.width_px, map.height_px), (20, 10));
        assert_eq!(map.at(3, 2), 302.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let map = HeightMap::new("p", 200, 200, 50.0, vec![0.0; 40000]).unwrap();
        let img = dir.path().join("map.png");
        save_heightmap(&map, &img, &dir.path().join("ignored.json")).unwrap();
        let meta = write_meta(
            dir.path(),
            r#"{"lateral_resolution_um": 50.0, "width_px": 2400, "height_px": 3000}"#,
        );
        assert!(matches!(
            load_heightmap(&img, &meta),
            Err(Error::DimensionMismatch { declared_w: 2400, .. })
        ));
    }

    #[test]
    fn eight_bit_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("map8.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_pixel(16, 16, Luma([7u8]));
        buf.save(&img).unwrap();
        let meta = write_meta(dir.path(), r#"{"lateral_resolution_um": 50.0}"#);
        assert!(matches!(load_heightmap(&img, &meta), Err(Error::BitDepth { .. })));
    }

    #[test]
    fn missing_resolution_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let meta = write_meta(dir.path(), r#"{"painting_id": "x"}"#);
        let img = dir.path().join("absent.png");
        assert!(matches!(
            load_heightmap(&img, &meta),
            Err(Error::MissingField {
                field: "lateral_resolution_um",
                ..
            })
        ));
        let meta = write_meta(dir.path(), r#"{"lateral_resolution_um": 50.0}"#);
        assert!(matches!(load_heightmap(&img, &meta), Err(Error::Io { .. })));
    }
}

//! Height maps, regions and patch extraction.

mod detrend;
mod io;
mod patch;
mod region;

pub use detrend::{detrend, detrend_with, disk_offsets};
pub use io::{load_heightmap, save_heightmap, MapMetadata};
pub use patch::{
    octagon_orient, patchify_region, patchify_region_with, random_orientation, standardize_masked, OctagonMask,
    Orientation, Patch, PatchSet, MIN_PATCH_SIDE,
};
pub use region::{load_regions, Boundary, RegionSpec};

use crate::error::{Error, Result};

/// Calibrated surface height field.
///
/// `values` are row-major, in raw height units. Multiply by
/// `height_scale_nm` (when present) to get nanometers.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub source_id: String,
    pub width_px: usize,
    pub height_px: usize,
    /// Micrometers per pixel.
    pub lateral_resolution_um: f64,
    pub height_scale_nm: Option<f64>,
    pub values: Vec<f64>,
}

impl HeightMap {
    pub fn new(
        source_id: impl Into<String>,
        width_px: usize,
        height_px: usize,
        lateral_resolution_um: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let map = HeightMap {
            source_id: source_id.into(),
            width_px,
            height_px,
            lateral_resolution_um,
            height_scale_nm: None,
            values,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidMap("dimensions must be positive".into()));
        }
        if !(self.lateral_resolution_um > 0.0 && self.lateral_resolution_um.is_finite()) {
            return Err(Error::InvalidMap(format!(
                "lateral resolution must be positive, got {}",
                self.lateral_resolution_um
            )));
        }
        if self.values.len() != self.width_px * self.height_px {
            return Err(Error::InvalidMap(format!(
                "{} values for a {}x{} map",
                self.values.len(),
                self.width_px,
                self.height_px
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width_px + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width_px..(y + 1) * self.width_px]
    }

    /// Centimeters to whole pixels at this map's resolution.
    pub fn cm_to_px(&self, cm: f64) -> f64 {
        cm * 1e4 / self.lateral_resolution_um
    }

    pub fn width_cm(&self) -> f64 {
        self.width_px as f64 * self.lateral_resolution_um * 1e-4
    }

    pub fn height_cm(&self) -> f64 {
        self.height_px as f64 * self.lateral_resolution_um * 1e-4
    }

    /// Copy out the `side`×`side` square with top-left corner at (x0, y0).
    pub fn square(&self, x0: usize, y0: usize, side: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(side * side);
        for y in y0..y0 + side {
            out.extend_from_slice(&self.values[y * self.width_px + x0..y * self.width_px + x0 + side]);
        }
        out
    }
}

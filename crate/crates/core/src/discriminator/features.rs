use crate::error::{Error, Result};
use crate::heightmap::{Orientation, PatchSet};
use crate::par::Exec;
use crate::spectral::Fft2;

/// Width of the low-frequency band left out of the spectrum (columns, and
/// rows next to the origin).
pub const CENTRAL_BAND: usize = 13;

/// Shifted-spectrum coordinates kept as features for a `side`-pixel patch:
/// rows strictly above the central band, columns outside it.
pub fn feature_layout(side: usize) -> (std::ops::Range<usize>, Vec<usize>) {
    let half_band = CENTRAL_BAND / 2;
    let c = side / 2;
    let rows = 0..c.saturating_sub(half_band);
    let cols = (0..side).filter(|col| col.abs_diff(c) > half_band).collect();
    (rows, cols)
}

pub fn feature_len(side: usize) -> usize {
    let (rows, cols) = feature_layout(side);
    rows.len() * cols.len()
}

/// `log(1 + |F|)` over the upper half of the centered 2-D spectrum, minus
/// the central low-frequency band.
pub struct FourierFeatures {
    side: usize,
    fft: Fft2,
    rows: std::ops::Range<usize>,
    cols: Vec<usize>,
}

impl FourierFeatures {
    pub fn new(side: usize) -> Result<Self> {
        let (rows, cols) = feature_layout(side);
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Invalid(format!(
                "a {side} px patch leaves no spectrum outside the central {CENTRAL_BAND}-bin band"
            )));
        }
        Ok(FourierFeatures {
            side,
            fft: Fft2::new(side, side, false),
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extract(&mut self, pixels: &[f64]) -> Vec<f32> {
        let mag = self.fft.magnitude_shifted(pixels);
        let mut out = Vec::with_capacity(self.len());
        for r in self.rows.clone() {
            for &c in &self.cols {
                out.push(mag[r * self.side + c].ln_1p() as f32);
            }
        }
        out
    }
}

/// Features of every patch of a region at all eight orientations.
///
/// Orientation draws in the fold loop index into this table, so the FFTs
/// are done once per region instead of once per draw.
#[derive(Debug, Clone)]
pub struct FeatureBank {
    pub region_id: String,
    pub n_patches: usize,
    pub dim: usize,
    data: Vec<f32>,
}

impl FeatureBank {
    pub fn build(set: &PatchSet, exec: Exec) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Invalid(format!("region {} has no patches", set.region_id)));
        }
        let dim = FourierFeatures::new(set.side_px)?.len();
        let side = set.side_px;
        let per_patch = exec.map(&set.patches, |p| {
            let mut fx = FourierFeatures::new(side).expect("checked above");
            let mut v = Vec::with_capacity(8 * dim);
            for o in Orientation::ALL {
                v.extend(fx.extract(&p.oriented(o)));
            }
            v
        });
        Ok(FeatureBank {
            region_id: set.region_id.clone(),
            n_patches: set.len(),
            dim,
            data: per_patch.concat(),
        })
    }

    #[inline]
    pub fn get(&self, patch: usize, o: Orientation) -> &[f32] {
        let start = (patch * 8 + o.index()) * self.dim;
        &self.data[start..start + self.dim]
    }
}

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HeightMap, RegionSpec};
use crate::error::{Error, Result};
use crate::par::Exec;

pub const MIN_PATCH_SIDE: usize = 8;

/// Rotation by `k × 45°` about the patch center, `k ∈ 0..8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Orientation(u8);

impl Orientation {
    pub const ALL: [Orientation; 8] = [
        Orientation(0),
        Orientation(1),
        Orientation(2),
        Orientation(3),
        Orientation(4),
        Orientation(5),
        Orientation(6),
        Orientation(7),
    ];

    pub fn new(k: u8) -> Result<Self> {
        if k < 8 {
            Ok(Orientation(k))
        } else {
            Err(Error::Orientation(k))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn degrees(self) -> f64 {
        45.0 * self.0 as f64
    }
}

pub fn random_orientation<R: Rng + ?Sized>(rng: &mut R) -> Orientation {
    Orientation(rng.random_range(0..8u8))
}

/// Regular octagon inscribed in a `side`×`side` square: the square with its
/// four corners cut along lines at distance `side/2` from the center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OctagonMask {
    side: usize,
    inside: Vec<bool>,
    count: usize,
}

impl OctagonMask {
    pub fn new(side: usize) -> Self {
        let apothem = side as f64 / 2.0;
        let diag = apothem * SQRT_2;
        let mut inside = Vec::with_capacity(side * side);
        for y in 0..side {
            let v = (y as f64 + 0.5 - apothem).abs();
            for x in 0..side {
                let u = (x as f64 + 0.5 - apothem).abs();
                inside.push(u + v <= diag);
            }
        }
        let count = inside.iter().filter(|b| **b).count();
        OctagonMask { side, inside, count }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.side + x]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }
}

/// Zero-mean, unit-variance rescaling over the masked pixels; everything
/// outside the mask becomes 0. A (numerically) constant patch maps to all
/// zeros.
pub fn standardize_masked(pixels: &mut [f64], mask: &OctagonMask) {
    let m = mask.as_slice();
    let n = mask.count() as f64;
    let mean = pixels.iter().zip(m).filter(|(_, &k)| k).map(|(p, _)| *p).sum::<f64>() / n;
    let var = pixels
        .iter()
        .zip(m)
        .filter(|(_, &k)| k)
        .map(|(p, _)| (p - mean) * (p - mean))
        .sum::<f64>()
        / n;
    let sd = var.sqrt();
    let degenerate = !(sd > 1e-12 * mean.abs().max(1.0));
    for (p, &k) in pixels.iter_mut().zip(m) {
        *p = if k && !degenerate { (*p - mean) / sd } else { 0.0 };
    }
}

fn rotate(src: &[f64], side: usize, o: Orientation, mask: &OctagonMask) -> Vec<f64> {
    let last = side - 1;
    let mut out = vec![0.0; side * side];
    match o.0 {
        0 => out.copy_from_slice(src),
        // quarter turns are exact index permutations
        2 => {
            for y in 0..side {
                for x in 0..side {
                    out[y * side + x] = src[(last - x) * side + y];
                }
            }
        }
        4 => {
            for y in 0..side {
                for x in 0..side {
                    out[y * side + x] = src[(last - y) * side + (last - x)];
                }
            }
        }
        6 => {
            for y in 0..side {
                for x in 0..side {
                    out[y * side + x] = src[x * side + (last - y)];
                }
            }
        }
        k => {
            let theta = k as f64 * FRAC_PI_4;
            let (s, c) = theta.sin_cos();
            let ctr = last as f64 / 2.0;
            let fetch = |xi: isize, yi: isize| {
                let xi = xi.clamp(0, last as isize) as usize;
                let yi = yi.clamp(0, last as isize) as usize;
                src[yi * side + xi]
            };
            for y in 0..side {
                for x in 0..side {
                    if !mask.contains(x, y) {
                        continue;
                    }
                    // inverse rotation of the output coordinate
                    let dx = x as f64 - ctr;
                    let dy = y as f64 - ctr;
                    let sx = c * dx + s * dy + ctr;
                    let sy = -s * dx + c * dy + ctr;
                    let x0 = sx.floor();
                    let y0 = sy.floor();
                    let fx = sx - x0;
                    let fy = sy - y0;
                    let (xi, yi) = (x0 as isize, y0 as isize);
                    let top = fetch(xi, yi) * (1.0 - fx) + fetch(xi + 1, yi) * fx;
                    let bot = fetch(xi, yi + 1) * (1.0 - fx) + fetch(xi + 1, yi + 1) * fx;
                    out[y * side + x] = top * (1.0 - fy) + bot * fy;
                }
            }
        }
    }
    out
}

/// Rotate a square patch by `orientation`, apply the octagon mask and
/// standardize over the masked pixels.
pub fn octagon_orient(
    pixels: &[f64],
    rows: usize,
    cols: usize,
    orientation: Orientation,
    mask: &OctagonMask,
) -> Result<Vec<f64>> {
    if rows != cols || pixels.len() != rows * cols {
        return Err(Error::NonSquare { rows, cols });
    }
    if mask.side() != rows {
        return Err(Error::Invalid(format!(
            "mask side {} does not match patch side {rows}",
            mask.side()
        )));
    }
    let mut out = rotate(pixels, rows, orientation, mask);
    standardize_masked(&mut out, mask);
    Ok(out)
}

/// One grid cell cut from a region.
#[derive(Debug, Clone)]
pub struct Patch {
    pub region_id: String,
    pub index: usize,
    /// Top-left pixel in map coordinates.
    pub origin: (usize, usize),
    pub side_px: usize,
    /// Detrended heights of the full square, before masking.
    pub raw: Vec<f64>,
    /// Masked, standardized heights at `orientation`.
    pub pixels: Vec<f64>,
    pub mask: Arc<OctagonMask>,
    pub orientation: Orientation,
}

impl Patch {
    pub fn oriented(&self, o: Orientation) -> Vec<f64> {
        octagon_orient(&self.raw, self.side_px, self.side_px, o, &self.mask)
            .expect("patch squares are square by construction")
    }

    pub fn with_orientation(&self, o: Orientation) -> Patch {
        Patch {
            pixels: self.oriented(o),
            orientation: o,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    pub region_id: String,
    pub patch_grid_origin: (usize, usize),
    pub side_px: usize,
    pub patches: Vec<Patch>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Patches `range` as a new set (used to split a region into halves).
    pub fn subset(&self, region_id: &str, range: std::ops::Range<usize>) -> PatchSet {
        PatchSet {
            region_id: region_id.to_string(),
            patch_grid_origin: self.patch_grid_origin,
            side_px: self.side_px,
            patches: self.patches[range]
                .iter()
                .enumerate()
                .map(|(i, p)| Patch {
                    region_id: region_id.to_string(),
                    index: i,
                    ..p.clone()
                })
                .collect(),
        }
    }
}

pub fn patchify_region(map: &HeightMap, region: &RegionSpec, patch_size_cm: f64) -> Result<PatchSet> {
    patchify_region_with(map, region, patch_size_cm, Exec::default())
}

/// Cut the maximal grid of non-overlapping `patch_size_cm` squares that lie
/// fully inside `region`, anchored at the region's bounding-box corner and
/// indexed row-major.
pub fn patchify_region_with(map: &HeightMap, region: &RegionSpec, patch_size_cm: f64, exec: Exec) -> Result<PatchSet> {
    region.validate(map)?;
    let side = map.cm_to_px(patch_size_cm).round() as usize;
    if side < MIN_PATCH_SIDE {
        return Err(Error::PatchTooSmall {
            side_px: side,
            min: MIN_PATCH_SIDE,
        });
    }
    let (x0, y0, x1, y1) = region.bbox();
    let cols = (x1 - x0) / side;
    let rows = (y1 - y0) / side;

    let cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (x0 + c * side, y0 + r * side)))
        .filter(|&(cx, cy)| (cy..cy + side).all(|y| (cx..cx + side).all(|x| region.contains_pixel(x, y))))
        .collect();
    if cells.is_empty() {
        return Err(Error::RegionTooSmall {
            region_id: region.region_id.clone(),
            side_px: side,
        });
    }

    let mask = Arc::new(OctagonMask::new(side));
    let patches = exec.map_range(cells.len(), |i| {
        let (cx, cy) = cells[i];
        let raw = map.square(cx, cy, side);
        let mut pixels = raw.clone();
        standardize_masked(&mut pixels, &mask);
        Patch {
            region_id: region.region_id.clone(),
            index: i,
            origin: (cx, cy),
            side_px: side,
            raw,
            pixels,
            mask: Arc::clone(&mask),
            orientation: Orientation(0),
        }
    });

    Ok(PatchSet {
        region_id: region.region_id.clone(),
        patch_grid_origin: (x0, y0),
        side_px: side,
        patches,
    })
}

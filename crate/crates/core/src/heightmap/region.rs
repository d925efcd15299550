use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HeightMap;
use crate::error::{Error, Result};

/// Region outline in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// x, y, width, height.
    Rect { x: usize, y: usize, w: usize, h: usize },
    /// Simple polygon; vertices in pixel coordinates, implicitly closed.
    Polygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionRecord", into = "RegionRecord")]
pub struct RegionSpec {
    pub region_id: String,
    pub painting_id: String,
    pub boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
struct RegionRecord {
    region_id: String,
    painting_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rect: Option<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polygon: Option<Vec<[f64; 2]>>,
}

impl TryFrom<RegionRecord> for RegionSpec {
    type Error = String;

    fn try_from(r: RegionRecord) -> Result<Self, String> {
        let boundary = match (r.rect, r.polygon) {
            (Some([x, y, w, h]), None) => Boundary::Rect { x, y, w, h },
            (None, Some(pts)) if pts.len() >= 3 => Boundary::Polygon(pts),
            (None, Some(_)) => return Err(format!("region {}: polygon needs at least 3 points", r.region_id)),
            _ => {
                return Err(format!(
                    "region {}: exactly one of `rect` or `polygon` is required",
                    r.region_id
                ))
            }
        };
        Ok(RegionSpec {
            region_id: r.region_id,
            painting_id: r.painting_id,
            boundary,
        })
    }
}

impl From<RegionSpec> for RegionRecord {
    fn from(r: RegionSpec) -> Self {
        let (rect, polygon) = match r.boundary {
            Boundary::Rect { x, y, w, h } => (Some([x, y, w, h]), None),
            Boundary::Polygon(p) => (None, Some(p)),
        };
        RegionRecord {
            region_id: r.region_id,
            painting_id: r.painting_id,
            rect,
            polygon,
        }
    }
}

impl RegionSpec {
    pub fn rect(region_id: &str, painting_id: &str, x: usize, y: usize, w: usize, h: usize) -> Self {
        RegionSpec {
            region_id: region_id.into(),
            painting_id: painting_id.into(),
            boundary: Boundary::Rect { x, y, w, h },
        }
    }

    /// The whole map as one region.
    pub fn full(region_id: &str, map: &HeightMap) -> Self {
        Self::rect(region_id, &map.source_id, 0, 0, map.width_px, map.height_px)
    }

    /// Integer bounding box `(x0, y0, x1, y1)`, half-open.
    pub fn bbox(&self) -> (usize, usize, usize, usize) {
        match &self.boundary {
            Boundary::Rect { x, y, w, h } => (*x, *y, x + w, y + h),
            Boundary::Polygon(pts) => {
                let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
                let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for [x, y] in pts {
                    x0 = x0.min(*x);
                    y0 = y0.min(*y);
                    x1 = x1.max(*x);
                    y1 = y1.max(*y);
                }
                (
                    x0.max(0.0).floor() as usize,
                    y0.max(0.0).floor() as usize,
                    x1.max(0.0).ceil() as usize,
                    y1.max(0.0).ceil() as usize,
                )
            }
        }
    }

    /// Area in square pixels.
    pub fn area_px(&self) -> f64 {
        match &self.boundary {
            Boundary::Rect { w, h, .. } => (*w * *h) as f64,
            Boundary::Polygon(pts) => {
                let n = pts.len();
                let twice: f64 = (0..n)
                    .map(|i| {
                        let [x0, y0] = pts[i];
                        let [x1, y1] = pts[(i + 1) % n];
                        x0 * y1 - x1 * y0
                    })
                    .sum();
                twice.abs() / 2.0
            }
        }
    }

    pub fn area_cm2(&self, map: &HeightMap) -> f64 {
        let cm_per_px = map.lateral_resolution_um * 1e-4;
        self.area_px() * cm_per_px * cm_per_px
    }

    /// Whether the pixel with top-left corner (x, y) lies inside, judged at
    /// its center.
    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        match &self.boundary {
            Boundary::Rect { x: rx, y: ry, w, h } => x >= *rx && x < rx + w && y >= *ry && y < ry + h,
            Boundary::Polygon(pts) => point_in_polygon(pts, x as f64 + 0.5, y as f64 + 0.5),
        }
    }

    /// Check that the boundary lies within `map`.
    pub fn validate(&self, map: &HeightMap) -> Result<()> {
        let invalid = |reason: String| Error::InvalidRegion {
            region_id: self.region_id.clone(),
            reason,
        };
        match &self.boundary {
            Boundary::Rect { w, h, .. } if *w == 0 || *h == 0 => return Err(invalid("empty rectangle".into())),
            Boundary::Polygon(pts) if pts.iter().any(|[x, y]| *x < 0.0 || *y < 0.0) => {
                return Err(invalid("polygon has negative coordinates".into()))
            }
            _ => {}
        }
        let (_, _, x1, y1) = self.bbox();
        if x1 > map.width_px || y1 > map.height_px {
            return Err(invalid(format!(
                "extends to ({x1}, {y1}) beyond the {}x{} map",
                map.width_px, map.height_px
            )));
        }
        Ok(())
    }

    /// Check the configured area bounds (in cm²).
    pub fn check_area(&self, map: &HeightMap, min_cm2: f64, max_cm2: f64) -> Result<()> {
        let a = self.area_cm2(map);
        if a < min_cm2 || a > max_cm2 {
            return Err(Error::InvalidRegion {
                region_id: self.region_id.clone(),
                reason: format!("area {a:.1} cm² outside [{min_cm2}, {max_cm2}]"),
            });
        }
        Ok(())
    }
}

fn point_in_polygon(pts: &[[f64; 2]], px: f64, py: f64) -> bool {
    let mut inside = false;
    let n = pts.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = pts[i];
        let [xj, yj] = pts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Read a JSON array of region specs.
pub fn load_regions(path: &Path) -> Result<Vec<RegionSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

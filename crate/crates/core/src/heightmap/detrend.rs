use super::HeightMap;
use crate::error::{Error, Result};
use crate::par::Exec;

/// Half-widths of a discrete disk: for each row offset `dy` in `-r..=r`,
/// the pixels `dx` with `dx² + dy² <= radius²`.
pub fn disk_offsets(radius_px: f64) -> Vec<(isize, usize)> {
    let r = radius_px.floor() as isize;
    let r2 = radius_px * radius_px;
    (-r..=r)
        .map(|dy| {
            let rem = r2 - (dy * dy) as f64;
            // floor(sqrt) with a nudge so exact squares are not lost to rounding
            let hw = (rem.max(0.0).sqrt() + 1e-9).floor() as usize;
            (dy, hw)
        })
        .collect()
}

/// Subtract a disk mean-filtered copy of `map` (radius in centimeters).
/// Borders use replicate padding.
pub fn detrend(map: &HeightMap, filter_radius_cm: f64) -> Result<HeightMap> {
    detrend_with(map, filter_radius_cm, Exec::default())
}

pub fn detrend_with(map: &HeightMap, filter_radius_cm: f64, exec: Exec) -> Result<HeightMap> {
    map.validate()?;
    let radius_px = map.cm_to_px(filter_radius_cm);
    if !(radius_px >= 1.0) {
        return Err(Error::RadiusTooSmall { radius_px });
    }
    let (w, h) = (map.width_px, map.height_px);
    let offsets = disk_offsets(radius_px);
    let count: f64 = offsets.iter().map(|(_, hw)| (2 * hw + 1) as f64).sum();

    // Row prefix sums: prefix[y * (w + 1) + x] = sum of row y over [0, x).
    let mut prefix = vec![0.0f64; h * (w + 1)];
    exec.for_chunks(&mut prefix, w + 1, |y, p| {
        let row = map.row(y);
        let mut acc = 0.0;
        for x in 0..w {
            p[x] = acc;
            acc += row[x];
        }
        p[w] = acc;
    });

    let mut out = vec![0.0f64; w * h];
    exec.for_chunks(&mut out, w, |y, out_row| {
        for (x, o) in out_row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for &(dy, hw) in &offsets {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let p = &prefix[yy * (w + 1)..(yy + 1) * (w + 1)];
                let lo = x as isize - hw as isize;
                let hi = x as isize + hw as isize;
                let clo = lo.max(0) as usize;
                let chi = hi.min(w as isize - 1) as usize;
                sum += p[chi + 1] - p[clo];
                if lo < 0 {
                    sum += (-lo) as f64 * (p[1] - p[0]);
                }
                if hi > w as isize - 1 {
                    sum += (hi - (w as isize - 1)) as f64 * (p[w] - p[w - 1]);
                }
            }
            *o = map.values[y * w + x] - sum / count;
        }
    });

    Ok(HeightMap {
        values: out,
        ..map.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct disk convolution with replicate padding.
    fn direct_detrend(map: &HeightMap, radius_px: f64) -> Vec<f64> {
        let (w, h) = (map.width_px as isize, map.height_px as isize);
        let r = radius_px.floor() as isize;
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let (mut s, mut n) = (0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        if ((dx * dx + dy * dy) as f64) <= radius_px * radius_px {
                            let xx = (x + dx).clamp(0, w - 1) as usize;
                            let yy = (y + dy).clamp(0, h - 1) as usize;
                            s += map.at(xx, yy);
                            n += 1.0;
                        }
                    }
                }
                out[(y * w + x) as usize] = map.at(x as usize, y as usize) - s / n;
            }
        }
        out
    }

    fn map_from(w: usize, h: usize, res: f64, f: impl Fn(usize, usize) -> f64) -> HeightMap {
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                v.push(f(x, y));
            }
        }
        HeightMap::new("t", w, h, res, v).unwrap()
    }

    #[test]
    fn constant_map_detrends_to_zero() {
        let m = map_from(40, 30, 50.0, |_, _| 1234.0);
        let d = detrend(&m, 0.05).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn matches_direct_convolution() {
        let m = map_from(37, 29, 100.0, |x, y| ((x * 31 + y * 17) % 23) as f64 + 0.1 * x as f64);
        // radius 0.07 cm at 100 um/px = 7 px
        let d = detrend(&m, 0.07).unwrap();
        let oracle = direct_detrend(&m, 7.0);
        for (a, b) in d.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_ramp_interior_residual_is_small() {
        let m = map_from(120, 100, 50.0, |x, y| 3.0 * x as f64 + 0.5 * y as f64);
        let range = 3.0 * 119.0 + 0.5 * 99.0;
        let r = 20usize; // 0.1 cm
        let d = detrend(&m, 0.1).unwrap();
        let oracle = direct_detrend(&m, 20.0);
        for y in r..100 - r {
            for x in r..120 - r {
                let v = d.at(x, y);
                assert!(v.abs() < 0.01 * range);
                assert!((v - oracle[y * 120 + x]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn short_wavelength_sinusoid_survives() {
        // wavelength 0.1 cm at 50 um/px = 20 px; radius 0.5 cm = 100 px
        let amp = 100.0;
        let m = map_from(260, 240, 50.0, |x, _| {
            amp * (2.0 * std::f64::consts::PI * x as f64 / 20.0).sin()
        });
        let d = detrend(&m, 0.5).unwrap();
        for y in 100..140 {
            for x in 100..160 {
                assert!((d.at(x, y) - m.at(x, y)).abs() < 0.05 * amp);
            }
        }
    }

    #[test]
    fn sub_pixel_radius_is_rejected() {
        let m = map_from(10, 10, 50.0, |_, _| 0.0);
        assert!(matches!(detrend(&m, 0.004), Err(Error::RadiusTooSmall { .. })));
    }

    #[test]
    fn sequential_matches_parallel() {
        let m = map_from(64, 48, 100.0, |x, y| ((x * y) % 13) as f64);
        let a = detrend_with(&m, 0.05, Exec::Sequential).unwrap();
        let b = detrend_with(&m, 0.05, Exec::Parallel).unwrap();
        assert_eq!(a.values, b.values);
    }

    proptest! {
        #[test]
        fn detrend_is_linear(
            xs in prop::collection::vec(-1e3f64..1e3, 24 * 18),
            ys in prop::collection::vec(-1e3f64..1e3, 24 * 18),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let mx = HeightMap::new("x", 24, 18, 100.0, xs).unwrap();
            let my = HeightMap::new("y", 24, 18, 100.0, ys).unwrap();
            let combo = HeightMap::new(
                "c", 24, 18, 100.0,
                mx.values.iter().zip(&my.values).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let dx = detrend(&mx, 0.04).unwrap();
            let dy = detrend(&my, 0.04).unwrap();
            let dc = detrend(&combo, 0.04).unwrap();
            let scale = 1.0 + dc.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..dc.values.len() {
                let lin = a * dx.values[i] + b * dy.values[i];
                prop_assert!((dc.values[i] - lin).abs() <= 1e-9 * scale);
            }
        }
    }
}

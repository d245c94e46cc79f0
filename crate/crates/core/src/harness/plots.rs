//! Static PNG renderings of sweeps, basins and branches. Built with the
//! `plots` feature; otherwise every call logs that it was skipped.

use std::path::Path;

use crate::basins::BasinGrid;
use crate::continuation::BifurcationBranch;
use crate::error::Result;

use super::SweepRow;

#[cfg(feature = "plots")]
mod draw {
    use super::*;
    use crate::analysis::AttractorKind;
    use crate::basins::DIVERGED;
    use crate::error::Error;
    use image::{Rgb, RgbImage};

    pub fn kind_rgb(kind: &str) -> Rgb<u8> {
        match AttractorKind::parse(kind).map(AttractorKind::color) {
            Some("blue") => Rgb([40, 80, 220]),
            Some("yellow") => Rgb([240, 210, 40]),
            Some("magenta") => Rgb([210, 40, 200]),
            Some("black") => Rgb([0, 0, 0]),
            Some("green") => Rgb([40, 170, 60]),
            _ => Rgb([150, 150, 150]),
        }
    }

    fn catalog_rgb(k: i64) -> Rgb<u8> {
        const PALETTE: [[u8; 3]; 8] =
            [[40, 80, 220], [220, 60, 40], [40, 170, 60], [240, 210, 40], [210, 40, 200], [30, 190, 200], [120, 70, 30], [0, 0, 0]];
        if k == DIVERGED {
            Rgb([150, 150, 150])
        } else {
            Rgb(PALETTE[k as usize % PALETTE.len()])
        }
    }

    fn save(img: RgbImage, path: &Path) -> Result<()> {
        img.save(path).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    /// Unique sorted values of `v`.
    fn axis(v: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut a: Vec<f64> = v.collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    /// Two panels side by side, `x_cen` across and `rho` upward; left is `A`, right is `B`.
    pub fn sweep_png(rows: &[SweepRow], path: &Path) -> Result<()> {
        const CELL: u32 = 8;
        let xs = axis(rows.iter().map(|r| r.x_cen));
        let rs = axis(rows.iter().map(|r| r.rho));
        let (w, h) = (xs.len() as u32 * CELL, rs.len() as u32 * CELL);
        let mut img = RgbImage::from_pixel(2 * w + CELL, h, Rgb([255, 255, 255]));
        for r in rows {
            let i = xs.iter().position(|x| *x == r.x_cen).expect("on axis") as u32;
            let j = rs.iter().position(|x| *x == r.rho).expect("on axis") as u32;
            for (panel, class) in [(0, &r.class_a), (w + CELL, &r.class_b)] {
                let c = kind_rgb(class);
                for dx in 0..CELL {
                    for dy in 0..CELL {
                        img.put_pixel(panel + i * CELL + dx, h - 1 - (j * CELL + dy), c);
                    }
                }
            }
        }
        save(img, path)
    }

    pub fn basin_png(grid: &BasinGrid, path: &Path) -> Result<()> {
        const CELL: u32 = 4;
        let mut img = RgbImage::new(grid.nx as u32 * CELL, grid.ny as u32 * CELL);
        let h = img.height();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let c = catalog_rgb(grid.label_at(i, j));
                for dx in 0..CELL {
                    for dy in 0..CELL {
                        img.put_pixel(i as u32 * CELL + dx, h - 1 - (j as u32 * CELL + dy), c);
                    }
                }
            }
        }
        save(img, path)
    }

    /// Extrema against the parameter, one dot per maximum.
    pub fn branch_png(branch: &BifurcationBranch, path: &Path) -> Result<()> {
        let (w, h) = (640u32, 400u32);
        let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
        let ps: Vec<f64> = branch.points.iter().map(|p| p.param).collect();
        let es: Vec<f64> = branch.points.iter().flat_map(|p| p.extrema.iter().copied()).collect();
        if ps.is_empty() || es.is_empty() {
            return save(img, path);
        }
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, if hi > lo { hi - lo } else { 1.0 })
        };
        let ((p0, pw), (e0, ew)) = (span(&ps), span(&es));
        for p in &branch.points {
            let c = kind_rgb(p.label.kind.as_str());
            let x = ((p.param - p0) / pw * (w - 11) as f64) as u32 + 5;
            for e in &p.extrema {
                let y = h - 6 - ((e - e0) / ew * (h - 11) as f64) as u32;
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    img.put_pixel((x + dx).min(w - 1), (y + dy).min(h - 1), c);
                }
            }
        }
        save(img, path)
    }
}

#[cfg(feature = "plots")]
pub use draw::{basin_png, branch_png, sweep_png};

#[cfg(not(feature = "plots"))]
fn skipped(path: &Path) -> Result<()> {
    log::warn!("built without the 'plots' feature; skipping {}", path.display());
    Ok(())
}

#[cfg(not(feature = "plots"))]
pub fn sweep_png(_: &[SweepRow], path: &Path) -> Result<()> {
    skipped(path)
}

#[cfg(not(feature = "plots"))]
pub fn basin_png(_: &BasinGrid, path: &Path) -> Result<()> {
    skipped(path)
}

#[cfg(not(feature = "plots"))]
pub fn branch_png(_: &BifurcationBranch, path: &Path) -> Result<()> {
    skipped(path)
}

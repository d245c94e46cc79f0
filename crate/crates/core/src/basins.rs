//! Basins of attraction as seen from the projected plane.
//!
//! A plane point `p` is encoded as the reservoir state reached by driving the
//! open loop with the constant input `p`; the closed loop released from that
//! state is then classified. Cells are evaluated in parallel and merged into a
//! catalog of distinct attractors afterwards, in row-major order, so the
//! result does not depend on scheduling.

use std::io::Write;

use rayon::prelude::*;

use crate::analysis::{classify_prediction, distance, hausdorff, AttractorKind, AttractorLabel, Target, Thresholds};
use crate::dynamics::{drive_constant, run_closed_loop, RunOptions, SettleCheck, TrainedReadout};
use crate::error::Result;
use crate::netgen::Reservoir;
use crate::taskgen::{OrbitSpec, Trajectory};

/// Catalog index of cells whose integration diverged.
pub const DIVERGED: i64 = -1;

/// Stride used when keeping a representative orbit.
const REPRESENTATIVE_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self { x_min: -10.0, x_max: 10.0, y_min: -10.0, y_max: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinOptions {
    pub region: Region,
    pub nx: usize,
    pub ny: usize,
    pub t_listen: f64,
    pub t_predict: f64,
    pub assess_window: f64,
    /// Stop the constant drive once no component moves more than this in one step.
    pub listen_tol: Option<f64>,
    /// Stop the closed loop once it has come to rest.
    pub settle: Option<SettleCheck>,
}

impl Default for BasinOptions {
    fn default() -> Self {
        Self {
            region: Region::default(),
            nx: 101,
            ny: 101,
            t_listen: 200.0,
            t_predict: 600.0,
            assess_window: 40.0,
            listen_tol: Some(1e-10),
            settle: Some(SettleCheck { every: 137, tol: 1e-4 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub label: AttractorLabel,
    /// Closing window of the first cell that reached this attractor, subsampled.
    pub representative: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub label: AttractorLabel,
    pub representative: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub region: Region,
    pub nx: usize,
    pub ny: usize,
    /// Catalog index per cell, row-major with `y` rows and `x` columns.
    pub labels: Vec<i64>,
    pub catalog: Vec<CatalogEntry>,
    pub cells: Vec<CellOutcome>,
}

impl BasinGrid {
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        grid_point(&self.region, self.nx, self.ny, i, j)
    }

    pub fn label_at(&self, i: usize, j: usize) -> i64 {
        self.labels[j * self.nx + i]
    }
}

fn grid_point(r: &Region, nx: usize, ny: usize, i: usize, j: usize) -> [f64; 2] {
    let fx = if nx > 1 { i as f64 / (nx - 1) as f64 } else { 0.5 };
    let fy = if ny > 1 { j as f64 / (ny - 1) as f64 } else { 0.5 };
    [r.x_min + fx * (r.x_max - r.x_min), r.y_min + fy * (r.y_max - r.y_min)]
}

/// `r(t_listen)` under the constant drive `point` from `r(0) = 0`.
pub fn point_response(res: &Reservoir<'_>, point: &[f64], t_listen: f64, tol: Option<f64>) -> Result<Vec<f64>> {
    let steps = (t_listen / res.tau()).round() as usize;
    Ok(drive_constant(res, point, &vec![0.0; res.n()], steps, tol)?.0)
}

/// Encodes, releases and classifies one plane point.
pub fn evaluate_point(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    point: &[f64],
    targets: (&OrbitSpec, &OrbitSpec),
    opts: &BasinOptions,
) -> CellOutcome {
    let th = Thresholds::for_radius(targets.0.radius());
    let outcome = (|| -> Result<CellOutcome> {
        let r_d = point_response(res, point, opts.t_listen, opts.listen_tol)?;
        let steps = (opts.t_predict / res.tau()).round() as usize;
        let window = (opts.assess_window / res.tau()).round() as usize;
        let run_opts = RunOptions { record_from: steps.saturating_sub(window), settle: opts.settle, ..Default::default() };
        let run = run_closed_loop(res, readout, &r_d, steps, &run_opts)?;
        if run.settled {
            let u = crate::dynamics::readout_apply(readout, &run.final_state);
            let label = AttractorLabel {
                kind: AttractorKind::FixedPoint,
                extrema: vec![u[0]],
                centre: u.clone(),
                winding: 0,
                period: None,
                delta_rel: None,
                clusters: 1,
            };
            let rep = Trajectory::new(u.len(), res.tau(), u)?;
            return Ok(CellOutcome { label, representative: Some(rep) });
        }
        let label = classify_prediction(&run.projected, targets, Target::A, opts.assess_window, &th);
        let w = run.projected.tail(opts.assess_window);
        let keep: Vec<Vec<f64>> = w.samples().step_by(REPRESENTATIVE_STRIDE).map(|s| s.to_vec()).collect();
        let rep = Trajectory::from_samples(res.tau() * REPRESENTATIVE_STRIDE as f64, &keep)?;
        Ok(CellOutcome { label, representative: Some(rep) })
    })();
    outcome.unwrap_or(CellOutcome { label: AttractorLabel::diverged(), representative: None })
}

/// Identity test for two attractors found from different starts.
pub fn same_attractor(a: &CatalogEntry, b: &CellOutcome, th: &Thresholds, b_radius: f64) -> bool {
    if a.label.kind != b.label.kind || a.label.kind == AttractorKind::Diverged {
        return false;
    }
    let close = distance(&a.label.centre, &b.label.centre) < th.eps_cen;
    match a.label.kind {
        AttractorKind::FixedPoint => close,
        _ => {
            close
                && a.label.winding == b.label.winding
                && b.representative.as_ref().is_some_and(|r| hausdorff(&a.representative, r) < 0.1 * b_radius)
        }
    }
}

/// Evaluates every cell and merges the outcomes into a catalog.
pub fn map_basins(
    res: &Reservoir<'_>,
    readout: &TrainedReadout,
    targets: (&OrbitSpec, &OrbitSpec),
    opts: &BasinOptions,
) -> Result<BasinGrid> {
    if opts.nx < 2 || opts.ny < 2 {
        return Err(crate::Error::InvalidParameter(format!("resolution must be at least 2x2, got {}x{}", opts.nx, opts.ny)));
    }
    let cells: Vec<CellOutcome> = (0..opts.nx * opts.ny)
        .into_par_iter()
        .map(|k| {
            let p = grid_point(&opts.region, opts.nx, opts.ny, k % opts.nx, k / opts.nx);
            evaluate_point(res, readout, &p, targets, opts)
        })
        .collect();
    Ok(merge_cells(opts.region, opts.nx, opts.ny, cells, targets.0.radius()))
}

/// Builds the catalog by first occurrence in row-major order.
pub fn merge_cells(region: Region, nx: usize, ny: usize, cells: Vec<CellOutcome>, b: f64) -> BasinGrid {
    let th = Thresholds::for_radius(b);
    let mut catalog: Vec<CatalogEntry> = Vec::new();
    let labels = cells
        .iter()
        .map(|c| {
            if c.label.kind == AttractorKind::Diverged {
                return DIVERGED;
            }
            if let Some(k) = catalog.iter().position(|e| same_attractor(e, c, &th, b)) {
                return k as i64;
            }
            catalog.push(CatalogEntry {
                label: c.label.clone(),
                representative: c.representative.clone().expect("finite cells keep a representative"),
            });
            (catalog.len() - 1) as i64
        })
        .collect();
    BasinGrid { region, nx, ny, labels, catalog, cells }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorReport {
    pub checked: usize,
    pub consistent: usize,
    /// Grid indices `(i, j)` of failing cells.
    pub failures: Vec<(usize, usize)>,
}

impl MirrorReport {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.consistent as f64 / self.checked as f64
        }
    }
}

/// Checks that the attractors reached from `p` and `-p` are negations of each
/// other within `eps_cen`. Needs a region symmetric about the origin; the
/// origin cell is skipped.
pub fn mirror_consistency(grid: &BasinGrid, b: f64) -> MirrorReport {
    let th = Thresholds::for_radius(b);
    let mut report = MirrorReport { checked: 0, consistent: 0, failures: vec![] };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (mi, mj) = (grid.nx - 1 - i, grid.ny - 1 - j);
            if (i, j) == (mi, mj) {
                continue;
            }
            report.checked += 1;
            let a = &grid.cells[j * grid.nx + i];
            let m = &grid.cells[mj * grid.nx + mi];
            let ok = match (&a.representative, &m.representative) {
                (Some(ra), Some(rm)) if a.label.kind == m.label.kind => {
                    let neg_centre: Vec<f64> = m.label.centre.iter().map(|v| -v).collect();
                    let centre_ok = distance(&a.label.centre, &neg_centre) < th.eps_cen;
                    if a.label.kind == AttractorKind::FixedPoint {
                        centre_ok
                    } else {
                        let neg = rm.map_samples(|s, o| o.iter_mut().zip(s).for_each(|(d, v)| *d = -v));
                        centre_ok && hausdorff(ra, &neg) < th.eps_cen
                    }
                }
                _ => false,
            };
            if ok {
                report.consistent += 1;
            } else {
                report.failures.push((i, j));
            }
        }
    }
    report
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Grid CSV `x,y,catalog_index,kind,winding`.
pub fn write_grid_csv<W: Write>(grid: &BasinGrid, mut w: W) -> Result<()> {
    writeln!(w, "x,y,catalog_index,kind,winding")?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let [x, y] = grid.point(i, j);
            let c = &grid.cells[j * grid.nx + i];
            writeln!(w, "{x},{y},{},{},{}", grid.label_at(i, j), c.label.kind.as_str(), c.label.winding)?;
        }
    }
    Ok(())
}

/// Catalog CSV `catalog_index,kind,centre_x,centre_y,winding,period,delta_rel`.
pub fn write_catalog_csv<W: Write>(grid: &BasinGrid, mut w: W) -> Result<()> {
    writeln!(w, "catalog_index,kind,centre_x,centre_y,winding,period,delta_rel")?;
    for (k, e) in grid.catalog.iter().enumerate() {
        let l = &e.label;
        writeln!(
            w,
            "{k},{},{},{},{},{},{}",
            l.kind.as_str(),
            l.centre[0],
            l.centre[1],
            l.winding,
            fmt_opt(l.period),
            fmt_opt(l.delta_rel)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{NetParams, ReservoirNet};
    use crate::taskgen::{generate_orbit, seeing_double_pair, RotationMode};
    use nalgebra::DMatrix;

    fn fp(x: f64, y: f64) -> CellOutcome {
        CellOutcome {
            label: AttractorLabel {
                kind: AttractorKind::FixedPoint,
                centre: vec![x, y],
                winding: 0,
                period: None,
                delta_rel: None,
                extrema: vec![x],
                clusters: 1,
            },
            representative: Some(Trajectory::new(2, 0.01, vec![x, y]).unwrap()),
        }
    }

    fn cycle(spec: &OrbitSpec) -> CellOutcome {
        let t = generate_orbit(spec, 4000).unwrap();
        CellOutcome {
            label: AttractorLabel {
                kind: AttractorKind::CorrectCycle,
                centre: spec.centre().to_vec(),
                winding: spec.winding(),
                period: Some(std::f64::consts::TAU),
                delta_rel: Some(0.0),
                extrema: vec![spec.x_cen + spec.radius()],
                clusters: 1,
            },
            representative: Some(t),
        }
    }

    #[test]
    fn point_response_is_odd_and_zero_at_origin() {
        let net = ReservoirNet::build(NetParams { n: 40, p: 0.1, ..Default::default() }).unwrap();
        let res = net.at_rho(0.8).unwrap();
        assert!(point_response(&res, &[0.0, 0.0], 200.0, None).unwrap().iter().all(|v| *v == 0.0));
        let a = point_response(&res, &[3.0, -1.0], 200.0, Some(1e-13)).unwrap();
        let b = point_response(&res, &[-3.0, 1.0], 200.0, Some(1e-13)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
        assert_eq!(a, point_response(&res, &[3.0, -1.0], 200.0, Some(1e-13)).unwrap());
        let full = point_response(&res, &[3.0, -1.0], 200.0, None).unwrap();
        assert!(a.iter().zip(&full).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    #[test]
    fn catalog_merges_by_first_occurrence() {
        let (a, b) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        let cells = vec![fp(1.0, 1.0), cycle(&a), fp(1.1, 0.9), CellOutcome { label: AttractorLabel::diverged(), representative: None }, cycle(&b), cycle(&a)];
        let g = merge_cells(Region::default(), 3, 2, cells, 5.0);
        assert_eq!(g.labels, vec![0, 1, 0, DIVERGED, 2, 1]);
        assert_eq!(g.catalog.len(), 3);
        assert_eq!(g.catalog[2].label.winding, -1);
    }

    #[test]
    fn permuted_evaluation_gives_the_same_grid() {
        let (a, b) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        let cells = vec![fp(1.0, 1.0), cycle(&a), fp(-1.0, -1.0), cycle(&b)];
        // Workers may finish in any order; collect by index before merging.
        let mut shuffled: Vec<(usize, CellOutcome)> = cells.iter().cloned().enumerate().rev().collect();
        shuffled.sort_by_key(|(k, _)| *k);
        let again: Vec<CellOutcome> = shuffled.into_iter().map(|(_, c)| c).collect();
        assert_eq!(merge_cells(Region::default(), 2, 2, cells, 5.0), merge_cells(Region::default(), 2, 2, again, 5.0));
    }

    #[test]
    fn mirror_check_on_synthetic_grid() {
        // 3x3 grid: cell k mirrors cell 8 - k; centre skipped.
        let mut cells: Vec<CellOutcome> = (0..9).map(|k| fp(k as f64, 0.5)).collect();
        for k in 0..4 {
            cells[8 - k] = fp(-(k as f64), -0.5);
        }
        let g = merge_cells(Region::default(), 3, 3, cells.clone(), 5.0);
        let rep = mirror_consistency(&g, 5.0);
        assert_eq!((rep.checked, rep.consistent), (8, 8));
        cells[0] = fp(3.0, 3.0);
        let rep = mirror_consistency(&merge_cells(Region::default(), 3, 3, cells, 5.0), 5.0);
        assert_eq!(rep.failures, vec![(0, 0), (2, 2)]);
    }

    #[test]
    fn small_grid_with_an_odd_readout() {
        let net = ReservoirNet::build(NetParams { n: 30, p: 0.2, ..Default::default() }).unwrap();
        let res = net.at_rho(0.4).unwrap();
        let mut w = DMatrix::zeros(2, 60);
        for j in 0..30 {
            w[(0, j)] = 0.05 * ((j as f64) * 0.9).sin();
            w[(1, j)] = 0.05 * ((j as f64) * 1.7).cos();
        }
        let ro = TrainedReadout::from_matrix(w).unwrap();
        let (a, b) = seeing_double_pair(0.0, 5.0, RotationMode::Opposite, 0.01).unwrap();
        let opts = BasinOptions { nx: 5, ny: 5, ..Default::default() };
        let g = map_basins(&res, &ro, (&a, &b), &opts).unwrap();
        assert!(g.labels.iter().all(|l| *l >= 0));
        let origin = g.label_at(2, 2) as usize;
        assert_eq!(g.catalog[origin].label.kind, AttractorKind::FixedPoint);
        assert!(g.catalog[origin].label.centre.iter().all(|v| v.abs() < 1e-3));
        assert_eq!(mirror_consistency(&g, 5.0).fraction(), 1.0);
        let mut csv = Vec::new();
        write_grid_csv(&g, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 26);
    }
}

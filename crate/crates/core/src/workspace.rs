//! Reachability raster of a station's two mechanisms.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ellipse, Point2};
use crate::linkage::LinkageGeometry;

/// Minimum number of cells that must span the target's minor axis.
pub const MIN_CELLS_ACROSS_TARGET: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkspaceError {
    #[error(
        "resolution {resolution} mm gives fewer than {MIN_CELLS_ACROSS_TARGET} cells across the target minor axis"
    )]
    ResolutionTooCoarse { resolution: f64 },
    #[error("resolution must be a positive finite number, got {0}")]
    InvalidResolution(f64),
}

const LOWER: u8 = 0b01;
const UPPER: u8 = 0b10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceGrid {
    pub resolution: f64,
    /// Lower-left corner of the raster.
    pub origin: Point2,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (y outer) reachability flags.
    cells: Vec<u8>,
    pub target_ellipse: Ellipse,
}

/// One raster cell, reported at its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point2,
    pub lower: bool,
    pub upper: bool,
}

impl Cell {
    pub fn both(&self) -> bool {
        self.lower && self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSummary {
    pub resolution_mm: f64,
    pub nx: usize,
    pub ny: usize,
    pub lower_area_mm2: f64,
    pub upper_area_mm2: f64,
    pub intersection_area_mm2: f64,
    pub target_cells: usize,
    pub target_cells_outside_intersection: usize,
}

/// Rasterises the reachable sets of both mechanisms over a box covering
/// every point either of them could reach.
pub fn compute_workspace(
    lower: &LinkageGeometry,
    upper: &LinkageGeometry,
    target_ellipse: Ellipse,
    resolution: f64,
) -> Result<WorkspaceGrid, WorkspaceError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(WorkspaceError::InvalidResolution(resolution));
    }
    if 2.0 * target_ellipse.minor_semi_axis() / resolution < MIN_CELLS_ACROSS_TARGET {
        return Err(WorkspaceError::ResolutionTooCoarse { resolution });
    }

    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (geom, base) in [
        (lower, lower.o1),
        (lower, lower.o2),
        (upper, upper.o1),
        (upper, upper.o2),
    ] {
        let reach = geom.max_reach();
        min = Point2::new(min.x.min(base.x - reach), min.y.min(base.y - reach));
        max = Point2::new(max.x.max(base.x + reach), max.y.max(base.y + reach));
    }
    let nx = ((max.x - min.x) / resolution).ceil() as usize;
    let ny = ((max.y - min.y) / resolution).ceil() as usize;

    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = min.y + (j as f64 + 0.5) * resolution;
        for i in 0..nx {
            let p = Point2::new(min.x + (i as f64 + 0.5) * resolution, y);
            let mut flags = 0;
            if lower.is_reachable(p) {
                flags |= LOWER;
            }
            if upper.is_reachable(p) {
                flags |= UPPER;
            }
            cells.push(flags);
        }
    }

    Ok(WorkspaceGrid {
        resolution,
        origin: min,
        nx,
        ny,
        cells,
        target_ellipse,
    })
}

impl WorkspaceGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        let flags = self.cells[j * self.nx + i];
        Cell {
            center: self.cell_center(i, j),
            lower: flags & LOWER != 0,
            upper: flags & UPPER != 0,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.cell(i, j)))
    }

    /// Cell containing `p`, if it lies inside the raster.
    pub fn locate(&self, p: Point2) -> Option<Cell> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then(|| self.cell(i, j))
    }

    pub fn summary(&self) -> WorkspaceSummary {
        let cell_area = self.resolution * self.resolution;
        let (mut lower, mut upper, mut both, mut target, mut outside) = (0usize, 0usize, 0usize, 0usize, 0usize);
        for cell in self.cells() {
            lower += cell.lower as usize;
            upper += cell.upper as usize;
            both += cell.both() as usize;
            if self.target_ellipse.contains(cell.center) {
                target += 1;
                outside += (!cell.both()) as usize;
            }
        }
        WorkspaceSummary {
            resolution_mm: self.resolution,
            nx: self.nx,
            ny: self.ny,
            lower_area_mm2: lower as f64 * cell_area,
            upper_area_mm2: upper as f64 * cell_area,
            intersection_area_mm2: both as f64 * cell_area,
            target_cells: target,
            target_cells_outside_intersection: outside,
        }
    }

    /// Writes `x_mm,y_mm,lower,upper,both` rows, one per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x_mm,y_mm,lower,upper,both")?;
        for cell in self.cells() {
            writeln!(
                out,
                "{:.4},{:.4},{},{},{}",
                cell.center.x,
                cell.center.y,
                cell.lower as u8,
                cell.upper as u8,
                cell.both() as u8
            )?;
        }
        Ok(())
    }
}

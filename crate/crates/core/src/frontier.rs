//! Frontier waypoints: midpoints of obstacle-free stretches of the
//! explored/unknown boundary.

use serde::{Deserialize, Serialize};

use crate::geom::{CellIndex, Point2, Surd2};
use crate::mapping::{explored_contour, BinaryMask, Occupancy, OccupancyGrid};

pub const DEFAULT_MIN_SEGMENT_LENGTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub midpoint: Point2,
    pub midpoint_cell: CellIndex,
    /// Path length through the cell centers plus one cell.
    pub segment_length: f64,
    pub segment_cells: Vec<CellIndex>,
}

struct Run {
    cells: Vec<CellIndex>,
    path: Surd2,
    mid: usize,
}

fn finish_run(cells: Vec<CellIndex>) -> Run {
    let mut distances = Vec::with_capacity(cells.len());
    let mut total = Surd2::ZERO;
    distances.push(total);
    for pair in cells.windows(2) {
        total = total + Surd2::step(pair[0], pair[1]);
        distances.push(total);
    }
    // argmin |2 d_i - D|, first index on ties.
    let mut mid = 0;
    let mut best = None;
    for (i, d) in distances.iter().enumerate() {
        let gap = (*d * 2 - total).abs();
        if best.is_none_or(|b| gap < b) {
            best = Some(gap);
            mid = i;
        }
    }
    Run {
        cells,
        path: total,
        mid,
    }
}

/// Splits every contour loop into maximal runs of free, unmasked cells and
/// returns one frontier per run at least `min_segment_length` long. Cells
/// already claimed by an earlier loop position are treated as breaks, so no
/// cell belongs to two frontiers.
pub fn extract_frontiers(
    grid: &OccupancyGrid,
    mask: &BinaryMask,
    min_segment_length: f64,
) -> Vec<Frontier> {
    debug_assert!(mask.matches(grid), "mask shape differs from grid");
    let res = grid.resolution();
    let mut seen = std::collections::HashSet::new();
    let mut runs = Vec::new();
    for contour in explored_contour(grid) {
        let cells = &contour.cells;
        let n = cells.len();
        let eligible: Vec<bool> = cells
            .iter()
            .map(|c| grid.get(*c) == Occupancy::Free && !mask.get(*c) && seen.insert(*c))
            .collect();
        match eligible.iter().position(|e| !e) {
            None => runs.push(finish_run(cells.clone())),
            Some(first_break) => {
                let mut current = Vec::new();
                for k in 1..=n {
                    let i = (first_break + k) % n;
                    if eligible[i] {
                        current.push(cells[i]);
                    } else if !current.is_empty() {
                        runs.push(finish_run(std::mem::take(&mut current)));
                    }
                }
                if !current.is_empty() {
                    runs.push(finish_run(current));
                }
            }
        }
    }
    let mut kept: Vec<Run> = runs
        .into_iter()
        .filter(|r| (r.path.to_f64() + 1.0) * res >= min_segment_length - 1e-9)
        .collect();
    kept.sort_by(|a, b| {
        let (ma, mb) = (a.cells[a.mid], b.cells[b.mid]);
        b.path.cmp(&a.path).then((ma.y, ma.x).cmp(&(mb.y, mb.x)))
    });
    kept.into_iter()
        .map(|run| {
            let cell = run.cells[run.mid];
            Frontier {
                midpoint: grid.cell_center(cell),
                midpoint_cell: cell,
                segment_length: (run.path.to_f64() + 1.0) * res,
                segment_cells: run.cells,
            }
        })
        .collect()
}

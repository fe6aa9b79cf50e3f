//! Cell occupancy against a dense point-sampling oracle.

use platoon_core::geometry::{occupied_cells, Cell, Grid, Point, Rect};
use proptest::prelude::*;

const SAMPLES: usize = 24;

/// Cells containing at least one sample point of `rect`, sampled on a
/// regular lattice strictly inside each cell.
fn sampled(rect: &Rect, grid: &Grid) -> Vec<(u16, u16)> {
    let g = grid.granularity();
    let mut out = Vec::new();
    for row in 0..g as u16 {
        for col in 0..g as u16 {
            let (x0, y0, x1, y1) = grid.cell_bounds(Cell { row, col });
            let hit = (0..SAMPLES).any(|i| {
                (0..SAMPLES).any(|j| {
                    let fx = (i as f64 + 0.5) / SAMPLES as f64;
                    let fy = (j as f64 + 0.5) / SAMPLES as f64;
                    rect.contains(Point::new(x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)))
                })
            });
            if hit {
                out.push((row, col));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rasterization_covers_every_sampled_cell_and_nothing_far(
        x in -3.0f64..18.0,
        y in -3.0f64..18.0,
        heading in 0.0f64..std::f64::consts::TAU,
        length in 0.5f64..6.0,
        width in 0.5f64..2.5,
        granularity in proptest::sample::select(vec![6usize, 12, 24]),
    ) {
        let grid = Grid::zone(15.0, granularity).unwrap();
        let rect = Rect { center: Point::new(x, y), heading, length, width };
        let cells: Vec<(u16, u16)> = occupied_cells(&[rect], &grid).iter().map(|c| (c.row, c.col)).collect();
        for c in sampled(&rect, &grid) {
            prop_assert!(cells.contains(&c), "sampled cell {:?} missing", c);
        }
        let spacing = 15.0 / granularity as f64 / SAMPLES as f64;
        let grown = Rect { length: length + 2.0 * spacing, width: width + 2.0 * spacing, ..rect };
        let near = sampled(&grown, &grid);
        for c in &cells {
            prop_assert!(near.contains(c), "cell {:?} is not near the body", c);
        }
    }
}

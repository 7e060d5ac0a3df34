//! Search density over virtual targets.
//!
//! Each grid cell holds a density value. Cells outside the footprint decay
//! geometrically, cells inside are refreshed to `1/|A|`, and the normalised
//! integral over a cell (the search value) is `d_v·|A|`: 1 right after a
//! visit, decaying towards 0 while unvisited.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{in_sensing_range, Position, Rect};

/// Regular lattice of square cells, row-major from the `origin` (minimum) corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: Position,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

impl GridGeometry {
    /// Covers `area` with cells of side `cell_size` (the area must tile exactly).
    pub fn covering(area: &Rect, cell_size: f64) -> Result<Self> {
        let cols = (area.width() / cell_size).round();
        let rows = (area.height() / cell_size).round();
        if !(cell_size > 0.0)
            || cols < 1.0
            || rows < 1.0
            || (cols * cell_size - area.width()).abs() > 1e-9 * area.width()
            || (rows * cell_size - area.height()).abs() > 1e-9 * area.height()
        {
            return Err(Error::InvalidParameter {
                name: "cell_size",
                reason: format!(
                    "cell size {cell_size} must tile the {}x{} area",
                    area.width(),
                    area.height()
                ),
            });
        }
        Ok(Self { origin: area.min, cell_size, cols: cols as usize, rows: rows as usize })
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    pub fn col_row(&self, cell: usize) -> (usize, usize) {
        (cell % self.cols, cell / self.cols)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn center(&self, cell: usize) -> Position {
        let (c, r) = self.col_row(cell);
        Position::new(
            self.origin.x + (c as f64 + 0.5) * self.cell_size,
            self.origin.y + (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Position) -> usize {
        let c = ((p.x - self.origin.x) / self.cell_size).floor().clamp(0.0, (self.cols - 1) as f64);
        let r = ((p.y - self.origin.y) / self.cell_size).floor().clamp(0.0, (self.rows - 1) as f64);
        self.index(c as usize, r as usize)
    }
}

/// Per-cell search density with its decay factor and revisit threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    geometry: GridGeometry,
    density: Vec<f64>,
    decay: f64,
    threshold: f64,
}

impl SearchGrid {
    /// A grid whose every cell starts with search value `initial_value`.
    pub fn new(geometry: GridGeometry, decay: f64, threshold: f64, initial_value: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "decay",
                reason: format!("must lie in (0, 1], got {decay}"),
            });
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: format!("must lie in (0, 1), got {threshold}"),
            });
        }
        if !(initial_value > 0.0 && initial_value <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "initial_value",
                reason: format!("must lie in (0, 1], got {initial_value}"),
            });
        }
        let d0 = initial_value / geometry.total_area();
        Ok(Self { geometry, density: vec![d0; geometry.len()], decay, threshold })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Decays every cell whose centre lies outside the footprint at `s_prev`.
    pub fn predict_in_place(&mut self, s_prev: Position, side: f64) {
        for (cell, d) in self.density.iter_mut().enumerate() {
            if !in_sensing_range(self.geometry.center(cell), s_prev, side) {
                *d *= self.decay;
            }
        }
    }

    /// Refreshes every cell whose centre lies inside the footprint at `s_now`.
    pub fn update_in_place(&mut self, s_now: Position, side: f64) {
        let fresh = 1.0 / self.geometry.total_area();
        for (cell, d) in self.density.iter_mut().enumerate() {
            if in_sensing_range(self.geometry.center(cell), s_now, side) {
                *d = fresh;
            }
        }
    }

    /// Cells whose centres lie inside the footprint at `s`.
    pub fn cells_in_footprint(&self, s: Position, side: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| in_sensing_range(self.geometry.center(c), s, side))
            .collect()
    }

    /// Normalised integral of the density over `cell`.
    pub fn value(&self, cell: usize) -> f64 {
        let g = &self.geometry;
        (self.density[cell] * g.cell_area()) / (g.cell_area() / g.total_area())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.value(c)).collect()
    }

    pub fn is_unvisited(&self, cell: usize) -> bool {
        self.value(cell) <= self.threshold
    }

    /// Cells whose search value is at or below the revisit threshold.
    pub fn unvisited(&self) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.is_unvisited(c)).collect()
    }

    /// Replaces each density with the maximum of both grids.
    pub fn fuse_in_place(&mut self, other: &SearchGrid) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            *a = a.max(*b);
        }
        Ok(())
    }

    /// Snapshot of the densities for agent-to-agent exchange.
    pub fn to_message(&self) -> GridMessage {
        GridMessage { geometry: self.geometry, densities: self.density.clone() }
    }

    /// Adopts a received message as a grid with this grid's decay and threshold.
    pub fn from_message(&self, msg: &GridMessage) -> Result<SearchGrid> {
        if msg.geometry != self.geometry || msg.densities.len() != self.geometry.len() {
            return Err(Error::GeometryMismatch);
        }
        Ok(SearchGrid { density: msg.densities.clone(), ..self.clone() })
    }

    /// Writes `cell_x, cell_y, density` rows, using cell-centre coordinates.
    pub fn write_snapshot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_x", "cell_y", "density"])?;
        for (cell, d) in self.density.iter().enumerate() {
            let c = self.geometry.center(cell);
            w.write_record([c.x.to_string(), c.y.to_string(), format!("{d:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Wire form of a search grid: geometry header plus row-major densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMessage {
    pub geometry: GridGeometry,
    pub densities: Vec<f64>,
}

pub fn search_predict(grid: &SearchGrid, s_prev: Position, side: f64) -> SearchGrid {
    let mut g = grid.clone();
    g.predict_in_place(s_prev, side);
    g
}

pub fn search_update(grid: &SearchGrid, s_now: Position, side: f64) -> SearchGrid {
    let mut g = grid.clone();
    g.update_in_place(s_now, side);
    g
}

pub fn search_value(grid: &SearchGrid, cell: usize) -> f64 {
    grid.value(cell)
}

pub fn unvisited_nodes(grid: &SearchGrid) -> Vec<usize> {
    grid.unvisited()
}

pub fn fuse(a: &SearchGrid, b: &SearchGrid) -> Result<SearchGrid> {
    let mut g = a.clone();
    g.fuse_in_place(b)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> Rect {
        Rect::new(Position::new(0.0, 0.0), Position::new(100.0, 100.0))
    }

    fn grid() -> SearchGrid {
        SearchGrid::new(GridGeometry::covering(&area(), 10.0).unwrap(), 0.999, 0.5, 0.01).unwrap()
    }

    #[test]
    fn geometry_of_default_area() {
        let g = GridGeometry::covering(&area(), 10.0).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.center(0), Position::new(5.0, 5.0));
        assert_eq!(g.center(11), Position::new(15.0, 15.0));
        assert_eq!(g.cell_of(Position::new(15.0, 15.0)), 11);
        assert_eq!(g.cell_of(Position::new(100.0, 100.0)), 99);
        assert!(GridGeometry::covering(&area(), 30.0).is_err());
    }

    #[test]
    fn decay_outside_footprint_only() {
        let mut g = grid();
        g.update_in_place(Position::new(5.0, 5.0), 10.0);
        let inside = g.densities()[0];
        assert!((inside - 1e-4).abs() < 1e-18);
        let p = search_predict(&g, Position::new(5.0, 5.0), 10.0);
        assert_eq!(p.densities()[0], inside);

        let mut fresh = grid();
        fresh.update_in_place(Position::new(55.0, 55.0), 10.0);
        let p = search_predict(&fresh, Position::new(5.0, 5.0), 10.0);
        let c = fresh.geometry().cell_of(Position::new(55.0, 55.0));
        assert!((p.densities()[c] - 9.99e-5).abs() < 1e-18);
    }

    #[test]
    fn hundred_unvisited_steps() {
        let mut g = grid();
        let c = g.geometry().cell_of(Position::new(55.0, 55.0));
        g.update_in_place(Position::new(55.0, 55.0), 10.0);
        for _ in 0..100 {
            g.predict_in_place(Position::new(5.0, 5.0), 10.0);
        }
        assert!((g.value(c) - 0.999f64.powi(100)).abs() < 1e-12);
        assert!((g.value(c) - 0.9048).abs() < 1e-4);
    }

    #[test]
    fn update_refreshes_and_is_idempotent() {
        let g = grid();
        let s = Position::new(25.0, 35.0);
        let once = search_update(&g, s, 10.0);
        let twice = search_update(&once, s, 10.0);
        assert_eq!(once, twice);
        let c = g.geometry().cell_of(s);
        assert_eq!(once.value(c), 1.0);
        assert_eq!(once.value(0), g.value(0));
        assert!((once.value(0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn unvisited_threshold() {
        let mut g = grid();
        assert_eq!(g.unvisited().len(), 100);
        g.update_in_place(Position::new(5.0, 5.0), 10.0);
        assert!(!g.unvisited().contains(&0));
        // value 0.4 via direct density
        g.density[1] = 0.4 / g.geometry().total_area();
        assert!(g.unvisited().contains(&1));
        for c in 0..g.len() {
            g.update_in_place(g.geometry().center(c), 10.0);
        }
        assert!(g.unvisited().is_empty());
    }

    #[test]
    fn fusion_takes_fresh_value() {
        let a = search_update(&grid(), Position::new(5.0, 5.0), 10.0);
        let b = grid();
        let f = fuse(&a, &b).unwrap();
        assert_eq!(f.value(0), 1.0);
        assert_eq!(fuse(&a, &a).unwrap(), a);
        assert_eq!(fuse(&a, &b).unwrap(), fuse(&b, &a).unwrap());

        let other = SearchGrid::new(
            GridGeometry::covering(&area(), 20.0).unwrap(),
            0.999,
            0.5,
            0.01,
        )
        .unwrap();
        assert!(matches!(fuse(&a, &other), Err(Error::GeometryMismatch)));
    }

    #[test]
    fn message_round_trip_and_snapshot() {
        let a = search_update(&grid(), Position::new(45.0, 5.0), 10.0);
        let msg = a.to_message();
        assert_eq!(msg.densities.len(), 100);
        assert_eq!(grid().from_message(&msg).unwrap(), a);

        let mut buf = Vec::new();
        a.write_snapshot_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("cell_x,cell_y,density"));
        assert_eq!(lines.count(), 100);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_grid(values: &[f64]) -> SearchGrid {
            let mut g = grid();
            let total = g.geometry().total_area();
            for (d, v) in g.density.iter_mut().zip(values) {
                *d = v / total;
            }
            g
        }

        proptest! {
            #[test]
            fn fusion_is_a_join_semilattice(
                a in proptest::collection::vec(1e-6f64..1.0, 100),
                b in proptest::collection::vec(1e-6f64..1.0, 100),
                c in proptest::collection::vec(1e-6f64..1.0, 100),
            ) {
                let (a, b, c) = (random_grid(&a), random_grid(&b), random_grid(&c));
                prop_assert_eq!(fuse(&a, &a).unwrap(), a.clone());
                prop_assert_eq!(fuse(&a, &b).unwrap(), fuse(&b, &a).unwrap());
                prop_assert_eq!(
                    fuse(&fuse(&a, &b).unwrap(), &c).unwrap(),
                    fuse(&a, &fuse(&b, &c).unwrap()).unwrap()
                );
            }

            #[test]
            fn refreshed_cell_has_unit_value(x in 0.0f64..100.0, y in 0.0f64..100.0) {
                let g = search_update(&grid(), Position::new(x, y), 10.0);
                for c in g.cells_in_footprint(Position::new(x, y), 10.0) {
                    prop_assert_eq!(g.value(c), 1.0);
                }
                prop_assert!(g.values().iter().all(|v| *v > 0.0 && *v <= 1.0));
            }
        }
    }
}

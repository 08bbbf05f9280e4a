//! Uniform spatial hash grid for radius queries over 2D point sets.
//!
//! Cells are axis-aligned squares anchored at the origin with floor-based
//! indexing. Queries visit the 3x3 cell block around the query point, which
//! covers any radius up to the cell size; results preserve insertion order so
//! downstream accumulations stay deterministic.

use nalgebra::Vector2;
use std::collections::HashMap;

pub struct SpatialGrid {
    cell_size: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    points: Vec<Vector2<f64>>,
}

impl SpatialGrid {
    pub fn build(points: &[Vector2<f64>], cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry(Self::cell_of(p, cell_size))
                .or_default()
                .push(i as u32);
        }
        SpatialGrid {
            cell_size,
            cells,
            points: points.to_vec(),
        }
    }

    fn cell_of(p: &Vector2<f64>, cell_size: f64) -> (i64, i64) {
        (
            (p.x / cell_size).floor() as i64,
            (p.y / cell_size).floor() as i64,
        )
    }

    /// Indices of stored points within `radius` of `query`, ascending.
    ///
    /// `radius` must not exceed the cell size used at build time.
    pub fn within(&self, query: &Vector2<f64>, radius: f64) -> Vec<u32> {
        debug_assert!(radius <= self.cell_size + 1e-9);
        let (cx, cy) = Self::cell_of(query, self.cell_size);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        if (self.points[i as usize] - query).norm_squared() <= r2 {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Index of the nearest stored point within `radius`, ties broken by
    /// the lower index.
    pub fn nearest_within(&self, query: &Vector2<f64>, radius: f64) -> Option<u32> {
        debug_assert!(radius <= self.cell_size + 1e-9);
        let (cx, cy) = Self::cell_of(query, self.cell_size);
        let mut best: Option<(f64, u32)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        let d2 = (self.points[i as usize] - query).norm_squared();
                        if d2 <= radius * radius {
                            let better = match best {
                                None => true,
                                Some((bd2, bi)) => d2 < bd2 || (d2 == bd2 && i < bi),
                            };
                            if better {
                                best = Some((d2, i));
                            }
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

//! Marching-squares isolines on a rectilinear grid, closed along the edge of
//! the grid.
//!
//! The grid is surrounded by a virtual ring of nodes that are always below the
//! level. A crossing between a real node and a ring node is placed on the real
//! node, so an isoline that would run off the grid instead follows the grid
//! boundary and every polyline comes back as a closed loop. Loops are oriented
//! with the superlevel set on their left (counterclockwise around the region,
//! clockwise around holes).

use rayon::prelude::*;
use std::collections::HashMap;

use crate::kde::Grid;
use crate::model::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Dir {
    H,
    V,
}

/// Lattice edge starting at node `(col, row)` and heading right (`H`) or up (`V`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct EdgeKey {
    col: i64,
    row: i64,
    dir: Dir,
}

struct Field<'a> {
    grid: &'a Grid,
    level: f64,
    ncols: i64,
    nrows: i64,
}

impl Field<'_> {
    fn in_grid(&self, col: i64, row: i64) -> bool {
        (0..self.ncols).contains(&col) && (0..self.nrows).contains(&row)
    }

    /// Node value, clipped at zero; ring nodes read as `-inf`.
    fn value(&self, col: i64, row: i64) -> f64 {
        if self.in_grid(col, row) {
            self.grid.values[row as usize][col as usize].max(0.0)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn above(&self, col: i64, row: i64) -> bool {
        self.value(col, row) >= self.level
    }

    fn position(&self, col: i64, row: i64) -> [f64; 2] {
        [self.grid.xs[col as usize], self.grid.ys[row as usize]]
    }

    fn crossing(&self, e: EdgeKey) -> [f64; 2] {
        let (c2, r2) = match e.dir {
            Dir::H => (e.col + 1, e.row),
            Dir::V => (e.col, e.row + 1),
        };
        let a_in = self.in_grid(e.col, e.row);
        let b_in = self.in_grid(c2, r2);
        match (a_in, b_in) {
            (true, false) => self.position(e.col, e.row),
            (false, true) => self.position(c2, r2),
            (true, true) => {
                let va = self.value(e.col, e.row);
                let vb = self.value(c2, r2);
                let t = ((self.level - va) / (vb - va)).clamp(0.0, 1.0);
                let pa = self.position(e.col, e.row);
                let pb = self.position(c2, r2);
                [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
            }
            (false, false) => unreachable!("edges between ring nodes never cross the level"),
        }
    }

    /// Oriented segments in the cell whose lower-left node is `(col, row)`.
    fn cell_segments(&self, col: i64, row: i64, out: &mut Vec<(EdgeKey, EdgeKey)>) {
        let bl = self.above(col, row);
        let br = self.above(col + 1, row);
        let tr = self.above(col + 1, row + 1);
        let tl = self.above(col, row + 1);
        let case = u8::from(bl) | u8::from(br) << 1 | u8::from(tr) << 2 | u8::from(tl) << 3;

        let b = EdgeKey {
            col,
            row,
            dir: Dir::H,
        };
        let t = EdgeKey {
            col,
            row: row + 1,
            dir: Dir::H,
        };
        let l = EdgeKey {
            col,
            row,
            dir: Dir::V,
        };
        let r = EdgeKey {
            col: col + 1,
            row,
            dir: Dir::V,
        };

        let center_above = || {
            let v = [
                self.value(col, row),
                self.value(col + 1, row),
                self.value(col + 1, row + 1),
                self.value(col, row + 1),
            ];
            v.iter().sum::<f64>() / 4.0 >= self.level
        };

        match case {
            0 | 15 => {}
            1 => out.push((b, l)),
            2 => out.push((r, b)),
            3 => out.push((r, l)),
            4 => out.push((t, r)),
            5 => {
                if center_above() {
                    out.extend([(b, r), (t, l)]);
                } else {
                    out.extend([(b, l), (t, r)]);
                }
            }
            6 => out.push((t, b)),
            7 => out.push((t, l)),
            8 => out.push((l, t)),
            9 => out.push((b, t)),
            10 => {
                if center_above() {
                    out.extend([(l, b), (r, t)]);
                } else {
                    out.extend([(r, b), (l, t)]);
                }
            }
            11 => out.push((r, t)),
            12 => out.push((l, r)),
            13 => out.push((b, r)),
            14 => out.push((l, b)),
            _ => unreachable!(),
        }
    }
}

/// Closed isolines of `grid` at `level`, as vertex lists without the closing
/// repeat. Grid values are clipped at zero before contouring. Vertices are
/// clamped into `support`. Returns an empty list when the level exceeds the
/// grid maximum.
pub fn extract_contours(grid: &Grid, level: f64, support: &Region) -> Vec<Vec<[f64; 2]>> {
    let field = Field {
        grid,
        level,
        ncols: grid.xs.len() as i64,
        nrows: grid.ys.len() as i64,
    };
    if !level.is_finite() || field.ncols < 2 || field.nrows < 2 {
        return Vec::new();
    }

    // Cells span lower-left nodes -1..=n-1 in each direction, covering the ring.
    let segments: Vec<(EdgeKey, EdgeKey)> = (-1..field.nrows)
        .into_par_iter()
        .map(|row| {
            let mut seg = Vec::new();
            for col in -1..field.ncols {
                field.cell_segments(col, row, &mut seg);
            }
            seg
        })
        .collect::<Vec<_>>()
        .concat();

    let next: HashMap<EdgeKey, EdgeKey> = segments.iter().copied().collect();
    let mut visited: HashMap<EdgeKey, bool> = HashMap::with_capacity(segments.len());
    let mut loops = Vec::new();
    for &(start, _) in &segments {
        if visited.contains_key(&start) {
            continue;
        }
        let mut poly = Vec::new();
        let mut e = start;
        loop {
            visited.insert(e, true);
            poly.push(support.clamp(field.crossing(e)));
            e = next[&e];
            if e == start {
                break;
            }
        }
        poly.dedup();
        if poly.len() > 1 && poly.first() == poly.last() {
            poly.pop();
        }
        if poly.len() >= 3 {
            loops.push(poly);
        }
    }
    loops
}

/// Signed shoelace area; positive for counterclockwise loops.
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Area enclosed by a set of oriented loops (holes subtract).
pub fn enclosed_area(polys: &[Vec<[f64; 2]>]) -> f64 {
    polys.iter().map(|p| signed_area(p)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::lattice;

    fn radial_grid(res: usize, f: impl Fn(f64) -> f64) -> Grid {
        let xs = lattice(-1.4, 1.4, res);
        let ys = xs.clone();
        let values = ys
            .iter()
            .map(|&y| xs.iter().map(|&x| f((x * x + y * y).sqrt())).collect())
            .collect();
        Grid { xs, ys, values }
    }

    fn square() -> Region {
        Region::square(1.4).unwrap()
    }

    #[test]
    fn radial_bump_gives_one_round_loop() {
        let g = radial_grid(256, |r| (-r * r).exp());
        let loops = extract_contours(&g, 0.5, &square());
        assert_eq!(loops.len(), 1);
        let radii: Vec<f64> = loops[0].iter().map(|p| p[0].hypot(p[1])).collect();
        let max = radii.iter().copied().fold(f64::MIN, f64::max);
        let min = radii.iter().copied().fold(f64::MAX, f64::min);
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        assert!((max - min) / mean < 0.02);
        let exact = 0.5f64.ln().abs().sqrt();
        assert!((mean - exact).abs() < 1e-3, "{mean} vs {exact}");
        let area = enclosed_area(&loops);
        assert!((area / (std::f64::consts::PI * exact * exact) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn level_above_max_is_empty() {
        let g = radial_grid(32, |r| 1.0 - r);
        assert!(extract_contours(&g, 2.0, &square()).is_empty());
    }

    #[test]
    fn region_cut_by_the_edge_is_closed_along_it() {
        // Superlevel set {x <= 0} touches three sides of the square.
        let xs = lattice(-1.4, 1.4, 64);
        let ys = xs.clone();
        let values = ys
            .iter()
            .map(|_| xs.iter().map(|&x| 0.7 - x).collect())
            .collect();
        let g = Grid { xs, ys, values };
        let loops = extract_contours(&g, 0.7, &square());
        assert_eq!(loops.len(), 1);
        let area = enclosed_area(&loops);
        assert!((area - 1.4 * 2.8).abs() < 1e-9, "{area}");
        for p in &loops[0] {
            assert!(square().contains(*p));
        }
    }

    #[test]
    fn whole_grid_above_level_traces_the_boundary() {
        let g = radial_grid(16, |_| 1.0);
        let loops = extract_contours(&g, 0.5, &square());
        assert_eq!(loops.len(), 1);
        assert!((enclosed_area(&loops) - 2.8 * 2.8).abs() < 1e-12);
    }

    #[test]
    fn annulus_has_hole_with_opposite_orientation() {
        let g = radial_grid(128, |r| (-(r - 0.8).powi(2) * 20.0).exp());
        let loops = extract_contours(&g, 0.5, &square());
        assert_eq!(loops.len(), 2);
        let areas: Vec<f64> = loops.iter().map(|p| signed_area(p)).collect();
        assert!(areas.iter().any(|a| *a > 0.0) && areas.iter().any(|a| *a < 0.0));
    }

    #[test]
    fn negative_values_are_clipped() {
        let g = radial_grid(32, |r| -1.0 + 0.0 * r);
        // Clipped to zero everywhere, so a zero level captures the whole grid.
        let loops = extract_contours(&g, 0.0, &square());
        assert_eq!(loops.len(), 1);
    }
}

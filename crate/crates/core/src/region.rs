//! Homology of a classifier's positive decision region, measured on a raster.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::ph::BettiProfile;

pub const DEFAULT_RESOLUTION: usize = 512;
pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_PAD: f64 = 0.1;

/// Binary raster of a decision region. `grid[row * cols + col]`, row 0 at
/// the bottom (smallest y).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMask {
    pub rows: usize,
    pub cols: usize,
    pub grid: Vec<bool>,
    pub bbox: [[f64; 2]; 2],
}

impl DecisionMask {
    pub fn from_grid(rows: usize, cols: usize, grid: Vec<bool>) -> Result<Self> {
        if grid.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "grid of {} cells does not match {rows} x {cols}",
                grid.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            grid,
            bbox: [[0.0, 0.0], [cols as f64, rows as f64]],
        })
    }

    /// Parses rows of `#` (foreground) and `.` (background), top row first.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let cols = lines.first().map_or(0, |l| l.len());
        if lines.iter().any(|l| l.len() != cols) {
            return Err(Error::InvalidInput("ragged mask rows".into()));
        }
        let grid = lines
            .iter()
            .rev()
            .flat_map(|l| l.bytes().map(|b| b == b'#'))
            .collect();
        Self::from_grid(lines.len(), cols, grid)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.cols + col]
    }

    pub fn resolution(&self) -> usize {
        self.rows.max(self.cols)
    }

    pub fn count_positive(&self) -> usize {
        self.grid.iter().filter(|&&c| c).count()
    }

    /// Binary PGM, top row first, 255 = positive.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        for r in (0..self.rows).rev() {
            let row: Vec<u8> = self.grid[r * self.cols..(r + 1) * self.cols]
                .iter()
                .map(|&c| if c { 255 } else { 0 })
                .collect();
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// Vertices minus edges plus squares of the complex with one vertex per
    /// positive cell, an edge per 4-adjacent pair and a square per full 2x2 block.
    pub fn euler_characteristic(&self) -> i64 {
        let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.get(r, c) {
                    continue;
                }
                v += 1;
                let right = c + 1 < self.cols && self.get(r, c + 1);
                let up = r + 1 < self.rows && self.get(r + 1, c);
                e += i64::from(right) + i64::from(up);
                if right && up && self.get(r + 1, c + 1) {
                    f += 1;
                }
            }
        }
        v - e + f
    }
}

/// Bounding box of `(lo, hi)` grown by `pad` times its extent on every side.
pub fn padded_bbox(lo: &[f64], hi: &[f64], pad: f64) -> Result<[[f64; 2]; 2]> {
    if lo.len() != 2 || hi.len() != 2 {
        return Err(Error::UnsupportedDimension(lo.len()));
    }
    let mut b = [[lo[0], lo[1]], [hi[0], hi[1]]];
    for k in 0..2 {
        let span = (hi[k] - lo[k]).max(f64::EPSILON);
        b[0][k] -= pad * span;
        b[1][k] += pad * span;
    }
    Ok(b)
}

/// Samples the sign of `logit1 - logit0` at the center of every cell of a
/// `resolution x resolution` grid over `bbox`.
pub fn rasterize(model: &MlpModel, bbox: [[f64; 2]; 2], resolution: usize) -> Result<DecisionMask> {
    if model.input_dim != 2 {
        return Err(Error::UnsupportedDimension(model.input_dim));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(format!(
            "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let [lo, hi] = bbox;
    if !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(Error::InvalidInput(format!("degenerate bounding box {bbox:?}")));
    }
    let n = resolution;
    let (dx, dy) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
    let rows: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let y = lo[1] + (r as f64 + 0.5) * dy;
            (0..n)
                .map(|c| {
                    let x = lo[0] + (c as f64 + 0.5) * dx;
                    model.predict_point(&[x, y]).map(|p| p == 1).unwrap_or(false)
                })
                .collect()
        })
        .collect();
    Ok(DecisionMask {
        rows: n,
        cols: n,
        grid: rows.concat(),
        bbox,
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// β_0 counts 4-connected positive components; β_1 counts 8-connected
/// negative components that do not touch the outside of the grid.
pub fn mask_betti(mask: &DecisionMask) -> BettiProfile {
    let (rows, cols) = (mask.rows, mask.cols);
    // One extra node for the unbounded background.
    let outside = rows * cols;
    let mut uf = UnionFind::new(rows * cols + 1);
    let idx = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        for c in 0..cols {
            let v = mask.get(r, c);
            let here = idx(r, c);
            if !v && (r == 0 || c == 0 || r + 1 == rows || c + 1 == cols) {
                uf.union(here, outside);
            }
            if c + 1 < cols && mask.get(r, c + 1) == v {
                uf.union(here, idx(r, c + 1));
            }
            if r + 1 < rows && mask.get(r + 1, c) == v {
                uf.union(here, idx(r + 1, c));
            }
            if !v && r + 1 < rows {
                if c + 1 < cols && !mask.get(r + 1, c + 1) {
                    uf.union(here, idx(r + 1, c + 1));
                }
                if c > 0 && !mask.get(r + 1, c - 1) {
                    uf.union(here, idx(r + 1, c - 1));
                }
            }
        }
    }
    let (mut b0, mut b1) = (0, 0);
    let root_outside = uf.find(outside);
    for i in 0..rows * cols {
        if uf.find(i) == i {
            if mask.grid[i] {
                b0 += 1;
            } else if i != root_outside {
                b1 += 1;
            }
        }
    }
    BettiProfile::b0b1(b0, b1)
}

/// Fraction of the data's features in each of dimensions 0 and 1 that the
/// decision region exhibits, clamped to 1. Dimensions where the data has no
/// features score 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressivityScore {
    pub values: [f64; 2],
}

impl ExpressivityScore {
    pub fn e0(&self) -> f64 {
        self.values[0]
    }

    pub fn e1(&self) -> f64 {
        self.values[1]
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(|&v| v >= 1.0)
    }
}

pub fn expressivity(f: &BettiProfile, d: &BettiProfile) -> ExpressivityScore {
    let score = |p: usize| {
        let bd = d.get(p);
        if bd == 0 {
            1.0
        } else {
            (f.get(p) as f64 / bd as f64).min(1.0)
        }
    };
    ExpressivityScore {
        values: [score(0), score(1)],
    }
}

pub fn homology_match(f: &BettiProfile, d: &BettiProfile) -> bool {
    f.get(0) == d.get(0) && f.get(1) == d.get(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Architecture;

    #[test]
    fn simple_masks() {
        let full = DecisionMask::from_grid(4, 4, vec![true; 16]).unwrap();
        assert_eq!(mask_betti(&full), BettiProfile::b0b1(1, 0));
        let ring = DecisionMask::from_ascii(
            "
            #####
            #...#
            #.#.#
            #...#
            #####",
        )
        .unwrap();
        assert_eq!(mask_betti(&ring), BettiProfile::b0b1(2, 1));
        assert_eq!(ring.euler_characteristic(), 1);
    }

    #[test]
    fn diagonal_cells_are_separate_components_and_seal_nothing() {
        let m = DecisionMask::from_ascii(
            "
            .#.
            #.#
            .#.",
        )
        .unwrap();
        assert_eq!(mask_betti(&m), BettiProfile::b0b1(4, 0));
        assert_eq!(m.euler_characteristic(), 4);
    }

    #[test]
    fn empty_mask() {
        let m = DecisionMask::from_grid(3, 3, vec![false; 9]).unwrap();
        assert_eq!(mask_betti(&m), BettiProfile::b0b1(0, 0));
    }

    #[test]
    fn expressivity_examples() {
        let p = BettiProfile::b0b1;
        assert_eq!(expressivity(&p(2, 1), &p(4, 2)).values, [0.5, 0.5]);
        assert_eq!(expressivity(&p(6, 3), &p(4, 2)).values, [1.0, 1.0]);
        assert_eq!(expressivity(&p(3, 0), &p(3, 0)).values, [1.0, 1.0]);
        assert!(homology_match(&p(2, 0), &p(2, 0)));
        assert!(!homology_match(&p(2, 0), &p(4, 2)));
    }

    #[test]
    fn constant_models() {
        let arch = Architecture::new(1, 1, 1).unwrap();
        let zero = MlpModel::zeros(arch, 2).unwrap();
        let bbox = [[-1.0, -1.0], [1.0, 1.0]];
        let m = rasterize(&zero, bbox, 16).unwrap();
        assert_eq!(m.count_positive(), 0);
        let mut pos = MlpModel::zeros(arch, 2).unwrap();
        pos.bias_mut(1)[1] = 1.0;
        let m = rasterize(&pos, bbox, 32).unwrap();
        assert_eq!(m.count_positive(), 32 * 32);
        assert_eq!(mask_betti(&m), BettiProfile::b0b1(1, 0));
        assert!(rasterize(&pos, bbox, 8).is_err());
        let three_d = MlpModel::zeros(arch, 3).unwrap();
        assert!(matches!(
            rasterize(&three_d, bbox, 16),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn pgm_layout() {
        let m = DecisionMask::from_ascii("#.\n..").unwrap();
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert_eq!(&buf[..11], b"P5\n2 2\n255\n");
        assert_eq!(&buf[11..], &[255, 0, 0, 0]);
    }
}

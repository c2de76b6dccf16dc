//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank over Z/2 of a matrix given as rows of bitsets.
pub fn rank_gf2(mut rows: Vec<Vec<u64>>) -> usize {
    let mut rank = 0;
    let words = rows.first().map_or(0, Vec::len);
    for col in 0..words * 64 {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&p) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Boundary matrix over Z/2: one row per cell, listing the indices of its faces.
fn boundary_rank(faces: &[Vec<usize>], n_faces: usize) -> usize {
    if faces.is_empty() || n_faces == 0 {
        return 0;
    }
    let words = n_faces.div_ceil(64);
    let rows = faces
        .iter()
        .map(|f| {
            let mut row = vec![0u64; words];
            for &i in f {
                row[i / 64] ^= 1 << (i % 64);
            }
            row
        })
        .collect();
    rank_gf2(rows)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Betti numbers β_0..=β_top of the Vietoris-Rips complex at scale `eps`
/// (edges where distance <= eps), by enumerating every vertex subset.
pub fn rips_betti(points: &[Vec<f64>], eps: f64, top: usize) -> Vec<usize> {
    let n = points.len();
    assert!(n <= 16);
    let mut by_dim: Vec<Vec<u32>> = vec![Vec::new(); top + 3];
    for mask in 1u32..(1 << n) {
        let k = mask.count_ones() as usize - 1;
        if k > top + 1 {
            continue;
        }
        let verts: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let ok = verts
            .iter()
            .enumerate()
            .all(|(a, &i)| verts[a + 1..].iter().all(|&j| dist(&points[i], &points[j]) <= eps));
        if ok {
            by_dim[k].push(mask);
        }
    }
    let index: Vec<std::collections::HashMap<u32, usize>> = by_dim
        .iter()
        .map(|cells| cells.iter().enumerate().map(|(i, &m)| (m, i)).collect())
        .collect();
    let rank = |k: usize| -> usize {
        if k == 0 {
            return 0;
        }
        let faces: Vec<Vec<usize>> = by_dim[k]
            .iter()
            .map(|&m| {
                (0..n)
                    .filter(|i| m >> i & 1 == 1)
                    .map(|i| index[k - 1][&(m & !(1 << i))])
                    .collect()
            })
            .collect();
        boundary_rank(&faces, by_dim[k - 1].len())
    };
    (0..=top)
        .map(|p| by_dim[p].len() - rank(p) - rank(p + 1))
        .collect()
}

/// β_0, β_1 of the cubical complex with a vertex per set pixel, an edge per
/// 4-adjacent pair of set pixels and a square per fully set 2x2 block.
pub fn cubical_betti(grid: &[Vec<bool>]) -> (usize, usize, i64) {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let mut vid = vec![vec![usize::MAX; cols]; rows];
    let mut nv = 0;
    for r in 0..rows {
        for c in 0..cols {
            if grid[r][c] {
                vid[r][c] = nv;
                nv += 1;
            }
        }
    }
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut eid = std::collections::HashMap::new();
    for r in 0..rows {
        for c in 0..cols {
            if !grid[r][c] {
                continue;
            }
            if c + 1 < cols && grid[r][c + 1] {
                eid.insert((r, c, 'h'), edges.len());
                edges.push(vec![vid[r][c], vid[r][c + 1]]);
            }
            if r + 1 < rows && grid[r + 1][c] {
                eid.insert((r, c, 'v'), edges.len());
                edges.push(vec![vid[r][c], vid[r + 1][c]]);
            }
        }
    }
    let mut squares: Vec<Vec<usize>> = Vec::new();
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols.saturating_sub(1) {
            if grid[r][c] && grid[r][c + 1] && grid[r + 1][c] && grid[r + 1][c + 1] {
                squares.push(vec![
                    eid[&(r, c, 'h')],
                    eid[&(r + 1, c, 'h')],
                    eid[&(r, c, 'v')],
                    eid[&(r, c + 1, 'v')],
                ]);
            }
        }
    }
    let r1 = boundary_rank(&edges, nv);
    let r2 = boundary_rank(&squares, edges.len());
    let euler = nv as i64 - edges.len() as i64 + squares.len() as i64;
    (nv - r1, edges.len() - r1 - r2, euler)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn random_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Vec<Vec<bool>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_bool(density)).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_square() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
}

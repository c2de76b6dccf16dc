//! Boundary-matrix reduction over Z/2.
//!
//! Standard left-to-right column reduction with the clearing (twist)
//! optimization: dimensions are processed from the top down, and every
//! column that appears as a pivot of a reduced higher-dimensional column is
//! known to reduce to zero and is skipped.

use super::diagram::{PersistenceDiagram, PersistencePair};
use super::rips::{vertex_key, FilteredComplex};
use crate::error::Result;

const NONE: u32 = u32::MAX;

pub fn compute_persistence(complex: &FilteredComplex) -> Result<PersistenceDiagram> {
    let index = complex.validate()?;
    let simplices = complex.simplices();
    let n = simplices.len();

    let mut by_dim: Vec<Vec<u32>> = vec![Vec::new(); complex.max_dim() + 1];
    for (i, s) in simplices.iter().enumerate() {
        by_dim[s.dim()].push(i as u32);
    }

    // pivot_owner[row] = column whose reduced form has its lowest one in `row`
    let mut pivot_owner = vec![NONE; n];
    let mut cleared = vec![false; n];
    // reduced columns, addressed through `slot_of[col]`
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut slot_of: Vec<u32> = vec![NONE; n];

    let mut work: Vec<u32> = Vec::new();
    let mut scratch: Vec<u32> = Vec::new();

    for dim in (1..by_dim.len()).rev() {
        for &col in &by_dim[dim] {
            let col = col as usize;
            if cleared[col] {
                continue;
            }
            work.clear();
            work.extend(simplices[col].faces().map(|(f, len)| index[&vertex_key(&f[..len])]));
            work.sort_unstable();

            while let Some(&low) = work.last() {
                let owner = pivot_owner[low as usize];
                if owner == NONE {
                    break;
                }
                let other = &reduced[slot_of[owner as usize] as usize];
                symmetric_difference(&work, other, &mut scratch);
                std::mem::swap(&mut work, &mut scratch);
            }

            if let Some(&low) = work.last() {
                pivot_owner[low as usize] = col as u32;
                cleared[low as usize] = true;
                slot_of[col] = reduced.len() as u32;
                reduced.push(work.clone());
            }
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for (row, &owner) in pivot_owner.iter().enumerate() {
        if owner != NONE {
            let birth = &simplices[row];
            pairs.push(PersistencePair {
                dim: birth.dim(),
                birth: birth.value(),
                death: Some(simplices[owner as usize].value()),
            });
        }
    }
    for (i, s) in simplices.iter().enumerate() {
        let killed_something = slot_of[i] != NONE;
        let is_killed = pivot_owner[i] != NONE;
        if !killed_something && !is_killed {
            pairs.push(PersistencePair {
                dim: s.dim(),
                birth: s.value(),
                death: None,
            });
        }
    }

    Ok(PersistenceDiagram::new(
        pairs,
        complex.eps_max(),
        complex.max_dim(),
    ))
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

//! Finite differences on grid fields and frame sequences.
//!
//! Space: the second-order lattice Laplacian and centred gradient, with the
//! field's boundary semantics for ghost nodes. Time: second-order three-point
//! formula inside a frame sequence, first-order one-sided at its ends.

use rayon::prelude::*;

use crate::grid::GridField;

fn axis_offsets(u: &GridField) -> Vec<[isize; 3]> {
    let off = 3 - u.dim();
    (off..3)
        .map(|a| {
            let mut d = [0isize; 3];
            d[a] = 1;
            d
        })
        .collect()
}

fn neg(d: [isize; 3]) -> [isize; 3] {
    [-d[0], -d[1], -d[2]]
}

/// `Δ_h u` at every node.
pub fn laplacian(u: &GridField) -> Vec<f64> {
    let g = &u.geometry;
    let inv_h2 = 1.0 / (g.spacing * g.spacing);
    let dirs = axis_offsets(u);
    (0..u.len())
        .into_par_iter()
        .map(|i| {
            let idx = g.unravel(i);
            let c = u.values[i];
            dirs.iter().map(|&d| u.value_at_offset(idx, d) + u.value_at_offset(idx, neg(d)) - 2.0 * c).sum::<f64>() * inv_h2
        })
        .collect()
}

/// `|∇_h u|²` with centred differences.
pub fn grad_sq(u: &GridField) -> Vec<f64> {
    let g = &u.geometry;
    let inv_2h = 0.5 / g.spacing;
    let dirs = axis_offsets(u);
    (0..u.len())
        .into_par_iter()
        .map(|i| {
            let idx = g.unravel(i);
            dirs.iter()
                .map(|&d| {
                    let q = (u.value_at_offset(idx, d) - u.value_at_offset(idx, neg(d))) * inv_2h;
                    q * q
                })
                .sum()
        })
        .collect()
}

/// `∂t u` at frame `k` of `frames` sampled at `times`.
pub fn time_derivative(frames: &[&[f64]], times: &[f64], k: usize) -> Vec<f64> {
    let m = frames.len();
    assert!(m >= 2 && k < m, "need two frames around k");
    if k == 0 || k + 1 == m {
        let (a, b) = if k == 0 { (0, 1) } else { (m - 2, m - 1) };
        let dt = times[b] - times[a];
        return frames[a].iter().zip(frames[b]).map(|(x, y)| (y - x) / dt).collect();
    }
    let h1 = times[k] - times[k - 1];
    let h2 = times[k + 1] - times[k];
    let cm = -h2 / (h1 * (h1 + h2));
    let c0 = (h2 - h1) / (h1 * h2);
    let cp = h1 / (h2 * (h1 + h2));
    (0..frames[k].len()).map(|i| cm * frames[k - 1][i] + c0 * frames[k][i] + cp * frames[k + 1][i]).collect()
}

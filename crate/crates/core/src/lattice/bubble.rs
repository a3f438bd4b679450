use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph_norm;
use crate::error::{LabError, Result};
use crate::numeric::KahanSum;

const MAX_BUBBLE_TERMS: u128 = 1 << 36;

/// Which bubble sum to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BubbleVariant {
    /// `sum_y <y>^{-2d+4} <x-y>^{-d+2}`.
    HighDim,
    /// `sum_y <x-y>^{-2} <y>^{-4} [k + log<y>]^k`, four dimensions only.
    FourDim { k: u32 },
}

/// The bubble sum over the box `{-radius..radius}^d`, by weight tables
/// indexed by `l1` norm.
pub fn bubble_sum(variant: BubbleVariant, x: &[i64], radius: usize) -> Result<f64> {
    let dim = x.len();
    if dim == 0 {
        return Err(LabError::Domain("lattice dimension must be at least 1".into()));
    }
    if let BubbleVariant::FourDim { .. } = variant {
        if dim != 4 {
            return Err(LabError::Domain(format!(
                "the log-weighted bubble is a four-dimensional object, got dimension {dim}"
            )));
        }
    }
    let side = 2 * radius as u128 + 1;
    if side.checked_pow(dim as u32).map_or(true, |t| t > MAX_BUBBLE_TERMS) {
        return Err(LabError::Resource(format!(
            "a bubble sum over a radius-{radius} box in dimension {dim} is too large"
        )));
    }
    let r = radius as i64;
    let max_norm = dim * radius + graph_norm(x) as usize + 1;
    let bracket = |m: usize| (m.max(2)) as f64;
    let d = dim as i32;
    let (near, far): (Vec<f64>, Vec<f64>) = match variant {
        BubbleVariant::HighDim => (
            (0..=max_norm).map(|m| bracket(m).powi(-2 * d + 4)).collect(),
            (0..=max_norm).map(|m| bracket(m).powi(-d + 2)).collect(),
        ),
        BubbleVariant::FourDim { k } => (
            (0..=max_norm)
                .map(|m| bracket(m).powi(-4) * (k as f64 + bracket(m).ln()).powi(k as i32))
                .collect(),
            (0..=max_norm).map(|m| bracket(m).powi(-2)).collect(),
        ),
    };
    // per-axis contributions to |y|_1 and |x - y|_1
    let axes: Vec<Vec<(usize, usize)>> = x
        .iter()
        .map(|&xi| {
            (-r..=r)
                .map(|y| (y.unsigned_abs() as usize, (xi - y).unsigned_abs() as usize))
                .collect()
        })
        .collect();

    fn recurse(
        axes: &[Vec<(usize, usize)>],
        ny: usize,
        nxy: usize,
        near: &[f64],
        far: &[f64],
        acc: &mut KahanSum,
    ) {
        if axes.len() == 1 {
            let mut row = 0.0;
            for &(a, b) in &axes[0] {
                row += near[ny + a] * far[nxy + b];
            }
            acc.add(row);
            return;
        }
        for &(a, b) in &axes[0] {
            recurse(&axes[1..], ny + a, nxy + b, near, far, acc);
        }
    }

    let slices: Vec<f64> = axes[0]
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = KahanSum::default();
            if dim == 1 {
                acc.add(near[a] * far[b]);
            } else {
                recurse(&axes[1..], a, b, &near, &far, &mut acc);
            }
            acc.value()
        })
        .collect();
    Ok(slices.into_iter().collect::<KahanSum>().value())
}

/// Right-hand side shape of the four-dimensional bubble inequality:
/// `<x>^{-2} (k+1)^{-1} [k + 1 + log<x>]^{k+1}`.
pub fn four_dim_bubble_envelope(k: u32, x: &[i64]) -> f64 {
    let b = super::bracket(x);
    b.powi(-2) / (k as f64 + 1.0) * (k as f64 + 1.0 + b.ln()).powi(k as i32 + 1)
}

//! Full Green function `G(0, x) = sum_{n >= 0} p_n(0, x)` for transient
//! dimensions.
//!
//! Summing `p_n` directly converges like `N^{1 - d/2}`, hopeless in `d = 3`.
//! Instead we use the continuous-time representation: a walk that jumps at
//! rate one visits `x` for the same expected number of steps, and its
//! coordinates are independent rate-`1/d` one-dimensional walks, so
//!
//! `G(0, x) = d * int_0^inf prod_i e^{-s} I_{|x_i|}(s) ds`
//!
//! with `I_nu` the modified Bessel function. The integral is done by
//! Gauss-Legendre on dyadic panels up to a cutoff `S`, and the tail beyond `S`
//! by integrating the Hankel asymptotic series term by term.

use std::collections::BTreeMap;

use super::field::LatticeField;
use super::graph_norm;
use crate::error::{LabError, Result};
use crate::numeric::{gauss_legendre, KahanSum};

const HANKEL_TERMS: usize = 10;

/// `e^{-s} I_nu(s)` for `nu = 0..=nu_max` by Miller's backward recurrence,
/// normalised with `I_0 + 2 sum_{nu >= 1} I_nu = e^s`.
pub(crate) fn scaled_bessel_i(s: f64, nu_max: usize) -> Vec<f64> {
    if s == 0.0 {
        let mut out = vec![0.0; nu_max + 1];
        out[0] = 1.0;
        return out;
    }
    let start = nu_max + 30 + (10.0 * s.sqrt()).ceil() as usize + (2.0 * s).min(60.0) as usize;
    let mut out = vec![0.0; nu_max + 1];
    let mut upper = 0.0f64; // I_{nu+1}
    let mut current = 1e-300f64; // I_nu
    let mut norm = 0.0f64;
    for nu in (0..=start).rev() {
        if nu <= nu_max {
            out[nu] = current;
        }
        norm += if nu == 0 { current } else { 2.0 * current };
        if nu == 0 {
            break;
        }
        let lower = upper + (2.0 * nu as f64 / s) * current;
        upper = current;
        current = lower;
        if current > 1e250 {
            let shrink = 1e-250;
            current *= shrink;
            upper *= shrink;
            norm *= shrink;
            for v in out.iter_mut() {
                *v *= shrink;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Coefficients of the Hankel series `e^{-s} I_nu(s) ~ (2 pi s)^{-1/2} sum_k h_k s^{-k}`.
fn hankel_coefficients(nu: u64, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut out = Vec::with_capacity(terms);
    let mut a = 1.0f64;
    out.push(1.0);
    for k in 1..terms {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0);
        out.push(if k % 2 == 1 { -a } else { a });
    }
    out
}

fn integrand(s: f64, orders: &[u64], nu_max: usize) -> f64 {
    let table = scaled_bessel_i(s, nu_max);
    orders.iter().map(|&nu| table[nu as usize]).product()
}

fn panel_sum(orders: &[u64], nu_max: usize, cutoff: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let mut acc = KahanSum::default();
    let mut a = 0.0f64;
    let mut b = 1.0f64;
    while a < cutoff {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        for (t, w) in nodes.iter().zip(&weights) {
            acc.add(half * w * integrand(mid + half * t, orders, nu_max));
        }
        a = b;
        b *= 2.0;
    }
    acc.value()
}

/// `G(0, x)` (including the time-zero term) and an error bound.
pub fn green_value(x: &[i64]) -> Result<(f64, f64)> {
    let dim = x.len();
    if dim < 3 {
        return Err(LabError::Domain(format!(
            "simple random walk is recurrent in dimension {dim}; the Green function is infinite"
        )));
    }
    let orders: Vec<u64> = x.iter().map(|c| c.unsigned_abs()).collect();
    let nu_max = *orders.iter().max().unwrap() as usize;
    let nu2 = (nu_max * nu_max) as f64;
    let mut cutoff = 1024.0f64;
    while cutoff < 60.0 * nu2.max(1.0) {
        cutoff *= 2.0;
    }
    let d = dim as f64;
    let body = panel_sum(&orders, nu_max, cutoff, 28);
    let check = panel_sum(&orders, nu_max, cutoff, 20);

    // tail: multiply the Hankel series of each coordinate and integrate
    let mut series = vec![1.0f64];
    for &nu in &orders {
        let h = hankel_coefficients(nu, HANKEL_TERMS);
        let mut next = vec![0.0; HANKEL_TERMS];
        for (i, a) in series.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                if i + j < HANKEL_TERMS {
                    next[i + j] += a * b;
                }
            }
        }
        series = next;
    }
    let prefactor = (2.0 * std::f64::consts::PI).powf(-d / 2.0);
    let mut tail = 0.0;
    let mut last = 0.0f64;
    for (m, c) in series.iter().enumerate() {
        let power = d / 2.0 + m as f64 - 1.0;
        let term = prefactor * c * cutoff.powf(-power) / power;
        tail += term;
        last = term.abs();
    }
    let value = d * (body + tail);
    let error = d * ((body - check).abs() + last) + 1e-15 * value;
    Ok((value, error))
}

/// The modified Green function `G~(0, .)` on a centred box, with a uniform
/// error bound.
#[derive(Clone, Debug)]
pub struct GreenLimit {
    pub field: LatticeField,
    pub error_bound: f64,
}

/// `G~(0, x) = G(0, x) - 1(x = 0)` for every `x` with `|x_i| <= radius`.
pub fn green_limit(dim: usize, radius: usize, tol: f64) -> Result<GreenLimit> {
    if dim < 3 {
        return Err(LabError::Domain(format!(
            "simple random walk is recurrent in dimension {dim}; the Green function is infinite"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(LabError::Domain("tolerance must be positive".into()));
    }
    let mut field = LatticeField::centered(dim, radius);
    let mut cache: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    let mut points = Vec::new();
    field.for_each_point(|x, _| points.push(x.to_vec()));
    let mut worst = 0.0f64;
    for x in points {
        let mut key: Vec<u64> = x.iter().map(|c| c.unsigned_abs()).collect();
        key.sort_unstable();
        let (value, error) = match cache.get(&key) {
            Some(hit) => *hit,
            None => {
                let canonical: Vec<i64> = key.iter().map(|&c| c as i64).collect();
                let hit = green_value(&canonical)?;
                cache.insert(key, hit);
                hit
            }
        };
        worst = worst.max(error);
        let modified = if graph_norm(&x) == 0 { value - 1.0 } else { value };
        field.set(&x, modified)?;
    }
    if worst > tol {
        return Err(LabError::Precision(format!(
            "Green function error bound {worst:e} exceeds the requested tolerance {tol:e}"
        )));
    }
    Ok(GreenLimit { field, error_bound: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_values_match_reference() {
        // e^{-1} I_0(1) and e^{-1} I_1(1)
        let t = scaled_bessel_i(1.0, 3);
        assert!((t[0] - 0.465_759_607_593_640_6).abs() < 1e-14);
        assert!((t[1] - 0.207_910_415_349_708_9).abs() < 1e-14);
        let big = scaled_bessel_i(400.0, 2);
        let asym = 1.0 / (2.0 * std::f64::consts::PI * 400.0f64).sqrt() * (1.0 + 1.0 / 3200.0);
        assert!((big[0] / asym - 1.0).abs() < 1e-5);
    }

    #[test]
    fn watson_integral_in_three_dimensions() {
        // P(return) = 1 - 1/G(0,0) = 0.3405373296...
        let (g, err) = green_value(&[0, 0, 0]).unwrap();
        assert!(err < 1e-9, "{err}");
        assert!((1.0 - 1.0 / g - 0.340_537_329_550_999).abs() < 1e-9, "{g}");
    }

    #[test]
    fn recurrent_dimensions_are_rejected() {
        assert!(matches!(green_value(&[0, 0]), Err(LabError::Domain(_))));
        assert!(matches!(green_limit(2, 1, 1e-6), Err(LabError::Domain(_))));
    }

    #[test]
    fn harmonic_away_from_origin() {
        // G(0, .) is harmonic off the origin and G(0,0) = 1 + mean over neighbours.
        let lim = green_limit(4, 3, 1e-8).unwrap();
        let f = &lim.field;
        let g = |x: &[i64]| f.get(x) + if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
        let x = [1i64, 1, 0, 0];
        let mut mean = 0.0;
        for axis in 0..4 {
            for s in [-1i64, 1] {
                let mut y = x;
                y[axis] += s;
                mean += g(&y) / 8.0;
            }
        }
        assert!((mean - g(&x)).abs() < 1e-9);
        let mut mean0 = 0.0;
        for axis in 0..4 {
            let mut y = [0i64; 4];
            y[axis] = 1;
            mean0 += g(&y) / 4.0;
        }
        assert!((1.0 + mean0 - g(&[0, 0, 0, 0])).abs() < 1e-9);
    }
}

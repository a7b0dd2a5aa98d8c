//! Gaussian kernel density estimates and their L1 distance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 512;
pub const GRID_PAD_BANDWIDTHS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeEstimate {
    /// Trapezoid integral of the density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `1.06 sigma L^(-1/5)` with the sample standard deviation.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let len = values.len();
    if len < 2 {
        return Err(Error::invalid("values", "need at least two values for an automatic bandwidth"));
    }
    let mean = values.iter().sum::<f64>() / len as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
    let h = 1.06 * var.sqrt() * (len as f64).powf(-0.2);
    if h > 0.0 {
        Ok(h)
    } else {
        Err(Error::invalid("values", "all values are equal; bandwidth would be zero"))
    }
}

/// `points` equally spaced abscissae covering `[lo - pad h, hi + pad h]`.
pub fn padded_grid(lo: f64, hi: f64, bandwidth: f64, points: usize) -> Vec<f64> {
    let a = lo - GRID_PAD_BANDWIDTHS * bandwidth;
    let b = hi + GRID_PAD_BANDWIDTHS * bandwidth;
    let step = (b - a) / (points - 1) as f64;
    (0..points).map(|i| a + step * i as f64).collect()
}

/// A grid padded around both sample sets, for comparing two estimates.
pub fn shared_grid(a: &[f64], b: &[f64], points: usize) -> Result<(Vec<f64>, f64, f64)> {
    let ha = silverman_bandwidth(a)?;
    let hb = silverman_bandwidth(b)?;
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((padded_grid(lo, hi, ha.max(hb), points), ha, hb))
}

/// Gaussian KDE of `values` on `grid` (default: 512 points padded by four
/// bandwidths around the data) with `bandwidth` (default: Silverman).
pub fn kde_estimate(values: &[f64], grid: Option<&[f64]>, bandwidth: Option<f64>) -> Result<KdeEstimate> {
    if values.is_empty() {
        return Err(Error::invalid("values", "empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KDE sample".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::invalid("bandwidth", format!("must be > 0, got {h}"))),
        None => silverman_bandwidth(values)?,
    };
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            padded_grid(lo, hi, h, DEFAULT_GRID_POINTS)
        }
    };
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    let density = grid
        .iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeEstimate {
        grid,
        density,
        bandwidth: h,
    })
}

/// Trapezoid integral of `|a - b|` on their shared grid.
pub fn kde_l1_distance(a: &KdeEstimate, b: &KdeEstimate) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::invalid("grid", "estimates live on different grids"));
    }
    let diff: Vec<f64> = a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs()).collect();
    Ok(trapezoid(&a.grid, &diff))
}

/// KDEs of two samples on a common padded grid and their L1 distance.
pub fn compare_samples(a: &[f64], b: &[f64]) -> Result<(KdeEstimate, KdeEstimate, f64)> {
    let (grid, ha, hb) = shared_grid(a, b, DEFAULT_GRID_POINTS)?;
    let ka = kde_estimate(a, Some(&grid), Some(ha))?;
    let kb = kde_estimate(b, Some(&grid), Some(hb))?;
    let d = kde_l1_distance(&ka, &kb)?;
    Ok((ka, kb, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_value_is_a_gaussian() {
        let k = kde_estimate(&[0.3], None, Some(0.2)).unwrap();
        let peak = k.density.iter().copied().fold(0.0, f64::max);
        assert!((peak - 1.0 / (0.2 * (2.0 * PI).sqrt())).abs() < 1e-4);
        assert!((k.integral() - 1.0).abs() < 1e-2);
        assert!(kde_estimate(&[], None, None).is_err());
        assert!(kde_estimate(&[1.0], None, None).is_err());
    }

    #[test]
    fn two_point_mixture_oracle() {
        let grid: Vec<f64> = (0..10).map(|i| -2.0 + 0.45 * i as f64).collect();
        let k = kde_estimate(&[-1.0, 1.0], Some(&grid), Some(0.5)).unwrap();
        for (x, d) in grid.iter().zip(&k.density) {
            let g = |m: f64| (-(x - m).powi(2) / (2.0 * 0.25)).exp() / (0.5 * (2.0 * PI).sqrt());
            assert!((d - 0.5 * (g(-1.0) + g(1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_densities_are_two_apart() {
        let grid: Vec<f64> = (0..4001).map(|i| -10.0 + 0.005 * i as f64).collect();
        let a = kde_estimate(&[-5.0], Some(&grid), Some(0.3)).unwrap();
        let b = kde_estimate(&[5.0], Some(&grid), Some(0.3)).unwrap();
        assert!((kde_l1_distance(&a, &b).unwrap() - 2.0).abs() < 1e-3);
        assert_eq!(kde_l1_distance(&a, &a).unwrap(), 0.0);
        let other = kde_estimate(&[5.0], None, Some(0.3)).unwrap();
        assert!(kde_l1_distance(&a, &other).is_err());
    }

    #[test]
    fn silverman_rule() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((silverman_bandwidth(&v).unwrap() - 1.06 * sd * 4f64.powf(-0.2)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn estimates_integrate_to_one(values in prop::collection::vec(-3.0f64..3.0, 2..60)) {
            prop_assume!(silverman_bandwidth(&values).is_ok());
            let k = kde_estimate(&values, None, None).unwrap();
            prop_assert!(k.density.iter().all(|d| *d >= 0.0));
            prop_assert!((k.integral() - 1.0).abs() < 1e-2);
        }

        #[test]
        fn l1_is_a_metric(
            a in prop::collection::vec(-2.0f64..2.0, 3..20),
            b in prop::collection::vec(-2.0f64..2.0, 3..20),
            c in prop::collection::vec(-2.0f64..2.0, 3..20),
        ) {
            let grid: Vec<f64> = (0..400).map(|i| -5.0 + 0.025 * i as f64).collect();
            let k = |v: &[f64]| kde_estimate(v, Some(&grid), Some(0.3)).unwrap();
            let (ka, kb, kc) = (k(&a), k(&b), k(&c));
            let ab = kde_l1_distance(&ka, &kb).unwrap();
            prop_assert!((ab - kde_l1_distance(&kb, &ka).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= kde_l1_distance(&ka, &kc).unwrap() + kde_l1_distance(&kc, &kb).unwrap() + 1e-12);
            prop_assert!(ab <= 2.0 + 1e-6);
        }
    }
}

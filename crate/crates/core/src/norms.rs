//! Discrete space-time norms: volume Sobolev surrogates built from repeated
//! spectral/finite-difference derivatives, and the time aggregation used by
//! the contraction metrics.

use crate::fft::SpectralGrid;
use crate::field::{VectorField, VolumeField};
use crate::grid::Grid;
use crate::operators::{dx, dy, dz};
use crate::Scalar;

/// Plain L2 norm squared with trapezoid-in-depth quadrature.
pub fn l2_sq<S: Scalar>(f: &VolumeField<S>, grid: &Grid) -> f64 {
    let nh = grid.nh();
    let wh = grid.l1 * grid.l2 / nh as f64;
    let h = grid.hz();
    let mut acc = 0.0;
    for k in 0..=grid.nz {
        let wz = if k == 0 || k == grid.nz { 0.5 * h } else { h };
        let mut level = 0.0;
        for n in 0..nh {
            let v = f.data[k * nh + n].to_f64_lossy();
            level += v * v;
        }
        acc += wz * wh * level;
    }
    acc
}

/// Volume `H^k` surrogate: sum of L2 norms squared of all coordinate
/// derivatives up to total order `k` (spectral horizontally, finite
/// differences vertically, applied in the fixed order x, then y, then z).
pub fn hk_sq<S: Scalar>(f: &VolumeField<S>, k: usize, grid: &Grid, sp: &SpectralGrid<S>) -> f64 {
    let mut acc = 0.0;
    for ax in 0..=k {
        for ay in 0..=(k - ax) {
            for az in 0..=(k - ax - ay) {
                let mut g = f.clone();
                for _ in 0..az {
                    g = dz(&g);
                }
                for _ in 0..ay {
                    g = dy(&g, sp);
                }
                for _ in 0..ax {
                    g = dx(&g, sp);
                }
                acc += l2_sq(&g, grid);
            }
        }
    }
    acc
}

pub fn hk_sq_vec<S: Scalar>(
    u: &VectorField<S>,
    k: usize,
    grid: &Grid,
    sp: &SpectralGrid<S>,
) -> f64 {
    u.comps.iter().map(|c| hk_sq(c, k, grid, sp)).sum()
}

/// Max over a time series.
pub fn time_linf(series: &[f64]) -> f64 {
    series.iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Trapezoid quadrature of a time series sampled at spacing dt.
pub fn time_l2(series: &[f64], dt: f64) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for w in series.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hk_of_single_mode_matches_hand_value() {
        let grid = Grid::new(16, 16, 32, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let k = 2.0 * std::f64::consts::PI;
        let f = VolumeField::from_fn(&grid, |x, _, _| (k * x).cos());
        // H^1: ||f||^2 + ||df/dx||^2 = 1/2 + k^2/2 (slab volume 1, mean of
        // cos^2 is 1/2)
        let want = 0.5 + 0.5 * k * k;
        let got = hk_sq(&f, 1, &grid, &sp);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn time_aggregation() {
        let series = vec![1.0, 2.0, 4.0];
        assert_eq!(time_linf(&series), 4.0);
        assert!((time_l2(&series, 0.5) - (0.75 + 1.5)).abs() < 1e-15);
    }
}

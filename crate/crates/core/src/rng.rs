//! Small deterministic PRNG for test fields and the identity suite.

use crate::fft::{signed_freq, SpectralGrid};
use crate::field::{SurfaceField, VolumeField};
use crate::grid::Grid;
use crate::Scalar;
use num_complex::Complex;

/// SplitMix64: tiny, seedable, reproducible across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn next_sym(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// Random band-limited surface with spectrally decaying modes, scaled so that
/// the sup norm equals `amplitude`.
pub fn random_smooth_surface<S: Scalar>(
    sp: &SpectralGrid<S>,
    grid: &Grid,
    amplitude: f64,
    rng: &mut SplitMix64,
) -> SurfaceField<S> {
    let mut coeffs = vec![Complex::new(S::zero(), S::zero()); grid.nh()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let m1 = signed_freq(i, grid.nx);
            let m2 = signed_freq(j, grid.ny);
            if m1 == 0 && m2 == 0 {
                continue;
            }
            // keep well inside the resolved band
            if m1.abs() > grid.nx as i64 / 4 || m2.abs() > grid.ny as i64 / 4 {
                continue;
            }
            let decay = (-0.5 * (m1 * m1 + m2 * m2) as f64).exp();
            let re = rng.next_sym() * decay;
            let im = rng.next_sym() * decay;
            coeffs[j * grid.nx + i] = Complex::new(S::lit(re), S::lit(im));
        }
    }
    // enforce conjugate symmetry so values are real
    let mut sym = coeffs.clone();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let ic = (grid.nx - i) % grid.nx;
            let jc = (grid.ny - j) % grid.ny;
            let c = coeffs[j * grid.nx + i];
            let cc = coeffs[jc * grid.nx + ic];
            sym[j * grid.nx + i] = (c + cc.conj()).scale(S::lit(0.5));
        }
    }
    let field = SurfaceField::from_coeffs(sp, sym);
    let max = field.linf().max(1e-300);
    field.scaled(S::lit(amplitude / max))
}

/// Random smooth volume field: a few random low modes horizontally times a
/// smooth vertical profile; vanishes at the bottom when `zero_bottom`.
pub fn random_smooth_volume<S: Scalar>(
    grid: &Grid,
    amplitude: f64,
    zero_bottom: bool,
    rng: &mut SplitMix64,
) -> VolumeField<S> {
    let mut terms: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for _ in 0..4 {
        let m1 = (rng.next_f64() * 3.0).floor(); // 0..2
        let m2 = (rng.next_f64() * 3.0).floor();
        let phase1 = rng.next_f64() * std::f64::consts::TAU;
        let phase2 = rng.next_f64() * std::f64::consts::TAU;
        let amp = rng.next_sym();
        terms.push((m1, m2, phase1, phase2, amp));
    }
    let vshape = move |z: f64| {
        if zero_bottom {
            (std::f64::consts::FRAC_PI_2 * (1.0 + z)).sin()
        } else {
            (0.7 * (1.0 + z)).cos()
        }
    };
    let l1 = grid.l1;
    let l2 = grid.l2;
    let f = VolumeField::from_fn(grid, |x, y, z| {
        let mut v = 0.0;
        for &(m1, m2, p1, p2, a) in &terms {
            v += a
                * (std::f64::consts::TAU * m1 * x / l1 + p1).cos()
                * (std::f64::consts::TAU * m2 * y / l2 + p2).cos();
        }
        v * vshape(z)
    });
    let max = f.linf().max(1e-300);
    f.scaled(S::lit(amplitude / max))
}

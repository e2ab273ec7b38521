//! JSON run configuration: grid, horizons, solver knobs and initial data
//! (named preset or explicit Fourier mode lists).

use crate::elliptic::SolverOpts;
use crate::error::{Error, Result};
use crate::evolution::TimeScheme;
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::grid::Grid;
use crate::picard::{preset_initial_state, InitialState, PicardConfig};
use crate::Scalar;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default = "default_grid")]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub picard: PicardParams,
    #[serde(default)]
    pub initial_data: InitialDataConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub l1: f64,
    pub l2: f64,
}

fn default_grid() -> GridConfig {
    GridConfig {
        nx: 16,
        ny: 16,
        nz: 24,
        l1: 1.0,
        l2: 1.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

fn default_scheme() -> String {
    "backward-euler".to_string()
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_final: 0.05,
            dt: 2.5e-3,
            scheme: default_scheme(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub epsilon: f64,
    /// The Jacobian floor is delta / 2.
    pub delta: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            epsilon: 1.0,
            delta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 800,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardParams {
    pub max_sweeps: usize,
    #[serde(default = "default_min_sweeps")]
    pub min_sweeps: usize,
    pub tol_fixed_point: f64,
}

fn default_min_sweeps() -> usize {
    1
}

impl Default for PicardParams {
    fn default() -> Self {
        PicardParams {
            max_sweeps: 6,
            min_sweeps: 1,
            tol_fixed_point: 1e-10,
        }
    }
}

/// One horizontal Fourier mode of the surface function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMode {
    pub m1: i64,
    pub m2: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// One separable mode of a volume field: horizontal cosine modes with phases
/// and a vertical polynomial in `(1 + x3)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeMode {
    pub m1: i64,
    pub m2: i64,
    pub amp: f64,
    #[serde(default)]
    pub phase1: f64,
    #[serde(default)]
    pub phase2: f64,
    /// Coefficients of powers of `(1 + x3)`.
    pub vertical_poly: Vec<f64>,
}

/// Volume mode tagged with the velocity component it feeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityMode {
    pub component: usize,
    #[serde(flatten)]
    pub mode: VolumeMode,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InitialDataConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub eta_modes: Vec<SurfaceMode>,
    #[serde(default)]
    pub theta_modes: Vec<VolumeMode>,
    #[serde(default)]
    pub u_modes: Vec<VelocityMode>,
}

fn default_amplitude() -> f64 {
    0.01
}

impl Config {
    pub fn default_with_preset(preset: &str) -> Self {
        Config {
            version: CONFIG_VERSION,
            grid: default_grid(),
            time: TimeConfig::default(),
            geometry: GeometryConfig::default(),
            solver: SolverConfig::default(),
            picard: PicardParams::default(),
            initial_data: InitialDataConfig {
                preset: Some(preset.to_string()),
                amplitude: default_amplitude(),
                ..Default::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?.validate()?;
        if !(self.time.dt > 0.0 && self.time.dt < self.time.t_final && self.time.t_final <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < dt < T <= 1, got dt = {}, T = {}",
                self.time.dt, self.time.t_final
            )));
        }
        self.scheme()?;
        if let Some(p) = &self.initial_data.preset {
            if !matches!(p.as_str(), "zero" | "equilibrium" | "perturbed-equilibrium") {
                return Err(Error::Config(format!("unknown preset '{p}'")));
            }
        }
        for m in &self.initial_data.u_modes {
            if m.component > 2 {
                return Err(Error::Config(format!(
                    "velocity mode component {} out of range",
                    m.component
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.nz,
            self.grid.l1,
            self.grid.l2,
        )
    }

    pub fn scheme(&self) -> Result<TimeScheme> {
        match self.time.scheme.as_str() {
            "backward-euler" => Ok(TimeScheme::BackwardEuler),
            "crank-nicolson" => Ok(TimeScheme::CrankNicolson),
            other => Err(Error::Config(format!("unknown time scheme '{other}'"))),
        }
    }

    pub fn solver_opts(&self) -> SolverOpts {
        SolverOpts {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            restart: self.solver.restart,
            threads: 1,
        }
    }

    pub fn solver_opts_with_threads(&self, threads: usize) -> SolverOpts {
        let mut opts = self.solver_opts();
        opts.threads = threads.max(1);
        opts
    }

    pub fn picard_config(&self, threads: usize) -> Result<PicardConfig> {
        Ok(PicardConfig {
            grid: self.grid()?,
            t_final: self.time.t_final,
            dt: self.time.dt,
            max_sweeps: self.picard.max_sweeps,
            min_sweeps: self.picard.min_sweeps,
            tol_fixed_point: self.picard.tol_fixed_point,
            delta: self.geometry.delta,
            epsilon: self.geometry.epsilon,
            scheme: self.scheme()?,
            solver: self.solver_opts_with_threads(threads),
            threads,
        })
    }

    /// Builds the initial fields from the preset or the explicit mode lists.
    pub fn initial_state<S: Scalar>(
        &self,
        grid: &Grid,
        sp: &SpectralGrid<S>,
    ) -> Result<InitialState<S>> {
        if let Some(preset) = &self.initial_data.preset {
            return preset_initial_state(preset, grid, sp, self.initial_data.amplitude);
        }
        let mut eta_vals = vec![0.0f64; grid.nh()];
        for m in &self.initial_data.eta_modes {
            let k1 = 2.0 * std::f64::consts::PI * m.m1 as f64 / grid.l1;
            let k2 = 2.0 * std::f64::consts::PI * m.m2 as f64 / grid.l2;
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let arg = k1 * grid.xcoord(i) + k2 * grid.ycoord(j);
                    eta_vals[j * grid.nx + i] += m.re * arg.cos() - m.im * arg.sin();
                }
            }
        }
        let eta0 = SurfaceField::from_values(sp, eta_vals.into_iter().map(S::lit).collect())?;
        let eval_volume = |modes: &[VolumeMode]| -> VolumeField<S> {
            let mut out = VolumeField::zeros(grid);
            for m in modes {
                let k1 = 2.0 * std::f64::consts::PI * m.m1 as f64 / grid.l1;
                let k2 = 2.0 * std::f64::consts::PI * m.m2 as f64 / grid.l2;
                let field = VolumeField::from_fn(grid, |x, y, z| {
                    let mut vert = 0.0;
                    for (p, c) in m.vertical_poly.iter().enumerate() {
                        vert += c * (1.0 + z).powi(p as i32);
                    }
                    m.amp * (k1 * x + m.phase1).cos() * (k2 * y + m.phase2).cos() * vert
                });
                out.axpy(S::one(), &field);
            }
            out
        };
        let theta0 = eval_volume(&self.initial_data.theta_modes);
        let mut u0 = VectorField::zeros(grid);
        for vm in &self.initial_data.u_modes {
            let f = eval_volume(std::slice::from_ref(&vm.mode));
            u0.comps[vm.component].axpy(S::one(), &f);
        }
        Ok(InitialState { u0, theta0, eta0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_validates() {
        let cfg = Config::default_with_preset("equilibrium");
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(back.grid.nx, 16);
        assert_eq!(back.initial_data.preset.as_deref(), Some("equilibrium"));
    }

    #[test]
    fn malformed_and_invalid_configs_are_rejected() {
        assert!(Config::from_json("{ not json").is_err());
        let mut cfg = Config::default_with_preset("equilibrium");
        cfg.time.dt = cfg.time.t_final * 2.0;
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(Config::from_json(&text).is_err());
        let mut cfg2 = Config::default_with_preset("no-such-preset");
        cfg2.time = TimeConfig::default();
        let text2 = serde_json::to_string(&cfg2).unwrap();
        assert!(Config::from_json(&text2).is_err());
    }

    #[test]
    fn mode_lists_build_fields() {
        let mut cfg = Config::default_with_preset("zero");
        cfg.initial_data.preset = None;
        cfg.initial_data.eta_modes = vec![SurfaceMode {
            m1: 1,
            m2: 0,
            re: 0.05,
            im: 0.0,
        }];
        cfg.initial_data.theta_modes = vec![VolumeMode {
            m1: 0,
            m2: 0,
            amp: 1.0,
            phase1: 0.0,
            phase2: 0.0,
            vertical_poly: vec![0.0, -0.5],
        }];
        let grid = cfg.grid().unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let init = cfg.initial_state(&grid, &sp).unwrap();
        assert!((init.eta0.linf() - 0.05).abs() < 1e-12);
        // theta = -(1+z)/2
        let want = VolumeField::from_fn(&grid, |_, _, z| -(1.0 + z) / 2.0);
        assert!(init.theta0.max_abs_diff(&want) < 1e-12);
    }
}

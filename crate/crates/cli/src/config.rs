//! Run configuration: a single JSON document per invocation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use rapidstab_core::moment::{DipolarMoment, ShiftMode};
use rapidstab_core::spectral::SpectralState;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mu: Option<MuSpec>,
    /// Target decay rate of the closed loop.
    pub lambda: Option<f64>,
    pub n_modes: Option<usize>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub mode: ModeFlag,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Where `simulate` and `kernel` read gains from; defaults to
    /// `<output_dir>/gains.json`.
    pub gains_file: Option<PathBuf>,
    #[serde(default = "default_kernel_grid")]
    pub kernel_grid: usize,
    #[serde(default = "default_sv_cells")]
    pub sv_cells: usize,
    pub finite_dim: Option<FiniteDimInput>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    8.0
}
fn default_sample_every() -> usize {
    10
}
fn default_kernel_grid() -> usize {
    201
}
fn default_sv_cells() -> usize {
    400
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSpec {
    /// Ascending polynomial coefficients.
    Polynomial(Vec<f64>),
    /// JSON file holding `{ "values": [...] }` sampled uniformly on [0,1].
    SamplesFile(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Mode {
        mode: usize,
        component: Component,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    File {
        coefficients_file: PathBuf,
    },
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    P,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
pub enum ModeFlag {
    #[default]
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "shifted-rotating")]
    ShiftedRotating,
}

impl ModeFlag {
    pub fn shift_mode(self) -> ShiftMode {
        match self {
            ModeFlag::Plain => ShiftMode::Plain,
            ModeFlag::ShiftedRotating => ShiftMode::Shifted,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeFlag::Plain => "plain",
            ModeFlag::ShiftedRotating => "shifted-rotating",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct FiniteDimInput {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SampledMuFile {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CoefficientsFile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if let Some(l) = self.lambda {
            if !l.is_finite() || l <= 0.0 {
                bail!("lambda must be positive");
            }
        }
        if let Some(n) = self.n_modes {
            if n < 8 {
                bail!("n_modes floor is 8 (got {n})");
            }
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            bail!("dt must be positive");
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            bail!("t_final must be positive");
        }
        if self.sample_every == 0 {
            bail!("sample_every must be at least 1");
        }
        if self.kernel_grid < 2 {
            bail!("kernel_grid needs at least 2 points");
        }
        if self.sv_cells < 8 {
            bail!("sv_cells floor is 8");
        }
        Ok(())
    }

    pub fn require_lambda(&self) -> anyhow::Result<f64> {
        self.lambda.context("config needs a `lambda` decay rate")
    }

    pub fn require_n_modes(&self) -> anyhow::Result<usize> {
        self.n_modes.context("config needs `n_modes`")
    }

    pub fn build_mu(&self) -> anyhow::Result<DipolarMoment> {
        let spec = self.mu.as_ref().context("config needs a `mu` section")?;
        let mu = match spec {
            MuSpec::Polynomial(coeffs) => DipolarMoment::polynomial(coeffs.clone())?,
            MuSpec::SamplesFile(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading mu samples {}", path.display()))?;
                let file: SampledMuFile = serde_json::from_str(&text)
                    .with_context(|| format!("parsing mu samples {}", path.display()))?;
                DipolarMoment::sampled(file.values)?
            }
        };
        Ok(mu)
    }

    pub fn gains_path(&self) -> PathBuf {
        self.gains_file
            .clone()
            .unwrap_or_else(|| self.output_dir.join("gains.json"))
    }

    pub fn build_initial(&self, n_modes: usize) -> anyhow::Result<SpectralState> {
        let spec = self.initial.as_ref().context("config needs an `initial` section")?;
        let state = match spec {
            InitialSpec::Mode { mode, component, amplitude } => {
                if *mode == 0 || *mode > n_modes {
                    bail!("initial mode {mode} outside 1..={n_modes}");
                }
                let mut s = SpectralState::zero(n_modes);
                match component {
                    Component::P => s.p[mode - 1] = *amplitude,
                    Component::Q => s.q[mode - 1] = *amplitude,
                }
                s
            }
            InitialSpec::File { coefficients_file } => {
                let text = std::fs::read_to_string(coefficients_file).with_context(|| {
                    format!("reading initial coefficients {}", coefficients_file.display())
                })?;
                let file: CoefficientsFile = serde_json::from_str(&text)?;
                if file.p.len() != n_modes || file.q.len() != n_modes {
                    bail!("initial coefficient arrays must have length {n_modes}");
                }
                SpectralState::from_parts(file.p, file.q)
            }
        };
        if !state.is_finite() {
            bail!("initial state has non-finite entries");
        }
        Ok(state)
    }
}

//! On-disk artifact formats: JSON reports, the binary transform dump, and
//! CSV traces. All writers are deterministic: field order is fixed, floats
//! use the shortest round-trip form, lines end with LF.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use rapidstab_core::moment::ModeTable;
use rapidstab_core::sim::SimulationTrace;
use rapidstab_core::stabilizer::{FeedbackGains, TransformOperator};

pub const TRANSFORM_MAGIC: &[u8; 8] = b"RSTABT01";

#[derive(Debug, Serialize, Deserialize)]
pub struct GainsFile {
    pub schema_version: u32,
    pub n_modes: usize,
    pub lambda: f64,
    pub mode: String,
    pub lambda_shift: f64,
    pub rotation_omega: f64,
    pub solve_residual: f64,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub m: Vec<f64>,
    pub h: Vec<f64>,
}

impl GainsFile {
    pub fn new(table: &ModeTable, gains: &FeedbackGains, mode: &str) -> Self {
        Self {
            schema_version: 1,
            n_modes: table.n_modes,
            lambda: table.rate,
            mode: mode.to_string(),
            lambda_shift: table.lambda_shift,
            rotation_omega: gains.rotation_omega,
            solve_residual: gains.solve_residual,
            alpha1: gains.alpha1.clone(),
            alpha2: gains.alpha2.clone(),
            beta1: table.beta1.clone(),
            beta2: table.beta2.clone(),
            m: table.m.clone(),
            h: table.h_coeff.clone(),
        }
    }

    pub fn into_gains(self) -> FeedbackGains {
        let n = self.n_modes;
        FeedbackGains {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            a1: vec![0.0; n],
            a2: vec![0.0; n],
            rotation_omega: self.rotation_omega,
            solve_residual: self.solve_residual,
        }
    }

    /// Rebuild the synthesis inputs the file was produced from, so a
    /// simulation run is fully determined by the gains file plus the time
    /// parameters.
    pub fn to_mode_table(&self) -> anyhow::Result<ModeTable> {
        let n = self.n_modes;
        if [&self.alpha1, &self.alpha2, &self.beta1, &self.beta2, &self.m, &self.h]
            .iter()
            .any(|v| v.len() != n)
        {
            anyhow::bail!("gains file arrays disagree with n_modes = {n}");
        }
        let hypothesis = rapidstab_core::moment::check_hypothesis(&self.m)?;
        let lambda: Vec<f64> = (1..=n).map(rapidstab_core::spectral::lambda_k).collect();
        let m_residual = self.m.iter().zip(self.h.iter()).map(|(m, h)| m - h).collect();
        Ok(ModeTable {
            n_modes: n,
            rate: self.lambda,
            lambda_shift: self.lambda_shift,
            lambda,
            m: self.m.clone(),
            m_residual,
            h_coeff: self.h.clone(),
            beta1: self.beta1.clone(),
            beta2: self.beta2.clone(),
            hypothesis,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct FrameBoundsOut {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Serialize)]
pub struct TailsOut {
    pub checkpoints: Vec<usize>,
    pub s_g: Vec<f64>,
    pub s_h: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SynthReport {
    pub schema_version: u32,
    pub n_modes: usize,
    pub lambda: f64,
    pub mode: String,
    pub seed: u64,
    pub hypothesis: HypothesisOut,
    pub frame_x2: FrameBoundsOut,
    pub frame_x3: FrameBoundsOut,
    pub tb_eq_b_residual: f64,
    pub transform_norm: f64,
    pub transform_cond: f64,
    pub tails_x2: TailsOut,
    pub tails_x3: TailsOut,
    pub fredholm_tilde_cond: f64,
    pub fredholm_tail_fraction: f64,
    pub n_coherence: CoherenceOut,
}

#[derive(Debug, Serialize)]
pub struct HypothesisOut {
    pub c_lower: f64,
    pub c_upper: f64,
    pub worst_k: usize,
}

#[derive(Debug, Serialize)]
pub struct CoherenceOut {
    pub compared_n: usize,
    /// Largest relative drift of the low-mode alpha2 gains when the
    /// truncation is halved.
    pub max_rel_change: f64,
    pub warning: bool,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub schema_version: u32,
    pub fitted_rate: f64,
    /// Fitted rate of the confirmation run at dt/2.
    pub fitted_rate_half_dt: f64,
    /// Relative shift between the two fits; above 0.5% means dt is too
    /// coarse for the decay measurement.
    pub rate_shift: f64,
    pub fit_window: (f64, f64),
    pub measured_c: f64,
    pub unstable: bool,
    pub final_norm_h3: f64,
    pub samples: usize,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_gains(path: &Path) -> anyhow::Result<GainsFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading gains file {}", path.display()))?;
    let gains = serde_json::from_str(&text)
        .with_context(|| format!("parsing gains file {}", path.display()))?;
    Ok(gains)
}

/// Binary transform dump: 8-byte magic, u32 N, u32 reserved, then the
/// row-major 2N x 2N matrix entries as little-endian f64.
pub fn write_transform(path: &Path, transform: &TransformOperator) -> anyhow::Result<()> {
    let n = transform.n_modes;
    let mut buf = Vec::with_capacity(16 + 8 * 4 * n * n);
    buf.extend_from_slice(TRANSFORM_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for i in 0..2 * n {
        for j in 0..2 * n {
            buf.extend_from_slice(&transform.matrix[(i, j)].to_le_bytes());
        }
    }
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Trace CSV with the fixed column order t, norm_L2, norm_H3, control_v.
pub fn write_trace_csv(path: &Path, trace: &SimulationTrace) -> anyhow::Result<()> {
    let mut out = String::from("t,norm_L2,norm_H3,control_v\n");
    for i in 0..trace.times.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            trace.times[i], trace.norm_l2[i], trace.norm_h3[i], trace.control[i]
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_csv_rows(path: &Path, header: &str, rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

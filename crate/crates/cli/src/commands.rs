//! Implementations of the five subcommands.

use std::f64::consts::PI;

use anyhow::{bail, Context};

use rapidstab_core::basis;
use rapidstab_core::finite_dim::{self, LtiSystem};
use rapidstab_core::nalgebra::{DMatrix, DVector};
use rapidstab_core::saint_venant as sv;
use rapidstab_core::sim;
use rapidstab_core::spectral::{synthesize, SQRT_2};
use rapidstab_core::stabilizer::{self, Synthesis};
use rapidstab_core::Error as CoreError;

use crate::artifacts::{self, CoherenceOut, FrameBoundsOut, GainsFile, HypothesisOut, TailsOut};
use crate::config::RunConfig;

fn ensure_output_dir(cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))
}

/// Synthesis: gains.json, transform.bin and report.json.
pub fn cmd_synth(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let mu = cfg.build_mu()?;
    let rate = cfg.require_lambda()?;
    let n = cfg.require_n_modes()?;
    let mode = cfg.mode.shift_mode();
    let synth = Synthesis::run(&mu, n, rate, mode)?;

    // Low-mode gain drift against the halved truncation.
    let half = Synthesis::run(&mu, n / 2, rate, mode)?;
    let low = (n / 8).max(1);
    let mut max_rel = 0.0f64;
    for k in 0..low.min(half.table.n_modes) {
        let denom = synth.gains.alpha2[k].abs().max(f64::MIN_POSITIVE);
        max_rel = max_rel.max((synth.gains.alpha2[k] - half.gains.alpha2[k]).abs() / denom);
    }

    let tails2 = basis::closeness_tails(&synth.basis, &synth.table, 2);
    let tails3 = basis::closeness_tails(&synth.basis, &synth.table, 3);
    let (tilde, hs) = stabilizer::fredholm_split(&synth.basis, &synth.gains, &synth.table)?;
    let total: f64 = hs.iter().map(|v| v * v).sum();
    let tail: f64 = (0..2 * n).filter(|j| (j % n) >= n / 2).map(|j| hs[j] * hs[j]).sum();

    let mut gains = synth.gains.clone();
    if synth.table.is_shifted() {
        gains.rotation_omega = synth.table.lambda_shift;
    }
    let gains_file = GainsFile::new(&synth.table, &gains, cfg.mode.as_str());
    artifacts::write_json(&cfg.output_dir.join("gains.json"), &gains_file)?;
    artifacts::write_transform(&cfg.output_dir.join("transform.bin"), &synth.transform)?;

    let report = artifacts::SynthReport {
        schema_version: 1,
        n_modes: n,
        lambda: rate,
        mode: cfg.mode.as_str().to_string(),
        seed: cfg.seed,
        hypothesis: HypothesisOut {
            c_lower: synth.table.hypothesis.c_lower,
            c_upper: synth.table.hypothesis.c_upper,
            worst_k: synth.table.hypothesis.worst_k,
        },
        frame_x2: FrameBoundsOut { sigma_min: synth.frame_x2.0, sigma_max: synth.frame_x2.1 },
        frame_x3: FrameBoundsOut { sigma_min: synth.frame_x3.0, sigma_max: synth.frame_x3.1 },
        tb_eq_b_residual: synth.gains.solve_residual,
        transform_norm: synth.transform.norm,
        transform_cond: synth.transform.cond,
        tails_x2: TailsOut { checkpoints: tails2.checkpoints, s_g: tails2.s_g, s_h: tails2.s_h },
        tails_x3: TailsOut { checkpoints: tails3.checkpoints, s_g: tails3.s_g, s_h: tails3.s_h },
        fredholm_tilde_cond: tilde.cond,
        fredholm_tail_fraction: tail / total,
        n_coherence: CoherenceOut {
            compared_n: n / 2,
            max_rel_change: max_rel,
            warning: max_rel > 0.01,
        },
    };
    artifacts::write_json(&cfg.output_dir.join("report.json"), &report)?;
    Ok(())
}

/// Closed-loop simulation from a gains file: trace.csv plus summary.json.
/// The dynamics is rebuilt from the gains file alone, so a run is fully
/// determined by that file and the time parameters.
pub fn cmd_simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let gains_file = artifacts::read_gains(&cfg.gains_path())?;
    let n = gains_file.n_modes;
    let table = gains_file.to_mode_table()?;
    let gains = gains_file.into_gains();
    let initial = cfg.build_initial(n)?;
    match sim::simulate(&initial, &gains, &table, cfg.dt, cfg.t_final, cfg.sample_every) {
        Ok(trace) => {
            // Convergence confirmation at half the step.
            let half = sim::simulate(
                &initial,
                &gains,
                &table,
                cfg.dt / 2.0,
                cfg.t_final,
                cfg.sample_every * 2,
            )?;
            let rate_shift = if trace.fitted_rate != 0.0 {
                (half.fitted_rate - trace.fitted_rate).abs() / trace.fitted_rate.abs()
            } else {
                0.0
            };
            artifacts::write_trace_csv(&cfg.output_dir.join("trace.csv"), &trace)?;
            let summary = artifacts::SimulateSummary {
                schema_version: 1,
                fitted_rate: trace.fitted_rate,
                fitted_rate_half_dt: half.fitted_rate,
                rate_shift,
                fit_window: trace.fit_window,
                measured_c: trace.measured_c,
                unstable: false,
                final_norm_h3: *trace.norm_h3.last().unwrap_or(&0.0),
                samples: trace.times.len(),
            };
            artifacts::write_json(&cfg.output_dir.join("summary.json"), &summary)?;
            Ok(())
        }
        Err(e @ CoreError::Unstable { .. }) => {
            let summary = artifacts::SimulateSummary {
                schema_version: 1,
                fitted_rate: 0.0,
                fitted_rate_half_dt: 0.0,
                rate_shift: 0.0,
                fit_window: (0.0, 0.0),
                measured_c: 0.0,
                unstable: true,
                final_norm_h3: 0.0,
                samples: 0,
            };
            artifacts::write_json(&cfg.output_dir.join("summary.json"), &summary)?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Kernel reconstruction on a uniform grid, with the boundary and
/// control-direction quadrature checks reported alongside.
pub fn cmd_kernel(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let gains_file = artifacts::read_gains(&cfg.gains_path())?;
    let mu = cfg.build_mu()?;
    let n = gains_file.n_modes;
    let table = gains_file.to_mode_table()?;
    let tensor = basis::kernel_tensors(&table);
    let gains = gains_file.into_gains();

    // Fourier coefficients of the kernels: row k, column n.
    let mut f12 = vec![vec![0.0; n]; n];
    let mut f22 = vec![vec![0.0; n]; n];
    for nn in 0..n {
        for k in 0..n {
            let mk = table.m[k];
            f12[k][nn] = mk
                * (tensor.c12[(nn, k)] * gains.alpha1[nn] + tensor.c11[(nn, k)] * gains.alpha2[nn]);
            f22[k][nn] = mk
                * (tensor.c22[(nn, k)] * gains.alpha1[nn] + tensor.c21[(nn, k)] * gains.alpha2[nn]);
        }
    }
    let g = cfg.kernel_grid;
    let xs: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
    // phi[k][i] = phi_{k+1}(x_i).
    let phi: Vec<Vec<f64>> = (1..=n)
        .map(|k| xs.iter().map(|&x| SQRT_2 * (k as f64 * PI * x).sin()).collect())
        .collect();
    // K(x,y) = phi(x)^T F phi(y), evaluated as two successive mode sums to
    // keep the cost at O(G N (G + N)) instead of O(G^2 N^2).
    let mut k12 = vec![vec![0.0; g]; g];
    let mut k22 = vec![vec![0.0; g]; g];
    {
        // tmp[n][xi] = sum_k F[k][n] phi_k(x_i)
        let mut tmp12 = vec![vec![0.0; g]; n];
        let mut tmp22 = vec![vec![0.0; g]; n];
        for nn in 0..n {
            for xi in 0..g {
                let mut a12 = 0.0;
                let mut a22 = 0.0;
                for k in 0..n {
                    a12 += f12[k][nn] * phi[k][xi];
                    a22 += f22[k][nn] * phi[k][xi];
                }
                tmp12[nn][xi] = a12;
                tmp22[nn][xi] = a22;
            }
        }
        for xi in 0..g {
            for yi in 0..g {
                let mut a12 = 0.0;
                let mut a22 = 0.0;
                for nn in 0..n {
                    a12 += tmp12[nn][xi] * phi[nn][yi];
                    a22 += tmp22[nn][xi] * phi[nn][yi];
                }
                k12[xi][yi] = a12;
                k22[xi][yi] = a22;
            }
        }
    }

    let mut rows = Vec::with_capacity(g * g);
    for xi in 0..g {
        for yi in 0..g {
            rows.push(vec![xs[xi], xs[yi], k12[xi][yi], k22[xi][yi]]);
        }
    }
    artifacts::write_csv_rows(&cfg.output_dir.join("kernel.csv"), "x,y,k12,k22", &rows)?;

    // Boundary sup values (Gibbs-limited, reported only).
    let mut boundary12 = 0.0f64;
    let mut boundary22 = 0.0f64;
    for i in 0..g {
        for &(a, b) in &[(0usize, i), (g - 1, i), (i, 0usize), (i, g - 1)] {
            boundary12 = boundary12.max(k12[a][b].abs());
            boundary22 = boundary22.max(k22[a][b].abs());
        }
    }
    // Control-direction checks by trapezoid quadrature in y:
    // int k12(x,y) (mu phi_1)(y) dy ~ 0 and int k22(x,y)(mu phi_1)(y) dy ~ (mu phi_1)(x).
    let mu_phi: Vec<f64> = xs.iter().map(|&x| mu.eval(x) * SQRT_2 * (PI * x).sin()).collect();
    let dx = 1.0 / (g - 1) as f64;
    let mut resid12 = 0.0f64;
    let mut resid22 = 0.0f64;
    let mut scale = 0.0f64;
    for xi in 0..g {
        let mut i12 = 0.0;
        let mut i22 = 0.0;
        for yi in 0..g {
            let w = if yi == 0 || yi == g - 1 { 0.5 } else { 1.0 };
            i12 += w * dx * k12[xi][yi] * mu_phi[yi];
            i22 += w * dx * k22[xi][yi] * mu_phi[yi];
        }
        // Compare against the truncated control shape: the kernel only
        // carries the first N modes of mu phi_1.
        let target = synthesize(&table.m, xs[xi]);
        resid12 = resid12.max(i12.abs());
        resid22 = resid22.max((i22 - target).abs());
        scale = scale.max(target.abs());
    }

    #[derive(serde::Serialize)]
    struct KernelReport {
        schema_version: u32,
        n_modes: usize,
        grid: usize,
        boundary_sup_k12: f64,
        boundary_sup_k22: f64,
        control_residual_k12: f64,
        control_residual_k22: f64,
        control_scale: f64,
    }
    artifacts::write_json(
        &cfg.output_dir.join("kernel_report.json"),
        &KernelReport {
            schema_version: 1,
            n_modes: n,
            grid: g,
            boundary_sup_k12: boundary12,
            boundary_sup_k22: boundary22,
            control_residual_k12: resid12,
            control_residual_k22: resid22,
            control_scale: scale,
        },
    )?;
    Ok(())
}

/// Matrix pole shifting from the `finite_dim` config section.
pub fn cmd_finite_dim(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let input = cfg.finite_dim.as_ref().context("config needs a `finite_dim` section")?;
    let n = input.b.len();
    if input.a.len() != n || input.a.iter().any(|row| row.len() != n) {
        bail!("finite_dim: A must be {n} x {n} to match b");
    }
    let a = DMatrix::from_fn(n, n, |i, j| input.a[i][j]);
    let b = DVector::from_column_slice(&input.b);
    let sys = LtiSystem::new(a, b, input.lambda)?;
    let pair = finite_dim::pole_shift_transform(&sys)?;
    let report = finite_dim::verify_pole_shift(&sys, &pair);

    #[derive(serde::Serialize)]
    struct FiniteDimReport {
        schema_version: u32,
        n: usize,
        lambda: f64,
        t: Vec<Vec<f64>>,
        k: Vec<f64>,
        imaginary_residue: f64,
        expected_eigenvalues: Vec<(f64, f64)>,
        closed_loop_eigenvalues: Vec<(f64, f64)>,
        eig_mismatch: f64,
        similarity_residual: f64,
        tb_residual: f64,
        t_cond: f64,
    }
    let t_rows: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| pair.t[(i, j)]).collect()).collect();
    artifacts::write_json(
        &cfg.output_dir.join("finite_dim_report.json"),
        &FiniteDimReport {
            schema_version: 1,
            n,
            lambda: input.lambda,
            t: t_rows,
            k: pair.k.iter().cloned().collect(),
            imaginary_residue: pair.imaginary_residue,
            expected_eigenvalues: report.expected.iter().map(|z| (z.re, z.im)).collect(),
            closed_loop_eigenvalues: report.closed_loop.iter().map(|z| (z.re, z.im)).collect(),
            eig_mismatch: report.eig_mismatch,
            similarity_residual: report.similarity_residual,
            tb_residual: report.tb_residual,
            t_cond: report.t_cond,
        },
    )?;
    Ok(())
}

/// Saint-Venant benchmark: energy trace plus the oracle report.
pub fn cmd_saint_venant(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_output_dir(cfg)?;
    let rate = cfg.require_lambda()?;
    let m = cfg.sv_cells;
    let nodes = m + 1;
    let h: Vec<f64> = (0..nodes).map(|j| (PI * j as f64 / m as f64).sin()).collect();
    let v: Vec<f64> = (0..nodes)
        .map(|j| {
            let x = j as f64 / m as f64;
            (1.0 - x) * (2.0 * PI * x).sin()
        })
        .collect();
    let mut grid = sv::RiemannGrid::from_height_velocity(&h, &v, rate)?;
    let steps = (cfg.t_final / grid.dt()).round() as usize;
    let we0 = sv::weighted_energy(&grid);
    let factor = (-2.0 * rate * grid.dt()).exp();
    let mut expect = we0;
    let mut weighted_drift = 0.0f64;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    rows.push(vec![0.0, sv::energy(&grid), sv::feedback_sv(&grid)]);
    times.push(0.0);
    energies.push(sv::energy(&grid));
    for s in 1..=steps {
        grid = sv::step_sv(&grid);
        expect *= factor;
        weighted_drift = weighted_drift.max((sv::weighted_energy(&grid) - expect).abs() / we0);
        let t = s as f64 * grid.dt();
        let e = sv::energy(&grid);
        rows.push(vec![t, e, sv::feedback_sv(&grid)]);
        times.push(t);
        energies.push(e);
    }
    artifacts::write_csv_rows(&cfg.output_dir.join("sv_trace.csv"), "t,energy,u", &rows)?;

    let window = (2.0, cfg.t_final.min(8.0));
    let fitted = sim::fit_decay_rate(&times, &energies, window);
    let modes = 8usize;
    let projected: Vec<f64> = (1..=modes).map(|k| sv::projected_gain(rate, k, m)).collect();
    let exact: Vec<f64> = (1..=modes).map(|k| sv::projected_gain_exact(rate, k)).collect();

    #[derive(serde::Serialize)]
    struct SvReport {
        schema_version: u32,
        cells: usize,
        lambda: f64,
        fitted_energy_rate: f64,
        expected_energy_rate: f64,
        reflection_coefficient: f64,
        weighted_energy_drift: f64,
        projected_gains: Vec<f64>,
        projected_gains_exact: Vec<f64>,
    }
    artifacts::write_json(
        &cfg.output_dir.join("sv_report.json"),
        &SvReport {
            schema_version: 1,
            cells: m,
            lambda: rate,
            fitted_energy_rate: fitted,
            expected_energy_rate: 2.0 * rate,
            reflection_coefficient: sv::reflection_coefficient(rate),
            weighted_energy_drift: weighted_drift,
            projected_gains: projected,
            projected_gains_exact: exact,
        },
    )?;
    Ok(())
}

//! Acceptance suite: every release gate runs here, one pass/fail line per
//! criterion. Run with `cargo test -p rapidstab-core --test acceptance --
//! --nocapture` to watch the lines stream.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rapidstab_core::basis::{self, BasisFamily};
use rapidstab_core::finite_dim::{self, LtiSystem};
use rapidstab_core::moment::{DipolarMoment, ModeTable, ShiftMode};
use rapidstab_core::saint_venant as sv;
use rapidstab_core::sim;
use rapidstab_core::spectral::SpectralState;
use rapidstab_core::stabilizer::{self, Synthesis};

struct Outcome {
    id: usize,
    name: &'static str,
    ok: bool,
    detail: String,
    secs: f64,
}

fn run(id: usize, name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    let secs = start.elapsed().as_secs_f64();
    let line = format!(
        "criterion {id:02} {name:<34} {} ({secs:.2}s) {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    Outcome { id, name, ok, detail, secs }
}

fn benchmark_mu() -> DipolarMoment {
    DipolarMoment::benchmark_x_squared()
}

/// Random controllable system with a simple, well-separated spectrum: an
/// orthogonal conjugation of a block-diagonal normal form (real values and
/// rotation blocks), with the input vector bounded away from every
/// eigendirection. The 1e-8 spectrum-matching bound presumes conditioned
/// eigenproblems, which this generator provides by construction.
fn random_system(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> LtiSystem {
    'outer: loop {
        // Spectrum: real values and complex-conjugate pairs, separated by 0.25.
        let mut reals: Vec<f64> = Vec::new();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        let mut slots = n;
        while slots > 0 {
            if slots >= 2 && rng.gen_bool(0.5) {
                pairs.push((rng.gen_range(-1.5..1.5), rng.gen_range(0.3..1.5)));
                slots -= 2;
            } else {
                reals.push(rng.gen_range(-1.5..1.5));
                slots -= 1;
            }
        }
        let mut all: Vec<(f64, f64)> = reals.iter().map(|&r| (r, 0.0)).collect();
        for &(re, im) in &pairs {
            all.push((re, im));
            all.push((re, -im));
        }
        for i in 0..n {
            for j in 0..n {
                let d = ((all[i].0 - all[j].0).powi(2) + (all[i].1 - all[j].1).powi(2)).sqrt();
                if i != j && d < 0.25 {
                    continue 'outer;
                }
                // Shifted matrices must stay comfortably invertible.
                let ds =
                    ((all[i].0 + rate - all[j].0).powi(2) + (all[i].1 - all[j].1).powi(2)).sqrt();
                if ds < 0.1 {
                    continue 'outer;
                }
            }
        }
        let mut d = DMatrix::zeros(n, n);
        let mut idx = 0;
        for &r in &reals {
            d[(idx, idx)] = r;
            idx += 1;
        }
        for &(re, im) in &pairs {
            d[(idx, idx)] = re;
            d[(idx, idx + 1)] = im;
            d[(idx + 1, idx)] = -im;
            d[(idx + 1, idx + 1)] = re;
            idx += 2;
        }
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = g.qr().q();
        let a = &q * d * q.transpose();
        // Input with every normal-form coordinate bounded below.
        let w = DVector::from_fn(n, |_, _| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.gen_range(0.3..1.0)
        });
        let b = &q * w;
        if let Ok(sys) = LtiSystem::new(a, b, rate) {
            return sys;
        }
    }
}

fn criterion_1_pole_placement() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_eig = 0.0f64;
    let mut worst_resid = 0.0f64;
    let mut worst_imag = 0.0f64;
    for trial in 0..50 {
        let n = rng.gen_range(1..=8);
        let rate = [0.5, 1.0, 2.0][trial % 3];
        let sys = random_system(&mut rng, n, rate);
        let pair = finite_dim::pole_shift_transform(&sys)
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let report = finite_dim::verify_pole_shift(&sys, &pair);
        let scale = pair.t.amax().max(pair.k.amax()).max(1.0);
        worst_eig = worst_eig.max(report.eig_mismatch);
        worst_resid = worst_resid.max(report.similarity_residual).max(report.tb_residual);
        worst_imag = worst_imag.max(pair.imaginary_residue / scale);
        if report.t_sigma_min <= 0.0 {
            return Err(format!("trial {trial}: transform singular"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "eig {worst_eig:.2e} resid {worst_resid:.2e} imag {worst_imag:.2e}"
    );
    if worst_eig > 1e-8 {
        return Err(format!("eigenvalue mismatch above 1e-8: {detail}"));
    }
    if worst_resid > 1e-10 {
        return Err(format!("relation residual above 1e-10: {detail}"));
    }
    if worst_imag > 1e-12 {
        return Err(format!("imaginary residue above 1e-12: {detail}"));
    }
    if secs > 5.0 {
        return Err(format!("runtime {secs:.2}s over 5s budget"));
    }
    Ok(detail)
}

fn criterion_2_tb_eq_b() -> Result<String, String> {
    let mu = benchmark_mu();
    let mut detail = String::new();
    for n in [64usize, 128] {
        let start = Instant::now();
        let s = Synthesis::run(&mu, n, 1.0, ShiftMode::Plain).map_err(|e| e.to_string())?;
        if s.gains.solve_residual > 1e-10 {
            return Err(format!("N={n}: solve residual {}", s.gains.solve_residual));
        }
        let b_state = SpectralState::from_parts(vec![0.0; n], s.table.m.clone());
        let out = s.transform.apply_state(&b_state, &s.table);
        let diff = SpectralState::from_parts(
            (0..n).map(|k| out.p[k] - b_state.p[k]).collect(),
            (0..n).map(|k| out.q[k] - b_state.q[k]).collect(),
        );
        let rel = diff.sobolev_norm(3) / b_state.sobolev_norm(3);
        if rel > 1e-8 {
            return Err(format!("N={n}: T fixes control direction only to {rel:.2e}"));
        }
        let secs = start.elapsed().as_secs_f64();
        if n == 128 && secs > 10.0 {
            return Err(format!("N=128 runtime {secs:.2}s over 10s budget"));
        }
        detail = format!(
            "{detail}N={n}: solve {:.1e} op {rel:.1e}  ",
            s.gains.solve_residual
        );
    }
    Ok(detail.trim_end().to_string())
}

fn criterion_3_normalization() -> Result<String, String> {
    let n = 128usize;
    let table = ModeTable::build(&benchmark_mu(), n, 1.0, ShiftMode::Plain)
        .map_err(|e| e.to_string())?;
    let tensor = basis::kernel_tensors(&table);
    let mut worst_diag = 0.0f64;
    for k in 1..=n {
        let g = tensor.c12[(k - 1, k - 1)] * table.beta1[k - 1] * table.m[k - 1];
        let h = tensor.d22[(k - 1, k - 1)] * table.beta2[k - 1] * table.m[k - 1];
        let lam = table.lambda[k - 1];
        worst_diag = worst_diag
            .max((g - 1.0 / lam).abs())
            .max((h - 1.0 / lam).abs())
            .max((g * lam - 1.0).abs())
            .max((h * lam - 1.0).abs());
    }
    if worst_diag > 1e-12 {
        return Err(format!("diagonal normalization off by {worst_diag:.2e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_solve = 0.0f64;
    for _ in 0..100 {
        let nn = rng.gen_range(1..=n);
        let kk = rng.gen_range(1..=n);
        let a = basis::mode_coupling_matrix(&table, nn, kk);
        let scale = table.beta1[nn - 1] * table.m[kk - 1];
        let v = nalgebra::Vector4::new(
            tensor.c11[(nn - 1, kk - 1)],
            tensor.c12[(nn - 1, kk - 1)],
            tensor.c21[(nn - 1, kk - 1)],
            tensor.c22[(nn - 1, kk - 1)],
        ) * scale;
        let rhs = nalgebra::Vector4::new(scale, 0.0, 0.0, 0.0);
        let resid = (a * v - rhs).norm() / scale.abs();
        worst_solve = worst_solve.max(resid);
    }
    if worst_solve > 1e-10 {
        return Err(format!("4x4 consistency residual {worst_solve:.2e}"));
    }
    Ok(format!("diag {worst_diag:.1e} 4x4 {worst_solve:.1e}"))
}

fn criterion_4_closeness_tails() -> Result<String, String> {
    let n = 128usize;
    let table = ModeTable::build(&benchmark_mu(), n, 1.0, ShiftMode::Plain)
        .map_err(|e| e.to_string())?;
    let family = BasisFamily::assemble(&table).map_err(|e| e.to_string())?;
    let mut detail = String::new();
    for s in [2u32, 3] {
        let rep = basis::closeness_tails(&family, &table, s);
        if !rep.s_g.windows(2).all(|w| w[1] >= w[0]) || !rep.s_h.windows(2).all(|w| w[1] >= w[0]) {
            return Err(format!("s={s}: partial sums not monotone"));
        }
        let (g_ratio, h_ratio) = (rep.g_increment_ratio(), rep.h_increment_ratio());
        if g_ratio > 0.2 || h_ratio > 0.2 {
            return Err(format!("s={s}: increments g {g_ratio:.3} h {h_ratio:.3} above 0.2"));
        }
        detail = format!("{detail}s={s}: g {g_ratio:.3} h {h_ratio:.3}  ");
    }
    Ok(detail.trim_end().to_string())
}

fn criterion_5_closed_loop_decay() -> Result<String, String> {
    let mu = benchmark_mu();
    let mut detail = String::new();
    for rate in [0.5f64, 1.0, 2.0] {
        let start = Instant::now();
        let s = Synthesis::run(&mu, 32, rate, ShiftMode::Plain).map_err(|e| e.to_string())?;
        let initial = SpectralState::unit_q(32, 2);
        let t_final = 6.0 / rate;
        let trace = sim::simulate(&initial, &s.gains, &s.table, 1e-3, t_final, 20)
            .map_err(|e| e.to_string())?;
        let rel = (trace.fitted_rate - rate).abs() / rate;
        if rel > 0.05 {
            return Err(format!("rate {rate}: fitted {:.4} off by {rel:.3}", trace.fitted_rate));
        }
        if trace.measured_c > 1.1 * s.transform.cond {
            return Err(format!(
                "rate {rate}: measured C {:.3} above 1.1 cond {:.3}",
                trace.measured_c, s.transform.cond
            ));
        }
        let half = sim::simulate(&initial, &s.gains, &s.table, 5e-4, t_final, 40)
            .map_err(|e| e.to_string())?;
        let shift = (half.fitted_rate - trace.fitted_rate).abs() / trace.fitted_rate;
        if shift > 0.005 {
            return Err(format!("rate {rate}: dt halving moved the fit by {shift:.4}"));
        }
        let secs = start.elapsed().as_secs_f64();
        if secs > 30.0 {
            return Err(format!("rate {rate}: runtime {secs:.1}s over 30s budget"));
        }
        detail = format!("{detail}λ={rate}: fit {:.3} C {:.2}  ", trace.fitted_rate, trace.measured_c);
    }
    Ok(detail.trim_end().to_string())
}

fn criterion_6_target_exactness() -> Result<String, String> {
    let table = ModeTable::build(&benchmark_mu(), 16, 1.0, ShiftMode::Plain)
        .map_err(|e| e.to_string())?;
    let (rate, dt) = (1.0, 1e-3);
    let factor = (1.0 - rate * dt / 2.0) / (1.0 + rate * dt / 2.0);
    let mut state = SpectralState::from_parts(
        (0..16).map(|k| (k as f64 + 0.4).sin()).collect(),
        (0..16).map(|k| (1.7 * k as f64).cos()).collect(),
    );
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let before = state.sobolev_norm(3);
        state = sim::step_target(&state, rate, &table, dt);
        worst = worst.max((state.sobolev_norm(3) / before - factor).abs());
    }
    if worst > 1e-12 {
        return Err(format!("contraction factor off by {worst:.2e}"));
    }
    // Open loop: 1e4 steps conserve the norms to 1e-10.
    let gains = stabilizer::FeedbackGains::zero(16);
    let stepper = sim::ClosedLoopStepper::new(&gains, &table, dt).map_err(|e| e.to_string())?;
    let mut open = SpectralState::from_parts(
        (0..16).map(|k| 1.0 / (k + 1) as f64).collect(),
        (0..16).map(|k| 0.4 / ((k + 1) as f64).powi(2)).collect(),
    );
    let h0 = open.sobolev_norm(3);
    for _ in 0..10_000 {
        open = stepper.step(&open);
    }
    let drift = (open.sobolev_norm(3) - h0).abs() / h0;
    if drift > 1e-10 {
        return Err(format!("open-loop norm drift {drift:.2e}"));
    }
    Ok(format!("contraction {worst:.1e} drift {drift:.1e}"))
}

fn criterion_7_operator_equality() -> Result<String, String> {
    // The truncated identity is exact up to the TB=B solve residual (the
    // tensor row relations close termwise), so the measured residuals sit at
    // rounding level for every N; accept monotone decrease or the floor.
    let floor = 1e-12;
    let mut resids = Vec::new();
    for n in [64usize, 128, 256] {
        let s = Synthesis::run(&benchmark_mu(), n, 1.0, ShiftMode::Plain)
            .map_err(|e| e.to_string())?;
        let mut state = SpectralState::zero(n);
        for k in 0..16 {
            state.p[k] = 1.0 / ((k + 1) as f64);
            state.q[k] = 0.3 / ((k + 1) as f64).powi(2);
        }
        resids.push(stabilizer::operator_equality_residual(
            &s.transform,
            &s.gains,
            &s.table,
            &state,
            false,
        ));
    }
    let detail = format!("residuals {:.2e} {:.2e} {:.2e}", resids[0], resids[1], resids[2]);
    for w in resids.windows(2) {
        if w[1] > w[0] && w[1] > floor {
            return Err(format!("{detail}: not decreasing and above floor {floor:.0e}"));
        }
    }
    Ok(detail)
}

fn criterion_8_eigenvalue_placement() -> Result<String, String> {
    let rate = 1.0;
    let floor = 1e-4 * rate;
    let mut deviations = Vec::new();
    for n in [128usize, 256] {
        let s = Synthesis::run(&benchmark_mu(), n, rate, ShiftMode::Plain)
            .map_err(|e| e.to_string())?;
        let spectrum = stabilizer::closed_loop_spectrum_by_frequency(&s.gains, &s.table);
        let pairs = n / 4;
        let mut worst = 0.0f64;
        for &(_, re) in spectrum.iter().take(pairs) {
            worst = worst.max((re + rate).abs());
        }
        if worst > 0.1 * rate {
            return Err(format!("N={n}: real part deviation {worst:.3e} above 10%"));
        }
        // Common comparison set: the lowest 32 pairs.
        let mut common = 0.0f64;
        for &(_, re) in spectrum.iter().take(32) {
            common = common.max((re + rate).abs());
        }
        deviations.push(common);
    }
    let detail = format!("lowest-32 deviation {:.2e} -> {:.2e}", deviations[0], deviations[1]);
    if deviations[1] > deviations[0] && deviations[1] > floor {
        return Err(format!("{detail}: grew above floor {floor:.0e}"));
    }
    Ok(detail)
}

fn criterion_9_fredholm_split() -> Result<String, String> {
    let mut fractions = Vec::new();
    for n in [64usize, 128] {
        let s = Synthesis::run(&benchmark_mu(), n, 1.0, ShiftMode::Plain)
            .map_err(|e| e.to_string())?;
        let (tilde, hs) = stabilizer::fredholm_split(&s.basis, &s.gains, &s.table)
            .map_err(|e| e.to_string())?;
        if !tilde.cond.is_finite() {
            return Err(format!("N={n}: comparison operator not invertible"));
        }
        let total: f64 = hs.iter().map(|v| v * v).sum();
        let tail: f64 = (0..2 * n)
            .filter(|j| (j % n) >= n / 2)
            .map(|j| hs[j] * hs[j])
            .sum();
        fractions.push(tail / total);
    }
    let detail = format!("tail fraction {:.2e} -> {:.2e}", fractions[0], fractions[1]);
    if fractions[1] > 0.3 {
        return Err(format!("{detail}: above 30% at N=128"));
    }
    if fractions[1] >= fractions[0] {
        return Err(format!("{detail}: not decreasing with N"));
    }
    Ok(detail)
}

fn criterion_10_saint_venant() -> Result<String, String> {
    let start = Instant::now();
    let rate = 0.5;
    let m = 400usize;
    let nodes = m + 1;
    let h: Vec<f64> = (0..nodes).map(|j| (PI * j as f64 / m as f64).sin()).collect();
    let v: Vec<f64> = (0..nodes)
        .map(|j| {
            let x = j as f64 / m as f64;
            (1.0 - x) * (2.0 * PI * x).sin()
        })
        .collect();
    let mut grid = sv::RiemannGrid::from_height_velocity(&h, &v, rate)
        .map_err(|e| e.to_string())?;
    let e0 = sv::weighted_energy(&grid);
    let factor = (-2.0 * rate * grid.dt()).exp();
    let mut expect = e0;
    let mut worst = 0.0f64;
    for _ in 0..3 * m {
        grid = sv::step_sv(&grid);
        expect *= factor;
        worst = worst.max((sv::weighted_energy(&grid) - expect).abs() / e0);
    }
    if worst > 1e-10 {
        return Err(format!("weighted energy drift {worst:.2e}"));
    }
    let refl = (sv::reflection_coefficient(rate) + (-2.0 * rate).exp()).abs();
    if refl > 1e-12 {
        return Err(format!("reflection coefficient off by {refl:.2e}"));
    }
    let mut gain_err_prev = f64::INFINITY;
    let mut gain_detail = 0.0f64;
    for cells in [200usize, 400, 800] {
        let mut worst_gain = 0.0f64;
        for mode in 1..=8 {
            let err = (sv::projected_gain(rate, mode, cells)
                - sv::projected_gain_exact(rate, mode))
            .abs();
            worst_gain = worst_gain.max(err);
        }
        if worst_gain > gain_err_prev {
            return Err(format!("projected-gain error grew at M={cells}: {worst_gain:.2e}"));
        }
        gain_err_prev = worst_gain;
        gain_detail = worst_gain;
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 5.0 {
        return Err(format!("runtime {secs:.2}s over 5s budget"));
    }
    Ok(format!("energy {worst:.1e} gains {gain_detail:.1e}"))
}

fn criterion_11_gain_regularity() -> Result<String, String> {
    let n = 128usize;
    let s = Synthesis::run(&benchmark_mu(), n, 1.0, ShiftMode::Plain).map_err(|e| e.to_string())?;
    let tilde = stabilizer::tilde_gains(&s.table);
    let cubed = |v: f64, i: usize| v.abs() / ((i + 1) as f64).powi(3);
    let a1: Vec<f64> = s.gains.alpha1.iter().enumerate().map(|(i, &v)| cubed(v, i)).collect();
    let hat2: Vec<f64> = (0..n)
        .map(|i| cubed(s.gains.alpha2[i] - tilde.alpha2[i], i))
        .collect();
    let raw2: Vec<f64> = s.gains.alpha2.iter().enumerate().map(|(i, &v)| cubed(v, i)).collect();
    let max_in = |v: &[f64], lo: usize, hi: usize| v[lo..hi].iter().cloned().fold(0.0f64, f64::max);
    if max_in(&a1, 96, 128) >= max_in(&a1, 32, 64) {
        return Err("alpha1/n^3 tail fails to decay".into());
    }
    if max_in(&hat2, 96, 128) >= max_in(&hat2, 32, 64) {
        return Err("corrected alpha2/n^3 tail fails to decay".into());
    }
    let max_all = raw2.iter().cloned().fold(0.0f64, f64::max);
    let top_min = raw2[64..].iter().cloned().fold(f64::INFINITY, f64::min);
    if top_min <= 0.25 * max_all {
        return Err(format!(
            "raw alpha2/n^3 floor violated: top-half min {top_min:.3e} vs max {max_all:.3e}"
        ));
    }
    Ok(format!(
        "a1 tail {:.2e}<{:.2e}, floor {:.2}",
        max_in(&a1, 96, 128),
        max_in(&a1, 32, 64),
        top_min / max_all
    ))
}

fn criterion_12_rotating_equivalence() -> Result<String, String> {
    let rate = 1.0;
    let n = 16usize;
    let s = Synthesis::run(&benchmark_mu(), n, rate, ShiftMode::Shifted)
        .map_err(|e| e.to_string())?;
    let initial = SpectralState::unit_q(n, 2);
    // Independent discretizations differ at O(dt^2); this dt puts the
    // measured mismatch under 1e-8 with margin (constant ~2e2 at this size).
    let dt = 4e-6f64;
    let t_final = 6.0;
    let every = (0.01 / dt).round() as usize;
    let st = sim::simulate(&initial, &s.gains, &s.table, dt, t_final, every)
        .map_err(|e| e.to_string())?;
    let rot_gains = s.gains.clone().with_rotation(s.table.lambda_shift);
    let rot = sim::simulate_rotating(&initial, &rot_gains, &s.table, dt, t_final, every)
        .map_err(|e| e.to_string())?;
    let mut mismatch = 0.0f64;
    for (a, b) in st.norm_h3.iter().zip(rot.norm_h3.iter()) {
        mismatch = mismatch.max((a - b).abs());
    }
    mismatch /= st.norm_h3[0];
    if mismatch > 1e-8 {
        return Err(format!("norm traces differ by {mismatch:.2e}"));
    }
    let rel = (rot.fitted_rate - rate).abs() / rate;
    if rel > 0.05 {
        return Err(format!("rotating fit {:.4} off by {rel:.3}", rot.fitted_rate));
    }
    Ok(format!("mismatch {mismatch:.1e} fit {:.3}", rot.fitted_rate))
}

#[test]
fn acceptance() {
    let outcomes = vec![
        run(1, "finite-dim pole placement", criterion_1_pole_placement),
        run(2, "TB=B residuals", criterion_2_tb_eq_b),
        run(3, "normalization identities", criterion_3_normalization),
        run(4, "quadratic-closeness tails", criterion_4_closeness_tails),
        run(5, "closed-loop decay", criterion_5_closed_loop_decay),
        run(6, "target-system exactness", criterion_6_target_exactness),
        run(7, "operator equality", criterion_7_operator_equality),
        run(8, "eigenvalue placement", criterion_8_eigenvalue_placement),
        run(9, "Fredholm split", criterion_9_fredholm_split),
        run(10, "Saint-Venant oracle", criterion_10_saint_venant),
        run(11, "feedback regularity split", criterion_11_gain_regularity),
        run(12, "rotating-feedback equivalence", criterion_12_rotating_equivalence),
    ];
    let failures: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.ok)
        .map(|o| format!("criterion {:02} {}: {}", o.id, o.name, o.detail))
        .collect();
    let total: f64 = outcomes.iter().map(|o| o.secs).sum();
    println!("acceptance total {total:.1}s");
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

//! Shared fixtures for the criterion benchmarks.

use rapidstab_core::moment::{DipolarMoment, ModeTable, ShiftMode};
use rapidstab_core::stabilizer::Synthesis;

/// The standard benchmark moment mu(x) = x^2.
pub fn benchmark_mu() -> DipolarMoment {
    DipolarMoment::benchmark_x_squared()
}

pub fn benchmark_table(n_modes: usize, rate: f64) -> ModeTable {
    ModeTable::build(&benchmark_mu(), n_modes, rate, ShiftMode::Plain)
        .expect("benchmark moment satisfies the sweep")
}

pub fn benchmark_synthesis(n_modes: usize, rate: f64) -> Synthesis {
    Synthesis::run(&benchmark_mu(), n_modes, rate, ShiftMode::Plain)
        .expect("benchmark synthesis succeeds")
}

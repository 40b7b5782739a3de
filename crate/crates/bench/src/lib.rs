//! Seeded inputs shared by the criterion benches.

use risfa_core::protocols::{add_awgn, synthesize};
use risfa_core::rng::{complex_gaussian_matrix, rng_from_seed};
use risfa_core::{CMatrix, ObservationTensor, Scenario, SystemConfig};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> CMatrix {
    complex_gaussian_matrix(rows, cols, 1.0, &mut rng_from_seed(seed))
}

/// A generated scenario and its observation at `snr_db`.
pub fn observed(cfg: &SystemConfig, snr_db: f64, seed: u64) -> (Scenario, ObservationTensor) {
    let mut rng = rng_from_seed(seed);
    let sc = Scenario::generate(cfg, &mut rng).expect("valid config");
    let (h, g, x) = (&sc.channels.h, &sc.channels.g, &sc.symbols.x);
    let clean = synthesize(cfg.protocol, h, g, &sc.schedule, x).expect("consistent shapes");
    let y = add_awgn(cfg.protocol, &clean, snr_db, &mut rng).expect("finite SNR");
    (sc, y)
}

/// The small configurations used throughout the acceptance runs.
pub fn p1_small() -> SystemConfig {
    SystemConfig::p1(4, 6, 4, 2, 4, 4, 20)
}

pub fn p2_small() -> SystemConfig {
    SystemConfig::p2(4, 6, 4, 2, 8, 20)
}

//! Ground-truth channels, schedules and symbol payloads.

use rand::seq::index::sample;
use rand::Rng;

use crate::config::{PhaseDesign, Protocol, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ONE, ZERO};
use crate::modulation::Modulation;
use crate::rng::{complex_gaussian_matrix, unit_phase};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// RIS-to-BS channel, N × N_r.
    pub h: CMatrix,
    /// User-to-RIS channel, N_r × K.
    pub g: CMatrix,
}

/// Side information known at the base station: port selections, RIS phases
/// and temporal coding.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// One M × N binary selection matrix per block.
    pub selections: Vec<CMatrix>,
    /// I × N_r unit-modulus RIS phases.
    pub theta: CMatrix,
    /// P × K (protocol P1) or I × K (protocol P2) coding matrix.
    pub coding: CMatrix,
}

impl Schedule {
    pub fn blocks(&self) -> usize {
        self.selections.len()
    }

    /// Checks the structural invariants: each selection has exactly one 1
    /// per row and at most one per column, phases are unit modulus, and no
    /// coding row is zero.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.selections.iter().enumerate() {
            if !is_selection(s) {
                return Err(Error::Degenerate(format!(
                    "selection matrix {i} is not a valid port selection"
                )));
            }
        }
        if self.theta.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Degenerate("RIS phases must be unit modulus".into()));
        }
        if self
            .coding
            .row_iter()
            .any(|r| r.iter().all(|z| *z == ZERO))
        {
            return Err(Error::Degenerate("coding matrix has a zero row".into()));
        }
        Ok(())
    }

    /// Checks that the schedule fits `(M, N, N_r, K)` and the protocol.
    pub(crate) fn check_shapes(
        &self,
        protocol: Protocol,
        h: &CMatrix,
        g: &CMatrix,
        x: &CMatrix,
    ) -> Result<()> {
        let op = "schedule";
        let (n, nr) = h.shape();
        let k = g.ncols();
        if g.nrows() != nr {
            return Err(Error::dim(op, format!("G has {} rows, expected {nr}", g.nrows())));
        }
        if x.nrows() != k {
            return Err(Error::dim(op, format!("X has {} rows, expected {k}", x.nrows())));
        }
        let blocks = self.blocks();
        if blocks == 0 {
            return Err(Error::dim(op, "no selection matrices"));
        }
        let m = self.selections[0].nrows();
        if let Some(s) = self.selections.iter().find(|s| s.shape() != (m, n)) {
            return Err(Error::dim(op, format!("selection is {:?}, expected {:?}", s.shape(), (m, n))));
        }
        if self.theta.shape() != (blocks, nr) {
            return Err(Error::dim(
                op,
                format!("theta is {:?}, expected {:?}", self.theta.shape(), (blocks, nr)),
            ));
        }
        if self.coding.ncols() != k {
            return Err(Error::dim(op, format!("coding has {} columns, expected {k}", self.coding.ncols())));
        }
        if protocol == Protocol::P2 && self.coding.nrows() != blocks {
            return Err(Error::dim(
                op,
                format!("protocol P2 coding needs {blocks} rows, got {}", self.coding.nrows()),
            ));
        }
        Ok(())
    }
}

pub(crate) fn is_selection(s: &CMatrix) -> bool {
    let binary = s.iter().all(|&z| z == ZERO || z == ONE);
    let rows_ok = s
        .row_iter()
        .all(|r| r.iter().filter(|&&z| z == ONE).count() == 1);
    let cols_ok = s
        .column_iter()
        .all(|c| c.iter().filter(|&&z| z == ONE).count() <= 1);
    binary && rows_ok && cols_ok
}

/// Transmitted symbols with the bit labels that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    /// K × T constellation points; column 0 is the pilot.
    pub x: CMatrix,
    /// Bit label of every entry, column-major.
    pub labels: Vec<u32>,
    pub modulation: Modulation,
}

impl SymbolMatrix {
    pub fn from_labels(
        users: usize,
        symbols: usize,
        labels: Vec<u32>,
        modulation: Modulation,
    ) -> Result<Self> {
        if labels.len() != users * symbols {
            return Err(Error::dim("SymbolMatrix", "label count must equal K·T"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= modulation.order()) {
            return Err(Error::Degenerate(format!("label {l} outside {modulation:?}")));
        }
        let pts: Vec<C64> = labels.iter().map(|&l| modulation.point(l)).collect();
        Ok(Self {
            x: CMatrix::from_column_slice(users, symbols, &pts),
            labels,
            modulation,
        })
    }

    pub fn label(&self, user: usize, t: usize) -> u32 {
        self.labels[t * self.x.nrows() + user]
    }

    pub fn pilot(&self) -> CMatrix {
        self.x.columns(0, 1).into_owned()
    }
}

/// Everything a trial needs to synthesize observations.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub channels: ChannelSet,
    pub schedule: Schedule,
    pub symbols: SymbolMatrix,
}

impl Scenario {
    /// Draws channels, selections, phases, coding and symbols in that order.
    pub fn generate<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let channels = gen_channels(cfg, rng);
        let selections = gen_selections(cfg, rng)?;
        let theta = gen_theta(cfg, rng);
        let coding = gen_coding(cfg, rng);
        let symbols = gen_symbols(cfg, rng);
        Ok(Self {
            channels,
            schedule: Schedule {
                selections,
                theta,
                coding,
            },
            symbols,
        })
    }
}

/// i.i.d. CN(0, 1) Rayleigh channels; H is drawn before G.
pub fn gen_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelSet {
    let h = complex_gaussian_matrix(cfg.ports, cfg.ris_elements, 1.0, rng);
    let g = complex_gaussian_matrix(cfg.ris_elements, cfg.users, 1.0, rng);
    ChannelSet { h, g }
}

/// Independent per-block port selections: M of the N ports drawn uniformly
/// without replacement, row m connected to the m-th drawn port.
pub fn gen_selections<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Vec<CMatrix>> {
    let (m, n) = (cfg.active_antennas, cfg.ports);
    if m > n {
        return Err(Error::field(
            "system.active_antennas, system.ports",
            format!("active_antennas (M={m}) must not exceed ports (N={n})"),
        ));
    }
    Ok((0..cfg.blocks)
        .map(|_| {
            let mut s = CMatrix::zeros(m, n);
            for (row, port) in sample(rng, n, m).into_iter().enumerate() {
                s[(row, port)] = ONE;
            }
            s
        })
        .collect())
}

/// First `cols` columns of the `n`-point DFT matrix, `F[r, c] = exp(-2πj·r·c/n)`.
pub fn dft_columns(n: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(n, cols, |r, c| {
        let phase = -std::f64::consts::TAU * ((r * c) % n) as f64 / n as f64;
        C64::from_polar(1.0, phase)
    })
}

fn random_phases<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let data: Vec<C64> = (0..rows * cols).map(|_| unit_phase(rng)).collect();
    CMatrix::from_column_slice(rows, cols, &data)
}

/// I × N_r RIS phase matrix. DFT design needs I ≥ N_r; shorter frames use
/// random phases.
pub fn gen_theta<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CMatrix {
    let (i, nr) = (cfg.blocks, cfg.ris_elements);
    match cfg.theta_design {
        PhaseDesign::Dft if i >= nr => dft_columns(i, nr),
        _ => random_phases(i, nr, rng),
    }
}

/// Temporal coding matrix: P × K for P1, I × K for P2. DFT design consumes
/// no randomness; it falls back to random phases when there are fewer rows
/// than users.
pub fn gen_coding<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CMatrix {
    let rows = cfg.coding_rows();
    let k = cfg.users;
    match cfg.coding_design {
        PhaseDesign::Dft if rows >= k => dft_columns(rows, k),
        _ => random_phases(rows, k, rng),
    }
}

/// Uniform i.i.d. labels mapped onto the configured constellation.
pub fn gen_symbols<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> SymbolMatrix {
    let order = cfg.modulation.order();
    let labels: Vec<u32> = (0..cfg.users * cfg.symbols)
        .map(|_| rng.random_range(0..order))
        .collect();
    SymbolMatrix::from_labels(cfg.users, cfg.symbols, labels, cfg.modulation)
        .expect("labels drawn within constellation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn small() -> SystemConfig {
        SystemConfig::p1(3, 5, 4, 2, 6, 4, 10)
    }

    #[test]
    fn channels_are_reproducible() {
        let a = gen_channels(&small(), &mut rng_from_seed(42));
        let b = gen_channels(&small(), &mut rng_from_seed(42));
        assert_eq!(a, b);
        assert_eq!(a.h.shape(), (5, 4));
        assert_eq!(a.g.shape(), (4, 2));
    }

    #[test]
    fn channel_entries_are_standard_complex_gaussian() {
        let mut cfg = small();
        cfg.ports = 1000;
        cfg.ris_elements = 100;
        let ch = gen_channels(&cfg, &mut rng_from_seed(3));
        let n = ch.h.len() as f64;
        let mean: C64 = ch.h.iter().sum::<C64>() / n;
        let var = ch.h.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn full_selection_is_a_permutation() {
        let mut cfg = small();
        cfg.active_antennas = 5;
        for s in gen_selections(&cfg, &mut rng_from_seed(1)).unwrap() {
            assert!(is_selection(&s));
            assert_eq!(s.nrows(), 5);
            assert!(s.column_iter().all(|c| c.iter().filter(|&&z| z == ONE).count() == 1));
        }
    }

    #[test]
    fn single_antenna_selection_is_one_hot() {
        let mut cfg = small();
        cfg.active_antennas = 1;
        cfg.ports = 3;
        for s in gen_selections(&cfg, &mut rng_from_seed(2)).unwrap() {
            assert_eq!(s.shape(), (1, 3));
            assert_eq!(s.iter().filter(|&&z| z == ONE).count(), 1);
        }
    }

    #[test]
    fn selections_are_row_orthonormal() {
        let sel = gen_selections(&small(), &mut rng_from_seed(5)).unwrap();
        for s in sel {
            assert_eq!(&s * s.adjoint(), CMatrix::identity(3, 3));
        }
    }

    #[test]
    fn too_many_active_antennas_is_rejected() {
        let mut cfg = small();
        cfg.active_antennas = 6;
        assert!(matches!(
            gen_selections(&cfg, &mut rng_from_seed(0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dft_theta_has_orthogonal_columns() {
        let mut cfg = small();
        cfg.blocks = 4;
        let theta = gen_theta(&cfg, &mut rng_from_seed(0));
        let gram = theta.adjoint() * &theta;
        let expected = CMatrix::identity(4, 4) * C64::new(4.0, 0.0);
        assert!((gram - expected).norm() < 1e-12);
        assert!(theta.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn random_theta_is_unit_modulus_and_seeded() {
        let mut cfg = small();
        cfg.theta_design = PhaseDesign::Random;
        let a = gen_theta(&cfg, &mut rng_from_seed(9));
        let b = gen_theta(&cfg, &mut rng_from_seed(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn short_frame_theta_falls_back_to_random() {
        let mut cfg = small();
        cfg.blocks = 2;
        let theta = gen_theta(&cfg, &mut rng_from_seed(0));
        assert_eq!(theta.shape(), (2, 4));
        assert!(theta.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn square_dft_coding_is_scaled_unitary() {
        let cfg = SystemConfig::p1(2, 3, 2, 3, 2, 3, 4);
        let c = gen_coding(&cfg, &mut rng_from_seed(0));
        let gram = c.adjoint() * &c;
        assert!((gram - CMatrix::identity(3, 3) * C64::new(3.0, 0.0)).norm() < 1e-12);
        assert_eq!(c, gen_coding(&cfg, &mut rng_from_seed(99)));
    }

    #[test]
    fn coding_rows_follow_protocol() {
        let p2 = SystemConfig::p2(2, 3, 2, 2, 7, 4);
        assert_eq!(gen_coding(&p2, &mut rng_from_seed(0)).shape(), (7, 2));
    }

    #[test]
    fn qpsk_symbols_have_unit_magnitude() {
        let sym = gen_symbols(&small(), &mut rng_from_seed(4));
        assert_eq!(sym.x.shape(), (2, 10));
        assert!(sym.x.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        for t in 0..10 {
            for k in 0..2 {
                assert_eq!(Modulation::Qpsk.decide(sym.x[(k, t)]), sym.label(k, t));
            }
        }
    }

    #[test]
    fn symbol_frequencies_are_uniform() {
        let mut cfg = small();
        cfg.users = 1;
        cfg.symbols = 100_000;
        let sym = gen_symbols(&cfg, &mut rng_from_seed(11));
        let mut counts = [0usize; 4];
        for &l in &sym.labels {
            counts[l as usize] += 1;
        }
        let n = 100_000.0;
        let expected = n / 4.0;
        let sigma = (n * 0.25 * 0.75f64).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn generated_schedules_satisfy_invariants() {
        for seed in 0..100u64 {
            let mut rng = rng_from_seed(seed);
            let m = 1 + (seed as usize % 4);
            let n = m + (seed as usize % 3);
            let mut cfg = SystemConfig::p1(m, n, 2 + seed as usize % 5, 1 + seed as usize % 3, 1 + seed as usize % 6, 1 + seed as usize % 4, 3);
            if seed % 2 == 1 {
                cfg.protocol = Protocol::P2;
                cfg.theta_design = PhaseDesign::Random;
            }
            let sc = Scenario::generate(&cfg, &mut rng).unwrap();
            sc.schedule.validate().unwrap();
            for s in &sc.schedule.selections {
                assert_eq!(s * s.adjoint(), CMatrix::identity(m, m));
            }
        }
    }

    #[test]
    fn generation_is_pure_in_seed() {
        let cfg = small();
        let a = Scenario::generate(&cfg, &mut rng_from_seed(77)).unwrap();
        let b = Scenario::generate(&cfg, &mut rng_from_seed(77)).unwrap();
        assert_eq!(a.channels, b.channels);
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.symbols, b.symbols);
    }

    #[test]
    fn port_sets_vary_across_blocks() {
        let cfg = small();
        let mut found = false;
        for seed in 0..100u64 {
            let sel = gen_selections(&cfg, &mut rng_from_seed(seed)).unwrap();
            let sets: Vec<Vec<usize>> = sel
                .iter()
                .map(|s| {
                    let mut ports: Vec<usize> = (0..s.ncols())
                        .filter(|&c| s.column(c).iter().any(|&z| z == ONE))
                        .collect();
                    ports.sort();
                    ports
                })
                .collect();
            if sets.iter().any(|p| p != &sets[0]) {
                found = true;
                break;
            }
        }
        assert!(found, "no seed within the retry bound produced distinct port sets");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn schedules_are_valid_for_any_seed(
                m in 1usize..5, extra in 0usize..4, nr in 1usize..7, k in 1usize..4,
                i in 1usize..8, p in 1usize..5, p2 in any::<bool>(), seed in any::<u64>(),
            ) {
                let n = m + extra;
                let cfg = if p2 {
                    let mut c = SystemConfig::p2(m, n, nr, k, i, 3);
                    c.theta_design = PhaseDesign::Random;
                    c
                } else {
                    SystemConfig::p1(m, n, nr, k, i, p, 3)
                };
                let sc = Scenario::generate(&cfg, &mut rng_from_seed(seed)).unwrap();
                prop_assert!(sc.schedule.validate().is_ok());
                prop_assert_eq!(sc.schedule.selections.len(), i);
                for s in &sc.schedule.selections {
                    prop_assert_eq!(s.shape(), (m, n));
                    prop_assert_eq!(s * s.adjoint(), CMatrix::identity(m, m));
                }
                for z in sc.schedule.theta.iter() {
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
                let again = Scenario::generate(&cfg, &mut rng_from_seed(seed)).unwrap();
                prop_assert_eq!(again.schedule, sc.schedule);
            }
        }
    }
}

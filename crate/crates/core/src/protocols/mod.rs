//! Received-signal synthesis for both transmission protocols.
//!
//! Protocol P1 produces an `IM × T × P` tensor whose frontal slice `p`
//! stacks the per-block observations `Y_{i,p} = S_i H D_i(Θ) G D_p(C) X`
//! vertically, block index slowest. Protocol P2 produces an `M × T × I`
//! tensor with frontal slice `Y_i = S_i H D_i(Θ) G D_i(C) X`.

mod format;

pub use format::{read_observation, write_observation, OBSERVATION_MAGIC};

use rand::Rng;

use crate::channel::{ChannelSet, Schedule};
use crate::config::Protocol;
use crate::error::{Error, Result};
use crate::linalg::{hstack, khatri_rao, scale_cols_by_row, vstack, CMatrix, CTensor3};
use crate::rng::complex_gaussian_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    pub protocol: Protocol,
    pub data: CTensor3,
    /// Requested SNR in dB; `+∞` for noiseless data.
    pub snr_db: f64,
    /// Per-entry complex noise variance E|z|² that was added.
    pub noise_variance: f64,
}

impl ObservationTensor {
    pub fn noiseless(protocol: Protocol, data: CTensor3) -> Self {
        Self {
            protocol,
            data,
            snr_db: f64::INFINITY,
            noise_variance: 0.0,
        }
    }
}

/// `Q = [S_1 H D_1(Θ); …; S_I H D_I(Θ)]`, the `IM × N_r` stacked spatial factor.
pub(crate) fn spatial_stack(h: &CMatrix, sched: &Schedule) -> Result<CMatrix> {
    let blocks: Vec<CMatrix> = sched
        .selections
        .iter()
        .enumerate()
        .map(|(i, s)| scale_cols_by_row(&(s * h), &sched.theta, i))
        .collect();
    vstack(&blocks)
}

/// `A_i = S_i H D_i(Θ) G`, the block-`i` effective spatial factor.
pub(crate) fn block_factor(h: &CMatrix, g: &CMatrix, sched: &Schedule, i: usize) -> CMatrix {
    scale_cols_by_row(&(&sched.selections[i] * h), &sched.theta, i) * g
}

/// Noiseless synthesis from explicit factor matrices.
pub fn synthesize(
    protocol: Protocol,
    h: &CMatrix,
    g: &CMatrix,
    sched: &Schedule,
    x: &CMatrix,
) -> Result<CTensor3> {
    sched.check_shapes(protocol, h, g, x)?;
    let slices = match protocol {
        Protocol::P1 => {
            let w = spatial_stack(h, sched)? * g;
            (0..sched.coding.nrows())
                .map(|p| scale_cols_by_row(&w, &sched.coding, p) * x)
                .collect()
        }
        Protocol::P2 => (0..sched.blocks())
            .map(|i| scale_cols_by_row(&block_factor(h, g, sched, i), &sched.coding, i) * x)
            .collect(),
    };
    CTensor3::from_slices(slices)
}

pub fn synth_p1(ch: &ChannelSet, sched: &Schedule, x: &CMatrix) -> Result<CTensor3> {
    synthesize(Protocol::P1, &ch.h, &ch.g, sched, x)
}

pub fn synth_p2(ch: &ChannelSet, sched: &Schedule, x: &CMatrix) -> Result<CTensor3> {
    synthesize(Protocol::P2, &ch.h, &ch.g, sched, x)
}

/// Adds circularly-symmetric Gaussian noise with per-entry variance
/// `(‖clean‖²_F / entries) / 10^(snr_db/10)`. Noise is drawn slice by slice,
/// column-major within each slice. `snr_db = +∞` returns `clean` unchanged.
pub fn add_awgn<R: Rng + ?Sized>(
    protocol: Protocol,
    clean: &CTensor3,
    snr_db: f64,
    rng: &mut R,
) -> Result<ObservationTensor> {
    if snr_db == f64::INFINITY {
        return Ok(ObservationTensor::noiseless(protocol, clean.clone()));
    }
    if !snr_db.is_finite() {
        return Err(Error::Degenerate(format!("unusable SNR {snr_db} dB")));
    }
    let power = clean.fro_norm_sq() / clean.len() as f64;
    if power == 0.0 {
        return Err(Error::Degenerate(
            "cannot calibrate noise against an all-zero signal".into(),
        ));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let mut data = clean.clone();
    for slice in data.slices_mut() {
        let z = complex_gaussian_matrix(slice.nrows(), slice.ncols(), variance, rng);
        *slice += z;
    }
    Ok(ObservationTensor {
        protocol,
        data,
        snr_db,
        noise_variance: variance,
    })
}

/// Mode-3 unfolding of a P1 tensor: `P × IMT`, row `p` is `vec(Ȳ_p)ᵀ`
/// (antenna-row index fastest, then symbol index). For noiseless data it
/// equals `C · (Xᵀ ⋄ W)ᵀ`.
pub fn unfold_mode3_p1(y: &ObservationTensor) -> Result<CMatrix> {
    if y.protocol != Protocol::P1 {
        return Err(Error::Usage("mode-3 unfolding is defined for protocol P1".into()));
    }
    let (d1, d2, d3) = y.data.dims();
    let mut out = CMatrix::zeros(d3, d1 * d2);
    for (p, slice) in y.data.slices().iter().enumerate() {
        for (c, z) in slice.iter().enumerate() {
            out[(p, c)] = *z;
        }
    }
    Ok(out)
}

/// The noiseless P1 mode-3 model `C · (Xᵀ ⋄ W)ᵀ`.
pub fn p1_mode3_model(w: &CMatrix, x: &CMatrix, coding: &CMatrix) -> Result<CMatrix> {
    Ok(coding * khatri_rao(&x.transpose(), w)?.transpose())
}

/// Frontal slices stacked vertically (`Y_stacked`).
pub fn stacked_slices(data: &CTensor3) -> CMatrix {
    vstack(data.slices()).expect("tensor slices share a shape")
}

/// All entries, slice-major then column-major, as one column vector.
pub fn tensor_vec(data: &CTensor3) -> CMatrix {
    let entries: Vec<_> = data.iter().copied().collect();
    CMatrix::from_column_slice(entries.len(), 1, &entries)
}

/// P1 data regrouped per block: `vec([Y_{i,1}, …, Y_{i,P}])` stacked over `i`.
pub fn p1_block_vec(data: &CTensor3, active_antennas: usize) -> Result<CMatrix> {
    let (rows, _, _) = data.dims();
    if active_antennas == 0 || rows % active_antennas != 0 {
        return Err(Error::dim(
            "p1_block_vec",
            format!("{rows} rows are not a multiple of M={active_antennas}"),
        ));
    }
    let blocks = rows / active_antennas;
    let per_block: Vec<CMatrix> = (0..blocks)
        .map(|i| {
            let parts: Vec<CMatrix> = data
                .slices()
                .iter()
                .map(|s| s.rows(i * active_antennas, active_antennas).into_owned())
                .collect();
            let yi = hstack(&parts)?;
            Ok(crate::linalg::vec(&yi))
        })
        .collect::<Result<_>>()?;
    vstack(&per_block)
}

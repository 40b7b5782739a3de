//! Nested PARAFAC2 receiver for protocol P2.

use rand::Rng;

use super::{
    check_factor, run_als, side_dims, KnownSideInfo, Observations, ReceiverOutput, TalsOptions,
    TensorModel,
};
use crate::config::Protocol;
use crate::error::{Error, Result};
use crate::linalg::{kron, scale_cols_by_row, scale_rows_by_row, vstack, CMatrix};
use crate::protocols::{block_factor, stacked_slices, tensor_vec, ObservationTensor};

fn check_coding_rows(op: &'static str, side: &KnownSideInfo) -> Result<()> {
    if side.coding.nrows() != side.blocks() {
        return Err(Error::dim(
            op,
            format!(
                "coding has {} rows, protocol P2 needs one per block ({})",
                side.coding.nrows(),
                side.blocks()
            ),
        ));
    }
    Ok(())
}

/// `W_G = [(Xᵀ ⊗ S_i H)(D_i(C) ⊗ D_i(Θ))]` stacked over blocks, shape
/// `MTI × N_r K`.
pub fn npf_build_wg(side: &KnownSideInfo, h: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let op = "npf_build_wg";
    let sd = side_dims(op, side)?;
    check_coding_rows(op, side)?;
    check_factor(op, "H", h, sd.n, sd.nr)?;
    check_factor(op, "X", x, sd.k, x.ncols())?;
    let xt = x.transpose();
    let blocks: Vec<CMatrix> = side
        .selections
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut block = kron(&xt, &(s * h));
            // right-multiplication by the diagonal D_i(C) ⊗ D_i(Θ)
            for k in 0..sd.k {
                for r in 0..sd.nr {
                    let w = side.coding[(i, k)] * side.theta[(i, r)];
                    let mut col = block.column_mut(k * sd.nr + r);
                    col *= w;
                }
            }
            block
        })
        .collect();
    vstack(&blocks)
}

/// `W_H = [R_iᵀ ⊗ S_i]` stacked over blocks with `R_i = D_i(Θ) G D_i(C) X`,
/// shape `MTI × N N_r`.
pub fn npf_build_wh(side: &KnownSideInfo, g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    let op = "npf_build_wh";
    let sd = side_dims(op, side)?;
    check_coding_rows(op, side)?;
    check_factor(op, "G", g, sd.nr, sd.k)?;
    check_factor(op, "X", x, sd.k, x.ncols())?;
    let blocks: Vec<CMatrix> = side
        .selections
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let gc = scale_cols_by_row(g, &side.coding, i);
            let r = scale_rows_by_row(&side.theta, i, &gc) * x;
            kron(&r.transpose(), s)
        })
        .collect();
    vstack(&blocks)
}

/// `B_total = [S_i H D_i(Θ) G D_i(C)]` stacked over blocks, shape `IM × K`.
pub fn npf_build_btotal(side: &KnownSideInfo, g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    let op = "npf_build_btotal";
    let sd = side_dims(op, side)?;
    check_coding_rows(op, side)?;
    check_factor(op, "G", g, sd.nr, sd.k)?;
    check_factor(op, "H", h, sd.n, sd.nr)?;
    let blocks: Vec<CMatrix> = (0..side.blocks())
        .map(|i| scale_cols_by_row(&block_factor(h, g, side, i), &side.coding, i))
        .collect();
    vstack(&blocks)
}

pub(crate) struct NpfModel;

impl TensorModel for NpfModel {
    const PROTOCOL: Protocol = Protocol::P2;

    fn build_wg(side: &KnownSideInfo, h: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        npf_build_wg(side, h, x)
    }

    fn build_wh(side: &KnownSideInfo, g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
        npf_build_wh(side, g, x)
    }

    fn build_btotal(side: &KnownSideInfo, g: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
        npf_build_btotal(side, g, h)
    }

    fn observations(y: &ObservationTensor, side: &KnownSideInfo) -> Result<Observations> {
        side_dims("npf_tals", side)?;
        check_coding_rows("npf_tals", side)?;
        let m = side.selections[0].nrows();
        let (rows, _, blocks) = y.data.dims();
        if rows != m || blocks != side.blocks() {
            return Err(Error::dim(
                "npf_tals",
                format!(
                    "tensor {:?} does not match M={m}, I={}",
                    y.data.dims(),
                    side.blocks()
                ),
            ));
        }
        let y_vec = tensor_vec(&y.data);
        Ok(Observations {
            y_h: y_vec.clone(),
            y_g: y_vec,
            y_stacked: stacked_slices(&y.data),
        })
    }
}

/// Semi-blind nested PARAFAC2 receiver (protocol P2).
pub fn npf_tals<R: Rng + ?Sized>(
    y: &ObservationTensor,
    side: &KnownSideInfo,
    opt: &TalsOptions,
    rng: &mut R,
) -> Result<ReceiverOutput> {
    run_als::<NpfModel, R>(y, side, opt, None, rng)
}

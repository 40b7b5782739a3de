//! Flat binary layout for observation tensors.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `RISOBS01`                       |
//! | 8      | 4    | protocol, `u32` (1 or 2)               |
//! | 12     | 8    | d1, `u64`                              |
//! | 20     | 8    | d2, `u64`                              |
//! | 28     | 8    | d3, `u64`                              |
//! | 36     | 8    | snr_db, `f64` (`+inf` when noiseless)  |
//! | 44     | 8    | noise variance, `f64`                  |
//! | 52     | 16·d1·d2·d3 | entries as `(re, im)` `f64` pairs, slice-major, column-major within a slice |

use std::io::{Read, Write};

use crate::config::Protocol;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CTensor3, C64};

use super::ObservationTensor;

pub const OBSERVATION_MAGIC: &[u8; 8] = b"RISOBS01";

pub fn write_observation<W: Write>(obs: &ObservationTensor, mut w: W) -> Result<()> {
    let (d1, d2, d3) = obs.data.dims();
    w.write_all(OBSERVATION_MAGIC)?;
    let proto: u32 = match obs.protocol {
        Protocol::P1 => 1,
        Protocol::P2 => 2,
    };
    w.write_all(&proto.to_le_bytes())?;
    for d in [d1, d2, d3] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&obs.snr_db.to_le_bytes())?;
    w.write_all(&obs.noise_variance.to_le_bytes())?;
    for z in obs.data.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_observation<R: Read>(mut r: R) -> Result<ObservationTensor> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != OBSERVATION_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut pb = [0u8; 4];
    r.read_exact(&mut pb)?;
    let protocol = match u32::from_le_bytes(pb) {
        1 => Protocol::P1,
        2 => Protocol::P2,
        other => return Err(Error::Format(format!("unknown protocol tag {other}"))),
    };
    let dims: Vec<usize> = (0..3)
        .map(|_| read_u64(&mut r).map(|d| d as usize))
        .collect::<Result<_>>()?;
    let (d1, d2, d3) = (dims[0], dims[1], dims[2]);
    if d1 == 0 || d2 == 0 || d3 == 0 {
        return Err(Error::Format(format!("zero dimension in {dims:?}")));
    }
    let snr_db = read_f64(&mut r)?;
    let noise_variance = read_f64(&mut r)?;
    let mut slices = Vec::with_capacity(d3);
    for _ in 0..d3 {
        let mut data = Vec::with_capacity(d1 * d2);
        for _ in 0..d1 * d2 {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        slices.push(CMatrix::from_column_slice(d1, d2, &data));
    }
    Ok(ObservationTensor {
        protocol,
        data: CTensor3::from_slices(slices)?,
        snr_db,
        noise_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(d1: usize, d2: usize, d3: usize, seed: u64) -> CTensor3 {
        let mut rng = crate::rng::rng_from_seed(seed);
        CTensor3::from_slices(
            (0..d3)
                .map(|_| crate::rng::complex_gaussian_matrix(d1, d2, 1.0, &mut rng))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn header_layout_is_fixed() {
        let mut data = CTensor3::zeros(1, 2, 1);
        data.slices_mut()[0][(0, 1)] = C64::new(1.5, -2.0);
        let obs = ObservationTensor {
            protocol: Protocol::P2,
            data,
            snr_db: 10.0,
            noise_variance: 0.25,
        };
        let mut buf = Vec::new();
        write_observation(&obs, &mut buf).unwrap();
        assert_eq!(buf.len(), 52 + 2 * 16);
        assert_eq!(&buf[0..8], b"RISOBS01");
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..20], &1u64.to_le_bytes());
        assert_eq!(&buf[20..28], &2u64.to_le_bytes());
        assert_eq!(&buf[28..36], &1u64.to_le_bytes());
        assert_eq!(&buf[36..44], &10.0f64.to_le_bytes());
        assert_eq!(&buf[44..52], &0.25f64.to_le_bytes());
        // second entry (row 0, column 1)
        assert_eq!(&buf[68..76], &1.5f64.to_le_bytes());
        assert_eq!(&buf[76..84], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let obs = ObservationTensor::noiseless(Protocol::P1, tensor(2, 2, 2, 1));
        let mut buf = Vec::new();
        write_observation(&obs, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_observation(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_observation(&buf[..buf.len() - 1]), Err(Error::Io(_))));
    }

    proptest! {
        #[test]
        fn round_trip(d1 in 1usize..5, d2 in 1usize..5, d3 in 1usize..4, seed in any::<u64>(), p2 in any::<bool>(), snr in prop_oneof![Just(f64::INFINITY), -10.0f64..40.0]) {
            let obs = ObservationTensor {
                protocol: if p2 { Protocol::P2 } else { Protocol::P1 },
                data: tensor(d1, d2, d3, seed),
                snr_db: snr,
                noise_variance: 0.5,
            };
            let mut buf = Vec::new();
            write_observation(&obs, &mut buf).unwrap();
            prop_assert_eq!(read_observation(&buf[..]).unwrap(), obs);
        }
    }
}

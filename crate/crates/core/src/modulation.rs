//! Unit-energy constellations with Gray labelling.

use serde::{Deserialize, Serialize};

use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    #[default]
    Qpsk,
    #[serde(rename = "qam16")]
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn order(self) -> u32 {
        1 << self.bits_per_symbol()
    }

    /// Maps a bit label in `0..order()` to its constellation point.
    ///
    /// QPSK uses the high bit for the in-phase sign and the low bit for the
    /// quadrature sign. 16-QAM uses the two high bits for the in-phase level
    /// and the two low bits for the quadrature level, each Gray coded as
    /// `00 → -3, 01 → -1, 11 → +1, 10 → +3` and scaled by `1/√10`.
    pub fn point(self, label: u32) -> C64 {
        debug_assert!(label < self.order());
        match self {
            Modulation::Bpsk => C64::new(if label == 0 { 1.0 } else { -1.0 }, 0.0),
            Modulation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let i = if label & 0b10 == 0 { s } else { -s };
                let q = if label & 0b01 == 0 { s } else { -s };
                C64::new(i, q)
            }
            Modulation::Qam16 => {
                let level = |bits: u32| match bits {
                    0b00 => -3.0,
                    0b01 => -1.0,
                    0b11 => 1.0,
                    _ => 3.0,
                };
                let scale = 1.0 / 10f64.sqrt();
                C64::new(level(label >> 2) * scale, level(label & 0b11) * scale)
            }
        }
    }

    /// Nearest-point hard decision, returning the bit label.
    pub fn decide(self, z: C64) -> u32 {
        (0..self.order())
            .min_by(|&a, &b| {
                let da = (z - self.point(a)).norm_sqr();
                let db = (z - self.point(b)).norm_sqr();
                da.total_cmp(&db)
            })
            .expect("non-empty constellation")
    }
}

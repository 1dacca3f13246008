use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const GENOTYPE_BITS: usize = 12;
/// Bits per pool weight.
pub const GROUP_BITS: usize = 4;
pub const N_POOLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype([bool; GENOTYPE_BITS]);

impl Genotype {
    pub fn new(bits: [bool; GENOTYPE_BITS]) -> Self {
        Genotype(bits)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let arr: [bool; GENOTYPE_BITS] = bits
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("genotype needs {GENOTYPE_BITS} bits, got {}", bits.len())))?;
        Ok(Genotype(arr))
    }

    /// Genotype `k` of the 4096 in lexicographic order (bit 0 most significant).
    pub fn from_index(k: u16) -> Self {
        Genotype(std::array::from_fn(|i| (k >> (GENOTYPE_BITS - 1 - i)) & 1 == 1))
    }

    pub fn bits(&self) -> &[bool; GENOTYPE_BITS] {
        &self.0
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool; GENOTYPE_BITS] {
        &mut self.0
    }

    /// Big-endian integer weight of each 4-bit group.
    pub fn weights(&self) -> [u8; N_POOLS] {
        std::array::from_fn(|p| {
            self.0[p * GROUP_BITS..(p + 1) * GROUP_BITS]
                .iter()
                .fold(0u8, |acc, &b| (acc << 1) | b as u8)
        })
    }

    /// Weights divided by their gcd, so decode-equivalent genotypes share a
    /// key. All-zero weights key as `[1, 1, 1]`.
    pub fn ratio_key(&self) -> [u8; N_POOLS] {
        let w = self.weights();
        let g = w.iter().fold(0u8, |a, &b| gcd(a, b));
        if g == 0 {
            [1; N_POOLS]
        } else {
            w.map(|v| v / g)
        }
    }

    pub fn decode(&self) -> MixRatio {
        let key = self.ratio_key();
        MixRatio::from_weights(key.map(f64::from)).expect("positive weight sum")
    }

    pub fn complement(&self) -> Genotype {
        Genotype(self.0.map(|b| !b))
    }
}

fn gcd(a: u8, b: u8) -> u8 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn decode_genotype(bits: &[bool]) -> Result<MixRatio> {
    Ok(Genotype::from_bits(bits)?.decode())
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Accepts `0`/`1` characters; spaces and underscores are ignored.
impl FromStr for Genotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_'))
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidInput(format!("bad genotype character `{c}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Genotype::from_bits(&bits)
    }
}

impl Serialize for Genotype {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Share of the needed synthetic rows drawn from each pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixRatio([f64; N_POOLS]);

impl MixRatio {
    /// Requires non-negative shares summing to 1 within 1e-12.
    pub fn new(r: [f64; N_POOLS]) -> Result<Self> {
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "mix ratio {r:?} has a negative or non-finite share"
            )));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mix ratio {r:?} sums to {sum}")));
        }
        Ok(MixRatio(r))
    }

    /// Normalizes non-negative weights with a positive sum.
    pub fn from_weights(w: [f64; N_POOLS]) -> Result<Self> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || sum <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "mix weights {w:?} must be non-negative with a positive sum"
            )));
        }
        Ok(MixRatio(w.map(|v| v / sum)))
    }

    pub fn uniform() -> Self {
        MixRatio([1.0 / 3.0; N_POOLS])
    }

    /// Only pool `p`.
    pub fn single(p: usize) -> Self {
        MixRatio(std::array::from_fn(|i| if i == p { 1.0 } else { 0.0 }))
    }

    pub fn shares(&self) -> [f64; N_POOLS] {
        self.0
    }

    pub fn linf_distance(&self, other: &[f64; N_POOLS]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl<'de> Deserialize<'de> for MixRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = <[f64; N_POOLS]>::deserialize(d)?;
        MixRatio::new(r).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MixRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}:{:.3}:{:.3}", self.0[0], self.0[1], self.0[2])
    }
}

/// Parses `a:b:c` weights (not necessarily normalized), e.g. `6:0:1`.
impl FromStr for MixRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("bad mix ratio `{s}`")))?;
        let w: [f64; N_POOLS] = parts
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("mix ratio `{s}` needs {N_POOLS} parts")))?;
        MixRatio::from_weights(w)
    }
}

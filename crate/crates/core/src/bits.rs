//! Fixed-width binary vectors stored as packed 64-bit words.

use std::fmt;

use crate::error::{Error, Result};

/// A fixed-width bit vector. Bit `i` lives in word `i / 64` at position `i % 64`.
///
/// Bits beyond `width` in the last word are always zero, so word-wise XOR and
/// popcount give exact Hamming distances.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    width: usize,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        BitVector {
            words: vec![0; width.div_ceil(64)],
            width,
        }
    }

    pub fn ones(width: usize) -> Self {
        let mut v = Self::zeros(width);
        for i in 0..width {
            v.set(i, true);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Parses a string of `0`/`1` characters; character `i` is bit `i`.
    pub fn parse01(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut v = Self::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                other => {
                    return Err(Error::Data(format!(
                        "invalid character {other:?} at position {i} of bit string"
                    )))
                }
            }
        }
        Ok(v)
    }

    /// Builds a vector from LSB-first packed bytes (bit `i` = byte `i/8`, bit `i%8`).
    pub fn from_packed_bytes(bytes: &[u8], width: usize) -> Result<Self> {
        if bytes.len() != width.div_ceil(8) {
            return Err(Error::Data(format!(
                "packed row has {} bytes, expected {} for width {width}",
                bytes.len(),
                width.div_ceil(8)
            )));
        }
        let mut v = Self::zeros(width);
        for i in 0..width {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                v.set(i, true);
            }
        }
        Ok(v)
    }

    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.width.div_ceil(8)];
        for i in self.iter_ones() {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.width, "bit index {i} out of range {}", self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.width, "bit index {i} out of range {}", self.width);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.get(i);
        self.set(i, !b);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut v = self.clone();
        for w in &mut v.words {
            *w = !*w;
        }
        v.clear_tail();
        v
    }

    /// Hamming distance to `other`. Panics when widths differ; see
    /// [`crate::encode::hamming`] for the checked form.
    #[inline]
    pub fn distance(&self, other: &BitVector) -> usize {
        assert_eq!(self.width, other.width, "bit vector widths differ");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Column indices where `self` and `other` differ, in ascending order.
    pub fn mismatches(&self, other: &BitVector) -> Vec<usize> {
        assert_eq!(self.width, other.width, "bit vector widths differ");
        let mut out = Vec::new();
        for (wi, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut x = a ^ b;
            while x != 0 {
                out.push(wi * 64 + x.trailing_zeros() as usize);
                x &= x - 1;
            }
        }
        out
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut x = w;
            std::iter::from_fn(move || {
                if x == 0 {
                    None
                } else {
                    let bit = x.trailing_zeros() as usize;
                    x &= x - 1;
                    Some(wi * 64 + bit)
                }
            })
        })
    }

    fn clear_tail(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

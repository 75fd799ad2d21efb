//! Feature pipeline: observed state → continuous features in `[0,1]^k` → bits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::boxworld::BoxWorldState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("categories per dimension must be a power of two >= 2, got {0}")]
    Categories(usize),
    #[error("invalid bit character {0:?}; expected '0' or '1'")]
    BitChar(char),
    #[error("bit vector has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
}

/// Continuous feature vector; every value is clamped into `[0, 1]` (NaN becomes 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatureVector(Vec<f64>);

impl RawFeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(mut self, other: RawFeatureVector) -> Self {
        self.0.extend(other.0);
        self
    }
}

/// Fixed-length vector of bits, packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryVector {
    len: usize,
    words: Vec<u64>,
}

impl BinaryVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BinaryVector {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(FeatureError::BitChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_bits(&bits))
    }
}

fn bits_per_category(categories: usize) -> Result<usize, FeatureError> {
    if categories < 2 || !categories.is_power_of_two() {
        return Err(FeatureError::Categories(categories));
    }
    Ok(categories.trailing_zeros() as usize)
}

/// Length of the binarized vector for `k` raw dimensions: `k·log2(j)`.
pub fn binary_len(k: usize, categories: usize) -> Result<usize, FeatureError> {
    Ok(k * bits_per_category(categories)?)
}

/// Equal-width binning into `categories` cells per dimension.
///
/// A value `v` falls in cell `min(floor(v·j), j−1)`; the cell index is written
/// big-endian in `log2(j)` bits.
pub fn binarize(x: &RawFeatureVector, categories: usize) -> Result<BinaryVector, FeatureError> {
    let width = bits_per_category(categories)?;
    let mut out = BinaryVector::zeros(x.len() * width);
    for (d, &v) in x.values().iter().enumerate() {
        let cell = ((v * categories as f64).floor() as usize).min(categories - 1);
        for b in 0..width {
            let bit = (cell >> (width - 1 - b)) & 1 == 1;
            out.set(d * width + b, bit);
        }
    }
    Ok(out)
}

/// Reads the cell index of each dimension back out of a binarized vector.
pub fn decode_categories(bits: &BinaryVector, categories: usize) -> Result<Vec<usize>, FeatureError> {
    let width = bits_per_category(categories)?;
    if !bits.len().is_multiple_of(width) {
        return Err(FeatureError::Length {
            expected: bits.len().next_multiple_of(width),
            got: bits.len(),
        });
    }
    Ok((0..bits.len() / width)
        .map(|d| (0..width).fold(0usize, |acc, b| (acc << 1) | bits.get(d * width + b) as usize))
        .collect())
}

/// Normalized column heights of a box world (height / rows).
pub fn depth_profile(state: &BoxWorldState) -> RawFeatureVector {
    let rows = state.rows().max(1) as f64;
    RawFeatureVector::new(state.heights().iter().map(|&h| h as f64 / rows).collect())
}

/// Fraction of all boxes that a pick at `pick_column` would target.
///
/// Targets are the top box of the column plus the top box of each immediate
/// neighbour standing at the same height.
pub fn pick_gain_estimate(state: &BoxWorldState, pick_column: usize) -> f64 {
    let total = state.total_boxes();
    if total == 0 {
        return 0.0;
    }
    state.pick_targets(pick_column).len() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BinaryVector {
        s.parse().unwrap()
    }

    #[test]
    fn binarize_examples() {
        let x = RawFeatureVector::new(vec![0.1, 0.6, 0.9]);
        assert_eq!(binarize(&x, 2).unwrap(), bits("011"));

        let x = RawFeatureVector::new(vec![0.6]);
        assert_eq!(binarize(&x, 4).unwrap(), bits("10"));

        let x = RawFeatureVector::new(vec![1.0, 0.0]);
        assert_eq!(binarize(&x, 8).unwrap(), bits("111000"));
    }

    #[test]
    fn binarize_rejects_bad_categories() {
        let x = RawFeatureVector::new(vec![0.3]);
        assert_eq!(binarize(&x, 3), Err(FeatureError::Categories(3)));
        assert_eq!(binarize(&x, 1), Err(FeatureError::Categories(1)));
        assert_eq!(binarize(&x, 0), Err(FeatureError::Categories(0)));
    }

    #[test]
    fn raw_vector_clamps() {
        let x = RawFeatureVector::new(vec![-0.5, 1.5, f64::NAN, 0.25]);
        assert_eq!(x.values(), &[0.0, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn bit_string_roundtrip_past_word_boundary() {
        let s: String = (0..150).map(|i| if i % 3 == 0 { '1' } else { '0' }).collect();
        let v = bits(&s);
        assert_eq!(v.len(), 150);
        assert_eq!(v.to_string(), s);
        assert_eq!(v.count_ones(), 50);
        assert!(matches!("01x".parse::<BinaryVector>(), Err(FeatureError::BitChar('x'))));
    }

    proptest! {
        #[test]
        fn categories_roundtrip(values in prop::collection::vec(0.0f64..=1.0, 0..20), pow in 1u32..5) {
            let j = 1usize << pow;
            let x = RawFeatureVector::new(values.clone());
            let b = binarize(&x, j).unwrap();
            prop_assert_eq!(b.len(), values.len() * pow as usize);
            let expected: Vec<usize> = values.iter().map(|v| ((v * j as f64).floor() as usize).min(j - 1)).collect();
            prop_assert_eq!(decode_categories(&b, j).unwrap(), expected);
        }

        #[test]
        fn same_cell_same_bits(values in prop::collection::vec(0.0f64..1.0, 1..10), jitter in 0.0f64..1.0) {
            let j = 4usize;
            // move each value somewhere else inside its own cell
            let moved: Vec<f64> = values
                .iter()
                .map(|v| {
                    let cell = (v * j as f64).floor();
                    (cell + jitter * 0.999) / j as f64
                })
                .collect();
            let a = binarize(&RawFeatureVector::new(values), j).unwrap();
            let b = binarize(&RawFeatureVector::new(moved), j).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

//! Fixed-length bit strings used as secret keys and XOR accumulators.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use rand::Rng;

use crate::error::{Error, Result};

/// A fixed-length bit string. Participant keys, learned XOR segments and
/// final keys are all `Key`s of the session's key length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Key(Vec<bool>);

impl Key {
    /// All-zero key of the given length.
    pub fn zero(len: usize) -> Self {
        Key(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Key(bits)
    }

    /// Uniformly random key drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Key((0..len).map(|_| rng.random_bool(0.5)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, index: usize) -> bool {
        self.0[index]
    }

    pub fn set_bit(&mut self, index: usize, value: bool) {
        self.0[index] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn xor_in_place(&mut self, other: &Key) {
        assert_eq!(self.len(), other.len(), "key length mismatch in xor");
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a ^= *b;
        }
    }

    /// Parse a hex string, four bits per digit, most significant bit first.
    pub fn from_hex(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidConfig("empty hex key".into()));
        }
        let mut bits = Vec::with_capacity(s.len() * 4);
        for c in s.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::InvalidConfig(format!("invalid hex digit {c:?} in key")))?;
            for shift in (0..4).rev() {
                bits.push((v >> shift) & 1 == 1);
            }
        }
        Ok(Key(bits))
    }

    /// Hex rendering; the length must be a multiple of four bits.
    pub fn to_hex(&self) -> String {
        assert_eq!(self.len() % 4, 0, "key length not a multiple of 4");
        self.0
            .chunks(4)
            .map(|nibble| {
                let v = nibble
                    .iter()
                    .fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    /// Parse a binary string such as `"1011"`.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidConfig(format!("invalid key bit {c:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(Key)
    }
}

impl BitXor for &Key {
    type Output = Key;

    fn bitxor(self, rhs: &Key) -> Key {
        let mut out = self.clone();
        out.xor_in_place(rhs);
        out
    }
}

impl BitXorAssign<&Key> for Key {
    fn bitxor_assign(&mut self, rhs: &Key) {
        self.xor_in_place(rhs);
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key({self})")
    }
}

//! Bit-string helpers shared by values, symbols and broadcast payloads.

use bitvec::prelude::*;
use sha2::{Digest, Sha256};

/// An owned big-endian bit string.
pub type Bits = BitVec<u8, Msb0>;

/// A borrowed view into a [`Bits`].
pub type BitsRef = BitSlice<u8, Msb0>;

/// `len` zero bits.
pub fn zeros(len: usize) -> Bits {
    bitvec![u8, Msb0; 0; len]
}

/// The low `len` bits of `value`, most significant first.
pub fn from_u64(value: u64, len: usize) -> Bits {
    let mut out = zeros(len);
    for i in 0..len.min(64) {
        out.set(len - 1 - i, (value >> i) & 1 == 1);
    }
    out
}

/// Interpret up to the last 64 bits of `bits` as an unsigned integer.
pub fn tail_u64(bits: &BitsRef) -> u64 {
    let start = bits.len().saturating_sub(64);
    bits[start..]
        .iter()
        .fold(0u64, |acc, b| (acc << 1) | u64::from(*b))
}

/// XOR `mask` into the last (up to 64) bits, aligned at the least significant end.
pub fn xor_tail(bits: &mut BitsRef, mask: u64) {
    let len = bits.len();
    for i in 0..len.min(64) {
        if (mask >> i) & 1 == 1 {
            let idx = len - 1 - i;
            let cur = bits[idx];
            bits.set(idx, !cur);
        }
    }
}

/// Replace the last (up to 64) bits with `value`; higher bits are cleared.
pub fn set_tail(bits: &mut BitsRef, value: u64) {
    bits.fill(false);
    xor_tail(bits, value);
}

/// Lower-case hex of the packed big-endian bytes (the final byte is zero padded).
pub fn to_hex(bits: &BitsRef) -> String {
    let owned: Bits = bits.to_bitvec();
    hex::encode(owned.as_raw_slice())
}

/// Parse a hex string into exactly `len` bits, taking the leading bits of the
/// decoded bytes. Missing trailing bits are zero.
pub fn from_hex(text: &str, len: usize) -> Result<Bits, hex::FromHexError> {
    let bytes = hex::decode(text)?;
    let mut bits = Bits::from_vec(bytes);
    bits.resize(len, false);
    Ok(bits)
}

/// SHA-256 over the bit length followed by the packed bytes, as hex.
pub fn digest(bits: &BitsRef) -> String {
    let owned: Bits = bits.to_bitvec();
    let mut hasher = Sha256::new();
    hasher.update((bits.len() as u64).to_be_bytes());
    hasher.update(owned.as_raw_slice());
    hex::encode(hasher.finalize())
}

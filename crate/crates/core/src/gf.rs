//! Binary extension fields GF(2^w) for 1 <= w <= 16 and the symbol layout.
//!
//! Elements use the polynomial basis: bit `i` of the integer representation is
//! the coefficient of `x^i`. Each width has one fixed primitive reduction
//! polynomial, so every run derives identical arithmetic.
//!
//! | w  | polynomial                        | hex      |
//! |----|-----------------------------------|----------|
//! | 1  | x + 1                             | 0x3      |
//! | 2  | x^2 + x + 1                       | 0x7      |
//! | 3  | x^3 + x + 1                       | 0xB      |
//! | 4  | x^4 + x + 1                       | 0x13     |
//! | 5  | x^5 + x^2 + 1                     | 0x25     |
//! | 6  | x^6 + x + 1                       | 0x43     |
//! | 7  | x^7 + x^3 + 1                     | 0x89     |
//! | 8  | x^8 + x^4 + x^3 + x^2 + 1         | 0x11D    |
//! | 9  | x^9 + x^4 + 1                     | 0x211    |
//! | 10 | x^10 + x^3 + 1                    | 0x409    |
//! | 11 | x^11 + x^2 + 1                    | 0x805    |
//! | 12 | x^12 + x^6 + x^4 + x + 1          | 0x1053   |
//! | 13 | x^13 + x^4 + x^3 + x + 1          | 0x201B   |
//! | 14 | x^14 + x^10 + x^6 + x + 1         | 0x4443   |
//! | 15 | x^15 + x + 1                      | 0x8003   |
//! | 16 | x^16 + x^12 + x^3 + x + 1         | 0x1100B  |
//!
//! Symbols wider than 16 bits are split into independent lanes of at most 16
//! bits each (see [`SymbolLayout`]). A linear code applied lane by lane keeps
//! its minimum distance at the symbol level: two different symbol vectors
//! differ in some lane, and that lane alone already differs in at least `d`
//! positions.

use std::sync::OnceLock;

use crate::bits::{Bits, BitsRef};
use crate::code::CodeError;

/// Widest single field supported; wider symbols are split into lanes.
pub const MAX_LANE_BITS: u32 = 16;

const REDUCTION_POLYNOMIALS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

/// The fixed reduction polynomial for GF(2^bits), if that width is supported.
pub fn reduction_polynomial(bits: u32) -> Option<u32> {
    REDUCTION_POLYNOMIALS
        .get(bits as usize)
        .copied()
        .filter(|p| *p != 0)
}

/// Log/antilog tables for one GF(2^w).
#[derive(Debug)]
pub struct Gf2m {
    bits: u32,
    poly: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Gf2m {
    /// Shared tables for GF(2^bits). Built once per width on first use.
    pub fn get(bits: u32) -> Result<&'static Gf2m, CodeError> {
        static FIELDS: [OnceLock<Gf2m>; 17] = [const { OnceLock::new() }; 17];
        let poly = reduction_polynomial(bits).ok_or(CodeError::UnsupportedWidth(bits))?;
        Ok(FIELDS[bits as usize].get_or_init(|| Gf2m::build(bits, poly)))
    }

    fn build(bits: u32, poly: u32) -> Gf2m {
        let order = (1usize << bits) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            *slot = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << bits) != 0 {
                x ^= poly;
            }
        }
        assert_eq!(x, 1, "reduction polynomial {poly:#x} is not primitive");
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Gf2m {
            bits,
            poly,
            exp,
            log,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, 2^w.
    pub fn size(&self) -> u32 {
        1 << self.bits
    }

    /// Multiplicative group order, 2^w - 1.
    fn order(&self) -> usize {
        (1usize << self.bits) - 1
    }

    pub fn contains(&self, a: u16) -> bool {
        u32::from(a) < self.size()
    }

    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    pub fn inv(&self, a: u16) -> Option<u16> {
        if a == 0 {
            return None;
        }
        Some(self.exp[(self.order() - self.log[a as usize] as usize) % self.order()])
    }

    pub fn div(&self, a: u16, b: u16) -> Option<u16> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: u16, e: u64) -> u16 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let l = (self.log[a as usize] as u64 * (e % self.order() as u64)) % self.order() as u64;
        self.exp[l as usize]
    }
}

/// One symbol: lane values, most significant lane first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Vec<u16>);

impl Symbol {
    pub fn from_lanes(lanes: Vec<u16>) -> Self {
        Symbol(lanes)
    }

    /// A single-lane symbol.
    pub fn single(value: u16) -> Self {
        Symbol(vec![value])
    }

    pub fn lanes(&self) -> &[u16] {
        &self.0
    }

    pub fn lanes_mut(&mut self) -> &mut [u16] {
        &mut self.0
    }
}

/// How an `m`-bit symbol maps onto field lanes.
///
/// Up to 16 bits the symbol is one element of GF(2^m). Beyond that it is
/// split into `ceil(m / 16)` lanes whose widths differ by at most one, the
/// wider lanes first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolLayout {
    bits: usize,
    lanes: Vec<u32>,
}

impl SymbolLayout {
    pub fn new(bits: usize) -> Result<Self, CodeError> {
        if bits == 0 {
            return Err(CodeError::UnsupportedWidth(0));
        }
        let max = MAX_LANE_BITS as usize;
        let count = bits.div_ceil(max);
        let narrow = bits / count;
        let wide = bits % count;
        let lanes = (0..count)
            .map(|i| (narrow + usize::from(i < wide)) as u32)
            .collect();
        Ok(SymbolLayout { bits, lanes })
    }

    /// Total symbol width in bits.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn lanes(&self) -> &[u32] {
        &self.lanes
    }

    pub fn min_lane_bits(&self) -> u32 {
        self.lanes.iter().copied().min().unwrap_or(0)
    }

    pub fn zero(&self) -> Symbol {
        Symbol(vec![0; self.lanes.len()])
    }

    pub fn contains(&self, sym: &Symbol) -> bool {
        sym.0.len() == self.lanes.len()
            && sym
                .0
                .iter()
                .zip(&self.lanes)
                .all(|(v, w)| u32::from(*v) < (1u32 << w))
    }

    /// Decode exactly `self.bits()` bits. Every bit pattern is a valid symbol.
    pub fn read(&self, src: &BitsRef) -> Symbol {
        debug_assert_eq!(src.len(), self.bits);
        let mut offset = 0;
        let lanes = self
            .lanes
            .iter()
            .map(|w| {
                let w = *w as usize;
                let v = src[offset..offset + w]
                    .iter()
                    .fold(0u16, |acc, b| (acc << 1) | u16::from(*b));
                offset += w;
                v
            })
            .collect();
        Symbol(lanes)
    }

    /// Append the big-endian encoding of `sym` to `dst`.
    pub fn write(&self, sym: &Symbol, dst: &mut Bits) {
        for (v, w) in sym.0.iter().zip(&self.lanes) {
            for i in (0..*w).rev() {
                dst.push((v >> i) & 1 == 1);
            }
        }
    }

    pub fn to_bits(&self, sym: &Symbol) -> Bits {
        let mut out = Bits::with_capacity(self.bits);
        self.write(sym, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn every_polynomial_is_primitive() {
        for w in 1..=MAX_LANE_BITS {
            let f = Gf2m::get(w).unwrap();
            // build() asserts the cycle closes exactly at 2^w - 1; check no repeats
            let mut seen = vec![false; f.size() as usize];
            for i in 0..f.order() {
                let e = f.exp[i] as usize;
                assert!(!seen[e], "w={w} repeats at {i}");
                seen[e] = true;
            }
            assert!(!seen[0]);
        }
    }

    #[test]
    fn unsupported_widths() {
        assert!(Gf2m::get(0).is_err());
        assert!(Gf2m::get(17).is_err());
    }

    #[test]
    fn gf8_matches_hand_tables() {
        // x^3 = x + 1: alpha^3 = 0b011, alpha^4 = 0b110, alpha^5 = 0b111, alpha^6 = 0b101
        let f = Gf2m::get(3).unwrap();
        let a = 2u16;
        assert_eq!(f.pow(a, 3), 0b011);
        assert_eq!(f.pow(a, 4), 0b110);
        assert_eq!(f.pow(a, 5), 0b111);
        assert_eq!(f.pow(a, 6), 0b101);
        assert_eq!(f.pow(a, 7), 1);
        assert_eq!(f.inv(3), Some(6)); // (alpha^3)^-1 = alpha^4
    }

    #[test]
    fn exhaustive_field_axioms_gf16() {
        let f = Gf2m::get(4).unwrap();
        for a in 0..16u16 {
            for b in 0..16u16 {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..16u16 {
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                }
            }
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn layout_splits_wide_symbols() {
        assert_eq!(SymbolLayout::new(4).unwrap().lanes(), &[4]);
        assert_eq!(SymbolLayout::new(16).unwrap().lanes(), &[16]);
        assert_eq!(SymbolLayout::new(17).unwrap().lanes(), &[9, 8]);
        assert_eq!(SymbolLayout::new(1024).unwrap().lanes(), &[16; 64]);
        let l = SymbolLayout::new(40).unwrap();
        assert_eq!(l.lanes(), &[14, 13, 13]);
        assert_eq!(l.lanes().iter().sum::<u32>(), 40);
        assert!(SymbolLayout::new(0).is_err());
    }

    proptest! {
        #[test]
        fn mul_inverse_and_div(w in 1u32..=16, a in any::<u16>(), b in any::<u16>()) {
            let f = Gf2m::get(w).unwrap();
            let mask = (f.size() - 1) as u16;
            let (a, b) = (a & mask, b & mask);
            if b != 0 {
                let q = f.div(a, b).unwrap();
                prop_assert_eq!(f.mul(q, b), a);
            }
        }

        #[test]
        fn layout_read_write_round_trip(bits in 1usize..200, seed in any::<u64>()) {
            let layout = SymbolLayout::new(bits).unwrap();
            let mut src = Bits::new();
            let mut s = seed;
            for _ in 0..bits {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                src.push(s >> 63 == 1);
            }
            let sym = layout.read(&src);
            prop_assert!(layout.contains(&sym));
            prop_assert_eq!(layout.to_bits(&sym), src);
        }
    }
}

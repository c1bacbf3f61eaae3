//! Systematic (n, k) maximum-distance-separable code over GF(2^m).
//!
//! A data vector of `k` symbols is the value of the unique polynomial of
//! degree < k through the first `k` evaluation points; the codeword is that
//! polynomial evaluated at all `n` points. With `k = n - 2t` the minimum
//! distance is `2t + 1`, and keeping any `n - z` positions leaves a code of
//! distance `2t + 1 - z`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bits::{Bits, BitsRef};
use crate::gf::{reduction_polynomial, Gf2m, Symbol, SymbolLayout};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("unsupported field width {0}")]
    UnsupportedWidth(u32),
    #[error("GF(2^{lane_bits}) has fewer than {n} elements")]
    FieldTooSmall { lane_bits: u32, n: usize },
    #[error("evaluation point {0} appears twice")]
    DuplicatePoint(u16),
    #[error("evaluation point {point} is not an element of GF(2^{lane_bits})")]
    PointOutOfField { point: u16, lane_bits: u32 },
    #[error("degenerate code ({n}, {k}): need 1 <= k < n")]
    Degenerate { n: usize, k: usize },
    #[error("expected {expected} symbols, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("symbol at position {position} is outside the field")]
    SymbolOutOfRange { position: usize },
    #[error("value of {bits} bits does not fit in {capacity} bits")]
    ValueTooLong { bits: usize, capacity: usize },
    #[error("{have} positions cannot determine a codeword of dimension {need}")]
    TooFewPositions { have: usize, need: usize },
    #[error("position {position} out of range for length {n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("position {0} listed twice")]
    DuplicatePosition(usize),
    #[error("exhaustive search over {codewords} codewords is too large")]
    TooLarge { codewords: u128 },
}

/// Symbol layout plus the ordered evaluation points (one per position).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    layout: SymbolLayout,
    points: Vec<u16>,
}

impl FieldSpec {
    /// Points `0, 1, ..., n-1` in ascending integer representation.
    pub fn new(symbol_bits: usize, n: usize) -> Result<Self, CodeError> {
        let points = (0..n)
            .map(|p| u16::try_from(p).map_err(|_| CodeError::FieldTooSmall { lane_bits: 16, n }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_points(symbol_bits, points)
    }

    pub fn with_points(symbol_bits: usize, points: Vec<u16>) -> Result<Self, CodeError> {
        let layout = SymbolLayout::new(symbol_bits)?;
        let lane_bits = layout.min_lane_bits();
        if (1usize << lane_bits) < points.len() {
            return Err(CodeError::FieldTooSmall {
                lane_bits,
                n: points.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in &points {
            if u32::from(p) >= 1u32 << lane_bits {
                return Err(CodeError::PointOutOfField { point: p, lane_bits });
            }
            if !seen.insert(p) {
                return Err(CodeError::DuplicatePoint(p));
            }
        }
        Ok(FieldSpec { layout, points })
    }

    pub fn layout(&self) -> &SymbolLayout {
        &self.layout
    }

    pub fn symbol_bits(&self) -> usize {
        self.layout.bits()
    }

    pub fn points(&self) -> &[u16] {
        &self.points
    }

    /// Reduction polynomial of every lane, most significant lane first.
    pub fn reduction_polynomials(&self) -> Vec<u32> {
        self.layout
            .lanes()
            .iter()
            .map(|w| reduction_polynomial(*w).expect("layout widths are supported"))
            .collect()
    }
}

/// A full-length word of `n` symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Codeword(Vec<Symbol>);

impl Codeword {
    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The symbol at `position`.
    pub fn at(&self, position: usize) -> &Symbol {
        &self.0[position]
    }
}

/// Symbols known at a subset of positions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialWord {
    entries: BTreeMap<usize, Symbol>,
}

impl PartialWord {
    pub fn new(
        n: usize,
        entries: impl IntoIterator<Item = (usize, Symbol)>,
    ) -> Result<Self, CodeError> {
        let mut map = BTreeMap::new();
        for (pos, sym) in entries {
            if pos >= n {
                return Err(CodeError::PositionOutOfRange { position: pos, n });
            }
            if map.insert(pos, sym).is_some() {
                return Err(CodeError::DuplicatePosition(pos));
            }
        }
        Ok(PartialWord { entries: map })
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, position: usize) -> Option<&Symbol> {
        self.entries.get(&position)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Symbol)> {
        self.entries.iter().map(|(p, s)| (*p, s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LaneMatrix {
    lane_bits: u32,
    /// rows[j][i]: coefficient of data symbol i in parity position k + j.
    rows: Vec<Vec<u16>>,
}

/// The code `C_2t`: `n` positions, `k` systematic data positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeSpec {
    field: FieldSpec,
    k: usize,
    parity: Vec<LaneMatrix>,
}

impl CodeSpec {
    /// An (n, k) code with `1 <= k < n`; `n` is the number of evaluation points.
    pub fn new(field: FieldSpec, k: usize) -> Result<Self, CodeError> {
        let n = field.points.len();
        if k == 0 || k >= n {
            return Err(CodeError::Degenerate { n, k });
        }
        Ok(Self::build(field, k))
    }

    /// The (n, n) code with no redundancy. Only meaningful when no faults are
    /// tolerated; every word is a codeword.
    pub fn uncoded(field: FieldSpec) -> Result<Self, CodeError> {
        let n = field.points.len();
        if n == 0 {
            return Err(CodeError::Degenerate { n, k: 0 });
        }
        Ok(Self::build(field, n))
    }

    /// `(n, n - 2t)` over `symbol_bits`-bit symbols with ascending points.
    pub fn for_faults(symbol_bits: usize, n: usize, t: usize) -> Result<Self, CodeError> {
        let field = FieldSpec::new(symbol_bits, n)?;
        if t == 0 {
            return Self::uncoded(field);
        }
        let k = n
            .checked_sub(2 * t)
            .ok_or(CodeError::Degenerate { n, k: 0 })?;
        Self::new(field, k)
    }

    fn build(field: FieldSpec, k: usize) -> CodeSpec {
        let mut widths: Vec<u32> = field.layout.lanes().to_vec();
        widths.sort_unstable();
        widths.dedup();
        let src = &field.points[..k];
        let dst = &field.points[k..];
        let parity = widths
            .into_iter()
            .map(|w| {
                let f = Gf2m::get(w).expect("layout widths are supported");
                LaneMatrix {
                    lane_bits: w,
                    rows: lagrange_rows(f, src, dst),
                }
            })
            .collect();
        CodeSpec { field, k, parity }
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn layout(&self) -> &SymbolLayout {
        &self.field.layout
    }

    pub fn n(&self) -> usize {
        self.field.points.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `n - k + 1`.
    pub fn distance(&self) -> usize {
        self.n() - self.k + 1
    }

    fn check_symbols(&self, syms: &[Symbol], expected: usize) -> Result<(), CodeError> {
        if syms.len() != expected {
            return Err(CodeError::WrongLength {
                expected,
                got: syms.len(),
            });
        }
        match syms.iter().position(|s| !self.layout().contains(s)) {
            Some(position) => Err(CodeError::SymbolOutOfRange { position }),
            None => Ok(()),
        }
    }

    fn lane_matrix(&self, lane_bits: u32) -> &LaneMatrix {
        self.parity
            .iter()
            .find(|m| m.lane_bits == lane_bits)
            .expect("matrix per lane width")
    }

    /// Systematic encoding: positions `0..k` repeat `data`.
    pub fn encode(&self, data: &[Symbol]) -> Result<Codeword, CodeError> {
        self.check_symbols(data, self.k)?;
        let mut out = data.to_vec();
        for j in 0..self.n() - self.k {
            let mut sym = self.layout().zero();
            for (lane, &w) in self.layout().lanes().iter().enumerate() {
                let f = Gf2m::get(w).expect("supported");
                let row = &self.lane_matrix(w).rows[j];
                sym.lanes_mut()[lane] = row
                    .iter()
                    .zip(data)
                    .fold(0u16, |acc, (c, d)| acc ^ f.mul(*c, d.lanes()[lane]));
            }
            out.push(sym);
        }
        Ok(Codeword(out))
    }

    /// True iff `word` equals the encoding of its own systematic part.
    pub fn is_codeword(&self, word: &[Symbol]) -> Result<bool, CodeError> {
        self.check_symbols(word, self.n())?;
        let reencoded = self.encode(&word[..self.k])?;
        Ok(reencoded.symbols() == word)
    }

    /// Restrict the code to the positions in `keep`.
    pub fn puncture(&self, keep: &[usize]) -> Result<PuncturedCode<'_>, CodeError> {
        let word = PartialWord::new(
            self.n(),
            keep.iter().map(|p| (*p, self.layout().zero())),
        )?;
        if word.len() < self.k {
            return Err(CodeError::TooFewPositions {
                have: word.len(),
                need: self.k,
            });
        }
        Ok(PuncturedCode {
            spec: self,
            keep: word.positions().collect(),
        })
    }

    /// The unique codeword agreeing with `word`, if one exists.
    ///
    /// Interpolates through the first `k` known positions and checks the rest.
    pub fn complete(&self, word: &PartialWord) -> Result<Option<Codeword>, CodeError> {
        if word.len() < self.k {
            return Err(CodeError::TooFewPositions {
                have: word.len(),
                need: self.k,
            });
        }
        for (pos, sym) in word.iter() {
            if pos >= self.n() {
                return Err(CodeError::PositionOutOfRange {
                    position: pos,
                    n: self.n(),
                });
            }
            if !self.layout().contains(sym) {
                return Err(CodeError::SymbolOutOfRange { position: pos });
            }
        }
        let basis: Vec<usize> = word.positions().take(self.k).collect();
        let src: Vec<u16> = basis.iter().map(|p| self.field.points[*p]).collect();
        let systematic = &self.field.points[..self.k];
        let mut data = vec![self.layout().zero(); self.k];
        for (lane, &w) in self.layout().lanes().iter().enumerate() {
            let f = Gf2m::get(w).expect("supported");
            let rows = lagrange_rows(f, &src, systematic);
            for (i, row) in rows.iter().enumerate() {
                data[i].lanes_mut()[lane] = row.iter().zip(&basis).fold(0u16, |acc, (c, p)| {
                    acc ^ f.mul(*c, word.get(*p).expect("basis known").lanes()[lane])
                });
            }
        }
        let cw = self.encode(&data)?;
        let consistent = word.iter().all(|(p, s)| cw.at(p) == s);
        Ok(consistent.then_some(cw))
    }

    /// Pack a value of at most `k * m` bits into `k` data symbols, zero padded.
    pub fn split_value(&self, value: &BitsRef) -> Result<Vec<Symbol>, CodeError> {
        let m = self.layout().bits();
        let capacity = self.k * m;
        if value.len() > capacity {
            return Err(CodeError::ValueTooLong {
                bits: value.len(),
                capacity,
            });
        }
        let mut padded: Bits = value.to_bitvec();
        padded.resize(capacity, false);
        Ok(padded
            .chunks(m)
            .map(|chunk| self.layout().read(chunk))
            .collect())
    }

    /// Inverse of [`split_value`](Self::split_value): the first `value_bits`
    /// bits of the concatenated data symbols.
    pub fn join_value(&self, data: &[Symbol], value_bits: usize) -> Bits {
        let mut out = Bits::with_capacity(self.k * self.layout().bits());
        for sym in data.iter().take(self.k) {
            self.layout().write(sym, &mut out);
        }
        out.truncate(value_bits);
        out
    }

    /// Whether a `value_bits`-bit value survives the split/join round trip for
    /// these data symbols (i.e. the padding bits are zero).
    pub fn padding_is_zero(&self, data: &[Symbol], value_bits: usize) -> bool {
        let mut all = Bits::new();
        for sym in data.iter().take(self.k) {
            self.layout().write(sym, &mut all);
        }
        all[value_bits.min(all.len())..].not_any()
    }
}

/// `C_2t` restricted to a set of kept positions.
#[derive(Clone, Debug)]
pub struct PuncturedCode<'a> {
    spec: &'a CodeSpec,
    keep: Vec<usize>,
}

impl PuncturedCode<'_> {
    pub fn keep(&self) -> &[usize] {
        &self.keep
    }

    /// `2t + 1 - z` where `z` positions were removed.
    pub fn distance(&self) -> usize {
        self.spec.distance() - (self.spec.n() - self.keep.len())
    }

    /// Whether `word`, defined exactly on the kept positions, is a restriction
    /// of some codeword.
    pub fn contains(&self, word: &PartialWord) -> Result<bool, CodeError> {
        if !word.positions().eq(self.keep.iter().copied()) {
            return Err(CodeError::WrongLength {
                expected: self.keep.len(),
                got: word.len(),
            });
        }
        Ok(self.spec.complete(word)?.is_some())
    }
}

/// rows[t][i] = L_i(dst[t]) for the Lagrange basis through `src`.
fn lagrange_rows(f: &Gf2m, src: &[u16], dst: &[u16]) -> Vec<Vec<u16>> {
    dst.iter()
        .map(|&x| {
            (0..src.len())
                .map(|i| {
                    let mut num = 1u16;
                    let mut den = 1u16;
                    for (j, &xj) in src.iter().enumerate() {
                        if j != i {
                            num = f.mul(num, f.add(x, xj));
                            den = f.mul(den, f.add(src[i], xj));
                        }
                    }
                    f.div(num, den).expect("distinct points")
                })
                .collect()
        })
        .collect()
}

/// Brute-force distance computations used to validate the code's claims.
///
/// These enumerate every codeword from every data vector and compare all
/// pairs; they never consult [`CodeSpec::is_codeword`] or
/// [`CodeSpec::complete`].
pub mod oracle {
    use super::*;

    /// Codeword counts above this are rejected.
    pub const MAX_CODEWORDS: u128 = 4096;

    /// Exact minimum pairwise Hamming distance over all codewords.
    pub fn min_distance_exhaustive(spec: &CodeSpec) -> Result<usize, CodeError> {
        let all: Vec<usize> = (0..spec.n()).collect();
        punctured_min_distance_exhaustive(spec, &all)
    }

    /// Exact minimum pairwise Hamming distance between distinct data vectors
    /// after restricting codewords to `keep`.
    pub fn punctured_min_distance_exhaustive(
        spec: &CodeSpec,
        keep: &[usize],
    ) -> Result<usize, CodeError> {
        let words = all_codewords(spec)?;
        let mut best = usize::MAX;
        for (a, wa) in words.iter().enumerate() {
            for wb in &words[a + 1..] {
                let d = keep.iter().filter(|p| wa.at(**p) != wb.at(**p)).count();
                best = best.min(d);
            }
        }
        Ok(best)
    }

    /// Minimum Hamming distance from `word` to any codeword.
    pub fn distance_to_code(spec: &CodeSpec, word: &[Symbol]) -> Result<usize, CodeError> {
        let words = all_codewords(spec)?;
        Ok(words
            .iter()
            .map(|c| c.symbols().iter().zip(word).filter(|(x, y)| x != y).count())
            .min()
            .unwrap_or(usize::MAX))
    }

    /// Every codeword, in lexicographic order of the data vector.
    pub fn all_codewords(spec: &CodeSpec) -> Result<Vec<Codeword>, CodeError> {
        let lanes = spec.layout().lanes();
        if lanes.len() != 1 {
            return Err(CodeError::TooLarge { codewords: u128::MAX });
        }
        let q = 1u128 << lanes[0];
        let count = q.checked_pow(spec.k() as u32).unwrap_or(u128::MAX);
        if count > MAX_CODEWORDS {
            return Err(CodeError::TooLarge { codewords: count });
        }
        (0..count)
            .map(|mut idx| {
                let mut data = vec![Symbol::single(0); spec.k()];
                for slot in data.iter_mut().rev() {
                    *slot = Symbol::single((idx % q) as u16);
                    idx /= q;
                }
                spec.encode(&data)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::bits;
    use proptest::prelude::*;

    fn s(v: u16) -> Symbol {
        Symbol::single(v)
    }

    fn gf8_powers() -> CodeSpec {
        // points 1, alpha, alpha^2, alpha^3 with x^3 = x + 1
        CodeSpec::new(FieldSpec::with_points(3, vec![1, 2, 4, 3]).unwrap(), 2).unwrap()
    }

    /// Independent interpolation: evaluate the Lagrange polynomial through the
    /// data points directly, one target at a time, with schoolbook products.
    fn brute_encode(points: &[u16], data: &[u16]) -> Vec<u16> {
        let f = Gf2m::get(3).unwrap();
        let k = data.len();
        points
            .iter()
            .map(|&x| {
                let mut acc = 0u16;
                for i in 0..k {
                    let mut term = data[i];
                    for j in 0..k {
                        if i != j {
                            let num = x ^ points[j];
                            let den = points[i] ^ points[j];
                            term = f.mul(term, f.mul(num, f.inv(den).unwrap()));
                        }
                    }
                    acc ^= term;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zero_and_constant_data() {
        let spec = CodeSpec::for_faults(3, 4, 1).unwrap();
        let cw = spec.encode(&[s(0), s(0)]).unwrap();
        assert_eq!(cw.symbols(), &vec![s(0); 4][..]);
        for c in 0..8 {
            let cw = spec.encode(&[s(c), s(c)]).unwrap();
            assert_eq!(cw.symbols(), &vec![s(c); 4][..]);
        }
    }

    #[test]
    fn hand_interpolated_codeword() {
        // data (1, 0) -> (1, 0, alpha, alpha^2 + alpha) = (1, 0, 2, 6)
        let spec = gf8_powers();
        let cw = spec.encode(&[s(1), s(0)]).unwrap();
        assert_eq!(cw.symbols(), &[s(1), s(0), s(2), s(6)]);
    }

    #[test]
    fn encode_matches_brute_interpolation_for_all_pairs() {
        let points = [1u16, 2, 4, 3];
        let spec = gf8_powers();
        for a in 0..8 {
            for b in 0..8 {
                let cw = spec.encode(&[s(a), s(b)]).unwrap();
                let expect: Vec<Symbol> = brute_encode(&points, &[a, b]).into_iter().map(s).collect();
                assert_eq!(cw.symbols(), &expect[..]);
            }
        }
    }

    #[test]
    fn single_symbol_flip_is_detected_everywhere() {
        let spec = gf8_powers();
        let base = spec.encode(&[s(1), s(0)]).unwrap().into_symbols();
        for pos in 0..4 {
            for delta in 1..8 {
                let mut w = base.clone();
                w[pos] = s(w[pos].lanes()[0] ^ delta);
                assert!(!spec.is_codeword(&w).unwrap());
                assert_eq!(distance_to_code(&spec, &w).unwrap(), 1);
            }
        }
    }

    #[test]
    fn is_codeword_agrees_with_exhaustive_distance() {
        let spec = CodeSpec::for_faults(2, 4, 1).unwrap();
        // all 4^4 words over GF(4)
        for idx in 0..256u16 {
            let w: Vec<Symbol> = (0..4).map(|i| s((idx >> (2 * i)) & 3)).collect();
            let d = distance_to_code(&spec, &w).unwrap();
            assert_eq!(spec.is_codeword(&w).unwrap(), d == 0);
        }
        assert!(spec.is_codeword(&vec![s(0); 4][..]).unwrap());
    }

    #[test]
    fn exhaustive_minimum_distance() {
        let spec = CodeSpec::for_faults(3, 4, 1).unwrap();
        assert_eq!(min_distance_exhaustive(&spec).unwrap(), 3);
        for keep in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
            assert_eq!(punctured_min_distance_exhaustive(&spec, &keep).unwrap(), 2);
            assert_eq!(spec.puncture(&keep).unwrap().distance(), 2);
        }
    }

    #[test]
    fn punctured_code_membership() {
        let spec = CodeSpec::for_faults(3, 4, 1).unwrap();
        let full = spec.puncture(&[0, 1, 2, 3]).unwrap();
        assert_eq!(full.distance(), spec.distance());
        // keeping only the systematic positions: every word is consistent
        let sys = spec.puncture(&[0, 1]).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let w = PartialWord::new(4, [(0, s(a)), (1, s(b))]).unwrap();
                assert!(sys.contains(&w).unwrap());
            }
        }
        // three kept positions: a word is valid iff it extends a codeword
        let p = spec.puncture(&[1, 2, 3]).unwrap();
        let cw = spec.encode(&[s(5), s(3)]).unwrap();
        let ok = PartialWord::new(4, (1..4).map(|i| (i, cw.at(i).clone()))).unwrap();
        assert!(p.contains(&ok).unwrap());
        let bad = PartialWord::new(4, [(1, cw.at(1).clone()), (2, cw.at(2).clone()), (3, s(cw.at(3).lanes()[0] ^ 1))]).unwrap();
        assert!(!p.contains(&bad).unwrap());
        assert!(matches!(spec.puncture(&[2]), Err(CodeError::TooFewPositions { have: 1, need: 2 })));
        assert!(p.contains(&PartialWord::new(4, [(0, s(0)), (1, s(0)), (2, s(0))]).unwrap()).is_err());
    }

    #[test]
    fn degenerate_and_bad_inputs_rejected() {
        let field = FieldSpec::new(3, 4).unwrap();
        assert!(matches!(CodeSpec::new(field.clone(), 4), Err(CodeError::Degenerate { .. })));
        assert!(matches!(CodeSpec::new(field.clone(), 0), Err(CodeError::Degenerate { .. })));
        assert!(CodeSpec::uncoded(field).is_ok());
        assert!(matches!(FieldSpec::new(2, 5), Err(CodeError::FieldTooSmall { .. })));
        assert!(matches!(FieldSpec::with_points(3, vec![1, 1]), Err(CodeError::DuplicatePoint(1))));
        assert!(matches!(FieldSpec::with_points(3, vec![9]), Err(CodeError::PointOutOfField { .. })));
        let spec = CodeSpec::for_faults(3, 4, 1).unwrap();
        assert!(matches!(spec.encode(&[s(1)]), Err(CodeError::WrongLength { expected: 2, got: 1 })));
        assert!(matches!(spec.encode(&[s(1), s(8)]), Err(CodeError::SymbolOutOfRange { position: 1 })));
        assert!(matches!(spec.is_codeword(&vec![s(0); 3]), Err(CodeError::WrongLength { .. })));
        assert!(PartialWord::new(4, [(4, s(0))]).is_err());
        assert!(PartialWord::new(4, [(1, s(0)), (1, s(1))]).is_err());
    }

    #[test]
    fn exhaustive_oracle_refuses_large_instances() {
        let spec = CodeSpec::for_faults(8, 7, 2).unwrap();
        assert!(matches!(min_distance_exhaustive(&spec), Err(CodeError::TooLarge { .. })));
    }

    #[test]
    fn value_packing_pads_last_symbol() {
        let spec = CodeSpec::for_faults(3, 7, 1).unwrap(); // k = 5, capacity 15
        let v = bits::from_u64(0b101_1011_1001, 11);
        let data = spec.split_value(&v).unwrap();
        assert_eq!(data.len(), 5);
        assert!(spec.padding_is_zero(&data, 11));
        assert_eq!(spec.join_value(&data, 11), v);
        let mut dirty = data.clone();
        dirty[4] = s(0b111);
        assert!(!spec.padding_is_zero(&dirty, 11));
        assert!(spec.split_value(&bits::zeros(16)).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (usize, usize, usize, u64)> {
        // (symbol bits, n, t, seed) with n > 3t, 2^lane >= n
        (1usize..=6, 0usize..=2, 0usize..4, any::<u64>()).prop_flat_map(|(extra, t, bump, seed)| {
            let n = 3 * t + 1 + bump;
            let min_bits = (usize::BITS - (n - 1).leading_zeros()).max(1) as usize;
            (Just(min_bits + extra * 7), Just(n), Just(t), Just(seed))
        })
    }

    fn pseudo_data(spec: &CodeSpec, mut seed: u64) -> Vec<Symbol> {
        let layout = spec.layout().clone();
        (0..spec.k())
            .map(|_| {
                let mut b = Bits::new();
                for _ in 0..layout.bits() {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    b.push(seed >> 63 == 1);
                }
                layout.read(&b)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn systematic_and_deterministic((m, n, t, seed) in arb_case()) {
            let spec = CodeSpec::for_faults(m, n, t).unwrap();
            let data = pseudo_data(&spec, seed);
            let a = spec.encode(&data).unwrap();
            let b = spec.encode(&data).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&a.symbols()[..spec.k()], &data[..]);
            prop_assert!(spec.is_codeword(a.symbols()).unwrap());
        }

        #[test]
        fn any_k_positions_recover_the_codeword((m, n, t, seed) in arb_case(), pick in any::<u64>()) {
            let spec = CodeSpec::for_faults(m, n, t).unwrap();
            let cw = spec.encode(&pseudo_data(&spec, seed)).unwrap();
            let mut positions: Vec<usize> = (0..n).collect();
            // deterministic shuffle from `pick`
            let mut p = pick;
            for i in (1..n).rev() {
                p = p.wrapping_mul(6364136223846793005).wrapping_add(1);
                positions.swap(i, (p >> 33) as usize % (i + 1));
            }
            let word = PartialWord::new(n, positions[..spec.k()].iter().map(|q| (*q, cw.at(*q).clone()))).unwrap();
            prop_assert_eq!(spec.complete(&word).unwrap(), Some(cw));
        }

        #[test]
        fn up_to_2t_symbol_errors_are_detected((m, n, t, seed) in arb_case(), errs in 1usize..5, pick in any::<u64>()) {
            prop_assume!(t >= 1);
            let errs = errs.min(2 * t);
            let spec = CodeSpec::for_faults(m, n, t).unwrap();
            let mut w = spec.encode(&pseudo_data(&spec, seed)).unwrap().into_symbols();
            for e in 0..errs {
                let pos = (pick as usize + e) % n;
                let lane = (pick as usize >> 8) % w[pos].lanes().len();
                w[pos].lanes_mut()[lane] ^= 1;
            }
            prop_assert!(!spec.is_codeword(&w).unwrap());
        }
    }
}

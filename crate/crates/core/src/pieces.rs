//! Fixed-width piece sets.
//!
//! Pieces are numbered `1..=k` everywhere in the public API. A [`PieceSet`]
//! stores piece `p` at bit `p - 1` of a packed `u64` vector.

use serde::{Deserialize, Serialize};

/// A piece number in `1..=k`.
pub type Piece = u32;

const WORD_BITS: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PieceSet {
    words: Vec<u64>,
    k: usize,
}

impl std::fmt::Debug for PieceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl PieceSet {
    /// Empty set over pieces `1..=k`.
    pub fn new(k: usize) -> Self {
        Self {
            words: vec![0; k.div_ceil(WORD_BITS)],
            k,
        }
    }

    /// Set holding every piece `1..=k`.
    pub fn full(k: usize) -> Self {
        let mut set = Self::new(k);
        for w in set.words.iter_mut() {
            *w = u64::MAX;
        }
        set.clear_tail();
        set
    }

    pub fn from_pieces(k: usize, pieces: impl IntoIterator<Item = Piece>) -> Self {
        let mut set = Self::new(k);
        for p in pieces {
            set.insert(p);
        }
        set
    }

    fn clear_tail(&mut self) {
        let rem = self.k % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    fn locate(&self, piece: Piece) -> (usize, u64) {
        debug_assert!(
            piece >= 1 && piece as usize <= self.k,
            "piece {piece} out of range 1..={}",
            self.k
        );
        let bit = piece as usize - 1;
        (bit / WORD_BITS, 1u64 << (bit % WORD_BITS))
    }

    /// Number of distinct pieces in the universe (`k`).
    pub fn universe(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn contains(&self, piece: Piece) -> bool {
        if piece == 0 || piece as usize > self.k {
            return false;
        }
        let (w, mask) = self.locate(piece);
        self.words[w] & mask != 0
    }

    /// Inserts `piece`; returns `true` if it was not already present.
    #[inline]
    pub fn insert(&mut self, piece: Piece) -> bool {
        let (w, mask) = self.locate(piece);
        let fresh = self.words[w] & mask == 0;
        self.words[w] |= mask;
        fresh
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.k
    }

    pub fn missing_len(&self) -> usize {
        self.k - self.len()
    }

    /// Smallest piece not in the set.
    pub fn lowest_missing(&self) -> Option<Piece> {
        for (i, &w) in self.words.iter().enumerate() {
            if w != u64::MAX {
                let bit = i * WORD_BITS + (!w).trailing_zeros() as usize;
                return (bit < self.k).then_some(bit as Piece + 1);
            }
        }
        None
    }

    /// Largest piece in the set.
    pub fn highest(&self) -> Option<Piece> {
        for (i, &w) in self.words.iter().enumerate().rev() {
            if w != 0 {
                let bit = i * WORD_BITS + (WORD_BITS - 1 - w.leading_zeros() as usize);
                return Some(bit as Piece + 1);
            }
        }
        None
    }

    /// The `rank`-th (0-based, ascending) piece among those selected by
    /// `word_fn`, which maps word index to the word of candidate bits.
    fn select_by(&self, rank: usize, word_fn: impl Fn(usize) -> u64) -> Option<Piece> {
        let mut remaining = rank;
        for i in 0..self.words.len() {
            let mut w = word_fn(i);
            let ones = w.count_ones() as usize;
            if remaining < ones {
                for _ in 0..remaining {
                    w &= w - 1;
                }
                let bit = i * WORD_BITS + w.trailing_zeros() as usize;
                return Some(bit as Piece + 1);
            }
            remaining -= ones;
        }
        None
    }

    fn tail_mask(&self, i: usize) -> u64 {
        let rem = self.k % WORD_BITS;
        if i + 1 == self.words.len() && rem != 0 {
            (1u64 << rem) - 1
        } else {
            u64::MAX
        }
    }

    /// The `rank`-th smallest piece in the set.
    pub fn nth_present(&self, rank: usize) -> Option<Piece> {
        self.select_by(rank, |i| self.words[i])
    }

    /// The `rank`-th smallest piece absent from the set.
    pub fn nth_missing(&self, rank: usize) -> Option<Piece> {
        self.select_by(rank, |i| !self.words[i] & self.tail_mask(i))
    }

    /// Size of `self \ other`.
    pub fn difference_len(&self, other: &PieceSet) -> usize {
        debug_assert_eq!(self.k, other.k);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// The `rank`-th smallest piece of `self \ other`.
    pub fn nth_in_difference(&self, other: &PieceSet, rank: usize) -> Option<Piece> {
        debug_assert_eq!(self.k, other.k);
        self.select_by(rank, |i| self.words[i] & !other.words[i])
    }

    /// Adds every piece of `other`; returns the number of pieces newly added.
    pub fn union_with(&mut self, other: &PieceSet) -> usize {
        debug_assert_eq!(self.k, other.k);
        let mut added = 0;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            added += (b & !*a).count_ones() as usize;
            *a |= b;
        }
        added
    }

    pub fn is_disjoint(&self, other: &PieceSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &PieceSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = Piece> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some((i * WORD_BITS + bit) as Piece + 1)
            })
        })
    }
}

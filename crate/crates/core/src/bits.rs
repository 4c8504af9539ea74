//! Fixed-capacity bitsets over a coordinate universe `{0, …, n−1}`.
//!
//! `CoordSet` is the working representation for family members, codeword
//! supports, and chosen coordinate sets. All set algebra is word-parallel;
//! iteration yields coordinates in ascending order.

use std::cmp::Ordering;
use std::fmt;

const WORD_BITS: usize = 64;

/// A subset of `{0, …, capacity−1}` stored as packed 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CoordSet {
    nbits: usize,
    words: Vec<u64>,
}

fn words_for(nbits: usize) -> usize {
    nbits.div_ceil(WORD_BITS)
}

impl CoordSet {
    /// Empty set on a universe of `nbits` coordinates.
    pub fn new(nbits: usize) -> Self {
        CoordSet {
            nbits,
            words: vec![0; words_for(nbits)],
        }
    }

    /// Full set `{0, …, nbits−1}`.
    pub fn full(nbits: usize) -> Self {
        let mut s = Self::new(nbits);
        for w in 0..s.words.len() {
            s.words[w] = !0;
        }
        s.clear_tail();
        s
    }

    /// Build from an iterator of coordinate indices.
    ///
    /// # Panics
    /// Panics if an index is `>= nbits`.
    pub fn from_indices<I: IntoIterator<Item = usize>>(nbits: usize, indices: I) -> Self {
        let mut s = Self::new(nbits);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn clear_tail(&mut self) {
        let used = self.nbits % WORD_BITS;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
        if self.nbits == 0 {
            self.words.clear();
        }
    }

    /// Universe size this set lives on.
    pub fn capacity(&self) -> usize {
        self.nbits
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.nbits);
        self.words[i / WORD_BITS] & (1u64 << (i % WORD_BITS)) != 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.nbits, "coordinate {i} out of range 0..{}", self.nbits);
        self.words[i / WORD_BITS] |= 1u64 << (i % WORD_BITS);
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.nbits);
        self.words[i / WORD_BITS] &= !(1u64 << (i % WORD_BITS));
    }

    /// Smallest element, if any.
    pub fn first(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * WORD_BITS + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn union(&self, other: &CoordSet) -> CoordSet {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersect(&self, other: &CoordSet) -> CoordSet {
        self.zip_words(other, |a, b| a & b)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &CoordSet) -> CoordSet {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn union_with(&mut self, other: &CoordSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &CoordSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn remove_all(&mut self, other: &CoordSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// `{0,…,n−1} \ self`.
    pub fn complement(&self) -> CoordSet {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    pub fn is_subset(&self, other: &CoordSet) -> bool {
        debug_assert_eq!(self.nbits, other.nbits);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &CoordSet) -> bool {
        debug_assert_eq!(self.nbits, other.nbits);
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersection_len(&self, other: &CoordSet) -> usize {
        debug_assert_eq!(self.nbits, other.nbits);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn zip_words(&self, other: &CoordSet, f: impl Fn(u64, u64) -> u64) -> CoordSet {
        debug_assert_eq!(self.nbits, other.nbits);
        CoordSet {
            nbits: self.nbits,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Ascending iterator over elements.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * WORD_BITS + b)
                }
            })
        })
    }

    /// Sorted element list.
    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic order on the ascending element sequences.
    ///
    /// `{0,3} < {1,2}` (first elements 0 < 1) and `{0} < {0,1}` (proper
    /// prefix). Family canonical order composes this with a size key.
    pub fn lex_cmp(&self, other: &CoordSet) -> Ordering {
        let mut a = self.iter();
        let mut b = other.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) => match x.cmp(&y) {
                    Ordering::Equal => continue,
                    ord => return ord,
                },
            }
        }
    }
}

impl PartialOrd for CoordSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CoordSet {
    /// Canonical subset order: ascending size, then lexicographic by elements.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.lex_cmp(other))
    }
}

impl fmt::Debug for CoordSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

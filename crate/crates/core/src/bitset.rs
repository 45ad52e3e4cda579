//! Dense bitsets over result indices of a fixed universe.
//!
//! All set algebra in the engine (postings, elimination sets, retained
//! results) runs on these. A set is tied to the universe size it was
//! created with; binary operations require both operands to share it.

const WORD_BITS: usize = 64;

/// A fixed-width bitset indexed by result position within a universe.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ResultSet {
    len: usize,
    words: Vec<u64>,
}

impl ResultSet {
    pub fn empty(len: usize) -> Self {
        ResultSet {
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut set = Self::empty(len);
        for word in &mut set.words {
            *word = u64::MAX;
        }
        set.mask_tail();
        set
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut set = Self::empty(len);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Number of results in the universe this set ranges over.
    pub fn universe_len(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, index: usize) {
        assert!(index < self.len, "index {index} out of range {}", self.len);
        self.words[index / WORD_BITS] |= 1 << (index % WORD_BITS);
    }

    pub fn remove(&mut self, index: usize) {
        assert!(index < self.len, "index {index} out of range {}", self.len);
        self.words[index / WORD_BITS] &= !(1 << (index % WORD_BITS));
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.len && self.words[index / WORD_BITS] & (1 << (index % WORD_BITS)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersect(&self, other: &ResultSet) -> ResultSet {
        let mut out = self.clone();
        out.intersect_with(other);
        out
    }

    pub fn union(&self, other: &ResultSet) -> ResultSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn difference(&self, other: &ResultSet) -> ResultSet {
        let mut out = self.clone();
        out.subtract(other);
        out
    }

    pub fn intersect_with(&mut self, other: &ResultSet) {
        self.check(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &ResultSet) {
        self.check(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn subtract(&mut self, other: &ResultSet) {
        self.check(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// Complement within the universe.
    pub fn complement(&self) -> ResultSet {
        let mut out = self.clone();
        for word in &mut out.words {
            *word = !*word;
        }
        out.mask_tail();
        out
    }

    /// True if the two sets share at least one member.
    pub fn intersects(&self, other: &ResultSet) -> bool {
        self.check(other);
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset_of(&self, other: &ResultSet) -> bool {
        self.check(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Ascending iterator over member indices.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let tz = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(wi * WORD_BITS + tz)
                }
            })
        })
    }

    fn mask_tail(&mut self) {
        let tail = self.len % WORD_BITS;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    fn check(&self, other: &ResultSet) {
        assert_eq!(
            self.len, other.len,
            "bitsets range over different universes"
        );
    }
}

impl std::fmt::Debug for ResultSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

//! Integer texts over the alphabet `[0, n)` with implicit `-1` padding.

use crate::error::{Error, Result};
use crate::symbol::Symbol;

/// A string over `[0, n)`. Reads past the end yield `-1`, which orders
/// before every real character; the padding is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Text<C = i32> {
    chars: Vec<C>,
}

impl<C: Symbol> Text<C> {
    /// Wraps an already-encoded string, checking `0 <= c < n` for every character.
    pub fn from_symbols(chars: Vec<C>) -> Result<Self> {
        let n = chars.len();
        for (index, &c) in chars.iter().enumerate() {
            if c < C::zero() || c.to_usize().is_none_or(|u| u >= n) {
                return Err(Error::SymbolOutOfRange {
                    index,
                    value: c.to_i64().unwrap_or(i64::MAX),
                    bound: n,
                });
            }
        }
        Ok(Self { chars })
    }

    pub(crate) fn from_symbols_unchecked(chars: Vec<C>) -> Self {
        debug_assert!(chars.iter().all(|&c| c >= C::zero()));
        Self { chars }
    }

    /// Replaces every byte by its rank among the distinct bytes of `raw`.
    pub fn encode_bytes(raw: &[u8]) -> Self {
        let mut seen = [false; 256];
        for &b in raw {
            seen[b as usize] = true;
        }
        let mut rank = [0usize; 256];
        let mut next = 0;
        for (b, present) in seen.iter().enumerate() {
            if *present {
                rank[b] = next;
                next += 1;
            }
        }
        let chars = raw
            .iter()
            .map(|&b| C::from_index(rank[b as usize]))
            .collect();
        Self { chars }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// The character at `i`, or `-1` when `i >= n`.
    #[inline]
    pub fn char_at(&self, i: usize) -> C {
        self.chars.get(i).copied().unwrap_or_else(C::padding)
    }

    #[inline]
    pub fn as_slice(&self) -> &[C] {
        &self.chars
    }

    pub fn into_vec(self) -> Vec<C> {
        self.chars
    }

    /// One past the largest character, i.e. the number of counting-sort
    /// buckets needed for the stored characters.
    pub fn alphabet_bound(&self) -> usize {
        self.chars.iter().map(|c| c.bucket()).max().unwrap_or(0)
    }

    pub fn to_words(&self) -> Vec<i64> {
        self.chars.iter().map(|c| c.to_word()).collect()
    }
}

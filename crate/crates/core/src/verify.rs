//! Linear-time suffix array checker.

use thiserror::Error;

use crate::symbol::Symbol;
use crate::text::Text;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("length mismatch: text has {text} characters, suffix array has {sa} entries")]
    LengthMismatch { text: usize, sa: usize },

    #[error("not a permutation: entry {value} at position {pos}")]
    NotPermutation { pos: usize, value: usize },

    #[error("order violation between positions {pos} and {}", pos + 1)]
    OrderViolation { pos: usize },
}

/// Checks that `sa` is the suffix array of `t`.
///
/// Adjacent suffixes are compared by first character and then by the rank
/// of their successors, so the whole check is O(n).
pub fn verify_suffix_array<C: Symbol>(t: &Text<C>, sa: &[usize]) -> Result<(), VerifyError> {
    let n = t.len();
    if sa.len() != n {
        return Err(VerifyError::LengthMismatch {
            text: n,
            sa: sa.len(),
        });
    }
    // rank[n] stands for the empty suffix and is below everything
    let mut rank = vec![usize::MAX; n + 1];
    for (pos, &i) in sa.iter().enumerate() {
        if i >= n || rank[i] != usize::MAX {
            return Err(VerifyError::NotPermutation { pos, value: i });
        }
        rank[i] = pos + 1;
    }
    rank[n] = 0;
    for (pos, w) in sa.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let ok = match t.char_at(a).cmp(&t.char_at(b)) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => rank[a + 1] < rank[b + 1],
        };
        if !ok {
            return Err(VerifyError::OrderViolation { pos });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Text<i32> {
        Text::encode_bytes(b"acbaacedbbea")
    }

    #[test]
    fn accepts_worked_example() {
        let sa = [11, 3, 0, 4, 2, 8, 9, 1, 5, 7, 10, 6];
        assert_eq!(verify_suffix_array(&example(), &sa), Ok(()));
    }

    #[test]
    fn distinguishes_failures() {
        let t = example();
        let mut sa = vec![11, 3, 0, 4, 2, 8, 9, 1, 5, 7, 10, 6];
        assert!(matches!(
            verify_suffix_array(&t, &sa[1..]),
            Err(VerifyError::LengthMismatch { text: 12, sa: 11 })
        ));
        sa.swap(4, 5);
        assert_eq!(
            verify_suffix_array(&t, &sa),
            Err(VerifyError::OrderViolation { pos: 4 })
        );
        sa.swap(4, 5);
        sa[1] = 0;
        assert!(matches!(
            verify_suffix_array(&t, &sa),
            Err(VerifyError::NotPermutation { pos: 2, value: 0 })
        ));
        sa[1] = 12;
        assert!(matches!(
            verify_suffix_array(&t, &sa),
            Err(VerifyError::NotPermutation { pos: 1, .. })
        ));
    }

    #[test]
    fn empty_and_periodic() {
        let e: Text<i32> = Text::encode_bytes(b"");
        assert_eq!(verify_suffix_array(&e, &[]), Ok(()));
        let t: Text<i32> = Text::encode_bytes(b"aaaa");
        assert_eq!(verify_suffix_array(&t, &[3, 2, 1, 0]), Ok(()));
        assert!(verify_suffix_array(&t, &[0, 1, 2, 3]).is_err());
    }
}

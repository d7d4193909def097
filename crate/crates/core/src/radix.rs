//! Stable counting sort and LSD radix sorting of fixed-width integer rows.
//!
//! Keys are sorted with the padding value `-1` below every real value. When a
//! column's value range is much larger than the number of items it is split
//! into digits so that each pass stays `O(m + 2^bits)`.

use crate::error::{Error, Result};
use crate::symbol::Symbol;

const MIN_DIGIT_BITS: u32 = 8;
const MAX_DIGIT_BITS: u32 = 20;

/// Returns the permutation that stably sorts `keys`, each of which must lie
/// in `[-1, bound)`.
pub fn stable_counting_sort<C: Symbol>(keys: &[C], bound: usize) -> Result<Vec<usize>> {
    for (index, &k) in keys.iter().enumerate() {
        if k < C::padding() || k.bucket() > bound {
            return Err(Error::KeyOutOfRange {
                index,
                value: k.to_i64().unwrap_or(i64::MAX),
                bound,
            });
        }
    }
    let mut order: Vec<usize> = (0..keys.len()).collect();
    sort_by_columns(&mut order, 1, bound + 1, |i, _| keys[i].bucket());
    Ok(order)
}

/// `m` rows of common width whose entries lie in `[-1, bound)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTable<C = i32> {
    width: usize,
    bound: usize,
    data: Vec<C>,
}

impl<C: Symbol> RowTable<C> {
    pub fn new(width: usize, bound: usize, data: Vec<C>) -> Result<Self> {
        if width == 0 {
            if !data.is_empty() {
                return Err(Error::WidthMismatch {
                    row: 0,
                    expected: 0,
                    found: data.len(),
                });
            }
        } else if !data.len().is_multiple_of(width) {
            return Err(Error::WidthMismatch {
                row: data.len() / width,
                expected: width,
                found: data.len() % width,
            });
        }
        for (index, &c) in data.iter().enumerate() {
            if c < C::padding() || c.bucket() > bound {
                return Err(Error::KeyOutOfRange {
                    index,
                    value: c.to_i64().unwrap_or(i64::MAX),
                    bound,
                });
            }
        }
        Ok(Self { width, bound, data })
    }

    pub fn from_rows(rows: &[Vec<C>], bound: usize) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(width * rows.len());
        for (row, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::WidthMismatch {
                    row,
                    expected: width,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(width, bound, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Sorted order of a row table plus the dense rank of every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedRows {
    /// Row indices in ascending lexicographic order, ties by index.
    pub order: Vec<usize>,
    /// `ranks[i]` is the dense rank of row `i`; equal rows share a rank.
    pub ranks: Vec<usize>,
    /// Number of distinct rows.
    pub distinct: usize,
    /// Elementary operations spent by the counting passes.
    pub ops: u64,
}

pub fn radix_rank_rows<C: Symbol>(table: &RowTable<C>) -> RankedRows {
    let w = table.width;
    let mut order: Vec<usize> = (0..table.len()).collect();
    let ops = sort_by_columns(&mut order, w, table.bound + 1, |i, c| {
        table.data[i * w + c].bucket()
    });
    let (ranks, distinct) = dense_ranks(&order, |a, b| table.row(a) == table.row(b));
    RankedRows {
        order,
        ranks,
        distinct,
        ops: ops + table.data.len() as u64,
    }
}

/// Assigns dense ranks along a sorted order: `same(a, b)` tells whether
/// neighbouring items `a` and `b` are equal.
pub fn dense_ranks<F>(order: &[usize], same: F) -> (Vec<usize>, usize)
where
    F: Fn(usize, usize) -> bool,
{
    let mut ranks = vec![0; order.len()];
    let mut next = 0;
    for (pos, &item) in order.iter().enumerate() {
        if pos > 0 && !same(order[pos - 1], item) {
            next += 1;
        }
        ranks[item] = next;
    }
    let distinct = if order.is_empty() { 0 } else { next + 1 };
    (ranks, distinct)
}

/// Stable LSD radix sort of `items` by `columns` keys, column 0 being the
/// most significant. `key(item, col)` must return a value below `bound`.
/// Returns the number of elementary operations performed.
pub fn sort_by_columns<F>(items: &mut Vec<usize>, columns: usize, bound: usize, key: F) -> u64
where
    F: Fn(usize, usize) -> usize,
{
    let m = items.len();
    if m < 2 || columns == 0 || bound <= 1 {
        return m as u64;
    }
    let bits = digit_bits(m);
    let value_bits = usize::BITS - (bound - 1).leading_zeros();
    let (digits, bits, buckets) = if bound <= 1 << bits {
        (1, bits, bound)
    } else {
        // same digit count, narrowest even split
        let digits = value_bits.div_ceil(bits);
        let bits = value_bits.div_ceil(digits);
        (digits, bits, 1usize << bits)
    };
    let mask = buckets - 1;

    let mut scratch = vec![0usize; m];
    let mut digit = vec![0u32; m];
    let mut counts = vec![0usize; buckets + 1];
    let mut ops = 0u64;
    for col in (0..columns).rev() {
        for d in 0..digits {
            let shift = d * bits;
            for (slot, &it) in digit.iter_mut().zip(items.iter()) {
                let k = key(it, col);
                debug_assert!(k < bound, "key {k} exceeds bound {bound}");
                *slot = if digits == 1 { k } else { (k >> shift) & mask } as u32;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for &g in &digit {
                counts[g as usize + 1] += 1;
            }
            for b in 1..=buckets {
                counts[b] += counts[b - 1];
            }
            for (&it, &g) in items.iter().zip(digit.iter()) {
                scratch[counts[g as usize]] = it;
                counts[g as usize] += 1;
            }
            std::mem::swap(items, &mut scratch);
            ops += (2 * m + buckets) as u64;
        }
    }
    ops
}

fn digit_bits(m: usize) -> u32 {
    let lg = usize::BITS - m.leading_zeros();
    lg.clamp(MIN_DIGIT_BITS, MAX_DIGIT_BITS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counting_sort_examples() {
        assert_eq!(
            stable_counting_sort(&[0i32, 2, 1, 0], 3).unwrap(),
            vec![0, 3, 2, 1]
        );
        assert_eq!(
            stable_counting_sort(&[5i32, 5, 5], 6).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(stable_counting_sort(&[-1i64, 0], 1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn counting_sort_rejects_out_of_range() {
        assert!(stable_counting_sort(&[0i32, 3], 3).is_err());
        assert!(stable_counting_sort(&[-2i32], 3).is_err());
    }

    #[test]
    fn rank_rows_examples() {
        let t = RowTable::from_rows(&[vec![1i32, 2], vec![0, 3], vec![1, 2]], 4).unwrap();
        let r = radix_rank_rows(&t);
        assert_eq!(r.ranks, vec![1, 0, 1]);
        assert_eq!(r.order, vec![1, 0, 2]);
        assert_eq!(r.distinct, 2);

        let single = RowTable::from_rows(&[vec![7i32]], 8).unwrap();
        assert_eq!(radix_rank_rows(&single).ranks, vec![0]);

        let sorted = RowTable::from_rows(&[vec![0i32, 0], vec![0, 1], vec![2, -1]], 3).unwrap();
        assert_eq!(radix_rank_rows(&sorted).ranks, vec![0, 1, 2]);
    }

    #[test]
    fn width_mismatch_is_reported() {
        let err = RowTable::from_rows(&[vec![1i32, 2], vec![0]], 4).unwrap_err();
        assert!(matches!(err, Error::WidthMismatch { row: 1, .. }));
    }

    #[test]
    fn wide_values_are_split_into_digits() {
        let keys: Vec<usize> = (0..1000)
            .map(|i| (i * 7919 * 104_729) % 5_000_000)
            .collect();
        let mut order: Vec<usize> = (0..keys.len()).collect();
        sort_by_columns(&mut order, 1, 5_000_000, |i, _| keys[i]);
        let mut expect: Vec<usize> = (0..keys.len()).collect();
        expect.sort_by_key(|&i| keys[i]);
        assert_eq!(order, expect);
    }

    fn table_strategy() -> impl Strategy<Value = (usize, usize, Vec<Vec<i32>>)> {
        (1usize..=5, 1usize..=10).prop_flat_map(|(w, k)| {
            let row = proptest::collection::vec(-1i32..k as i32, w);
            (Just(w), Just(k), proptest::collection::vec(row, 0..=200))
        })
    }

    proptest! {
        #[test]
        fn agrees_with_comparison_sort((w, k, rows) in table_strategy()) {
            let t = RowTable::from_rows(&rows, k).unwrap();
            prop_assert_eq!(t.width(), if rows.is_empty() { 0 } else { w });
            let r = radix_rank_rows(&t);
            let mut expect: Vec<usize> = (0..rows.len()).collect();
            expect.sort_by(|&a, &b| rows[a].cmp(&rows[b]).then(a.cmp(&b)));
            prop_assert_eq!(&r.order, &expect);
            for a in 0..rows.len() {
                for b in 0..rows.len() {
                    prop_assert_eq!(rows[a].cmp(&rows[b]), r.ranks[a].cmp(&r.ranks[b]));
                }
            }
            let m = rows.len() as u64;
            // one counting pass per column, each touching every row twice
            prop_assert!(r.ops <= 4 * (w as u64) * m.max(1) + (w as u64) * (k as u64 + 2) + m * w as u64);
        }
    }
}

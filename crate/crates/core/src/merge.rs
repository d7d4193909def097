//! k-way merging of sorted runs with a loser tree.

use std::cmp::Ordering;

/// Merges sorted `runs` under `cmp`. Elements comparing equal keep run order.
/// Returns the merged sequence and the number of comparator calls.
pub fn multiway_merge<T, F>(runs: &[&[T]], mut cmp: F) -> (Vec<T>, u64)
where
    T: Copy,
    F: FnMut(&T, &T) -> Ordering,
{
    let total: usize = runs.iter().map(|r| r.len()).sum();
    let mut out = Vec::with_capacity(total);
    match runs.len() {
        0 => return (out, 0),
        1 => {
            out.extend_from_slice(runs[0]);
            return (out, 0);
        }
        _ => {}
    }

    let k = runs.len();
    let mut cursor = vec![0usize; k];
    let mut calls = 0u64;
    // does run a's head precede run b's head?
    let mut beats = |a: usize, b: usize, cursor: &[usize]| -> bool {
        let (ha, hb) = (runs[a].get(cursor[a]), runs[b].get(cursor[b]));
        match (ha, hb) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(x), Some(y)) => {
                calls += 1;
                match cmp(x, y) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => a < b,
                }
            }
        }
    };

    // tree[1..k] hold losers, tree[0] the overall winner; leaves sit at k..2k
    let mut tree = vec![0usize; k];
    fn build<G: FnMut(usize, usize, &[usize]) -> bool>(
        node: usize,
        k: usize,
        tree: &mut [usize],
        cursor: &[usize],
        beats: &mut G,
    ) -> usize {
        if node >= k {
            return node - k;
        }
        let l = build(2 * node, k, tree, cursor, beats);
        let r = build(2 * node + 1, k, tree, cursor, beats);
        if beats(r, l, cursor) {
            tree[node] = l;
            r
        } else {
            tree[node] = r;
            l
        }
    }
    tree[0] = build(1, k, &mut tree, &cursor, &mut beats);

    while out.len() < total {
        let w = tree[0];
        out.push(runs[w][cursor[w]]);
        cursor[w] += 1;
        let mut winner = w;
        let mut node = (w + k) / 2;
        while node >= 1 {
            if beats(tree[node], winner, &cursor) {
                std::mem::swap(&mut tree[node], &mut winner);
            }
            node /= 2;
        }
        tree[0] = winner;
    }
    (out, calls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merges_three_runs() {
        let a = [1, 4, 9];
        let b = [2, 3, 10];
        let c = [0, 5];
        let (out, _) = multiway_merge(&[&a[..], &b[..], &c[..]], |x: &i32, y: &i32| x.cmp(y));
        assert_eq!(out, vec![0, 1, 2, 3, 4, 5, 9, 10]);
    }

    #[test]
    fn empty_and_single() {
        let (out, calls) = multiway_merge::<i32, _>(&[], |x, y| x.cmp(y));
        assert!(out.is_empty() && calls == 0);
        let a = [3, 1];
        let (out, _) = multiway_merge(&[&a[..]], |x: &i32, y: &i32| x.cmp(y));
        assert_eq!(out, vec![3, 1]);
    }

    #[test]
    fn equal_keys_keep_run_order() {
        let a = [(1, 'a'), (2, 'a')];
        let b = [(1, 'b'), (2, 'b')];
        let (out, _) = multiway_merge(&[&a[..], &b[..]], |x: &(i32, char), y| x.0.cmp(&y.0));
        assert_eq!(out, vec![(1, 'a'), (1, 'b'), (2, 'a'), (2, 'b')]);
    }

    proptest! {
        #[test]
        fn matches_sorting(mut runs in proptest::collection::vec(proptest::collection::vec(0u16..50, 0..20), 0..9)) {
            for r in runs.iter_mut() {
                r.sort();
            }
            let refs: Vec<&[u16]> = runs.iter().map(|r| r.as_slice()).collect();
            let (out, calls) = multiway_merge(&refs, |x, y| x.cmp(y));
            let mut expect: Vec<u16> = runs.concat();
            expect.sort();
            prop_assert_eq!(out, expect.clone());
            let lg = (usize::BITS - runs.len().leading_zeros()) as u64;
            prop_assert!(calls <= (expect.len() as u64 + runs.len() as u64) * (lg + 1));
        }
    }
}

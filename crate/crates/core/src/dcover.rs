//! Difference covers of `Z_v` that exclude zero, with constant-time shift
//! queries.
//!
//! For `v <= 64` the lexicographically first cover of minimum size is found
//! by exhaustive search. Larger moduli use the square-root construction
//! `{0..r} ∪ {0, r, .., (r-1)r}` (`r = ⌈√v⌉`), translated so that zero is not
//! a member. Both keep `|D| = O(√v)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

const EXHAUSTIVE_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceCover {
    v: usize,
    elements: Vec<usize>,
    /// `pairs[d] = (b, a)` with `b - a ≡ d (mod v)`, lexicographically smallest.
    pairs: Vec<(usize, usize)>,
    /// Position of each residue in `elements`, or `usize::MAX`.
    slot: Vec<usize>,
}

impl DifferenceCover {
    /// Builds a cover from an explicit element set. The set must be a zero-free
    /// difference cover of `Z_v` with fewer than `v` elements.
    pub fn from_elements(v: usize, elements: &[usize]) -> Result<Self> {
        if v < 3 {
            return Err(Error::CoverModulus(v));
        }
        let mut elements = elements.to_vec();
        elements.sort_unstable();
        elements.dedup();
        if elements.first() == Some(&0)
            || elements.iter().any(|&e| e >= v)
            || elements.len() >= v
            || !is_cover(&elements, v)
        {
            return Err(Error::CoverModulus(v));
        }

        let mut pairs = vec![(usize::MAX, usize::MAX); v];
        for &b in &elements {
            for &a in &elements {
                let d = (b + v - a) % v;
                if pairs[d].0 == usize::MAX {
                    pairs[d] = (b, a);
                }
            }
        }
        let mut slot = vec![usize::MAX; v];
        for (t, &e) in elements.iter().enumerate() {
            slot[e] = t;
        }
        Ok(Self {
            v,
            elements,
            pairs,
            slot,
        })
    }

    #[inline]
    pub fn modulus(&self) -> usize {
        self.v
    }

    #[inline]
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    #[inline]
    pub fn contains(&self, residue: usize) -> bool {
        self.slot[residue % self.v] != usize::MAX
    }

    /// Index of `residue` within [`elements`](Self::elements).
    #[inline]
    pub fn position(&self, residue: usize) -> Option<usize> {
        let t = self.slot[residue % self.v];
        (t != usize::MAX).then_some(t)
    }

    /// Witness pair `(b, a)` with `b - a ≡ d (mod v)`.
    #[inline]
    pub fn witness(&self, d: usize) -> (usize, usize) {
        self.pairs[d % self.v]
    }

    /// A shift `λ ∈ [0, v)` such that `k1 + λ` and `k2 + λ` both fall in the
    /// cover modulo `v`.
    #[inline]
    pub fn shift_for_pair(&self, k1: usize, k2: usize) -> usize {
        let v = self.v;
        let (k1, k2) = (k1 % v, k2 % v);
        let (_, a) = self.pairs[(k2 + v - k1) % v];
        (a + v - k1) % v
    }

    /// Smallest `l ∈ [1, v)` with `k + l` in the cover modulo `v`.
    pub fn first_step_into(&self, k: usize) -> usize {
        (1..self.v)
            .find(|&l| self.contains(k + l))
            .expect("a cover with at least one element is reachable from every residue")
    }
}

/// True iff every residue in `[0, v)` is a difference of two members.
pub fn is_cover(candidate: &[usize], v: usize) -> bool {
    if v == 0 {
        return false;
    }
    let mut hit = vec![false; v];
    let mut missing = v;
    for &b in candidate {
        for &a in candidate {
            let d = (b % v + v - a % v) % v;
            if !hit[d] {
                hit[d] = true;
                missing -= 1;
            }
        }
    }
    missing == 0
}

/// Upper bound on cover sizes produced by [`build_cover`].
pub fn size_bound(v: usize) -> f64 {
    3.0 * (v as f64).sqrt() + 6.0
}

/// Returns a zero-free difference cover of `Z_v`. Results are memoised per
/// modulus, so repeated calls are cheap.
pub fn build_cover(v: usize) -> Result<Arc<DifferenceCover>> {
    if v < 3 {
        return Err(Error::CoverModulus(v));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DifferenceCover>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(dc) = cache.lock().unwrap().get(&v) {
        return Ok(Arc::clone(dc));
    }
    let elements = if v <= EXHAUSTIVE_LIMIT {
        minimum_cover(v)
    } else {
        sqrt_cover(v)
    };
    let dc = Arc::new(DifferenceCover::from_elements(v, &elements)?);
    cache.lock().unwrap().insert(v, Arc::clone(&dc));
    Ok(dc)
}

fn sqrt_cover(v: usize) -> Vec<usize> {
    let mut r = (v as f64).sqrt() as usize;
    while r * r < v {
        r += 1;
    }
    let mut member = vec![false; v];
    for j in 0..r {
        member[j % v] = true;
        member[(j * r) % v] = true;
    }
    let z = member
        .iter()
        .position(|&m| !m)
        .expect("cover is smaller than the modulus");
    let mut out: Vec<usize> = (0..v)
        .filter(|&d| member[d])
        .map(|d| (d + v - z) % v)
        .collect();
    out.sort_unstable();
    out
}

fn minimum_cover(v: usize) -> Vec<usize> {
    debug_assert!(v <= EXHAUSTIVE_LIMIT);
    // |D|(|D|-1) + 1 >= v
    let mut k = 1;
    while k * (k - 1) + 1 < v {
        k += 1;
    }
    loop {
        let mut chosen = vec![1usize];
        // the difference 0 is always covered
        if search(v, k, &mut chosen, 1u128) {
            return chosen;
        }
        k += 1;
    }
}

fn search(v: usize, k: usize, chosen: &mut Vec<usize>, covered: u128) -> bool {
    let full = if v == 128 {
        u128::MAX
    } else {
        (1u128 << v) - 1
    };
    if chosen.len() == k {
        return covered == full;
    }
    let left = k - chosen.len();
    // each added element contributes at most 2 * (current size) new differences
    let reachable: usize = (0..left).map(|j| 2 * (chosen.len() + j)).sum();
    if ((full & !covered).count_ones() as usize) > reachable {
        return false;
    }
    let start = chosen.last().copied().unwrap_or(0) + 1;
    for e in start..v {
        if v - e < left {
            break;
        }
        let mut next = covered;
        for &a in chosen.iter() {
            next |= 1u128 << (e - a);
            next |= 1u128 << (v - (e - a));
        }
        chosen.push(e);
        if search(v, k, chosen, next) {
            return true;
        }
        chosen.pop();
    }
    false
}

//! Sequential suffix array construction: a naive comparison sort used as the
//! reference, and the recursive difference-cover algorithm whose sampling
//! modulus `v` may change from one recursion level to the next.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dcover::{build_cover, DifferenceCover};
use crate::error::{Error, Result};
use crate::merge::multiway_merge;
use crate::radix::{dense_ranks, sort_by_columns};
use crate::symbol::Symbol;
use crate::text::Text;

/// Suffix start positions in ascending lexicographic order of the suffixes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SuffixArray(Vec<usize>);

impl SuffixArray {
    pub fn from_vec(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `inverse[i]` is the position of suffix `i`. Panics if the entries are
    /// not a permutation of `0..len`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![usize::MAX; self.0.len()];
        for (r, &i) in self.0.iter().enumerate() {
            assert!(inv[i] == usize::MAX, "suffix {i} listed twice");
            inv[i] = r;
        }
        inv
    }
}

impl AsRef<[usize]> for SuffixArray {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

/// Sorts all suffixes by direct comparison. `O(n² log n)` in the worst case.
pub fn naive_suffix_array<C: Symbol>(t: &Text<C>) -> SuffixArray {
    SuffixArray(naive_order(t.as_slice()))
}

// Slice order already matches padded-suffix order: a proper prefix is
// followed by -1 and therefore sorts first.
fn naive_order<C: Ord>(chars: &[C]) -> Vec<usize> {
    let mut sa: Vec<usize> = (0..chars.len()).collect();
    sa.sort_unstable_by(|&a, &b| chars[a..].cmp(&chars[b..]));
    sa
}

/// How the sampling modulus evolves over recursion levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VSchedule {
    /// The same `v` at every level.
    Fixed(usize),
    /// Start at 3 and raise `v` to `⌈v^{5/4}⌉` at each level.
    Accelerated,
    /// Explicit per-level requests; the last entry repeats.
    Custom(Vec<usize>),
}

impl Default for VSchedule {
    fn default() -> Self {
        Self::Fixed(3)
    }
}

impl VSchedule {
    /// Requested modulus for the top level; the caller clamps it into `[3, n]`.
    pub fn initial(&self) -> usize {
        match self {
            Self::Fixed(v) => *v,
            Self::Accelerated => 3,
            Self::Custom(vs) => vs.first().copied().unwrap_or(3),
        }
    }

    /// Modulus for the level below one running with `v` and a cover of
    /// `cover_len` elements, clamped into the range that keeps the total
    /// work linear (see [`legal_next_range`]).
    pub fn next(&self, level: usize, v: usize, cover_len: usize, xlen: usize) -> usize {
        let want = match self {
            Self::Fixed(v0) => *v0,
            Self::Accelerated => ceil_pow_five_quarters(v),
            Self::Custom(vs) => vs
                .get(level + 1)
                .or_else(|| vs.last())
                .copied()
                .unwrap_or(3),
        };
        let (lo, hi) = legal_next_range(v, cover_len, xlen);
        if hi < lo {
            lo
        } else {
            want.clamp(lo, hi)
        }
    }
}

impl fmt::Display for VSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "fixed:{v}"),
            Self::Accelerated => write!(f, "accel"),
            Self::Custom(vs) => {
                write!(f, "custom:")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for VSchedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parse_v = |x: &str| -> std::result::Result<usize, String> {
            let v: usize = x.trim().parse().map_err(|_| format!("bad modulus {x:?}"))?;
            if v < 3 {
                return Err(format!("modulus must be at least 3, got {v}"));
            }
            Ok(v)
        };
        match s.split_once(':') {
            None if s == "accel" || s == "accelerated" => Ok(Self::Accelerated),
            Some(("fixed", v)) => Ok(Self::Fixed(parse_v(v)?)),
            Some(("custom", vs)) => Ok(Self::Custom(
                vs.split(',')
                    .map(parse_v)
                    .collect::<std::result::Result<_, _>>()?,
            )),
            _ => Err(format!(
                "unknown schedule {s:?}; expected fixed:V, accel or custom:V,V,.."
            )),
        }
    }
}

/// `⌈v^{5/4}⌉`, computed exactly as the least `w` with `w⁴ >= v⁵`.
pub fn ceil_pow_five_quarters(v: usize) -> usize {
    let guess = (v as f64).powf(1.25).ceil() as u128;
    let target = (v as u128).checked_pow(5);
    let Some(target) = target else {
        return guess as usize;
    };
    let fourth = |w: u128| w.checked_pow(4).unwrap_or(u128::MAX);
    let mut w = guess.max(1);
    while fourth(w) < target {
        w += 1;
    }
    while w > 1 && fourth(w - 1) >= target {
        w -= 1;
    }
    w as usize
}

/// Legal range `[3, hi]` for the next modulus, where `hi` is the largest
/// integer strictly below `v²/|D|`, capped at the recursive input length.
pub fn legal_next_range(v: usize, cover_len: usize, xlen: usize) -> (usize, usize) {
    let below = (v * v).div_ceil(cover_len.max(1)) - 1;
    (3, below.min(xlen))
}

/// Per-level record of a traced construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    pub v: usize,
    pub cover_len: usize,
    pub n: usize,
    /// Elementary operations at this level, excluding deeper levels.
    pub ops: u64,
}

/// The sampled string of v-grams, grouped by residue class.
#[derive(Debug, Clone)]
pub struct SuperString<C> {
    width: usize,
    /// Row-major v-grams, one row per sample position.
    pub rows: Vec<C>,
    /// Source position of each row; a trailing all-padding row has origin `n`.
    pub origins: Vec<usize>,
    /// Dense rank of each row among all rows.
    pub encoded: Vec<usize>,
    /// Rows in ascending order.
    pub order: Vec<usize>,
    pub distinct: usize,
    pub ops: u64,
}

impl<C: Symbol> SuperString<C> {
    #[inline]
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C] {
        &self.rows[r * self.width..(r + 1) * self.width]
    }

    /// The encoded string over `[0, |X|)`.
    pub fn encoded_text(&self) -> Text<C> {
        Text::from_symbols_unchecked(self.encoded.iter().map(|&r| C::from_index(r)).collect())
    }
}

/// Sample positions `C = {i < n : i mod v ∈ D}` and the rank array of length
/// `n + v` that holds each sample suffix's rank among all sample suffixes.
#[derive(Debug, Clone)]
pub struct SampleDecomposition {
    cover: Arc<DifferenceCover>,
    n: usize,
    rank: Vec<i64>,
}

impl SampleDecomposition {
    pub fn new(n: usize, cover: Arc<DifferenceCover>) -> Self {
        let v = cover.modulus();
        Self {
            cover,
            n,
            rank: vec![-1; n + v],
        }
    }

    #[inline]
    pub fn cover(&self) -> &DifferenceCover {
        &self.cover
    }

    #[inline]
    pub fn rank(&self) -> &[i64] {
        &self.rank
    }

    /// Positions in residue class `k`.
    pub fn class(&self, k: usize) -> impl Iterator<Item = usize> {
        (k..self.n).step_by(self.cover.modulus())
    }

    pub fn sample_len(&self) -> usize {
        self.cover
            .elements()
            .iter()
            .map(|&k| class_len(self.n, self.cover.modulus(), k))
            .sum()
    }

    /// Records ranks from the sorted order of the sampled string, skipping
    /// the padding row.
    pub fn record_sample_order(&mut self, origins: &[usize], sa_x: &[usize]) {
        let mut r = 0;
        for &j in sa_x {
            let i = origins[j];
            if i < self.n {
                self.rank[i] = r;
                r += 1;
            }
        }
    }
}

#[inline]
fn class_len(n: usize, v: usize, k: usize) -> usize {
    if k >= n {
        0
    } else {
        (n - k).div_ceil(v)
    }
}

/// Builds the string of v-grams `x[i..i+v)` for `i ∈ B_k`, classes `k ∈ D`
/// in ascending order, and encodes it by dense ranks.
///
/// When `n mod v` is itself in the cover, the last v-gram of that class has
/// no padding, so an all-padding row for position `n` is appended to the
/// class. Every class block then ends in a row holding `-1`.
pub fn build_sample_string<C: Symbol>(t: &Text<C>, dc: &DifferenceCover) -> SuperString<C> {
    let chars = t.as_slice();
    let n = chars.len();
    let v = dc.modulus();
    debug_assert!(v <= n.max(v));
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for &k in dc.elements() {
        let mut i = k;
        while i < n {
            push_gram(chars, i, v, &mut rows);
            origins.push(i);
            i += v;
        }
        if i == n {
            push_gram(chars, n, v, &mut rows);
            origins.push(n);
        }
    }
    let m = origins.len();
    let bound = t.alphabet_bound() + 1;
    let mut order: Vec<usize> = (0..m).collect();
    let ops = sort_by_columns(&mut order, v, bound, |r, c| rows[r * v + c].bucket());
    let (encoded, distinct) = dense_ranks(&order, |a, b| {
        rows[a * v..(a + 1) * v] == rows[b * v..(b + 1) * v]
    });
    SuperString {
        width: v,
        rows,
        origins,
        encoded,
        order,
        distinct,
        ops: ops + (m * v) as u64,
    }
}

#[inline]
fn push_gram<C: Symbol>(chars: &[C], i: usize, v: usize, out: &mut Vec<C>) {
    for c in i..i + v {
        out.push(chars.get(c).copied().unwrap_or_else(C::padding));
    }
}

/// Orders the non-sample classes. For each `k ∉ D` with the smallest
/// `l_k ≥ 1` such that `k + l_k ∈ D`, the suffixes of `B_k` are sorted by
/// `(x[i], .., x[i+l_k-1], rank[i+l_k])`. Sample classes yield empty lists.
pub fn order_nonsample<C: Symbol>(t: &Text<C>, d: &SampleDecomposition) -> (Vec<Vec<usize>>, u64) {
    let chars = t.as_slice();
    let dc = d.cover();
    let v = dc.modulus();
    let rank = d.rank();
    let bound = t.alphabet_bound().max(d.sample_len()) + 1;
    let mut out = vec![Vec::new(); v];
    let mut ops = 0;
    for (k, slot) in out.iter_mut().enumerate() {
        if dc.contains(k) {
            continue;
        }
        let l = dc.first_step_into(k);
        let mut items: Vec<usize> = d.class(k).collect();
        ops += sort_by_columns(&mut items, l + 1, bound, |i, c| {
            if c < l {
                chars.get(i + c).map_or(0, |x| x.bucket())
            } else {
                (rank[i + l] + 1) as usize
            }
        });
        *slot = items;
    }
    (out, ops)
}

/// Suffixes grouped by their first `v` characters, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Groups {
    /// Suffixes sorted by v-gram, ties by position.
    pub order: Vec<usize>,
    /// Start offsets of each group in `order`, followed by `order.len()`.
    pub bounds: Vec<usize>,
    pub ops: u64,
}

impl Groups {
    pub fn count(&self) -> usize {
        self.bounds.len().saturating_sub(1)
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.order[self.bounds[g]..self.bounds[g + 1]]
    }
}

/// Radix-sorts all suffixes by `x[i..i+v)` and splits them into groups of
/// equal v-grams.
pub fn prefix_partition<C: Symbol>(t: &Text<C>, v: usize) -> Groups {
    let chars = t.as_slice();
    let n = chars.len();
    let gram = |i: usize, c: usize| chars.get(i + c).map_or(0, |x| x.bucket());
    let mut order: Vec<usize> = (0..n).collect();
    let ops = sort_by_columns(&mut order, v, t.alphabet_bound() + 1, gram);
    let mut bounds = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 || (0..v).any(|c| gram(i, c) != gram(order[pos - 1], c)) {
            bounds.push(pos);
        }
    }
    bounds.push(n);
    Groups {
        order,
        bounds,
        ops: ops + (n * v) as u64,
    }
}

/// Completes the suffix order. Inside each group the per-class subsequences,
/// already ordered by `class_orders`, are merged with a loser tree whose
/// comparator looks at `rank[i+λ]` and `rank[j+λ]` for the shift `λ` that
/// lands both residues in the cover.
pub fn merge_groups(
    groups: &Groups,
    class_orders: &[Vec<usize>],
    rank: &[i64],
    dc: &DifferenceCover,
) -> Result<(SuffixArray, u64)> {
    let n = groups.order.len();
    let v = dc.modulus();
    let mut gid = vec![0usize; n];
    for g in 0..groups.count() {
        for &i in groups.group(g) {
            gid[i] = g;
        }
    }
    let mut seq: Vec<usize> = class_orders.iter().flatten().copied().collect();
    debug_assert_eq!(seq.len(), n);
    let mut ops = sort_by_columns(&mut seq, 1, groups.count().max(1), |i, _| gid[i]);

    let mut sa = Vec::with_capacity(n);
    let mut corrupt = None;
    for g in 0..groups.count() {
        let part = &seq[groups.bounds[g]..groups.bounds[g + 1]];
        let mut runs: Vec<&[usize]> = Vec::new();
        let mut start = 0;
        for p in 1..=part.len() {
            if p == part.len() || part[p] % v != part[start] % v {
                runs.push(&part[start..p]);
                start = p;
            }
        }
        if runs.len() <= 1 {
            sa.extend_from_slice(part);
        } else if runs.iter().all(|r| dc.contains(r[0] % v)) {
            let mut all = part.to_vec();
            all.sort_unstable_by_key(|&i| rank[i]);
            ops += all.len() as u64;
            sa.extend(all);
        } else {
            let (merged, calls) = multiway_merge(&runs, |&a, &b| {
                let l = dc.shift_for_pair(a % v, b % v);
                let (ra, rb) = (rank[a + l], rank[b + l]);
                if ra == rb && corrupt.is_none() {
                    corrupt = Some((a, b));
                }
                ra.cmp(&rb)
            });
            if let Some((a, b)) = corrupt {
                return Err(Error::RankCorruption(a, b));
            }
            ops += calls + merged.len() as u64;
            sa.extend(merged);
        }
    }
    Ok((SuffixArray(sa), ops + n as u64))
}

/// Difference-cover suffix array construction.
pub fn dc_suffix_array<C: Symbol>(t: &Text<C>, sched: &VSchedule) -> SuffixArray {
    dc_suffix_array_traced(t, sched).0
}

/// As [`dc_suffix_array`], also returning one [`LevelStats`] per level.
pub fn dc_suffix_array_traced<C: Symbol>(
    t: &Text<C>,
    sched: &VSchedule,
) -> (SuffixArray, Vec<LevelStats>) {
    let mut trace = Vec::new();
    let sa = dc_level(t, sched.initial(), sched, 0, true, &mut trace)
        .expect("sample ranks are consistent by construction");
    (SuffixArray(sa), trace)
}

fn dc_level<C: Symbol>(
    t: &Text<C>,
    v_req: usize,
    sched: &VSchedule,
    level: usize,
    check_base: bool,
    trace: &mut Vec<LevelStats>,
) -> Result<Vec<usize>> {
    let n = t.len();
    if n < 3 {
        return Ok(naive_order(t.as_slice()));
    }
    let mut ops = 0u64;
    if check_base {
        let mut order: Vec<usize> = (0..n).collect();
        let chars = t.as_slice();
        ops += sort_by_columns(&mut order, 1, t.alphabet_bound() + 1, |i, _| {
            chars[i].bucket()
        });
        if order.windows(2).all(|w| chars[w[0]] != chars[w[1]]) {
            trace.push(LevelStats {
                v: 0,
                cover_len: 0,
                n,
                ops,
            });
            return Ok(order);
        }
    }

    let v = v_req.clamp(3, n);
    let dc = build_cover(v)?;
    let slot = trace.len();
    trace.push(LevelStats {
        v,
        cover_len: dc.len(),
        n,
        ops: 0,
    });

    // step 1: sample suffixes
    let ss = build_sample_string(t, &dc);
    ops += ss.ops;
    assert!(
        ss.len() < n,
        "sampled string must shrink: {} >= {n}",
        ss.len()
    );
    let sa_x = if ss.distinct == ss.len() {
        ss.order.clone()
    } else {
        let next_v = sched.next(level, v, dc.len(), ss.len());
        dc_level(&ss.encoded_text(), next_v, sched, level + 1, false, trace)?
    };
    let mut decomposition = SampleDecomposition::new(n, Arc::clone(&dc));
    decomposition.record_sample_order(&ss.origins, &sa_x);
    ops += sa_x.len() as u64;

    // step 2: non-sample classes; sample classes come straight from sa_x
    let (mut class_orders, step2) = order_nonsample(t, &decomposition);
    ops += step2;
    for &j in &sa_x {
        let i = ss.origins[j];
        if i < n {
            class_orders[i % v].push(i);
        }
    }

    // steps 3 and 4
    let groups = prefix_partition(t, v);
    ops += groups.ops;
    let (sa, merge_ops) = merge_groups(&groups, &class_orders, decomposition.rank(), &dc)?;
    ops += merge_ops;
    trace[slot].ops += ops;
    Ok(sa.into_vec())
}

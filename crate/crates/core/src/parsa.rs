//! Suffix array construction on the simulated BSP machine with accelerated
//! sampling.
//!
//! Each recursion level sorts the sampled v-grams with the parallel sorter,
//! ranks them, and either recurses on the encoded string, finishes directly
//! when all ranks differ, or hands a small enough string to processor 0 for
//! the sequential algorithm. The non-sample classes are then sorted by
//! `v - |D|` concurrent sorts, all suffixes are grouped by their first `v`
//! characters, and each group is merged with the difference-cover
//! comparator. A group held by one processor is merged in place, one split
//! across two processors is merged on the lower one, and a wider group is
//! merged by regular sampling over the processors it spans.
//!
//! Between levels `v` grows as `min(⌈v^{5/4}⌉, |X'|)`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::sync::Arc;

use serde::Serialize;

use crate::bsp::{block_owner, BspConfig, CostLedger, ExecOrder, Machine, Proc, SlackPolicy, Word};
use crate::dcover::{build_cover, DifferenceCover};
use crate::error::{Error, Result};
use crate::merge::multiway_merge;
use crate::parsort::{sort_jobs_with, JobSpec, Rows};
use crate::seqsa::{ceil_pow_five_quarters, dc_suffix_array_traced, SuffixArray, VSchedule};
use crate::symbol::Symbol;
use crate::text::Text;

/// `max(3, min(⌈v^{5/4}⌉, xlen))`.
pub fn next_v(v: usize, xlen: usize) -> usize {
    ceil_pow_five_quarters(v).min(xlen).max(3)
}

/// Bound on the number of parallel rounds for `p` processors when starting
/// from `v = 3`: `⌈log_{5/4}(log_3 √p + 1)⌉ + 1`.
pub fn round_bound(p: usize) -> usize {
    let inner = (p as f64).sqrt().ln() / 3f64.ln() + 1.0;
    (inner.ln() / 1.25f64.ln()).ceil().max(0.0) as usize + 1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoundStats {
    /// Sampling modulus, or 0 when the level only found its characters
    /// distinct.
    pub v: usize,
    pub d: usize,
    pub n: usize,
    pub supersteps: usize,
    pub w: u64,
    pub h: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundMetrics {
    /// One entry per parallel recursion level.
    pub rounds: Vec<RoundStats>,
    /// The sequential run on processor 0, if one happened.
    pub handoff: Option<RoundStats>,
    pub total: CostLedger,
    pub warnings: Vec<String>,
}

impl RoundMetrics {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rounds": self.rounds,
            "total": self.total.to_json(),
        })
    }
}

impl Serialize for RoundMetrics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

#[derive(Debug, Clone)]
pub struct ParOptions {
    pub policy: SlackPolicy,
    pub schedule: VSchedule,
    pub order: ExecOrder,
}

impl Default for ParOptions {
    fn default() -> Self {
        Self {
            policy: SlackPolicy::Enforce,
            schedule: VSchedule::Accelerated,
            order: ExecOrder::Sequential,
        }
    }
}

/// Parallel construction with the accelerated schedule.
pub fn bsp_suffix_array<C: Symbol>(
    t: &Text<C>,
    cfg: &BspConfig,
    policy: SlackPolicy,
) -> Result<(SuffixArray, RoundMetrics)> {
    bsp_suffix_array_with(
        t,
        cfg,
        &ParOptions {
            policy,
            ..ParOptions::default()
        },
    )
}

pub fn bsp_suffix_array_with<C: Symbol>(
    t: &Text<C>,
    cfg: &BspConfig,
    opts: &ParOptions,
) -> Result<(SuffixArray, RoundMetrics)> {
    let n = t.len();
    let p = cfg.p;
    if n <= 1 {
        let sa = SuffixArray::from_vec((0..n).collect());
        return Ok((
            sa,
            RoundMetrics {
                total: CostLedger::new(p),
                ..RoundMetrics::default()
            },
        ));
    }
    if n < p {
        return Err(Error::TooFewCharacters { n, p });
    }
    let mut machine = Machine::with_order(*cfg, opts.order);
    if p > 1 {
        let have = (n as u128).saturating_mul(n as u128);
        let need = (p as u128).checked_pow(9).unwrap_or(u128::MAX);
        if have < need {
            match opts.policy {
                SlackPolicy::Enforce => {
                    return Err(Error::Slackness {
                        what: "n^2 (n must reach p^(9/2))",
                        have,
                        need,
                    })
                }
                SlackPolicy::Relaxed => {
                    machine.warn(format!("text length {n} is below p^(9/2) for p = {p}"))
                }
            }
        }
    }

    if p == 1 || n < 3 {
        return sequential_on_root(t, machine, &opts.schedule);
    }

    let words = t.to_words();
    let parts: Vec<Vec<Word>> = crate::bsp::block_ranges(n, p)
        .into_iter()
        .map(|r| words[r].to_vec())
        .collect();
    let mut driver = Driver {
        machine,
        n0: n,
        schedule: opts.schedule.clone(),
        policy: opts.policy,
        rounds: Vec::new(),
        handoff: None,
    };
    let v0 = opts.schedule.initial();
    let sa_parts = driver.level(Entry::Top(parts), n, v0, 0)?;
    let sa: Vec<usize> = sa_parts.concat();
    let Driver {
        machine,
        rounds,
        handoff,
        ..
    } = driver;
    let warnings = machine.warnings().to_vec();
    Ok((
        SuffixArray::from_vec(sa),
        RoundMetrics {
            rounds,
            handoff,
            total: machine.into_ledger(),
            warnings,
        },
    ))
}

fn sequential_on_root<C: Symbol>(
    t: &Text<C>,
    mut machine: Machine,
    schedule: &VSchedule,
) -> Result<(SuffixArray, RoundMetrics)> {
    let mut states: Vec<Vec<usize>> = vec![Vec::new(); machine.p()];
    machine.superstep(&mut states, |proc, out| {
        if proc.pid() == 0 {
            let (sa, trace) = dc_suffix_array_traced(t, schedule);
            proc.charge(trace.iter().map(|l| l.ops).sum::<u64>() + t.len() as u64);
            *out = sa.into_vec();
        }
        Ok(())
    })?;
    let ledger = machine.ledger().clone();
    let handoff = RoundStats {
        v: schedule.initial().clamp(3, t.len().max(3)),
        d: 0,
        n: t.len(),
        supersteps: ledger.supersteps(),
        w: ledger.work(),
        h: ledger.comm(),
    };
    let warnings = machine.warnings().to_vec();
    let sa = std::mem::take(&mut states[0]);
    Ok((
        SuffixArray::from_vec(sa),
        RoundMetrics {
            rounds: Vec::new(),
            handoff: Some(handoff),
            total: ledger,
            warnings,
        },
    ))
}

const T_SUMMARY: u64 = 1;
const T_HALO_X: u64 = 2;
const T_XP: u64 = 3;
const T_RANK: u64 = 4;
const T_HALO_R: u64 = 5;
const T_CKEY: u64 = 6;
const T_GSUM: u64 = 7;
const T_PLACE: u64 = 8;
const K_TWO: u64 = 9;
const K_WSAMPLE: u64 = 10;
const K_WSPLIT: u64 = 11;
const K_WBUCKET: u64 = 12;
const K_WCOUNT: u64 = 13;

#[inline]
fn group_tag(kind: u64, start_proc: usize) -> u64 {
    (kind << 32) | start_proc as u64
}

enum Entry {
    /// Text blocks held by each processor.
    Top(Vec<Vec<Word>>),
    /// Text arrives as `(position, symbol)` pairs in the inbox.
    Routed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
enum Mode {
    #[default]
    Distinct,
    Handoff,
    Recurse,
}

/// Shared, read-only description of one level.
struct Level {
    n: usize,
    p: usize,
    v: usize,
    dc: Arc<DifferenceCover>,
    /// `off[t]` is the position in `X` of the first row of class `D[t]`.
    off: Vec<usize>,
    /// 1 when an all-padding row for position `n` is part of `X`.
    pad: usize,
    /// Non-sample classes with their `l_k`.
    nonsample: Vec<(usize, usize)>,
}

impl Level {
    fn new(n: usize, p: usize, v: usize) -> Result<Self> {
        let dc = build_cover(v)?;
        let mut off = Vec::with_capacity(dc.len() + 1);
        let mut at = 0;
        let pad = usize::from(dc.contains(n % v));
        for &k in dc.elements() {
            off.push(at);
            at += (n - k).div_ceil(v) + usize::from(n % v == k);
        }
        off.push(at);
        let nonsample = (0..v)
            .filter(|&k| !dc.contains(k))
            .map(|k| (k, dc.first_step_into(k)))
            .collect();
        Ok(Self {
            n,
            p,
            v,
            dc,
            off,
            pad,
            nonsample,
        })
    }

    #[inline]
    fn m(&self) -> usize {
        *self.off.last().unwrap()
    }

    #[inline]
    fn range(&self, pid: usize) -> (usize, usize) {
        let b = self.n.div_ceil(self.p);
        ((b * pid).min(self.n), (b * (pid + 1)).min(self.n))
    }

    #[inline]
    fn owner(&self, i: usize) -> usize {
        block_owner(i, self.n, self.p)
    }

    /// Position in `X` of the sample starting at `i <= n`.
    #[inline]
    fn pos_of(&self, i: usize) -> usize {
        let k = i % self.v;
        let t = self.dc.position(k).expect("sample position");
        self.off[t] + i / self.v
    }

    #[inline]
    fn origin_of(&self, pos: usize) -> usize {
        let t = self.off.partition_point(|&o| o <= pos) - 1;
        self.dc.elements()[t] + (pos - self.off[t]) * self.v
    }

    /// Compares suffixes `a` and `b` of `pool` known to share their first
    /// `v` characters. The payload of each row holds `rank[i + λ]` for every
    /// shift landing in the cover.
    #[inline]
    fn cmp_suffix(
        &self,
        pool: &Rows,
        a: usize,
        b: usize,
        corrupt: &Cell<Option<(usize, usize)>>,
    ) -> Ordering {
        let (ia, ib) = (pool.index(a), pool.index(b));
        if ia == ib {
            return Ordering::Equal;
        }
        let v = self.v;
        let (ka, kb) = (ia % v, ib % v);
        let l = self.dc.shift_for_pair(ka, kb);
        let ta = self.dc.position(ka + l).expect("shift lands in the cover");
        let tb = self.dc.position(kb + l).expect("shift lands in the cover");
        let ord = pool.payload(a)[ta].cmp(&pool.payload(b)[tb]);
        if ord == Ordering::Equal && corrupt.get().is_none() {
            corrupt.set(Some((ia, ib)));
        }
        ord
    }
}

#[derive(Default)]
struct WideGroup {
    start_proc: usize,
    end_proc: usize,
    /// Pool ids of this processor's part, merged.
    merged: Vec<usize>,
    global_start: usize,
}

#[derive(Default)]
struct Lp {
    lo: usize,
    hi: usize,
    /// `x[lo .. min(hi + v - 1, n))`.
    x: Vec<Word>,
    /// `rank[lo .. hi + v)`, `-1` where undefined.
    rank: Vec<Word>,
    sorted: Rows,
    mode: Mode,
    distinct: bool,
    ckey: Vec<Word>,
    sub_sa: Vec<usize>,
    /// Merge pool: index and comparator payload of every suffix handled here.
    pool: Rows,
    two: Option<(usize, usize, usize)>,
    wide: Vec<WideGroup>,
    finals: Vec<(usize, usize)>,
    sa: Vec<usize>,
}

impl Lp {
    #[inline]
    fn char_at(&self, i: usize, n: usize) -> Word {
        if i < n {
            self.x[i - self.lo]
        } else {
            -1
        }
    }

    #[inline]
    fn rank_at(&self, i: usize) -> Word {
        self.rank.get(i - self.lo).copied().unwrap_or(-1)
    }
}

/// Sends to every lower processor the slice of `data` (covering `[lo, hi)`)
/// that falls into the `w` positions following its block.
fn push_halo(
    proc: &mut Proc<'_>,
    lv: &Level,
    lo: usize,
    hi: usize,
    data: &[Word],
    w: usize,
    tag: u64,
) -> Result<()> {
    if lo == hi {
        return Ok(());
    }
    for q in (0..proc.pid()).rev() {
        let (_, qhi) = lv.range(q);
        if qhi + w <= lo {
            break;
        }
        let from = qhi.max(lo);
        let to = (qhi + w).min(hi);
        if from < to {
            proc.charge((to - from) as u64);
            proc.send(q, tag, data[from - lo..to - lo].to_vec())?;
        }
    }
    Ok(())
}

fn read_concat(proc: &Proc<'_>, tag: u64) -> Vec<Word> {
    proc.messages(tag)
        .flat_map(|m| m.words.iter().copied())
        .collect()
}

/// Buckets `(a, b)` word pairs by destination and sends them.
fn send_pairs(proc: &mut Proc<'_>, tag: u64, out: Vec<Vec<Word>>) -> Result<()> {
    for (dest, words) in out.into_iter().enumerate() {
        if !words.is_empty() {
            proc.charge(words.len() as u64);
            proc.send(dest, tag, words)?;
        }
    }
    Ok(())
}

fn pairs_of<'a>(proc: &Proc<'a>, tag: u64) -> impl Iterator<Item = (usize, Word)> + 'a {
    proc.messages(tag)
        .flat_map(|m| m.words.chunks_exact(2).map(|c| (c[0] as usize, c[1])))
}

struct Driver {
    machine: Machine,
    n0: usize,
    schedule: VSchedule,
    policy: SlackPolicy,
    rounds: Vec<RoundStats>,
    handoff: Option<RoundStats>,
}

impl Driver {
    fn next_v(&mut self, depth: usize, v: usize, xlen: usize) -> Result<usize> {
        let want = match &self.schedule {
            VSchedule::Accelerated => {
                // keep one designated processor per non-sample class
                let p = self.machine.p();
                let literal = next_v(v, xlen);
                let mut w = literal;
                while w > 3 && w - build_cover(w)?.len() >= p {
                    w -= 1;
                }
                if w != literal {
                    self.machine.warn(format!(
                        "v = {literal} needs more than {p} designated processors; using v = {w}"
                    ));
                }
                return Ok(w);
            }
            VSchedule::Fixed(v0) => *v0,
            VSchedule::Custom(vs) => vs.get(depth + 1).or(vs.last()).copied().unwrap_or(3),
        };
        Ok(want.min(xlen).max(3))
    }

    fn slice_stats(&self, ranges: &[(usize, usize)]) -> (usize, u64, u64) {
        let ledger = self.machine.ledger();
        let (mut s, mut w, mut h) = (0, 0, 0);
        for &(a, b) in ranges {
            let part = ledger.slice(a..b);
            s += part.supersteps();
            w += part.work();
            h += part.comm();
        }
        (s, w, h)
    }

    /// Runs one level on a text of length `n` and returns each processor's
    /// block of its suffix array.
    fn level(
        &mut self,
        entry: Entry,
        n: usize,
        v_req: usize,
        depth: usize,
    ) -> Result<Vec<Vec<usize>>> {
        let p = self.machine.p();
        let v = v_req.clamp(3, n);
        let lv = Level::new(n, p, v)?;
        let d = lv.dc.len();
        let slot = self.rounds.len();
        self.rounds.push(RoundStats {
            v,
            d,
            n,
            ..RoundStats::default()
        });
        let s0 = self.machine.ledger().supersteps();

        let mut st: Vec<Lp> = (0..p)
            .map(|pid| {
                let (lo, hi) = lv.range(pid);
                Lp {
                    lo,
                    hi,
                    ..Lp::default()
                }
            })
            .collect();

        match entry {
            Entry::Top(parts) => {
                for (s, part) in st.iter_mut().zip(parts) {
                    s.x = part;
                }
                if self.base_check(&lv, &mut st)? {
                    let s1 = self.machine.ledger().supersteps();
                    let (ss, w, h) = self.slice_stats(&[(s0, s1)]);
                    self.rounds[slot] = RoundStats {
                        v: 0,
                        d: 0,
                        n,
                        supersteps: ss,
                        w,
                        h,
                    };
                    return Ok(st.into_iter().map(|s| s.sa).collect());
                }
            }
            Entry::Routed => {
                self.machine.superstep(&mut st, |proc, s| {
                    s.x = vec![0; s.hi - s.lo];
                    for (pos, c) in pairs_of(proc, T_XP) {
                        s.x[pos - s.lo] = c;
                    }
                    proc.charge((s.hi - s.lo) as u64);
                    push_halo(proc, &lv, s.lo, s.hi, &s.x, v - 1, T_HALO_X)
                })?;
            }
        }

        // step 1: sort the sampled v-grams and rank them
        self.sample_sort(&lv, &mut st)?;
        let mode = st[0].mode;
        debug_assert!(st.iter().all(|s| s.mode == mode));
        let m = lv.m();
        assert!(m < n, "sampled string must shrink: {m} >= {n}");

        let s1 = self.machine.ledger().supersteps();
        let mut post_start = s1;
        match mode {
            Mode::Distinct => {}
            Mode::Recurse => {
                let next = self.next_v(depth, v, m)?;
                let sub = self.level(Entry::Routed, m, next, depth + 1)?;
                post_start = self.machine.ledger().supersteps();
                for (s, part) in st.iter_mut().zip(sub) {
                    s.sub_sa = part;
                }
                let mb = m.div_ceil(p);
                self.machine.superstep(&mut st, |proc, s| {
                    let base = mb * proc.pid();
                    let mut out = vec![Vec::new(); p];
                    for (r, &pos) in s.sub_sa.iter().enumerate() {
                        let i = lv.origin_of(pos);
                        if i < n {
                            let o = &mut out[lv.owner(i)];
                            o.push(i as Word);
                            o.push((base + r - lv.pad) as Word);
                        }
                    }
                    send_pairs(proc, T_RANK, out)
                })?;
            }
            Mode::Handoff => {
                let h0 = self.machine.ledger().supersteps();
                self.machine.superstep(&mut st, |proc, _| {
                    if proc.pid() != 0 {
                        return Ok(());
                    }
                    let mut xp = vec![0 as Word; m];
                    for (pos, c) in pairs_of(proc, T_XP) {
                        xp[pos] = c;
                    }
                    let text = Text::from_symbols(xp)?;
                    let (sa, trace) = dc_suffix_array_traced(&text, &VSchedule::Fixed(3));
                    proc.charge(trace.iter().map(|l| l.ops).sum::<u64>() + m as u64);
                    let mut out = vec![Vec::new(); p];
                    for (g, &pos) in sa.as_slice().iter().enumerate() {
                        let i = lv.origin_of(pos);
                        if i < n {
                            let o = &mut out[lv.owner(i)];
                            o.push(i as Word);
                            o.push((g - lv.pad) as Word);
                        }
                    }
                    send_pairs(proc, T_RANK, out)
                })?;
                post_start = self.machine.ledger().supersteps();
                let (ss, w, h) = self.slice_stats(&[(h0, post_start)]);
                self.handoff = Some(RoundStats {
                    v: 3,
                    d: 2,
                    n: m,
                    supersteps: ss,
                    w,
                    h,
                });
            }
        }

        // sample ranks arrive; refresh the rank halo
        self.machine.superstep(&mut st, |proc, s| {
            s.rank = vec![-1; s.hi - s.lo + v];
            for (i, r) in pairs_of(proc, T_RANK) {
                s.rank[i - s.lo] = r;
            }
            proc.charge((s.hi - s.lo) as u64);
            let own = s.rank[..s.hi - s.lo].to_vec();
            push_halo(proc, &lv, s.lo, s.hi, &own, v, T_HALO_R)
        })?;

        self.order_nonsample(&lv, &mut st)?;
        self.group_sort(&lv, &mut st)?;
        self.merge(&lv, &mut st)?;

        let s3 = self.machine.ledger().supersteps();
        let (ss, w, h) = self.slice_stats(&[(s0, s1), (post_start, s3)]);
        self.rounds[slot] = RoundStats {
            v,
            d,
            n,
            supersteps: ss,
            w,
            h,
        };
        Ok(st.into_iter().map(|s| s.sa).collect())
    }

    /// Checks whether all characters are distinct, sorting them on the way.
    /// On success every processor holds its block of the suffix array.
    /// Otherwise the character halo has been sent.
    fn base_check(&mut self, lv: &Level, st: &mut [Lp]) -> Result<bool> {
        let p = lv.p;
        let spec = [JobSpec {
            key_width: 1,
            payload_width: 0,
            designated: 0,
        }];
        sort_jobs_with(
            &mut self.machine,
            st,
            &spec,
            SlackPolicy::Relaxed,
            |proc, s| {
                let mut rows = Rows::with_capacity(1, 0, s.x.len());
                for (r, &c) in s.x.iter().enumerate() {
                    rows.push(&[c], s.lo + r, &[])?;
                }
                proc.charge(s.x.len() as u64);
                Ok(vec![rows])
            },
            |proc, s, mut out| {
                s.sorted = out.pop().expect("one job");
                let len = s.sorted.len();
                let mut words = vec![len as Word];
                if len > 0 {
                    let dup = (1..len).any(|r| s.sorted.key(r) == s.sorted.key(r - 1));
                    words.push(Word::from(dup));
                    words.push(s.sorted.key(0)[0]);
                    words.push(s.sorted.key(len - 1)[0]);
                }
                proc.charge(len as u64 + p as u64);
                for dest in 0..p {
                    proc.send(dest, T_SUMMARY, words.clone())?;
                }
                Ok(())
            },
        )?;
        self.machine.superstep(st, |proc, s| {
            let mut distinct = true;
            let mut prev: Option<Word> = None;
            for msg in proc.messages(T_SUMMARY) {
                let w = &msg.words;
                if w[0] == 0 {
                    continue;
                }
                if w[1] != 0 || prev == Some(w[2]) {
                    distinct = false;
                }
                prev = Some(w[3]);
            }
            proc.charge(p as u64);
            s.distinct = distinct;
            if distinct {
                s.sa = s.sorted.indices().to_vec();
                proc.charge(s.sa.len() as u64);
                Ok(())
            } else {
                push_halo(proc, lv, s.lo, s.hi, &s.x, lv.v - 1, T_HALO_X)
            }
        })?;
        let distinct = st[0].distinct;
        debug_assert!(st.iter().all(|s| s.distinct == distinct));
        Ok(distinct)
    }

    /// Builds and sorts the sampled string, ranks it densely, decides how to
    /// continue, and sends ranks or encoded symbols where they are needed.
    fn sample_sort(&mut self, lv: &Level, st: &mut [Lp]) -> Result<()> {
        let (n, p, v) = (lv.n, lv.p, lv.v);
        let m = lv.m();
        let spec = [JobSpec {
            key_width: v,
            payload_width: 0,
            designated: 0,
        }];
        sort_jobs_with(
            &mut self.machine,
            st,
            &spec,
            SlackPolicy::Relaxed,
            |proc, s| {
                let halo = read_concat(proc, T_HALO_X);
                s.x.extend(halo);
                let mut rows = Rows::new(v, 0);
                let mut gram = vec![0 as Word; v];
                for i in s.lo..s.hi {
                    if lv.dc.contains(i % v) {
                        for (c, g) in gram.iter_mut().enumerate() {
                            *g = s.char_at(i + c, n);
                        }
                        rows.push(&gram, lv.pos_of(i), &[])?;
                    }
                }
                if lv.pad == 1 && s.hi == n && s.lo < s.hi {
                    rows.push(&vec![-1; v], lv.pos_of(n), &[])?;
                }
                proc.charge((rows.len() * v) as u64);
                Ok(vec![rows])
            },
            |proc, s, mut out| {
                s.sorted = out.pop().expect("one job");
                let len = s.sorted.len();
                let mut words = vec![len as Word];
                if len > 0 {
                    let fresh = (1..len)
                        .filter(|&r| s.sorted.key(r) != s.sorted.key(r - 1))
                        .count();
                    words.push(fresh as Word);
                    words.extend_from_slice(s.sorted.key(0));
                    words.extend_from_slice(s.sorted.key(len - 1));
                }
                proc.charge((len * v) as u64 + (p * words.len()) as u64);
                for dest in 0..p {
                    proc.send(dest, T_SUMMARY, words.clone())?;
                }
                Ok(())
            },
        )?;

        let n0 = self.n0;
        self.machine.superstep(st, |proc, s| {
            let me = proc.pid();
            let mut before = 0usize;
            let mut total = 0usize;
            let mut my_first = 0usize;
            let mut prev_last: Option<&[Word]> = None;
            for msg in proc.messages(T_SUMMARY) {
                let w = &msg.words;
                if w[0] == 0 {
                    continue;
                }
                let fresh = w[1] as usize;
                let first = &w[2..2 + v];
                let last = &w[2 + v..2 + 2 * v];
                let opens = prev_last != Some(first);
                if msg.src == me {
                    my_first = if opens { before } else { before - 1 };
                }
                total = before + usize::from(opens) + fresh;
                before = total;
                prev_last = Some(last);
            }
            proc.charge((p * (2 * v + 2)) as u64);

            let len = s.sorted.len();
            let mut ranks = Vec::with_capacity(len);
            let mut r = my_first;
            for row in 0..len {
                if row > 0 && s.sorted.key(row) != s.sorted.key(row - 1) {
                    r += 1;
                }
                ranks.push(r);
            }
            proc.charge((len * v) as u64);

            s.mode = if total == m {
                Mode::Distinct
            } else if m * p <= n0 || m < 3 {
                Mode::Handoff
            } else {
                Mode::Recurse
            };
            let mut out = vec![Vec::new(); p];
            match s.mode {
                Mode::Distinct => {
                    let base = m.div_ceil(p) * me;
                    for row in 0..len {
                        let i = lv.origin_of(s.sorted.index(row));
                        if i < n {
                            let o = &mut out[lv.owner(i)];
                            o.push(i as Word);
                            o.push((base + row - lv.pad) as Word);
                        }
                    }
                    send_pairs(proc, T_RANK, out)
                }
                Mode::Handoff | Mode::Recurse => {
                    for (row, &r) in ranks.iter().enumerate() {
                        let pos = s.sorted.index(row);
                        let dest = if s.mode == Mode::Handoff {
                            0
                        } else {
                            block_owner(pos, m, p)
                        };
                        out[dest].push(pos as Word);
                        out[dest].push(r as Word);
                    }
                    send_pairs(proc, T_XP, out)
                }
            }
        })?;
        Ok(())
    }

    /// Sorts every non-sample class by `(x[i..i+l_k), rank[i+l_k])` with
    /// one concurrent sort per class, then tells each position its place in
    /// its class order.
    fn order_nonsample(&mut self, lv: &Level, st: &mut [Lp]) -> Result<()> {
        let (n, p, v) = (lv.n, lv.p, lv.v);
        let jobs = lv.nonsample.len();
        if jobs >= p {
            match self.policy {
                SlackPolicy::Enforce => {
                    return Err(Error::TooManySequences { sequences: jobs, p });
                }
                SlackPolicy::Relaxed => self.machine.warn(format!(
                    "{jobs} non-sample classes share {p} designated processors"
                )),
            }
        }
        let specs: Vec<JobSpec> = lv
            .nonsample
            .iter()
            .enumerate()
            .map(|(j, &(_, l))| JobSpec {
                key_width: l + 1,
                payload_width: 0,
                designated: j % p,
            })
            .collect();
        sort_jobs_with(
            &mut self.machine,
            st,
            &specs,
            SlackPolicy::Relaxed,
            |proc, s| {
                let own = s.hi - s.lo;
                let halo = read_concat(proc, T_HALO_R);
                for (slot, r) in s.rank[own..].iter_mut().zip(halo) {
                    *slot = r;
                }
                let mut all = Vec::with_capacity(lv.nonsample.len());
                let mut key = Vec::with_capacity(v);
                for &(k, l) in &lv.nonsample {
                    let first = s.lo + (k + v - s.lo % v) % v;
                    let mut rows = Rows::with_capacity(l + 1, 0, own / v + 1);
                    for i in (first..s.hi).step_by(v) {
                        key.clear();
                        key.extend((0..l).map(|c| s.char_at(i + c, n)));
                        key.push(s.rank_at(i + l));
                        rows.push(&key, i, &[])?;
                    }
                    proc.charge((rows.len() * (l + 1)) as u64);
                    all.push(rows);
                }
                Ok(all)
            },
            |proc, _, out| {
                let mut dest = vec![Vec::new(); p];
                for (&(k, _), rows) in lv.nonsample.iter().zip(&out) {
                    let mk = (n - k).div_ceil(v);
                    let base = mk.div_ceil(p) * proc.pid();
                    for r in 0..rows.len() {
                        let i = rows.index(r);
                        let o = &mut dest[lv.owner(i)];
                        o.push(i as Word);
                        o.push((base + r) as Word);
                    }
                }
                send_pairs(proc, T_CKEY, dest)
            },
        )
    }

    /// Sorts all suffixes by `(x[i..i+v), i mod v, class order)`, carrying
    /// the ranks the comparator needs, and publishes the first and last
    /// v-gram of each block.
    fn group_sort(&mut self, lv: &Level, st: &mut [Lp]) -> Result<()> {
        let (n, p, v) = (lv.n, lv.p, lv.v);
        let d = lv.dc.len();
        let spec = [JobSpec {
            key_width: v + 2,
            payload_width: d,
            designated: 0,
        }];
        sort_jobs_with(
            &mut self.machine,
            st,
            &spec,
            SlackPolicy::Relaxed,
            |proc, s| {
                let own = s.hi - s.lo;
                s.ckey = vec![-1; own];
                for (i, c) in pairs_of(proc, T_CKEY) {
                    s.ckey[i - s.lo] = c;
                }
                let mut rows = Rows::with_capacity(v + 2, d, own);
                let mut key = vec![0 as Word; v + 2];
                let mut pay = vec![0 as Word; d];
                for i in s.lo..s.hi {
                    let k = i % v;
                    for (c, slot) in key[..v].iter_mut().enumerate() {
                        *slot = s.char_at(i + c, n);
                    }
                    key[v] = k as Word;
                    key[v + 1] = if lv.dc.contains(k) {
                        s.rank_at(i)
                    } else {
                        s.ckey[i - s.lo]
                    };
                    for (t, &e) in lv.dc.elements().iter().enumerate() {
                        pay[t] = s.rank_at(i + (e + v - k) % v);
                    }
                    rows.push(&key, i, &pay)?;
                }
                proc.charge((own * (v + 2 + d)) as u64);
                Ok(vec![rows])
            },
            |proc, s, mut out| {
                s.sorted = out.pop().expect("one job");
                let len = s.sorted.len();
                let mut words = vec![len as Word];
                if len > 0 {
                    words.extend_from_slice(&s.sorted.key(0)[..v]);
                    words.extend_from_slice(&s.sorted.key(len - 1)[..v]);
                }
                proc.charge((p * words.len()) as u64);
                for dest in 0..p {
                    proc.send(dest, T_GSUM, words.clone())?;
                }
                Ok(())
            },
        )
    }

    /// Merges every group of equal v-grams and places the suffix array in
    /// block distribution.
    fn merge(&mut self, lv: &Level, st: &mut [Lp]) -> Result<()> {
        let (n, p, v) = (lv.n, lv.p, lv.v);
        let d = lv.dc.len();

        // classify groups; merge local ones, ship two-processor parts, sample wide ones
        self.machine.superstep(st, |proc, s| {
            let me = proc.pid();
            let mut lens = vec![0usize; p];
            let mut first: Vec<&[Word]> = vec![&[]; p];
            let mut last: Vec<&[Word]> = vec![&[]; p];
            for msg in proc.messages(T_GSUM) {
                let w = &msg.words;
                lens[msg.src] = w[0] as usize;
                if w[0] > 0 {
                    first[msg.src] = &w[1..1 + v];
                    last[msg.src] = &w[1 + v..1 + 2 * v];
                }
            }
            proc.charge((p * (2 * v + 1)) as u64);

            let len = s.sorted.len();
            let mut pool = Rows::with_capacity(0, d, len);
            for r in 0..len {
                pool.push(&[], s.sorted.index(r), s.sorted.payload(r))?;
            }
            proc.charge((len * (d + 1)) as u64);
            if len == 0 {
                s.pool = pool;
                return Ok(());
            }
            let gram = |r: usize| &s.sorted.key(r)[..v];

            // span of the first and last local groups
            let mut a_first = me;
            let g0 = gram(0);
            for q in (0..me).rev() {
                if lens[q] > 0 && last[q] == g0 {
                    a_first = q;
                    if first[q] != g0 {
                        break;
                    }
                } else {
                    break;
                }
            }
            let mut b_last = me;
            let gl = gram(len - 1);
            for q in me + 1..p {
                if lens[q] > 0 && first[q] == gl {
                    b_last = q;
                    if last[q] != gl {
                        break;
                    }
                } else {
                    break;
                }
            }

            let corrupt = Cell::new(None);
            let mut wide = Vec::new();
            let mut gs = 0;
            while gs < len {
                let mut ge = gs + 1;
                while ge < len && gram(ge) == gram(gs) {
                    ge += 1;
                }
                let a = if gs == 0 { a_first } else { me };
                let b = if ge == len { b_last } else { me };
                if a == b {
                    let (merged, ops) = merge_range(lv, &pool, &[(gs, ge)], &corrupt);
                    proc.charge(ops);
                    for (t, id) in merged.into_iter().enumerate() {
                        s.finals.push((s.lo + gs + t, pool.index(id)));
                    }
                } else if b == a + 1 {
                    if me == a {
                        s.two = Some((gs, ge, s.lo + gs));
                    } else {
                        let mut words = Vec::with_capacity((ge - gs) * (d + 1));
                        pool.pack(gs..ge, true, &mut words);
                        proc.charge(words.len() as u64);
                        proc.send(a, group_tag(K_TWO, a), words)?;
                    }
                } else {
                    let (merged, ops) = merge_range(lv, &pool, &[(gs, ge)], &corrupt);
                    proc.charge(ops);
                    let span = b - a + 1;
                    let mut words = Vec::new();
                    let l = merged.len();
                    if l <= span + 1 {
                        for &id in &merged {
                            pool.pack(id..id + 1, true, &mut words);
                        }
                    } else {
                        for t in 0..=span {
                            let id = merged[t * (l - 1) / span];
                            pool.pack(id..id + 1, true, &mut words);
                        }
                    }
                    proc.charge(words.len() as u64);
                    proc.send(a, group_tag(K_WSAMPLE, a), words)?;
                    wide.push(WideGroup {
                        start_proc: a,
                        end_proc: b,
                        merged,
                        global_start: s.lo + gs,
                    });
                }
                gs = ge;
            }
            if let Some((x, y)) = corrupt.get() {
                return Err(Error::RankCorruption(x, y));
            }
            assert!(wide.len() <= 2, "at most two wide groups per processor");
            s.wide = wide;
            s.pool = pool;
            Ok(())
        })?;

        // two-processor merges; splitters for wide groups
        self.machine.superstep(st, |proc, s| {
            let me = proc.pid();
            let corrupt = Cell::new(None);
            if let Some((gs, ge, start)) = s.two.take() {
                let at = s.pool.len();
                for msg in proc.messages(group_tag(K_TWO, me)) {
                    s.pool.unpack_into(&msg.words, true)?;
                }
                let end = s.pool.len();
                proc.charge((end - at) as u64);
                let (merged, ops) = merge_range(lv, &s.pool, &[(gs, ge), (at, end)], &corrupt);
                proc.charge(ops);
                for (t, id) in merged.into_iter().enumerate() {
                    s.finals.push((start + t, s.pool.index(id)));
                }
            }
            for g in &s.wide {
                if g.start_proc != me {
                    continue;
                }
                let span = g.end_proc - g.start_proc + 1;
                let at = s.pool.len();
                for msg in proc.messages(group_tag(K_WSAMPLE, me)) {
                    s.pool.unpack_into(&msg.words, true)?;
                }
                let pool = &s.pool;
                let mut samples: Vec<usize> = (at..pool.len()).collect();
                samples.sort_by(|&x, &y| lv.cmp_suffix(pool, x, y, &corrupt));
                let l = samples.len();
                proc.charge((l * (usize::BITS - l.leading_zeros()) as usize) as u64);
                let mut words = vec![g.global_start as Word];
                for t in 0..=span {
                    let id = samples[t * (l - 1) / span];
                    pool.pack(id..id + 1, true, &mut words);
                }
                for q in g.start_proc..=g.end_proc {
                    proc.send(q, group_tag(K_WSPLIT, me), words.clone())?;
                }
            }
            match corrupt.get() {
                Some((x, y)) => Err(Error::RankCorruption(x, y)),
                None => Ok(()),
            }
        })?;

        // wide groups: partition by splitters and exchange
        self.machine.superstep(st, |proc, s| {
            let corrupt = Cell::new(None);
            let mut wide = std::mem::take(&mut s.wide);
            for g in wide.iter_mut() {
                let span = g.end_proc - g.start_proc + 1;
                let tag = group_tag(K_WSPLIT, g.start_proc);
                let msg = proc.messages(tag).next().ok_or_else(|| Error::Program {
                    pid: proc.pid(),
                    msg: "missing splitters".into(),
                })?;
                g.global_start = msg.words[0] as usize;
                let at = s.pool.len();
                s.pool.unpack_into(&msg.words[1..], true)?;
                let pool = &s.pool;
                let mut cuts = vec![0usize; span + 1];
                cuts[span] = g.merged.len();
                for t in 1..span {
                    let probe = at + t;
                    cuts[t] = g
                        .merged
                        .partition_point(|&id| {
                            lv.cmp_suffix(pool, id, probe, &corrupt) == Ordering::Less
                        })
                        .max(cuts[t - 1]);
                }
                proc.charge(
                    (span * (usize::BITS - g.merged.len().leading_zeros()) as usize) as u64,
                );
                let counts: Vec<Word> =
                    (0..span).map(|c| (cuts[c + 1] - cuts[c]) as Word).collect();
                for c in 0..span {
                    let mut words = Vec::with_capacity((cuts[c + 1] - cuts[c]) * (d + 1));
                    for &id in &g.merged[cuts[c]..cuts[c + 1]] {
                        pool.pack(id..id + 1, true, &mut words);
                    }
                    proc.charge(words.len() as u64);
                    let q = g.start_proc + c;
                    proc.send(q, group_tag(K_WBUCKET, g.start_proc), words)?;
                    proc.send(q, group_tag(K_WCOUNT, g.start_proc), counts.clone())?;
                }
            }
            s.wide = wide;
            match corrupt.get() {
                Some((x, y)) => Err(Error::RankCorruption(x, y)),
                None => Ok(()),
            }
        })?;

        // wide groups: final merge; then place everything
        self.machine.superstep(st, |proc, s| {
            let me = proc.pid();
            let corrupt = Cell::new(None);
            for g in std::mem::take(&mut s.wide) {
                let c = me - g.start_proc;
                let mut offset = 0usize;
                for msg in proc.messages(group_tag(K_WCOUNT, g.start_proc)) {
                    offset += msg.words[..c].iter().map(|&x| x as usize).sum::<usize>();
                }
                let mut runs = Vec::new();
                for msg in proc.messages(group_tag(K_WBUCKET, g.start_proc)) {
                    let at = s.pool.len();
                    s.pool.unpack_into(&msg.words, true)?;
                    runs.push((at, s.pool.len()));
                }
                proc.charge(runs.iter().map(|r| (r.1 - r.0) as u64).sum());
                let (merged, ops) = merge_runs(lv, &s.pool, &runs, &corrupt);
                proc.charge(ops);
                for (t, id) in merged.into_iter().enumerate() {
                    s.finals
                        .push((g.global_start + offset + t, s.pool.index(id)));
                }
            }
            if let Some((x, y)) = corrupt.get() {
                return Err(Error::RankCorruption(x, y));
            }
            let mut out = vec![Vec::new(); p];
            for &(pos, i) in &s.finals {
                let o = &mut out[lv.owner(pos)];
                o.push(pos as Word);
                o.push(i as Word);
            }
            s.finals.clear();
            send_pairs(proc, T_PLACE, out)
        })?;

        self.machine.superstep(st, |proc, s| {
            s.sa = vec![usize::MAX; s.hi - s.lo];
            for (pos, i) in pairs_of(proc, T_PLACE) {
                s.sa[pos - s.lo] = i as usize;
            }
            proc.charge(s.sa.len() as u64);
            if s.sa.contains(&usize::MAX) {
                return Err(Error::Program {
                    pid: proc.pid(),
                    msg: "suffix array block has holes".into(),
                });
            }
            debug_assert!(s.sa.iter().all(|&i| i < n));
            Ok(())
        })?;
        Ok(())
    }
}

/// Merges the pool rows in each of `ranges`, splitting every range into
/// runs of equal residue class. Each run must already be in suffix order.
fn merge_range(
    lv: &Level,
    pool: &Rows,
    ranges: &[(usize, usize)],
    corrupt: &Cell<Option<(usize, usize)>>,
) -> (Vec<usize>, u64) {
    let v = lv.v;
    let mut runs = Vec::new();
    for &(a, b) in ranges {
        let mut start = a;
        for r in a + 1..=b {
            if r == b || pool.index(r) % v != pool.index(start) % v {
                runs.push((start, r));
                start = r;
            }
        }
    }
    merge_runs(lv, pool, &runs, corrupt)
}

fn merge_runs(
    lv: &Level,
    pool: &Rows,
    runs: &[(usize, usize)],
    corrupt: &Cell<Option<(usize, usize)>>,
) -> (Vec<usize>, u64) {
    let ids: Vec<usize> = runs.iter().flat_map(|&(a, b)| a..b).collect();
    let mut slices = Vec::with_capacity(runs.len());
    let mut at = 0;
    for &(a, b) in runs {
        slices.push(&ids[at..at + (b - a)]);
        at += b - a;
    }
    let (merged, calls) = multiway_merge(&slices, |&x, &y| lv.cmp_suffix(pool, x, y, corrupt));
    let len = merged.len() as u64;
    (merged, calls + len)
}

//! Parallel sorting of fixed-width integer rows by regular sampling.
//!
//! Each processor radix-sorts its block and sends `p + 1` evenly spaced
//! samples to a designated processor, which sorts them and broadcasts `p + 1`
//! splitters. Rows are then routed to the bucket their splitter interval
//! selects, sorted again, and rebalanced so that processor `π` ends up with
//! the rows at global positions `I_π` of the block distribution. Ties are
//! broken by the index carried with every row.
//!
//! Several independent sorts can run in the same supersteps; each one is a
//! [`SortJob`] with its own tag space and designated processor.

use std::cmp::Ordering;

use crate::bsp::{block_owner, BspConfig, CostLedger, DistArray, Machine, Proc, SlackPolicy, Word};
use crate::error::{Error, Result};
use crate::radix::sort_by_columns;

/// Rows with a `key_width`-word sort key, an index used to break ties, and
/// a `payload_width`-word payload that travels with the row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Rows {
    key_width: usize,
    payload_width: usize,
    keys: Vec<Word>,
    index: Vec<usize>,
    payload: Vec<Word>,
}

impl Rows {
    pub fn new(key_width: usize, payload_width: usize) -> Self {
        Self {
            key_width,
            payload_width,
            ..Self::default()
        }
    }

    pub fn with_capacity(key_width: usize, payload_width: usize, rows: usize) -> Self {
        Self {
            key_width,
            payload_width,
            keys: Vec::with_capacity(rows * key_width),
            index: Vec::with_capacity(rows),
            payload: Vec::with_capacity(rows * payload_width),
        }
    }

    #[inline]
    pub fn key_width(&self) -> usize {
        self.key_width
    }

    #[inline]
    pub fn payload_width(&self) -> usize {
        self.payload_width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.index.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    #[inline]
    pub fn key(&self, r: usize) -> &[Word] {
        &self.keys[r * self.key_width..(r + 1) * self.key_width]
    }

    #[inline]
    pub fn index(&self, r: usize) -> usize {
        self.index[r]
    }

    #[inline]
    pub fn payload(&self, r: usize) -> &[Word] {
        &self.payload[r * self.payload_width..(r + 1) * self.payload_width]
    }

    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    pub fn push(&mut self, key: &[Word], index: usize, payload: &[Word]) -> Result<()> {
        if key.len() != self.key_width {
            return Err(Error::WidthMismatch {
                row: self.len(),
                expected: self.key_width,
                found: key.len(),
            });
        }
        if payload.len() != self.payload_width {
            return Err(Error::WidthMismatch {
                row: self.len(),
                expected: self.payload_width,
                found: payload.len(),
            });
        }
        self.keys.extend_from_slice(key);
        self.index.push(index);
        self.payload.extend_from_slice(payload);
        Ok(())
    }

    pub(crate) fn push_from(&mut self, other: &Rows, r: usize) {
        self.keys.extend_from_slice(other.key(r));
        self.index.push(other.index[r]);
        self.payload.extend_from_slice(other.payload(r));
    }

    fn permuted(&self, order: &[usize]) -> Rows {
        let mut out = Rows::with_capacity(self.key_width, self.payload_width, order.len());
        for &r in order {
            out.push_from(self, r);
        }
        out
    }

    pub(crate) fn stride(&self) -> usize {
        self.key_width + 1 + self.payload_width
    }

    pub(crate) fn pack(
        &self,
        range: std::ops::Range<usize>,
        with_payload: bool,
        out: &mut Vec<Word>,
    ) {
        for r in range {
            out.extend_from_slice(self.key(r));
            out.push(self.index[r] as Word);
            if with_payload {
                out.extend_from_slice(self.payload(r));
            }
        }
    }

    pub(crate) fn unpack_into(&mut self, words: &[Word], with_payload: bool) -> Result<()> {
        let stride = if with_payload {
            self.stride()
        } else {
            self.key_width + 1
        };
        if !words.len().is_multiple_of(stride) {
            return Err(Error::WidthMismatch {
                row: self.len(),
                expected: stride,
                found: words.len() % stride,
            });
        }
        for row in words.chunks_exact(stride) {
            self.keys.extend_from_slice(&row[..self.key_width]);
            self.index.push(row[self.key_width] as usize);
            if with_payload {
                self.payload.extend_from_slice(&row[self.key_width + 1..]);
            } else {
                self.payload
                    .extend(std::iter::repeat_n(0, self.payload_width));
            }
        }
        Ok(())
    }

    /// Order of row `a` of `self` relative to row `b` of `other` by
    /// `(key, index)`.
    #[inline]
    fn cmp_rows(&self, a: usize, other: &Rows, b: usize) -> Ordering {
        self.key(a)
            .cmp(other.key(b))
            .then(self.index[a].cmp(&other.index[b]))
    }

    /// Stable local sort by `(key, index)`; returns the operation count.
    pub fn sort_local(&mut self) -> Result<u64> {
        let m = self.len();
        if m < 2 {
            return Ok(m as u64);
        }
        let w = self.key_width;
        let mut bounds = vec![0usize; w];
        for (pos, &k) in self.keys.iter().enumerate() {
            if k < -1 {
                return Err(Error::KeyOutOfRange {
                    index: pos / w,
                    value: k,
                    bound: usize::MAX,
                });
            }
            let b = &mut bounds[pos % w];
            *b = (*b).max((k + 2) as usize);
        }
        let index_bound = self.index.iter().copied().max().unwrap_or(0) + 1;
        let mut order: Vec<usize> = (0..m).collect();
        let mut ops = m as u64;
        if self.index.windows(2).any(|w| w[0] > w[1]) {
            ops += sort_by_columns(&mut order, 1, index_bound, |r, _| self.index[r]);
        }
        for c in (0..w).rev() {
            ops += sort_by_columns(&mut order, 1, bounds[c], |r, _| {
                (self.keys[r * w + c] + 1) as usize
            });
        }
        *self = self.permuted(&order);
        Ok(ops + (m * self.stride()) as u64)
    }

    /// First row not smaller than row `r` of `probe`, assuming `self` sorted.
    fn lower_bound(&self, probe: &Rows, r: usize) -> usize {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cmp_rows(mid, probe, r) == Ordering::Less {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// One sort instance: the rows each processor starts with and the processor
/// that sorts the samples.
#[derive(Debug, Clone)]
pub struct SortJob {
    pub parts: Vec<Rows>,
    pub designated: usize,
}

impl SortJob {
    pub fn new(parts: Vec<Rows>) -> Self {
        Self {
            parts,
            designated: 0,
        }
    }
}

/// Shape of one sort instance run through [`sort_jobs_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobSpec {
    pub key_width: usize,
    pub payload_width: usize,
    pub designated: usize,
}

const KIND_SAMPLES: u64 = 0;
const KIND_SPLITTERS: u64 = 1;
const KIND_BUCKET: u64 = 2;
const KIND_COUNTS: u64 = 3;
const KIND_PLACE: u64 = 4;

#[inline]
fn tag(job: usize, kind: u64) -> u64 {
    ((job as u64) << 3) | kind
}

/// Sorts every job; returns, per job, the sorted rows held by each processor
/// in block distribution. All jobs share the same five supersteps (one when
/// `p = 1`).
pub fn sort_jobs(
    machine: &mut Machine,
    jobs: Vec<SortJob>,
    policy: SlackPolicy,
) -> Result<Vec<Vec<Rows>>> {
    let p = machine.p();
    let mut specs = Vec::with_capacity(jobs.len());
    for (j, job) in jobs.iter().enumerate() {
        if job.parts.len() != p {
            return Err(Error::BadConfig(format!(
                "sort job {j} has {} parts for {p} processors",
                job.parts.len()
            )));
        }
        specs.push(JobSpec {
            key_width: job.parts[0].key_width,
            payload_width: job.parts[0].payload_width,
            designated: job.designated,
        });
    }
    // states[pi] = (inputs, outputs)
    let mut states: Vec<(Vec<Rows>, Vec<Rows>)> =
        (0..p).map(|_| (Vec::new(), Vec::new())).collect();
    for job in jobs {
        for (pi, part) in job.parts.into_iter().enumerate() {
            states[pi].0.push(part);
        }
    }
    sort_jobs_with(
        machine,
        &mut states,
        &specs,
        policy,
        |_, s| Ok(std::mem::take(&mut s.0)),
        |_, s, out| {
            s.1 = out;
            Ok(())
        },
    )?;
    let mut out: Vec<Vec<Rows>> = specs.iter().map(|_| Vec::with_capacity(p)).collect();
    for (_, sorted) in states {
        for (j, rows) in sorted.into_iter().enumerate() {
            out[j].push(rows);
        }
    }
    Ok(out)
}

/// Runs the jobs described by `specs` inside the caller's own supersteps.
/// `prepare` runs at the start of the first superstep and returns this
/// processor's rows for every job; it may read the inbox left by the
/// caller's previous superstep. `finish` runs at the end of the last
/// superstep with this processor's block of every sorted job and may send
/// messages of its own.
pub fn sort_jobs_with<S, P, F>(
    machine: &mut Machine,
    states: &mut [S],
    specs: &[JobSpec],
    policy: SlackPolicy,
    prepare: P,
    finish: F,
) -> Result<()>
where
    S: Send,
    P: Fn(&mut Proc<'_>, &mut S) -> Result<Vec<Rows>> + Sync,
    F: Fn(&mut Proc<'_>, &mut S, Vec<Rows>) -> Result<()> + Sync,
{
    let p = machine.p();
    for spec in specs {
        if spec.designated >= p {
            return Err(Error::BadDestination {
                pid: 0,
                dest: spec.designated,
                p,
            });
        }
    }
    let check = |proc: &Proc<'_>, rows: &[Rows]| -> Result<()> {
        if rows.len() != specs.len() {
            return Err(Error::Program {
                pid: proc.pid(),
                msg: format!("prepared {} jobs, expected {}", rows.len(), specs.len()),
            });
        }
        for (r, spec) in rows.iter().zip(specs) {
            if r.key_width != spec.key_width || r.payload_width != spec.payload_width {
                return Err(Error::WidthMismatch {
                    row: 0,
                    expected: spec.key_width,
                    found: r.key_width,
                });
            }
        }
        Ok(())
    };

    let mut combo: Vec<(&mut S, Vec<Rows>)> = states.iter_mut().map(|s| (s, Vec::new())).collect();

    if p == 1 {
        machine.superstep(&mut combo, |proc, (s, _)| {
            let mut rows = prepare(proc, s)?;
            check(proc, &rows)?;
            for r in rows.iter_mut() {
                let ops = r.sort_local()?;
                proc.charge(ops);
            }
            finish(proc, s, rows)
        })?;
        return Ok(());
    }

    // local sort and primary samples
    machine.superstep(&mut combo, |proc, (s, locals)| {
        *locals = prepare(proc, s)?;
        check(proc, locals)?;
        for (j, rows) in locals.iter_mut().enumerate() {
            let ops = rows.sort_local()?;
            proc.charge(ops);
            let len = rows.len();
            let mut words = Vec::new();
            if len <= p + 1 {
                rows.pack(0..len, false, &mut words);
            } else {
                for t in 0..=p {
                    let r = t * (len - 1) / p;
                    rows.pack(r..r + 1, false, &mut words);
                }
            }
            proc.charge(words.len() as u64);
            proc.send(specs[j].designated, tag(j, KIND_SAMPLES), words)?;
        }
        Ok(())
    })?;

    let need = (p as u128).pow(3);
    for j in 0..specs.len() {
        let m: usize = combo.iter().map(|(_, l)| l[j].len()).sum();
        if (m as u128) < need {
            match policy {
                SlackPolicy::Enforce => {
                    return Err(Error::Slackness {
                        what: "rows to sort",
                        have: m as u128,
                        need,
                    })
                }
                SlackPolicy::Relaxed => {
                    machine.warn(format!("sort job {j}: {m} rows is below p^3 = {need}"))
                }
            }
        }
    }

    // secondary samples at the designated processors
    machine.superstep(&mut combo, |proc, _| {
        for (j, spec) in specs.iter().enumerate() {
            if spec.designated != proc.pid() {
                continue;
            }
            let mut samples = Rows::new(spec.key_width, 0);
            for msg in proc.messages(tag(j, KIND_SAMPLES)) {
                samples.unpack_into(&msg.words, true)?;
            }
            let ops = samples.sort_local()?;
            proc.charge(ops);
            let len = samples.len();
            let mut words = Vec::new();
            if len > 0 {
                for t in 0..=p {
                    let r = t * (len - 1) / p;
                    samples.pack(r..r + 1, false, &mut words);
                }
            }
            proc.charge(words.len() as u64);
            for dest in 0..p {
                proc.send(dest, tag(j, KIND_SPLITTERS), words.clone())?;
            }
        }
        Ok(())
    })?;

    // partition against the splitters and exchange buckets
    machine.superstep(&mut combo, |proc, (_, locals)| {
        for (j, rows) in locals.iter_mut().enumerate() {
            let mut splitters = Rows::new(specs[j].key_width, 0);
            for msg in proc.messages(tag(j, KIND_SPLITTERS)) {
                splitters.unpack_into(&msg.words, true)?;
            }
            let len = rows.len();
            let mut cuts = vec![0usize; p + 1];
            cuts[p] = len;
            if splitters.len() == p + 1 {
                for t in 1..p {
                    cuts[t] = rows.lower_bound(&splitters, t).max(cuts[t - 1]);
                }
                proc.charge((p as u64) * (usize::BITS - len.leading_zeros()) as u64);
            } else {
                // no samples anywhere means there are no rows either
                debug_assert_eq!(len, 0);
            }
            let counts: Vec<Word> = (0..p).map(|c| (cuts[c + 1] - cuts[c]) as Word).collect();
            for dest in 0..p {
                let mut words = Vec::with_capacity((cuts[dest + 1] - cuts[dest]) * rows.stride());
                rows.pack(cuts[dest]..cuts[dest + 1], true, &mut words);
                proc.charge(words.len() as u64);
                proc.send(dest, tag(j, KIND_BUCKET), words)?;
                proc.send(dest, tag(j, KIND_COUNTS), counts.clone())?;
            }
            proc.charge(p as u64 * p as u64);
            *rows = Rows::new(specs[j].key_width, specs[j].payload_width);
        }
        Ok(())
    })?;

    // sort each bucket and route rows to their final owners
    machine.superstep(&mut combo, |proc, _| {
        let me = proc.pid();
        for (j, spec) in specs.iter().enumerate() {
            let mut bucket = Rows::new(spec.key_width, spec.payload_width);
            for msg in proc.messages(tag(j, KIND_BUCKET)) {
                bucket.unpack_into(&msg.words, true)?;
            }
            let ops = bucket.sort_local()?;
            proc.charge(ops);
            let mut totals = vec![0usize; p];
            for msg in proc.messages(tag(j, KIND_COUNTS)) {
                if msg.words.len() != p {
                    return Err(Error::Program {
                        pid: me,
                        msg: "malformed bucket counts".into(),
                    });
                }
                for (t, &c) in totals.iter_mut().zip(&msg.words) {
                    *t += c as usize;
                }
            }
            proc.charge(p as u64 * p as u64);
            let m: usize = totals.iter().sum();
            let offset: usize = totals[..me].iter().sum();
            let block = m.div_ceil(p);
            let mut start = 0;
            while start < bucket.len() {
                let dest = block_owner(offset + start, m, p);
                let end = ((dest + 1) * block)
                    .min(m)
                    .saturating_sub(offset)
                    .min(bucket.len());
                let mut words = Vec::with_capacity((end - start) * bucket.stride());
                bucket.pack(start..end, true, &mut words);
                proc.charge(words.len() as u64);
                proc.send(dest, tag(j, KIND_PLACE), words)?;
                start = end;
            }
        }
        Ok(())
    })?;

    // assemble in global order
    machine.superstep(&mut combo, |proc, (s, _)| {
        let mut out = Vec::with_capacity(specs.len());
        for (j, spec) in specs.iter().enumerate() {
            let mut rows = Rows::new(spec.key_width, spec.payload_width);
            for msg in proc.messages(tag(j, KIND_PLACE)) {
                rows.unpack_into(&msg.words, true)?;
            }
            proc.charge((rows.len() * rows.stride()) as u64);
            out.push(rows);
        }
        finish(proc, s, out)
    })?;
    Ok(())
}

/// Sorts a block-distributed array of equal-width rows on a fresh machine.
/// Row `i` of the global array carries index `i`, so equal rows keep their
/// input order.
pub fn bsp_string_sort(
    y: &DistArray<Vec<Word>>,
    cfg: &BspConfig,
    policy: SlackPolicy,
) -> Result<(DistArray<Vec<Word>>, CostLedger)> {
    if y.p() != cfg.p {
        return Err(Error::BadConfig(format!(
            "input has {} parts for a {}-processor machine",
            y.p(),
            cfg.p
        )));
    }
    let width = y.parts().iter().flatten().next().map_or(0, Vec::len);
    let mut parts = Vec::with_capacity(cfg.p);
    for (part, range) in y.parts().iter().zip(y.ranges()) {
        let mut rows = Rows::with_capacity(width, 0, part.len());
        for (row, i) in part.iter().zip(range) {
            rows.push(row, i, &[])?;
        }
        parts.push(rows);
    }
    let mut machine = Machine::new(*cfg);
    let sorted = sort_jobs(&mut machine, vec![SortJob::new(parts)], policy)?
        .pop()
        .expect("one job in, one job out");
    let out = sorted
        .into_iter()
        .map(|rows| (0..rows.len()).map(|r| rows.key(r).to_vec()).collect())
        .collect();
    Ok((DistArray::from_parts(out), machine.into_ledger()))
}

//! A deterministic simulated BSP(p, g, L) machine.
//!
//! Virtual processors run a superstep function against their own state, may
//! post messages, and charge work units. Messages become visible only after
//! the barrier, in the next superstep, ordered by source processor and then
//! by send order. Every barrier appends one record to the [`CostLedger`]:
//! `w` is the largest amount of work charged by any processor and
//! `h = max h_out + max h_in`, counted in words. Messages a processor sends
//! to itself are delivered but cost nothing.
//!
//! Work is only what programs declare through [`Proc::charge`]; message
//! words show up in `h` alone.

use std::ops::Range;

use num_traits::{Num, NumCast};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Machine word carried in messages.
pub type Word = i64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BspConfig {
    pub p: usize,
    /// Cost units per communicated word.
    pub g: f64,
    /// Cost units per barrier.
    pub latency: f64,
}

impl BspConfig {
    pub fn new(p: usize, g: f64, latency: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::BadConfig("p must be at least 1".into()));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::BadConfig(format!(
                "g must be finite and non-negative, got {g}"
            )));
        }
        if !(latency.is_finite() && latency >= 0.0) {
            return Err(Error::BadConfig(format!(
                "latency must be finite and non-negative, got {latency}"
            )));
        }
        Ok(Self { p, g, latency })
    }

    /// `p` processors with `g = 1` and `L = 100`.
    pub fn with_procs(p: usize) -> Result<Self> {
        Self::new(p, 1.0, 100.0)
    }
}

/// Whether slackness preconditions reject an input or only log a warning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SlackPolicy {
    #[default]
    Enforce,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub src: usize,
    pub tag: u64,
    pub words: Vec<Word>,
}

/// A processor's view of the machine during one superstep.
pub struct Proc<'a> {
    pid: usize,
    p: usize,
    inbox: &'a [Message],
    outbox: Vec<(usize, Message)>,
    work: u64,
}

impl<'a> Proc<'a> {
    #[inline]
    pub fn pid(&self) -> usize {
        self.pid
    }

    #[inline]
    pub fn nprocs(&self) -> usize {
        self.p
    }

    /// Messages delivered at the previous barrier.
    #[inline]
    pub fn inbox(&self) -> &'a [Message] {
        self.inbox
    }

    pub fn messages(&self, tag: u64) -> impl Iterator<Item = &'a Message> + 'a {
        self.inbox.iter().filter(move |m| m.tag == tag)
    }

    pub fn send(&mut self, dest: usize, tag: u64, words: Vec<Word>) -> Result<()> {
        if dest >= self.p {
            return Err(Error::BadDestination {
                pid: self.pid,
                dest,
                p: self.p,
            });
        }
        self.outbox.push((
            dest,
            Message {
                src: self.pid,
                tag,
                words,
            },
        ));
        Ok(())
    }

    /// Records `units` of local work.
    #[inline]
    pub fn charge(&mut self, units: u64) {
        self.work += units;
    }
}

/// How virtual processors are scheduled inside a superstep. Results never
/// depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecOrder {
    #[default]
    Sequential,
    /// A fresh random permutation of processors every superstep.
    Shuffled(u64),
    /// Processors run concurrently on the rayon pool.
    Threaded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCost {
    pub w: u64,
    pub h_out: u64,
    pub h_in: u64,
    /// Words sent to other processors, summed over all senders.
    pub sent: u64,
    /// Words received from other processors, summed over all receivers.
    pub received: u64,
}

impl StepCost {
    #[inline]
    pub fn h(&self) -> u64 {
        self.h_out + self.h_in
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    p: usize,
    steps: Vec<StepCost>,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    w: u64,
    h: u64,
}

#[derive(Serialize, Deserialize)]
struct LedgerJson {
    p: usize,
    supersteps: Vec<StepJson>,
    #[serde(rename = "W")]
    work: u64,
    #[serde(rename = "H")]
    comm: u64,
    #[serde(rename = "S")]
    s: usize,
}

impl CostLedger {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            steps: Vec::new(),
        }
    }

    pub fn from_steps(p: usize, steps: Vec<StepCost>) -> Self {
        Self { p, steps }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn steps(&self) -> &[StepCost] {
        &self.steps
    }

    pub fn push(&mut self, step: StepCost) {
        self.steps.push(step);
    }

    /// `S`, the number of barriers.
    pub fn supersteps(&self) -> usize {
        self.steps.len()
    }

    /// `W`, the sum of per-superstep work maxima.
    pub fn work(&self) -> u64 {
        self.steps.iter().map(|s| s.w).sum()
    }

    /// `H`, the sum of per-superstep `h` values.
    pub fn comm(&self) -> u64 {
        self.steps.iter().map(StepCost::h).sum()
    }

    pub fn slice(&self, range: Range<usize>) -> CostLedger {
        CostLedger {
            p: self.p,
            steps: self.steps[range].to_vec(),
        }
    }

    pub fn cost(&self, cfg: &BspConfig) -> f64 {
        ledger_cost(self, cfg.g, cfg.latency)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(LedgerJson {
            p: self.p,
            supersteps: self
                .steps
                .iter()
                .map(|s| StepJson { w: s.w, h: s.h() })
                .collect(),
            work: self.work(),
            comm: self.comm(),
            s: self.supersteps(),
        })
        .expect("ledger serialises")
    }
}

impl Serialize for CostLedger {
    fn serialize<Ser: serde::Serializer>(
        &self,
        s: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        self.to_json().serialize(s)
    }
}

/// `W + H·g + S·L` evaluated in `T`.
pub fn ledger_cost<T: Num + NumCast + Copy>(ledger: &CostLedger, g: T, latency: T) -> T {
    let cast = |x: u64| T::from(x).expect("ledger total fits the cost type");
    cast(ledger.work()) + cast(ledger.comm()) * g + cast(ledger.supersteps() as u64) * latency
}

pub struct Machine {
    cfg: BspConfig,
    order: ExecOrder,
    inboxes: Vec<Vec<Message>>,
    ledger: CostLedger,
    warnings: Vec<String>,
}

impl Machine {
    pub fn new(cfg: BspConfig) -> Self {
        Self::with_order(cfg, ExecOrder::Sequential)
    }

    pub fn with_order(cfg: BspConfig, order: ExecOrder) -> Self {
        Self {
            cfg,
            order,
            inboxes: vec![Vec::new(); cfg.p],
            ledger: CostLedger::new(cfg.p),
            warnings: Vec::new(),
        }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.cfg.p
    }

    pub fn config(&self) -> &BspConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CostLedger {
        self.ledger
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Runs one superstep: `f` is called once per processor with that
    /// processor's state, then the barrier delivers all posted messages.
    /// Messages from the previous superstep that nobody reads are dropped.
    pub fn superstep<S, F>(&mut self, states: &mut [S], f: F) -> Result<()>
    where
        S: Send,
        F: Fn(&mut Proc<'_>, &mut S) -> Result<()> + Sync,
    {
        let p = self.cfg.p;
        if states.len() != p {
            return Err(Error::BadConfig(format!(
                "superstep needs {p} processor states, got {}",
                states.len()
            )));
        }
        let inboxes = std::mem::replace(&mut self.inboxes, vec![Vec::new(); p]);
        let run = |pid: usize, state: &mut S| {
            let mut proc = Proc {
                pid,
                p,
                inbox: &inboxes[pid],
                outbox: Vec::new(),
                work: 0,
            };
            let status = f(&mut proc, state);
            (status, proc.outbox, proc.work)
        };

        let outcomes: Vec<_> = match self.order {
            ExecOrder::Sequential => states
                .iter_mut()
                .enumerate()
                .map(|(pid, s)| run(pid, s))
                .collect(),
            ExecOrder::Shuffled(seed) => {
                let step = self.ledger.supersteps() as u64;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let mut perm: Vec<usize> = (0..p).collect();
                perm.shuffle(&mut rng);
                let mut slots: Vec<Option<_>> = (0..p).map(|_| None).collect();
                let mut refs: Vec<Option<&mut S>> = states.iter_mut().map(Some).collect();
                for pid in perm {
                    let s = refs[pid].take().expect("each processor runs once");
                    slots[pid] = Some(run(pid, s));
                }
                slots
                    .into_iter()
                    .map(|o| o.expect("all processors ran"))
                    .collect()
            }
            ExecOrder::Threaded => states
                .par_iter_mut()
                .enumerate()
                .map(|(pid, s)| run(pid, s))
                .collect(),
        };

        let mut step = StepCost::default();
        let mut h_in = vec![0u64; p];
        let mut delivered: Vec<Vec<Message>> = vec![Vec::new(); p];
        for (pid, (status, outbox, work)) in outcomes.into_iter().enumerate() {
            if let Err(e) = status {
                return Err(match e {
                    Error::Program { .. } | Error::BadDestination { .. } => e,
                    other => Error::Program {
                        pid,
                        msg: other.to_string(),
                    },
                });
            }
            step.w = step.w.max(work);
            let mut out = 0u64;
            for (dest, msg) in outbox {
                if dest != pid {
                    let len = msg.words.len() as u64;
                    out += len;
                    h_in[dest] += len;
                }
                delivered[dest].push(msg);
            }
            step.h_out = step.h_out.max(out);
            step.sent += out;
        }
        step.h_in = h_in.iter().copied().max().unwrap_or(0);
        step.received = h_in.iter().sum();
        self.inboxes = delivered;
        self.ledger.push(step);
        Ok(())
    }
}

/// Block distribution of `n` indices over `p` processors: processor `π`
/// owns `[⌈n/p⌉·π, ⌈n/p⌉·(π+1)) ∩ [0, n)`.
pub fn block_ranges(n: usize, p: usize) -> Vec<Range<usize>> {
    assert!(p >= 1, "at least one processor");
    let b = n.div_ceil(p);
    (0..p)
        .map(|pi| (b * pi).min(n)..(b * (pi + 1)).min(n))
        .collect()
}

/// Processor owning global index `i` under [`block_ranges`].
#[inline]
pub fn block_owner(i: usize, n: usize, p: usize) -> usize {
    let b = n.div_ceil(p).max(1);
    (i / b).min(p - 1)
}

/// An array split into per-processor parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistArray<T> {
    parts: Vec<Vec<T>>,
}

impl<T: Clone> DistArray<T> {
    /// Block-distributes `data` over `p` processors.
    pub fn block(data: &[T], p: usize) -> Self {
        let parts = block_ranges(data.len(), p)
            .into_iter()
            .map(|r| data[r].to_vec())
            .collect();
        Self { parts }
    }

    pub fn gather(&self) -> Vec<T> {
        self.parts.concat()
    }
}

impl<T> DistArray<T> {
    pub fn from_parts(parts: Vec<Vec<T>>) -> Self {
        assert!(!parts.is_empty(), "at least one processor");
        Self { parts }
    }

    pub fn p(&self) -> usize {
        self.parts.len()
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range `I_π` covered by each part.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut at = 0;
        self.parts
            .iter()
            .map(|part| {
                let r = at..at + part.len();
                at = r.end;
                r
            })
            .collect()
    }

    pub fn is_block_distributed(&self) -> bool {
        self.ranges() == block_ranges(self.len(), self.p())
    }

    pub fn parts(&self) -> &[Vec<T>] {
        &self.parts
    }

    pub fn into_parts(self) -> Vec<Vec<T>> {
        self.parts
    }
}

/// One superstep of a [`run_bsp`] program.
pub type StepFn<'a, T> = &'a (dyn Fn(&mut Proc<'_>, &mut Vec<T>) -> Result<()> + Sync);

/// Runs `program` superstep by superstep, each processor starting from its
/// part of `input`. Returns the final parts and the ledger.
pub fn run_bsp<T: Send>(
    program: &[StepFn<'_, T>],
    cfg: &BspConfig,
    input: DistArray<T>,
) -> Result<(DistArray<T>, CostLedger)> {
    run_bsp_ordered(program, cfg, input, ExecOrder::Sequential)
}

pub fn run_bsp_ordered<T: Send>(
    program: &[StepFn<'_, T>],
    cfg: &BspConfig,
    input: DistArray<T>,
    order: ExecOrder,
) -> Result<(DistArray<T>, CostLedger)> {
    if input.p() != cfg.p {
        return Err(Error::BadConfig(format!(
            "input has {} parts for a {}-processor machine",
            input.p(),
            cfg.p
        )));
    }
    let mut machine = Machine::with_order(*cfg, order);
    let mut states = input.into_parts();
    for step in program {
        machine.superstep(&mut states, step)?;
    }
    Ok((DistArray::from_parts(states), machine.into_ledger()))
}

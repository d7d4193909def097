//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sufbsp_core::bsp::{
    ledger_cost, run_bsp_ordered, BspConfig, CostLedger, DistArray, ExecOrder, Machine, StepCost,
    StepFn, Word,
};
use sufbsp_core::dcover::{build_cover, is_cover};
use sufbsp_core::parsa::{bsp_suffix_array_with, round_bound, ParOptions, RoundMetrics};
use sufbsp_core::parsort::bsp_string_sort;
use sufbsp_core::{dc_suffix_array, naive_suffix_array, SlackPolicy, SuffixArray, Text, VSchedule};

const EXAMPLE_TEXT: &[u8] = b"acbaacedbbea";
const EXAMPLE_ENCODED: [i32; 12] = [0, 2, 1, 0, 0, 2, 4, 3, 1, 1, 4, 0];
const EXAMPLE_SA: [usize; 12] = [11, 3, 0, 4, 2, 8, 9, 1, 5, 7, 10, 6];

const ORACLE_TEXTS: usize = 1000;
const ORACLE_MAX_N: usize = 2000;
const CUSTOM_SCHEDULES: usize = 3;

const PAR_N: usize = 1 << 18;
const PAR_PROCS: [usize; 4] = [2, 4, 8, 16];

const COVER_MAX_V: usize = 4096;
const SHIFT_MAX_V: usize = 256;

const SORT_MAX_SUPERSTEPS: usize = 6;

const ROUND_PROCS: [usize; 2] = [4, 16];

/// Multiplicative slack on ideal `W(2)·2/p` scaling.
const SCALING_TOLERANCE: f64 = 1.5;
/// Additive per-processor slack `c` in the scaling bound.
const SCALING_C: f64 = 1024.0;

const LIMIT_EXAMPLE: Duration = Duration::from_secs(1);
const LIMIT_ORACLE: Duration = Duration::from_secs(120);
const LIMIT_PARALLEL: Duration = Duration::from_secs(600);
const LIMIT_COVER: Duration = Duration::from_secs(60);
const LIMIT_SORT: Duration = Duration::from_secs(60);
const LIMIT_BSP: Duration = Duration::from_secs(10);

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let spent = start.elapsed();
    ensure(spent < limit, || {
        format!("took {spent:.2?}, limit {limit:?}")
    })?;
    Ok(spent)
}

fn relaxed() -> ParOptions {
    ParOptions {
        policy: SlackPolicy::Relaxed,
        ..Default::default()
    }
}

fn worked_example() -> Check {
    let start = Instant::now();
    let t = Text::<i32>::encode_bytes(EXAMPLE_TEXT);
    ensure(t.as_slice() == EXAMPLE_ENCODED, || {
        format!("encoded {:?}", t.as_slice())
    })?;
    let mut built: Vec<(String, SuffixArray)> = vec![("naive".into(), naive_suffix_array(&t))];
    for s in [VSchedule::Fixed(3), VSchedule::Accelerated] {
        built.push((format!("seq-dc {s}"), dc_suffix_array(&t, &s)));
    }
    for p in [1, 2, 4] {
        let cfg = BspConfig::with_procs(p).unwrap();
        let (sa, _) =
            bsp_suffix_array_with(&t, &cfg, &relaxed()).map_err(|e| format!("bsp p={p}: {e}"))?;
        built.push((format!("bsp p={p}"), sa));
    }
    for (name, sa) in &built {
        ensure(sa.as_slice() == EXAMPLE_SA, || {
            format!("{name} gave {:?}", sa.as_slice())
        })?;
    }
    let spent = within(start, LIMIT_EXAMPLE)?;
    Ok(format!("{} builders agree in {spent:.2?}", built.len()))
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut texts = Vec::new();
    for i in 0..ORACLE_TEXTS {
        let n = rng.gen_range(0..=ORACLE_MAX_N);
        let sigma = [2, 4, 16, n.max(1)][i % 4];
        texts.push(
            (0..n)
                .map(|_| rng.gen_range(0..sigma) as i32)
                .collect::<Vec<_>>(),
        );
    }
    for n in [1, 2, 3, 7, 64, 999, ORACLE_MAX_N] {
        texts.push(vec![0; n]);
        texts.push((0..n).map(|i| (i % 2) as i32).collect());
    }
    for raw in &texts {
        // relabel to ranks so the alphabet fits in [0, n)
        let mut alphabet = raw.clone();
        alphabet.sort_unstable();
        alphabet.dedup();
        let ranked = raw
            .iter()
            .map(|c| alphabet.binary_search(c).unwrap() as i32)
            .collect();
        let t = Text::from_symbols(ranked).map_err(|e| e.to_string())?;
        let expect = naive_suffix_array(&t);
        let mut schedules = vec![VSchedule::Fixed(3), VSchedule::Accelerated];
        for _ in 0..CUSTOM_SCHEDULES {
            let len = rng.gen_range(1..5);
            schedules.push(VSchedule::Custom(
                (0..len).map(|_| rng.gen_range(3..40)).collect(),
            ));
        }
        for s in &schedules {
            let sa = dc_suffix_array(&t, s);
            ensure(sa == expect, || {
                format!("n={} schedule {s} differs from naive", t.len())
            })?;
        }
    }
    let spent = within(start, LIMIT_ORACLE)?;
    Ok(format!(
        "{} texts x {} schedules in {spent:.2?}",
        texts.len(),
        2 + CUSTOM_SCHEDULES
    ))
}

struct ParRun {
    text: &'static str,
    p: usize,
    schedule: VSchedule,
    metrics: RoundMetrics,
}

fn par_texts() -> Vec<(&'static str, Text<i32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(218);
    let random: Vec<i32> = (0..PAR_N).map(|_| rng.gen_range(0..4)).collect();
    vec![
        ("random4", Text::from_symbols(random).unwrap()),
        (
            "(ab)^n",
            Text::from_symbols((0..PAR_N).map(|i| (i % 2) as i32).collect()).unwrap(),
        ),
        ("a^n", Text::from_symbols(vec![0; PAR_N]).unwrap()),
    ]
}

fn policy_for(n: usize, p: usize) -> SlackPolicy {
    // n ≥ p^{9/2}
    if (n as u128).pow(2) >= (p as u128).pow(9) {
        SlackPolicy::Enforce
    } else {
        SlackPolicy::Relaxed
    }
}

/// Runs every parallel configuration the later criteria need and checks
/// output equivalence along the way.
fn parallel_equivalence(runs: &mut Vec<ParRun>) -> Check {
    let start = Instant::now();
    for (name, t) in par_texts() {
        let expect = dc_suffix_array(&t, &VSchedule::Fixed(3));
        let mut schedules = vec![(VSchedule::Accelerated, PAR_PROCS.to_vec())];
        schedules.push((VSchedule::Fixed(3), ROUND_PROCS.to_vec()));
        for (schedule, procs) in schedules {
            for p in procs {
                let cfg = BspConfig::with_procs(p).unwrap();
                let opts = ParOptions {
                    policy: policy_for(t.len(), p),
                    schedule: schedule.clone(),
                    ..Default::default()
                };
                let (sa, metrics) = bsp_suffix_array_with(&t, &cfg, &opts)
                    .map_err(|e| format!("{name} p={p} {schedule}: {e}"))?;
                ensure(sa == expect, || {
                    format!("{name} p={p} {schedule} differs from dc_suffix_array")
                })?;
                runs.push(ParRun {
                    text: name,
                    p,
                    schedule: schedule.clone(),
                    metrics,
                });
            }
        }
    }
    let spent = within(start, LIMIT_PARALLEL)?;
    Ok(format!(
        "{} runs at n={PAR_N} identical to the sequential result in {spent:.2?}",
        runs.len()
    ))
}

fn difference_covers() -> Check {
    let start = Instant::now();
    let mut largest = 0;
    for v in 3..=COVER_MAX_V {
        let dc = build_cover(v).map_err(|e| e.to_string())?;
        let d = dc.elements();
        let k = d.len();
        ensure(is_cover(d, v), || format!("v={v}: not a cover"))?;
        ensure(!dc.contains(0), || format!("v={v}: contains 0"))?;
        ensure(k < v, || format!("v={v}: |D|={k}"))?;
        ensure(k as f64 <= 3.0 * (v as f64).sqrt() + 6.0, || {
            format!("v={v}: |D|={k} too large")
        })?;
        ensure(k * (k - 1) + 1 >= v, || {
            format!("v={v}: |D|={k} too small to cover")
        })?;
        largest = largest.max(k);
        if v <= SHIFT_MAX_V {
            for k1 in 0..v {
                for k2 in 0..v {
                    let l = dc.shift_for_pair(k1, k2);
                    ensure(
                        dc.contains((k1 + l) % v) && dc.contains((k2 + l) % v),
                        || format!("v={v}: shift {l} for ({k1},{k2}) leaves the cover"),
                    )?;
                }
            }
        }
    }
    let spent = within(start, LIMIT_COVER)?;
    Ok(format!(
        "v in [3, {COVER_MAX_V}], max |D| = {largest}, in {spent:.2?}"
    ))
}

fn constant_supersteps() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = Vec::new();
    for p in [2, 4, 8] {
        for m in [p * p * p, 4 * p * p * p] {
            let rows: Vec<Vec<Word>> = (0..m)
                .map(|_| (0..3).map(|_| rng.gen_range(-1..20)).collect())
                .collect();
            let cfg = BspConfig::with_procs(p).unwrap();
            let (out, ledger) =
                bsp_string_sort(&DistArray::block(&rows, p), &cfg, SlackPolicy::Enforce)
                    .map_err(|e| format!("p={p} m={m}: {e}"))?;
            let mut expect = rows;
            expect.sort();
            ensure(out.gather() == expect, || {
                format!("p={p} m={m}: wrong order")
            })?;
            seen.push((p, m, ledger.supersteps()));
        }
    }
    let s = seen[0].2;
    ensure(
        seen.iter().all(|x| x.2 == s) && s <= SORT_MAX_SUPERSTEPS,
        || format!("superstep counts {seen:?}"),
    )?;
    let spent = within(start, LIMIT_SORT)?;
    Ok(format!(
        "S = {s} for all {} (p, m) pairs in {spent:.2?}",
        seen.len()
    ))
}

fn find<'a>(runs: &'a [ParRun], text: &str, p: usize, schedule: &VSchedule) -> &'a RoundMetrics {
    &runs
        .iter()
        .find(|r| r.text == text && r.p == p && &r.schedule == schedule)
        .expect("run recorded by the parallel criterion")
        .metrics
}

fn round_count(runs: &[ParRun]) -> Check {
    ensure(!runs.is_empty(), || "parallel runs unavailable".into())?;
    let mut detail = Vec::new();
    for (name, _) in par_texts() {
        for p in ROUND_PROCS {
            let accel = find(runs, name, p, &VSchedule::Accelerated).rounds.len();
            let fixed = find(runs, name, p, &VSchedule::Fixed(3)).rounds.len();
            let bound = round_bound(p);
            ensure(accel <= bound, || {
                format!("{name} p={p}: {accel} rounds > bound {bound}")
            })?;
            ensure(accel <= fixed, || {
                format!("{name} p={p}: accel {accel} rounds > fixed:3 {fixed}")
            })?;
            detail.push(format!("{name} p={p}: {accel}<={bound}, fixed:3 {fixed}"));
        }
    }
    Ok(detail.join("; "))
}

fn cost_scaling(runs: &[ParRun]) -> Check {
    ensure(!runs.is_empty(), || "parallel runs unavailable".into())?;
    let accel = VSchedule::Accelerated;
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for (name, _) in par_texts() {
        let w2 = find(runs, name, 2, &accel).total.work() as f64;
        for p in PAR_PROCS {
            let m = find(runs, name, p, &accel);
            let w = m.total.work() as f64;
            let bound = SCALING_TOLERANCE * w2 * 2.0 / p as f64 + SCALING_C * p as f64;
            if w > bound {
                failures.push(format!("{name} p={p}: W={w} > {bound:.0}"));
            }
            let works: Vec<u64> = m.rounds.iter().map(|r| r.w).collect();
            for i in 0..works.len().saturating_sub(1) {
                if works[i + 1] > works[i] {
                    failures.push(format!(
                        "{name} p={p}: round {} work {} > round {} work {}",
                        i + 2,
                        works[i + 1],
                        i + 1,
                        works[i]
                    ));
                }
            }
            detail.push(format!("{name} p={p}: W={w} rounds {works:?}"));
        }
    }
    if failures.is_empty() {
        Ok(detail.join("; "))
    } else {
        Err(failures.join("; "))
    }
}

fn chatter(order: ExecOrder) -> Result<(Vec<i64>, CostLedger), String> {
    let step: StepFn<'_, i64> = &|proc, local| {
        let mut acc = local.iter().fold(0i64, |a, &x| a.wrapping_add(x));
        for msg in proc.inbox() {
            for &w in &msg.words {
                acc = acc.wrapping_mul(31).wrapping_add(w ^ msg.src as i64);
            }
        }
        proc.charge(local.len() as u64 + 1);
        for k in 0..acc.unsigned_abs() as usize % 3 + 1 {
            let dest = (acc.unsigned_abs() as usize + k) % proc.nprocs();
            proc.send(dest, k as u64, vec![acc; k + 1])?;
        }
        local.push(acc);
        Ok(())
    };
    let input: Vec<i64> = (0..50).map(|i| i * 7 % 13).collect();
    let cfg = BspConfig::with_procs(5).unwrap();
    let (out, ledger) = run_bsp_ordered(&[step; 8], &cfg, DistArray::block(&input, 5), order)
        .map_err(|e| e.to_string())?;
    Ok((out.gather(), ledger))
}

fn bsp_suite() -> Check {
    let start = Instant::now();
    let reference = chatter(ExecOrder::Sequential)?;
    for order in [
        ExecOrder::Shuffled(1),
        ExecOrder::Shuffled(2),
        ExecOrder::Threaded,
    ] {
        ensure(chatter(order)? == reference, || {
            format!("{order:?} diverges")
        })?;
    }

    for order in [
        ExecOrder::Sequential,
        ExecOrder::Shuffled(7),
        ExecOrder::Threaded,
    ] {
        let mut m = Machine::with_order(BspConfig::with_procs(4).unwrap(), order);
        let mut st = vec![Ok::<(), String>(()); 4];
        for round in 0..4i64 {
            m.superstep(&mut st, |proc, bad| {
                if proc.inbox().iter().any(|msg| msg.words[0] != round - 1) {
                    *bad = Err(format!(
                        "{order:?}: stale or early message in superstep {round}"
                    ));
                }
                for d in 0..proc.nprocs() {
                    proc.send(d, 0, vec![round])?;
                }
                Ok(())
            })
            .map_err(|e| e.to_string())?;
        }
        st.into_iter().collect::<Result<Vec<_>, _>>()?;
    }

    for s in reference.1.steps() {
        ensure(s.sent == s.received, || {
            format!("sent {} received {}", s.sent, s.received)
        })?;
    }

    let ledger = CostLedger::from_steps(
        2,
        vec![
            StepCost {
                w: 5,
                h_out: 3,
                h_in: 3,
                ..Default::default()
            },
            StepCost {
                w: 5,
                ..Default::default()
            },
        ],
    );
    let cost = ledger_cost(&ledger, 2.0, 100.0);
    ensure(cost == 222.0, || format!("ledger_cost gave {cost}"))?;
    let spent = within(start, LIMIT_BSP)?;
    Ok(format!(
        "determinism, isolation, conservation, cost 222 in {spent:.2?}"
    ))
}

fn main() {
    let mut runs = Vec::new();
    let results: Vec<(&str, Check)> = vec![
        ("worked example", worked_example()),
        ("oracle equivalence", oracle_equivalence()),
        ("parallel equivalence", parallel_equivalence(&mut runs)),
        ("difference covers", difference_covers()),
        ("constant sort supersteps", constant_supersteps()),
        ("round count", round_count(&runs)),
        ("cost scaling", cost_scaling(&runs)),
        ("bsp simulator", bsp_suite()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("criterion {} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sufbsp_core::bsp::{BspConfig, DistArray, Machine, Word};
use sufbsp_core::parsort::{bsp_string_sort, sort_jobs, Rows, SortJob};
use sufbsp_core::SlackPolicy;

// per-processor words moved in any superstep, in units of κ·⌈m/p⌉
const COMM_FACTOR: u64 = 4;

fn random_rows(m: usize, width: usize, range: Word, seed: u64) -> Vec<Vec<Word>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| (0..width).map(|_| rng.gen_range(-1..range)).collect())
        .collect()
}

#[test]
fn matches_stable_sort() {
    for p in [2, 4, 8] {
        for (width, range) in [(1, 3), (3, 5), (5, 1000)] {
            for m in [p * p * p, 4 * p * p * p] {
                let rows = random_rows(m, width, range, (p * 1000 + width * 10 + m) as u64);
                let cfg = BspConfig::with_procs(p).unwrap();
                let (out, _) =
                    bsp_string_sort(&DistArray::block(&rows, p), &cfg, SlackPolicy::Enforce)
                        .unwrap();
                let mut expect = rows.clone();
                expect.sort();
                assert!(out.is_block_distributed(), "p={p} m={m}");
                assert_eq!(out.gather(), expect, "p={p} width={width} m={m}");
            }
        }
    }
}

#[test]
fn identical_rows_keep_index_order() {
    for p in [2, 4] {
        let m = 2 * p * p * p;
        let ranges = sufbsp_core::bsp::block_ranges(m, p);
        let parts = ranges
            .iter()
            .map(|r| {
                let mut rows = Rows::new(2, 1);
                for i in r.clone() {
                    rows.push(&[7, 7], i, &[i as Word * 10]).unwrap();
                }
                rows
            })
            .collect();
        let mut machine = Machine::new(BspConfig::with_procs(p).unwrap());
        let out = sort_jobs(
            &mut machine,
            vec![SortJob::new(parts)],
            SlackPolicy::Enforce,
        )
        .unwrap();
        let mut seen = Vec::new();
        for rows in &out[0] {
            for r in 0..rows.len() {
                assert_eq!(rows.payload(r), &[rows.index(r) as Word * 10]);
                seen.push(rows.index(r));
            }
        }
        assert_eq!(seen, (0..m).collect::<Vec<_>>());
    }
}

#[test]
fn superstep_count_is_constant() {
    let mut counts = Vec::new();
    for p in [2, 4, 8] {
        for m in [p * p * p, 4 * p * p * p] {
            let rows = random_rows(m, 2, 50, m as u64);
            let cfg = BspConfig::with_procs(p).unwrap();
            let (_, ledger) =
                bsp_string_sort(&DistArray::block(&rows, p), &cfg, SlackPolicy::Enforce).unwrap();
            counts.push(ledger.supersteps());
        }
    }
    assert!(
        counts.iter().all(|&s| s == counts[0] && s <= 6),
        "{counts:?}"
    );
}

#[test]
fn communication_is_linear_in_block_size() {
    for p in [2, 4, 8] {
        for width in [1, 4] {
            let m = 4 * p * p * p;
            let rows = random_rows(m, width, 1 << 20, (p + width) as u64);
            let cfg = BspConfig::with_procs(p).unwrap();
            let (_, ledger) =
                bsp_string_sort(&DistArray::block(&rows, p), &cfg, SlackPolicy::Enforce).unwrap();
            let budget = COMM_FACTOR * (width * m.div_ceil(p)) as u64;
            for s in ledger.steps() {
                assert!(
                    s.h_out <= budget && s.h_in <= budget,
                    "p={p} width={width}: {s:?} > {budget}"
                );
            }
        }
    }
}

#[test]
fn slack_policy() {
    let rows = random_rows(20, 2, 9, 3);
    let cfg = BspConfig::with_procs(4).unwrap();
    assert!(bsp_string_sort(&DistArray::block(&rows, 4), &cfg, SlackPolicy::Enforce).is_err());
    let (out, _) =
        bsp_string_sort(&DistArray::block(&rows, 4), &cfg, SlackPolicy::Relaxed).unwrap();
    let mut expect = rows;
    expect.sort();
    assert_eq!(out.gather(), expect);
}

#[test]
fn single_processor_sorts_locally() {
    let rows = random_rows(100, 3, 4, 9);
    let cfg = BspConfig::with_procs(1).unwrap();
    let (out, ledger) =
        bsp_string_sort(&DistArray::block(&rows, 1), &cfg, SlackPolicy::Enforce).unwrap();
    let mut expect = rows;
    expect.sort();
    assert_eq!(out.gather(), expect);
    assert!(ledger.supersteps() <= 1);
}

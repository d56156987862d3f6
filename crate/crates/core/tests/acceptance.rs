//! One pass/fail line per acceptance criterion. All checks are exact (no
//! numeric tolerance); criterion 6 is reported but does not gate.

mod common;

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pithreads::analyzer::{check_soundness, run, AnalysisConfig, Analysis, PartitionChoice, Verdict};
use pithreads::concrete::{explore, ExploreLimits};
use pithreads::corpus;
use pithreads::engine::iterate;
use pithreads::env::{EnvAnalysis, EnvMap};
use pithreads::numeric::{CountVar, Itv, LinExpr, NumElem};
use pithreads::partition::{AbstractUnit, GetVar};
use pithreads::SystemIndex;

const SEED: u64 = 0x5eed;
const ORACLE_CONFIGS: usize = 5000;
const MEMORY_TIME_LIMIT: Duration = Duration::from_secs(30);
const AFFINE_INSTANCES: usize = 1000;
const WIDENING_CHAINS: usize = 300;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn analyze(source: &str, partition: PartitionChoice, queries: &[&str]) -> Analysis {
    let config = AnalysisConfig {
        partition,
        queries: queries.iter().map(|q| q.to_string()).collect(),
        ..AnalysisConfig::default()
    };
    run(source, &config).expect("corpus system analyzes")
}

fn verdicts(a: &Analysis) -> Vec<Verdict> {
    a.queries.iter().map(|q| q.verdict).collect()
}

fn shared_memory() -> Outcome {
    let start = Instant::now();
    let a = analyze(corpus::MEMORY, PartitionChoice::Channel, &["mutex unit cell over {2,6,10}"]);
    let elapsed = start.elapsed();
    let l = |s: &str| a.sys.lookup_label(s).unwrap();
    let cell = AbstractUnit(vec![a.sys.lookup_var("cell").unwrap()]);
    let e = a.contents.get(&cell);
    let y = a.space.index(CountVar::StepCount(l("1"), l("13"))).unwrap();
    let sum = [l("2"), l("6"), l("10")].map(|x| (a.space.x(x), 1));
    let equality = e.entails_zero(&LinExpr::new(sum.into_iter().chain([(y, -1)])));
    let interval = e.val().is_some_and(|v| v.intervals()[y] == Itv { lo: 0, hi: Some(1) });
    let proved = verdicts(&a) == [Verdict::Proved];
    outcome(
        a.stabilized && equality && interval && proved && elapsed < MEMORY_TIME_LIMIT,
        format!(
            "x2+x6+x10 = y(1,13): {equality}, 0 <= y(1,13) <= 1: {interval}, mutex proved: {proved}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn semaphore() -> Outcome {
    let a = analyze(
        corpus::SEMAPHORE2,
        PartitionChoice::Channel,
        &["unit a: x@2 + x@3 + x@5 <= 2", "unit a: x@2 + x@3 + x@5 <= 1"],
    );
    let v = verdicts(&a);
    let exploration = explore(&a.sys, None, ExploreLimits { max_configs: usize::MAX, max_depth: 6 }).unwrap();
    let outputs: Vec<_> = ["2", "3", "5"].iter().map(|s| a.sys.lookup_label(s).unwrap()).collect();
    let av = a.sys.lookup_var("a").unwrap();
    let witness = exploration.states.iter().any(|st| {
        let mut counts = std::collections::BTreeMap::new();
        for t in st.config.threads().filter(|t| outputs.contains(&t.label)) {
            *counts.entry(t.lookup(&a.sys, av).unwrap().clone()).or_insert(0) += 1;
        }
        counts.values().any(|&n| n == 2)
    });
    outcome(
        v == [Verdict::Proved, Verdict::Unknown] && witness,
        format!("<= 2: {:?}, <= 1: {:?}, two-output configuration within depth 6: {witness}", v[0], v[1]),
    )
}

fn label_names(sys: &SystemIndex, env: &EnvMap, label: &str, var: &str) -> Vec<String> {
    let l = sys.lookup_label(label).unwrap();
    let v = sys.lookup_var(var).unwrap();
    env.labels_of(l, v).iter().map(|r| sys.var(r).to_string()).collect()
}

fn synchronous_communication() -> Outcome {
    let a = analyze(corpus::SYNCCOMM, PartitionChoice::Channel, &[]);
    let (u, v) = (label_names(&a.sys, &a.env, "4", "u"), label_names(&a.sys, &a.env, "7", "v"));
    let product = u.iter().all(|n| n == "c") && v.iter().all(|n| n == "b");
    let gv = GetVar::channel(&a.sys);
    let alone = iterate(&EnvAnalysis::new(&a.sys, &gv), &a.sys, &gv, 1000);
    let (su, sv) = (label_names(&a.sys, &alone.element, "4", "u"), label_names(&a.sys, &alone.element, "7", "v"));
    let standalone_fails = su == ["b", "c"] && sv == ["b", "c"];
    outcome(
        product && standalone_fails,
        format!("product: u at 4 -> {u:?}, v at 7 -> {v:?}; environment alone: u -> {su:?}, v -> {sv:?}"),
    )
}

fn oracle_soundness() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for partition in [PartitionChoice::Channel, PartitionChoice::Marker] {
        for (name, source) in corpus::ALL {
            let a = analyze(source, partition.clone(), &[]);
            let limits = ExploreLimits { max_configs: ORACLE_CONFIGS, max_depth: usize::MAX };
            let r = check_soundness(&a.sys, &a.gv, &a.space, &a.env, &a.contents, limits).unwrap();
            let covered = r.configurations >= ORACLE_CONFIGS || !r.truncated;
            pass &= a.stabilized && covered && r.violations.is_empty();
            if !r.violations.is_empty() {
                eprintln!("{name}:\n{}", r.render_text());
            }
            details.push(format!("{name}/{partition:?}: {} configs, {} violations", r.configurations, r.violations.len()));
        }
    }
    outcome(pass, details.join("; "))
}

fn domain_properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut failures = Vec::new();

    let normalized: Result<usize, String> = (1..=3).map(common::check_normalize_universe).sum();
    if let Err(e) = &normalized {
        failures.push(format!("(a) {e}"));
    }

    let mut hulls = 0;
    for _ in 0..AFFINE_INSTANCES {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=6);
        let points: Vec<Vec<i64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(0..=3)).collect()).collect();
        match common::check_affine_hull(&points) {
            Ok(()) => hulls += 1,
            Err(e) => failures.push(format!("(b) {e}")),
        }
    }

    let ranges: Vec<(i64, i64)> = (0..=2).flat_map(|lo| (lo..=2).map(move |hi| (lo, hi))).collect();
    let mut boxes = 0;
    for dim in 1..=3usize {
        let mut all: Vec<Vec<(i64, i64)>> = vec![vec![]];
        for _ in 0..dim {
            all = all.into_iter().flat_map(|b| ranges.iter().map(move |r| [b.clone(), vec![*r]].concat())).collect();
        }
        for b in &all {
            for mask in 0..1usize << dim {
                let set: Vec<usize> = (0..dim).filter(|j| mask & (1 << j) != 0).collect();
                match common::check_chi_on_box(b, &set) {
                    Ok(()) => boxes += 1,
                    Err(e) => failures.push(format!("(c) {e}")),
                }
            }
        }
    }

    let mut chains = 0;
    for _ in 0..WIDENING_CHAINS {
        let dim = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=12);
        let points: Vec<Vec<i64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(0..=6)).collect()).collect();
        match common::check_widening_chain(&points) {
            Ok(()) => chains += 1,
            Err(e) => failures.push(format!("(d) {e}")),
        }
    }
    let mut w = NumElem::from_parts(vec![Itv::point(0)], []);
    let mut steps = 0;
    for n in 1..50 {
        let next = w.widen(&NumElem::from_parts(vec![Itv { lo: 0, hi: Some(n) }], []));
        steps += usize::from(next != w);
        w = next;
    }
    if steps > 3 {
        failures.push(format!("(d) the chain [0,n] changed {steps} times"));
    }

    for f in failures.iter().take(5) {
        eprintln!("{f}");
    }
    outcome(
        failures.is_empty(),
        format!(
            "(a) {} elements, (b) {hulls}/{AFFINE_INSTANCES} hulls, (c) {boxes} boxes, (d) {chains}/{WIDENING_CHAINS} chains and [0,n] in {steps} steps",
            normalized.unwrap_or(0)
        ),
    )
}

fn stretch() -> Outcome {
    let d = analyze(corpus::DLIST, PartitionChoice::Channel, &["mutex unit c1 over {4,15}"]);
    let l14 = d.sys.lookup_label("14").unwrap();
    let (c, c2) = (d.sys.lookup_var("c").unwrap(), d.sys.lookup_var("c''").unwrap());
    let equal = d.env.get(l14).are_equal(&c, &c2);
    let o = analyze(corpus::OBJECTS, PartitionChoice::Marker, &["unit *: x@16 <= 1"]);
    let (dv, ov) = (verdicts(&d)[0], verdicts(&o)[0]);
    outcome(
        equal && dv == Verdict::Proved && ov == Verdict::Proved,
        format!("dlist c = c'' at 14: {equal}, dlist per-cell mutex: {dv:?}, objects x16 <= 1 by marker: {ov:?}"),
    )
}

#[test]
fn acceptance() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, bool); 6] = [
        ("1 shared memory mutual exclusion", shared_memory, true),
        ("2 two-token semaphore bound", semaphore, true),
        ("3 contents refine environments", synchronous_communication, true),
        ("4 oracle soundness", oracle_soundness, true),
        ("5 domain properties", domain_properties, true),
        ("6 stretch: dlist and marker-mode objects", stretch, false),
    ];
    let mut failed = Vec::new();
    for (name, check, gating) in criteria {
        let o = check();
        let status = match (o.pass, gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (not gating)",
        };
        println!("criterion {name}: {status} [exact] {}", o.detail);
        if !o.pass && gating {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use cqmin_core::access::{build_min_da, build_unranked_da, count_via_access, single_access, LexDA};
use cqmin_core::elim::{eliminate_min_predicate, eliminate_min_predicate_with};
use cqmin_core::enumerate::{drain_with_stats, enumerate_ranked, enumerate_with_predicate};
use cqmin_core::gen::{path_family, random_database, random_instance, rng, star_family, Generated, Shape};
use cqmin_core::oracle::{oracle_answers, oracle_answers_where, Filter};
use cqmin_core::partition::{check_enforcement, partition_min_orders};
use cqmin_core::qmodel::{parse_query, Answer, ConjunctiveQuery, Database, MinPredicate, Relation, Var};
use cqmin_core::structure::{classify, query_join_tree, Task, Witness};
use cqmin_core::{Error, Exec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const TWO_BRANCH: &str = "Q(x0,x1,x2,y) :- R0(x0), R1(x1,y), R2(x2,y).\nPREDICATE x0 <= MIN(x1,x2).";

const EIGHT_ATOMS: &str = "Q(x0,x1,y1,x2,x3,y5,y6,x4,x5,y7,x6,x7) :- R0(x0,x1,y1), R1(y1,x2), R2(y1,x3), R3(y1,y5), \
    R4(y1,y6,x4), R5(y1,y6,x5), R6(y1,y7,x6), R7(y1,y7,x7).\n\
    PREDICATE x0 <= MIN(x1,x2,x3,x4,x5,x6,x7).";

const CHAINED: &str = "Q(x1,x2,x3,y) :- R1(x1), R2(x2,y), R3(x3,y).\nPREDICATE x1 <= MIN(x1,x2).";

fn db_of(rels: &[(&str, usize, &[&[i64]])]) -> Database {
    let mut db = Database::new();
    for (sym, arity, rows) in rels {
        db.insert(Relation::from_ints(sym, *arity, rows).unwrap()).unwrap();
    }
    db
}

/// Atoms of a part are renamed `{source}_..._p{part}`.
fn vars_of(q: &ConjunctiveQuery, source: &str, part: usize) -> Vec<Var> {
    let (pre, suf) = (format!("{source}_"), format!("_p{part}"));
    q.atoms()
        .iter()
        .find(|a| a.symbol.starts_with(&pre) && a.symbol.ends_with(&suf))
        .map(|a| a.vars.clone())
        .unwrap_or_default()
}

/// Two parts, one per order of x1 and x2; in each, fresh variables chain
/// R0 to the middle atom and the middle atom to the last one.
fn golden_two_part() -> Outcome {
    let start = Instant::now();
    let pq = parse_query(TWO_BRANCH).map_err(s)?;
    let (q, p) = (&pq.query, pq.predicate.as_ref().unwrap());
    let db = db_of(&[
        ("R0", 1, &[&[1], &[2]]),
        ("R1", 2, &[&[1, 0], &[2, 0], &[4, 1]]),
        ("R2", 2, &[&[2, 0], &[3, 0], &[0, 1]]),
    ]);
    let r = eliminate_min_predicate_with(q, p, &db, Exec::Sequential).map_err(s)?;
    ensure(r.parts.len() == 2, || format!("{} parts", r.parts.len()))?;
    let v = |n: &str| q.var(n).unwrap();
    let mut seen_orders = BTreeSet::new();
    for (k, part) in r.parts.iter().enumerate() {
        let pqy = &part.query;
        ensure(pqy.is_full() && cqmin_core::structure::is_acyclic(pqy), || format!("part {k} not full acyclic"))?;
        ensure(part.fresh.len() == 2, || format!("part {k}: {} fresh variables", part.fresh.len()))?;
        let order: Vec<(String, String)> =
            part.order.iter().map(|&(a, b)| (q.name(a).to_string(), q.name(b).to_string())).collect();
        let mid = match order.as_slice() {
            [(a, b), (c, d)] if a == "x0" && b == c && (b == "x1" || b == "x2") && d != b && d != "x0" => b.clone(),
            _ => return Err(format!("part {k}: order {order:?}")),
        };
        seen_orders.insert(mid.clone());
        let last = if mid == "x1" { "x2" } else { "x1" };
        let sym = |x: &str| format!("R{}", &x[1..]);
        let (f1, f2) = (part.fresh[0], part.fresh[1]);
        let r0 = vars_of(pqy, &sym("x0"), k + 1);
        let rm = vars_of(pqy, &sym(&mid), k + 1);
        let rl = vars_of(pqy, &sym(last), k + 1);
        let want_r0 = vec![v("x0"), f1];
        ensure(r0 == want_r0, || format!("part {k}: {}", pqy))?;
        ensure(rm.len() == 4 && rm.contains(&f1) && rm.contains(&f2) && rm.contains(&v("y")), || {
            format!("part {k}: {}", pqy)
        })?;
        ensure(rl.len() == 3 && rl.contains(&f2) && !rl.contains(&f1), || format!("part {k}: {}", pqy))?;
    }
    ensure(seen_orders.len() == 2, || "both orders must occur".into())?;
    let want: BTreeSet<Answer> = oracle_answers_where(q, &db, &Filter::Min(p.clone())).map_err(s)?;
    let mut got = Vec::new();
    for (k, part) in r.parts.iter().enumerate() {
        for a in oracle_answers(&part.query, &part.db).map_err(s)? {
            got.push(r.project(k, &a));
        }
    }
    let n = got.len();
    let got: BTreeSet<Answer> = got.into_iter().collect();
    ensure(n == got.len() && got == want, || format!("union {n} answers vs oracle {}", want.len()))?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("2 parts, x0<x1<x2 and x0<x2<x1, {} answers, {took:.1?}", want.len()))
}

fn golden_four_pair() -> Outcome {
    let pq = parse_query(EIGHT_ATOMS).map_err(s)?;
    let (q, p) = (&pq.query, pq.predicate.as_ref().unwrap());
    let tree = query_join_tree(q).ok_or("cyclic")?;
    let root = tree.first_containing(p.x0).unwrap();
    let pairs = partition_min_orders(&tree.rerooted(root), p.x0, &p.others()).map_err(s)?;
    ensure(pairs.len() == 4, || format!("{} pairs", pairs.len()))?;
    for (i, pair) in pairs.iter().enumerate() {
        pair.tree.check_running_intersection().map_err(|e| format!("pair {i}: {e}"))?;
        check_enforcement(&pair.tree, &pair.order).map_err(|e| format!("pair {i}: {e}"))?;
    }
    Ok("4 order-tree pairs, running intersection and enforcement hold".into())
}

fn partition_exhaustive() -> Outcome {
    let (shapes, orders) = common::partition_exhaustiveness(200, 10_000)?;
    Ok(format!("{shapes} shapes, {orders} total orders, each extends exactly one part"))
}

fn oracle_sweep() -> Outcome {
    let shape = Shape::default();
    let mut tally = common::Tally::default();
    for seed in 0..1000u64 {
        let g = random_instance(seed, &shape);
        let exec = if seed % 2 == 0 { Exec::Parallel } else { Exec::Sequential };
        let t = common::check_instance(&g, exec).map_err(|e| format!("seed {seed}: {e}\n{}", g.text()))?;
        tally.add(&t);
    }
    Ok(format!(
        "1000 instances, 0 divergences (tractable per task {:?}, refused {:?})",
        tally.tractable, tally.refused
    ))
}

fn path_contrast() -> Outcome {
    let g = path_family(16, 0);
    let (q, p) = (&g.query, g.predicate.as_ref().unwrap());
    let v = classify(Task::Elimination, q, Some(p), None).map_err(s)?;
    ensure(!v.tractable && v.path_len() == Some(3), || format!("verdict {v:?}"))?;
    ensure(matches!(eliminate_min_predicate(q, p, &g.db), Err(Error::Intractable { .. })), || {
        "elimination was not refused".into()
    })?;
    let shape = Shape {
        domain: 6,
        max_tuples: 25,
        ..Shape::default()
    };
    let mut answers = 0;
    for seed in 0..50u64 {
        let db = random_database(&mut rng(seed), q, &shape);
        let want = oracle_answers_where(q, &db, &Filter::Min(p.clone())).map_err(s)?;
        let got: Vec<Answer> = enumerate_with_predicate(q, p, &db).map_err(s)?.collect();
        let n = got.len();
        let got: BTreeSet<Answer> = got.into_iter().collect();
        ensure(n == got.len() && got == want, || format!("seed {seed}: {n} answers, oracle {}", want.len()))?;
        answers += n;
    }
    Ok(format!("elimination refused (3-path), enumeration exact on 50 databases ({answers} answers)"))
}

fn non_composable() -> Outcome {
    let pq = parse_query(CHAINED).map_err(s)?;
    let q = &pq.query;
    let db = db_of(&[("R1", 1, &[&[1], &[2]]), ("R2", 2, &[&[2, 0], &[1, 1]]), ("R3", 2, &[&[5, 0], &[0, 1]])]);
    let r = eliminate_min_predicate(q, pq.predicate.as_ref().unwrap(), &db).map_err(s)?;
    ensure(r.parts.len() == 1, || format!("{} parts", r.parts.len()))?;
    let part = &r.parts[0].query;
    let x = |n: &str| q.var(n).unwrap();
    let second = MinPredicate::new(x("x1"), vec![x("x3")], false).map_err(s)?;
    let before = classify(Task::Elimination, q, Some(&second), None).map_err(s)?;
    ensure(before.tractable, || "second predicate should be tractable on the input query".into())?;
    let px = |n: &str| part.var(n).unwrap();
    let second_on_part = MinPredicate::new(px("x1"), vec![px("x3")], false).map_err(s)?;
    let after = classify(Task::Elimination, part, Some(&second_on_part), None).map_err(s)?;
    let Some(Witness::BadPath { path }) = &after.witness else {
        return Err(format!("verdict on part {part}: {after:?}"));
    };
    ensure(!after.tractable && path.len() == 4, || format!("path {path:?}"))?;
    let ends: BTreeSet<&str> = [path[0].as_str(), path[3].as_str()].into();
    ensure(ends == ["x1", "x3"].into(), || format!("path {path:?}"))?;
    Ok(format!("part {part}: witness {}", path.join(" - ")))
}

const SIZES: [u32; 7] = [10, 11, 12, 13, 14, 15, 16];

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn envelopes() -> Outcome {
    let start = Instant::now();
    let mut build = Vec::new();
    let mut probe = Vec::new();
    let mut delay = Vec::new();
    let mut ranked = Vec::new();
    let mut rows = Vec::new();
    for &e in &SIZES {
        let g = star_family(1 << e, 7);
        let (q, p, r) = (&g.query, g.predicate.as_ref().unwrap(), g.ranking.as_ref().unwrap());
        let n = g.db.size() as f64;
        let lg = n.log2();

        let da = build_min_da(q, r, &g.db, Exec::Parallel).map_err(s)?;
        build.push(da.build_steps as f64 / (n * lg * lg));

        let mut worst = 0u64;
        let mut ks = rng(e as u64);
        for _ in 0..200 {
            let k = rand::Rng::gen_range(&mut ks, 0..da.total());
            worst = worst.max(da.access_with_steps(k).map_err(s)?.1);
        }
        probe.push(worst as f64 / lg);

        let mut stream = enumerate_with_predicate(q, p, &g.db).map_err(s)?;
        let (_, stats) = drain_with_stats(&mut stream);
        delay.push(stats.max_delay as f64);

        let mut stream = enumerate_ranked(q, r, &g.db).map_err(s)?;
        let width = r.vars.len() as f64;
        let mut k = 0u64;
        let mut worst_ratio: f64 = 0.0;
        while stream.next().is_some() {
            k += 1;
            if k.is_power_of_two() {
                worst_ratio = worst_ratio.max(stream.steps() as f64 / (n + k as f64 * width));
            }
        }
        worst_ratio = worst_ratio.max(stream.steps() as f64 / (n + k as f64 * width));
        ranked.push(worst_ratio);
        rows.push(format!(
            "|D|=2^{e}: build {} steps, access <= {worst}, delay <= {}, ranked {} steps for {k} answers",
            da.build_steps,
            stats.max_delay,
            stream.steps()
        ));
    }
    for row in &rows {
        println!("    {row}");
    }
    let took = start.elapsed();
    let c = ranked[0] * 2.0;
    ensure(spread(&build) <= 2.0, || format!("build/(|D| log^2 |D|) spread {:.2}: {build:.2?}", spread(&build)))?;
    ensure(spread(&probe) <= 2.0, || format!("access/log|D| spread {:.2}: {probe:.2?}", spread(&probe)))?;
    ensure(spread(&delay) <= 1.5, || format!("max delay spread {:.2}: {delay:?}", spread(&delay)))?;
    ensure(ranked.iter().all(|&x| x <= c), || format!("ranked steps/(|D|+k|X|) {ranked:.2?} exceed c={c:.2}"))?;
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    Ok(format!(
        "build spread {:.2} (p=2), access/log spread {:.2}, delay spread {:.2}, ranked c={c:.2}, {took:.1?}",
        spread(&build),
        spread(&probe),
        spread(&delay)
    ))
}

fn oob_check(what: &str, total: u128, access: impl Fn(u128) -> cqmin_core::Result<Answer>) -> Result<(), String> {
    ensure(access(total).is_err_and(|e| e.is_out_of_bounds()), || format!("{what}: access(total) did not fail"))?;
    let (n, probes) = count_via_access(access).map_err(s)?;
    ensure(n == total && common::probes_within_bound(total, probes), || {
        format!("{what}: recovered {n} of {total} in {probes} probes")
    })
}

fn out_of_bounds() -> Outcome {
    let mut built = 0;
    let mut instances: Vec<Generated> = (0..300).map(|seed| random_instance(seed, &Shape::default())).collect();
    instances.extend([10u32, 12, 14].map(|e| star_family(1 << e, 3)));
    for g in &instances {
        let (q, p) = (&g.query, g.predicate.as_ref().unwrap());
        if let Some(r) = &g.ranking {
            if let Ok(da) = build_min_da(q, r, &g.db, Exec::Parallel) {
                oob_check("min", da.total(), |k| da.access(k))?;
                let t = da.total();
                ensure(single_access(q, r, &g.db, t).is_err_and(|e| e.is_out_of_bounds()), || {
                    "single access past the end".into()
                })?;
                built += 1;
            }
        }
        if let Ok(da) = build_unranked_da(q, Some(p), &g.db, Exec::Sequential) {
            oob_check("predicate", da.total(), |k| da.access(k))?;
            built += 1;
        }
        let full = q.all_free();
        if cqmin_core::structure::is_acyclic(&full) && full.is_self_join_free() && !full.atoms().iter().any(|a| a.has_repeated_var()) {
            let da = LexDA::new(&full, &g.db).map_err(s)?;
            oob_check("lex", da.total(), |k| da.access(k))?;
            built += 1;
        }
    }
    Ok(format!("{built} structures, access(total) out of bounds, counts recovered within 2 log2(total)+2 probes"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("two-part golden elimination", golden_two_part),
        ("four-pair golden partition", golden_four_pair),
        ("partition exhaustiveness", partition_exhaustive),
        ("oracle equivalence sweep", oracle_sweep),
        ("path query: elimination refused, enumeration exact", path_contrast),
        ("eliminating one predicate can block the next", non_composable),
        ("star family complexity envelopes", envelopes),
        ("out-of-bounds contract", out_of_bounds),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

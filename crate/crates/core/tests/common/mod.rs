#![allow(dead_code)]

use std::collections::BTreeSet;

use cqmin_core::access::{build_min_da, build_unranked_da, count_via_access, single_access};
use cqmin_core::elim::{count_with_predicate, eliminate_min_predicate_with, is_nonempty};
use cqmin_core::enumerate::{enumerate_answers, enumerate_ranked, enumerate_with_predicate};
use cqmin_core::gen::Generated;
use cqmin_core::oracle::{oracle_answers, oracle_answers_where, Filter};
use cqmin_core::qmodel::{Answer, ConjunctiveQuery, Direction, Ranking};
use cqmin_core::structure::{classify, Task};
use cqmin_core::{Error, Exec};

/// How many instances exercised each task, in `Task::ALL` order.
#[derive(Debug, Default, Clone)]
pub struct Tally {
    pub tractable: [u32; 8],
    pub refused: [u32; 8],
    /// Eliminations that produced more than one part.
    pub multi_part: u32,
    /// Instances where the predicate kept at least one answer.
    pub nonempty: u32,
}

impl Tally {
    pub fn add(&mut self, other: &Tally) {
        for i in 0..8 {
            self.tractable[i] += other.tractable[i];
            self.refused[i] += other.refused[i];
        }
        self.multi_part += other.multi_part;
        self.nonempty += other.nonempty;
    }
}

fn task_index(t: Task) -> usize {
    Task::ALL.iter().position(|&u| u == t).unwrap()
}

fn rank_key(q: &ConjunctiveQuery, r: &Ranking, a: &Answer) -> i64 {
    let vals = r.vars.iter().map(|v| {
        let i = q.free().iter().position(|f| f == v).unwrap();
        a.values[i].base
    });
    match r.direction {
        Direction::Min => vals.min().unwrap(),
        Direction::Max => vals.max().unwrap(),
    }
}

fn sorted_ok(q: &ConjunctiveQuery, r: &Ranking, seq: &[Answer]) -> bool {
    let keys: Vec<i64> = seq.iter().map(|a| rank_key(q, r, a)).collect();
    keys.windows(2).all(|w| match r.direction {
        Direction::Min => w[0] <= w[1],
        Direction::Max => w[0] >= w[1],
    })
}

fn as_cover(seq: Vec<Answer>, want: &BTreeSet<Answer>, what: &str) -> Result<(), String> {
    let n = seq.len();
    let got: BTreeSet<Answer> = seq.into_iter().collect();
    if got.len() != n {
        return Err(format!("{what}: {} duplicates", n - got.len()));
    }
    if &got != want {
        return Err(format!("{what}: {} answers, oracle has {}", got.len(), want.len()));
    }
    Ok(())
}

fn refused<T>(r: Result<T, Error>, what: &str) -> Result<(), String> {
    match r {
        Err(Error::Intractable { .. }) => Ok(()),
        Err(e) => Err(format!("{what}: expected a refusal, got {e}")),
        Ok(_) => Err(format!("{what}: intractable instance was not refused")),
    }
}

/// `2·log2(total) + 2`, with one probe allowed for an empty structure.
pub fn probes_within_bound(total: u128, probes: u64) -> bool {
    if total == 0 {
        return probes <= 1;
    }
    probes as f64 <= 2.0 * (total as f64).log2() + 2.0
}

/// Runs every tractable task on `g` and compares with the oracle. Returns
/// the first divergence.
pub fn check_instance(g: &Generated, exec: Exec) -> Result<Tally, String> {
    let q = &g.query;
    let db = &g.db;
    let p = g.predicate.as_ref().expect("generated with a predicate");
    let rank_vars = g.ranking.as_ref().map(|r| r.vars.as_slice());
    let all = oracle_answers(q, db).map_err(|e| e.to_string())?;
    let filtered = oracle_answers_where(q, db, &Filter::Min(p.clone())).map_err(|e| e.to_string())?;
    let mut tally = Tally::default();
    let e = |e: Error| e.to_string();
    tally.nonempty = u32::from(!filtered.is_empty());

    for task in Task::ALL {
        let verdict = classify(task, q, Some(p), rank_vars).map_err(e)?;
        let i = task_index(task);
        if verdict.tractable {
            tally.tractable[i] += 1;
        } else {
            tally.refused[i] += 1;
        }
        match task {
            Task::Elimination => {
                if !verdict.tractable {
                    refused(eliminate_min_predicate_with(q, p, db, exec), "elimination")?;
                    continue;
                }
                let r = eliminate_min_predicate_with(q, p, db, exec).map_err(e)?;
                tally.multi_part = u32::from(r.parts.len() > 1);
                let mut union = Vec::new();
                for (k, part) in r.parts.iter().enumerate() {
                    if !part.query.is_full() || !cqmin_core::structure::is_acyclic(&part.query) {
                        return Err(format!("part {k} is not full acyclic"));
                    }
                    for a in oracle_answers(&part.query, &part.db).map_err(e)? {
                        union.push(r.project(k, &a));
                    }
                }
                as_cover(union, &filtered, "elimination union")?;
            }
            Task::Counting => {
                if !verdict.tractable {
                    refused(count_with_predicate(q, Some(p), db, exec), "counting")?;
                    continue;
                }
                let c = count_with_predicate(q, Some(p), db, exec).map_err(e)?;
                if c != filtered.len() as u128 {
                    return Err(format!("count {c}, oracle {}", filtered.len()));
                }
            }
            Task::Boolean => {
                if !verdict.tractable {
                    refused(is_nonempty(q, None, db), "boolean")?;
                    continue;
                }
                if is_nonempty(q, None, db).map_err(e)? != !all.is_empty() {
                    return Err("boolean answer differs".into());
                }
            }
            Task::UnrankedDAWithPredicate => {
                if !verdict.tractable {
                    refused(build_unranked_da(q, Some(p), db, exec), "direct access with predicate")?;
                    continue;
                }
                let da = build_unranked_da(q, Some(p), db, exec).map_err(e)?;
                let seq: Vec<Answer> = (0..da.total()).map(|k| da.access(k)).collect::<Result<_, _>>().map_err(e)?;
                as_cover(seq, &filtered, "predicate direct access")?;
                if !da.access(da.total()).is_err_and(|x| x.is_out_of_bounds()) {
                    return Err("predicate direct access past the end".into());
                }
            }
            Task::RankedDA => {
                let Some(r) = &g.ranking else { continue };
                if !verdict.tractable {
                    refused(build_min_da(q, r, db, exec), "ranked direct access")?;
                    continue;
                }
                let da = build_min_da(q, r, db, exec).map_err(e)?;
                let seq: Vec<Answer> = (0..da.total()).map(|k| da.access(k)).collect::<Result<_, _>>().map_err(e)?;
                if !sorted_ok(q, r, &seq) {
                    return Err("ranked direct access out of order".into());
                }
                as_cover(seq, &all, "ranked direct access")?;
                let (n, probes) = count_via_access(|k| da.access(k)).map_err(e)?;
                if n != da.total() || !probes_within_bound(n, probes) {
                    return Err(format!("count via access: {n} in {probes} probes, total {}", da.total()));
                }
            }
            Task::RankedEnum => {
                let Some(r) = &g.ranking else { continue };
                if !verdict.tractable {
                    refused(enumerate_ranked(q, r, db), "ranked enumeration")?;
                    continue;
                }
                let seq: Vec<Answer> = enumerate_ranked(q, r, db).map_err(e)?.collect();
                if !sorted_ok(q, r, &seq) {
                    return Err("ranked enumeration out of order".into());
                }
                as_cover(seq, &all, "ranked enumeration")?;
            }
            Task::EnumWithPredicate => {
                if !verdict.tractable {
                    refused(enumerate_with_predicate(q, p, db), "enumeration with predicate")?;
                    continue;
                }
                as_cover(enumerate_with_predicate(q, p, db).map_err(e)?.collect(), &filtered, "predicate enumeration")?;
                as_cover(enumerate_answers(q, db).map_err(e)?.collect(), &all, "plain enumeration")?;
            }
            Task::SingleAccess => {
                let Some(r) = &g.ranking else { continue };
                if !verdict.tractable {
                    refused(single_access(q, r, db, 0), "single access")?;
                    continue;
                }
                let mut keys: Vec<i64> = all.iter().map(|a| rank_key(q, r, a)).collect();
                keys.sort_unstable();
                if r.direction == Direction::Max {
                    keys.reverse();
                }
                let mut seq = Vec::new();
                for (k, &want) in keys.iter().enumerate() {
                    let a = single_access(q, r, db, k as u128).map_err(e)?;
                    if rank_key(q, r, &a) != want {
                        return Err(format!("single access {k}: key {} expected {want}", rank_key(q, r, &a)));
                    }
                    seq.push(a);
                }
                as_cover(seq, &all, "single access")?;
                if !single_access(q, r, db, all.len() as u128).is_err_and(|x| x.is_out_of_bounds()) {
                    return Err("single access past the end".into());
                }
            }
        }
    }
    Ok(tally)
}

fn permutations(items: &[cqmin_core::qmodel::Var]) -> Vec<Vec<cqmin_core::qmodel::Var>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Random full acyclic queries with `|X| <= 4` and no bad path among
/// `{x0} ∪ X`: every total order with `x0` first must extend exactly one
/// returned partial order. Returns (shapes checked, orders checked).
pub fn partition_exhaustiveness(shapes: usize, first_seed: u64) -> Result<(usize, usize), String> {
    use cqmin_core::gen::{random_acyclic_query, rng, Shape};
    use cqmin_core::partition::{check_enforcement, extends, partition_min_orders};
    use cqmin_core::structure::{find_bad_path, query_join_tree, Hypergraph};
    use rand::seq::SliceRandom;
    use rand::Rng;

    let shape = Shape {
        free_prob: 1.0,
        self_join_prob: 0.0,
        ..Shape::default()
    };
    let (mut done, mut orders) = (0usize, 0usize);
    let mut seed = first_seed;
    while done < shapes {
        seed += 1;
        if seed > first_seed + 100 * shapes as u64 {
            return Err(format!("only {done} usable shapes found"));
        }
        let mut r = rng(seed);
        let q = random_acyclic_query(&mut r, &shape);
        let mut vars = q.variables();
        if vars.len() < 2 {
            continue;
        }
        vars.shuffle(&mut r);
        let x0 = vars[0];
        let k = r.gen_range(1..=(vars.len() - 1).min(4));
        let xs = vars[1..=k].to_vec();
        let among: BTreeSet<_> = vars[..=k].iter().copied().collect();
        if find_bad_path(&Hypergraph::of_query(&q), &among, &among).is_some() {
            continue;
        }
        let tree = query_join_tree(&q).ok_or("generated query is cyclic")?;
        let root = tree.first_containing(x0).unwrap();
        let pairs = partition_min_orders(&tree.rerooted(root), x0, &xs)
            .map_err(|e| format!("seed {seed}: {q}: {e}"))?;
        for p in &pairs {
            if !p.tree.is_join_tree() {
                return Err(format!("seed {seed}: not a join tree"));
            }
            check_enforcement(&p.tree, &p.order).map_err(|e| format!("seed {seed}: {e}"))?;
        }
        for perm in permutations(&xs) {
            let mut seq = vec![x0];
            seq.extend(perm);
            let hits = pairs.iter().filter(|p| extends(&p.order, &seq)).count();
            if hits != 1 {
                return Err(format!("seed {seed}: {q}: order extends {hits} parts"));
            }
            orders += 1;
        }
        done += 1;
    }
    Ok((done, orders))
}

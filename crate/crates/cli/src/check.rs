//! `oracle`: runs every tractable task and compares with brute force.

use std::collections::BTreeSet;
use std::ops::Range;

use cqmin_core::access::{build_min_da, build_unranked_da, single_access};
use cqmin_core::elim::{count_with_predicate, eliminate_min_predicate_with, is_nonempty};
use cqmin_core::enumerate::{enumerate_answers, enumerate_ranked, enumerate_with_predicate};
use cqmin_core::gen::{random_instance, Shape};
use cqmin_core::oracle::{min_of, oracle_answers, oracle_answers_where};
use cqmin_core::qmodel::{Answer, Database, ParsedQuery, Ranking};
use cqmin_core::{Error, Result};
use serde::Serialize;

use crate::out::{self, Failure};
use crate::Ctx;

#[derive(Serialize, Default)]
pub struct Report {
    pub checked: Vec<&'static str>,
    pub refused: Vec<&'static str>,
}

enum Outcome {
    Ok,
    Refused,
    Diverged(String),
}

fn run<T>(r: Result<T>, check: impl FnOnce(T) -> Result<Option<String>>) -> Result<Outcome> {
    match r {
        Err(Error::Intractable { .. }) => Ok(Outcome::Refused),
        Err(e) => Err(e),
        Ok(v) => Ok(match check(v)? {
            None => Outcome::Ok,
            Some(msg) => Outcome::Diverged(msg),
        }),
    }
}

fn cover(seq: Vec<Answer>, want: &BTreeSet<Answer>) -> Option<String> {
    let n = seq.len();
    let got: BTreeSet<Answer> = seq.into_iter().collect();
    if got.len() != n {
        return Some(format!("{} duplicate answers", n - got.len()));
    }
    if &got != want {
        let missing = want.difference(&got).next().map(out::answer_row);
        let extra = got.difference(want).next().map(out::answer_row);
        return Some(format!("{} answers, oracle has {} (missing {missing:?}, extra {extra:?})", got.len(), want.len()));
    }
    None
}

fn keys(pq: &ParsedQuery, r: &Ranking, seq: &[Answer]) -> Result<Vec<i64>> {
    seq.iter()
        .map(|a| Ok(min_of(&pq.query, &out::negated(a, r.direction), &r.vars)?.base))
        .collect()
}

fn ranked_cover(pq: &ParsedQuery, r: &Ranking, seq: Vec<Answer>, want: &BTreeSet<Answer>) -> Result<Option<String>> {
    let k = keys(pq, r, &seq)?;
    if let Some(i) = k.windows(2).position(|w| w[0] > w[1]) {
        return Ok(Some(format!("out of order at position {}", i + 1)));
    }
    Ok(cover(seq, want))
}

/// Checks one instance; the first divergence is an error.
pub fn check(pq: &ParsedQuery, db: &Database, ctx: &Ctx) -> std::result::Result<Report, Failure> {
    let q = &pq.query;
    let p = pq.predicate.as_ref();
    let all = oracle_answers(q, db)?;
    let filtered = oracle_answers_where(q, db, &out::filter(p))?;
    let mut report = Report::default();
    let mut note = |name: &'static str, o: Outcome| -> std::result::Result<(), Failure> {
        match o {
            Outcome::Ok => report.checked.push(name),
            Outcome::Refused => report.refused.push(name),
            Outcome::Diverged(m) => return Err(Failure::divergence(format!("{name}: {m}"))),
        }
        Ok(())
    };

    let o = run(count_with_predicate(q, p, db, ctx.exec), |n| {
        Ok((n != filtered.len() as u128).then(|| format!("count {n}, oracle {}", filtered.len())))
    })?;
    note("count", o)?;
    let o = run(is_nonempty(q, p, db), |b| Ok((b == filtered.is_empty()).then(|| format!("answered {b}"))))?;
    note("bool", o)?;
    if let Some(p) = p {
        let o = run(eliminate_min_predicate_with(q, p, db, ctx.exec), |r| {
            let mut union = Vec::new();
            for (i, part) in r.parts.iter().enumerate() {
                for a in oracle_answers(&part.query, &part.db)? {
                    union.push(r.project(i, &a));
                }
            }
            Ok(cover(union, &filtered))
        })?;
        note("eliminate", o)?;
        let o = run(enumerate_with_predicate(q, p, db), |s| Ok(cover(s.collect(), &filtered)))?;
        note("enumerate with predicate", o)?;
    }
    let o = run(enumerate_answers(q, db), |s| Ok(cover(s.collect(), &all)))?;
    note("enumerate", o)?;
    let o = run(build_unranked_da(q, p, db, ctx.exec), |da| {
        let seq = (0..da.total()).map(|k| da.access(k)).collect::<Result<Vec<_>>>()?;
        Ok(cover(seq, &filtered))
    })?;
    note("access", o)?;
    if let Some(r) = &pq.ranking {
        let o = run(enumerate_ranked(q, r, db), |s| ranked_cover(pq, r, s.collect(), &all))?;
        note("enumerate ranked", o)?;
        let o = run(build_min_da(q, r, db, ctx.exec), |da| {
            let seq = (0..da.total()).map(|k| da.access(k)).collect::<Result<Vec<_>>>()?;
            ranked_cover(pq, r, seq, &all)
        })?;
        note("ranked access", o)?;
        let o = match single_access(q, r, db, all.len() as u128) {
            Err(Error::Intractable { .. }) => Outcome::Refused,
            Err(e) if e.is_out_of_bounds() => {
                let seq = (0..all.len() as u128).map(|k| single_access(q, r, db, k)).collect::<Result<Vec<_>>>()?;
                match ranked_cover(pq, r, seq, &all)? {
                    None => Outcome::Ok,
                    Some(m) => Outcome::Diverged(m),
                }
            }
            Err(e) => return Err(e.into()),
            Ok(_) => Outcome::Diverged("access past the end did not fail".into()),
        };
        note("single access", o)?;
    }
    Ok(report)
}

pub fn instance(ctx: &Ctx, pq: &ParsedQuery, db: &Database) -> std::result::Result<(), Failure> {
    let report = check(pq, db, ctx)?;
    if ctx.json {
        out::print_json(&report);
    } else {
        println!("agrees with brute force: {}", report.checked.join(", "));
        if !report.refused.is_empty() {
            println!("refused: {}", report.refused.join(", "));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedsJson {
    instances: u64,
    checks: usize,
    refusals: usize,
}

pub fn seeds(ctx: &Ctx, seeds: Range<u64>) -> std::result::Result<(), Failure> {
    let shape = Shape::default();
    let (mut checks, mut refusals) = (0, 0);
    let n = seeds.end.saturating_sub(seeds.start);
    for seed in seeds {
        let g = random_instance(seed, &shape);
        let pq = ParsedQuery {
            query: g.query.clone(),
            predicate: g.predicate.clone(),
            ranking: g.ranking.clone(),
        };
        let report = check(&pq, &g.db, ctx).map_err(|mut f| {
            f.message = format!("seed {seed}: {}\n{}", f.message, g.text());
            f
        })?;
        checks += report.checked.len();
        refusals += report.refused.len();
    }
    if ctx.json {
        out::print_json(&SeedsJson {
            instances: n,
            checks,
            refusals,
        });
    } else {
        println!("{n} instances: {checks} checks agree with brute force, {refusals} refusals");
    }
    Ok(())
}

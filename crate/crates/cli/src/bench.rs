//! Scaling tables over the star and path families.

use std::time::Instant;

use cqmin_core::access::build_min_da;
use cqmin_core::elim::count_with_predicate;
use cqmin_core::enumerate::{drain_with_stats, enumerate_ranked, enumerate_with_predicate};
use cqmin_core::gen::{path_family, star_family, Generated};
use cqmin_core::{Error, Result};
use serde::Serialize;

use crate::out::{self, Failure};
use crate::Ctx;

const PROBES: u128 = 64;

/// One family at one size. Step counts are `None` where the task is refused.
#[derive(Serialize, Default)]
pub struct Row {
    family: &'static str,
    size: usize,
    build_steps: Option<u64>,
    build_ms: Option<f64>,
    access_avg_steps: Option<f64>,
    count: Option<u128>,
    count_ms: Option<f64>,
    pred_answers: u64,
    pred_steps: u64,
    pred_max_delay: u64,
    pred_ms: f64,
    ranked_steps: u64,
    ranked_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn refused<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Intractable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn measure(ctx: &Ctx, family: &'static str, g: &Generated) -> Result<Row> {
    let (q, p, r) = (&g.query, g.predicate.as_ref().unwrap(), g.ranking.as_ref().unwrap());
    let mut row = Row {
        family,
        size: g.db.size(),
        ..Row::default()
    };

    let t = Instant::now();
    if let Some(da) = refused(build_min_da(q, r, &g.db, ctx.exec))? {
        row.build_ms = Some(ms(t));
        row.build_steps = Some(da.build_steps);
        let total = da.total();
        if total > 0 {
            let mut steps = 0u64;
            for i in 0..PROBES {
                steps += da.access_with_steps(i * total / PROBES)?.1;
            }
            row.access_avg_steps = Some(steps as f64 / PROBES as f64);
        }
    }

    let t = Instant::now();
    if let Some(n) = refused(count_with_predicate(q, Some(p), &g.db, ctx.exec))? {
        row.count_ms = Some(ms(t));
        row.count = Some(n);
    }

    let t = Instant::now();
    let mut s = enumerate_with_predicate(q, p, &g.db)?;
    let (_, stats) = drain_with_stats(&mut s);
    row.pred_ms = ms(t);
    row.pred_answers = stats.answers;
    row.pred_steps = stats.total_steps;
    row.pred_max_delay = stats.max_delay;

    let t = Instant::now();
    let mut s = enumerate_ranked(q, r, &g.db)?;
    let (_, stats) = drain_with_stats(&mut s);
    row.ranked_ms = ms(t);
    row.ranked_steps = stats.total_steps;
    Ok(row)
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("refused".into(), |x| x.to_string())
}

fn opt_f(v: &Option<f64>) -> String {
    v.map_or("refused".into(), |x| format!("{x:.1}"))
}

pub fn run(ctx: &Ctx, family: &str, min_exp: u32, max_exp: u32, seed: u64) -> std::result::Result<(), Failure> {
    let families: Vec<&'static str> = match family {
        "star" => vec!["star"],
        "path" => vec!["path"],
        "both" => vec!["star", "path"],
        other => return Err(Error::Invalid(format!("unknown family '{other}' (star, path, both)")).into()),
    };
    if min_exp > max_exp || max_exp > 24 {
        return Err(Error::Invalid("need min-exp <= max-exp <= 24".into()).into());
    }
    let mut rows = Vec::new();
    for &f in &families {
        for e in min_exp..=max_exp {
            let g = match f {
                "star" => star_family(1 << e, seed),
                _ => path_family(1 << e, seed),
            };
            rows.push(measure(ctx, f, &g)?);
        }
    }
    if ctx.json {
        out::print_json(&rows);
        return Ok(());
    }
    println!("steps");
    println!(
        "{:<6} {:>8} {:>12} {:>10} {:>10} {:>12} {:>10} {:>12}",
        "family", "|D|", "build", "access", "answers", "pred steps", "max delay", "ranked"
    );
    for r in &rows {
        println!(
            "{:<6} {:>8} {:>12} {:>10} {:>10} {:>12} {:>10} {:>12}",
            r.family,
            r.size,
            opt(&r.build_steps),
            opt_f(&r.access_avg_steps),
            r.pred_answers,
            r.pred_steps,
            r.pred_max_delay,
            r.ranked_steps
        );
    }
    println!();
    println!("wall time (ms)");
    println!("{:<6} {:>8} {:>10} {:>10} {:>10} {:>10}", "family", "|D|", "build", "count", "pred", "ranked");
    for r in &rows {
        println!(
            "{:<6} {:>8} {:>10} {:>10} {:>10.1} {:>10.1}",
            r.family,
            r.size,
            opt_f(&r.build_ms),
            opt_f(&r.count_ms),
            r.pred_ms,
            r.ranked_ms
        );
    }
    Ok(())
}

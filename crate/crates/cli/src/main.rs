mod bench;
mod check;
mod out;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqmin_core::access::{build_min_da, build_unranked_da, single_access};
use cqmin_core::elim::{count_with_predicate, eliminate_min_predicate_with, is_nonempty};
use cqmin_core::enumerate::{enumerate_answers, enumerate_ranked, enumerate_with_predicate, AnswerStream};
use cqmin_core::oracle::{oracle_answers, oracle_answers_where};
use cqmin_core::qmodel::{load_database, parse_query, write_relation, Answer, Database, ParsedQuery};
use cqmin_core::structure::{classify, classify_all, query_join_tree, Task};
use cqmin_core::{Error, Exec};

use out::{answer_row, Failure};

#[derive(Parser)]
#[command(name = "cqmin", version, about = "Conjunctive queries with a min-predicate or a MIN/MAX ranking")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Answer intractable instances by brute force instead of refusing.
    #[arg(long, global = true)]
    force_oracle: bool,
    /// Disable the data-parallel paths.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Query file: head and body, optional PREDICATE and ORDER BY lines.
    #[arg(long)]
    query: PathBuf,
    /// Directory with one file per relation symbol.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verdicts for all eight tasks.
    Classify {
        #[command(flatten)]
        input: Input,
    },
    /// Rewrite the predicate away; writes part queries, relations and a manifest.
    Eliminate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
        /// Print each part's order and join tree.
        #[arg(long)]
        explain: bool,
    },
    /// Number of answers satisfying the predicate.
    Count {
        #[command(flatten)]
        input: Input,
    },
    /// Whether the query has an answer.
    Bool {
        #[command(flatten)]
        input: Input,
    },
    Enumerate {
        #[command(flatten)]
        input: Input,
        /// Follow the ORDER BY ranking.
        #[arg(long)]
        ranked: bool,
        #[arg(long)]
        limit: Option<usize>,
        /// Print max/avg inter-emission steps.
        #[arg(long)]
        stats: bool,
    },
    /// Answers by position: ranked if the query has ORDER BY, else in a fixed order.
    Access {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        index: Vec<u128>,
        /// Half-open range `a..b`.
        #[arg(long)]
        range: Option<String>,
        /// Answer each index by counting instead of building the structure.
        #[arg(long)]
        single: bool,
    },
    /// Cross-check every tractable task against brute force.
    Oracle {
        #[arg(long, requires = "data")]
        query: Option<PathBuf>,
        #[arg(long, requires = "query")]
        data: Option<PathBuf>,
        /// Random instances `a..b` instead of a query file.
        #[arg(long, conflicts_with = "query")]
        seeds: Option<String>,
    },
    /// Step and wall-time tables over the star and path families.
    Bench {
        #[arg(long, default_value = "both")]
        family: String,
        #[arg(long, default_value_t = 10)]
        min_exp: u32,
        #[arg(long, default_value_t = 18)]
        max_exp: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

struct Ctx {
    json: bool,
    force_oracle: bool,
    exec: Exec,
}

fn load_query(path: &Path) -> Result<ParsedQuery, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::from(Error::Data(format!("cannot read {}: {e}", path.display()))))?;
    Ok(parse_query(&text)?)
}

fn load(input: &Input) -> Result<(ParsedQuery, Database), Failure> {
    let pq = load_query(&input.query)?;
    let dir = input
        .data
        .as_ref()
        .ok_or_else(|| Failure::from(Error::Data("--data DIR is required".into())))?;
    let db = load_database(dir, &pq.query)?;
    db.check_schema(&pq.query)?;
    Ok((pq, db))
}

fn parse_range(s: &str) -> Result<(u128, u128), Failure> {
    let bad = || Failure::from(Error::Invalid(format!("bad range '{s}', expected a..b")));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Runs `structural`; on a refusal, either re-raises it or, with
/// `--force-oracle`, falls back to `brute`.
fn or_oracle<T>(
    ctx: &Ctx,
    structural: cqmin_core::Result<T>,
    brute: impl FnOnce() -> cqmin_core::Result<T>,
) -> Result<(T, &'static str), Failure> {
    match structural {
        Ok(v) => Ok((v, "structural")),
        Err(Error::Intractable { task, reason }) if ctx.force_oracle => {
            eprintln!("warning: {task} refused ({reason}); using brute force");
            Ok((brute()?, "oracle"))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_classify(ctx: &Ctx, input: &Input) -> Result<(), Failure> {
    let pq = load_query(&input.query)?;
    let ranking = pq.ranking.as_ref().map(|r| r.vars.as_slice());
    let verdicts = classify_all(&pq.query, pq.predicate.as_ref(), ranking)?;
    if ctx.json {
        out::print_json(&out::ClassifyJson {
            query: pq.query.to_string(),
            verdicts,
        });
        return Ok(());
    }
    println!("{}", pq.query);
    for v in &verdicts {
        let verdict = if v.tractable { "tractable" } else { "intractable" };
        match &v.witness {
            Some(w) => println!("{:<30} {verdict:<12} {w}", v.task.name()),
            None => println!("{:<30} {verdict}", v.task.name()),
        }
    }
    Ok(())
}

fn cmd_eliminate(ctx: &Ctx, input: &Input, dir: &Path, explain: bool) -> Result<(), Failure> {
    let (pq, db) = load(input)?;
    let p = pq
        .predicate
        .as_ref()
        .ok_or_else(|| Failure::from(Error::Invalid("the query has no PREDICATE".into())))?;
    let r = eliminate_min_predicate_with(&pq.query, p, &db, ctx.exec)?;
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let mut parts = Vec::new();
    for (i, part) in r.parts.iter().enumerate() {
        let q = &part.query;
        let file = format!("part{}.q", i + 1);
        std::fs::write(dir.join(&file), format!("{q}\n")).map_err(Error::from)?;
        let mut relations = BTreeMap::new();
        for rel in part.db.relations() {
            let name = format!("{}.csv", rel.symbol());
            write_relation(&dir.join(&name), rel)?;
            relations.insert(rel.symbol().to_string(), name);
        }
        let order: Vec<[String; 2]> = part
            .order
            .iter()
            .map(|&(a, b)| [q.name(a).to_string(), q.name(b).to_string()])
            .collect();
        if explain && !ctx.json {
            let pairs: Vec<String> = order.iter().map(|[a, b]| format!("{a}<{b}")).collect();
            println!("part {}: order [{}]", i + 1, pairs.join(", "));
            if let Some(t) = query_join_tree(q) {
                print!("{}", t.render(q));
            }
        }
        parts.push(out::PartJson {
            query_file: file,
            query: q.to_string(),
            relations,
            fresh: part.fresh.iter().map(|&v| q.name(v).to_string()).collect(),
            order,
            answers: part.count()?,
        });
    }
    let manifest = out::Manifest {
        source: pq.query.to_string(),
        predicate: p.display(&pq.query),
        parts,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), format!("{text}\n")).map_err(Error::from)?;
    if ctx.json {
        out::print_json(&manifest);
    } else {
        println!("{} parts written to {}", manifest.parts.len(), dir.display());
        for part in &manifest.parts {
            println!("  {}  ({} answers)", part.query, part.answers);
        }
    }
    Ok(())
}

fn cmd_count(ctx: &Ctx, input: &Input) -> Result<(), Failure> {
    let (pq, db) = load(input)?;
    let p = pq.predicate.as_ref();
    let (n, method) = or_oracle(ctx, count_with_predicate(&pq.query, p, &db, ctx.exec), || {
        Ok(oracle_answers_where(&pq.query, &db, &out::filter(p))?.len() as u128)
    })?;
    if ctx.json {
        out::print_json(&out::CountJson { count: n, method });
    } else {
        println!("{n}");
    }
    Ok(())
}

fn cmd_bool(ctx: &Ctx, input: &Input) -> Result<(), Failure> {
    let (pq, db) = load(input)?;
    let p = pq.predicate.as_ref();
    let (b, method) = or_oracle(ctx, is_nonempty(&pq.query, p, &db), || {
        Ok(!oracle_answers_where(&pq.query, &db, &out::filter(p))?.is_empty())
    })?;
    if ctx.json {
        out::print_json(&out::BoolJson { nonempty: b, method });
    } else {
        println!("{b}");
    }
    Ok(())
}

fn oracle_ranked(pq: &ParsedQuery, db: &Database) -> cqmin_core::Result<Vec<Answer>> {
    let all = oracle_answers(&pq.query, db)?;
    match &pq.ranking {
        None => Ok(all.into_iter().collect()),
        Some(r) => {
            let key = |a: &Answer| -> cqmin_core::Result<i64> {
                let m = cqmin_core::oracle::min_of(&pq.query, &out::negated(a, r.direction), &r.vars)?;
                Ok(m.base)
            };
            let mut keyed: Vec<(i64, Answer)> = all.into_iter().map(|a| Ok((key(&a)?, a))).collect::<cqmin_core::Result<_>>()?;
            keyed.sort_by_key(|(k, _)| *k);
            Ok(keyed.into_iter().map(|(_, a)| a).collect())
        }
    }
}

fn cmd_enumerate(ctx: &Ctx, input: &Input, ranked: bool, limit: Option<usize>, stats: bool) -> Result<(), Failure> {
    let (pq, db) = load(input)?;
    let q = &pq.query;
    let stream: cqmin_core::Result<AnswerStream> = if ranked {
        let r = pq
            .ranking
            .as_ref()
            .ok_or_else(|| Failure::from(Error::Invalid("--ranked needs an ORDER BY line".into())))?;
        enumerate_ranked(q, r, &db)
    } else if let Some(p) = &pq.predicate {
        enumerate_with_predicate(q, p, &db)
    } else {
        enumerate_answers(q, &db)
    };
    let limit = limit.unwrap_or(usize::MAX);
    let (answers, delays, method) = match stream {
        Ok(mut s) => {
            let mut answers = Vec::new();
            let mut delays = Vec::new();
            let mut last = s.steps();
            while answers.len() < limit {
                let Some(a) = s.next() else { break };
                delays.push(s.steps() - last);
                last = s.steps();
                answers.push(a);
            }
            (answers, Some(delays), "structural")
        }
        Err(e) => {
            let (all, method) = or_oracle(ctx, Err(e), || {
                if ranked {
                    oracle_ranked(&pq, &db)
                } else {
                    Ok(oracle_answers_where(q, &db, &out::filter(pq.predicate.as_ref()))?.into_iter().collect())
                }
            })?;
            (all.into_iter().take(limit).collect(), None, method)
        }
    };
    let stats = stats.then(|| out::stats(delays.as_deref().unwrap_or(&[])));
    if ctx.json {
        out::print_json(&out::EnumerateJson {
            head: q.free().iter().map(|&v| q.name(v).to_string()).collect(),
            answers: answers.iter().map(out::answer_values).collect(),
            stats,
            method,
        });
        return Ok(());
    }
    for a in &answers {
        println!("{}", answer_row(a));
    }
    if let Some(s) = stats {
        eprintln!("{} answers, max delay {} steps, avg delay {:.2} steps", s.answers, s.max_delay, s.avg_delay);
    }
    Ok(())
}

fn cmd_access(ctx: &Ctx, input: &Input, index: &[u128], range: Option<&str>, single: bool) -> Result<(), Failure> {
    let (pq, db) = load(input)?;
    let (q, db) = (&pq.query, &db);
    let mut ks: Vec<u128> = index.to_vec();
    if let Some(r) = range {
        let (a, b) = parse_range(r)?;
        ks.extend(a..b);
    }
    if ks.is_empty() {
        return Err(Error::Invalid("give --index k or --range a..b".into()).into());
    }
    type Probe<'a> = Box<dyn Fn(u128) -> cqmin_core::Result<Answer> + 'a>;
    let built: cqmin_core::Result<(Probe, u128)> = match (&pq.ranking, single) {
        (Some(r), true) => {
            let total = count_with_predicate(q, None, db, ctx.exec);
            total.and_then(|t| {
                classify(Task::SingleAccess, q, None, Some(&r.vars))?.require()?;
                Ok((Box::new(move |k| single_access(q, r, db, k)) as Probe, t))
            })
        }
        (Some(r), false) => build_min_da(q, r, db, ctx.exec).map(|da| {
            let t = da.total();
            (Box::new(move |k| da.access(k)) as Probe, t)
        }),
        (None, _) => build_unranked_da(q, pq.predicate.as_ref(), db, ctx.exec).map(|da| {
            let t = da.total();
            (Box::new(move |k| da.access(k)) as Probe, t)
        }),
    };
    let (probe, total, method): (Probe, u128, &str) = match built {
        Ok((p, t)) => (p, t, "structural"),
        Err(e) => {
            let (list, method) = or_oracle(ctx, Err(e), || {
                if pq.ranking.is_some() {
                    oracle_ranked(&pq, db)
                } else {
                    Ok(oracle_answers_where(q, db, &out::filter(pq.predicate.as_ref()))?.into_iter().collect())
                }
            })?;
            let t = list.len() as u128;
            let p: Probe = Box::new(move |k| {
                list.get(k as usize).cloned().ok_or(Error::OutOfBounds { index: k, total: t })
            });
            (p, t, method)
        }
    };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        rows.push((k, probe(k)?));
    }
    if ctx.json {
        out::print_json(&out::AccessJson {
            total,
            method,
            answers: rows.iter().map(|(k, a)| out::IndexedAnswer { index: *k, values: out::answer_values(a) }).collect(),
        });
    } else {
        for (k, a) in &rows {
            println!("{k}\t{}", answer_row(a));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = Ctx {
        json: cli.json,
        force_oracle: cli.force_oracle,
        exec: if cli.sequential { Exec::Sequential } else { Exec::available() },
    };
    match &cli.cmd {
        Cmd::Classify { input } => cmd_classify(&ctx, input),
        Cmd::Eliminate { input, out, explain } => cmd_eliminate(&ctx, input, out, *explain),
        Cmd::Count { input } => cmd_count(&ctx, input),
        Cmd::Bool { input } => cmd_bool(&ctx, input),
        Cmd::Enumerate { input, ranked, limit, stats } => cmd_enumerate(&ctx, input, *ranked, *limit, *stats),
        Cmd::Access { input, index, range, single } => cmd_access(&ctx, input, index, range.as_deref(), *single),
        Cmd::Oracle { query, data, seeds } => match (query, seeds) {
            (_, Some(s)) => {
                let (a, b) = parse_range(s)?;
                check::seeds(&ctx, a as u64..b as u64)
            }
            (Some(q), None) => {
                let (pq, db) = load(&Input {
                    query: q.clone(),
                    data: data.clone(),
                })?;
                check::instance(&ctx, &pq, &db)
            }
            (None, None) => Err(Error::Invalid("give --query and --data, or --seeds a..b".into()).into()),
        },
        Cmd::Bench { family, min_exp, max_exp, seed } => bench::run(&ctx, family, *min_exp, *max_exp, *seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if json {
                out::print_json(&f.json());
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}


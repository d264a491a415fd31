//! Brute-force ground truth: backtracking join, predicate filters, min-sort.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::qmodel::{Answer, ConjunctiveQuery, Database, MinPredicate, TaggedValue, Var};

/// Backtracking steps allowed before giving up.
pub const GUARD: u64 = 10_000_000;

/// Condition checked on whole homomorphisms (so existential variables count).
#[derive(Clone, Debug)]
pub enum Filter {
    None,
    Min(MinPredicate),
    Equal(Var, Var),
}

impl Filter {
    fn accepts(&self, h: &[Option<TaggedValue>]) -> bool {
        let get = |v: Var| h[v.index()].expect("assigned");
        match self {
            Filter::None => true,
            Filter::Min(p) => {
                let x0 = get(p.x0);
                p.others().into_iter().all(|v| p.holds(x0, get(v)))
            }
            Filter::Equal(a, b) => get(*a) == get(*b),
        }
    }
}

/// Visits every homomorphism from the body into `db`.
pub fn for_each_homomorphism(
    q: &ConjunctiveQuery,
    db: &Database,
    mut visit: impl FnMut(&[Option<TaggedValue>]),
) -> Result<()> {
    db.check_schema(q)?;
    // Atoms sharing variables with earlier ones go first, so joins prune early.
    let mut order: Vec<usize> = Vec::new();
    let mut bound: BTreeSet<Var> = BTreeSet::new();
    let mut left: Vec<usize> = (0..q.atoms().len()).collect();
    while !left.is_empty() {
        let pick = left
            .iter()
            .position(|&a| q.atoms()[a].vars.iter().any(|v| bound.contains(v)))
            .unwrap_or(0);
        let a = left.remove(pick);
        bound.extend(q.atoms()[a].vars.iter().copied());
        order.push(a);
    }
    let mut assignment = vec![None; q.names().len()];
    let mut steps = 0u64;
    search(q, db, &order, 0, &mut assignment, &mut steps, &mut visit)
}

fn search(
    q: &ConjunctiveQuery,
    db: &Database,
    order: &[usize],
    depth: usize,
    h: &mut Vec<Option<TaggedValue>>,
    steps: &mut u64,
    visit: &mut impl FnMut(&[Option<TaggedValue>]),
) -> Result<()> {
    if depth == order.len() {
        visit(h);
        return Ok(());
    }
    let atom = &q.atoms()[order[depth]];
    let rel = db.relation(&atom.symbol)?;
    for row in rel.rows() {
        *steps += 1;
        if *steps > GUARD {
            return Err(Error::OracleGuard { limit: GUARD });
        }
        let mut newly: Vec<Var> = Vec::new();
        let mut ok = true;
        for (&v, &val) in atom.vars.iter().zip(row) {
            match h[v.index()] {
                Some(cur) if cur != val => {
                    ok = false;
                    break;
                }
                Some(_) => {}
                None => {
                    h[v.index()] = Some(val);
                    newly.push(v);
                }
            }
        }
        if ok {
            search(q, db, order, depth + 1, h, steps, visit)?;
        }
        for v in newly {
            h[v.index()] = None;
        }
    }
    Ok(())
}

fn project(q: &ConjunctiveQuery, h: &[Option<TaggedValue>]) -> Answer {
    Answer::new(q.free().iter().map(|v| h[v.index()].expect("free variable assigned")).collect())
}

/// `Q(D)`: homomorphisms projected to the free variables, deduplicated.
pub fn oracle_answers(q: &ConjunctiveQuery, db: &Database) -> Result<BTreeSet<Answer>> {
    oracle_answers_where(q, db, &Filter::None)
}

/// Answers of `Q ∧ filter`, where the filter is checked before projection.
pub fn oracle_answers_where(q: &ConjunctiveQuery, db: &Database, filter: &Filter) -> Result<BTreeSet<Answer>> {
    let mut out = BTreeSet::new();
    for_each_homomorphism(q, db, |h| {
        if filter.accepts(h) {
            out.insert(project(q, h));
        }
    })?;
    Ok(out)
}

pub fn oracle_count(q: &ConjunctiveQuery, db: &Database, filter: &Filter) -> Result<u128> {
    Ok(oracle_answers_where(q, db, filter)?.len() as u128)
}

fn position(q: &ConjunctiveQuery, v: Var) -> Result<usize> {
    q.free()
        .iter()
        .position(|&f| f == v)
        .ok_or_else(|| Error::invalid(format!("{} is not a free variable", q.name(v))))
}

/// Literal filter on an answer set; the predicate's variables must be free.
pub fn oracle_filter(q: &ConjunctiveQuery, answers: &BTreeSet<Answer>, filter: &Filter) -> Result<BTreeSet<Answer>> {
    let keep: Box<dyn Fn(&Answer) -> bool> = match filter {
        Filter::None => Box::new(|_| true),
        Filter::Min(p) => {
            let x0 = position(q, p.x0)?;
            let others = p.others().into_iter().map(|v| position(q, v)).collect::<Result<Vec<_>>>()?;
            let p = p.clone();
            Box::new(move |a| others.iter().all(|&i| p.holds(a.values[x0], a.values[i])))
        }
        Filter::Equal(x, y) => {
            let (i, j) = (position(q, *x)?, position(q, *y)?);
            Box::new(move |a| a.values[i] == a.values[j])
        }
    };
    Ok(answers.iter().filter(|a| keep(a)).cloned().collect())
}

/// `min` of the given free variables in `a`.
pub fn min_of(q: &ConjunctiveQuery, a: &Answer, vars: &[Var]) -> Result<TaggedValue> {
    let mut best: Option<TaggedValue> = None;
    for &v in vars {
        let x = a.values[position(q, v)?];
        best = Some(best.map_or(x, |b| b.min(x)));
    }
    best.ok_or_else(|| Error::invalid("empty ranking"))
}

/// Stable sort by `min(vars)`.
pub fn oracle_sorted(q: &ConjunctiveQuery, answers: &BTreeSet<Answer>, vars: &[Var]) -> Result<Vec<Answer>> {
    let mut keyed: Vec<(TaggedValue, Answer)> = answers
        .iter()
        .map(|a| Ok((min_of(q, a, vars)?, a.clone())))
        .collect::<Result<_>>()?;
    keyed.sort_by_key(|a| a.0);
    Ok(keyed.into_iter().map(|(_, a)| a).collect())
}

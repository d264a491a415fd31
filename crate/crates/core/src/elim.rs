//! Rewriting `Q ∧ x0 <= MIN(X)` into a disjoint union of full acyclic
//! predicate-free queries over a rewritten database.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::instance::{positions, Instance};
use crate::par::{self, Exec};
use crate::partition::{enforcing_nodes, partition_min_orders, OrderTreePair};
use crate::qmodel::{
    disjointify, fresh_symbol, fresh_var, predicate_rank_order, remove_self_joins, Answer, Atom,
    ConjunctiveQuery, Database, MinPredicate, Relation, TaggedValue, Var,
};
use crate::reduce::restrict_predicate_to_free;
use crate::semiring::{count_instance, Count};
use crate::structure::{classify, query_join_tree, Task};

/// One predicate-free piece of the rewrite.
#[derive(Clone, Debug)]
pub struct Part {
    /// Full, self-join-free, acyclic.
    pub query: ConjunctiveQuery,
    pub db: Database,
    /// The pairs `a < b` this part stands for.
    pub order: Vec<(Var, Var)>,
    /// Variables added to enforce the pairs between neighboring atoms.
    pub fresh: Vec<Var>,
}

impl Part {
    pub fn count(&self) -> Result<Count> {
        Ok(count_instance(&part_instance(self)?).0)
    }
}

pub(crate) fn part_instance(part: &Part) -> Result<Instance> {
    let tree = query_join_tree(&part.query).ok_or_else(|| Error::Invariant("a part is cyclic".into()))?;
    Instance::new(&part.query, &part.db, tree)
}

#[derive(Clone, Debug)]
pub struct EliminationResult {
    pub parts: Vec<Part>,
    /// Variables of the input answers (its free variables), in head order.
    pub source_vars: Vec<Var>,
}

impl EliminationResult {
    /// Drops virtual and fresh columns and untags: an answer of part `i`
    /// becomes an answer of the input.
    pub fn project(&self, part: usize, a: &Answer) -> Answer {
        let pos = positions(self.parts[part].query.free(), &self.source_vars);
        Answer::new(pos.iter().map(|&p| a.values[p].untag()).collect())
    }

    pub fn count(&self, exec: Exec) -> Result<Count> {
        let counts = par::try_map(exec, self.parts.iter().collect(), Part::count)?;
        Ok(counts.into_iter().sum())
    }
}

/// The fork ids of index `i` at which it can sit on the smaller side of `<`.
fn low_forks(i: u64, levels: u32) -> impl Iterator<Item = i64> {
    (0..levels).filter(move |&l| (i >> l) & 1 == 0).map(move |l| fork_id(i, l))
}

fn high_forks(j: u64, levels: u32) -> impl Iterator<Item = i64> {
    (0..levels).filter(move |&l| (j >> l) & 1 == 1).map(move |l| fork_id(j, l))
}

// Prefix above bit l, plus l itself. Indices i < j share exactly one id: the
// one at their highest differing bit.
fn fork_id(i: u64, l: u32) -> i64 {
    (((i >> (l + 1)) << 6) | l as u64) as i64
}

fn levels_for(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - ((n - 1) as u64).leading_zeros()
    }
}

struct Expansion {
    fresh: Var,
    domain: Vec<TaggedValue>,
    levels: u32,
    rank: u32,
}

/// Materializes one order/tree pair as a predicate-free full query.
///
/// `q` must be full and self-join-free, `db` disjointified, and every node of
/// `pair.tree` an atom of `q`. Pairs inside one node become filters; pairs
/// across neighboring nodes get a fresh variable joining the two sides
/// exactly when `a < b`.
pub fn eliminate_enforced_order(
    q: &ConjunctiveQuery,
    db: &Database,
    pair: &OrderTreePair,
    part: usize,
) -> Result<Part> {
    if !q.is_full() {
        return Err(Error::invalid("order elimination needs a full query"));
    }
    let tree = &pair.tree;
    let inst = Instance::new(q, db, tree.clone())?;
    let mut rels = inst.rels;
    let col = |n: usize, v: Var| tree.node(n).vars.iter().position(|&w| w == v).expect("var in node");

    let mut crossing: Vec<(usize, usize, usize, usize)> = Vec::new();
    for &(a, b) in &pair.order {
        let (na, nb) = enforcing_nodes(tree, a, b).ok_or_else(|| {
            Error::Invariant(format!("{} < {} is not enforced by the tree", q.name(a), q.name(b)))
        })?;
        let (ca, cb) = (col(na, a), col(nb, b));
        if na == nb {
            rels[na].retain(|r| r[ca] < r[cb]);
        } else {
            crossing.push((na, ca, nb, cb));
        }
    }

    let max_rank = rels.iter().flat_map(|r| r.rows().flatten().map(|v| v.rank)).max().unwrap_or(0);
    let mut names = q.names().to_vec();
    // Per node: (expansion index, column, is the smaller side).
    let mut attached: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); tree.len()];
    let mut expansions = Vec::new();
    for (k, &(na, ca, nb, cb)) in crossing.iter().enumerate() {
        let mut domain: Vec<TaggedValue> = rels[na].rows().map(|r| r[ca]).chain(rels[nb].rows().map(|r| r[cb])).collect();
        domain.sort_unstable();
        domain.dedup();
        let fresh = fresh_var(&mut names, &format!("v{part}_{}", k + 1));
        attached[na].push((k, ca, true));
        attached[nb].push((k, cb, false));
        expansions.push(Expansion {
            fresh,
            levels: levels_for(domain.len()),
            domain,
            rank: max_rank + 1 + k as u32,
        });
    }

    let mut taken: BTreeSet<String> = q.symbols();
    taken.extend(db.symbols().map(str::to_string));
    let mut atoms = Vec::with_capacity(tree.len());
    let mut out = Database::new();
    for n in 0..tree.len() {
        let node = tree.node(n);
        let atom = &q.atoms()[node.atom.expect("atom node")];
        let symbol = fresh_symbol(&format!("{}_p{part}", atom.symbol), &mut taken);
        let mut vars = node.vars.clone();
        vars.extend(attached[n].iter().map(|&(k, _, _)| expansions[k].fresh));
        let mut rel = Relation::new(symbol.clone(), vars.len());
        for row in rels[n].rows() {
            let forks: Vec<Vec<TaggedValue>> = attached[n]
                .iter()
                .map(|&(k, c, low)| {
                    let e = &expansions[k];
                    let i = e.domain.binary_search(&row[c]).expect("value in domain") as u64;
                    let ids: Vec<i64> = if low {
                        low_forks(i, e.levels).collect()
                    } else {
                        high_forks(i, e.levels).collect()
                    };
                    ids.into_iter().map(|id| TaggedValue::new(id, e.rank)).collect()
                })
                .collect();
            if forks.iter().any(Vec::is_empty) {
                continue;
            }
            let mut idx = vec![0usize; forks.len()];
            let mut buf: Vec<TaggedValue> = row.to_vec();
            loop {
                buf.truncate(row.len());
                buf.extend(idx.iter().enumerate().map(|(f, &i)| forks[f][i]));
                rel.push(&buf)?;
                let mut f = forks.len();
                loop {
                    if f == 0 {
                        break;
                    }
                    f -= 1;
                    idx[f] += 1;
                    if idx[f] < forks[f].len() {
                        break;
                    }
                    idx[f] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
            }
        }
        out.insert(rel)?;
        atoms.push(Atom::new(symbol, vars));
    }
    let fresh: Vec<Var> = expansions.iter().map(|e| e.fresh).collect();
    let free: Vec<Var> = q.free().iter().copied().chain(fresh.iter().copied()).collect();
    let query = ConjunctiveQuery::new(format!("Q{part}"), names, atoms, free)?;
    Ok(Part {
        query,
        db: out,
        order: pair.order.clone(),
        fresh,
    })
}

/// Parts for `x0 < min(xs)` on a full, self-join-free query over disjointified
/// data. Part numbers start at `first_part`.
pub fn eliminate_disjoint(
    q: &ConjunctiveQuery,
    x0: Var,
    xs: &[Var],
    db: &Database,
    exec: Exec,
    first_part: usize,
) -> Result<Vec<Part>> {
    let tree = query_join_tree(q).ok_or_else(|| Error::Intractable {
        task: Task::Elimination.name().into(),
        reason: "the query is cyclic".into(),
    })?;
    let root = tree
        .first_containing(x0)
        .ok_or_else(|| Error::invalid(format!("{} does not occur in the query", q.name(x0))))?;
    let pairs = partition_min_orders(&tree.rerooted(root), x0, xs)?;
    let numbered: Vec<(usize, OrderTreePair)> = pairs.into_iter().enumerate().collect();
    par::try_map(exec, numbered, |(i, pair)| eliminate_enforced_order(q, db, &pair, first_part + i))
}

/// `(Q ∧ P)(D)` as a disjoint union of predicate-free full acyclic queries.
pub fn eliminate_min_predicate(q: &ConjunctiveQuery, p: &MinPredicate, db: &Database) -> Result<EliminationResult> {
    eliminate_min_predicate_with(q, p, db, Exec::available())
}

pub fn eliminate_min_predicate_with(
    q: &ConjunctiveQuery,
    p: &MinPredicate,
    db: &Database,
    exec: Exec,
) -> Result<EliminationResult> {
    classify(Task::Elimination, q, Some(p), None)?.require()?;
    let restricted = restrict_predicate_to_free(q, Some(p), db)?;
    let (q1, db1) = remove_self_joins(&restricted.query, &restricted.db)?;
    let parts = match restricted.predicate.filter(|p| !p.is_vacuous()) {
        None => vec![Part {
            query: q1,
            db: db1,
            order: Vec::new(),
            fresh: Vec::new(),
        }],
        Some(rp) => {
            let tagged = disjointify(&db1, &q1, &predicate_rank_order(&q1, &rp))?;
            eliminate_disjoint(&q1, rp.x0, &rp.others(), &tagged, exec, 1)?
        }
    };
    Ok(EliminationResult {
        parts,
        source_vars: q.free().to_vec(),
    })
}

/// `|(Q ∧ P)(D)|`, or `|Q(D)|` without a predicate.
pub fn count_with_predicate(q: &ConjunctiveQuery, p: Option<&MinPredicate>, db: &Database, exec: Exec) -> Result<Count> {
    match p {
        Some(p) => eliminate_min_predicate_with(q, p, db, exec)?.count(exec),
        None => {
            classify(Task::Counting, q, None, None)?.require()?;
            let r = restrict_predicate_to_free(q, None, db)?;
            let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
            let inst = Instance::for_query(&q1, &db1, None)?;
            Ok(count_instance(&inst).0)
        }
    }
}

/// Whether `Q ∧ P` has an answer on `D`. Without a predicate only acyclicity is needed.
pub fn is_nonempty(q: &ConjunctiveQuery, p: Option<&MinPredicate>, db: &Database) -> Result<bool> {
    match p {
        Some(p) => {
            let r = eliminate_min_predicate(q, p, db)?;
            for part in &r.parts {
                let mut inst = part_instance(part)?;
                inst.reduce();
                if !inst.is_empty() {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        None => {
            classify(Task::Boolean, q, None, None)?.require()?;
            let (q1, db1) = remove_self_joins(&q.all_free(), db)?;
            let mut inst = Instance::for_query(&q1, &db1, None)?;
            inst.reduce();
            Ok(!inst.is_empty())
        }
    }
}

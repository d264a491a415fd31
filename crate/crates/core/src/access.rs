//! Direct access: the k-th answer without materializing the answer set.
//!
//! [`LexDA`] serves one full acyclic query in an order fixed by its join tree.
//! [`MinDA`] merges such structures, one per part of "x is the minimum", into
//! the order by `MIN(X)`. [`PredicateDA`] concatenates the parts of a
//! predicate elimination. [`single_access`] answers one ranked probe by
//! counting under unary filters.

use std::collections::HashMap;

use crate::elim::{eliminate_disjoint, eliminate_min_predicate_with, EliminationResult, Part};
use crate::error::{Error, Result};
use crate::instance::{key_of, positions, Instance, Key};
use crate::par::{self, Exec};
use crate::qmodel::{
    disjointify, remove_self_joins, Answer, ConjunctiveQuery, Database, Direction, MinPredicate, Ranking,
    TaggedValue, Var,
};
use crate::reduce::restrict_to_free;
use crate::semiring::{count_instance, Count};
use crate::structure::{classify, query_join_tree, JoinTree, Task, TreeNode};

fn out_of_bounds(index: Count, total: Count) -> Error {
    Error::OutOfBounds { index, total }
}

/// Direct access over a full acyclic query in join-tree order: root rows in
/// sorted order, then children as mixed-radix digits (last child fastest).
#[derive(Clone, Debug)]
pub struct LexDA {
    inst: Instance,
    order: Vec<Vec<u32>>,
    ranges: Vec<HashMap<Key, (u32, u32)>>,
    children: Vec<Vec<usize>>,
    /// Per node, by row: number of subtree answers extending the row.
    weight: Vec<Vec<Count>>,
    /// Per node, by position in `order`: weight of earlier rows of the same bucket.
    prefix: Vec<Vec<Count>>,
    total: Count,
    /// Per head variable: node and column it is read from.
    out: Vec<(usize, usize)>,
    pub build_steps: u64,
}

impl LexDA {
    /// `q` must be full, self-join-free, without repeated variables.
    pub fn new(q: &ConjunctiveQuery, db: &Database) -> Result<Self> {
        let tree = query_join_tree(q).ok_or_else(|| Error::Intractable {
            task: "direct access".into(),
            reason: "the query is cyclic".into(),
        })?;
        Self::over_tree(q, db, tree)
    }

    /// Rooted at a relaxed node `{x}`, so answers come sorted by `x` first.
    pub fn rooted_at_var(q: &ConjunctiveQuery, db: &Database, x: Var) -> Result<Self> {
        let tree = query_join_tree(q).ok_or_else(|| Error::Invariant("part is cyclic".into()))?;
        let f = tree
            .first_containing(x)
            .ok_or_else(|| Error::invalid(format!("{} does not occur in the query", q.name(x))))?;
        let mut tree = tree.rerooted(f);
        let atom = tree.node(f).atom;
        let id = tree.next_id();
        tree.add_root(TreeNode {
            id,
            vars: vec![x],
            atom,
            relaxed: true,
        });
        Self::over_tree(q, db, tree)
    }

    fn over_tree(q: &ConjunctiveQuery, db: &Database, tree: JoinTree) -> Result<Self> {
        if !q.is_full() {
            return Err(Error::invalid("direct access structure needs a full query"));
        }
        let mut inst = Instance::new(q, db, tree)?;
        let mut build_steps = inst.reduce();
        let buckets = inst.index_by(|node, a, b| inst.rels[node].row(a).cmp(inst.rels[node].row(b)));
        let n = inst.tree.len();
        let mut weight: Vec<Vec<Count>> = vec![Vec::new(); n];
        let mut prefix: Vec<Vec<Count>> = vec![Vec::new(); n];
        let bucket_total = |prefix: &Vec<Vec<Count>>, weight: &Vec<Vec<Count>>, order: &Vec<Vec<u32>>, c: usize, (lo, hi): (u32, u32)| -> Count {
            if hi == lo {
                0
            } else {
                let last = hi as usize - 1;
                prefix[c][last] + weight[c][order[c][last] as usize]
            }
        };
        for node in inst.tree.postorder() {
            let rel = &inst.rels[node];
            let mut w = Vec::with_capacity(rel.len());
            for row in rel.rows() {
                build_steps += 1;
                let mut acc: Count = 1;
                for &c in &buckets.children[node] {
                    let range = buckets.bucket(&inst, c, row);
                    acc = acc.saturating_mul(bucket_total(&prefix, &weight, &buckets.order, c, range));
                }
                w.push(acc);
            }
            weight[node] = w;
            let ord = &buckets.order[node];
            let mut pre = vec![0; ord.len()];
            let spans: Vec<(u32, u32)> = if inst.tree.parent(node).is_none() {
                vec![(0, ord.len() as u32)]
            } else {
                buckets.ranges[node].values().copied().collect()
            };
            for (lo, hi) in spans {
                let mut run: Count = 0;
                for p in lo as usize..hi as usize {
                    pre[p] = run;
                    run = run.saturating_add(weight[node][ord[p] as usize]);
                }
            }
            prefix[node] = pre;
        }
        let root = inst.tree.root();
        let total = bucket_total(&prefix, &weight, &buckets.order, root, (0, buckets.order[root].len() as u32));
        let out = q
            .free()
            .iter()
            .map(|&v| {
                let node = inst.tree.first_containing(v).expect("free variable in tree");
                let col = inst.tree.node(node).vars.iter().position(|&w| w == v).unwrap();
                (node, col)
            })
            .collect();
        Ok(LexDA {
            order: buckets.order,
            ranges: buckets.ranges,
            children: buckets.children,
            inst,
            weight,
            prefix,
            total,
            out,
            build_steps,
        })
    }

    pub fn total(&self) -> Count {
        self.total
    }

    fn bucket_total(&self, c: usize, (lo, hi): (u32, u32)) -> Count {
        if hi == lo {
            0
        } else {
            let last = hi as usize - 1;
            self.prefix[c][last] + self.weight[c][self.order[c][last] as usize]
        }
    }

    // Position in [lo, hi) whose prefix interval contains k, and the remainder.
    fn locate(&self, node: usize, lo: u32, hi: u32, k: Count, steps: &mut u64) -> (usize, Count) {
        let span = &self.prefix[node][lo as usize..hi as usize];
        *steps += 1 + u64::from((span.len() as u64).max(1).ilog2());
        let p = span.partition_point(|&x| x <= k) - 1;
        (lo as usize + p, k - span[p])
    }

    /// The `k`-th answer (0-based) and the number of probe steps taken.
    pub fn access_with_steps(&self, k: Count) -> Result<(Answer, u64)> {
        if k >= self.total {
            return Err(out_of_bounds(k, self.total));
        }
        let mut steps = 0u64;
        let n = self.inst.tree.len();
        let mut rows = vec![0usize; n];
        let root = self.inst.tree.root();
        let (pos, rem) = self.locate(root, 0, self.order[root].len() as u32, k, &mut steps);
        rows[root] = self.order[root][pos] as usize;
        let mut stack = vec![(root, rem)];
        while let Some((node, mut r)) = stack.pop() {
            let row = self.inst.rels[node].row(rows[node]);
            let ch = &self.children[node];
            let bounds: Vec<(u32, u32)> = ch
                .iter()
                .map(|&c| {
                    let key = key_of(row, &self.inst.parent_key[c]);
                    self.ranges[c].get(&key).copied().unwrap_or((0, 0))
                })
                .collect();
            let mut digits = vec![0; ch.len()];
            for i in (0..ch.len()).rev() {
                let w = self.bucket_total(ch[i], bounds[i]);
                digits[i] = r % w;
                r /= w;
            }
            for (i, &c) in ch.iter().enumerate() {
                let (pos, rem) = self.locate(c, bounds[i].0, bounds[i].1, digits[i], &mut steps);
                rows[c] = self.order[c][pos] as usize;
                stack.push((c, rem));
            }
        }
        let values = self
            .out
            .iter()
            .map(|&(node, col)| self.inst.rels[node].row(rows[node])[col])
            .collect();
        Ok((Answer::new(values), steps))
    }

    pub fn access(&self, k: Count) -> Result<Answer> {
        Ok(self.access_with_steps(k)?.0)
    }

    /// Root rows with their weights and the weight before them, in order.
    fn root_entries(&self) -> impl Iterator<Item = (&[TaggedValue], Count, Count)> + '_ {
        let root = self.inst.tree.root();
        self.order[root].iter().enumerate().map(move |(p, &r)| {
            (self.inst.rels[root].row(r as usize), self.weight[root][r as usize], self.prefix[root][p])
        })
    }
}

/// Number of answers found by probing `2^i - 1` until out of bounds, then
/// binary search. Returns the count and the number of probes.
pub fn count_via_access(access: impl Fn(Count) -> Result<Answer>) -> Result<(Count, u64)> {
    let mut probes = 0u64;
    let mut ok = |k: Count| -> Result<bool> {
        probes += 1;
        match access(k) {
            Ok(_) => Ok(true),
            Err(e) if e.is_out_of_bounds() => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !ok(0)? {
        return Ok((0, probes));
    }
    // Invariant: index lo exists, index hi does not.
    let mut lo: Count = 0;
    let mut hi: Count = 1;
    while ok(hi)? {
        lo = hi;
        hi = hi.checked_mul(2).and_then(|h| h.checked_add(1)).ok_or_else(|| Error::invalid("count overflow"))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + 1, probes))
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    min: TaggedValue,
    part: usize,
    count: Count,
    smaller_in_part: Count,
    smaller_total: Count,
}

/// Direct access in ascending `MIN(X)` order (descending `MAX(X)` for a max ranking).
#[derive(Clone, Debug)]
pub struct MinDA {
    parts: Vec<LexDA>,
    /// Per part: positions of the source head variables in the part's answers.
    proj: Vec<Vec<usize>>,
    entries: Vec<Entry>,
    total: Count,
    negate: bool,
    /// Input rows, rows written by elimination, and the parts' build steps.
    pub build_steps: u64,
}

pub fn build_min_da(q: &ConjunctiveQuery, ranking: &Ranking, db: &Database, exec: Exec) -> Result<MinDA> {
    classify(Task::RankedDA, q, None, Some(&ranking.vars))?.require()?;
    let negate = ranking.direction == Direction::Max;
    let db = if negate { db.negated()? } else { db.clone() };
    let r = restrict_to_free(q, &db)?;
    let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
    let mut xs: Vec<Var> = Vec::new();
    for &v in &ranking.vars {
        if !xs.contains(&v) {
            xs.push(v);
        }
    }
    if xs.is_empty() {
        return Err(Error::invalid("empty ranking"));
    }
    let tagged = disjointify(&db1, &q1, &xs)?;
    let mut parts: Vec<(Var, Part)> = Vec::new();
    for &x in &xs {
        let others: Vec<Var> = xs.iter().copied().filter(|&v| v != x).collect();
        let ps = eliminate_disjoint(&q1, x, &others, &tagged, exec, parts.len() + 1)?;
        parts.extend(ps.into_iter().map(|p| (x, p)));
    }
    let proj: Vec<Vec<usize>> = parts.iter().map(|(_, p)| positions(p.query.free(), q.free())).collect();
    let mut build_steps = db1.size() as u64 + parts.iter().map(|(_, p)| p.db.size() as u64).sum::<u64>();
    let das = par::try_map(exec, parts, |(x, p)| LexDA::rooted_at_var(&p.query, &p.db, x))?;
    let mut entries: Vec<Entry> = Vec::new();
    for (i, da) in das.iter().enumerate() {
        for (row, count, before) in da.root_entries() {
            entries.push(Entry {
                min: row[0],
                part: i,
                count,
                smaller_in_part: before,
                smaller_total: 0,
            });
        }
    }
    entries.sort_by_key(|a| (a.min.base, a.part));
    let mut run: Count = 0;
    for e in &mut entries {
        e.smaller_total = run;
        run += e.count;
    }
    build_steps += das.iter().map(|d| d.build_steps).sum::<u64>() + entries.len() as u64;
    Ok(MinDA {
        parts: das,
        proj,
        entries,
        total: run,
        negate,
        build_steps,
    })
}

impl MinDA {
    pub fn total(&self) -> Count {
        self.total
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn access_with_steps(&self, k: Count) -> Result<(Answer, u64)> {
        if k >= self.total {
            return Err(out_of_bounds(k, self.total));
        }
        let i = self.entries.partition_point(|e| e.smaller_total <= k) - 1;
        let e = self.entries[i];
        let steps = 1 + u64::from((self.entries.len() as u64).ilog2());
        let (a, s) = self.parts[e.part].access_with_steps(k - e.smaller_total + e.smaller_in_part)?;
        let values = self.proj[e.part]
            .iter()
            .map(|&p| {
                let v = a.values[p].untag();
                if self.negate {
                    TaggedValue::untagged(-v.base)
                } else {
                    v
                }
            })
            .collect();
        Ok((Answer::new(values), steps + s))
    }

    pub fn access(&self, k: Count) -> Result<Answer> {
        Ok(self.access_with_steps(k)?.0)
    }
}

/// Direct access to `(Q ∧ P)(D)` in an unspecified but fixed order.
#[derive(Clone, Debug)]
pub struct PredicateDA {
    elim: EliminationResult,
    parts: Vec<LexDA>,
    offsets: Vec<Count>,
    total: Count,
}

/// Without a predicate this is direct access to `Q(D)` for a free-connex `Q`.
pub fn build_unranked_da(q: &ConjunctiveQuery, p: Option<&MinPredicate>, db: &Database, exec: Exec) -> Result<PredicateDA> {
    let elim = match p {
        Some(p) => {
            classify(Task::UnrankedDAWithPredicate, q, Some(p), None)?.require()?;
            eliminate_min_predicate_with(q, p, db, exec)?
        }
        None => {
            classify(Task::UnrankedDAWithPredicate, q, None, None)?.require()?;
            let r = restrict_to_free(q, db)?;
            let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
            EliminationResult {
                parts: vec![Part {
                    query: q1,
                    db: db1,
                    order: Vec::new(),
                    fresh: Vec::new(),
                }],
                source_vars: q.free().to_vec(),
            }
        }
    };
    let parts = par::try_map(exec, elim.parts.iter().collect(), |p: &Part| LexDA::new(&p.query, &p.db))?;
    let mut offsets = Vec::with_capacity(parts.len());
    let mut total: Count = 0;
    for da in &parts {
        offsets.push(total);
        total += da.total();
    }
    Ok(PredicateDA {
        elim,
        parts,
        offsets,
        total,
    })
}

impl PredicateDA {
    pub fn total(&self) -> Count {
        self.total
    }

    pub fn access_with_steps(&self, k: Count) -> Result<(Answer, u64)> {
        if k >= self.total {
            return Err(out_of_bounds(k, self.total));
        }
        let i = self.offsets.partition_point(|&o| o <= k) - 1;
        // Skip empty parts sharing the same offset.
        let i = (i..self.parts.len()).find(|&j| self.parts[j].total() > k - self.offsets[j]).unwrap_or(i);
        let (a, s) = self.parts[i].access_with_steps(k - self.offsets[i])?;
        Ok((self.elim.project(i, &a), s + 1))
    }

    pub fn access(&self, k: Count) -> Result<Answer> {
        Ok(self.access_with_steps(k)?.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cmp {
    Eq,
    Gt,
    Ge,
}

fn filtered(q: &ConjunctiveQuery, db: &Database, conds: &[(Var, Cmp, i64)]) -> Result<Database> {
    let mut out = db.clone();
    for atom in q.atoms() {
        let checks: Vec<(usize, Cmp, i64)> = atom
            .vars
            .iter()
            .enumerate()
            .flat_map(|(c, v)| conds.iter().filter(move |(w, _, _)| w == v).map(move |&(_, op, t)| (c, op, t)))
            .collect();
        if checks.is_empty() {
            continue;
        }
        let mut rel = db.relation(&atom.symbol)?.clone();
        rel.retain(|row| {
            checks.iter().all(|&(c, op, t)| match op {
                Cmp::Eq => row[c].base == t,
                Cmp::Gt => row[c].base > t,
                Cmp::Ge => row[c].base >= t,
            })
        });
        out.replace(rel);
    }
    Ok(out)
}

fn count_filtered(q: &ConjunctiveQuery, db: &Database, conds: &[(Var, Cmp, i64)]) -> Result<Count> {
    let inst = Instance::for_query(q, &filtered(q, db, conds)?, None)?;
    Ok(count_instance(&inst).0)
}

/// The `k`-th answer by `MIN(X)` (or `MAX(X)` descending) for a free-connex
/// query, without building a full access structure: binary search on the
/// threshold `t` by counting answers with `min >= t`, then a direct access
/// inside the group whose first minimal variable is fixed.
pub fn single_access(q: &ConjunctiveQuery, ranking: &Ranking, db: &Database, k: Count) -> Result<Answer> {
    classify(Task::SingleAccess, q, None, Some(&ranking.vars))?.require()?;
    let negate = ranking.direction == Direction::Max;
    let db = if negate { db.negated()? } else { db.untagged() };
    let r = restrict_to_free(q, &db)?;
    let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
    let mut xs: Vec<Var> = Vec::new();
    for &v in &ranking.vars {
        if !xs.contains(&v) {
            xs.push(v);
        }
    }
    if xs.is_empty() {
        return Err(Error::invalid("empty ranking"));
    }
    let total = count_filtered(&q1, &db1, &[])?;
    if k >= total {
        return Err(out_of_bounds(k, total));
    }
    let mut candidates: Vec<i64> = Vec::new();
    for atom in q1.atoms() {
        let rel = db1.relation(&atom.symbol)?;
        for (c, v) in atom.vars.iter().enumerate() {
            if xs.contains(v) {
                candidates.extend(rel.rows().map(|row| row[c].base));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let below = |t: i64| -> Result<Count> {
        let conds: Vec<(Var, Cmp, i64)> = xs.iter().map(|&x| (x, Cmp::Ge, t)).collect();
        Ok(total - count_filtered(&q1, &db1, &conds)?)
    };
    // Largest candidate t with fewer than or exactly k answers below it.
    let (mut lo, mut hi) = (0usize, candidates.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if below(candidates[mid])? <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = candidates[lo];
    let mut rest = k - below(t)?;
    for i in 0..xs.len() {
        let conds: Vec<(Var, Cmp, i64)> = xs
            .iter()
            .enumerate()
            .map(|(j, &x)| (x, if j < i { Cmp::Gt } else if j == i { Cmp::Eq } else { Cmp::Ge }, t))
            .collect();
        let group = filtered(&q1, &db1, &conds)?;
        let da = LexDA::new(&q1, &group)?;
        if rest < da.total() {
            let a = da.access(rest)?;
            let pos = positions(q1.free(), q.free());
            let values = pos
                .iter()
                .map(|&p| {
                    let b = a.values[p].base;
                    TaggedValue::untagged(if negate { -b } else { b })
                })
                .collect();
            return Ok(Answer::new(values));
        }
        rest -= da.total();
    }
    Err(Error::Invariant("single access ran past its group counts".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{min_of, oracle_answers, oracle_answers_where, Filter};
    use crate::qmodel::{parse_query, Relation};
    use std::collections::BTreeSet;

    fn load(text: &str, rels: &[(&str, usize, &[&[i64]])]) -> (crate::qmodel::ParsedQuery, Database) {
        let pq = parse_query(text).unwrap();
        let mut db = Database::new();
        for (s, a, rows) in rels {
            db.insert(Relation::from_ints(s, *a, rows).unwrap()).unwrap();
        }
        (pq, db)
    }

    fn two_branch() -> (crate::qmodel::ParsedQuery, Database) {
        load(
            "Q(x0,x1,x2,y) :- R0(x0), R1(x1,y), R2(x2,y).\nPREDICATE x0 <= MIN(x1,x2).\nORDER BY MIN(x0,x1,x2).",
            &[("R0", 1, &[&[1], &[2]]), ("R1", 2, &[&[1, 0], &[2, 0]]), ("R2", 2, &[&[2, 0], &[3, 0]])],
        )
    }

    #[test]
    fn lex_da_covers_every_answer_once() {
        let (pq, db) = two_branch();
        let da = LexDA::new(&pq.query, &db).unwrap();
        assert_eq!(da.total(), 8);
        let got: BTreeSet<Answer> = (0..8).map(|k| da.access(k).unwrap()).collect();
        assert_eq!(got, oracle_answers(&pq.query, &db).unwrap());
        assert!(da.access(8).unwrap_err().is_out_of_bounds());
    }

    #[test]
    fn probing_finds_the_count() {
        let (pq, db) = two_branch();
        let da = LexDA::new(&pq.query, &db).unwrap();
        let (n, probes) = count_via_access(|k| da.access(k)).unwrap();
        assert_eq!(n, 8);
        assert!(probes <= 2 * 4 + 2);
        let (zero, _) = count_via_access(|k| Err(out_of_bounds(k, 0))).unwrap();
        assert_eq!(zero, 0);
    }

    #[test]
    fn min_da_matches_sorted_oracle() {
        let (pq, db) = two_branch();
        let ranking = pq.ranking.unwrap();
        let da = build_min_da(&pq.query, &ranking, &db, Exec::Sequential).unwrap();
        assert_eq!(da.total(), 8);
        let all = oracle_answers(&pq.query, &db).unwrap();
        let mut got = BTreeSet::new();
        let mut last = i64::MIN;
        for k in 0..8 {
            let a = da.access(k).unwrap();
            let m = min_of(&pq.query, &a, &ranking.vars).unwrap().base;
            assert!(m >= last);
            last = m;
            got.insert(a);
        }
        assert_eq!(got, all);
    }

    #[test]
    fn max_ranking_descends() {
        let (pq, db) = load(
            "Q(a1,a2,s) :- R1(a1,s), R2(a2,s).\nORDER BY MAX(a1,a2).",
            &[("R1", 2, &[&[1, 0], &[5, 0], &[3, 1]]), ("R2", 2, &[&[2, 0], &[4, 1], &[0, 1]])],
        );
        let ranking = pq.ranking.unwrap();
        let da = build_min_da(&pq.query, &ranking, &db, Exec::Parallel).unwrap();
        let all = oracle_answers(&pq.query, &db).unwrap();
        assert_eq!(da.total() as usize, all.len());
        let maxes: Vec<i64> = (0..da.total())
            .map(|k| {
                let a = da.access(k).unwrap();
                ranking.vars.iter().map(|v| a.values[pq.query.free().iter().position(|f| f == v).unwrap()].base).max().unwrap()
            })
            .collect();
        assert!(maxes.windows(2).all(|w| w[0] >= w[1]), "{maxes:?}");
        for k in 0..all.len() as u128 {
            let s = single_access(&pq.query, &ranking, &db, k).unwrap();
            assert!(all.contains(&s));
        }
    }

    #[test]
    fn predicate_da_matches_oracle() {
        let (pq, db) = two_branch();
        let p = pq.predicate.unwrap();
        let da = build_unranked_da(&pq.query, Some(&p), &db, Exec::Sequential).unwrap();
        let expected = oracle_answers_where(&pq.query, &db, &Filter::Min(p)).unwrap();
        assert_eq!(da.total() as usize, expected.len());
        let got: BTreeSet<Answer> = (0..da.total()).map(|k| da.access(k).unwrap()).collect();
        assert_eq!(got, expected);
        assert!(da.access(da.total()).unwrap_err().is_out_of_bounds());
    }

    #[test]
    fn single_access_walks_the_ranking() {
        let (pq, db) = two_branch();
        let ranking = pq.ranking.unwrap();
        let all = oracle_answers(&pq.query, &db).unwrap();
        let mut seen = BTreeSet::new();
        let mut last = i64::MIN;
        for k in 0..all.len() as u128 {
            let a = single_access(&pq.query, &ranking, &db, k).unwrap();
            let m = min_of(&pq.query, &a, &ranking.vars).unwrap().base;
            assert!(m >= last);
            last = m;
            seen.insert(a);
        }
        assert_eq!(seen, all);
        assert!(single_access(&pq.query, &ranking, &db, 8).unwrap_err().is_out_of_bounds());
    }

    #[test]
    fn projection_to_free_variables() {
        let (pq, db) = load(
            "Q(a,b) :- R(a,b,y), S(y,z), T(b,w).\nORDER BY MIN(a,b).",
            &[
                ("R", 3, &[&[1, 4, 0], &[2, 0, 0], &[3, 2, 1], &[5, 2, 2]]),
                ("S", 2, &[&[0, 4], &[1, 0], &[0, 2]]),
                ("T", 2, &[&[4, 9], &[4, 8], &[0, 1], &[2, 2]]),
            ],
        );
        let ranking = pq.ranking.unwrap();
        let da = build_min_da(&pq.query, &ranking, &db, Exec::Sequential).unwrap();
        let all = oracle_answers(&pq.query, &db).unwrap();
        let got: BTreeSet<Answer> = (0..da.total()).map(|k| da.access(k).unwrap()).collect();
        assert_eq!(got, all);
        let unranked = build_unranked_da(&pq.query, None, &db, Exec::Sequential).unwrap();
        assert_eq!(unranked.total() as usize, all.len());
    }
}

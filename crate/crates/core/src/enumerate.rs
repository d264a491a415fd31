//! Enumeration after linear preprocessing: plain, under a min-predicate, and
//! ranked by `MIN(X)` / `MAX(X)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::instance::{positions, Buckets, Instance};
use crate::qmodel::{remove_self_joins, Answer, ConjunctiveQuery, Database, Direction, MinPredicate, Ranking, TaggedValue, Var};
use crate::reduce::{holds, restrict_predicate_to_free, restrict_to_free};
use crate::semiring::{thresholds, Ext};
use crate::structure::{classify, Task};

struct Limit {
    thr: Vec<Vec<Ext<TaggedValue>>>,
    x0_col: usize,
    strict: bool,
}

/// Odometer over join buckets in preorder; every node's range depends only on
/// its parent's current row, which comes earlier.
struct NestedLoop {
    inst: Instance,
    buckets: Buckets,
    pre: Vec<usize>,
    root_rows: Vec<u32>,
    range: Vec<(u32, u32)>,
    pos: Vec<u32>,
    limit: Option<Limit>,
    out: Vec<(usize, usize)>,
    started: bool,
    done: bool,
    steps: u64,
}

impl NestedLoop {
    fn new(inst: Instance, buckets: Buckets, root_rows: Vec<u32>, limit: Option<Limit>, head: &[Var]) -> Self {
        let n = inst.tree.len();
        let pre = inst.tree.preorder();
        let out = head
            .iter()
            .map(|&v| {
                let node = inst.tree.first_containing(v).expect("head variable in tree");
                (node, inst.tree.node(node).vars.iter().position(|&w| w == v).unwrap())
            })
            .collect();
        NestedLoop {
            inst,
            buckets,
            pre,
            root_rows,
            range: vec![(0, 0); n],
            pos: vec![0; n],
            limit,
            out,
            started: false,
            done: false,
            steps: 0,
        }
    }

    fn row_index(&self, node: usize) -> usize {
        let p = self.pos[node];
        if node == self.inst.tree.root() {
            self.root_rows[p as usize] as usize
        } else {
            self.buckets.order[node][p as usize] as usize
        }
    }

    fn row(&self, node: usize) -> &[TaggedValue] {
        self.inst.rels[node].row(self.row_index(node))
    }

    fn x0(&self, l: &Limit) -> TaggedValue {
        let root = self.inst.tree.root();
        self.inst.rels[root].row(self.row_index(root))[l.x0_col]
    }

    // Rows of a bucket come by decreasing threshold, so the qualifying ones
    // form a prefix; the scan stops at the first row that fails.
    fn qualifies(&self, node: usize, p: u32) -> bool {
        match &self.limit {
            None => true,
            Some(l) => {
                let r = self.buckets.order[node][p as usize] as usize;
                holds(l.strict, self.x0(l), l.thr[node][r])
            }
        }
    }

    fn set_range(&mut self, node: usize) -> bool {
        self.steps += 1;
        let parent = self.inst.tree.parent(node).expect("non-root");
        let (lo, hi) = self.buckets.bucket(&self.inst, node, self.row(parent));
        self.range[node] = (lo, hi);
        self.pos[node] = lo;
        lo < hi && self.qualifies(node, lo)
    }

    fn can_advance(&self, node: usize) -> bool {
        let next = self.pos[node] + 1;
        next < self.range[node].1 && (node == self.inst.tree.root() || self.qualifies(node, next))
    }

    // Sets ranges for pre[from..]; on an empty bucket, marks the rest exhausted.
    fn fill(&mut self, from: usize) -> bool {
        for k in from..self.pre.len() {
            if !self.set_range(self.pre[k]) {
                for &m in &self.pre[k..] {
                    self.range[m] = (self.pos[m], self.pos[m]);
                }
                return false;
            }
        }
        true
    }

    fn advance(&mut self) -> bool {
        loop {
            let mut found = None;
            for i in (0..self.pre.len()).rev() {
                self.steps += 1;
                if self.can_advance(self.pre[i]) {
                    found = Some(i);
                    break;
                }
            }
            let Some(i) = found else { return false };
            self.pos[self.pre[i]] += 1;
            if self.fill(i + 1) {
                return true;
            }
        }
    }

    fn emit(&self) -> Answer {
        Answer::new(self.out.iter().map(|&(n, c)| self.row(n)[c]).collect())
    }
}

impl Iterator for NestedLoop {
    type Item = Answer;

    fn next(&mut self) -> Option<Answer> {
        if self.done {
            return None;
        }
        let ok = if !self.started {
            self.started = true;
            let root = self.inst.tree.root();
            if self.root_rows.is_empty() {
                false
            } else {
                self.range[root] = (0, self.root_rows.len() as u32);
                self.pos[root] = 0;
                self.fill(1) || self.advance()
            }
        } else {
            self.advance()
        };
        if ok {
            Some(self.emit())
        } else {
            self.done = true;
            None
        }
    }
}

/// Merges one stream per ranking variable, each sorted by its variable; an
/// answer is emitted only by the stream of its first minimal variable.
struct RankedMerge {
    streams: Vec<NestedLoop>,
    /// Per stream: head positions of the ranking variables, the stream's own first.
    xs_pos: Vec<usize>,
    own: Vec<usize>,
    heads: Vec<Option<Answer>>,
    heap: BinaryHeap<Reverse<(TaggedValue, usize)>>,
    skipped: u64,
}

impl RankedMerge {
    fn new(mut streams: Vec<NestedLoop>, xs_pos: Vec<usize>) -> Self {
        let own = xs_pos.clone();
        let mut heads = Vec::with_capacity(streams.len());
        let mut heap = BinaryHeap::new();
        for (i, s) in streams.iter_mut().enumerate() {
            let h = s.next();
            if let Some(a) = &h {
                heap.push(Reverse((a.values[own[i]], i)));
            }
            heads.push(h);
        }
        RankedMerge {
            streams,
            xs_pos,
            own,
            heads,
            heap,
            skipped: 0,
        }
    }
}

impl Iterator for RankedMerge {
    type Item = Answer;

    fn next(&mut self) -> Option<Answer> {
        while let Some(Reverse((_, i))) = self.heap.pop() {
            let a = self.heads[i].take().expect("queued stream has a head");
            let next = self.streams[i].next();
            if let Some(b) = &next {
                self.heap.push(Reverse((b.values[self.own[i]], i)));
            }
            self.heads[i] = next;
            let m = self.xs_pos.iter().map(|&p| a.values[p]).min().expect("non-empty ranking");
            let first = self.xs_pos.iter().position(|&p| a.values[p] == m).unwrap();
            if first == i {
                return Some(a);
            }
            self.skipped += 1;
        }
        None
    }
}

enum Kind {
    Empty,
    Loop(Box<NestedLoop>),
    Ranked(RankedMerge),
}

/// A lazy stream of answers to the input query, untagged, in head order.
pub struct AnswerStream {
    kind: Kind,
    proj: Vec<usize>,
    negate: bool,
}

impl AnswerStream {
    /// Work units spent so far: preprocessing (reduction and indexing, one
    /// unit per row touched), then bucket lookups, odometer moves and skipped
    /// duplicates.
    pub fn steps(&self) -> u64 {
        match &self.kind {
            Kind::Empty => 0,
            Kind::Loop(l) => l.steps,
            Kind::Ranked(r) => r.streams.iter().map(|s| s.steps).sum::<u64>() + r.skipped,
        }
    }
}

impl Iterator for AnswerStream {
    type Item = Answer;

    fn next(&mut self) -> Option<Answer> {
        let a = match &mut self.kind {
            Kind::Empty => None,
            Kind::Loop(l) => l.next(),
            Kind::Ranked(r) => r.next(),
        }?;
        let negate = self.negate;
        Some(Answer::new(
            self.proj
                .iter()
                .map(|&p| {
                    let b = a.values[p].base;
                    TaggedValue::untagged(if negate { -b } else { b })
                })
                .collect(),
        ))
    }
}

fn root_at_atom(q: &ConjunctiveQuery, v: Var) -> Result<usize> {
    q.atoms()
        .iter()
        .position(|a| a.vars.contains(&v))
        .ok_or_else(|| Error::invalid(format!("{} does not occur in the query", q.name(v))))
}

fn plain_loop(q1: &ConjunctiveQuery, db1: &Database) -> Result<NestedLoop> {
    let mut inst = Instance::for_query(q1, db1, None)?;
    let pre = inst.reduce() + inst.size() as u64;
    let buckets = inst.index_by(|_, _, _| std::cmp::Ordering::Equal);
    let root_rows = buckets.order[inst.tree.root()].clone();
    let mut l = NestedLoop::new(inst, buckets, root_rows, None, q1.free());
    l.steps = pre;
    Ok(l)
}

/// All answers of a free-connex query, in no particular order.
pub fn enumerate_answers(q: &ConjunctiveQuery, db: &Database) -> Result<AnswerStream> {
    classify(Task::EnumWithPredicate, q, None, None)?.require()?;
    let r = restrict_to_free(q, &db.untagged())?;
    let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
    Ok(AnswerStream {
        proj: positions(q1.free(), q.free()),
        kind: Kind::Loop(Box::new(plain_loop(&q1, &db1)?)),
        negate: false,
    })
}

/// Answers of `Q ∧ P`, each once, in no particular order.
pub fn enumerate_with_predicate(q: &ConjunctiveQuery, p: &MinPredicate, db: &Database) -> Result<AnswerStream> {
    classify(Task::EnumWithPredicate, q, Some(p), None)?.require()?;
    let r = restrict_predicate_to_free(q, Some(p), &db.untagged())?;
    let (q1, db1) = remove_self_joins(&r.query, &r.db)?;
    let proj = positions(q1.free(), q.free());
    let Some(rp) = r.predicate.filter(|rp| !rp.is_vacuous()) else {
        return Ok(AnswerStream {
            proj,
            kind: Kind::Loop(Box::new(plain_loop(&q1, &db1)?)),
            negate: false,
        });
    };
    let mut inst = Instance::for_query(&q1, &db1, Some(root_at_atom(&q1, rp.x0)?))?;
    let pre = inst.reduce() + 2 * inst.size() as u64;
    let thr = thresholds(&inst, &rp.others()).values;
    let root = inst.tree.root();
    let x0_col = inst.tree.node(root).vars.iter().position(|&v| v == rp.x0).unwrap();
    // Buckets by decreasing threshold so the qualifying rows form a prefix.
    let buckets = inst.index_by(|node, a, b| thr[node][b].cmp(&thr[node][a]));
    let rel = &inst.rels[root];
    let mut root_rows: Vec<u32> = buckets.order[root]
        .iter()
        .copied()
        .filter(|&r| holds(rp.strict, rel.row(r as usize)[x0_col], thr[root][r as usize]))
        .collect();
    root_rows.sort_by_key(|&r| (rel.row(r as usize)[x0_col], r));
    let limit = Limit {
        thr,
        x0_col,
        strict: rp.strict,
    };
    let mut l = NestedLoop::new(inst, buckets, root_rows, Some(limit), q1.free());
    l.steps = pre;
    Ok(AnswerStream {
        proj,
        kind: Kind::Loop(Box::new(l)),
        negate: false,
    })
}

/// Answers in ascending `MIN(X)` (descending `MAX(X)`) order, ties in an
/// unspecified order.
pub fn enumerate_ranked(q: &ConjunctiveQuery, ranking: &Ranking, db: &Database) -> Result<AnswerStream> {
    classify(Task::RankedEnum, q, None, Some(&ranking.vars))?.require()?;
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
    let xs_pos = positions(q1.free(), &xs);
    let mut streams = Vec::with_capacity(xs.len());
    for &x in &xs {
        let mut inst = Instance::for_query(&q1, &db1, Some(root_at_atom(&q1, x)?))?;
        let pre = inst.reduce() + inst.size() as u64;
        let root = inst.tree.root();
        let col = inst.tree.node(root).vars.iter().position(|&v| v == x).unwrap();
        let buckets = inst.index_by(|_, _, _| std::cmp::Ordering::Equal);
        let rel = &inst.rels[root];
        let mut root_rows = buckets.order[root].clone();
        root_rows.sort_by_key(|&r| (rel.row(r as usize)[col], r));
        let mut l = NestedLoop::new(inst, buckets, root_rows, None, q1.free());
        l.steps = pre;
        streams.push(l);
    }
    Ok(AnswerStream {
        proj: positions(q1.free(), q.free()),
        kind: Kind::Ranked(RankedMerge::new(streams, xs_pos)),
        negate,
    })
}

/// Delay profile of a stream, in work units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DelayStats {
    pub answers: u64,
    pub total_steps: u64,
    pub max_delay: u64,
}

/// Drains `stream`, recording the largest step gap between consecutive answers.
pub fn drain_with_stats(stream: &mut AnswerStream) -> (Vec<Answer>, DelayStats) {
    let mut out = Vec::new();
    let mut stats = DelayStats::default();
    let mut last = stream.steps();
    while let Some(a) = stream.next() {
        let now = stream.steps();
        stats.max_delay = stats.max_delay.max(now - last);
        last = now;
        out.push(a);
    }
    let now = stream.steps();
    stats.max_delay = stats.max_delay.max(now - last);
    stats.answers = out.len() as u64;
    stats.total_steps = now;
    (out, stats)
}

/// An empty stream, for callers that already know there are no answers.
pub fn empty_stream() -> AnswerStream {
    AnswerStream {
        kind: Kind::Empty,
        proj: Vec::new(),
        negate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{min_of, oracle_answers, oracle_answers_where, Filter};
    use crate::qmodel::{parse_query, ParsedQuery, Relation};
    use std::collections::BTreeSet;

    fn load(text: &str, rels: &[(&str, usize, &[&[i64]])]) -> (ParsedQuery, Database) {
        let pq = parse_query(text).unwrap();
        let mut db = Database::new();
        for (s, a, rows) in rels {
            db.insert(Relation::from_ints(s, *a, rows).unwrap()).unwrap();
        }
        (pq, db)
    }

    fn two_branch() -> (ParsedQuery, Database) {
        load(
            "Q(x0,x1,x2,y) :- R0(x0), R1(x1,y), R2(x2,y).\nPREDICATE x0 <= MIN(x1,x2).\nORDER BY MIN(x0,x1,x2).",
            &[("R0", 1, &[&[1], &[2]]), ("R1", 2, &[&[1, 0], &[2, 0]]), ("R2", 2, &[&[2, 0], &[3, 0]])],
        )
    }

    fn no_duplicates(v: &[Answer]) -> BTreeSet<Answer> {
        let set: BTreeSet<Answer> = v.iter().cloned().collect();
        assert_eq!(set.len(), v.len(), "duplicate answers");
        set
    }

    #[test]
    fn plain_enumeration() {
        let (pq, db) = two_branch();
        let got: Vec<Answer> = enumerate_answers(&pq.query, &db).unwrap().collect();
        assert_eq!(no_duplicates(&got), oracle_answers(&pq.query, &db).unwrap());
    }

    #[test]
    fn predicate_enumeration() {
        let (pq, db) = two_branch();
        let mut p = pq.predicate.clone().unwrap();
        for strict in [false, true] {
            p.strict = strict;
            let got: Vec<Answer> = enumerate_with_predicate(&pq.query, &p, &db).unwrap().collect();
            let want = oracle_answers_where(&pq.query, &db, &Filter::Min(p.clone())).unwrap();
            assert_eq!(no_duplicates(&got), want, "strict={strict}");
        }
    }

    #[test]
    fn predicate_with_existential_members() {
        let (pq, db) = load(
            "Q(x0,x1) :- R(x0,x1,y), S(y,w).\nPREDICATE x0 <= MIN(x1,w).",
            &[
                ("R", 3, &[&[1, 5, 0], &[4, 5, 1], &[3, 2, 1]]),
                ("S", 2, &[&[0, 0], &[0, 7], &[1, 9], &[1, 2]]),
            ],
        );
        let p = pq.predicate.unwrap();
        let got: Vec<Answer> = enumerate_with_predicate(&pq.query, &p, &db).unwrap().collect();
        assert_eq!(no_duplicates(&got), oracle_answers_where(&pq.query, &db, &Filter::Min(p)).unwrap());
    }

    #[test]
    fn ranked_enumeration_is_sorted_and_complete() {
        let (pq, db) = two_branch();
        let ranking = pq.ranking.unwrap();
        let got: Vec<Answer> = enumerate_ranked(&pq.query, &ranking, &db).unwrap().collect();
        let mins: Vec<i64> = got.iter().map(|a| min_of(&pq.query, a, &ranking.vars).unwrap().base).collect();
        assert!(mins.windows(2).all(|w| w[0] <= w[1]), "{mins:?}");
        assert_eq!(no_duplicates(&got), oracle_answers(&pq.query, &db).unwrap());
    }

    #[test]
    fn ranked_max_and_path_query() {
        // Not ranked-accessible (bad path a-u-v-b) but enumerable in order.
        let (pq, db) = load(
            "Q(a,u,v,b) :- R(a,u), S(u,v), T(v,b).\nORDER BY MAX(a,b).",
            &[
                ("R", 2, &[&[1, 0], &[7, 0], &[3, 1]]),
                ("S", 2, &[&[0, 0], &[1, 0], &[1, 1]]),
                ("T", 2, &[&[0, 2], &[0, 9], &[1, 4]]),
            ],
        );
        let ranking = pq.ranking.unwrap();
        let got: Vec<Answer> = enumerate_ranked(&pq.query, &ranking, &db).unwrap().collect();
        let pos: Vec<usize> = ranking.vars.iter().map(|v| pq.query.free().iter().position(|f| f == v).unwrap()).collect();
        let maxes: Vec<i64> = got.iter().map(|a| pos.iter().map(|&p| a.values[p].base).max().unwrap()).collect();
        assert!(maxes.windows(2).all(|w| w[0] >= w[1]), "{maxes:?}");
        assert_eq!(no_duplicates(&got), oracle_answers(&pq.query, &db).unwrap());
    }

    #[test]
    fn stats_count_answers() {
        let (pq, db) = two_branch();
        let mut s = enumerate_answers(&pq.query, &db).unwrap();
        let (v, st) = drain_with_stats(&mut s);
        assert_eq!(st.answers, v.len() as u64);
        assert!(st.max_delay <= 2 * 3 + 2);
        assert_eq!(empty_stream().count(), 0);
    }

    #[test]
    fn empty_database_gives_nothing() {
        let (pq, mut db) = two_branch();
        db.replace(Relation::new("R0", 1));
        assert_eq!(enumerate_answers(&pq.query, &db).unwrap().count(), 0);
        let p = pq.predicate.unwrap();
        assert_eq!(enumerate_with_predicate(&pq.query, &p, &db).unwrap().count(), 0);
        assert_eq!(enumerate_ranked(&pq.query, &pq.ranking.unwrap(), &db).unwrap().count(), 0);
    }
}

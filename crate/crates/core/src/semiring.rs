//! Bottom-up semiring aggregation over a rooted join tree, and its instances:
//! counting, maximum co-joined value, and max-min thresholds.

use std::collections::HashMap;
use std::fmt::Debug;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{key_of, Instance, Key};
use crate::qmodel::{remove_self_joins, ConjunctiveQuery, Database, TaggedValue, Var};
use crate::structure;

pub type Count = u128;

/// A value extended with both infinities; `NegInf < Fin(_) < PosInf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Ext<T> {
    NegInf,
    Fin(T),
    PosInf,
}

impl<T: Copy> Ext<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Ext::Fin(v) => Some(v),
            _ => None,
        }
    }
}

pub trait Semiring {
    type Elem: Clone + Debug + PartialEq;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn plus(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn times(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
}

/// `(N, +, *, 0, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Counting;

impl Semiring for Counting {
    type Elem = Count;
    fn zero(&self) -> Count {
        0
    }
    fn one(&self) -> Count {
        1
    }
    fn plus(&self, a: &Count, b: &Count) -> Count {
        a + b
    }
    fn times(&self, a: &Count, b: &Count) -> Count {
        a * b
    }
}

/// `(Z ∪ {-inf}, max, +, -inf, 0)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxTropical;

impl Semiring for MaxTropical {
    type Elem = Ext<i64>;
    fn zero(&self) -> Ext<i64> {
        Ext::NegInf
    }
    fn one(&self) -> Ext<i64> {
        Ext::Fin(0)
    }
    fn plus(&self, a: &Ext<i64>, b: &Ext<i64>) -> Ext<i64> {
        *a.max(b)
    }
    fn times(&self, a: &Ext<i64>, b: &Ext<i64>) -> Ext<i64> {
        match (a, b) {
            (Ext::NegInf, _) | (_, Ext::NegInf) => Ext::NegInf,
            (Ext::PosInf, _) | (_, Ext::PosInf) => Ext::PosInf,
            (Ext::Fin(x), Ext::Fin(y)) => Ext::Fin(x.saturating_add(*y)),
        }
    }
}

/// `(values ∪ {±inf}, max, min, -inf, +inf)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxMin;

impl Semiring for MaxMin {
    type Elem = Ext<TaggedValue>;
    fn zero(&self) -> Self::Elem {
        Ext::NegInf
    }
    fn one(&self) -> Self::Elem {
        Ext::PosInf
    }
    fn plus(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        *a.max(b)
    }
    fn times(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        *a.min(b)
    }
}

/// `agg` per node per row, plus the number of row visits spent.
#[derive(Clone, Debug)]
pub struct AggAnnotation<E> {
    pub values: Vec<Vec<E>>,
    pub steps: u64,
}

impl<E> AggAnnotation<E> {
    pub fn at(&self, node: usize, row: usize) -> &E {
        &self.values[node][row]
    }
}

/// Children-to-parent messages: each child's rows are folded with `plus` per
/// join bucket, and a parent row multiplies its own value with the bucket
/// message of every child (`zero` if the bucket is missing).
pub fn aggregate_bottom_up<S: Semiring>(
    inst: &Instance,
    s: &S,
    val: impl Fn(usize, &[TaggedValue]) -> S::Elem,
) -> AggAnnotation<S::Elem> {
    let tree = &inst.tree;
    let children = tree.children_lists();
    let mut values: Vec<Vec<S::Elem>> = vec![Vec::new(); tree.len()];
    let mut steps = 0u64;
    for node in tree.postorder() {
        let rel = &inst.rels[node];
        let messages: Vec<HashMap<Key, S::Elem>> = children[node]
            .iter()
            .map(|&c| {
                let mut m: HashMap<Key, S::Elem> = HashMap::new();
                for (i, row) in inst.rels[c].rows().enumerate() {
                    steps += 1;
                    let k = key_of(row, &inst.up_key[c]);
                    let v = &values[c][i];
                    match m.get_mut(&k) {
                        Some(acc) => *acc = s.plus(acc, v),
                        None => {
                            m.insert(k, v.clone());
                        }
                    }
                }
                m
            })
            .collect();
        let mut out = Vec::with_capacity(rel.len());
        for row in rel.rows() {
            steps += 1;
            let mut acc = val(node, row);
            for (ci, &c) in children[node].iter().enumerate() {
                let k = key_of(row, &inst.parent_key[c]);
                let msg = messages[ci].get(&k).cloned().unwrap_or_else(|| s.zero());
                acc = s.times(&acc, &msg);
            }
            out.push(acc);
        }
        values[node] = out;
    }
    AggAnnotation { values, steps }
}

/// Samples the semiring axioms on all triples from `samples`.
pub fn check_laws<S: Semiring>(s: &S, samples: &[S::Elem]) -> std::result::Result<(), String> {
    let (zero, one) = (s.zero(), s.one());
    for a in samples {
        if s.plus(a, &zero) != *a {
            return Err(format!("zero is not neutral for plus on {a:?}"));
        }
        if s.times(a, &one) != *a {
            return Err(format!("one is not neutral for times on {a:?}"));
        }
        if s.times(a, &zero) != zero {
            return Err(format!("zero does not absorb {a:?}"));
        }
        for b in samples {
            if s.plus(a, b) != s.plus(b, a) || s.times(a, b) != s.times(b, a) {
                return Err(format!("not commutative on {a:?}, {b:?}"));
            }
            for c in samples {
                if s.plus(&s.plus(a, b), c) != s.plus(a, &s.plus(b, c)) {
                    return Err(format!("plus not associative on {a:?}, {b:?}, {c:?}"));
                }
                if s.times(&s.times(a, b), c) != s.times(a, &s.times(b, c)) {
                    return Err(format!("times not associative on {a:?}, {b:?}, {c:?}"));
                }
                if s.times(a, &s.plus(b, c)) != s.plus(&s.times(a, b), &s.times(a, c)) {
                    return Err(format!("times does not distribute on {a:?}, {b:?}, {c:?}"));
                }
            }
        }
    }
    Ok(())
}

fn require_full_acyclic(q: &ConjunctiveQuery, what: &str) -> Result<()> {
    if !q.is_full() {
        return Err(Error::invalid(format!("{what} needs a full query")));
    }
    if !structure::is_acyclic(q) {
        return Err(Error::Intractable {
            task: what.into(),
            reason: "the query is cyclic".into(),
        });
    }
    Ok(())
}

/// Counting over an already materialized instance.
pub fn count_instance(inst: &Instance) -> (Count, u64) {
    let agg = aggregate_bottom_up(inst, &Counting, |_, _| 1);
    (agg.values[inst.tree.root()].iter().sum(), agg.steps)
}

/// `|Q(D)|` for a full acyclic query.
pub fn count_answers(q: &ConjunctiveQuery, db: &Database) -> Result<Count> {
    require_full_acyclic(q, "counting")?;
    let (q, db) = remove_self_joins(q, db)?;
    let inst = Instance::for_query(&q, &db, None)?;
    Ok(count_instance(&inst).0)
}

/// For every row of atom `alpha`, the largest `y` over the answers of the
/// all-free query extending it; `NegInf` for dangling rows.
pub fn max_cojoined_value(
    q: &ConjunctiveQuery,
    y: Var,
    alpha: usize,
    db: &Database,
) -> Result<Vec<Ext<i64>>> {
    if alpha >= q.atoms().len() {
        return Err(Error::invalid(format!("atom index {alpha} out of range")));
    }
    let q = q.all_free();
    require_full_acyclic(&q, "max co-joined value")?;
    let (q, db) = remove_self_joins(&q, db)?;
    let inst = Instance::for_query(&q, &db, Some(alpha))?;
    let carrier = inst
        .tree
        .first_containing(y)
        .ok_or_else(|| Error::invalid("variable not in the query"))?;
    let col = inst.tree.node(carrier).vars.iter().position(|&v| v == y).unwrap();
    let agg = aggregate_bottom_up(&inst, &MaxTropical, |node, row| {
        if node == carrier {
            Ext::Fin(row[col].base)
        } else {
            Ext::Fin(0)
        }
    });
    Ok(agg.values[alpha].clone())
}

/// Per row: the maximum over subtree partial answers of the minimum over the
/// `xr` variables present in the subtree (`PosInf` when there are none).
pub fn thresholds(inst: &Instance, xr: &[Var]) -> AggAnnotation<Ext<TaggedValue>> {
    let cols: Vec<Vec<usize>> = inst
        .tree
        .nodes()
        .iter()
        .map(|n| {
            n.vars
                .iter()
                .enumerate()
                .filter(|(_, v)| xr.contains(v))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    aggregate_bottom_up(inst, &MaxMin, |node, row| own_min(row, &cols[node]))
}

pub(crate) fn own_min(row: &[TaggedValue], cols: &[usize]) -> Ext<TaggedValue> {
    cols.iter()
        .map(|&c| Ext::Fin(row[c]))
        .min()
        .unwrap_or(Ext::PosInf)
}

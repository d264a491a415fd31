//! Core data model: tagged values, relations, databases, conjunctive queries,
//! min-predicates and rankings, plus the domain rewrites the algorithms rely on
//! (self-join removal, per-variable domain disjointification, negation for MAX).

mod io;
mod parse;

pub use io::{load_database, load_database_files, load_relation, write_relation};
pub use parse::{parse_query, ParsedQuery};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// A domain value paired with the rank of the variable it was assigned to.
///
/// Ordering is lexicographic on `(base, rank)`. Rank `0` marks untagged data; a
/// disjointified database gives every variable its own rank `>= 1`, so two
/// distinct variables can never be assigned equal values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TaggedValue {
    pub base: i64,
    pub rank: u32,
}

impl TaggedValue {
    pub const fn new(base: i64, rank: u32) -> Self {
        TaggedValue { base, rank }
    }

    pub const fn untagged(base: i64) -> Self {
        TaggedValue { base, rank: 0 }
    }

    pub const fn untag(self) -> Self {
        TaggedValue::untagged(self.base)
    }
}

impl fmt::Display for TaggedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rank == 0 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}^{}", self.base, self.rank)
        }
    }
}

/// Index of a variable in its query's name table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub symbol: String,
    pub vars: Vec<Var>,
}

impl Atom {
    pub fn new(symbol: impl Into<String>, vars: Vec<Var>) -> Self {
        Atom {
            symbol: symbol.into(),
            vars,
        }
    }

    pub fn var_set(&self) -> BTreeSet<Var> {
        self.vars.iter().copied().collect()
    }

    pub fn has_repeated_var(&self) -> bool {
        let set: HashSet<Var> = self.vars.iter().copied().collect();
        set.len() != self.vars.len()
    }
}

/// `Head(free) :- atoms`.
///
/// The name table may contain variables that no atom mentions (derived
/// queries keep the numbering of their source); [`ConjunctiveQuery::variables`]
/// only reports variables that occur in the body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    head: String,
    names: Vec<String>,
    atoms: Vec<Atom>,
    free: Vec<Var>,
}

impl ConjunctiveQuery {
    pub fn new(
        head: impl Into<String>,
        names: Vec<String>,
        atoms: Vec<Atom>,
        free: Vec<Var>,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("a query needs at least one atom"));
        }
        for atom in &atoms {
            if let Some(v) = atom.vars.iter().find(|v| v.index() >= names.len()) {
                return Err(Error::invalid(format!(
                    "atom {} uses unknown variable #{}",
                    atom.symbol, v.0
                )));
            }
        }
        let body: BTreeSet<Var> = atoms.iter().flat_map(|a| a.vars.iter().copied()).collect();
        let mut seen = BTreeSet::new();
        for &v in &free {
            if v.index() >= names.len() || !body.contains(&v) {
                let name = names.get(v.index()).map(String::as_str).unwrap_or("?");
                return Err(Error::invalid(format!(
                    "free variable {name} does not occur in the body"
                )));
            }
            if !seen.insert(v) {
                return Err(Error::invalid(format!(
                    "free variable {} listed twice",
                    names[v.index()]
                )));
            }
        }
        Ok(ConjunctiveQuery {
            head: head.into(),
            names,
            atoms,
            free,
        })
    }

    /// Builds a query from variable names, e.g. `from_names("Q", &["x"], &[("R", &["x", "y"])])`.
    pub fn from_names(head: &str, free: &[&str], atoms: &[(&str, &[&str])]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let intern = |n: &str, names: &mut Vec<String>| -> Var {
            match names.iter().position(|m| m == n) {
                Some(i) => Var(i as u32),
                None => {
                    names.push(n.to_string());
                    Var((names.len() - 1) as u32)
                }
            }
        };
        let free_vars: Vec<Var> = free.iter().map(|n| intern(n, &mut names)).collect();
        let atoms = atoms
            .iter()
            .map(|(sym, vars)| Atom::new(*sym, vars.iter().map(|n| intern(n, &mut names)).collect()))
            .collect();
        ConjunctiveQuery::new(head, names, atoms, free_vars)
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v.index()]
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.names.iter().position(|n| n == name).map(|i| Var(i as u32))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn free(&self) -> &[Var] {
        &self.free
    }

    pub fn free_set(&self) -> BTreeSet<Var> {
        self.free.iter().copied().collect()
    }

    /// Variables occurring in the body, in index order.
    pub fn variables(&self) -> Vec<Var> {
        let set: BTreeSet<Var> = self.atoms.iter().flat_map(|a| a.vars.iter().copied()).collect();
        set.into_iter().collect()
    }

    pub fn existential(&self) -> Vec<Var> {
        let free = self.free_set();
        self.variables().into_iter().filter(|v| !free.contains(v)).collect()
    }

    pub fn is_free(&self, v: Var) -> bool {
        self.free.contains(&v)
    }

    pub fn is_full(&self) -> bool {
        self.free.len() == self.variables().len()
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    pub fn is_self_join_free(&self) -> bool {
        let mut seen = HashSet::new();
        self.atoms.iter().all(|a| seen.insert(a.symbol.as_str()))
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        self.atoms.iter().map(|a| a.symbol.clone()).collect()
    }

    /// A copy with every body variable free.
    pub fn all_free(&self) -> ConjunctiveQuery {
        ConjunctiveQuery {
            free: self.variables(),
            ..self.clone()
        }
    }

    pub fn with_free(&self, free: Vec<Var>) -> Result<ConjunctiveQuery> {
        ConjunctiveQuery::new(self.head.clone(), self.names.clone(), self.atoms.clone(), free)
    }

    pub fn display_vars(&self, vars: &[Var]) -> String {
        vars.iter().map(|v| self.name(*v)).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :- ", self.head, self.display_vars(&self.free))?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}({})", atom.symbol, self.display_vars(&atom.vars))?;
        }
        write!(f, ".")
    }
}

/// `x0 <= MIN(set)`, or `x0 < MIN(set)` when `strict` (then `x0` is not in `set`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinPredicate {
    pub x0: Var,
    pub set: Vec<Var>,
    pub strict: bool,
}

impl MinPredicate {
    pub fn new(x0: Var, set: Vec<Var>, strict: bool) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::invalid("MIN() needs at least one variable"));
        }
        if strict && set.contains(&x0) {
            return Err(Error::invalid(
                "a strict predicate x < MIN(X) requires x to be outside X",
            ));
        }
        Ok(MinPredicate { x0, set, strict })
    }

    /// The members of `set` that actually constrain `x0`.
    pub fn others(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for &v in &self.set {
            if v != self.x0 && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn is_vacuous(&self) -> bool {
        self.others().is_empty()
    }

    pub fn holds(&self, x0: TaggedValue, other: TaggedValue) -> bool {
        if self.strict {
            x0 < other
        } else {
            x0 <= other
        }
    }

    pub fn display(&self, q: &ConjunctiveQuery) -> String {
        format!(
            "{} {} MIN({})",
            q.name(self.x0),
            if self.strict { "<" } else { "<=" },
            q.display_vars(&self.set)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    Min,
    Max,
}

/// `ORDER BY MIN(vars)` or `ORDER BY MAX(vars)`.
///
/// MAX is evaluated by negating every base value, ranking by MIN, and negating
/// back on output, so MAX answers come out in non-increasing `max` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    pub direction: Direction,
    pub vars: Vec<Var>,
}

impl Ranking {
    pub fn min(vars: Vec<Var>) -> Self {
        Ranking {
            direction: Direction::Min,
            vars,
        }
    }

    pub fn display(&self, q: &ConjunctiveQuery) -> String {
        let dir = match self.direction {
            Direction::Min => "MIN",
            Direction::Max => "MAX",
        };
        format!("{dir}({})", q.display_vars(&self.vars))
    }
}

/// A finite set of rows of equal arity, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    symbol: String,
    arity: usize,
    data: Vec<TaggedValue>,
    len: usize,
}

impl Relation {
    pub fn new(symbol: impl Into<String>, arity: usize) -> Self {
        Relation {
            symbol: symbol.into(),
            arity,
            data: Vec::new(),
            len: 0,
        }
    }

    /// Builds a deduplicated relation from untagged integer rows.
    pub fn from_ints(symbol: &str, arity: usize, rows: &[&[i64]]) -> Result<Self> {
        let mut rel = Relation::new(symbol, arity);
        for row in rows {
            let row: Vec<TaggedValue> = row.iter().map(|&b| TaggedValue::untagged(b)).collect();
            rel.push(&row)?;
        }
        rel.dedup();
        Ok(rel)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn renamed(&self, symbol: impl Into<String>) -> Relation {
        Relation {
            symbol: symbol.into(),
            ..self.clone()
        }
    }

    pub fn push(&mut self, row: &[TaggedValue]) -> Result<()> {
        if row.len() != self.arity {
            return Err(Error::data(format!(
                "relation {} has arity {} but a row has {} cells",
                self.symbol,
                self.arity,
                row.len()
            )));
        }
        self.data.extend_from_slice(row);
        self.len += 1;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[TaggedValue] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[TaggedValue]> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    /// Sorts rows and removes duplicates (set semantics).
    pub fn dedup(&mut self) {
        if self.arity == 0 {
            self.len = self.len.min(1);
            return;
        }
        let mut rows: Vec<&[TaggedValue]> = self.data.chunks_exact(self.arity).collect();
        rows.sort_unstable();
        rows.dedup();
        let data: Vec<TaggedValue> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        self.len = data.len() / self.arity;
        self.data = data;
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&[TaggedValue]) -> bool) {
        let arity = self.arity;
        let mut data = Vec::with_capacity(self.data.len());
        let mut len = 0;
        for i in 0..self.len {
            let row = &self.data[i * arity..(i + 1) * arity];
            if keep(row) {
                data.extend_from_slice(row);
                len += 1;
            }
        }
        self.data = data;
        self.len = len;
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, TaggedValue) -> TaggedValue) -> Relation {
        let arity = self.arity.max(1);
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % arity, v))
            .collect();
        Relation {
            symbol: self.symbol.clone(),
            arity: self.arity,
            data,
            len: self.len,
        }
    }

    /// Projection onto the given column positions, deduplicated.
    pub fn project(&self, symbol: &str, columns: &[usize]) -> Relation {
        let mut out = Relation::new(symbol, columns.len());
        let mut row = Vec::with_capacity(columns.len());
        for r in self.rows() {
            row.clear();
            row.extend(columns.iter().map(|&c| r[c]));
            out.data.extend_from_slice(&row);
            out.len += 1;
        }
        out.dedup();
        out
    }
}

/// One relation per symbol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert(&mut self, rel: Relation) -> Result<()> {
        if self.relations.contains_key(rel.symbol()) {
            return Err(Error::data(format!(
                "relation {} is bound twice",
                rel.symbol()
            )));
        }
        self.relations.insert(rel.symbol().to_string(), rel);
        Ok(())
    }

    pub fn replace(&mut self, rel: Relation) {
        self.relations.insert(rel.symbol().to_string(), rel);
    }

    pub fn get(&self, symbol: &str) -> Option<&Relation> {
        self.relations.get(symbol)
    }

    pub fn relation(&self, symbol: &str) -> Result<&Relation> {
        self.relations
            .get(symbol)
            .ok_or_else(|| Error::data(format!("no relation bound to symbol {symbol}")))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    /// Total tuple count `|D|`.
    pub fn size(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    /// Base values with every rank reset to 0.
    pub fn untagged(&self) -> Database {
        Database {
            relations: self
                .relations
                .iter()
                .map(|(k, r)| (k.clone(), r.map_values(|_, v| v.untag())))
                .collect(),
        }
    }

    /// Negates every base value; used to evaluate MAX as MIN.
    pub fn negated(&self) -> Result<Database> {
        let mut overflow = false;
        let relations = self
            .relations
            .iter()
            .map(|(k, r)| {
                let rel = r.map_values(|_, v| match v.base.checked_neg() {
                    Some(b) => TaggedValue::new(b, v.rank),
                    None => {
                        overflow = true;
                        v
                    }
                });
                (k.clone(), rel)
            })
            .collect();
        if overflow {
            return Err(Error::data("value i64::MIN cannot be negated for a MAX ranking"));
        }
        Ok(Database { relations })
    }

    /// Checks that every atom of `q` has a relation of matching arity.
    pub fn check_schema(&self, q: &ConjunctiveQuery) -> Result<()> {
        for atom in q.atoms() {
            let rel = self.relation(&atom.symbol)?;
            if rel.arity() != atom.vars.len() {
                return Err(Error::data(format!(
                    "relation {} has arity {} but the query uses it with {} arguments",
                    atom.symbol,
                    rel.arity(),
                    atom.vars.len()
                )));
            }
        }
        Ok(())
    }
}

/// One query answer: values aligned with the free variables of the query it answers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Answer {
    pub values: Vec<TaggedValue>,
}

impl Answer {
    pub fn new(values: Vec<TaggedValue>) -> Self {
        Answer { values }
    }

    pub fn untagged(&self) -> Vec<i64> {
        self.values.iter().map(|v| v.base).collect()
    }
}

/// Picks a symbol starting with `base` that is not in `taken`, and reserves it.
pub(crate) fn fresh_symbol(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut candidate = base.to_string();
    let mut k = 1;
    while taken.contains(&candidate) {
        k += 1;
        candidate = format!("{base}_{k}");
    }
    taken.insert(candidate.clone());
    candidate
}

/// Appends a variable named after `base` that does not clash with existing names.
pub(crate) fn fresh_var(names: &mut Vec<String>, base: &str) -> Var {
    let mut candidate = base.to_string();
    let mut k = 1;
    while names.iter().any(|n| n == &candidate) {
        k += 1;
        candidate = format!("{base}_{k}");
    }
    names.push(candidate);
    Var((names.len() - 1) as u32)
}

/// Gives every atom its own relation symbol.
///
/// Repeated symbols become `Sym_1, Sym_2, ...` over copies of the relation.
/// An atom that repeats a variable, e.g. `R(x,x)`, is also given a fresh
/// symbol over the rows agreeing on the repeated columns, projected to one
/// column per distinct variable; after this every column maps to exactly one
/// variable. A query that is already self-join-free with no repeated
/// variables comes back unchanged.
pub fn remove_self_joins(
    q: &ConjunctiveQuery,
    db: &Database,
) -> Result<(ConjunctiveQuery, Database)> {
    let repeated_var = q.atoms().iter().any(Atom::has_repeated_var);
    if q.is_self_join_free() && !repeated_var {
        return Ok((q.clone(), db.clone()));
    }
    db.check_schema(q)?;
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    for atom in q.atoms() {
        *occurrences.entry(atom.symbol.as_str()).or_default() += 1;
    }
    let mut taken: BTreeSet<String> = db.symbols().map(str::to_string).collect();
    taken.extend(q.symbols());
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out_db = db.clone();
    let mut atoms = Vec::with_capacity(q.atoms().len());
    for atom in q.atoms() {
        let count = occurrences[atom.symbol.as_str()];
        if count == 1 && !atom.has_repeated_var() {
            atoms.push(atom.clone());
            continue;
        }
        let k = seen.entry(atom.symbol.as_str()).or_default();
        *k += 1;
        let base = if count > 1 {
            format!("{}_{}", atom.symbol, k)
        } else {
            format!("{}_d", atom.symbol)
        };
        let symbol = fresh_symbol(&base, &mut taken);
        let source = db.relation(&atom.symbol)?;
        let mut distinct: Vec<Var> = Vec::new();
        let mut first_col: Vec<usize> = Vec::new();
        for (i, v) in atom.vars.iter().enumerate() {
            if !distinct.contains(v) {
                distinct.push(*v);
                first_col.push(i);
            }
        }
        let mut filtered = source.clone();
        filtered.retain(|row| {
            atom.vars.iter().enumerate().all(|(i, v)| {
                let j = first_col[distinct.iter().position(|d| d == v).unwrap()];
                row[i] == row[j]
            })
        });
        let rel = filtered.project(&symbol, &first_col);
        out_db.replace(rel);
        atoms.push(Atom::new(symbol, distinct));
    }
    let out_q = ConjunctiveQuery::new(q.head(), q.names().to_vec(), atoms, q.free().to_vec())?;
    Ok((out_q, out_db))
}

/// Rank order used to disjointify for `p`: `x0` first for `<=` (ties satisfy
/// the predicate), last for `<` (ties violate it); everything else in
/// declaration order.
pub fn predicate_rank_order(q: &ConjunctiveQuery, p: &MinPredicate) -> Vec<Var> {
    let rest = q.variables().into_iter().filter(|&v| v != p.x0);
    if p.strict {
        rest.chain(std::iter::once(p.x0)).collect()
    } else {
        std::iter::once(p.x0).chain(rest).collect()
    }
}

/// Tags every cell with the rank of its column's variable.
///
/// Rank `i + 1` goes to `rank_order[i]`; variables missing from `rank_order`
/// follow in declaration order. Relations not used by `q` are copied as is.
pub fn disjointify(db: &Database, q: &ConjunctiveQuery, rank_order: &[Var]) -> Result<Database> {
    if !q.is_self_join_free() {
        return Err(Error::invalid(
            "disjointify needs a self-join-free query; call remove_self_joins first",
        ));
    }
    db.check_schema(q)?;
    let ranks = rank_table(q, rank_order);
    let mut out = db.clone();
    for atom in q.atoms() {
        let rel = db.relation(&atom.symbol)?;
        let tagged = rel.map_values(|col, v| TaggedValue::new(v.base, ranks[atom.vars[col].index()]));
        out.replace(tagged);
    }
    Ok(out)
}

/// Rank per variable index (0 for variables not in the body).
pub(crate) fn rank_table(q: &ConjunctiveQuery, rank_order: &[Var]) -> Vec<u32> {
    let mut ranks = vec![0u32; q.names().len()];
    let mut next = 1u32;
    for &v in rank_order.iter().chain(q.variables().iter()) {
        if v.index() < ranks.len() && ranks[v.index()] == 0 {
            ranks[v.index()] = next;
            next += 1;
        }
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_branch() -> (ConjunctiveQuery, Database) {
        let q = ConjunctiveQuery::from_names(
            "Q",
            &["x0", "x1", "x2", "y"],
            &[("R0", &["x0"]), ("R1", &["x1", "y"]), ("R2", &["x2", "y"])],
        )
        .unwrap();
        let mut db = Database::new();
        db.insert(Relation::from_ints("R0", 1, &[&[1], &[2]]).unwrap()).unwrap();
        db.insert(Relation::from_ints("R1", 2, &[&[1, 0], &[2, 0]]).unwrap()).unwrap();
        db.insert(Relation::from_ints("R2", 2, &[&[2, 0], &[3, 0]]).unwrap()).unwrap();
        (q, db)
    }

    #[test]
    fn tagged_order_is_lexicographic() {
        assert!(TaggedValue::new(1, 9) < TaggedValue::new(2, 0));
        assert!(TaggedValue::new(2, 1) < TaggedValue::new(2, 3));
        assert_ne!(TaggedValue::new(2, 1), TaggedValue::untagged(2));
    }

    #[test]
    fn relation_dedups_rows() {
        let rel = Relation::from_ints("R", 2, &[&[1, 0], &[1, 0], &[0, 5]]).unwrap();
        assert_eq!(rel.len(), 2);
        assert_eq!(rel.row(0), &[TaggedValue::untagged(0), TaggedValue::untagged(5)]);
    }

    #[test]
    fn relation_rejects_wrong_arity() {
        let mut rel = Relation::new("R", 2);
        assert!(rel.push(&[TaggedValue::untagged(1)]).is_err());
    }

    #[test]
    fn query_rejects_unbound_head_variable() {
        assert!(ConjunctiveQuery::from_names("Q", &["x"], &[("R", &["y"])]).is_err());
    }

    #[test]
    fn fullness_and_self_joins() {
        let (q, _) = two_branch();
        assert!(q.is_full());
        assert!(q.is_self_join_free());
        let p = ConjunctiveQuery::from_names("Q", &["x"], &[("R", &["x", "y"]), ("R", &["y", "x"])])
            .unwrap();
        assert!(!p.is_full());
        assert!(!p.is_self_join_free());
        assert_eq!(p.existential(), vec![p.var("y").unwrap()]);
    }

    #[test]
    fn self_join_removal_renames_occurrences() {
        let q = ConjunctiveQuery::from_names(
            "Q",
            &["x1", "x2", "y"],
            &[("R", &["x1", "y"]), ("R", &["x2", "y"])],
        )
        .unwrap();
        let mut db = Database::new();
        db.insert(Relation::from_ints("R", 2, &[&[1, 0], &[2, 0]]).unwrap()).unwrap();
        let (q2, db2) = remove_self_joins(&q, &db).unwrap();
        assert!(q2.is_self_join_free());
        let syms: Vec<&str> = q2.atoms().iter().map(|a| a.symbol.as_str()).collect();
        assert_eq!(syms, vec!["R_1", "R_2"]);
        assert_eq!(db2.relation("R_1").unwrap().len(), 2);
        assert_eq!(db2.relation("R_2").unwrap().len(), 2);
    }

    #[test]
    fn self_join_removal_is_identity_on_sjf() {
        let (q, db) = two_branch();
        let (q2, db2) = remove_self_joins(&q, &db).unwrap();
        assert_eq!(q, q2);
        assert_eq!(db, db2);
    }

    #[test]
    fn repeated_variable_collapses_columns() {
        let q = ConjunctiveQuery::from_names("Q", &["x"], &[("R", &["x", "x"])]).unwrap();
        let mut db = Database::new();
        db.insert(Relation::from_ints("R", 2, &[&[1, 1], &[1, 2], &[3, 3]]).unwrap()).unwrap();
        let (q2, db2) = remove_self_joins(&q, &db).unwrap();
        let atom = &q2.atoms()[0];
        assert_eq!(atom.vars.len(), 1);
        assert_eq!(db2.relation(&atom.symbol).unwrap().len(), 2);
    }

    #[test]
    fn disjointify_tags_columns() {
        let (q, db) = two_branch();
        let p = MinPredicate::new(q.var("x0").unwrap(), vec![q.var("x1").unwrap(), q.var("x2").unwrap()], false)
            .unwrap();
        let order = predicate_rank_order(&q, &p);
        let tagged = disjointify(&db, &q, &order).unwrap();
        // x0 gets rank 1; then x1, x2, y in declaration order.
        let r1 = tagged.relation("R1").unwrap();
        assert_eq!(r1.row(0), &[TaggedValue::new(1, 2), TaggedValue::new(0, 4)]);
        assert_eq!(tagged.relation("R0").unwrap().row(0)[0], TaggedValue::new(1, 1));
        assert_eq!(tagged.untagged(), db);

        let strict = MinPredicate::new(p.x0, p.set.clone(), true).unwrap();
        let order = predicate_rank_order(&q, &strict);
        assert_eq!(*order.last().unwrap(), p.x0);
    }

    #[test]
    fn strict_predicate_excludes_x0_from_set() {
        assert!(MinPredicate::new(Var(0), vec![Var(0), Var(1)], true).is_err());
        assert!(MinPredicate::new(Var(0), vec![], false).is_err());
        let p = MinPredicate::new(Var(0), vec![Var(0), Var(1)], false).unwrap();
        assert_eq!(p.others(), vec![Var(1)]);
    }

    #[test]
    fn negation_round_trips() {
        let (_, db) = two_branch();
        assert_eq!(db.negated().unwrap().negated().unwrap(), db);
    }
}

//! Join trees with data attached: one relation per node, semijoin reduction,
//! and join buckets (rows of a child grouped by the variables it shares with
//! its parent).

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::qmodel::{ConjunctiveQuery, Database, Relation, TaggedValue, Var};
use crate::structure::{self, JoinTree};

pub type Key = Vec<TaggedValue>;

/// A rooted join tree whose node `i` holds `rels[i]`, columns aligned with `tree.node(i).vars`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub tree: JoinTree,
    pub rels: Vec<Relation>,
    /// Per node: positions (in the node's own columns) of the variables shared with the parent.
    pub up_key: Vec<Vec<usize>>,
    /// Per node: positions of the same variables in the parent's columns.
    pub parent_key: Vec<Vec<usize>>,
}

pub(crate) fn positions(vars: &[Var], wanted: &[Var]) -> Vec<usize> {
    wanted
        .iter()
        .map(|w| vars.iter().position(|v| v == w).expect("variable present"))
        .collect()
}

#[inline]
pub(crate) fn key_of(row: &[TaggedValue], pos: &[usize]) -> Key {
    pos.iter().map(|&p| row[p]).collect()
}

impl Instance {
    /// Materializes every node from the query's atoms; relaxed nodes become projections.
    pub fn new(q: &ConjunctiveQuery, db: &Database, tree: JoinTree) -> Result<Self> {
        let mut rels = Vec::with_capacity(tree.len());
        for node in tree.nodes() {
            let a = node
                .atom
                .ok_or_else(|| Error::invalid("join-tree node without a materialized relation"))?;
            let atom = &q.atoms()[a];
            if atom.has_repeated_var() {
                return Err(Error::invalid(format!(
                    "atom {} repeats a variable; call remove_self_joins first",
                    atom.symbol
                )));
            }
            let rel = db.relation(&atom.symbol)?;
            if rel.arity() != atom.vars.len() {
                return Err(Error::data(format!(
                    "relation {} has arity {} but is used with {} arguments",
                    atom.symbol,
                    rel.arity(),
                    atom.vars.len()
                )));
            }
            if node.vars == atom.vars {
                rels.push(rel.clone());
            } else {
                let cols = positions(&atom.vars, &node.vars);
                rels.push(rel.project(rel.symbol(), &cols));
            }
        }
        Ok(Instance::from_parts(tree, rels))
    }

    pub fn from_parts(tree: JoinTree, rels: Vec<Relation>) -> Self {
        let mut up_key = vec![Vec::new(); tree.len()];
        let mut parent_key = vec![Vec::new(); tree.len()];
        for c in 0..tree.len() {
            if let Some(p) = tree.parent(c) {
                let shared = tree.node(c).shared(tree.node(p));
                up_key[c] = positions(&tree.node(c).vars, &shared);
                parent_key[c] = positions(&tree.node(p).vars, &shared);
            }
        }
        Instance {
            tree,
            rels,
            up_key,
            parent_key,
        }
    }

    /// A full self-join-free query over its GYO join tree rerooted at `root` (default: node 0).
    pub fn for_query(q: &ConjunctiveQuery, db: &Database, root: Option<usize>) -> Result<Self> {
        let tree = structure::query_join_tree(q).ok_or_else(|| Error::Intractable {
            task: "evaluation".into(),
            reason: "the query is cyclic".into(),
        })?;
        let tree = tree.rerooted(root.unwrap_or(0));
        Instance::new(q, db, tree)
    }

    pub fn size(&self) -> usize {
        self.rels.iter().map(Relation::len).sum()
    }

    /// Yannakakis: bottom-up then top-down semijoins. Returns the number of row visits.
    pub fn reduce(&mut self) -> u64 {
        let mut steps = 0u64;
        for c in self.tree.postorder() {
            let Some(p) = self.tree.parent(c) else { continue };
            let keys: HashSet<Key> = self.rels[c].rows().map(|r| key_of(r, &self.up_key[c])).collect();
            steps += self.rels[c].len() as u64 + self.rels[p].len() as u64;
            let pk = &self.parent_key[c];
            self.rels[p].retain(|r| keys.contains(&key_of(r, pk)));
        }
        for c in self.tree.preorder() {
            let Some(p) = self.tree.parent(c) else { continue };
            let keys: HashSet<Key> = self.rels[p].rows().map(|r| key_of(r, &self.parent_key[c])).collect();
            steps += self.rels[c].len() as u64 + self.rels[p].len() as u64;
            let uk = &self.up_key[c];
            self.rels[c].retain(|r| keys.contains(&key_of(r, uk)));
        }
        steps
    }

    pub fn is_empty(&self) -> bool {
        self.rels.iter().any(Relation::is_empty)
    }

    /// Groups rows into join buckets. Within a bucket (and at the root) rows
    /// follow `cmp`, then row index.
    pub fn index_by(&self, cmp: impl Fn(usize, usize, usize) -> Ordering) -> Buckets {
        let n = self.tree.len();
        let mut order = Vec::with_capacity(n);
        let mut ranges = Vec::with_capacity(n);
        for node in 0..n {
            let rel = &self.rels[node];
            let mut rows: Vec<u32> = (0..rel.len() as u32).collect();
            let uk = &self.up_key[node];
            rows.sort_by(|&a, &b| {
                let (ra, rb) = (rel.row(a as usize), rel.row(b as usize));
                uk.iter()
                    .map(|&p| ra[p].cmp(&rb[p]))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| cmp(node, a as usize, b as usize))
                    .then(a.cmp(&b))
            });
            let mut map: HashMap<Key, (u32, u32)> = HashMap::new();
            if self.tree.parent(node).is_some() {
                let mut start = 0usize;
                while start < rows.len() {
                    let key = key_of(rel.row(rows[start] as usize), uk);
                    let mut end = start + 1;
                    while end < rows.len() && key_of(rel.row(rows[end] as usize), uk) == key {
                        end += 1;
                    }
                    map.insert(key, (start as u32, end as u32));
                    start = end;
                }
            }
            order.push(rows);
            ranges.push(map);
        }
        Buckets {
            order,
            ranges,
            children: self.tree.children_lists(),
        }
    }
}

/// Join buckets over an [`Instance`].
#[derive(Clone, Debug)]
pub struct Buckets {
    /// Per node: row indices grouped by parent key (root: all rows).
    pub order: Vec<Vec<u32>>,
    /// Per non-root node: parent key -> half-open range into `order[node]`.
    pub ranges: Vec<HashMap<Key, (u32, u32)>>,
    pub children: Vec<Vec<usize>>,
}

impl Buckets {
    /// The bucket of `child` matching the parent row `prow`; empty if none.
    pub fn bucket(&self, inst: &Instance, child: usize, prow: &[TaggedValue]) -> (u32, u32) {
        let key = key_of(prow, &inst.parent_key[child]);
        self.ranges[child].get(&key).copied().unwrap_or((0, 0))
    }
}

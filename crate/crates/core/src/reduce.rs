//! Semijoin reduction, projection of free-connex queries onto their free
//! variables, and pushing a min-predicate through that projection.
//!
//! The projection works on a join tree of the query hypergraph plus one extra
//! edge holding the free variables, rooted at that edge. Each child subtree
//! touches the rest of the query only through its separator (child atom ∩
//! free variables), so everything existential about it can be summarized per
//! separator value: which values survive, and for the predicate, the best
//! achievable `min` over its existential predicate variables.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::instance::{key_of, positions, Instance, Key};
use crate::qmodel::{
    fresh_symbol, fresh_var, remove_self_joins, Atom, ConjunctiveQuery, Database, MinPredicate, Relation,
    TaggedValue, Var,
};
use crate::semiring::{max_cojoined_value, own_min, thresholds, Ext};
use crate::structure::{gyo, Hypergraph, JoinTree};

/// Yannakakis reduction of the atoms of `q` along `tree` (node `i` must link to its atom).
pub fn semijoin_reduce(q: &ConjunctiveQuery, db: &Database, tree: &JoinTree) -> Result<Database> {
    if !q.is_self_join_free() {
        return Err(Error::invalid("semijoin_reduce needs a self-join-free query"));
    }
    let mut inst = Instance::new(q, db, tree.clone())?;
    inst.reduce();
    let mut out = db.clone();
    for (i, node) in inst.tree.nodes().iter().enumerate() {
        let a = node.atom.expect("materialized");
        if !node.relaxed && node.vars == q.atoms()[a].vars {
            out.replace(inst.rels[i].clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Action {
    /// Nothing existential to summarize.
    Project,
    /// `x0` is in the separator: keep separator values whose best `min(ys)` admits `x0`.
    Filter { ys: Vec<Var> },
    /// New column carrying the best `min(ys)` per separator value.
    Virtual { ys: Vec<Var>, var: Var },
    /// `x0` is existential here: new column with the smallest feasible `x0`
    /// (`None` when nothing else constrains it, then only feasibility is kept).
    LowestX0 { ys: Vec<Var>, z: Option<Var> },
}

#[derive(Clone, Debug)]
struct Subtree {
    /// Child node of the free-variable node; also its atom index.
    child: usize,
    sep: Vec<Var>,
    action: Action,
}

/// The data-independent part of restricting a query (and predicate) to its free variables.
#[derive(Clone, Debug)]
pub struct RestrictionPlan {
    /// Full, acyclic; atom `i` restricts original atom `i`.
    pub query: ConjunctiveQuery,
    /// Residual predicate; `None` stands for `True`.
    pub predicate: Option<MinPredicate>,
    /// Variables added by the restriction (functions of their separator).
    pub virtual_vars: Vec<Var>,
    tplus: JoinTree,
    subtrees: Vec<Subtree>,
    x0: Option<Var>,
    strict: bool,
}

pub(crate) fn holds(strict: bool, a: TaggedValue, bound: Ext<TaggedValue>) -> bool {
    if strict {
        Ext::Fin(a) < bound
    } else {
        Ext::Fin(a) <= bound
    }
}

fn dedup_vars(vars: &[Var]) -> Vec<Var> {
    let mut out = Vec::new();
    for &v in vars {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Join tree of the query plus a free-variable node, rooted at that node
/// (index `atoms.len()`, no atom link). Node vars follow atom column order.
pub(crate) fn free_rooted_tree(q: &ConjunctiveQuery) -> Result<JoinTree> {
    let h = Hypergraph::of_query(q);
    if let Err(core) = gyo(&h) {
        let names: Vec<String> = core.iter().map(|&i| q.atoms()[i].symbol.clone()).collect();
        return Err(Error::Intractable {
            task: "evaluation".into(),
            reason: format!("the query is cyclic (core atoms {})", names.join(", ")),
        });
    }
    let n = q.atoms().len();
    let mut t = gyo(&h.with_edge(q.free_set())).map_err(|_| Error::Intractable {
        task: "evaluation".into(),
        reason: "the query is not free-connex".into(),
    })?;
    for (i, atom) in q.atoms().iter().enumerate() {
        t.set_vars(i, dedup_vars(&atom.vars));
    }
    t.set_vars(n, q.free().to_vec());
    t.set_atom(n, None);
    Ok(t.rerooted(n))
}

/// Plans the restriction of `q` (acyclic, free-connex) and `p` to the free variables.
pub fn restriction_plan(q: &ConjunctiveQuery, p: Option<&MinPredicate>) -> Result<RestrictionPlan> {
    let tplus = free_rooted_tree(q)?;
    let froot = tplus.root();
    let free = q.free_set();
    let p = p.filter(|p| !p.is_vacuous());
    let mut names = q.names().to_vec();
    let mut virtual_vars = Vec::new();
    let mut subtrees = Vec::new();

    let x0 = p.map(|p| p.x0);
    let others: Vec<Var> = p.map(|p| p.others()).unwrap_or_default();
    let x0_free = x0.is_some_and(|x| free.contains(&x));
    let mut residual: Vec<Var> = others.iter().copied().filter(|v| free.contains(v)).collect();
    let mut new_x0 = x0.filter(|_| x0_free);

    for c in tplus.children(froot) {
        let sep: Vec<Var> = tplus.node(c).vars.iter().copied().filter(|v| free.contains(v)).collect();
        let svars = tplus.subtree_variables(c);
        let ys: Vec<Var> = others
            .iter()
            .copied()
            .filter(|v| svars.contains(v) && !free.contains(v))
            .collect();
        let holds_x0 = x0.is_some_and(|x| !x0_free && svars.contains(&x));
        let symbol = &q.atoms()[c].symbol;
        let action = if holds_x0 {
            let x = x0.unwrap();
            let local: Vec<Var> = others.iter().copied().filter(|v| svars.contains(v)).collect();
            residual.retain(|v| !sep.contains(v));
            Action::LowestX0 { ys: local, z: Some(x) }
        } else if ys.is_empty() {
            Action::Project
        } else if x0_free && sep.contains(&x0.unwrap()) {
            Action::Filter { ys }
        } else {
            let var = fresh_var(&mut names, &format!("thr_{symbol}"));
            virtual_vars.push(var);
            Action::Virtual { ys, var }
        };
        subtrees.push(Subtree { child: c, sep, action });
    }
    residual.extend(virtual_vars.iter().copied());

    // The lowest-x0 column only matters if something is left to compare it with.
    if let Some(x0v) = x0.filter(|_| !x0_free) {
        for st in &mut subtrees {
            if let Action::LowestX0 { z, .. } = &mut st.action {
                if residual.is_empty() {
                    *z = None;
                } else {
                    let name = format!("low_{}", q.name(x0v));
                    let zv = fresh_var(&mut names, &name);
                    virtual_vars.push(zv);
                    *z = Some(zv);
                    new_x0 = Some(zv);
                }
            }
        }
    }

    let mut taken: BTreeSet<String> = q.symbols();
    let mut atoms: Vec<Atom> = q
        .atoms()
        .iter()
        .map(|a| {
            let vars = dedup_vars(&a.vars).into_iter().filter(|v| free.contains(v)).collect();
            Atom::new(fresh_symbol(&format!("{}_r", a.symbol), &mut taken), vars)
        })
        .collect();
    for st in &subtrees {
        match &st.action {
            Action::Virtual { var, .. } | Action::LowestX0 { z: Some(var), .. } => {
                atoms[st.child].vars = st.sep.clone();
                atoms[st.child].vars.push(*var);
            }
            _ => atoms[st.child].vars = st.sep.clone(),
        }
    }
    let mut head_vars = q.free().to_vec();
    head_vars.extend(virtual_vars.iter().copied());
    let query = ConjunctiveQuery::new(q.head(), names, atoms, head_vars)?;

    let predicate = match (new_x0, residual.is_empty()) {
        (Some(x), false) => Some(MinPredicate::new(x, residual, p.unwrap().strict)?),
        _ => None,
    };
    Ok(RestrictionPlan {
        query,
        predicate,
        virtual_vars,
        tplus,
        subtrees,
        x0,
        strict: p.is_some_and(|p| p.strict),
    })
}

/// `(Q ∧ P)(D)` rewritten as `(Q' ∧ P')(D')` with `Q'` full.
#[derive(Clone, Debug)]
pub struct Restricted {
    pub query: ConjunctiveQuery,
    pub predicate: Option<MinPredicate>,
    pub db: Database,
    /// Variables not in the original query; drop them to project answers back.
    pub virtual_vars: Vec<Var>,
}

/// Projection of a free-connex query to its free variables (no predicate).
pub fn restrict_to_free(q: &ConjunctiveQuery, db: &Database) -> Result<Restricted> {
    restrict_predicate_to_free(q, None, db)
}

/// Restricts `q ∧ p` to a full query over the free variables plus virtual
/// columns, with a residual predicate over free and virtual variables.
pub fn restrict_predicate_to_free(
    q: &ConjunctiveQuery,
    p: Option<&MinPredicate>,
    db: &Database,
) -> Result<Restricted> {
    db.check_schema(q)?;
    let plan = restriction_plan(q, p)?;
    let (q1, db1) = remove_self_joins(q, db)?;
    let mut out = Database::new();
    for st in &plan.subtrees {
        let sub = plan.tplus.subtree(st.child);
        let mut inst = Instance::new(&q1, &db1, sub)?;
        inst.reduce();
        for (local, node) in inst.tree.nodes().iter().enumerate() {
            let a = node.atom.expect("atom node");
            if a == st.child {
                continue;
            }
            let target = &plan.query.atoms()[a];
            let cols = positions(&node.vars, &target.vars);
            out.insert(inst.rels[local].project(&target.symbol, &cols))?;
        }
        let root = inst.tree.root();
        let target = &plan.query.atoms()[st.child];
        let sep_pos = positions(&inst.tree.node(root).vars, &st.sep);
        let rel = match &st.action {
            Action::Project => inst.rels[root].project(&target.symbol, &sep_pos),
            Action::Filter { ys } => {
                let best = best_min_per_sep(&inst, ys, &sep_pos);
                let x0_pos = st.sep.iter().position(|&v| Some(v) == plan.x0).unwrap();
                summary_relation(&target.symbol, st.sep.len(), &best, |k, m| {
                    holds(plan.strict, k[x0_pos], m).then_some(None)
                })
            }
            Action::Virtual { ys, .. } => {
                let best = best_min_per_sep(&inst, ys, &sep_pos);
                summary_relation(&target.symbol, st.sep.len() + 1, &best, |_, m| m.finite().map(Some))
            }
            Action::LowestX0 { ys, z } => {
                let low = lowest_x0_per_sep(&inst, plan.x0.unwrap(), ys, plan.strict, &sep_pos);
                let arity = st.sep.len() + usize::from(z.is_some());
                summary_relation(&target.symbol, arity, &low, |_, g| {
                    g.finite().map(|v| if z.is_some() { Some(v) } else { None })
                })
            }
        };
        out.insert(rel)?;
    }
    Ok(Restricted {
        query: plan.query,
        predicate: plan.predicate,
        db: out,
        virtual_vars: plan.virtual_vars,
    })
}

/// Builds `sep (+ extra)` rows; `keep` returns `None` to drop a key, `Some(extra)` to keep it.
fn summary_relation(
    symbol: &str,
    arity: usize,
    per_key: &HashMap<Key, Ext<TaggedValue>>,
    keep: impl Fn(&Key, Ext<TaggedValue>) -> Option<Option<TaggedValue>>,
) -> Relation {
    let mut keys: Vec<&Key> = per_key.keys().collect();
    keys.sort();
    let mut rel = Relation::new(symbol, arity);
    for k in keys {
        if let Some(extra) = keep(k, per_key[k]) {
            let mut row = k.clone();
            row.extend(extra);
            rel.push(&row).expect("uniform rows");
        }
    }
    rel
}

/// Max over root rows with the same separator value of the max-min threshold over `ys`.
fn best_min_per_sep(inst: &Instance, ys: &[Var], sep_pos: &[usize]) -> HashMap<Key, Ext<TaggedValue>> {
    let thr = thresholds(inst, ys);
    let root = inst.tree.root();
    let mut best: HashMap<Key, Ext<TaggedValue>> = HashMap::new();
    for (i, row) in inst.rels[root].rows().enumerate() {
        let t = thr.values[root][i];
        let e = best.entry(key_of(row, sep_pos)).or_insert(Ext::NegInf);
        *e = (*e).max(t);
    }
    best
}

/// Smallest `x0` value admitting an extension with `x0 (<=|<) min(ys)`, per separator value.
fn lowest_x0_per_sep(
    inst: &Instance,
    x0: Var,
    ys: &[Var],
    strict: bool,
    sep_pos: &[usize],
) -> HashMap<Key, Ext<TaggedValue>> {
    let tree = &inst.tree;
    let thr = thresholds(inst, ys);
    let ycols: Vec<Vec<usize>> = tree
        .nodes()
        .iter()
        .map(|n| (0..n.vars.len()).filter(|&i| ys.contains(&n.vars[i])).collect())
        .collect();
    let alpha = tree.highest(x0).expect("x0 in subtree");
    let xcol = tree.node(alpha).vars.iter().position(|&v| v == x0).unwrap();
    let mut delta: Vec<Ext<TaggedValue>> = inst.rels[alpha]
        .rows()
        .enumerate()
        .map(|(i, row)| {
            if holds(strict, row[xcol], thr.values[alpha][i]) {
                Ext::Fin(row[xcol])
            } else {
                Ext::PosInf
            }
        })
        .collect();
    let children = tree.children_lists();
    let mut below = alpha;
    while let Some(u) = tree.parent(below) {
        let mut from_path: HashMap<Key, Ext<TaggedValue>> = HashMap::new();
        for (i, row) in inst.rels[below].rows().enumerate() {
            let e = from_path.entry(key_of(row, &inst.up_key[below])).or_insert(Ext::PosInf);
            *e = (*e).min(delta[i]);
        }
        let side: Vec<(usize, HashMap<Key, Ext<TaggedValue>>)> = children[u]
            .iter()
            .filter(|&&c| c != below)
            .map(|&c| {
                let mut m: HashMap<Key, Ext<TaggedValue>> = HashMap::new();
                for (i, row) in inst.rels[c].rows().enumerate() {
                    let e = m.entry(key_of(row, &inst.up_key[c])).or_insert(Ext::NegInf);
                    *e = (*e).max(thr.values[c][i]);
                }
                (c, m)
            })
            .collect();
        delta = inst.rels[u]
            .rows()
            .map(|row| {
                let mut bound = own_min(row, &ycols[u]);
                for (c, m) in &side {
                    let msg = m.get(&key_of(row, &inst.parent_key[*c])).copied().unwrap_or(Ext::NegInf);
                    bound = bound.min(msg);
                }
                match from_path.get(&key_of(row, &inst.parent_key[below])) {
                    Some(&Ext::Fin(m)) if holds(strict, m, bound) => Ext::Fin(m),
                    _ => Ext::PosInf,
                }
            })
            .collect();
        below = u;
    }
    let root = tree.root();
    let mut low: HashMap<Key, Ext<TaggedValue>> = HashMap::new();
    for (i, row) in inst.rels[root].rows().enumerate() {
        let e = low.entry(key_of(row, sep_pos)).or_insert(Ext::PosInf);
        *e = (*e).min(delta[i]);
    }
    low
}

/// Removes rows so that `(Q ∧ x <= y)(D) = Q(D')` for existential `y`.
///
/// Rows of an atom `alpha` holding `x` are dropped when `x` exceeds the
/// largest `y` co-joined with them. That is only sound when `alpha` also
/// fixes every free variable through which `y`'s part of the query is
/// connected to the rest; otherwise an `Invalid` error names the problem.
pub fn eliminate_existential_inequality(
    q: &ConjunctiveQuery,
    x: Var,
    y: Var,
    db: &Database,
    strict: bool,
) -> Result<Database> {
    if q.is_free(y) {
        return Err(Error::invalid(format!(
            "{} is free; keep it in the residual predicate instead",
            q.name(y)
        )));
    }
    let tplus = free_rooted_tree(q)?;
    let c = tplus
        .children(tplus.root())
        .into_iter()
        .find(|&c| tplus.subtree_variables(c).contains(&y))
        .ok_or_else(|| Error::invalid("y does not occur in the query"))?;
    let free = q.free_set();
    let sep: Vec<Var> = tplus.node(c).vars.iter().copied().filter(|v| free.contains(v)).collect();
    let alpha = q
        .atoms()
        .iter()
        .position(|a| a.vars.contains(&x) && sep.iter().all(|v| a.vars.contains(v)))
        .ok_or_else(|| {
            Error::invalid(format!(
                "no atom holds {} together with the free variables {} that connect {}",
                q.name(x),
                q.display_vars(&sep),
                q.name(y)
            ))
        })?;
    let m = max_cojoined_value(q, y, alpha, db)?;
    let atom = &q.atoms()[alpha];
    let xcol = atom.vars.iter().position(|&v| v == x).unwrap();
    let mut rel = db.relation(&atom.symbol)?.clone();
    let mut i = 0;
    rel.retain(|row| {
        let keep = match m[i] {
            Ext::Fin(my) => {
                if strict {
                    row[xcol].base < my
                } else {
                    row[xcol].base <= my
                }
            }
            Ext::PosInf => true,
            Ext::NegInf => false,
        };
        i += 1;
        keep
    });
    let mut out = db.clone();
    out.replace(rel);
    Ok(out)
}

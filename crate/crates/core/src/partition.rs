//! Splitting "x0 is the minimum of X" into strict partial orders, each paired
//! with a rearranged join tree in which every emitted pair `a < b` sits in one
//! node or in two neighboring nodes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qmodel::{ConjunctiveQuery, Var};
use crate::structure::{make_maximally_branching, JoinTree, TreeNode};

/// An order plus the branch's nodes with parent ids.
type Alternative = (Vec<(Var, Var)>, Vec<(TreeNode, Option<usize>)>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderTreePair {
    /// Emitted pairs `(a, b)` meaning `a < b`; exactly these are enforced.
    pub order: Vec<(Var, Var)>,
    pub tree: JoinTree,
}

impl OrderTreePair {
    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let pairs: Vec<String> = self
            .order
            .iter()
            .map(|(a, b)| format!("{}<{}", q.name(*a), q.name(*b)))
            .collect();
        format!("order: {}\n{}", pairs.join(", "), self.tree.render(q))
    }
}

type Pairs = Vec<(Vec<(Var, Var)>, JoinTree)>;

/// Runs the partition for `x0 < min(xs)` on `t`, whose root must contain `x0`.
///
/// Precondition: no chordless path of length >= 3 between two variables of
/// `{x0} ∪ xs`. When it is violated some combined tree stops being a join
/// tree and an `Invariant` error is returned.
pub fn partition_min_orders(t: &JoinTree, x0: Var, xs: &[Var]) -> Result<Vec<OrderTreePair>> {
    if !t.node(t.root()).contains(x0) {
        return Err(Error::invalid("the root of the tree must contain x0"));
    }
    t.check_running_intersection().map_err(Error::Invariant)?;
    let mut x: Vec<Var> = Vec::new();
    for &v in xs {
        if v != x0 && !x.contains(&v) {
            x.push(v);
        }
    }
    Ok(rec(t.clone(), x0, &x)?
        .into_iter()
        .map(|(order, tree)| OrderTreePair { order, tree })
        .collect())
}

fn rec(t: JoinTree, x0: Var, xs: &[Var]) -> Result<Pairs> {
    let t = make_maximally_branching(&t);
    let neighbors = t.neighbors(x0);
    let trunk_vars: Vec<Var> = xs.iter().copied().filter(|v| neighbors.contains(v)).collect();
    let residual: Vec<Var> = xs.iter().copied().filter(|v| !neighbors.contains(v)).collect();
    let trunk_order: Vec<(Var, Var)> = trunk_vars.iter().map(|&v| (x0, v)).collect();

    let branch_roots: Vec<usize> = (0..t.len())
        .filter(|&r| {
            let Some(p) = t.parent(r) else { return false };
            !t.node(r).contains(x0) && t.node(p).contains(x0) && {
                let sv = t.subtree_variables(r);
                residual.iter().any(|v| sv.contains(v))
            }
        })
        .collect();

    let mut in_branch = vec![false; t.len()];
    for &r in &branch_roots {
        for n in t.subtree_nodes(r) {
            in_branch[n] = true;
        }
    }

    // Per branch: the alternatives, each an order plus the branch's nodes with parent ids.
    let mut per_branch: Vec<Vec<Alternative>> = Vec::new();
    for &r in &branch_roots {
        let sv = t.subtree_variables(r);
        let xr: Vec<Var> = residual.iter().copied().filter(|v| sv.contains(v)).collect();
        let attach_to = t.node(t.parent(r).unwrap()).id;
        let sub = t.subtree(r);
        let mut alternatives = Vec::new();
        for &x in &xr {
            let top = sub.highest(x).expect("x in branch");
            let rest: Vec<Var> = xr.iter().copied().filter(|&v| v != x).collect();
            for (order, tree) in rec(sub.rerooted(top), x, &rest)? {
                let mut full_order = vec![(x0, x)];
                full_order.extend(order);
                let nodes = (0..tree.len())
                    .map(|i| {
                        let parent = match tree.parent(i) {
                            Some(p) => Some(tree.node(p).id),
                            None => Some(attach_to),
                        };
                        (tree.node(i).clone(), parent)
                    })
                    .collect();
                alternatives.push((full_order, nodes));
            }
        }
        per_branch.push(alternatives);
    }

    let trunk_nodes: Vec<(TreeNode, Option<usize>)> = (0..t.len())
        .filter(|&i| !in_branch[i])
        .map(|i| (t.node(i).clone(), t.parent(i).map(|p| t.node(p).id)))
        .collect();

    let mut result = Vec::new();
    let mut choice = vec![0usize; per_branch.len()];
    loop {
        let mut order = trunk_order.clone();
        let mut nodes: BTreeMap<usize, (TreeNode, Option<usize>)> =
            trunk_nodes.iter().map(|(n, p)| (n.id, (n.clone(), *p))).collect();
        for (b, &c) in choice.iter().enumerate() {
            let (o, ns) = &per_branch[b][c];
            order.extend(o.iter().copied());
            for (n, p) in ns {
                nodes.insert(n.id, (n.clone(), *p));
            }
        }
        let (list, parents): (Vec<TreeNode>, Vec<Option<usize>>) = nodes.into_values().unzip();
        let tree = JoinTree::from_ids(list, &parents).map_err(Error::Invariant)?;
        tree.check_running_intersection().map_err(|e| {
            Error::Invariant(format!("combined tree for x{} is not a join tree: {e}", x0.0))
        })?;
        result.push((order, tree));

        // Odometer over branch alternatives, first branch slowest.
        let mut k = per_branch.len();
        loop {
            if k == 0 {
                return Ok(result);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < per_branch[k].len() {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Whether every emitted pair lies in one node or in two neighboring nodes.
pub fn check_enforcement(tree: &JoinTree, order: &[(Var, Var)]) -> std::result::Result<(), String> {
    for &(a, b) in order {
        if enforcing_nodes(tree, a, b).is_none() {
            return Err(format!("pair #{} < #{} is not enforced", a.0, b.0));
        }
    }
    Ok(())
}

/// Where to enforce `a < b`: `(n, n)` for a node holding both, else an
/// adjacent `(A, B)` with `a ∈ A`, `b ∈ B`. First match in node order.
pub fn enforcing_nodes(tree: &JoinTree, a: Var, b: Var) -> Option<(usize, usize)> {
    if let Some(n) = (0..tree.len()).find(|&n| tree.node(n).contains(a) && tree.node(n).contains(b)) {
        return Some((n, n));
    }
    for an in (0..tree.len()).filter(|&n| tree.node(n).contains(a)) {
        for bn in (0..tree.len()).filter(|&n| tree.node(n).contains(b)) {
            if tree.adjacent(an, bn) {
                return Some((an, bn));
            }
        }
    }
    None
}

/// Does the total order `seq` (smallest first) satisfy every pair?
pub fn extends(order: &[(Var, Var)], seq: &[Var]) -> bool {
    let pos = |v: Var| seq.iter().position(|&s| s == v);
    order.iter().all(|&(a, b)| match (pos(a), pos(b)) {
        (Some(i), Some(j)) => i < j,
        _ => false,
    })
}

//! Hypergraphs, rooted join trees, acyclicity and free-connexity, chordless
//! paths, and the dichotomy classifier.

mod classify;
mod paths;

pub use classify::{classify, classify_all, Task, Verdict, Witness};
pub use paths::{all_chordless_paths, find_bad_path, is_chordless};

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::qmodel::{ConjunctiveQuery, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    pub vertices: BTreeSet<Var>,
    pub edges: Vec<BTreeSet<Var>>,
}

impl Hypergraph {
    pub fn new(edges: Vec<BTreeSet<Var>>) -> Self {
        let vertices = edges.iter().flat_map(|e| e.iter().copied()).collect();
        Hypergraph { vertices, edges }
    }

    /// One edge per atom, in atom order.
    pub fn of_query(q: &ConjunctiveQuery) -> Self {
        Hypergraph::new(q.atoms().iter().map(|a| a.var_set()).collect())
    }

    pub fn with_edge(&self, edge: BTreeSet<Var>) -> Self {
        let mut edges = self.edges.clone();
        edges.push(edge);
        Hypergraph::new(edges)
    }

    pub fn adjacent(&self, a: Var, b: Var) -> bool {
        self.edges.iter().any(|e| e.contains(&a) && e.contains(&b))
    }

    /// Variables sharing an edge with `v`, excluding `v`.
    pub fn neighbors(&self, v: Var) -> BTreeSet<Var> {
        self.edges
            .iter()
            .filter(|e| e.contains(&v))
            .flat_map(|e| e.iter().copied())
            .filter(|&u| u != v)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    /// Stable identity; survives rerooting, subtree extraction and rearrangement.
    pub id: usize,
    pub vars: Vec<Var>,
    /// Atom whose relation supplies this node's tuples (projected when `relaxed`).
    pub atom: Option<usize>,
    pub relaxed: bool,
}

impl TreeNode {
    pub fn contains(&self, v: Var) -> bool {
        self.vars.contains(&v)
    }

    pub fn var_set(&self) -> BTreeSet<Var> {
        self.vars.iter().copied().collect()
    }

    pub fn shared(&self, other: &TreeNode) -> Vec<Var> {
        self.vars.iter().copied().filter(|v| other.contains(*v)).collect()
    }
}

/// A rooted tree over variable-set nodes. Construction only checks that the
/// parent map forms a tree; the running-intersection property is checked by
/// [`JoinTree::check_running_intersection`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinTree {
    nodes: Vec<TreeNode>,
    parent: Vec<Option<usize>>,
    root: usize,
}

impl JoinTree {
    pub fn new(nodes: Vec<TreeNode>, parent: Vec<Option<usize>>, root: usize) -> Result<Self, String> {
        if nodes.is_empty() || nodes.len() != parent.len() || root >= nodes.len() {
            return Err("malformed tree".into());
        }
        if parent[root].is_some() {
            return Err("root has a parent".into());
        }
        let t = JoinTree { nodes, parent, root };
        for i in 0..t.nodes.len() {
            if i != t.root && t.parent[i].is_none() {
                return Err(format!("node {i} is disconnected"));
            }
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = t.parent[cur] {
                if p >= t.nodes.len() {
                    return Err(format!("node {cur} has an out-of-range parent"));
                }
                cur = p;
                steps += 1;
                if steps > t.nodes.len() {
                    return Err("parent map has a cycle".into());
                }
            }
        }
        Ok(t)
    }

    /// Builds a tree from `(node, parent id)` pairs where parents are given by node id.
    pub fn from_ids(nodes: Vec<TreeNode>, parent_ids: &[Option<usize>]) -> Result<Self, String> {
        let index = |id: usize| nodes.iter().position(|n| n.id == id);
        let mut parent = Vec::with_capacity(nodes.len());
        let mut root = None;
        for (i, p) in parent_ids.iter().enumerate() {
            match p {
                Some(pid) => parent.push(Some(index(*pid).ok_or(format!("unknown parent id {pid}"))?)),
                None => {
                    if root.replace(i).is_some() {
                        return Err("more than one root".into());
                    }
                    parent.push(None);
                }
            }
        }
        JoinTree::new(nodes, parent, root.ok_or("no root")?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn index_of_id(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.parent[c] == Some(i)).collect()
    }

    pub fn children_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (c, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                out[*p].push(c);
            }
        }
        out
    }

    /// Root first; children in index order.
    pub fn preorder(&self) -> Vec<usize> {
        let children = self.children_lists();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(children[n].iter().rev());
        }
        out
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<usize> {
        let mut order = self.preorder();
        order.reverse();
        order
    }

    /// Breadth-first from the root.
    pub fn bfs(&self) -> Vec<usize> {
        let children = self.children_lists();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            out.push(n);
            queue.extend(children[n].iter().copied());
        }
        out
    }

    /// Strict ancestors of `i`, nearest first.
    pub fn ancestors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = i;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn depth(&self, i: usize) -> usize {
        self.ancestors(i).len()
    }

    pub fn is_ancestor(&self, a: usize, d: usize) -> bool {
        self.ancestors(d).contains(&a)
    }

    pub fn subtree_nodes(&self, i: usize) -> Vec<usize> {
        let children = self.children_lists();
        let mut out = Vec::new();
        let mut stack = vec![i];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(children[n].iter().rev());
        }
        out.sort_unstable();
        out
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.nodes.iter().flat_map(|n| n.vars.iter().copied()).collect()
    }

    pub fn subtree_variables(&self, i: usize) -> BTreeSet<Var> {
        self.subtree_nodes(i)
            .into_iter()
            .flat_map(|n| self.nodes[n].vars.iter().copied())
            .collect()
    }

    /// Node containing `v` closest to the root (unique in a join tree); ties by index.
    pub fn highest(&self, v: Var) -> Option<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].contains(v))
            .min_by_key(|&i| (self.depth(i), i))
    }

    /// First node in index order containing `v`.
    pub fn first_containing(&self, v: Var) -> Option<usize> {
        self.nodes.iter().position(|n| n.contains(v))
    }

    /// Variables sharing some node with `v`, excluding `v`.
    pub fn neighbors(&self, v: Var) -> BTreeSet<Var> {
        self.nodes
            .iter()
            .filter(|n| n.contains(v))
            .flat_map(|n| n.vars.iter().copied())
            .filter(|&u| u != v)
            .collect()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.parent[a] == Some(b) || self.parent[b] == Some(a)
    }

    /// Same nodes and ids, rooted at `new_root`.
    pub fn rerooted(&self, new_root: usize) -> JoinTree {
        let mut parent = self.parent.clone();
        let mut path = vec![new_root];
        path.extend(self.ancestors(new_root));
        parent[new_root] = None;
        for w in path.windows(2) {
            parent[w[1]] = Some(w[0]);
        }
        JoinTree {
            nodes: self.nodes.clone(),
            parent,
            root: new_root,
        }
    }

    /// The subtree rooted at `i` as its own tree; node ids are preserved.
    pub fn subtree(&self, i: usize) -> JoinTree {
        let members = self.subtree_nodes(i);
        let pos = |n: usize| members.binary_search(&n).unwrap();
        let nodes = members.iter().map(|&n| self.nodes[n].clone()).collect();
        let parent = members
            .iter()
            .map(|&n| if n == i { None } else { self.parent[n].map(pos) })
            .collect();
        JoinTree {
            nodes,
            parent,
            root: pos(i),
        }
    }

    /// Moves `i` (with its subtree) under `new_parent`. The caller guarantees no cycle.
    pub fn set_parent(&mut self, i: usize, new_parent: usize) {
        debug_assert!(i != self.root && !self.is_ancestor(i, new_parent) && i != new_parent);
        self.parent[i] = Some(new_parent);
    }

    pub fn add_child(&mut self, parent: usize, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.parent.push(Some(parent));
        self.nodes.len() - 1
    }

    /// Adds `node` as the new root with the old root as its only child.
    pub fn add_root(&mut self, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.parent.push(None);
        let new_root = self.nodes.len() - 1;
        self.parent[self.root] = Some(new_root);
        self.root = new_root;
        new_root
    }

    pub(crate) fn set_vars(&mut self, i: usize, vars: Vec<Var>) {
        self.nodes[i].vars = vars;
    }

    pub(crate) fn set_atom(&mut self, i: usize, atom: Option<usize>) {
        self.nodes[i].atom = atom;
    }

    pub fn next_id(&self) -> usize {
        self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0)
    }

    /// Every variable's nodes must form a connected subtree.
    pub fn check_running_intersection(&self) -> Result<(), String> {
        for v in self.variables() {
            let holders: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].contains(v)).collect();
            // Connected iff exactly one holder has its parent outside the holder set.
            let tops = holders
                .iter()
                .filter(|&&i| self.parent[i].is_none_or(|p| !self.nodes[p].contains(v)))
                .count();
            if tops != 1 {
                return Err(format!("variable #{} occurs in {tops} disconnected regions", v.0));
            }
        }
        Ok(())
    }

    pub fn is_join_tree(&self) -> bool {
        self.check_running_intersection().is_ok()
    }

    /// Multiset of node ids; rearrangements keep it fixed.
    pub fn id_set(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let children = self.children_lists();
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((n, depth)) = stack.pop() {
            let node = &self.nodes[n];
            let label = match node.atom {
                Some(a) if !node.relaxed => q.atoms()[a].symbol.clone(),
                Some(a) => format!("{}*", q.atoms()[a].symbol),
                None => "-".into(),
            };
            let _ = writeln!(out, "{}{} {{{}}}", "  ".repeat(depth), label, q.display_vars(&node.vars));
            stack.extend(children[n].iter().rev().map(|&c| (c, depth + 1)));
        }
        out
    }
}

/// GYO ear removal. On success the tree's node `i` is edge `i` (atom link
/// `Some(i)`), rooted at the last surviving edge. On failure returns the
/// indices of the irreducible core.
pub fn gyo(h: &Hypergraph) -> Result<JoinTree, Vec<usize>> {
    let n = h.edges.len();
    if n == 0 {
        return Err(Vec::new());
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut parent = vec![None; n];
    while remaining.len() > 1 {
        let mut removed = None;
        'ears: for (pos, &e) in remaining.iter().enumerate() {
            let rest: BTreeSet<Var> = remaining
                .iter()
                .filter(|&&g| g != e)
                .flat_map(|&g| h.edges[g].iter().copied())
                .collect();
            let shared: BTreeSet<Var> = h.edges[e].intersection(&rest).copied().collect();
            for &f in &remaining {
                if f != e && shared.is_subset(&h.edges[f]) {
                    parent[e] = Some(f);
                    removed = Some(pos);
                    break 'ears;
                }
            }
        }
        match removed {
            Some(pos) => {
                remaining.remove(pos);
            }
            None => return Err(remaining),
        }
    }
    let nodes = h
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| TreeNode {
            id: i,
            vars: e.iter().copied().collect(),
            atom: Some(i),
            relaxed: false,
        })
        .collect();
    Ok(JoinTree::new(nodes, parent, remaining[0]).expect("GYO yields a tree"))
}

/// A join tree of `h`, or `None` if `h` is cyclic.
pub fn join_tree(h: &Hypergraph) -> Option<JoinTree> {
    gyo(h).ok()
}

/// Join tree of the query with node `i` = atom `i` and node variables in atom column order.
pub fn query_join_tree(q: &ConjunctiveQuery) -> Option<JoinTree> {
    let mut t = join_tree(&Hypergraph::of_query(q))?;
    for (i, atom) in q.atoms().iter().enumerate() {
        let mut vars = Vec::new();
        for &v in &atom.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        t.nodes[i].vars = vars;
    }
    Some(t)
}

pub fn is_acyclic(q: &ConjunctiveQuery) -> bool {
    join_tree(&Hypergraph::of_query(q)).is_some()
}

pub fn is_free_connex(q: &ConjunctiveQuery) -> bool {
    let h = Hypergraph::of_query(q);
    join_tree(&h).is_some() && join_tree(&h.with_edge(q.free_set())).is_some()
}

/// Rehangs nodes root-to-leaf, each under its highest ancestor that keeps the
/// join-tree property. Root and node set are unchanged.
pub fn make_maximally_branching(t: &JoinTree) -> JoinTree {
    let mut t = t.clone();
    let mut queue: VecDeque<usize> = t.children(t.root).into();
    while let Some(n) = queue.pop_front() {
        let p = t.parent[n].expect("non-root");
        let link: Vec<Var> = t.nodes[n].shared(&t.nodes[p]);
        // Ancestors of p that contain the link form a prefix of the chain upward.
        let mut target = p;
        for a in t.ancestors(p) {
            if link.iter().all(|&v| t.nodes[a].contains(v)) {
                target = a;
            } else {
                break;
            }
        }
        if target != p {
            t.parent[n] = Some(target);
        }
        queue.extend(t.children(n));
    }
    t
}

/// Checks directly that no non-root node can be moved to a strict ancestor of its parent.
pub fn is_maximally_branching(t: &JoinTree) -> bool {
    if !t.is_join_tree() {
        return false;
    }
    for n in 0..t.len() {
        let Some(p) = t.parent[n] else { continue };
        for a in t.ancestors(p) {
            let mut moved = t.clone();
            moved.parent[n] = Some(a);
            if moved.is_join_tree() {
                return false;
            }
        }
    }
    true
}

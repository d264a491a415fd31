use std::collections::{BTreeMap, BTreeSet};

use super::Hypergraph;
use crate::qmodel::Var;

struct Adjacency {
    neighbors: BTreeMap<Var, BTreeSet<Var>>,
}

impl Adjacency {
    fn new(h: &Hypergraph) -> Self {
        let mut neighbors: BTreeMap<Var, BTreeSet<Var>> = h.vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
        for e in &h.edges {
            for &a in e {
                for &b in e {
                    if a != b {
                        neighbors.get_mut(&a).unwrap().insert(b);
                    }
                }
            }
        }
        Adjacency { neighbors }
    }

    fn adjacent(&self, a: Var, b: Var) -> bool {
        self.neighbors.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Can `w` extend the chordless path `path`?
    fn extends(&self, path: &[Var], w: Var) -> bool {
        let last = *path.last().unwrap();
        self.adjacent(last, w)
            && !path.contains(&w)
            && path[..path.len() - 1].iter().all(|&p| !self.adjacent(p, w))
    }
}

/// Consecutive vertices share an edge, non-consecutive ones never do, no repeats.
pub fn is_chordless(h: &Hypergraph, path: &[Var]) -> bool {
    let distinct: BTreeSet<Var> = path.iter().copied().collect();
    if distinct.len() != path.len() {
        return false;
    }
    for i in 0..path.len() {
        for j in i + 1..path.len() {
            let adj = h.adjacent(path[i], path[j]);
            if (j == i + 1) != adj {
                return false;
            }
        }
    }
    true
}

/// Lexicographically least chordless path with at least 3 edges from a vertex
/// of `a` to a vertex of `b`.
pub fn find_bad_path(h: &Hypergraph, a: &BTreeSet<Var>, b: &BTreeSet<Var>) -> Option<Vec<Var>> {
    let adj = Adjacency::new(h);
    for &start in a.iter().filter(|v| h.vertices.contains(v)) {
        let mut path = vec![start];
        if let Some(p) = dfs(&adj, &mut path, b) {
            return Some(p);
        }
    }
    None
}

fn dfs(adj: &Adjacency, path: &mut Vec<Var>, targets: &BTreeSet<Var>) -> Option<Vec<Var>> {
    let last = *path.last().unwrap();
    let candidates: Vec<Var> = adj.neighbors[&last].iter().copied().collect();
    for w in candidates {
        if !adj.extends(path, w) {
            continue;
        }
        path.push(w);
        if path.len() >= 4 && targets.contains(&w) {
            return Some(path.clone());
        }
        if let Some(found) = dfs(adj, path, targets) {
            return Some(found);
        }
        path.pop();
    }
    None
}

/// Every chordless path with at least one edge, each listed in both directions.
/// Exponential; meant for cross-checking on small hypergraphs.
pub fn all_chordless_paths(h: &Hypergraph) -> Vec<Vec<Var>> {
    let adj = Adjacency::new(h);
    let mut out = Vec::new();
    for &s in &h.vertices {
        let mut path = vec![s];
        collect(&adj, &mut path, &mut out);
    }
    out
}

fn collect(adj: &Adjacency, path: &mut Vec<Var>, out: &mut Vec<Vec<Var>>) {
    let last = *path.last().unwrap();
    let candidates: Vec<Var> = adj.neighbors[&last].iter().copied().collect();
    for w in candidates {
        if adj.extends(path, w) {
            path.push(w);
            out.push(path.clone());
            collect(adj, path, out);
            path.pop();
        }
    }
}

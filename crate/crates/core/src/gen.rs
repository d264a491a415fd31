//! Seeded generators: small random acyclic instances for cross-checking, and
//! the star and path scaling families.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::qmodel::{
    Atom, ConjunctiveQuery, Database, Direction, MinPredicate, Ranking, Relation, TaggedValue, Var,
};

#[derive(Clone, Debug)]
pub struct Generated {
    pub query: ConjunctiveQuery,
    pub predicate: Option<MinPredicate>,
    pub ranking: Option<Ranking>,
    pub db: Database,
}

impl Generated {
    /// The query in the text syntax accepted by the parser.
    pub fn text(&self) -> String {
        query_text(&self.query, self.predicate.as_ref(), self.ranking.as_ref())
    }
}

pub fn query_text(q: &ConjunctiveQuery, p: Option<&MinPredicate>, r: Option<&Ranking>) -> String {
    let mut s = format!("{q}\n");
    if let Some(p) = p {
        s.push_str(&format!("PREDICATE {}.\n", p.display(q)));
    }
    if let Some(r) = r {
        s.push_str(&format!("ORDER BY {}.\n", r.display(q)));
    }
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_atoms: usize,
    pub max_arity: usize,
    pub domain: i64,
    pub max_tuples: usize,
    /// Chance that a variable is free.
    pub free_prob: f64,
    /// Chance that a new atom reuses an earlier symbol of the same arity.
    pub self_join_prob: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_atoms: 5,
            max_arity: 3,
            domain: 8,
            max_tuples: 30,
            free_prob: 0.7,
            self_join_prob: 0.1,
        }
    }
}

/// An acyclic query built as a tree of atoms: every atom after the first
/// shares a non-empty subset of a random earlier atom's variables.
pub fn random_acyclic_query(rng: &mut impl Rng, shape: &Shape) -> ConjunctiveQuery {
    let n_atoms = rng.gen_range(1..=shape.max_atoms);
    let mut names: Vec<String> = Vec::new();
    let new_var = |names: &mut Vec<String>| {
        names.push(format!("v{}", names.len()));
        Var((names.len() - 1) as u32)
    };
    let mut atoms: Vec<Atom> = Vec::new();
    for i in 0..n_atoms {
        let arity = rng.gen_range(1..=shape.max_arity);
        let mut vars: Vec<Var> = Vec::new();
        if i > 0 {
            let parent = &atoms[rng.gen_range(0..atoms.len())];
            let mut pv = parent.vars.clone();
            pv.dedup();
            pv.shuffle(rng);
            let k = rng.gen_range(1..=pv.len().min(arity));
            vars.extend_from_slice(&pv[..k]);
        }
        while vars.len() < arity {
            vars.push(new_var(&mut names));
        }
        vars.shuffle(rng);
        let reuse: Vec<&Atom> = atoms.iter().filter(|a| a.vars.len() == arity).collect();
        let symbol = if !reuse.is_empty() && rng.gen_bool(shape.self_join_prob) {
            reuse[rng.gen_range(0..reuse.len())].symbol.clone()
        } else {
            format!("R{i}")
        };
        atoms.push(Atom::new(symbol, vars));
    }
    let all: Vec<Var> = (0..names.len() as u32).map(Var).collect();
    let free: Vec<Var> = all.iter().copied().filter(|_| rng.gen_bool(shape.free_prob)).collect();
    ConjunctiveQuery::new("Q", names, atoms, free).expect("generated query is well formed")
}

pub fn random_database(rng: &mut impl Rng, q: &ConjunctiveQuery, shape: &Shape) -> Database {
    let mut db = Database::new();
    for atom in q.atoms() {
        if db.get(&atom.symbol).is_some() {
            continue;
        }
        let arity = atom.vars.len();
        let mut rel = Relation::new(atom.symbol.clone(), arity);
        let n = rng.gen_range(0..=shape.max_tuples);
        let mut row = vec![TaggedValue::untagged(0); arity];
        for _ in 0..n {
            for v in row.iter_mut() {
                *v = TaggedValue::untagged(rng.gen_range(0..shape.domain));
            }
            rel.push(&row).expect("arity matches");
        }
        rel.dedup();
        db.insert(rel).expect("one relation per symbol");
    }
    db
}

/// `x0 <= MIN(X)` (or strict) over body variables, `|X| <= 4`.
pub fn random_predicate(rng: &mut impl Rng, q: &ConjunctiveQuery) -> MinPredicate {
    let vars = q.variables();
    let x0 = vars[rng.gen_range(0..vars.len())];
    let strict = rng.gen_bool(0.3);
    let mut pool: Vec<Var> = vars.iter().copied().filter(|&v| !(strict && v == x0)).collect();
    pool.shuffle(rng);
    if pool.is_empty() {
        return MinPredicate::new(x0, vec![x0], false).unwrap();
    }
    let k = rng.gen_range(1..=pool.len().min(4));
    MinPredicate::new(x0, pool[..k].to_vec(), strict).unwrap()
}

/// `MIN`/`MAX` over one to four free variables; `None` for Boolean queries.
pub fn random_ranking(rng: &mut impl Rng, q: &ConjunctiveQuery) -> Option<Ranking> {
    let mut pool = q.free().to_vec();
    if pool.is_empty() {
        return None;
    }
    pool.shuffle(rng);
    let k = rng.gen_range(1..=pool.len().min(4));
    let direction = if rng.gen_bool(0.25) { Direction::Max } else { Direction::Min };
    Some(Ranking {
        direction,
        vars: pool[..k].to_vec(),
    })
}

/// One random instance with a predicate and (when possible) a ranking.
pub fn random_instance(seed: u64, shape: &Shape) -> Generated {
    let mut r = rng(seed);
    let query = random_acyclic_query(&mut r, shape);
    let predicate = Some(random_predicate(&mut r, &query));
    let ranking = random_ranking(&mut r, &query);
    let db = random_database(&mut r, &query, shape);
    Generated {
        query,
        predicate,
        ranking,
        db,
    }
}

fn column_rows(rng: &mut impl Rng, symbol: &str, n: usize, domains: &[i64]) -> Relation {
    let mut rel = Relation::new(symbol, domains.len());
    let mut row = vec![TaggedValue::untagged(0); domains.len()];
    for _ in 0..n {
        for (v, &d) in row.iter_mut().zip(domains) {
            *v = TaggedValue::untagged(rng.gen_range(0..d.max(1)));
        }
        rel.push(&row).expect("arity matches");
    }
    rel.dedup();
    rel
}

/// Three relations sharing the join variable `s`, ranked by `MIN(a1,a2,a3)`,
/// with predicate `a1 <= MIN(a2,a3)`. About `size` tuples in total.
pub fn star_family(size: usize, seed: u64) -> Generated {
    let mut r = rng(seed);
    let query = ConjunctiveQuery::from_names(
        "Q",
        &["a1", "a2", "a3", "s"],
        &[("R1", &["a1", "s"]), ("R2", &["a2", "s"]), ("R3", &["a3", "s"])],
    )
    .unwrap();
    let per = (size / 3).max(1);
    let join = per as i64;
    let vals = 4 * per as i64;
    let mut db = Database::new();
    for sym in ["R1", "R2", "R3"] {
        db.insert(column_rows(&mut r, sym, per, &[vals, join])).unwrap();
    }
    let v = |n| query.var(n).unwrap();
    let predicate = Some(MinPredicate::new(v("a1"), vec![v("a2"), v("a3")], false).unwrap());
    let ranking = Some(Ranking::min(vec![v("a1"), v("a2"), v("a3")]));
    Generated {
        query,
        predicate,
        ranking,
        db,
    }
}

/// `R0(x0,u), R1(u,v), R2(v,x1), R3(x1,x2)` with `x0 <= MIN(x1,x2)`: the
/// predicate cannot be eliminated, but enumeration under it is efficient.
pub fn path_family(size: usize, seed: u64) -> Generated {
    let mut r = rng(seed);
    let query = ConjunctiveQuery::from_names(
        "Q",
        &["x0", "u", "v", "x1", "x2"],
        &[("R0", &["x0", "u"]), ("R1", &["u", "v"]), ("R2", &["v", "x1"]), ("R3", &["x1", "x2"])],
    )
    .unwrap();
    let per = (size / 4).max(1);
    let d = per as i64;
    let mut db = Database::new();
    for sym in ["R0", "R1", "R2", "R3"] {
        db.insert(column_rows(&mut r, sym, per, &[d, d])).unwrap();
    }
    let v = |n| query.var(n).unwrap();
    let predicate = Some(MinPredicate::new(v("x0"), vec![v("x1"), v("x2")], false).unwrap());
    let ranking = Some(Ranking::min(vec![v("x0"), v("x1"), v("x2")]));
    Generated {
        query,
        predicate,
        ranking,
        db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::parse_query;
    use crate::structure::is_acyclic;

    #[test]
    fn random_queries_are_acyclic_and_round_trip() {
        let shape = Shape::default();
        for seed in 0..200 {
            let g = random_instance(seed, &shape);
            assert!(is_acyclic(&g.query), "{}", g.query);
            g.db.check_schema(&g.query).unwrap();
            let pq = parse_query(&g.text()).unwrap();
            assert_eq!(pq.query.to_string(), g.query.to_string());
            assert_eq!(pq.predicate.map(|p| p.display(&pq.query)), g.predicate.map(|p| p.display(&g.query)));
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let shape = Shape::default();
        let (a, b) = (random_instance(7, &shape), random_instance(7, &shape));
        assert_eq!(a.text(), b.text());
        assert_eq!(a.db, b.db);
    }

    #[test]
    fn families_have_roughly_the_requested_size() {
        let s = star_family(3000, 1);
        assert!(s.db.size() > 2500 && s.db.size() <= 3000);
        let p = path_family(4000, 1);
        assert!(p.db.size() > 2000 && p.db.size() <= 4000);
    }
}

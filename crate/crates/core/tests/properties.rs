use std::collections::BTreeSet;

use proptest::prelude::*;

use cqmin_core::access::{count_via_access, LexDA};
use cqmin_core::error::Error;
use cqmin_core::oracle::{oracle_answers, oracle_answers_where, Filter};
use cqmin_core::qmodel::{parse_query, Answer, Database, Relation, TaggedValue};

fn rows(arity: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(0i64..5, arity), 0..12)
}

fn relation(sym: &str, arity: usize, rs: &[Vec<i64>]) -> Relation {
    let refs: Vec<&[i64]> = rs.iter().map(|r| r.as_slice()).collect();
    let mut rel = Relation::from_ints(sym, arity, &refs).unwrap();
    rel.dedup();
    rel
}

proptest! {
    #[test]
    fn count_via_access_is_exact_and_cheap(total in 0u128..100_000) {
        let (n, probes) = count_via_access(|k| {
            if k < total {
                Ok(Answer::new(vec![TaggedValue::untagged(k as i64)]))
            } else {
                Err(Error::OutOfBounds { index: k, total })
            }
        }).unwrap();
        prop_assert_eq!(n, total);
        let bound = if total == 0 { 1.0 } else { 2.0 * (total as f64).log2() + 2.0 };
        prop_assert!(probes as f64 <= bound, "{} probes for {}", probes, total);
    }

    #[test]
    fn lex_access_lists_every_answer_once(r in rows(2), s in rows(2), t in rows(1)) {
        let q = parse_query("Q(a,b,c) :- R(a,b), S(b,c), T(c).").unwrap().query;
        let mut db = Database::new();
        db.insert(relation("R", 2, &r)).unwrap();
        db.insert(relation("S", 2, &s)).unwrap();
        db.insert(relation("T", 1, &t)).unwrap();
        let da = LexDA::new(&q, &db).unwrap();
        let seq: Vec<Answer> = (0..da.total()).map(|k| da.access(k).unwrap()).collect();
        let got: BTreeSet<Answer> = seq.iter().cloned().collect();
        prop_assert_eq!(got.len(), seq.len());
        prop_assert_eq!(got, oracle_answers(&q, &db).unwrap());
        prop_assert!(da.access(da.total()).is_err_and(|e| e.is_out_of_bounds()));
    }

    #[test]
    fn strict_answers_are_a_subset(r in rows(2), s in rows(2)) {
        let pq = parse_query("Q(x0,x1,y) :- R(x0,y), S(x1,y).\nPREDICATE x0 <= MIN(x1).").unwrap();
        let mut db = Database::new();
        db.insert(relation("R", 2, &r)).unwrap();
        db.insert(relation("S", 2, &s)).unwrap();
        let weak = pq.predicate.clone().unwrap();
        let mut strict = weak.clone();
        strict.strict = true;
        let a = oracle_answers_where(&pq.query, &db, &Filter::Min(weak)).unwrap();
        let b = oracle_answers_where(&pq.query, &db, &Filter::Min(strict)).unwrap();
        prop_assert!(b.is_subset(&a));
        let n = cqmin_core::elim::count_with_predicate(&pq.query, pq.predicate.as_ref(), &db, cqmin_core::Exec::Sequential).unwrap();
        prop_assert_eq!(n, a.len() as u128);
    }
}

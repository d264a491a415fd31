use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{find_bad_path, gyo, Hypergraph};
use crate::error::{Error, Result};
use crate::qmodel::{ConjunctiveQuery, MinPredicate, Var};
use crate::reduce::restriction_plan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Task {
    Elimination,
    Counting,
    Boolean,
    RankedDA,
    UnrankedDAWithPredicate,
    RankedEnum,
    EnumWithPredicate,
    SingleAccess,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Elimination,
        Task::Counting,
        Task::Boolean,
        Task::RankedDA,
        Task::UnrankedDAWithPredicate,
        Task::RankedEnum,
        Task::EnumWithPredicate,
        Task::SingleAccess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Elimination => "elimination",
            Task::Counting => "counting",
            Task::Boolean => "boolean",
            Task::RankedDA => "ranked direct access",
            Task::UnrankedDAWithPredicate => "direct access with predicate",
            Task::RankedEnum => "ranked enumeration",
            Task::EnumWithPredicate => "enumeration with predicate",
            Task::SingleAccess => "single access",
        }
    }

    fn uses_ranking(self) -> bool {
        matches!(self, Task::RankedDA | Task::RankedEnum | Task::SingleAccess)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Atoms left over after ear removal.
    Cyclic { core: Vec<String> },
    NotFreeConnex { free: Vec<String> },
    /// Chordless path with at least three edges, by variable name. Names may
    /// include variables introduced when projecting onto the free variables.
    BadPath { path: Vec<String> },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Cyclic { core } => write!(f, "cyclic core {{{}}}", core.join(", ")),
            Witness::NotFreeConnex { free } => {
                write!(f, "not free-connex: adding edge {{{}}} creates a cycle", free.join(","))
            }
            Witness::BadPath { path } => write!(f, "chordless path {}", path.join(" - ")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub task: Task,
    pub tractable: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    fn yes(task: Task) -> Self {
        Verdict {
            task,
            tractable: true,
            witness: None,
        }
    }

    fn no(task: Task, witness: Witness) -> Self {
        Verdict {
            task,
            tractable: false,
            witness: Some(witness),
        }
    }

    /// `Err(Intractable)` carrying the witness, or `Ok(())`.
    pub fn require(&self) -> Result<()> {
        match &self.witness {
            Some(w) if !self.tractable => Err(Error::Intractable {
                task: self.task.name().into(),
                reason: w.to_string(),
            }),
            _ => Ok(()),
        }
    }

    /// Length in edges of a path witness.
    pub fn path_len(&self) -> Option<usize> {
        match &self.witness {
            Some(Witness::BadPath { path }) => Some(path.len() - 1),
            _ => None,
        }
    }
}

fn check_vars(q: &ConjunctiveQuery, vars: impl IntoIterator<Item = Var>) -> Result<()> {
    let body: BTreeSet<Var> = q.variables().into_iter().collect();
    for v in vars {
        if !body.contains(&v) {
            return Err(Error::invalid(format!("variable #{} does not occur in the query", v.0)));
        }
    }
    Ok(())
}

fn names(q: &ConjunctiveQuery, vars: &[Var]) -> Vec<String> {
    vars.iter().map(|&v| q.name(v).to_string()).collect()
}

/// Decides whether `task` is efficiently solvable for `q` with the given
/// predicate or ranking variables. Purely structural.
///
/// Missing predicate: the predicate tasks fall back to their unpredicated
/// versions. Missing ranking: ranked tasks fall back to arbitrary order.
pub fn classify(
    task: Task,
    q: &ConjunctiveQuery,
    predicate: Option<&MinPredicate>,
    ranking: Option<&[Var]>,
) -> Result<Verdict> {
    if let Some(p) = predicate {
        check_vars(q, std::iter::once(p.x0).chain(p.set.iter().copied()))?;
    }
    if let Some(r) = ranking {
        check_vars(q, r.iter().copied())?;
        if task.uses_ranking() {
            if let Some(v) = r.iter().find(|v| !q.is_free(**v)) {
                return Err(Error::invalid(format!(
                    "ranking variable {} must be free for {task}",
                    q.name(*v)
                )));
            }
        }
    }
    let h = Hypergraph::of_query(q);
    if let Err(core) = gyo(&h) {
        let core = core.iter().map(|&i| q.atoms()[i].symbol.clone()).collect();
        return Ok(Verdict::no(task, Witness::Cyclic { core }));
    }
    if task == Task::Boolean {
        return Ok(Verdict::yes(task));
    }
    if gyo(&h.with_edge(q.free_set())).is_err() {
        return Ok(Verdict::no(
            task,
            Witness::NotFreeConnex {
                free: names(q, q.free()),
            },
        ));
    }
    let bad_among = |pq: &ConjunctiveQuery, vars: BTreeSet<Var>| -> Option<Witness> {
        find_bad_path(&Hypergraph::of_query(pq), &vars, &vars).map(|p| Witness::BadPath { path: names(pq, &p) })
    };
    let verdict = match task {
        Task::Elimination | Task::Counting | Task::UnrankedDAWithPredicate => {
            let plan = restriction_plan(q, predicate)?;
            let witness = plan.predicate.as_ref().and_then(|p| {
                let vars = std::iter::once(p.x0).chain(p.others()).collect();
                bad_among(&plan.query, vars)
            });
            match witness {
                Some(w) => Verdict::no(task, w),
                None => Verdict::yes(task),
            }
        }
        Task::RankedDA => match ranking {
            Some(r) => {
                let plan = restriction_plan(q, None)?;
                match bad_among(&plan.query, r.iter().copied().collect()) {
                    Some(w) => Verdict::no(task, w),
                    None => Verdict::yes(task),
                }
            }
            None => Verdict::yes(task),
        },
        Task::RankedEnum | Task::EnumWithPredicate | Task::SingleAccess => Verdict::yes(task),
        Task::Boolean => unreachable!(),
    };
    Ok(verdict)
}

/// Verdicts for every task, in [`Task::ALL`] order.
pub fn classify_all(
    q: &ConjunctiveQuery,
    predicate: Option<&MinPredicate>,
    ranking: Option<&[Var]>,
) -> Result<Vec<Verdict>> {
    Task::ALL.iter().map(|&t| classify(t, q, predicate, ranking)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::parse_query;

    fn verdict(text: &str, task: Task) -> Verdict {
        let pq = parse_query(text).unwrap();
        let ranking = pq.ranking.as_ref().map(|r| r.vars.as_slice());
        classify(task, &pq.query, pq.predicate.as_ref(), ranking).unwrap()
    }

    const PATH: &str = "Q(x0,u,v,x1,x2) :- R0(x0,u), R1(u,v), R2(v,x1), R3(x1,x2).\nPREDICATE x0 <= MIN(x1,x2).";

    #[test]
    fn path_query_elimination_is_intractable() {
        let v = verdict(PATH, Task::Elimination);
        assert!(!v.tractable);
        assert_eq!(
            v.witness,
            Some(Witness::BadPath {
                path: vec!["x0".into(), "u".into(), "v".into(), "x1".into()]
            })
        );
        assert_eq!(v.path_len(), Some(3));
        assert!(verdict(PATH, Task::EnumWithPredicate).tractable);
        assert!(verdict(PATH, Task::Boolean).tractable);
    }

    #[test]
    fn two_branch_is_tractable_everywhere() {
        let text = "Q(x0,x1,x2,y) :- R0(x0), R1(x1,y), R2(x2,y).\nPREDICATE x0 <= MIN(x1,x2).\nORDER BY MIN(x0,x1,x2).";
        for t in Task::ALL {
            assert!(verdict(text, t).tractable, "{t}");
        }
    }

    #[test]
    fn three_team_star_ranked_access() {
        let text = "Q(a1,a2,a3,s) :- R1(a1,s), R2(a2,s), R3(a3,s).\nORDER BY MIN(a1,a2,a3).";
        assert!(verdict(text, Task::RankedDA).tractable);
    }

    #[test]
    fn ranked_access_bad_path() {
        let text = "Q(a,u,v,b) :- R(a,u), S(u,v), T(v,b).\nORDER BY MIN(a,b).";
        let v = verdict(text, Task::RankedDA);
        assert!(!v.tractable);
        assert!(verdict(text, Task::RankedEnum).tractable);
    }

    #[test]
    fn cyclic_and_not_free_connex() {
        let tri = "Q(a,b,c) :- R(a,b), S(b,c), T(a,c).";
        for t in Task::ALL {
            assert!(matches!(verdict(tri, t).witness, Some(Witness::Cyclic { .. })));
        }
        let nfc = "Q(x,z) :- R(x,y), S(y,z).";
        assert!(matches!(verdict(nfc, Task::Counting).witness, Some(Witness::NotFreeConnex { .. })));
        assert!(verdict(nfc, Task::Boolean).tractable);
    }

    #[test]
    fn ranking_over_existential_is_an_error() {
        let pq = parse_query("Q(x) :- R(x,y).\nORDER BY MIN(x,y).").unwrap();
        let r = pq.ranking.unwrap().vars;
        assert!(classify(Task::RankedDA, &pq.query, None, Some(&r)).is_err());
    }

    #[test]
    fn bad_path_between_two_set_members_blocks_elimination() {
        // x0 is isolated, but x1 and x2 are three edges apart.
        let text = "Q(x0,x1,a,b,x2) :- R0(x0), R1(x1,a), R2(a,b), R3(b,x2).\nPREDICATE x0 <= MIN(x1,x2).";
        let v = verdict(text, Task::Counting);
        assert!(!v.tractable);
        assert_eq!(v.path_len(), Some(3));
    }
}

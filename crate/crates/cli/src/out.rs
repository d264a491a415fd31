//! Output shapes for `--json` and the error-to-exit-code mapping.

use std::collections::BTreeMap;

use cqmin_core::oracle::Filter;
use cqmin_core::qmodel::{Answer, Direction, MinPredicate, TaggedValue};
use cqmin_core::structure::Verdict;
use cqmin_core::Error;
use serde::Serialize;

pub fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

pub fn answer_values(a: &Answer) -> Vec<i64> {
    a.values.iter().map(|v| v.base).collect()
}

pub fn answer_row(a: &Answer) -> String {
    answer_values(a).iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

pub fn filter(p: Option<&MinPredicate>) -> Filter {
    p.map_or(Filter::None, |p| Filter::Min(p.clone()))
}

/// For MAX rankings, the answer with every value negated, so that MIN works.
pub fn negated(a: &Answer, d: Direction) -> Answer {
    match d {
        Direction::Min => a.clone(),
        Direction::Max => Answer::new(a.values.iter().map(|v| TaggedValue::untagged(-v.base)).collect()),
    }
}

#[derive(Serialize)]
pub struct ClassifyJson {
    pub query: String,
    pub verdicts: Vec<Verdict>,
}

#[derive(Serialize)]
pub struct PartJson {
    pub query_file: String,
    pub query: String,
    /// Relation symbol to data file, relative to the manifest.
    pub relations: BTreeMap<String, String>,
    pub fresh: Vec<String>,
    pub order: Vec<[String; 2]>,
    pub answers: u128,
}

#[derive(Serialize)]
pub struct Manifest {
    pub source: String,
    pub predicate: String,
    pub parts: Vec<PartJson>,
}

#[derive(Serialize)]
pub struct CountJson {
    pub count: u128,
    pub method: &'static str,
}

#[derive(Serialize)]
pub struct BoolJson {
    pub nonempty: bool,
    pub method: &'static str,
}

#[derive(Serialize, Clone, Copy)]
pub struct Stats {
    pub answers: u64,
    pub max_delay: u64,
    pub avg_delay: f64,
}

pub fn stats(delays: &[u64]) -> Stats {
    let n = delays.len() as u64;
    Stats {
        answers: n,
        max_delay: delays.iter().copied().max().unwrap_or(0),
        avg_delay: if n == 0 { 0.0 } else { delays.iter().sum::<u64>() as f64 / n as f64 },
    }
}

#[derive(Serialize)]
pub struct EnumerateJson {
    pub head: Vec<String>,
    pub answers: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Stats>,
    pub method: &'static str,
}

#[derive(Serialize)]
pub struct IndexedAnswer {
    pub index: u128,
    pub values: Vec<i64>,
}

#[derive(Serialize)]
pub struct AccessJson {
    pub total: u128,
    pub method: &'static str,
    pub answers: Vec<IndexedAnswer>,
}

#[derive(Serialize)]
pub struct ErrorJson<'a> {
    pub error: &'a str,
    pub kind: &'a str,
    pub exit_code: u8,
}

/// A failed run: message, exit code, and a short kind for JSON.
#[derive(Debug)]
pub struct Failure {
    pub message: String,
    pub code: u8,
    pub kind: &'static str,
}

impl Failure {
    pub fn divergence(message: String) -> Self {
        Failure {
            message,
            code: 4,
            kind: "divergence",
        }
    }

    pub fn json(&self) -> ErrorJson<'_> {
        ErrorJson {
            error: &self.message,
            kind: self.kind,
            exit_code: self.code,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Parse { .. } => (1, "parse"),
            Error::Invalid(_) => (1, "invalid"),
            Error::Intractable { .. } => (2, "intractable"),
            Error::Data(_) | Error::Io(_) => (3, "data"),
            Error::OutOfBounds { .. } => (3, "out_of_bounds"),
            Error::OracleGuard { .. } => (3, "oracle_guard"),
            Error::Invariant(_) => (4, "invariant"),
        };
        Failure {
            message: e.to_string(),
            code,
            kind,
        }
    }
}

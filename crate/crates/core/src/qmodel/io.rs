use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ConjunctiveQuery, Database, Relation, TaggedValue};
use crate::error::{Error, Result};

const EXTENSIONS: [&str; 4] = ["", "csv", "tsv", "txt"];

fn is_delimiter(c: char) -> bool {
    matches!(c, ',' | ';' | '\t' | ' ' | '|')
}

/// Reads one relation file: one row per line, integers separated by any of
/// `, ; | tab space`. Blank lines and `#` comments are skipped. A nullary
/// relation holds the empty tuple iff the file has a non-blank line.
pub fn load_relation(path: &Path, symbol: &str, arity: usize) -> Result<Relation> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut rel = Relation::new(symbol, arity);
    let mut row = Vec::with_capacity(arity);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        row.clear();
        if arity > 0 {
            for cell in line.split(is_delimiter).filter(|c| !c.is_empty()) {
                let v: i64 = cell.parse().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: '{cell}' is not an integer",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                row.push(TaggedValue::untagged(v));
            }
            if row.len() != arity {
                return Err(Error::data(format!(
                    "{}:{}: expected {arity} columns for {symbol}, found {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )));
            }
        }
        rel.push(&row)?;
    }
    rel.dedup();
    Ok(rel)
}

fn find_file(dir: &Path, symbol: &str) -> Option<PathBuf> {
    EXTENSIONS.iter().find_map(|ext| {
        let p = if ext.is_empty() {
            dir.join(symbol)
        } else {
            dir.join(format!("{symbol}.{ext}"))
        };
        p.is_file().then_some(p)
    })
}

/// Loads one file per relation symbol of `q` from `dir` (`SYM`, `SYM.csv`, `SYM.tsv` or `SYM.txt`).
pub fn load_database(dir: &Path, q: &ConjunctiveQuery) -> Result<Database> {
    let mut db = Database::new();
    for atom in q.atoms() {
        if db.get(&atom.symbol).is_some() {
            continue;
        }
        let path = find_file(dir, &atom.symbol).ok_or_else(|| {
            Error::data(format!(
                "no data file for relation {} in {}",
                atom.symbol,
                dir.display()
            ))
        })?;
        db.insert(load_relation(&path, &atom.symbol, atom.vars.len())?)?;
    }
    Ok(db)
}

/// Loads explicitly listed files; each file's stem names its relation.
pub fn load_database_files(paths: &[PathBuf], q: &ConjunctiveQuery) -> Result<Database> {
    let mut db = Database::new();
    for path in paths {
        let symbol = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::data(format!("bad data file name {}", path.display())))?;
        let Some(atom) = q.atoms().iter().find(|a| a.symbol == symbol) else {
            continue;
        };
        db.insert(load_relation(path, symbol, atom.vars.len())?)?;
    }
    for atom in q.atoms() {
        if db.get(&atom.symbol).is_none() {
            return Err(Error::data(format!("no data file for relation {}", atom.symbol)));
        }
    }
    Ok(db)
}

/// Writes base values, comma separated. Every column of a relation carries a
/// single rank, so dropping ranks loses nothing within one relation.
pub fn write_relation(path: &Path, rel: &Relation) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for row in rel.rows() {
        if row.is_empty() {
            writeln!(out, "()")?;
            continue;
        }
        let cells: Vec<String> = row.iter().map(|v| v.base.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

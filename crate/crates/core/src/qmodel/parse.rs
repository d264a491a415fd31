//! Query-file parser.
//!
//! ```text
//! # comment
//! Q(x0,x1,x2,y) :- R0(x0), R1(x1,y), R2(x2,y).
//! PREDICATE x0 <= MIN(x1,x2).
//! ORDER BY MIN(x1,x2).
//! ```

use super::{Atom, ConjunctiveQuery, Direction, MinPredicate, Ranking, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ParsedQuery {
    pub query: ConjunctiveQuery,
    pub predicate: Option<MinPredicate>,
    pub ranking: Option<Ranking>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Turnstile,
    Le,
    Lt,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, column) = (lineno + 1, i + 1);
            let err = |message: String| Error::Parse {
                line,
                column,
                message,
            };
            let push = |tok, out: &mut Vec<Token>| out.push(Token { tok, line, column });
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '(' => {
                    push(Tok::LParen, &mut out);
                    i += 1;
                }
                ')' => {
                    push(Tok::RParen, &mut out);
                    i += 1;
                }
                ',' => {
                    push(Tok::Comma, &mut out);
                    i += 1;
                }
                '.' => {
                    push(Tok::Dot, &mut out);
                    i += 1;
                }
                ':' => {
                    if chars.get(i + 1) != Some(&'-') {
                        return Err(err("expected ':-'".into()));
                    }
                    push(Tok::Turnstile, &mut out);
                    i += 2;
                }
                '<' => {
                    if chars.get(i + 1) == Some(&'=') {
                        push(Tok::Le, &mut out);
                        i += 2;
                    } else {
                        push(Tok::Lt, &mut out);
                        i += 1;
                    }
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                        i += 1;
                    }
                    push(Tok::Ident(chars[start..i].iter().collect()), &mut out);
                }
                other => return Err(err(format!("unexpected character '{other}'"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    names: Vec<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error(format!("expected {kw}")),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn intern(&mut self, name: String) -> Var {
        match self.names.iter().position(|n| *n == name) {
            Some(i) => Var(i as u32),
            None => {
                self.names.push(name);
                Var((self.names.len() - 1) as u32)
            }
        }
    }

    /// `( name, name, ... )`, possibly empty.
    fn name_list(&mut self) -> Result<Vec<(String, (usize, usize))>> {
        self.expect(Tok::LParen, "'('")?;
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            let at = self.here();
            out.push((self.ident("a variable")?, at));
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RParen) => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.error("expected ',' or ')'"),
            }
        }
    }

    /// Resolves names that must already occur in the body.
    fn bound(&self, names: &[(String, (usize, usize))], context: &str) -> Result<Vec<Var>> {
        names
            .iter()
            .map(|(n, (line, column))| match self.names.iter().position(|m| m == n) {
                Some(i) => Ok(Var(i as u32)),
                None => Err(Error::Parse {
                    line: *line,
                    column: *column,
                    message: format!("{context} variable {n} does not occur in the body"),
                }),
            })
            .collect()
    }

    fn min_list(&mut self) -> Result<Vec<(String, (usize, usize))>> {
        let dir_at = self.here();
        let list = self.name_list()?;
        if list.is_empty() {
            let (line, column) = dir_at;
            return Err(Error::Parse {
                line,
                column,
                message: "MIN()/MAX() needs at least one variable".into(),
            });
        }
        Ok(list)
    }
}

/// Parses a query file: one rule, then optional `PREDICATE` and `ORDER BY` statements.
pub fn parse_query(text: &str) -> Result<ParsedQuery> {
    let toks = lex(text)?;
    let end = toks.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
    let mut p = Parser {
        toks,
        pos: 0,
        end,
        names: Vec::new(),
    };

    let head = p.ident("a query head")?;
    let head_vars = p.name_list()?;
    p.expect(Tok::Turnstile, "':-'")?;
    let mut atoms = Vec::new();
    let mut arities: Vec<(String, usize)> = Vec::new();
    loop {
        let at = p.here();
        let symbol = p.ident("a relation symbol")?;
        let vars: Vec<Var> = p.name_list()?.into_iter().map(|(n, _)| p.intern(n)).collect();
        match arities.iter().find(|(s, _)| *s == symbol) {
            Some((_, a)) if *a != vars.len() => {
                return Err(Error::Parse {
                    line: at.0,
                    column: at.1,
                    message: format!("relation {symbol} is used with arities {a} and {}", vars.len()),
                })
            }
            Some(_) => {}
            None => arities.push((symbol.clone(), vars.len())),
        }
        atoms.push(Atom::new(symbol, vars));
        match p.peek() {
            Some(Tok::Comma) => p.pos += 1,
            Some(Tok::Dot) => {
                p.pos += 1;
                break;
            }
            _ => return p.error("expected ',' or '.' after an atom"),
        }
    }
    let free = p.bound(&head_vars, "head")?;

    let mut predicate = None;
    let mut ranking = None;
    while p.peek().is_some() {
        if p.at_keyword("PREDICATE") {
            if predicate.is_some() {
                return p.error("only one PREDICATE is supported");
            }
            p.pos += 1;
            let x0_at = p.here();
            let x0 = p.ident("a variable")?;
            let strict = match p.peek() {
                Some(Tok::Le) => false,
                Some(Tok::Lt) => true,
                _ => return p.error("expected '<=' or '<'"),
            };
            p.pos += 1;
            p.keyword("MIN")?;
            let set = p.min_list()?;
            p.expect(Tok::Dot, "'.'")?;
            let x0 = p.bound(&[(x0, x0_at)], "predicate")?[0];
            let set = p.bound(&set, "predicate")?;
            let pred = MinPredicate::new(x0, set, strict).map_err(|e| Error::Parse {
                line: x0_at.0,
                column: x0_at.1,
                message: e.to_string(),
            })?;
            predicate = Some(pred);
        } else if p.at_keyword("ORDER") {
            if ranking.is_some() {
                return p.error("only one ORDER BY is supported");
            }
            p.pos += 1;
            p.keyword("BY")?;
            let direction = if p.at_keyword("MIN") {
                Direction::Min
            } else if p.at_keyword("MAX") {
                Direction::Max
            } else {
                return p.error("expected MIN or MAX");
            };
            p.pos += 1;
            let vars = p.min_list()?;
            p.expect(Tok::Dot, "'.'")?;
            let vars = p.bound(&vars, "ranking")?;
            ranking = Some(Ranking { direction, vars });
        } else {
            return p.error("expected PREDICATE or ORDER BY");
        }
    }

    let query = ConjunctiveQuery::new(head, p.names, atoms, free).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    Ok(ParsedQuery {
        query,
        predicate,
        ranking,
    })
}

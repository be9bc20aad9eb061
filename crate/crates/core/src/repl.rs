//! Line-oriented session shell. Each command prints one JSON line, the same
//! payload the HTTP API returns for the matching route.

use std::io::{BufRead, Write};

use serde_json::{json, Value};

use crate::problem::{syntax_error, Problem};
use crate::session::{ApiError, ApiResult, Session};

pub const HELP: &str = "\
commands:
  assert {\"lhs\": EXPR, \"rhs\": EXPR, \"given\": [STATE...]}
  query {\"kind\": \"bounds\" | \"prob\" | \"pair\" | \"check\" | \"precluded\", ...}
  check | pair            shorthand queries
  undo                    drop the last accepted assertion
  state                   session state and log
  region                  dual vertices and pair samples (2 states, 3 consequences)
  export [PATH]           write the current problem file
  load PATH               start over from a problem file
  help | quit";

fn json_arg(rest: &str) -> ApiResult<Value> {
    serde_json::from_str(rest).map_err(|e| syntax_error("input", &e).into())
}

fn load(path: &str) -> ApiResult<Problem> {
    Ok(Problem::from_path(std::path::Path::new(path))?)
}

fn print(out: &mut impl Write, result: &ApiResult) -> std::io::Result<()> {
    let v = match result {
        Ok(v) => v.clone(),
        Err(e) => e.payload(),
    };
    writeln!(out, "{v}")
}

/// Run one command; `None` means quit.
pub fn step(session: &mut Option<Session>, line: &str) -> Option<ApiResult> {
    let line = line.trim();
    let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match verb {
        "quit" | "exit" => return None,
        "help" => return Some(Ok(json!({ "help": HELP }))),
        "load" => {
            return Some(load(rest).map(|p| {
                let s = Session::new("repl", p);
                let state = s.state();
                *session = Some(s);
                state
            }))
        }
        _ => {}
    }
    let Some(session) = session.as_mut() else {
        return Some(Err(ApiError::new("parse", "load a problem file first: `load PATH`")));
    };
    let result = match verb {
        "assert" => json_arg(rest).and_then(|v| session.assert(&v)),
        "query" => json_arg(rest).and_then(|v| session.query(&v)),
        "check" | "pair" => session.query(&json!({ "kind": verb })),
        "undo" => Ok(session.undo()),
        "state" => Ok(session.state()),
        "region" => session.region(),
        "export" if rest.is_empty() => {
            Ok(serde_json::to_value(session.problem().to_file()).expect("problem files serialize"))
        }
        "export" => std::fs::write(rest, session.problem().to_json_pretty() + "\n")
            .map(|()| json!({ "exported": rest }))
            .map_err(|e| ApiError::new("io", e.to_string())),
        other => Err(ApiError::new("parse", format!("unknown command `{other}`; try `help`"))),
    };
    Some(result)
}

/// Read commands until end of input or `quit`.
pub fn run(problem: Option<Problem>, input: impl BufRead, mut out: impl Write) -> std::io::Result<()> {
    let mut session = problem.map(|p| Session::new("repl", p));
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        match step(&mut session, &line) {
            Some(result) => print(&mut out, &result)?,
            None => break,
        }
        out.flush()?;
    }
    Ok(())
}

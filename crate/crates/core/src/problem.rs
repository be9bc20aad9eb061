//! JSON problem files: a space, a preference basis and optional named lotteries.
//!
//! Expression nodes are single-key objects:
//! `{"matrix": [["1/2", ...], ...]}`, `{"const": "c2"}`, `{"chance": "0.3"}`,
//! `{"event": ["s1"]}`, `{"mix": [{"w": "1/2", "of": expr}, ...]}` and
//! `{"given": {"event": ["s1"], "then": expr}}`. A string `"@name"` refers to
//! an entry of the file's `lotteries` map.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{eval_expr, EventSet, LotteryExpr};
use crate::error::{Error, Result};
use crate::model::{Assessment, Lottery, Preference, Space};
use crate::rat::{format_rat, parse_rat, Rat};

/// The on-disk layout, with expressions left as raw JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub states: Vec<String>,
    pub consequences: Vec<String>,
    #[serde(default)]
    pub preferences: Vec<PreferenceSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lotteries: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceSpec {
    pub lhs: Value,
    pub rhs: Value,
}

/// A parsed problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub assessment: Assessment,
    pub lotteries: BTreeMap<String, LotteryExpr>,
}

fn at(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{path}: {msg}"))
}

fn rat_at(v: &Value, path: &str) -> Result<Rat> {
    match v {
        Value::String(s) => parse_rat(s).map_err(|e| at(path, e)),
        Value::Number(n) => parse_rat(&n.to_string()).map_err(|e| at(path, e)),
        _ => Err(at(path, "expected a rational such as \"4/9\" or \"0.1\"")),
    }
}

fn labels_at(v: &Value, path: &str) -> Result<Vec<String>> {
    let items = v.as_array().ok_or_else(|| at(path, "expected a list of labels"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, x)| x.as_str().map(str::to_string).ok_or_else(|| at(&format!("{path}[{i}]"), "expected a label")))
        .collect()
}

/// Decode one expression node; `@name` strings are looked up in `named`.
pub fn expr_from_json(v: &Value, named: &BTreeMap<String, LotteryExpr>, path: &str) -> Result<LotteryExpr> {
    if let Value::String(s) = v {
        let name = s
            .strip_prefix('@')
            .ok_or_else(|| at(path, format!("bare string `{s}`; use {{\"const\": \"{s}\"}} or @name")))?;
        return named.get(name).cloned().ok_or_else(|| at(path, format!("unknown lottery `@{name}`")));
    }
    let obj = v.as_object().ok_or_else(|| at(path, "expected an expression object"))?;
    if obj.len() != 1 {
        return Err(at(path, "an expression has exactly one key"));
    }
    let (key, body) = obj.iter().next().expect("one key");
    let here = format!("{path}.{key}");
    match key.as_str() {
        "matrix" => {
            let rows = body.as_array().ok_or_else(|| at(&here, "expected a list of rows"))?;
            let m = rows
                .iter()
                .enumerate()
                .map(|(s, row)| {
                    let row_path = format!("{here}[{s}]");
                    row.as_array()
                        .ok_or_else(|| at(&row_path, "expected a row"))?
                        .iter()
                        .enumerate()
                        .map(|(c, x)| rat_at(x, &format!("{row_path}[{c}]")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LotteryExpr::Matrix(m))
        }
        "const" => body.as_str().map(LotteryExpr::constant).ok_or_else(|| at(&here, "expected a consequence label")),
        "chance" => Ok(LotteryExpr::chance(rat_at(body, &here)?)),
        "event" => Ok(LotteryExpr::Event(labels_at(body, &here)?)),
        "mix" => {
            let terms = body.as_array().ok_or_else(|| at(&here, "expected a list of {w, of} terms"))?;
            let terms = terms
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let tp = format!("{here}[{i}]");
                    let w = t.get("w").ok_or_else(|| at(&tp, "missing `w`"))?;
                    let of = t.get("of").ok_or_else(|| at(&tp, "missing `of`"))?;
                    Ok((rat_at(w, &format!("{tp}.w"))?, expr_from_json(of, named, &format!("{tp}.of"))?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LotteryExpr::mix(terms))
        }
        "given" => {
            let event = body.get("event").ok_or_else(|| at(&here, "missing `event`"))?;
            let then = body.get("then").ok_or_else(|| at(&here, "missing `then`"))?;
            Ok(LotteryExpr::Given(
                labels_at(event, &format!("{here}.event"))?,
                Box::new(expr_from_json(then, named, &format!("{here}.then"))?),
            ))
        }
        other => Err(at(path, format!("unknown expression kind `{other}`"))),
    }
}

pub fn expr_to_json(e: &LotteryExpr) -> Value {
    match e {
        LotteryExpr::Matrix(m) => {
            let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(format_rat).collect()).collect();
            json!({ "matrix": rows })
        }
        LotteryExpr::Const(c) => json!({ "const": c }),
        LotteryExpr::Chance(p) => json!({ "chance": format_rat(p) }),
        LotteryExpr::Event(labels) => json!({ "event": labels }),
        LotteryExpr::Mix(terms) => {
            let terms: Vec<Value> =
                terms.iter().map(|(w, x)| json!({ "w": format_rat(w), "of": expr_to_json(x) })).collect();
            json!({ "mix": terms })
        }
        LotteryExpr::Given(labels, then) => {
            json!({ "given": { "event": labels, "then": expr_to_json(then) } })
        }
    }
}

/// Turn a serde_json syntax error into a parse error carrying its location.
pub fn syntax_error(origin: &str, e: &serde_json::Error) -> Error {
    Error::Parse(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
}

impl Problem {
    pub fn new(assessment: Assessment) -> Self {
        Self { assessment, lotteries: BTreeMap::new() }
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        let space = Space::new(file.states.clone(), file.consequences.clone())?;
        let mut lotteries = BTreeMap::new();
        for (name, v) in &file.lotteries {
            let path = format!("lotteries.{name}");
            let e = expr_from_json(v, &BTreeMap::new(), &path)?;
            eval_expr(&e, &space).map_err(|err| at(&path, err))?;
            lotteries.insert(name.clone(), e);
        }
        let mut basis = Vec::with_capacity(file.preferences.len());
        for (i, p) in file.preferences.iter().enumerate() {
            let path = format!("preferences[{i}]");
            let lhs = expr_from_json(&p.lhs, &lotteries, &format!("{path}.lhs"))?;
            let rhs = expr_from_json(&p.rhs, &lotteries, &format!("{path}.rhs"))?;
            let pref = Preference::new(lhs, rhs);
            pref.direction(&space).map_err(|err| at(&path, err))?;
            basis.push(pref);
        }
        Ok(Self { assessment: Assessment::new(space, basis)?, lotteries })
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| syntax_error(origin, &e))?;
        Self::from_file(&file)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn space(&self) -> &Space {
        self.assessment.space()
    }

    pub fn to_file(&self) -> ProblemFile {
        let space = self.space();
        ProblemFile {
            states: space.states().to_vec(),
            consequences: space.consequences().to_vec(),
            preferences: self
                .assessment
                .basis()
                .iter()
                .map(|p| PreferenceSpec { lhs: expr_to_json(&p.lhs), rhs: expr_to_json(&p.rhs) })
                .collect(),
            lotteries: self.lotteries.iter().map(|(k, e)| (k.clone(), expr_to_json(e))).collect(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem files serialize")
    }

    pub fn expr(&self, v: &Value, path: &str) -> Result<LotteryExpr> {
        expr_from_json(v, &self.lotteries, path)
    }

    /// A command-line expression: `@name` or inline JSON.
    pub fn expr_arg(&self, text: &str) -> Result<LotteryExpr> {
        let text = text.trim();
        let v = if text.starts_with('@') {
            Value::String(text.to_string())
        } else {
            serde_json::from_str(text).map_err(|e| syntax_error("expression", &e))?
        };
        self.expr(&v, "expression")
    }

    pub fn lottery(&self, e: &LotteryExpr) -> Result<Lottery> {
        eval_expr(e, self.space())
    }
}

/// An event argument: a JSON list of labels or a comma-separated list.
pub fn event_arg(space: &Space, text: &str) -> Result<EventSet> {
    let text = text.trim();
    let labels: Vec<String> = if text.starts_with('[') {
        let v: Value = serde_json::from_str(text).map_err(|e| syntax_error("event", &e))?;
        labels_at(&v, "event")?
    } else {
        text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    event_from_labels(space, &labels)
}

pub fn event_from_labels(space: &Space, labels: &[String]) -> Result<EventSet> {
    let e = EventSet::from_labels(space, labels)?;
    if e.is_empty() {
        return Err(Error::EmptyEvent);
    }
    Ok(e)
}

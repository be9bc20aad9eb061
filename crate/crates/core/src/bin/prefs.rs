use std::io::{self, BufReader, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use incpref::a6star::Level;
use incpref::problem::{event_arg, syntax_error, Problem};
use incpref::session::{answer, ApiError, BoundsMode, Query};

#[derive(Parser)]
#[command(name = "prefs", version, about = "Bounds, coherence and preclusion for incomplete preferences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherence of the basis and existence of an agreeing probability/utility pair.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// An agreeing probability/utility pair, if any.
    Pair {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Lower and upper expected utility of a lottery.
    Bounds {
        file: PathBuf,
        /// Expression as JSON, or `@name` from the file's lotteries.
        #[arg(long)]
        target: String,
        /// Condition on an event: `s1,s2` or a JSON list.
        #[arg(long)]
        given: Option<String>,
        /// sdeu, sdeu-a6, pairs, or `a6star-iter N`.
        #[arg(long, num_args = 1..=2, default_value = "sdeu-a6")]
        mode: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Lower and upper probability of an event.
    Prob {
        file: PathBuf,
        #[arg(long)]
        event: String,
        #[arg(long, default_value = "sdeu-a6")]
        mode: String,
        #[arg(long)]
        json: bool,
    },
    /// Whether asserting `lhs ≿ rhs` would make the assessment incoherent.
    Precluded {
        file: PathBuf,
        #[arg(long)]
        lhs: String,
        #[arg(long)]
        rhs: String,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long)]
        json: bool,
    },
    /// Interactive session on standard input.
    Repl { file: Option<PathBuf> },
    /// HTTP session API on localhost.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        file: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    A5,
    A6,
}

fn parse_mode(words: &[String]) -> Result<(BoundsMode, Option<usize>), ApiError> {
    let bad = || ApiError::new("parse", format!("unknown mode `{}`", words.join(" ")));
    let mode: BoundsMode = serde_json::from_value(Value::String(words[0].clone())).map_err(|_| bad())?;
    match (mode, words.get(1)) {
        (BoundsMode::A6starIter, Some(n)) => Ok((mode, Some(n.parse().map_err(|_| bad())?))),
        (BoundsMode::A6starIter, None) => Ok((mode, Some(1))),
        (_, None) => Ok((mode, None)),
        _ => Err(bad()),
    }
}

fn expr_value(text: &str) -> Result<Value, ApiError> {
    let text = text.trim();
    if text.starts_with('@') {
        return Ok(Value::String(text.to_string()));
    }
    serde_json::from_str(text).map_err(|e| syntax_error("expression", &e).into())
}

fn labels(problem: &Problem, text: &str) -> Result<Vec<String>, ApiError> {
    Ok(event_arg(problem.space(), text)?.labels(problem.space()))
}

fn s(v: &Value) -> &str {
    v.as_str().unwrap_or("?")
}

fn list(v: &Value) -> String {
    let items: Vec<&str> = v.as_array().map(|a| a.iter().map(s).collect()).unwrap_or_default();
    format!("[{}]", items.join(", "))
}

fn witness(v: &Value) -> String {
    if let Some(m) = v.get("sdeu").and_then(Value::as_array) {
        let rows: Vec<String> = m.iter().map(list).collect();
        format!("s.d.e.u. [{}]", rows.join(", "))
    } else if let Some(p) = v.get("pair") {
        format!("pair p = {}, u = {}", list(&p["p"]), list(&p["u"]))
    } else {
        "none".into()
    }
}

fn bound_line(name: &str, b: &Value) -> String {
    if b["certified"] == Value::Bool(true) {
        format!("{name} = {} ({})", s(&b["value"]), s(&b["decimal"]))
    } else {
        format!("{name} ≈ {} (attained: {})", s(&b["decimal"]), s(&b["value"]))
    }
}

fn render(v: &Value) -> String {
    let mut out = Vec::new();
    match s(&v["kind"]) {
        "check" => {
            let a5 = v["a5"]["coherent"] == Value::Bool(true);
            if a5 {
                let pair = if v["pair"]["exists"] == Value::Bool(true) { "yes" } else { "no" };
                out.push(format!("A5: coherent; pair exists: {pair}"));
                out.push(format!("A5 witness: {}", witness(&v["a5"]["witness"])));
                if let Some(w) = v["pair"].get("witness") {
                    out.push(format!("pair witness: {}", witness(w)));
                }
            } else {
                out.push("A5: incoherent".into());
                out.push(format!("certificate: {}", v["a5"]["certificate"]));
            }
        }
        "pair" => match v.get("witness") {
            Some(w) => out.push(format!("pair exists: yes\n{}", witness(w))),
            None => out.push("pair exists: no".into()),
        },
        "bounds" => {
            out.push(bound_line("lower", &v["lower"]));
            out.push(bound_line("upper", &v["upper"]));
            out.push(format!("lower witness: {}", witness(&v["lower"]["witness"])));
            out.push(format!("upper witness: {}", witness(&v["upper"]["witness"])));
            if let Some(p) = v.get("propagation") {
                out.push(format!("propagation: {} rounds, certified: {}", p["rounds"], p["certified"]));
            }
            for r in v["rounds"].as_array().into_iter().flatten() {
                out.push(format!(
                    "round {}: lower = {}, upper = {}, added {}",
                    r["round"],
                    s(&r["lower"]),
                    s(&r["upper"]),
                    r["added"]
                ));
            }
        }
        "prob" => {
            out.push(format!("{} in [{}, {}]", list(&v["event"]), s(&v["lower"]["value"]), s(&v["upper"]["value"])));
            out.push(format!("≈ [{}, {}]", s(&v["lower"]["decimal"]), s(&v["upper"]["decimal"])));
        }
        "precluded" => {
            let yes = v["precluded"] == Value::Bool(true);
            out.push(format!("precluded at {}: {}", s(&v["level"]), if yes { "yes" } else { "no" }));
            if let Some(c) = v.get("certificate") {
                out.push(format!("certificate: {c}"));
            }
            if let Some(w) = v.get("support") {
                out.push(format!("support: {}", witness(w)));
            }
        }
        _ => out.push(v.to_string()),
    }
    out.join("\n")
}

/// Incoherence and missing pairs are verdicts, reported with status 1.
fn verdict_code(v: &Value) -> u8 {
    let failed = match s(&v["kind"]) {
        "check" => v["a5"]["coherent"] == Value::Bool(false) || v["pair"]["exists"] == Value::Bool(false),
        "pair" => v["exists"] == Value::Bool(false),
        _ => false,
    };
    u8::from(failed)
}

/// Print to stdout; a closed pipe is not an error worth reporting.
fn emit(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn load(file: &Path) -> Result<Problem, ApiError> {
    Ok(Problem::from_path(file)?)
}

fn batch(problem_file: &Path, json: bool, build: impl FnOnce(&Problem) -> Result<Query, ApiError>) -> ExitCode {
    let result = load(problem_file).and_then(|p| {
        let q = build(&p)?;
        answer(&p, &q)
    });
    match result {
        Ok(v) => {
            if json {
                emit(&v.to_string());
            } else {
                emit(&render(&v));
            }
            ExitCode::from(verdict_code(&v))
        }
        Err(e) => {
            if json {
                emit(&e.payload().to_string());
            }
            eprintln!("error: {}", e.message);
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file, json } => batch(&file, json, |_| Ok(Query::Check)),
        Command::Pair { file, json } => batch(&file, json, |_| Ok(Query::Pair)),
        Command::Bounds { file, target, given, mode, json } => batch(&file, json, |p| {
            let (mode, rounds) = parse_mode(&mode)?;
            let given = given.map(|g| labels(p, &g)).transpose()?;
            Ok(Query::Bounds { target: expr_value(&target)?, given, mode, rounds })
        }),
        Command::Prob { file, event, mode, json } => batch(&file, json, |p| {
            let (mode, _) = parse_mode(&[mode])?;
            Ok(Query::Prob { event: labels(p, &event)?, mode })
        }),
        Command::Precluded { file, lhs, rhs, level, json } => batch(&file, json, |_| {
            let level = match level {
                LevelArg::A5 => Level::A5,
                LevelArg::A6 => Level::A6,
            };
            Ok(Query::Precluded { lhs: expr_value(&lhs)?, rhs: expr_value(&rhs)?, level })
        }),
        Command::Repl { file } => {
            let problem = match file.as_deref().map(load).transpose() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {}", e.message);
                    return ExitCode::from(2);
                }
            };
            match incpref::repl::run(problem, BufReader::new(io::stdin()), io::stdout()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Serve { port, file } => {
            let problem = match file.as_deref().map(load).transpose() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {}", e.message);
                    return ExitCode::from(2);
                }
            };
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
            let served = runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                incpref::server::serve(listener, problem).await
            });
            match served {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}

//! The batch CLI, the REPL and the HTTP API against each other.

use std::io::Cursor;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use incpref::problem::Problem;
use incpref::representation::{build_dual, Mode};
use incpref::session::answer_json;

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("incpref-surfaces-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_problem(name: &str, v: &Value) -> String {
    let path = scratch(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_prefs")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap().trim_end().to_string())
}

fn repl(file: Option<&str>, lines: &[String]) -> Vec<String> {
    let problem = file.map(|f| Problem::from_path(Path::new(f)).unwrap());
    let mut out = Vec::new();
    incpref::repl::run(problem, Cursor::new(lines.join("\n")), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(str::to_string).collect()
}

fn parse(line: &str) -> Value {
    serde_json::from_str(line).unwrap()
}

async fn start() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(incpref::server::serve(listener, None));
    addr
}

/// One HTTP/1.1 exchange; returns the status and the raw body.
async fn http(addr: SocketAddr, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let request = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let raw = String::from_utf8(raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, body.to_string())
}

async fn session(addr: SocketAddr, file: &str) -> String {
    let (status, body) = http(addr, "POST", "/session", &std::fs::read_to_string(file).unwrap()).await;
    assert_eq!(status, 200, "{body}");
    parse(&body)["id"].as_str().unwrap().to_string()
}

fn sorted_vertices(p: &Problem) -> Vec<Vec<Vec<incpref::Rat>>> {
    let mut vs: Vec<_> = build_dual(&p.assessment, Mode::A6).vertices().into_iter().map(|v| v.v().clone()).collect();
    vs.sort();
    vs
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn batch_repl_and_http_payloads_are_identical() {
    let three = data("three_events.json");
    let segment = data("segment.json");
    let cases: Vec<(&str, Vec<&str>, Value)> = vec![
        (&three, vec!["prob", &three, "--event", "s2"], json!({"kind": "prob", "event": ["s2"]})),
        (&three, vec!["bounds", &three, "--target", "@X"], json!({"kind": "bounds", "target": "@X"})),
        (
            &three,
            vec!["bounds", &three, "--target", "@X", "--given", "s3", "--mode", "sdeu"],
            json!({"kind": "bounds", "target": "@X", "given": ["s3"], "mode": "sdeu"}),
        ),
        (
            &three,
            vec!["bounds", &three, "--target", "@X", "--mode", "a6star-iter", "2"],
            json!({"kind": "bounds", "target": "@X", "mode": "a6star-iter", "rounds": 2}),
        ),
        (
            &three,
            vec!["precluded", &three, "--lhs", r#"{"chance": "0.54"}"#, "--rhs", "@X", "--level", "a6"],
            json!({"kind": "precluded", "lhs": {"chance": "0.54"}, "rhs": "@X", "level": "a6"}),
        ),
        (&segment, vec!["check", &segment], json!({"kind": "check"})),
        (&segment, vec!["pair", &segment], json!({"kind": "pair"})),
        (
            &segment,
            vec!["bounds", &segment, "--target", r#"{"const": "c2"}"#, "--mode", "pairs"],
            json!({"kind": "bounds", "target": {"const": "c2"}, "mode": "pairs"}),
        ),
    ];
    let addr = start().await;
    for (file, mut args, query) in cases {
        args.push("--json");
        let (code, batch) = cli(&args);
        assert_eq!(code, 0, "{args:?}");
        let lines = repl(Some(file), &[format!("query {query}")]);
        assert_eq!(lines.len(), 1);
        let id = session(addr, file).await;
        let (status, body) = http(addr, "POST", &format!("/session/{id}/query"), &query.to_string()).await;
        assert_eq!(status, 200);
        assert_eq!(batch, lines[0], "batch vs repl for {query}");
        assert_eq!(batch, body, "batch vs http for {query}");
    }
}

#[test]
fn export_then_import_answers_the_same() {
    let out = scratch("exported.json");
    let out = out.to_str().unwrap();
    let queries = [
        json!({"kind": "prob", "event": ["s1"]}),
        json!({"kind": "bounds", "target": "@X"}),
        json!({"kind": "bounds", "target": "@X", "mode": "pairs"}),
    ];
    let mut lines =
        vec![r#"assert {"lhs": {"event": ["s1"]}, "rhs": {"chance": "1/5"}}"#.to_string(), format!("export {out}")];
    lines.extend(queries.iter().map(|q| format!("query {q}")));
    let replies = repl(Some(&data("three_events.json")), &lines);
    assert_eq!(parse(&replies[0])["accepted"], json!(true));
    let imported = Problem::from_path(Path::new(out)).unwrap();
    for (q, reply) in queries.iter().zip(&replies[2..]) {
        assert_eq!(answer_json(&imported, q).unwrap().to_string(), *reply);
    }
    let (_, batch) = cli(&["prob", out, "--event", "s1", "--json"]);
    assert_eq!(batch, replies[2]);
    assert_eq!(parse(&batch)["lower"]["value"], json!("1/5"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn undo_restores_the_vertex_set() {
    let addr = start().await;
    let id = session(addr, &data("segment.json")).await;
    let state = |body: String| Problem::from_file(&serde_json::from_value(parse(&body)["problem"].clone()).unwrap());
    let before = state(http(addr, "GET", &format!("/session/{id}/state"), "").await.1).unwrap();
    let assertion = json!({"lhs": {"const": "c2"}, "rhs": {"chance": "3/20"}});
    let (status, _) = http(addr, "POST", &format!("/session/{id}/assert"), &assertion.to_string()).await;
    assert_eq!(status, 200);
    let during = state(http(addr, "GET", &format!("/session/{id}/state"), "").await.1).unwrap();
    assert_ne!(sorted_vertices(&during), sorted_vertices(&before));
    let (_, undone) = http(addr, "POST", &format!("/session/{id}/undo"), "").await;
    assert_eq!(parse(&undone)["undone"], json!(true));
    let after = state(http(addr, "GET", &format!("/session/{id}/state"), "").await.1).unwrap();
    assert_eq!(sorted_vertices(&after), sorted_vertices(&before));
    assert_eq!(after, before);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn region_of_the_segment_marks_its_two_endpoint_pairs() {
    let addr = start().await;
    let id = session(addr, &data("segment.json")).await;
    let (status, body) = http(addr, "GET", &format!("/session/{id}/region"), "").await;
    assert_eq!(status, 200);
    let region = parse(&body);
    assert_eq!(region["vertices"].as_array().unwrap().len(), 2);
    assert_eq!(region["pairs"], json!([{"u": "1/10", "p": ["1/10", "1/10"]}, {"u": "2/5", "p": ["3/10", "3/10"]}]));

    let assertion = json!({"lhs": {"const": "c2"}, "rhs": {"chance": "3/20"}});
    http(addr, "POST", &format!("/session/{id}/assert"), &assertion.to_string()).await;
    let region = parse(&http(addr, "GET", &format!("/session/{id}/region"), "").await.1);
    assert_eq!(region["pairs"], json!([{"u": "2/5", "p": ["3/10", "3/10"]}]));

    let other = session(addr, &data("three_events.json")).await;
    let (status, body) = http(addr, "GET", &format!("/session/{other}/region"), "").await;
    assert_eq!(status, 422);
    assert_eq!(parse(&body)["error"]["code"], json!("region-unavailable"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn worst_over_best_is_rejected_with_a_certificate() {
    let addr = start().await;
    let id = session(addr, &data("segment.json")).await;
    let before = parse(&http(addr, "GET", &format!("/session/{id}/state"), "").await.1)["problem"].clone();
    let assertion = json!({"lhs": {"const": "c0"}, "rhs": {"const": "c1"}});
    let (status, body) = http(addr, "POST", &format!("/session/{id}/assert"), &assertion.to_string()).await;
    assert_eq!(status, 409);
    let reply = parse(&body);
    assert_eq!(reply["accepted"], json!(false));
    assert!(reply["certificate"].is_object());
    let state = parse(&http(addr, "GET", &format!("/session/{id}/state"), "").await.1);
    assert_eq!(state["problem"], before);
    assert_eq!(state["log"].as_array().unwrap().len(), 1);

    let (status, _) = http(addr, "POST", "/session/nope/query", r#"{"kind": "check"}"#).await;
    assert_eq!(status, 404);
    let (status, body) = http(addr, "POST", &format!("/session/{id}/query"), "{").await;
    assert_eq!((status, parse(&body)["error"]["code"].clone()), (400, json!("parse")));
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["check", &data("three_events.json")]).0, 0);

    let mut incoherent: Value = serde_json::from_str(&std::fs::read_to_string(data("segment.json")).unwrap()).unwrap();
    incoherent["preferences"] = json!([{"lhs": {"const": "c0"}, "rhs": {"const": "c1"}}]);
    let path = write_problem("incoherent.json", &incoherent);
    let (code, text) = cli(&["check", &path]);
    assert_eq!(code, 1);
    assert!(text.starts_with("A5: incoherent"), "{text}");

    let mut tight: Value = serde_json::from_str(&std::fs::read_to_string(data("segment.json")).unwrap()).unwrap();
    let prefs = tight["preferences"].as_array_mut().unwrap();
    prefs.push(json!({"lhs": {"const": "c2"}, "rhs": {"chance": "3/20"}}));
    prefs.push(json!({"lhs": {"chance": "7/20"}, "rhs": {"const": "c2"}}));
    let path = write_problem("tight.json", &tight);
    assert_eq!(cli(&["pair", &path]), (1, "pair exists: no".to_string()));
    assert_eq!(cli(&["check", &path]).0, 1);

    let empty = write_problem("empty.json", &json!({"states": ["s1", "s2"], "consequences": ["c0", "c1", "c2"]}));
    assert_eq!(cli(&["bounds", &empty, "--target", r#"{"const": "c2"}"#, "--given", "s1"]).0, 1);

    let broken = scratch("broken.json");
    std::fs::write(&broken, "{\"states\": [").unwrap();
    assert_eq!(cli(&["check", broken.to_str().unwrap()]).0, 2);
    assert_eq!(cli(&["bounds", &data("three_events.json"), "--target", "{nope"]).0, 2);
    assert_eq!(cli(&["prob", &data("three_events.json"), "--event", "s9"]).0, 2);
}

#[test]
fn human_readable_answers() {
    let three = data("three_events.json");
    assert_eq!(cli(&["prob", &three, "--event", "s2"]).1.lines().next(), Some("[s2] in [1/10, 4/9]"));
    assert_eq!(cli(&["prob", &three, "--event", "s1,s2,s3"]).1.lines().next(), Some("[s1, s2, s3] in [1, 1]"));
}

#[test]
fn replaying_the_three_events_assertions_reaches_the_pair_bound() {
    let file: Value = serde_json::from_str(&std::fs::read_to_string(data("three_events.json")).unwrap()).unwrap();
    let mut empty = file.clone();
    empty["preferences"] = json!([]);
    let start = write_problem("replay.json", &empty);
    let mut lines: Vec<String> =
        file["preferences"].as_array().unwrap().iter().map(|p| format!("assert {p}")).collect();
    lines.push(json!({"kind": "bounds", "target": "@X", "mode": "pairs"}).to_string());
    let last = lines.len() - 1;
    lines[last] = format!("query {}", lines[last]);
    let replies = repl(Some(&start), &lines);
    for r in &replies[..last] {
        assert_eq!(parse(r)["accepted"], json!(true), "{r}");
    }
    assert_eq!(parse(&replies[last])["lower"]["decimal"], json!("0.564314"));
}

#[test]
fn asserting_a_probability_floor_shows_up_in_the_headline() {
    let empty = write_problem("floor.json", &json!({"states": ["s1", "s2", "s3"], "consequences": ["c0", "c1", "c2"]}));
    let replies = repl(
        Some(&empty),
        &[
            r#"assert {"lhs": {"event": ["s1"]}, "rhs": {"chance": "0.1"}}"#.to_string(),
            r#"query {"kind": "prob", "event": ["s1"]}"#.to_string(),
            r#"assert {"lhs": {"const": "c0"}, "rhs": {"const": "c1"}}"#.to_string(),
        ],
    );
    assert_eq!(parse(&replies[0])["headline"]["prob"][0]["lower"], json!("1/10"));
    assert_eq!(parse(&replies[1])["lower"]["value"], json!("1/10"));
    let rejected = parse(&replies[2]);
    assert_eq!(rejected["accepted"], json!(false));
    assert!(rejected["certificate"].is_object());
}

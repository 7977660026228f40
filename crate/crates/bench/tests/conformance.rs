//! One environment conformance suite, run against the simulator directly,
//! against a bridge client talking to an in-process server, and against a
//! `sim-serve` subprocess.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use step_bench::bridge::{serve, BridgeEnv};
use step_core::action::ActionCommand;
use step_core::env::{EnvError, Environment, StepOutcome};
use step_core::world::TextWorld;

const TASK: &str = "temp-measure";

/// Reaches the living room and focuses on a box outside the whitelist.
const FATAL_RUN: [&str; 5] = ["look around", "go to kitchen", "pick up thermometer", "go to hallway", "go to living room"];
const FATAL_ACTION: &str = "focus on green box";

fn world() -> TextWorld {
    static WORLD: OnceLock<TextWorld> = OnceLock::new();
    WORLD.get_or_init(|| TextWorld::new(step_bench::worlds::bundled().unwrap())).clone()
}

fn parse(text: &str) -> ActionCommand {
    world().parse_action(text).unwrap()
}

/// Everything the suite observed, for comparison across implementations.
#[derive(Debug, PartialEq)]
struct Transcript {
    openings: Vec<String>,
    outcomes: Vec<StepOutcome>,
}

fn suite(env: &mut dyn Environment) -> Transcript {
    assert!(matches!(env.step(&parse("look around")), Err(EnvError::NotReset)));

    let first = env.reset(TASK, 0).unwrap();
    let again = env.reset(TASK, 0).unwrap();
    assert_eq!(first, again, "reset is not deterministic");
    let mut openings = vec![first];
    for seed in [1, 2, 7] {
        let a = env.reset(TASK, seed).unwrap();
        assert_eq!(a, env.reset(TASK, seed).unwrap(), "seed {seed}");
        openings.push(a);
    }

    env.reset(TASK, 0).unwrap();
    let mut outcomes = Vec::new();
    for a in FATAL_RUN {
        let o = env.step(&parse(a)).unwrap();
        assert!(!o.terminal, "{a} ended the episode");
        assert!(o.score >= 0);
        outcomes.push(o);
    }
    let fatal = env.step(&parse(FATAL_ACTION)).unwrap();
    assert!(fatal.fatal && fatal.terminal, "fatal step must be terminal: {fatal:?}");
    outcomes.push(fatal);
    assert!(matches!(env.step(&parse("look around")), Err(EnvError::EpisodeOver)));

    assert!(env.reset("no-such-task", 0).is_err());
    env.reset(TASK, 0).unwrap();
    let o = env.step(&parse("go to kitchen")).unwrap();
    assert_eq!(o, outcomes[1], "a fresh episode replays the same outcome");
    Transcript { openings, outcomes }
}

#[test]
fn simulator_conforms() {
    suite(&mut world());
}

/// Counts newline-terminated lines passing through.
struct LineCount<T> {
    inner: T,
    lines: Arc<AtomicUsize>,
}

impl<T: Write> Write for LineCount<T> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.lines.fetch_add(buf[..n].iter().filter(|b| **b == b'\n').count(), Ordering::SeqCst);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

#[test]
fn in_process_bridge_conforms_with_one_reply_per_request() {
    let (req_read, req_write) = std::io::pipe().unwrap();
    let (rep_read, rep_write) = std::io::pipe().unwrap();
    let requests = Arc::new(AtomicUsize::new(0));
    let replies = Arc::new(AtomicUsize::new(0));
    let server_replies = replies.clone();
    let server = std::thread::spawn(move || {
        let out = LineCount { inner: rep_write, lines: server_replies };
        serve(&mut world(), BufReader::new(req_read), out).unwrap();
    });
    let mut env = BridgeEnv::from_streams(BufReader::new(rep_read), LineCount { inner: req_write, lines: requests.clone() });
    let bridged = suite(&mut env);
    drop(env);
    server.join().unwrap();
    assert!(requests.load(Ordering::SeqCst) > 0);
    assert_eq!(requests.load(Ordering::SeqCst), replies.load(Ordering::SeqCst));
    assert_eq!(bridged, suite(&mut world()), "bridge and simulator disagree");
}

fn sim_serve() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_step-bench").to_owned(), "sim-serve".to_owned()]
}

#[test]
fn subprocess_bridge_conforms() {
    let mut env = BridgeEnv::spawn(&sim_serve()).unwrap();
    let bridged = suite(&mut env);
    env.close().unwrap();
    assert_eq!(bridged, suite(&mut world()));
}

#[test]
fn subprocess_answers_every_request_once_including_bad_ones() {
    let mut child = Command::new(&sim_serve()[0]).arg("sim-serve").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let requests = [
        r#"{"op":"reset","task_id":"temp-measure","variation":0}"#,
        r#"{"op":"step","action":"go to kitchen"}"#,
        r#"{"op":"step","action":"xyzzy plover"}"#,
        r#"not json"#,
        r#"{"op":"step","action":"look around"}"#,
    ];
    let mut stdin = child.stdin.take().unwrap();
    for r in requests {
        writeln!(stdin, "{r}").unwrap();
    }
    drop(stdin);
    let mut out = String::new();
    child.stdout.take().unwrap().read_to_string(&mut out).unwrap();
    assert!(child.wait().unwrap().success());
    let replies: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(replies.len(), requests.len());
    assert!(replies[1]["observation"].as_str().unwrap().contains("kitchen"));
    assert!(replies[2]["error"].is_string());
    assert!(replies[3]["error"].is_string());
    assert!(replies[4]["error"].is_null());
    for r in &replies {
        for key in ["observation", "score", "terminal", "fatal"] {
            assert!(r.get(key).is_some(), "reply {r} lacks {key}");
        }
    }
}

#[test]
fn close_request_ends_the_server() {
    let mut child = Command::new(&sim_serve()[0]).arg("sim-serve").stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    writeln!(stdin, r#"{{"op":"close"}}"#).unwrap();
    let status = child.wait().unwrap();
    assert!(status.success());
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    assert!(lines.next().is_none());
}

//! Line-delimited JSON bridge to an out-of-process environment.
//!
//! Each request is one JSON object on its own line; each reply is one
//! line back. The client side is [`BridgeEnv`]; [`serve`] answers the same
//! protocol from the built-in simulator.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};
use step_core::action::ActionCommand;
use step_core::env::{EnvError, Environment, StepOutcome};
use step_core::world::TextWorld;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BridgeRequest {
    Reset { task_id: String, variation: u64 },
    Step { action: String },
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeReply {
    #[serde(default)]
    pub observation: String,
    #[serde(default)]
    pub score: i32,
    #[serde(default)]
    pub terminal: bool,
    #[serde(default)]
    pub fatal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BridgeReply {
    fn ok(outcome: StepOutcome) -> Self {
        BridgeReply { observation: outcome.observation, score: outcome.score, terminal: outcome.terminal, fatal: outcome.fatal, error: None }
    }

    fn error(message: String) -> Self {
        BridgeReply { observation: String::new(), score: 0, terminal: false, fatal: false, error: Some(message) }
    }

    /// A fatal step always ends the episode, and a negative score is the
    /// remote side's way of signalling one.
    fn into_outcome(self) -> StepOutcome {
        let fatal = self.fatal || self.score < 0;
        StepOutcome { observation: self.observation, score: if fatal { 0 } else { self.score }, terminal: self.terminal || fatal, fatal }
    }
}

/// Client end of the bridge.
pub struct BridgeEnv {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    episode_over: Option<bool>,
}

impl BridgeEnv {
    pub fn from_streams(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        BridgeEnv { reader: Box::new(reader), writer: Box::new(writer), child: None, episode_over: None }
    }

    /// Starts `command[0]` with the remaining items as arguments.
    pub fn spawn(command: &[String]) -> std::io::Result<Self> {
        let (program, args) = command.split_first().ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty bridge command"))?;
        let mut child = Command::new(program).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut env = Self::from_streams(BufReader::new(stdout), stdin);
        env.child = Some(child);
        Ok(env)
    }

    fn call(&mut self, request: &BridgeRequest) -> Result<BridgeReply, EnvError> {
        let protocol = |what: &str, e: &dyn std::fmt::Display| EnvError::Protocol(format!("{what}: {e}"));
        let mut line = serde_json::to_string(request).map_err(|e| protocol("encoding request", &e))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(|e| protocol("writing request", &e))?;
        self.writer.flush().map_err(|e| protocol("writing request", &e))?;
        let mut reply = String::new();
        let n = self.reader.read_line(&mut reply).map_err(|e| protocol("reading reply", &e))?;
        if n == 0 {
            return Err(EnvError::Protocol("bridge closed the connection".into()));
        }
        let reply: BridgeReply = serde_json::from_str(reply.trim_end()).map_err(|e| protocol("malformed reply", &e))?;
        match reply.error {
            Some(message) => Err(EnvError::Protocol(message)),
            None => Ok(reply),
        }
    }

    /// Tells the remote side to exit and waits for it.
    pub fn close(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(mut child) = self.child.take() {
            let _ = self.call(&BridgeRequest::Close);
            child.wait()?;
        }
        Ok(())
    }
}

impl Drop for BridgeEnv {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

impl Environment for BridgeEnv {
    fn reset(&mut self, task_id: &str, variation_seed: u64) -> Result<String, EnvError> {
        let reply = self.call(&BridgeRequest::Reset { task_id: task_id.to_owned(), variation: variation_seed })?;
        self.episode_over = Some(false);
        Ok(reply.observation)
    }

    fn step(&mut self, action: &ActionCommand) -> Result<StepOutcome, EnvError> {
        match self.episode_over {
            None => return Err(EnvError::NotReset),
            Some(true) => return Err(EnvError::EpisodeOver),
            Some(false) => {}
        }
        let outcome = self.call(&BridgeRequest::Step { action: action.raw.clone() })?.into_outcome();
        self.episode_over = Some(outcome.terminal);
        Ok(outcome)
    }
}

/// Answers bridge requests from `world` until `close` or end of input.
pub fn serve(world: &mut TextWorld, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<BridgeRequest>(&line) {
            Err(e) => BridgeReply::error(format!("bad request: {e}")),
            Ok(BridgeRequest::Close) => break,
            Ok(BridgeRequest::Reset { task_id, variation }) => match world.reset(&task_id, variation) {
                Ok(observation) => BridgeReply::ok(StepOutcome { observation, score: 0, terminal: false, fatal: false }),
                Err(e) => BridgeReply::error(e.to_string()),
            },
            Ok(BridgeRequest::Step { action }) => match world.parse_action(&action) {
                Err(e) => BridgeReply::error(format!("unparseable action \"{action}\": {e}")),
                Ok(cmd) => match world.step(&cmd) {
                    Ok(outcome) => BridgeReply::ok(outcome),
                    Err(e) => BridgeReply::error(e.to_string()),
                },
            },
        };
        let mut text = serde_json::to_string(&reply).expect("reply serializes");
        text.push('\n');
        output.write_all(text.as_bytes())?;
        output.flush()?;
    }
    Ok(())
}

//! External agents over JSON: one line per message on a subprocess's stdio, or HTTP POST.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, AgentFactory, EpisodeContext, Mode, Outcome};
use crate::text::{parse_environment, PromptText};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
const ATTEMPTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Endpoint URL; `/act` is appended when the URL has no path.
    Http {
        url: String,
    },
    Stdio {
        program: String,
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeConfig {
    pub transport: Transport,
    /// Per-turn limit; a turn gets one retry before the episode aborts.
    pub timeout: Duration,
}

impl FromStr for BridgeConfig {
    type Err = String;
    /// `stdio:PROGRAM [ARGS..]` or an `http://` URL.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let transport = if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut words = cmd.split_whitespace().map(str::to_string);
            let program = words.next().ok_or("stdio bridge needs a command")?;
            Transport::Stdio {
                program,
                args: words.collect(),
            }
        } else if s.starts_with("http://") || s.starts_with("https://") {
            let rest = s.split_once("://").map(|(_, r)| r).unwrap_or("");
            let url = match rest.find('/') {
                Some(i) if rest.len() > i + 1 => s.to_string(),
                _ => format!("{}/act", s.trim_end_matches('/')),
            };
            Transport::Http { url }
        } else {
            return Err(format!(
                "bridge target {s:?} is neither stdio:COMMAND nor an http URL"
            ));
        };
        Ok(BridgeConfig {
            transport,
            timeout: DEFAULT_TIMEOUT,
        })
    }
}

#[derive(Serialize)]
struct Request<'a> {
    session: &'a str,
    messages: &'a [PromptText],
}

#[derive(Serialize)]
struct EndNotice<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    session: &'a str,
    outcome: Outcome,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

fn decode(body: &str) -> Result<String, AgentError> {
    serde_json::from_str::<Reply>(body)
        .map(|r| r.text)
        .map_err(|e| AgentError::Protocol(format!("malformed reply {:?}: {e}", truncate(body))))
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(120) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

struct StdioConn {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

enum Conn {
    Http { agent: ureq::Agent, url: String },
    Stdio(StdioConn),
}

/// A remote agent session. Sessions open implicitly on the first turn and
/// receive an end notice when the episode closes.
pub struct BridgeAgent {
    session: String,
    timeout: Duration,
    conn: Conn,
}

impl BridgeAgent {
    pub fn connect(config: &BridgeConfig, session: String) -> Result<Self, AgentError> {
        let conn = match &config.transport {
            Transport::Http { url } => {
                let agent = ureq::Agent::config_builder()
                    .timeout_global(Some(config.timeout))
                    .build()
                    .into();
                Conn::Http {
                    agent,
                    url: url.clone(),
                }
            }
            Transport::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| AgentError::Unavailable(format!("{program}: {e}")))?;
                let stdout = child.stdout.take().expect("stdout is piped");
                let stdin = child.stdin.take();
                let (tx, lines) = mpsc::channel();
                thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                });
                Conn::Stdio(StdioConn {
                    child,
                    stdin,
                    lines,
                })
            }
        };
        Ok(Self {
            session,
            timeout: config.timeout,
            conn,
        })
    }

    fn http_send(agent: &ureq::Agent, url: &str, body: &str) -> Result<String, AgentError> {
        let mut last = AgentError::Timeout(ATTEMPTS);
        for _ in 0..ATTEMPTS {
            let sent = agent
                .post(url)
                .header("content-type", "application/json")
                .send(body);
            match sent {
                Ok(mut resp) => {
                    return resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| AgentError::Transport(e.to_string()));
                }
                Err(ureq::Error::StatusCode(code)) => {
                    return Err(AgentError::Transport(format!("{url} answered HTTP {code}")));
                }
                Err(ureq::Error::Timeout(_)) => last = AgentError::Timeout(ATTEMPTS),
                Err(e) => last = AgentError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}

impl StdioConn {
    fn write_line(&mut self, line: &str) -> Result<(), AgentError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| AgentError::Transport("agent stdin closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| AgentError::Transport(format!("writing to agent: {e}")))
    }

    /// Waits up to two timeout windows for the reply line; the request is not resent.
    fn read_line(&mut self, timeout: Duration) -> Result<String, AgentError> {
        for _ in 0..ATTEMPTS {
            match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => {
                    return Err(AgentError::Transport(format!("reading from agent: {e}")))
                }
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(AgentError::Transport("agent closed its output".into()));
                }
            }
        }
        Err(AgentError::Timeout(ATTEMPTS))
    }
}

impl Agent for BridgeAgent {
    fn respond(&mut self, messages: &[PromptText]) -> Result<String, AgentError> {
        let body = serde_json::to_string(&Request {
            session: &self.session,
            messages,
        })
        .map_err(|e| AgentError::Protocol(e.to_string()))?;
        let raw = match &mut self.conn {
            Conn::Http { agent, url } => Self::http_send(agent, url, &body)?,
            Conn::Stdio(conn) => {
                conn.write_line(&body)?;
                conn.read_line(self.timeout)?
            }
        };
        decode(&raw)
    }

    fn finish(&mut self, outcome: Outcome) {
        let notice = serde_json::to_string(&EndNotice {
            kind: "end",
            session: &self.session,
            outcome,
        })
        .expect("end notice serializes");
        match &mut self.conn {
            Conn::Http { agent, url } => {
                let _ = agent
                    .post(url.as_str())
                    .header("content-type", "application/json")
                    .send(&notice);
            }
            Conn::Stdio(conn) => {
                let _ = conn.write_line(&notice);
                conn.stdin.take();
            }
        }
    }
}

impl Drop for BridgeAgent {
    fn drop(&mut self) {
        if let Conn::Stdio(conn) = &mut self.conn {
            conn.stdin.take();
            // Give a well-behaved agent a moment to exit on EOF.
            for _ in 0..20 {
                if let Ok(Some(_)) = conn.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(5));
            }
            let _ = conn.child.kill();
            let _ = conn.child.wait();
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Incoming {
    End {
        #[serde(rename = "type")]
        _kind: String,
        session: String,
        outcome: Outcome,
    },
    Turn {
        session: String,
        messages: Vec<PromptText>,
    },
}

/// Numeric suffix of a session id, used as the record index for agent seeding.
fn session_index(session: &str) -> Option<u64> {
    let digits: String = session
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

/// Serves agents from `factory` over the JSON-lines protocol until `input` ends.
/// Each session's environment is rebuilt from its prompt. Returns the number of
/// sessions opened.
pub fn serve(
    input: impl BufRead,
    mut output: impl Write,
    factory: &dyn AgentFactory,
    mode: Mode,
    seed: u64,
) -> Result<usize, AgentError> {
    let mut sessions: HashMap<String, Box<dyn Agent>> = HashMap::new();
    let mut opened = 0;
    for line in input.lines() {
        let line = line.map_err(|e| AgentError::Transport(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: Incoming =
            serde_json::from_str(&line).map_err(|e| AgentError::Protocol(e.to_string()))?;
        let (session, messages) = match msg {
            Incoming::End {
                session, outcome, ..
            } => {
                if let Some(mut agent) = sessions.remove(&session) {
                    agent.finish(outcome);
                }
                continue;
            }
            Incoming::Turn { session, messages } => (session, messages),
        };
        if !sessions.contains_key(&session) {
            let spec = messages
                .iter()
                .find_map(|m| parse_environment(&m.text).ok())
                .ok_or_else(|| {
                    AgentError::Protocol(format!("session {session}: no environment in prompt"))
                })?;
            let ctx = EpisodeContext {
                episode: opened,
                record_index: session_index(&session).unwrap_or(opened as u64),
                spec: &spec,
                mode,
                seed,
            };
            sessions.insert(session.clone(), factory.create(&ctx)?);
            opened += 1;
        }
        let agent = sessions.get_mut(&session).expect("session was just opened");
        let text = agent.respond(&messages)?;
        let reply = serde_json::json!({ "text": text });
        writeln!(output, "{reply}")
            .and_then(|_| output.flush())
            .map_err(|e| AgentError::Transport(e.to_string()))?;
    }
    Ok(opened)
}

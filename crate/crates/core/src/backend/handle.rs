use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    BackendError, Capability, ClassifyPayload, ClassifyResult, FillPayload, FillResult,
    HelloPayload, HelloResult, Op, RegistryEntry, Request, Response, MASK, PROTOCOL_VERSION,
};
use crate::corpus::LabelSpace;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(30_000);

enum Event {
    Line(String),
    Eof,
}

struct Inbox {
    rx: Receiver<Event>,
    stash: HashMap<u64, Response>,
    outstanding: HashMap<u64, Op>,
    abandoned: HashSet<u64>,
    closed: bool,
}

/// Connection to one backend process.
///
/// Writes are serialized; replies are demultiplexed by id, so several
/// requests may be in flight and answered in any order.
pub struct BackendHandle {
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    inbox: Mutex<Inbox>,
    next_id: AtomicU64,
    child: Mutex<Option<Child>>,
    entry: Option<RegistryEntry>,
    capabilities: BTreeSet<Capability>,
    timeout: Duration,
}

impl BackendHandle {
    /// Starts `program args... [--model <name>]` and wires its standard
    /// streams. No handshake is performed.
    pub fn spawn(
        program: &str,
        args: &[String],
        entry: Option<RegistryEntry>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let mut cmd = Command::new(program);
        cmd.args(args);
        if let Some(e) = &entry {
            cmd.arg("--model").arg(&e.model);
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                program: program.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut handle = Self::from_streams(stdout, stdin, timeout);
        handle.entry = entry;
        handle.child = Mutex::new(Some(child));
        Ok(handle)
    }

    /// Spawns and performs the `hello` handshake.
    pub fn connect(
        program: &str,
        args: &[String],
        entry: Option<RegistryEntry>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let mut handle = Self::spawn(program, args, entry, timeout)?;
        handle.handshake()?;
        Ok(handle)
    }

    /// Speaks the protocol over arbitrary streams.
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(reader);
            for line in reader.lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Event::Line(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(Event::Eof);
        });
        Self {
            writer: Mutex::new(Some(Box::new(writer))),
            inbox: Mutex::new(Inbox {
                rx,
                stash: HashMap::new(),
                outstanding: HashMap::new(),
                abandoned: HashSet::new(),
                closed: false,
            }),
            next_id: AtomicU64::new(1),
            child: Mutex::new(None),
            entry: None,
            capabilities: BTreeSet::new(),
            timeout,
        }
    }

    pub fn entry(&self) -> Option<&RegistryEntry> {
        self.entry.as_ref()
    }

    pub fn capabilities(&self) -> &BTreeSet<Capability> {
        &self.capabilities
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Exchanges `hello` and records the backend's capabilities.
    pub fn handshake(&mut self) -> Result<BTreeSet<Capability>, BackendError> {
        let reply: HelloResult = self.call(
            Op::Hello,
            &HelloPayload {
                version: PROTOCOL_VERSION,
            },
        )?;
        if reply.version != PROTOCOL_VERSION {
            return Err(BackendError::VersionMismatch {
                client: PROTOCOL_VERSION,
                backend: reply.version,
            });
        }
        self.capabilities = reply.capabilities.into_iter().collect();
        Ok(self.capabilities.clone())
    }

    /// Sends one request line and returns its id.
    pub fn submit<P: Serialize>(&self, op: Op, payload: &P) -> Result<u64, BackendError> {
        let payload = serde_json::to_value(payload)
            .map_err(|e| BackendError::Protocol(format!("cannot encode payload: {e}")))?;
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let mut line = serde_json::to_string(&Request { id, op, payload })
            .map_err(|e| BackendError::Protocol(format!("cannot encode request: {e}")))?;
        line.push('\n');
        self.inbox.lock().unwrap().outstanding.insert(id, op);
        let mut writer = self.writer.lock().unwrap();
        let written = match writer.as_mut() {
            Some(w) => w.write_all(line.as_bytes()).and_then(|_| w.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if written.is_err() {
            *writer = None;
            let mut inbox = self.inbox.lock().unwrap();
            inbox.outstanding.remove(&id);
            return Err(BackendError::Closed { op, id });
        }
        Ok(id)
    }

    /// Blocks until the reply to `id` arrives, the backend exits, or the
    /// request timeout elapses. Replies to other requests read meanwhile are
    /// kept for their own waiters.
    pub fn wait(&self, id: u64) -> Result<serde_json::Value, BackendError> {
        let deadline = Instant::now() + self.timeout;
        let mut inbox = self.inbox.lock().unwrap();
        let op = *inbox
            .outstanding
            .get(&id)
            .ok_or_else(|| BackendError::Protocol(format!("request {id} is not outstanding")))?;
        loop {
            if let Some(resp) = inbox.stash.remove(&id) {
                inbox.outstanding.remove(&id);
                return if resp.ok {
                    resp.result.ok_or_else(|| {
                        BackendError::Protocol(format!("reply {id} has ok:true but no result"))
                    })
                } else {
                    Err(BackendError::Remote {
                        op,
                        message: resp.error.unwrap_or_default(),
                    })
                };
            }
            if inbox.closed {
                inbox.outstanding.remove(&id);
                return Err(BackendError::Closed { op, id });
            }
            let now = Instant::now();
            if now >= deadline {
                inbox.outstanding.remove(&id);
                inbox.abandoned.insert(id);
                return Err(BackendError::Timeout {
                    op,
                    id,
                    timeout_ms: self.timeout.as_millis(),
                });
            }
            match inbox.rx.recv_timeout(deadline - now) {
                Ok(Event::Line(line)) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp: Response = serde_json::from_str(&line).map_err(|e| {
                        BackendError::Protocol(format!("malformed reply line {line:?}: {e}"))
                    })?;
                    if inbox.abandoned.remove(&resp.id) {
                        log::debug!("dropping late reply to timed-out request {}", resp.id);
                        continue;
                    }
                    if !inbox.outstanding.contains_key(&resp.id) {
                        return Err(BackendError::Protocol(format!(
                            "reply id {} matches no outstanding request",
                            resp.id
                        )));
                    }
                    if inbox.stash.insert(resp.id, resp.clone()).is_some() {
                        return Err(BackendError::Protocol(format!(
                            "duplicate reply for request {}",
                            resp.id
                        )));
                    }
                }
                Ok(Event::Eof) | Err(RecvTimeoutError::Disconnected) => inbox.closed = true,
                Err(RecvTimeoutError::Timeout) => {}
            }
        }
    }

    fn call<P: Serialize, T: DeserializeOwned>(&self, op: Op, payload: &P) -> Result<T, BackendError> {
        let id = self.submit(op, payload)?;
        let value = self.wait(id)?;
        serde_json::from_value(value)
            .map_err(|e| BackendError::Protocol(format!("unexpected {op} result: {e}")))
    }

    fn require(&self, cap: Capability) -> Result<(), BackendError> {
        if self.capabilities.contains(&cap) {
            Ok(())
        } else {
            Err(BackendError::MissingCapability(cap))
        }
    }

    /// Top-1 token for every `[MASK]` in `masked_text`, in order.
    pub fn request_fill(&self, masked_text: &str) -> Result<Vec<String>, BackendError> {
        self.require(Capability::Fill)?;
        let masks = masked_text.matches(MASK).count();
        if masks == 0 {
            return Ok(Vec::new());
        }
        let reply: FillResult = self.call(
            Op::Fill,
            &FillPayload {
                text: masked_text.to_string(),
            },
        )?;
        if reply.tokens.len() != masks {
            return Err(BackendError::Protocol(format!(
                "fill returned {} tokens for {masks} masks",
                reply.tokens.len()
            )));
        }
        Ok(reply.tokens)
    }

    /// One score vector per text, aligned with `label_space`.
    pub fn request_classify(
        &self,
        texts: &[String],
        label_space: &LabelSpace,
    ) -> Result<Vec<Vec<f64>>, BackendError> {
        self.require(Capability::Classify)?;
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let reply: ClassifyResult = self.call(
            Op::Classify,
            &ClassifyPayload {
                texts: texts.to_vec(),
                labels: label_space.labels().to_vec(),
            },
        )?;
        if reply.scores.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "classify returned {} score vectors for {} texts",
                reply.scores.len(),
                texts.len()
            )));
        }
        for (i, s) in reply.scores.iter().enumerate() {
            if s.len() != label_space.len() {
                return Err(BackendError::Protocol(format!(
                    "score vector {i} has {} entries, label space has {}",
                    s.len(),
                    label_space.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(BackendError::Protocol(format!("score vector {i} is not finite")));
            }
        }
        Ok(reply.scores)
    }
}

impl std::fmt::Debug for BackendHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendHandle")
            .field("entry", &self.entry)
            .field("capabilities", &self.capabilities)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl Drop for BackendHandle {
    fn drop(&mut self) {
        if let Ok(mut w) = self.writer.lock() {
            w.take();
        }
        if let Ok(mut child) = self.child.lock() {
            if let Some(mut c) = child.take() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{self, Cursor};

    /// Reader that replays canned lines, then blocks forever.
    struct Hanging(Cursor<Vec<u8>>);

    impl Read for Hanging {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            let n = self.0.read(buf)?;
            if n == 0 {
                thread::sleep(Duration::from_secs(3600));
            }
            Ok(n)
        }
    }

    fn canned(lines: &str, timeout_ms: u64) -> BackendHandle {
        BackendHandle::from_streams(
            Hanging(Cursor::new(lines.as_bytes().to_vec())),
            io::sink(),
            Duration::from_millis(timeout_ms),
        )
    }

    #[test]
    fn handshake_reads_capabilities() {
        let mut h = canned(
            "{\"id\":1,\"ok\":true,\"result\":{\"version\":1,\"capabilities\":[\"fill\"]}}\n",
            1000,
        );
        assert_eq!(h.handshake().unwrap(), BTreeSet::from([Capability::Fill]));
    }

    #[test]
    fn version_mismatch_names_both() {
        let mut h = canned(
            "{\"id\":1,\"ok\":true,\"result\":{\"version\":2,\"capabilities\":[]}}\n",
            1000,
        );
        let err = h.handshake().unwrap_err().to_string();
        assert!(err.contains("v1") && err.contains("v2"), "{err}");
    }

    #[test]
    fn silence_times_out() {
        let mut h = canned("", 100);
        let start = Instant::now();
        assert!(matches!(h.handshake(), Err(BackendError::Timeout { .. })));
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn eof_surfaces_as_closed() {
        let mut h = BackendHandle::from_streams(Cursor::new(Vec::new()), io::sink(), DEFAULT_TIMEOUT);
        assert!(matches!(h.handshake(), Err(BackendError::Closed { .. })));
    }

    #[test]
    fn out_of_order_replies_are_reassociated() {
        let h = canned(
            concat!(
                "{\"id\":2,\"ok\":true,\"result\":\"second\"}\n",
                "{\"id\":1,\"ok\":true,\"result\":\"first\"}\n"
            ),
            1000,
        );
        let a = h.submit(Op::Fill, &FillPayload { text: "a".into() }).unwrap();
        let b = h.submit(Op::Fill, &FillPayload { text: "b".into() }).unwrap();
        assert_eq!(h.wait(a).unwrap(), "first");
        assert_eq!(h.wait(b).unwrap(), "second");
    }

    #[test]
    fn unsolicited_reply_is_a_protocol_error() {
        let h = canned("{\"id\":9,\"ok\":true,\"result\":0}\n", 1000);
        let a = h.submit(Op::Fill, &FillPayload { text: "a".into() }).unwrap();
        assert!(matches!(h.wait(a), Err(BackendError::Protocol(_))));
    }

    #[test]
    fn remote_errors_carry_message() {
        let h = canned("{\"id\":1,\"ok\":false,\"error\":\"no gpu\"}\n", 1000);
        let a = h.submit(Op::Fill, &FillPayload { text: "a".into() }).unwrap();
        let err = h.wait(a).unwrap_err();
        assert!(err.to_string().contains("no gpu"));
    }

    #[test]
    fn capability_is_required() {
        let h = canned("", 100);
        assert!(matches!(
            h.request_fill("a [MASK]"),
            Err(BackendError::MissingCapability(Capability::Fill))
        ));
    }
}

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use super::BridgeError;

/// A line-oriented duplex connection to a peer.
///
/// Incoming lines are read on a background thread so reads can be bounded
/// by a deadline.
pub struct Transport {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
    description: String,
}

pub(crate) enum Incoming {
    Line(String),
    Timeout,
    Closed,
}

impl Transport {
    pub fn from_pipes<R, W>(reader: R, writer: W, description: impl Into<String>) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            description: description.into(),
        }
    }

    /// Launches `command` (whitespace separated, no shell quoting) and talks
    /// to it over its stdin/stdout.
    pub fn spawn_stdio(command: &str) -> Result<Self, BridgeError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| BridgeError::Connect("empty peer command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BridgeError::Connect(format!("spawning `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut t = Self::from_pipes(stdout, stdin, format!("stdio:{command}"));
        t.child = Some(child);
        Ok(t)
    }

    pub fn connect_tcp(address: &str) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(address)
            .map_err(|e| BridgeError::Connect(format!("connecting to {address}: {e}")))?;
        stream.set_nodelay(true).ok();
        let reader = stream
            .try_clone()
            .map_err(|e| BridgeError::Connect(e.to_string()))?;
        Ok(Self::from_pipes(reader, stream, format!("tcp:{address}")))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub(crate) fn send_line(&mut self, line: &str) -> Result<(), BridgeError> {
        let io = |e: io::Error| BridgeError::Disconnected(e.to_string());
        self.writer.write_all(line.as_bytes()).map_err(io)?;
        self.writer.write_all(b"\n").map_err(io)?;
        self.writer.flush().map_err(io)
    }

    pub(crate) fn recv_line(&mut self, timeout: Option<Duration>) -> Incoming {
        let got = match timeout {
            Some(t) => self.lines.recv_timeout(t),
            None => self.lines.recv().map_err(|_| RecvTimeoutError::Disconnected),
        };
        match got {
            Ok(Ok(line)) => Incoming::Line(line),
            Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => Incoming::Closed,
            Err(RecvTimeoutError::Timeout) => Incoming::Timeout,
        }
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        // Closing stdin is the peer's shutdown signal.
        self.writer = Box::new(io::sink());
        if let Some(mut child) = self.child.take() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Write half of an in-memory pipe.
pub struct PipeWriter(Sender<Vec<u8>>);

/// Read half of an in-memory pipe.
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

/// An in-memory byte pipe; reads see EOF once the writer is dropped.
pub fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = mpsc::channel();
    (
        PipeWriter(tx),
        PipeReader {
            rx,
            buf: Vec::new(),
            pos: 0,
        },
    )
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        self.0
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "pipe reader dropped"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

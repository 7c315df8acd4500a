//! At-least-once NDJSON delivery over TCP.
//!
//! Every accepted line is appended to a spool file before it is written to
//! the socket. There is no application-level acknowledgement, so lines
//! written shortly before a peer failure may be lost in socket buffers; the
//! sender keeps the most recently written lines in a replay window and
//! resends them after reconnecting. The spool is only cleared once the
//! collector has read the whole stream up to a half-close.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::{EdgeError, Event, TcpConfig};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(2);
const CLOSE_TIMEOUT: Duration = Duration::from_secs(10);
const MAX_BATCH: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReport {
    /// Distinct lines written to a connection at least once.
    pub sent: u64,
    /// Replay-window lines written again after a reconnect.
    pub resent: u64,
    /// Lines accepted while no connection was available.
    pub spooled: u64,
    /// Lines still in the spool file when the sender stopped.
    pub unsent: u64,
    pub reconnects: u64,
}

struct Entry {
    line: String,
    written: bool,
}

struct Spool {
    path: PathBuf,
    file: File,
    entries: usize,
}

impl Spool {
    fn open(path: &Path) -> Result<(Self, Vec<String>), EdgeError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| EdgeError::io(dir, e))?;
        }
        let leftover = match File::open(path) {
            Ok(f) => BufReader::new(f)
                .lines()
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EdgeError::io(path, e))?
                .into_iter()
                .filter(|l| !l.trim().is_empty())
                .collect(),
            Err(e) if e.kind() == ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(EdgeError::io(path, e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| EdgeError::io(path, e))?;
        let spool = Self {
            path: path.to_owned(),
            file,
            entries: leftover.len(),
        };
        Ok((spool, leftover))
    }

    fn append(&mut self, line: &str) -> Result<(), EdgeError> {
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        self.file
            .write_all(buf.as_bytes())
            .map_err(|e| EdgeError::io(&self.path, e))?;
        self.entries += 1;
        Ok(())
    }

    fn rewrite<'a>(&mut self, lines: impl Iterator<Item = &'a str>) -> Result<(), EdgeError> {
        let tmp = self.path.with_extension("spool.tmp");
        let mut buf = String::new();
        let mut n = 0;
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
            n += 1;
        }
        fs::write(&tmp, buf).map_err(|e| EdgeError::io(&tmp, e))?;
        fs::rename(&tmp, &self.path).map_err(|e| EdgeError::io(&self.path, e))?;
        self.file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| EdgeError::io(&self.path, e))?;
        self.entries = n;
        Ok(())
    }
}

struct Worker {
    cfg: TcpConfig,
    endpoint: String,
    conn: Option<TcpStream>,
    pending: VecDeque<Entry>,
    window: VecDeque<Entry>,
    spool: Spool,
    next_cycle: Option<Instant>,
    ever_connected: bool,
    report: DeliveryReport,
}

impl Worker {
    fn new(cfg: TcpConfig, spool_path: &Path) -> Result<Self, EdgeError> {
        let (spool, leftover) = Spool::open(spool_path)?;
        if !leftover.is_empty() {
            info!("re-queueing {} spooled lines from a previous run", leftover.len());
        }
        Ok(Self {
            endpoint: cfg.endpoint(),
            cfg,
            conn: None,
            pending: leftover
                .into_iter()
                .map(|line| Entry { line, written: false })
                .collect(),
            window: VecDeque::new(),
            spool,
            next_cycle: None,
            ever_connected: false,
            report: DeliveryReport::default(),
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16)))
    }

    fn connect_once(&self) -> std::io::Result<TcpStream> {
        let mut last = std::io::Error::new(ErrorKind::NotFound, "no address resolved");
        for addr in self.endpoint.to_socket_addrs()? {
            match TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT) {
                Ok(s) => return Ok(s),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    /// Up to `retry_max` attempts with exponential backoff between them.
    fn connect_cycle(&mut self) -> bool {
        for attempt in 0..self.cfg.retry_max {
            if attempt > 0 {
                thread::sleep(self.backoff(attempt - 1));
            }
            match self.connect_once() {
                Ok(stream) => {
                    let _ = stream.set_nodelay(true);
                    self.on_connected(stream);
                    return true;
                }
                Err(e) => debug!("connect {} attempt {}: {e}", self.endpoint, attempt + 1),
            }
        }
        warn!("{} unreachable after {} attempts", self.endpoint, self.cfg.retry_max);
        self.next_cycle = Some(Instant::now() + self.backoff(self.cfg.retry_max));
        false
    }

    fn on_connected(&mut self, stream: TcpStream) {
        if self.ever_connected {
            self.report.reconnects += 1;
            info!(
                "reconnected to {}; replaying {} lines",
                self.endpoint,
                self.window.len()
            );
        }
        self.ever_connected = true;
        self.next_cycle = None;
        while let Some(e) = self.window.pop_back() {
            self.pending.push_front(e);
        }
        self.conn = Some(stream);
    }

    fn accept(&mut self, line: String) -> Result<(), EdgeError> {
        self.spool.append(&line)?;
        if self.conn.is_none() {
            self.report.spooled += 1;
        }
        self.pending.push_back(Entry {
            line,
            written: false,
        });
        Ok(())
    }

    /// Writes everything pending if a connection is (or can be) established.
    /// Without `force`, reconnect cycles respect the cool-down after a failed
    /// cycle.
    fn pump(&mut self, force: bool) -> Result<(), EdgeError> {
        let mut cycles = 0;
        while !self.pending.is_empty() {
            if self.conn.is_none() {
                let cooling = self.next_cycle.is_some_and(|t| Instant::now() < t);
                if (cooling && !force) || cycles == 3 || !self.connect_cycle() {
                    return Ok(());
                }
                cycles += 1;
            }
            let stream = self.conn.as_mut().expect("connected above");
            if !peer_alive(stream) {
                debug!("peer {} closed the connection", self.endpoint);
                self.conn = None;
                continue;
            }
            let mut buf = Vec::new();
            for e in &self.pending {
                buf.extend_from_slice(e.line.as_bytes());
                buf.push(b'\n');
            }
            if let Err(e) = stream.write_all(&buf) {
                debug!("write to {} failed: {e}", self.endpoint);
                self.conn = None;
                continue;
            }
            for mut e in self.pending.drain(..) {
                if e.written {
                    self.report.resent += 1;
                } else {
                    self.report.sent += 1;
                    e.written = true;
                }
                self.window.push_back(e);
            }
            while self.window.len() > self.cfg.replay_window {
                self.window.pop_front();
            }
        }
        self.compact_spool()
    }

    fn compact_spool(&mut self) -> Result<(), EdgeError> {
        let live = self.window.len() + self.pending.len();
        if self.spool.entries > live + self.cfg.replay_window.max(1024) {
            let lines = self.window.iter().chain(&self.pending).map(|e| e.line.as_str());
            self.spool.rewrite(lines)?;
        }
        Ok(())
    }

    fn run(mut self, rx: Receiver<String>) -> Result<DeliveryReport, EdgeError> {
        self.connect_cycle();
        loop {
            let first = match (self.conn.is_none() && !self.pending.is_empty(), self.next_cycle) {
                (true, Some(t)) => {
                    match rx.recv_timeout(t.saturating_duration_since(Instant::now())) {
                        Ok(l) => Some(l),
                        Err(RecvTimeoutError::Timeout) => None,
                        Err(RecvTimeoutError::Disconnected) => break,
                    }
                }
                _ => match rx.recv() {
                    Ok(l) => Some(l),
                    Err(_) => break,
                },
            };
            if let Some(line) = first {
                self.accept(line)?;
                for line in rx.try_iter().take(MAX_BATCH) {
                    self.accept(line)?;
                }
            }
            self.pump(false)?;
        }
        self.finish()
    }

    /// Flushes, then half-closes and waits for the collector's EOF, which
    /// proves it consumed every line.
    fn finish(mut self) -> Result<DeliveryReport, EdgeError> {
        for _ in 0..3 {
            self.pump(true)?;
            if !self.pending.is_empty() {
                break;
            }
            let Some(stream) = self.conn.take() else {
                if self.window.is_empty() && self.pending.is_empty() {
                    // Nothing was ever sent.
                    self.spool.rewrite(std::iter::empty())?;
                    return Ok(self.report);
                }
                break;
            };
            if close_confirmed(stream) {
                self.window.clear();
                self.spool.rewrite(std::iter::empty())?;
                self.report.unsent = 0;
                return Ok(self.report);
            }
            debug!("close of {} not confirmed; replaying", self.endpoint);
        }
        let lines = self.window.iter().chain(&self.pending).map(|e| e.line.as_str());
        self.spool.rewrite(lines)?;
        self.report.unsent = self.spool.entries as u64;
        Err(EdgeError::EndpointUnreachable {
            endpoint: self.endpoint.clone(),
            report: self.report,
        })
    }
}

fn peer_alive(stream: &TcpStream) -> bool {
    if stream.set_nonblocking(true).is_err() {
        return false;
    }
    let mut b = [0u8; 1];
    let alive = match stream.peek(&mut b) {
        Ok(0) => false,
        Ok(_) => true,
        Err(e) => e.kind() == ErrorKind::WouldBlock,
    };
    stream.set_nonblocking(false).is_ok() && alive
}

fn close_confirmed(mut stream: TcpStream) -> bool {
    if stream.shutdown(Shutdown::Write).is_err() || stream.set_read_timeout(Some(CLOSE_TIMEOUT)).is_err() {
        return false;
    }
    let mut sink = [0u8; 256];
    loop {
        match stream.read(&mut sink) {
            Ok(0) => return true,
            Ok(_) => continue,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(_) => return false,
        }
    }
}

/// Background sender; lines are delivered in submission order per
/// connection.
pub struct TcpSender {
    tx: Option<Sender<String>>,
    worker: Option<JoinHandle<Result<DeliveryReport, EdgeError>>>,
}

impl TcpSender {
    pub fn spawn(cfg: TcpConfig, spool_path: &Path) -> Result<Self, EdgeError> {
        let worker = Worker::new(cfg, spool_path)?;
        let (tx, rx) = mpsc::channel();
        let handle = thread::Builder::new()
            .name("tcp-sender".into())
            .spawn(move || worker.run(rx))
            .map_err(|e| EdgeError::io(spool_path, e))?;
        Ok(Self {
            tx: Some(tx),
            worker: Some(handle),
        })
    }

    pub fn send_line(&self, line: String) {
        if let Some(tx) = &self.tx {
            // A dead worker reports its error from `finish`.
            let _ = tx.send(line);
        }
    }

    pub fn send(&self, event: &Event) {
        self.send_line(event.to_line());
    }

    /// Drains the queue, attempts a final delivery and returns the report.
    pub fn finish(mut self) -> Result<DeliveryReport, EdgeError> {
        self.tx.take();
        self.worker
            .take()
            .expect("finish is called once")
            .join()
            .unwrap_or_else(|_| panic!("tcp sender thread panicked"))
    }
}

impl Drop for TcpSender {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// Sends a finite event stream and waits for delivery.
pub fn send_tcp<'a>(
    events: impl IntoIterator<Item = &'a Event>,
    cfg: &TcpConfig,
    spool_path: &Path,
) -> Result<DeliveryReport, EdgeError> {
    let sender = TcpSender::spawn(cfg.clone(), spool_path)?;
    for ev in events {
        sender.send(ev);
    }
    sender.finish()
}

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use log::{debug, info, warn};
use serde::Serialize;

use super::EdgeError;

/// Longest accepted line, excluding the terminating newline.
pub const MAX_LINE_BYTES: usize = 1 << 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CollectorStats {
    pub connections: u64,
    pub stored: u64,
    pub rejected: u64,
}

struct Shared {
    stopping: AtomicBool,
    out: Mutex<File>,
    conns: Mutex<Vec<(u64, TcpStream)>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
    connections: AtomicU64,
    stored: AtomicU64,
    rejected: AtomicU64,
}

impl Shared {
    fn stats(&self) -> CollectorStats {
        CollectorStats {
            connections: self.connections.load(Ordering::SeqCst),
            stored: self.stored.load(Ordering::SeqCst),
            rejected: self.rejected.load(Ordering::SeqCst),
        }
    }

    fn store(&self, line: &[u8]) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line);
        buf.push(b'\n');
        self.out.lock().expect("collector output lock").write_all(&buf)?;
        self.stored.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    fn reject(&self, why: &str) {
        warn!("dropping line: {why}");
        self.rejected.fetch_add(1, Ordering::SeqCst);
    }
}

/// Running collector. Dropping the handle leaves the service running until
/// the process exits; call [`CollectorHandle::shutdown`] to stop it.
pub struct CollectorHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl CollectorHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> CollectorStats {
        self.shared.stats()
    }

    /// Blocks for the lifetime of the service.
    pub fn wait(mut self) {
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
    }

    /// Stops accepting, drops every open connection (unread data is lost,
    /// as on a crash) and joins all threads.
    pub fn shutdown(mut self) -> CollectorStats {
        self.shared.stopping.store(true, Ordering::SeqCst);
        let mut wake = self.addr;
        if wake.ip().is_unspecified() {
            wake.set_ip(std::net::Ipv4Addr::LOCALHOST.into());
        }
        let _ = TcpStream::connect(wake);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        for (_, s) in self.shared.conns.lock().expect("conn registry").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        let workers: Vec<_> = self.shared.workers.lock().expect("worker list").drain(..).collect();
        for w in workers {
            let _ = w.join();
        }
        self.shared.stats()
    }
}

/// Binds `bind` and appends every valid JSON line received to `out_path`.
pub fn serve_collector(bind: &str, out_path: &Path) -> Result<CollectorHandle, EdgeError> {
    let listener = TcpListener::bind(bind).map_err(|source| EdgeError::BindFailure {
        addr: bind.to_owned(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| EdgeError::BindFailure {
        addr: bind.to_owned(),
        source,
    })?;
    let out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out_path)
        .map_err(|e| EdgeError::io(out_path, e))?;
    let shared = Arc::new(Shared {
        stopping: AtomicBool::new(false),
        out: Mutex::new(out),
        conns: Mutex::new(Vec::new()),
        workers: Mutex::new(Vec::new()),
        connections: AtomicU64::new(0),
        stored: AtomicU64::new(0),
        rejected: AtomicU64::new(0),
    });
    info!("collector listening on {addr}, writing {}", out_path.display());
    let acc_shared = Arc::clone(&shared);
    let acceptor = thread::Builder::new()
        .name("collector-accept".into())
        .spawn(move || accept_loop(listener, acc_shared))
        .map_err(|e| EdgeError::io(out_path, e))?;
    Ok(CollectorHandle {
        addr,
        shared,
        acceptor: Some(acceptor),
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for (id, stream) in listener.incoming().enumerate() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let id = id as u64;
        shared.connections.fetch_add(1, Ordering::SeqCst);
        if let Ok(clone) = stream.try_clone() {
            shared.conns.lock().expect("conn registry").push((id, clone));
        }
        let conn_shared = Arc::clone(&shared);
        let spawned = thread::Builder::new()
            .name(format!("collector-conn-{id}"))
            .spawn(move || {
                handle_connection(stream, &conn_shared);
                conn_shared
                    .conns
                    .lock()
                    .expect("conn registry")
                    .retain(|(i, _)| *i != id);
            });
        match spawned {
            Ok(h) => {
                let mut workers = shared.workers.lock().expect("worker list");
                workers.retain(|w| !w.is_finished());
                workers.push(h);
            }
            Err(e) => warn!("cannot spawn connection handler: {e}"),
        }
    }
}

fn handle_connection(stream: TcpStream, shared: &Shared) {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "?".into());
    debug!("connection from {peer}");
    let mut reader = BufReader::with_capacity(64 * 1024, stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = match (&mut reader)
            .take(MAX_LINE_BYTES as u64 + 1)
            .read_until(b'\n', &mut buf)
        {
            Ok(n) => n,
            Err(e) => {
                debug!("{peer}: read error {e}");
                break;
            }
        };
        if n == 0 {
            break;
        }
        if buf.last() != Some(&b'\n') {
            if buf.len() > MAX_LINE_BYTES {
                shared.reject("line exceeds 1 MiB");
                if !skip_line(&mut reader) {
                    break;
                }
                continue;
            }
            shared.reject("connection closed mid-line");
            break;
        }
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        if buf.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<serde_json::Value>(&buf) {
            Ok(v) if v.is_object() => {
                if let Err(e) = shared.store(&buf) {
                    warn!("cannot write collector output: {e}");
                    break;
                }
            }
            Ok(_) => shared.reject("not a JSON object"),
            Err(e) => shared.reject(&e.to_string()),
        }
    }
    debug!("connection from {peer} closed");
}

/// Discards input up to and including the next newline; false on EOF/error.
fn skip_line(reader: &mut impl BufRead) -> bool {
    loop {
        let (done, used) = match reader.fill_buf() {
            Ok([]) | Err(_) => return false,
            Ok(chunk) => match chunk.iter().position(|&b| b == b'\n') {
                Some(i) => (true, i + 1),
                None => (false, chunk.len()),
            },
        };
        reader.consume(used);
        if done {
            return true;
        }
    }
}

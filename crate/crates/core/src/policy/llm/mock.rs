//! Scripted chat-completion HTTP server on localhost, for tests and demos.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

/// Behaviour for one incoming request, consumed in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    /// 200 with this assistant text.
    Text(String),
    /// Sleep before answering with the text; used to force client timeouts.
    Delayed(Duration, String),
    /// Bare HTTP status with an empty JSON body.
    Status(u16),
}

pub struct MockServer {
    addr: SocketAddr,
    requests: Arc<Mutex<Vec<Value>>>,
    stop: Arc<AtomicBool>,
    worker: Option<thread::JoinHandle<()>>,
}

impl MockServer {
    /// Binds an ephemeral port. Requests beyond the script get status 500.
    pub fn start(script: Vec<MockReply>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let script = Arc::new(script);
        let counter = Arc::new(AtomicUsize::new(0));
        let worker = {
            let (requests, stop) = (Arc::clone(&requests), Arc::clone(&stop));
            thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let n = counter.fetch_add(1, Ordering::SeqCst);
                            let reply = script.get(n).cloned().unwrap_or(MockReply::Status(500));
                            let requests = Arc::clone(&requests);
                            thread::spawn(move || {
                                let _ = serve(stream, reply, &requests);
                            });
                        }
                        Err(_) => thread::sleep(Duration::from_millis(2)),
                    }
                }
            })
        };
        Ok(Self { addr, requests, stop, worker: Some(worker) })
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Request bodies received so far, in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().expect("request log").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn serve(stream: TcpStream, reply: MockReply, requests: &Mutex<Vec<Value>>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let parsed = serde_json::from_slice(&body).unwrap_or(Value::Null);
    requests.lock().expect("request log").push(parsed);

    let (status, text) = match reply {
        MockReply::Text(text) => (200, Some(text)),
        MockReply::Delayed(wait, text) => {
            thread::sleep(wait);
            (200, Some(text))
        }
        MockReply::Status(code) => (code, None),
    };
    let payload = match text {
        Some(text) => json!({
            "choices": [{ "index": 0, "message": { "role": "assistant", "content": text } }]
        }),
        None => json!({}),
    }
    .to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} MOCK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}

//! A minimal OpenAI-style chat-completion server on a loopback port.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Instant;

type Handler = dyn Fn(&str) -> (u16, String) + Send + Sync;

pub struct StubServer {
    pub url: String,
    arrivals: Arc<Mutex<Vec<Instant>>>,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
}

impl StubServer {
    /// `handler` maps the prompt to a status and, for 200, the completion
    /// text (otherwise the raw body).
    pub fn start(handler: impl Fn(&str) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let arrivals = Arc::new(Mutex::new(Vec::new()));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let (a, b) = (arrivals.clone(), bodies.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (a, b, h) = (a.clone(), b.clone(), handler.clone());
                std::thread::spawn(move || serve(stream, &a, &b, &*h));
            }
        });
        Self { url, arrivals, bodies }
    }

    pub fn requests(&self) -> usize {
        self.arrivals.lock().unwrap().len()
    }

    pub fn arrivals(&self) -> Vec<Instant> {
        let mut v = self.arrivals.lock().unwrap().clone();
        v.sort();
        v
    }

    pub fn bodies(&self) -> Vec<serde_json::Value> {
        self.bodies.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, arrivals: &Mutex<Vec<Instant>>, bodies: &Mutex<Vec<serde_json::Value>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    arrivals.lock().unwrap().push(Instant::now());
    let mut body = vec![0u8; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let prompt = json["messages"][0]["content"].as_str().unwrap_or("").to_string();
    bodies.lock().unwrap().push(json);
    let (status, text) = handler(&prompt);
    let payload = if status == 200 {
        serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string()
    } else {
        text
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.flush();
}

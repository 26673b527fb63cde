use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use serde_json::{json, Value};

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(port: u16) -> Self {
        let s = TcpStream::connect(("127.0.0.1", port)).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        Self {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn send(&mut self, msg: &str) {
        writeln!(self.writer, "{msg}").unwrap();
    }

    fn recv(&mut self) -> Value {
        let mut line = String::new();
        self.reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap_or_else(|e| panic!("bad frame {line:?}: {e}"))
    }
}

fn start() -> u16 {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    std::thread::spawn(move || penta_coulomb::service::serve(listener));
    port
}

#[test]
fn sessions_are_independent() {
    let port = start();
    let (mut a, mut b) = (Client::connect(port), Client::connect(port));
    a.send(r#"{"type":"hello"}"#);
    b.send(r#"{"type":"hello"}"#);
    let (ha, hb) = (a.recv(), b.recv());
    assert_eq!(ha["type"], "hello");
    assert_ne!(ha["session"], hb["session"]);
    assert_eq!(a.recv()["type"], "state");
    assert_eq!(b.recv()["type"], "state");

    a.send(r#"{"type":"set_charges","s":1.3,"t":0.9}"#);
    let sa = a.recv();
    assert_eq!(sa["s"], 1.3);
    b.send(r#"{"type":"get_state"}"#);
    assert_eq!(b.recv()["s"], 1.0);
}

#[test]
fn errors_keep_the_connection() {
    let port = start();
    let mut c = Client::connect(port);
    c.send("{oops");
    let e = c.recv();
    assert_eq!(e["type"], "error");
    assert_eq!(e["code"], "invalid_argument");
    c.send(r#"{"type":"get_state"}"#);
    assert_eq!(c.recv()["type"], "state");
}

#[test]
fn navigation_streams_to_the_target() {
    let port = start();
    let mut c = Client::connect(port);
    let msg = json!({"type": "navigate", "target": {"b2": 1.5, "b4": 1.7}, "steps": 20});
    c.send(&msg.to_string());
    let mut frames = Vec::new();
    loop {
        let f = c.recv();
        assert_ne!(f["type"], "error", "{f}");
        let done = f["type"] == "done" || f["type"] == "state";
        frames.push(f);
        if done {
            break;
        }
    }
    assert!(frames.len() > 20, "{} frames", frames.len());
    c.send(r#"{"type":"get_state"}"#);
    let s = c.recv();
    assert!((s["b2"].as_f64().unwrap() - 1.5).abs() < 1e-6, "{s}");
    assert!((s["b4"].as_f64().unwrap() - 1.7).abs() < 1e-6, "{s}");
}

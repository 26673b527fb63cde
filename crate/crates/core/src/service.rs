//! Line-delimited JSON control service.
//!
//! Each connection owns one session: a linkage, fixed charges `(q₁, q₂, q₄)`,
//! the controlling charges `(s, t)` and the convex minimum they select.
//! Requests carry a `"type"` field; every reply is one JSON object per line.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::{json, Value};

use crate::control::navigate;
use crate::error::{Error, Result};
use crate::moduli::{diagonals, reconstruct_strict, Configuration, ConvexRegion, Linkage};
use crate::potential::{global_min_convex, ChargeVector};
use crate::stabilizer::stabilize_pentagon;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: u64,
    pub linkage: Linkage,
    pub fixed: [f64; 3],
    pub s: f64,
    pub t: f64,
    pub configuration: Configuration,
    pub energy: f64,
}

impl Session {
    /// Equilateral unit pentagon, unit charges: the regular pentagon.
    pub fn new(id: u64) -> Result<Self> {
        let linkage = Linkage::equilateral(5, 1.0)?;
        let m = global_min_convex(&linkage, &ChargeVector::uniform(5, 1.0)?)?;
        Ok(Self {
            id,
            linkage,
            fixed: [1.0; 3],
            s: 1.0,
            t: 1.0,
            configuration: m.configuration,
            energy: m.energy,
        })
    }

    /// Re-minimizes for the given state; commits only on success.
    fn settle(&mut self, linkage: Linkage, fixed: [f64; 3], s: f64, t: f64) -> Result<()> {
        if !(s > 0.0 && t > 0.0 && s.is_finite() && t.is_finite()) {
            return Err(Error::NonPositiveCharge);
        }
        let m = global_min_convex(&linkage, &ChargeVector::control(fixed, s, t)?)?;
        self.linkage = linkage;
        self.fixed = fixed;
        self.s = s;
        self.t = t;
        self.configuration = m.configuration;
        self.energy = m.energy;
        Ok(())
    }

    pub fn state(&self) -> Value {
        let b = diagonals(&self.configuration).map(|x| x.lengths()).unwrap_or([f64::NAN; 5]);
        json!({
            "type": "state",
            "session": self.id,
            "linkage": self.linkage,
            "fixed_charges": self.fixed,
            "s": self.s,
            "t": self.t,
            "E": self.energy,
            "vertices": self.configuration,
            "b2": b[1],
            "b4": b[3],
        })
    }
}

fn error_frame(e: &Error) -> Value {
    json!({"type": "error", "code": e.code(), "message": e.to_string()})
}

fn field<'a>(msg: &'a Value, key: &str) -> Result<&'a Value> {
    msg.get(key)
        .ok_or_else(|| Error::InvalidArgument(format!("missing field `{key}`")))
}

fn number(msg: &Value, key: &str) -> Result<f64> {
    field(msg, key)?
        .as_f64()
        .ok_or_else(|| Error::InvalidArgument(format!("`{key}` must be a number")))
}

/// A configuration given as a vertex list or as `{"b2": .., "b4": ..}`.
pub fn parse_target(v: &Value, linkage: &Linkage) -> Result<Configuration> {
    if let (Some(b2), Some(b4)) = (v.get("b2").and_then(Value::as_f64), v.get("b4").and_then(Value::as_f64)) {
        return reconstruct_strict(linkage, b2, b4);
    }
    let vertices = v.get("vertices").unwrap_or(v);
    let c: Configuration = serde_json::from_value(vertices.clone())
        .map_err(|e| Error::InvalidConfiguration(e.to_string()))?;
    c.check_realizes(linkage)?;
    Ok(c)
}

/// Applies one request to the session, emitting replies through `emit`. On
/// error the session is unchanged and a single error frame is emitted.
pub fn handle_message(session: &mut Session, line: &str, emit: &mut dyn FnMut(Value)) {
    if let Err(e) = dispatch(session, line, emit) {
        emit(error_frame(&e));
    }
}

fn dispatch(session: &mut Session, line: &str, emit: &mut dyn FnMut(Value)) -> Result<()> {
    let msg: Value =
        serde_json::from_str(line).map_err(|e| Error::InvalidArgument(format!("malformed JSON: {e}")))?;
    let kind = field(&msg, "type")?
        .as_str()
        .ok_or_else(|| Error::InvalidArgument("`type` must be a string".into()))?;
    match kind {
        "hello" => {
            emit(json!({"type": "hello", "protocol": PROTOCOL_VERSION, "session": session.id}));
            emit(session.state());
        }
        "get_state" => emit(session.state()),
        "set_linkage" => {
            let sides: Vec<f64> = serde_json::from_value(field(&msg, "sides")?.clone())
                .map_err(|e| Error::InvalidLinkage(e.to_string()))?;
            let linkage = Linkage::new(sides)?;
            session.settle(linkage, session.fixed, session.s, session.t)?;
            emit(session.state());
        }
        "set_charges" => {
            let (s, t) = (number(&msg, "s")?, number(&msg, "t")?);
            session.settle(session.linkage.clone(), session.fixed, s, t)?;
            emit(session.state());
        }
        "set_fixed_charges" => {
            let fixed: [f64; 3] = serde_json::from_value(field(&msg, "charges")?.clone())
                .map_err(|e| Error::InvalidArgument(format!("`charges` must be [q1, q2, q4]: {e}")))?;
            if !fixed.iter().all(|q| *q > 0.0) {
                return Err(Error::NonPositiveCharge);
            }
            session.settle(session.linkage.clone(), fixed, session.s, session.t)?;
            emit(session.state());
        }
        "stabilize_to" => {
            let target = parse_target(field(&msg, "target")?, &session.linkage)?;
            let sol = stabilize_pentagon(&target, session.fixed)?;
            session.settle(session.linkage.clone(), session.fixed, sol.s, sol.t)?;
            emit(session.state());
        }
        "navigate" => {
            let target = parse_target(field(&msg, "target")?, &session.linkage)?;
            let steps = match msg.get("steps") {
                None => 100,
                Some(v) => v
                    .as_u64()
                    .filter(|s| *s >= 1)
                    .ok_or_else(|| Error::InvalidArgument("`steps` must be a positive integer".into()))?
                    as usize,
            };
            let tr = navigate(&session.linkage, &session.configuration, &target, session.fixed, steps)?;
            for (i, st) in tr.steps.iter().enumerate() {
                emit(json!({
                    "type": "trajectory_frame",
                    "index": i,
                    "s": st.s,
                    "t": st.t,
                    "E": st.energy,
                    "vertices": st.configuration,
                }));
            }
            let last = tr.steps.last().expect("non-empty trajectory");
            session.s = last.s;
            session.t = last.t;
            session.energy = last.energy;
            session.configuration = last.configuration.clone();
            emit(json!({
                "type": "done",
                "steps": tr.increments(),
                "endpoint_error": last.configuration.distance(&target),
                "s": last.s,
                "t": last.t,
                "E": last.energy,
                "vertices": last.configuration,
            }));
        }
        "get_region" => {
            let n = match msg.get("samples") {
                None => 64,
                Some(v) => v
                    .as_u64()
                    .filter(|n| (1..=10_000).contains(n))
                    .ok_or_else(|| Error::InvalidArgument("`samples` must be in 1..=10000".into()))?
                    as usize,
            };
            let region = ConvexRegion::new(&session.linkage)?;
            let mut slices = Vec::with_capacity(n);
            for i in 0..n {
                let k = region.k_at((i as f64 + 0.5) / n as f64);
                let s = region.slice(k)?;
                let (lo, hi) = s.b2_range();
                slices.push(json!({"b4": k, "b2_min": lo, "b2_max": hi}));
            }
            emit(json!({
                "type": "region",
                "b4_min": region.k_min,
                "b4_max": region.k_max,
                "slices": slices,
            }));
        }
        other => return Err(Error::InvalidArgument(format!("unknown message type `{other}`"))),
    }
    Ok(())
}

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

fn serve_connection(stream: TcpStream) -> std::io::Result<()> {
    let mut session = match Session::new(NEXT_SESSION.fetch_add(1, Ordering::Relaxed)) {
        Ok(s) => s,
        Err(e) => {
            let mut w = stream;
            writeln!(w, "{}", error_frame(&e))?;
            return Ok(());
        }
    };
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut out = Vec::new();
        handle_message(&mut session, &line, &mut |v| out.push(v));
        for v in out {
            writeln!(writer, "{v}")?;
        }
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread per session.
pub fn serve(listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        std::thread::spawn(move || {
            let _ = serve_connection(stream);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(session: &mut Session, line: &str) -> Vec<Value> {
        let mut out = Vec::new();
        handle_message(session, line, &mut |v| out.push(v));
        out
    }

    #[test]
    fn hello_and_state() {
        let mut s = Session::new(1).unwrap();
        let out = run(&mut s, r#"{"type":"hello"}"#);
        assert_eq!(out[0]["type"], "hello");
        assert_eq!(out[1]["type"], "state");
        assert_eq!(out[1]["vertices"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn malformed_input_keeps_session() {
        let mut s = Session::new(1).unwrap();
        let before = s.clone();
        for bad in ["{not json", r#"{"type":"warp"}"#, r#"{"type":"set_charges","s":-1,"t":1}"#] {
            let out = run(&mut s, bad);
            assert_eq!(out.len(), 1);
            assert_eq!(out[0]["type"], "error");
        }
        assert_eq!(s, before);
    }

    #[test]
    fn set_charges_moves_the_minimum() {
        let mut s = Session::new(1).unwrap();
        let out = run(&mut s, r#"{"type":"set_charges","s":1.5,"t":0.8}"#);
        assert_eq!(out[0]["s"], 1.5);
        let q = ChargeVector::control([1.0; 3], 1.5, 0.8).unwrap();
        let m = global_min_convex(&s.linkage, &q).unwrap();
        assert!(m.configuration.distance(&s.configuration) < 1e-12);
    }

    #[test]
    fn navigate_streams_frames() {
        let mut s = Session::new(1).unwrap();
        let out = run(&mut s, r#"{"type":"navigate","target":{"b2":1.5,"b4":1.7},"steps":10}"#);
        assert_eq!(out.len(), 12);
        assert!(out[..11].iter().all(|v| v["type"] == "trajectory_frame"));
        assert_eq!(out[11]["type"], "done");
        assert!(out[11]["endpoint_error"].as_f64().unwrap() < 1e-5);
        let region = run(&mut s, r#"{"type":"get_region","samples":8}"#);
        assert_eq!(region[0]["slices"].as_array().unwrap().len(), 8);
    }
}

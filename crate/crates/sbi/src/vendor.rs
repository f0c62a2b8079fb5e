//! Wire dialects of the three emulated vendor management protocols.
//!
//! * Vendor A: line-oriented text (`XC ADD S1-fwd R1 T2`).
//! * Vendor B: one JSON object per line (`{"op":"connect",...}`).
//! * Vendor C: path strings (`SET /xc/S1-fwd rx=R1 tx=T2`).
//!
//! The same codec serves both ends: translators encode commands and decode
//! replies, emulators parse commands and encode replies.

use std::fmt;
use std::str::FromStr;

use ocs_model::InternalConnection;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Vendor {
    A,
    B,
    C,
}

impl Vendor {
    pub const ALL: [Vendor; 3] = [Vendor::A, Vendor::B, Vendor::C];

    pub fn dialect(self) -> &'static dyn Dialect {
        match self {
            Vendor::A => &TextDialect,
            Vendor::B => &JsonDialect,
            Vendor::C => &PathDialect,
        }
    }
}

impl fmt::Display for Vendor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vendor::A => f.write_str("A"),
            Vendor::B => f.write_str("B"),
            Vendor::C => f.write_str("C"),
        }
    }
}

impl FromStr for Vendor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Vendor::A),
            "B" => Ok(Vendor::B),
            "C" => Ok(Vendor::C),
            other => Err(format!("unknown vendor {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Hi,
    Lo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VendorCommand {
    Connect(InternalConnection),
    Disconnect(String),
    List,
    Power(String),
    /// Vendor A carries one threshold per command; B and C accept both.
    Alarm {
        port: String,
        hi: Option<f64>,
        lo: Option<f64>,
    },
}

impl VendorCommand {
    pub fn is_read(&self) -> bool {
        matches!(self, VendorCommand::List | VendorCommand::Power(_))
    }

    pub fn is_mutation(&self) -> bool {
        matches!(self, VendorCommand::Connect(_) | VendorCommand::Disconnect(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VendorReply {
    Ok,
    Err(String),
    List(Vec<InternalConnection>),
    Power(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VendorEvent {
    pub port: String,
    pub level: Level,
    pub dbm: f64,
}

/// Failure reasons emulated devices report.
pub mod reason {
    pub const BUSY: &str = "busy";
    pub const UNKNOWN_PORT: &str = "unknown-port";
    pub const EXISTS: &str = "exists";
    pub const NO_SUCH_XC: &str = "no-such-xc";
    pub const BAD_COMMAND: &str = "bad-command";
    pub const RANGE: &str = "range";
}

pub trait Dialect: Send + Sync {
    fn vendor(&self) -> Vendor;
    fn encode_command(&self, cmd: &VendorCommand) -> String;
    fn parse_command(&self, line: &str) -> Result<VendorCommand, String>;
    /// May span several lines (without a trailing newline).
    fn encode_reply(&self, reply: &VendorReply) -> String;
    /// Whether `lines` hold one complete reply.
    fn reply_complete(&self, lines: &[String]) -> bool;
    fn decode_reply(&self, cmd: &VendorCommand, lines: &[String]) -> Result<VendorReply, String>;
    fn encode_event(&self, ev: &VendorEvent) -> String;
    fn parse_event(&self, line: &str) -> Option<VendorEvent>;
}

fn parse_dbm(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("bad power value {s:?}"))
}

fn check_token(s: &str) -> Result<(), String> {
    if s.is_empty() || s.contains(char::is_whitespace) {
        Err(format!("bad token {s:?}"))
    } else {
        Ok(())
    }
}

fn unexpected(cmd: &VendorCommand, lines: &[String]) -> String {
    format!("unexpected reply to {cmd:?}: {lines:?}")
}

pub struct TextDialect;

impl Dialect for TextDialect {
    fn vendor(&self) -> Vendor {
        Vendor::A
    }

    fn encode_command(&self, cmd: &VendorCommand) -> String {
        match cmd {
            VendorCommand::Connect(c) => format!("XC ADD {} {} {}", c.name, c.rx, c.tx),
            VendorCommand::Disconnect(name) => format!("XC DEL {name}"),
            VendorCommand::List => "XC LIST".to_string(),
            VendorCommand::Power(port) => format!("PWR {port}"),
            VendorCommand::Alarm { port, hi, lo } => {
                debug_assert!(hi.is_some() != lo.is_some(), "vendor A sets one threshold at a time");
                match (hi, lo) {
                    (Some(v), _) => format!("ALARM {port} HI {v}"),
                    (None, Some(v)) => format!("ALARM {port} LO {v}"),
                    (None, None) => format!("ALARM {port}"),
                }
            }
        }
    }

    fn parse_command(&self, line: &str) -> Result<VendorCommand, String> {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["XC", "ADD", name, rx, tx] => Ok(VendorCommand::Connect(InternalConnection::new(
                *name, *rx, *tx,
            ))),
            ["XC", "DEL", name] => Ok(VendorCommand::Disconnect(name.to_string())),
            ["XC", "LIST"] => Ok(VendorCommand::List),
            ["PWR", port] => Ok(VendorCommand::Power(port.to_string())),
            ["ALARM", port, "HI", v] => Ok(VendorCommand::Alarm {
                port: port.to_string(),
                hi: Some(parse_dbm(v)?),
                lo: None,
            }),
            ["ALARM", port, "LO", v] => Ok(VendorCommand::Alarm {
                port: port.to_string(),
                hi: None,
                lo: Some(parse_dbm(v)?),
            }),
            _ => Err(format!("unrecognised command {line:?}")),
        }
    }

    fn encode_reply(&self, reply: &VendorReply) -> String {
        match reply {
            VendorReply::Ok => "OK".into(),
            VendorReply::Err(r) => format!("ERR {r}"),
            VendorReply::List(conns) => conns
                .iter()
                .map(|c| format!("{} {} {}\n", c.name, c.rx, c.tx))
                .chain(std::iter::once("OK".to_string()))
                .collect(),
            VendorReply::Power(v) => format!("PWR {v}\nOK"),
        }
    }

    fn reply_complete(&self, lines: &[String]) -> bool {
        lines
            .last()
            .is_some_and(|l| l == "OK" || l == "ERR" || l.starts_with("ERR "))
    }

    fn decode_reply(&self, cmd: &VendorCommand, lines: &[String]) -> Result<VendorReply, String> {
        let (last, data) = lines.split_last().ok_or("empty reply")?;
        if let Some(r) = last.strip_prefix("ERR") {
            return Ok(VendorReply::Err(r.trim().to_string()));
        }
        if last != "OK" {
            return Err(unexpected(cmd, lines));
        }
        match cmd {
            VendorCommand::List => data
                .iter()
                .map(|l| {
                    let t: Vec<&str> = l.split_whitespace().collect();
                    match t.as_slice() {
                        [n, rx, tx] => Ok(InternalConnection::new(*n, *rx, *tx)),
                        _ => Err(format!("bad list line {l:?}")),
                    }
                })
                .collect::<Result<_, _>>()
                .map(VendorReply::List),
            VendorCommand::Power(_) => match data {
                [l] => l
                    .strip_prefix("PWR ")
                    .ok_or_else(|| unexpected(cmd, lines))
                    .and_then(parse_dbm)
                    .map(VendorReply::Power),
                _ => Err(unexpected(cmd, lines)),
            },
            _ if data.is_empty() => Ok(VendorReply::Ok),
            _ => Err(unexpected(cmd, lines)),
        }
    }

    fn encode_event(&self, ev: &VendorEvent) -> String {
        let lvl = match ev.level {
            Level::Hi => "HI",
            Level::Lo => "LO",
        };
        format!("EVT {} {lvl} {}", ev.port, ev.dbm)
    }

    fn parse_event(&self, line: &str) -> Option<VendorEvent> {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["EVT", port, lvl, v] => Some(VendorEvent {
                port: port.to_string(),
                level: match *lvl {
                    "HI" => Level::Hi,
                    "LO" => Level::Lo,
                    _ => return None,
                },
                dbm: parse_dbm(v).ok()?,
            }),
            _ => None,
        }
    }
}

pub struct JsonDialect;

#[derive(Serialize, Deserialize)]
struct BXc {
    label: String,
    #[serde(rename = "in")]
    input: String,
    #[serde(rename = "out")]
    output: String,
}

fn level_str(l: Level) -> &'static str {
    match l {
        Level::Hi => "hi",
        Level::Lo => "lo",
    }
}

impl Dialect for JsonDialect {
    fn vendor(&self) -> Vendor {
        Vendor::B
    }

    fn encode_command(&self, cmd: &VendorCommand) -> String {
        // struct-ordered keys keep the wire form stable
        #[derive(Serialize)]
        struct Connect<'a> {
            op: &'a str,
            label: &'a str,
            #[serde(rename = "in")]
            input: &'a str,
            #[serde(rename = "out")]
            output: &'a str,
        }
        #[derive(Serialize)]
        struct Alarm<'a> {
            op: &'a str,
            port: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            hi: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            lo: Option<f64>,
        }
        match cmd {
            VendorCommand::Connect(c) => serde_json::to_string(&Connect {
                op: "connect",
                label: &c.name,
                input: &c.rx,
                output: &c.tx,
            })
            .expect("serializes"),
            VendorCommand::Disconnect(name) => {
                format!(r#"{{"op":"disconnect","label":{}}}"#, json!(name))
            }
            VendorCommand::List => r#"{"op":"list"}"#.to_string(),
            VendorCommand::Power(port) => format!(r#"{{"op":"power","port":{}}}"#, json!(port)),
            VendorCommand::Alarm { port, hi, lo } => serde_json::to_string(&Alarm {
                op: "alarm",
                port,
                hi: *hi,
                lo: *lo,
            })
            .expect("serializes"),
        }
    }

    fn parse_command(&self, line: &str) -> Result<VendorCommand, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let s = |k: &str| -> Result<String, String> {
            v.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("missing {k}"))
        };
        let num = |k: &str| -> Result<Option<f64>, String> {
            match v.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(x) => x.as_f64().map(Some).ok_or_else(|| format!("bad {k}")),
            }
        };
        match v.get("op").and_then(Value::as_str) {
            Some("connect") => Ok(VendorCommand::Connect(InternalConnection::new(
                s("label")?,
                s("in")?,
                s("out")?,
            ))),
            Some("disconnect") => Ok(VendorCommand::Disconnect(s("label")?)),
            Some("list") => Ok(VendorCommand::List),
            Some("power") => Ok(VendorCommand::Power(s("port")?)),
            Some("alarm") => Ok(VendorCommand::Alarm {
                port: s("port")?,
                hi: num("hi")?,
                lo: num("lo")?,
            }),
            _ => Err(format!("unrecognised command {line:?}")),
        }
    }

    fn encode_reply(&self, reply: &VendorReply) -> String {
        match reply {
            VendorReply::Ok => r#"{"ok":true}"#.into(),
            VendorReply::Err(r) => format!(r#"{{"ok":false,"reason":{}}}"#, json!(r)),
            VendorReply::List(conns) => {
                let xcs: Vec<BXc> = conns
                    .iter()
                    .map(|c| BXc {
                        label: c.name.clone(),
                        input: c.rx.clone(),
                        output: c.tx.clone(),
                    })
                    .collect();
                format!(
                    r#"{{"ok":true,"xcs":{}}}"#,
                    serde_json::to_string(&xcs).expect("serializes")
                )
            }
            VendorReply::Power(v) => format!(r#"{{"ok":true,"dbm":{}}}"#, json!(v)),
        }
    }

    fn reply_complete(&self, lines: &[String]) -> bool {
        !lines.is_empty()
    }

    fn decode_reply(&self, cmd: &VendorCommand, lines: &[String]) -> Result<VendorReply, String> {
        let [line] = lines else {
            return Err(unexpected(cmd, lines));
        };
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        match v.get("ok").and_then(Value::as_bool) {
            Some(false) => Ok(VendorReply::Err(
                v.get("reason")
                    .and_then(Value::as_str)
                    .unwrap_or("unknown")
                    .to_string(),
            )),
            Some(true) => match cmd {
                VendorCommand::List => {
                    let xcs: Vec<BXc> = serde_json::from_value(
                        v.get("xcs").cloned().ok_or_else(|| unexpected(cmd, lines))?,
                    )
                    .map_err(|e| e.to_string())?;
                    Ok(VendorReply::List(
                        xcs.into_iter()
                            .map(|x| InternalConnection::new(x.label, x.input, x.output))
                            .collect(),
                    ))
                }
                VendorCommand::Power(_) => v
                    .get("dbm")
                    .and_then(Value::as_f64)
                    .map(VendorReply::Power)
                    .ok_or_else(|| unexpected(cmd, lines)),
                _ => Ok(VendorReply::Ok),
            },
            None => Err(unexpected(cmd, lines)),
        }
    }

    fn encode_event(&self, ev: &VendorEvent) -> String {
        format!(
            r#"{{"event":"alarm","port":{},"level":"{}","dbm":{}}}"#,
            json!(ev.port),
            level_str(ev.level),
            json!(ev.dbm)
        )
    }

    fn parse_event(&self, line: &str) -> Option<VendorEvent> {
        let v: Value = serde_json::from_str(line).ok()?;
        if v.get("event")?.as_str()? != "alarm" {
            return None;
        }
        Some(VendorEvent {
            port: v.get("port")?.as_str()?.to_string(),
            level: match v.get("level")?.as_str()? {
                "hi" => Level::Hi,
                "lo" => Level::Lo,
                _ => return None,
            },
            dbm: v.get("dbm")?.as_f64()?,
        })
    }
}

pub struct PathDialect;

fn status_for(reason: &str) -> u16 {
    match reason {
        reason::UNKNOWN_PORT | reason::NO_SUCH_XC => 404,
        reason::BUSY | reason::EXISTS => 409,
        _ => 400,
    }
}

fn kv<'a>(tok: &'a str, key: &str) -> Option<&'a str> {
    tok.strip_prefix(key)?.strip_prefix('=')
}

impl Dialect for PathDialect {
    fn vendor(&self) -> Vendor {
        Vendor::C
    }

    fn encode_command(&self, cmd: &VendorCommand) -> String {
        match cmd {
            VendorCommand::Connect(c) => format!("SET /xc/{} rx={} tx={}", c.name, c.rx, c.tx),
            VendorCommand::Disconnect(name) => format!("DEL /xc/{name}"),
            VendorCommand::List => "GET /xc".into(),
            VendorCommand::Power(port) => format!("GET /pwr/{port}"),
            VendorCommand::Alarm { port, hi, lo } => {
                let mut s = format!("SET /alarm/{port}");
                if let Some(v) = hi {
                    s.push_str(&format!(" hi={v}"));
                }
                if let Some(v) = lo {
                    s.push_str(&format!(" lo={v}"));
                }
                s
            }
        }
    }

    fn parse_command(&self, line: &str) -> Result<VendorCommand, String> {
        let t: Vec<&str> = line.split_whitespace().collect();
        let bad = || format!("unrecognised command {line:?}");
        match t.as_slice() {
            ["SET", path, rest @ ..] => {
                if let Some(name) = path.strip_prefix("/xc/") {
                    check_token(name)?;
                    let [rx, tx] = rest else { return Err(bad()) };
                    let rx = kv(rx, "rx").ok_or_else(bad)?;
                    let tx = kv(tx, "tx").ok_or_else(bad)?;
                    Ok(VendorCommand::Connect(InternalConnection::new(name, rx, tx)))
                } else if let Some(port) = path.strip_prefix("/alarm/") {
                    check_token(port)?;
                    let mut hi = None;
                    let mut lo = None;
                    for tok in rest {
                        if let Some(v) = kv(tok, "hi") {
                            hi = Some(parse_dbm(v)?);
                        } else if let Some(v) = kv(tok, "lo") {
                            lo = Some(parse_dbm(v)?);
                        } else {
                            return Err(bad());
                        }
                    }
                    Ok(VendorCommand::Alarm {
                        port: port.to_string(),
                        hi,
                        lo,
                    })
                } else {
                    Err(bad())
                }
            }
            ["DEL", path] => path
                .strip_prefix("/xc/")
                .filter(|n| !n.is_empty())
                .map(|n| VendorCommand::Disconnect(n.to_string()))
                .ok_or_else(bad),
            ["GET", "/xc"] => Ok(VendorCommand::List),
            ["GET", path] => path
                .strip_prefix("/pwr/")
                .filter(|n| !n.is_empty())
                .map(|p| VendorCommand::Power(p.to_string()))
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }

    fn encode_reply(&self, reply: &VendorReply) -> String {
        match reply {
            VendorReply::Ok => "200 OK".into(),
            VendorReply::Err(r) => format!("{} {r}", status_for(r)),
            VendorReply::List(conns) => conns
                .iter()
                .map(|c| format!("/xc/{} rx={} tx={}\n", c.name, c.rx, c.tx))
                .chain(std::iter::once("200 OK".to_string()))
                .collect(),
            VendorReply::Power(v) => format!("/pwr dbm={v}\n200 OK"),
        }
    }

    fn reply_complete(&self, lines: &[String]) -> bool {
        lines.last().is_some_and(|l| {
            l.len() >= 3 && l.as_bytes()[..3].iter().all(u8::is_ascii_digit)
        })
    }

    fn decode_reply(&self, cmd: &VendorCommand, lines: &[String]) -> Result<VendorReply, String> {
        let (last, data) = lines.split_last().ok_or("empty reply")?;
        let (code, text) = last.split_once(' ').unwrap_or((last.as_str(), ""));
        if code != "200" {
            return Ok(VendorReply::Err(text.to_string()));
        }
        match cmd {
            VendorCommand::List => data
                .iter()
                .map(|l| {
                    let t: Vec<&str> = l.split_whitespace().collect();
                    match t.as_slice() {
                        [p, rx, tx] => {
                            let name = p.strip_prefix("/xc/");
                            match (name, kv(rx, "rx"), kv(tx, "tx")) {
                                (Some(n), Some(rx), Some(tx)) => {
                                    Ok(InternalConnection::new(n, rx, tx))
                                }
                                _ => Err(format!("bad list line {l:?}")),
                            }
                        }
                        _ => Err(format!("bad list line {l:?}")),
                    }
                })
                .collect::<Result<_, _>>()
                .map(VendorReply::List),
            VendorCommand::Power(_) => match data {
                [l] => l
                    .strip_prefix("/pwr dbm=")
                    .ok_or_else(|| unexpected(cmd, lines))
                    .and_then(parse_dbm)
                    .map(VendorReply::Power),
                _ => Err(unexpected(cmd, lines)),
            },
            _ if data.is_empty() => Ok(VendorReply::Ok),
            _ => Err(unexpected(cmd, lines)),
        }
    }

    fn encode_event(&self, ev: &VendorEvent) -> String {
        let lvl = match ev.level {
            Level::Hi => "HI",
            Level::Lo => "LO",
        };
        format!("EVENT /alarm/{} {lvl} {}", ev.port, ev.dbm)
    }

    fn parse_event(&self, line: &str) -> Option<VendorEvent> {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["EVENT", path, lvl, v] => Some(VendorEvent {
                port: path.strip_prefix("/alarm/")?.to_string(),
                level: match *lvl {
                    "HI" => Level::Hi,
                    "LO" => Level::Lo,
                    _ => return None,
                },
                dbm: parse_dbm(v).ok()?,
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(s: &str) -> Vec<String> {
        s.lines().map(str::to_string).collect()
    }

    #[test]
    fn vendor_a_wire() {
        let d = Vendor::A.dialect();
        let c = VendorCommand::Connect(InternalConnection::new("S1-fwd", "R1", "T2"));
        assert_eq!(d.encode_command(&c), "XC ADD S1-fwd R1 T2");
        assert_eq!(d.parse_command("XC ADD S1-fwd R1 T2").unwrap(), c);
        assert_eq!(d.encode_command(&VendorCommand::Disconnect("S1-fwd".into())), "XC DEL S1-fwd");
        let a = VendorCommand::Alarm { port: "R1".into(), hi: Some(-1.0), lo: None };
        assert_eq!(d.encode_command(&a), "ALARM R1 HI -1");
        assert_eq!(d.parse_command("ALARM R1 HI -1").unwrap(), a);
        assert_eq!(
            d.decode_reply(&c, &split("ERR busy")).unwrap(),
            VendorReply::Err("busy".into())
        );
        let list = VendorReply::List(vec![InternalConnection::new("x", "R1", "T1")]);
        let wire = split(&d.encode_reply(&list));
        assert!(d.reply_complete(&wire));
        assert!(!d.reply_complete(&wire[..1]));
        assert_eq!(d.decode_reply(&VendorCommand::List, &wire).unwrap(), list);
        let ev = VendorEvent { port: "R1".into(), level: Level::Hi, dbm: 5.9 };
        assert_eq!(d.encode_event(&ev), "EVT R1 HI 5.9");
        assert_eq!(d.parse_event("EVT R1 HI 5.9"), Some(ev));
        assert!(d.parse_command("XC FLY").is_err());
    }

    #[test]
    fn vendor_b_wire() {
        let d = Vendor::B.dialect();
        let c = VendorCommand::Connect(InternalConnection::new("S1-fwd", "R1", "T2"));
        assert_eq!(
            d.encode_command(&c),
            r#"{"op":"connect","label":"S1-fwd","in":"R1","out":"T2"}"#
        );
        assert_eq!(d.parse_command(&d.encode_command(&c)).unwrap(), c);
        let p = VendorReply::Power(-99.0);
        assert_eq!(
            d.decode_reply(&VendorCommand::Power("R1".into()), &split(&d.encode_reply(&p))).unwrap(),
            p
        );
        assert_eq!(
            d.decode_reply(&c, &split(r#"{"ok":false,"reason":"busy"}"#)).unwrap(),
            VendorReply::Err("busy".into())
        );
        let ev = VendorEvent { port: "R3".into(), level: Level::Lo, dbm: -40.0 };
        assert_eq!(d.parse_event(&d.encode_event(&ev)), Some(ev));
    }

    #[test]
    fn vendor_c_wire() {
        let d = Vendor::C.dialect();
        let c = VendorCommand::Connect(InternalConnection::new("S1-fwd", "R1", "T2"));
        assert_eq!(d.encode_command(&c), "SET /xc/S1-fwd rx=R1 tx=T2");
        assert_eq!(d.parse_command("SET /xc/S1-fwd rx=R1 tx=T2").unwrap(), c);
        let a = VendorCommand::Alarm { port: "R1".into(), hi: Some(-1.0), lo: Some(-10.0) };
        assert_eq!(d.encode_command(&a), "SET /alarm/R1 hi=-1 lo=-10");
        assert_eq!(d.parse_command("SET /alarm/R1 hi=-1 lo=-10").unwrap(), a);
        assert_eq!(d.encode_reply(&VendorReply::Err(reason::BUSY.into())), "409 busy");
        assert_eq!(
            d.decode_reply(&c, &split("409 busy")).unwrap(),
            VendorReply::Err("busy".into())
        );
        let list = VendorReply::List(vec![InternalConnection::new("x", "R1", "T1")]);
        assert_eq!(
            d.decode_reply(&VendorCommand::List, &split(&d.encode_reply(&list))).unwrap(),
            list
        );
        assert_eq!(d.parse_command("GET /pwr/R4").unwrap(), VendorCommand::Power("R4".into()));
    }
}

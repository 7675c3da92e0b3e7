//! Line-delimited JSON service that lets an external agent drive
//! environment episodes. See PROTOCOL.md for the message grammar.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::env::{Env, EnvConfig, Observation, StepInfo, NUM_ACTIONS};
use crate::ra::{parse_sql, Catalog, RaExpr};
use crate::rules::catalog;

pub const PROTOCOL_VERSION: &str = "1";
/// Longest accepted request line, newline included.
pub const MAX_FRAME: usize = 1 << 20;

/// Rounds to 9 significant digits, the precision promised on the wire.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn num(x: f64) -> Value {
    // JSON has no infinities; callers never send NaN.
    match serde_json::Number::from_f64(round9(x)) {
        Some(n) => Value::Number(n),
        None if x > 0.0 => Value::String("inf".into()),
        None if x < 0.0 => Value::String("-inf".into()),
        None => Value::Null,
    }
}

/// Shared, read-only server state.
#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub env: EnvConfig,
    pub catalog: Arc<Catalog>,
    /// Queries addressable by `query_id`.
    pub queries: BTreeMap<String, RaExpr>,
}

impl BridgeConfig {
    /// Catalog plus every fixture that parses against it.
    pub fn with_fixtures(catalog: Catalog, env: EnvConfig) -> BridgeConfig {
        let queries = crate::bench::fixtures()
            .iter()
            .filter_map(|f| Some((f.name.to_string(), parse_sql(f.sql, &catalog).ok()?)))
            .collect();
        BridgeConfig {
            env,
            catalog: Arc::new(catalog),
            queries,
        }
    }
}

/// Protocol error: the code is stable, the detail is for humans.
#[derive(Debug, Clone, PartialEq)]
pub struct WireError {
    pub code: &'static str,
    pub detail: String,
    /// The connection closes after this error.
    pub fatal: bool,
}

impl WireError {
    fn new(code: &'static str, detail: impl Into<String>) -> WireError {
        WireError {
            code,
            detail: detail.into(),
            fatal: false,
        }
    }

    fn fatal(code: &'static str, detail: impl Into<String>) -> WireError {
        WireError {
            fatal: true,
            ..WireError::new(code, detail)
        }
    }
}

pub fn observation_json(obs: &Observation, env: &Env) -> Value {
    json!({
        "nodes": obs.features.iter().map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "edges": obs.edges.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        "edge_attrs": obs.edge_attrs,
        "mask": obs.mask,
        "context": {
            "step": obs.step,
            "fill": num(obs.fill),
            "cost": num(env.cost()),
            "node_count": env.graph().node_count(),
            "size": env.graph().size(),
            "class_count": env.graph().class_count(),
        },
    })
}

/// Inverse of [`observation_json`] for the fields of [`Observation`].
pub fn decode_observation(v: &Value) -> Option<Observation> {
    let nodes = v.get("nodes")?.as_array()?;
    let features = nodes
        .iter()
        .map(|r| r.as_array()?.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()?;
    let edges = v
        .get("edges")?
        .as_array()?
        .iter()
        .map(|e| Some((e.get(0)?.as_u64()? as u32, e.get(1)?.as_u64()? as u32)))
        .collect::<Option<Vec<_>>>()?;
    let edge_attrs = v
        .get("edge_attrs")?
        .as_array()?
        .iter()
        .map(|a| a.as_u64().map(|a| a as u8))
        .collect::<Option<Vec<_>>>()?;
    let mask = v.get("mask")?.as_array()?.iter().map(Value::as_bool).collect::<Option<Vec<_>>>()?;
    let ctx = v.get("context")?;
    Some(Observation {
        features,
        edges,
        edge_attrs,
        mask,
        step: ctx.get("step")?.as_u64()? as usize,
        fill: ctx.get("fill")?.as_f64()?,
    })
}

fn info_json(info: &StepInfo) -> Value {
    json!({
        "extracted_cost": num(info.extracted_cost),
        "node_count": info.node_count,
        "size": info.size,
        "saturated_action": info.saturated_action,
        "rolled_back": info.rolled_back,
    })
}

/// One connection's state: at most one live episode.
pub struct Session {
    cfg: Arc<BridgeConfig>,
    env: Option<Env>,
    last_seq: Option<u64>,
    closed: bool,
}

impl Session {
    pub fn new(cfg: Arc<BridgeConfig>) -> Session {
        Session {
            cfg,
            env: None,
            last_seq: None,
            closed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Handles one frame (without its newline) and returns exactly one
    /// response line (without newline). After a fatal error or `close`
    /// the session is closed.
    pub fn handle(&mut self, frame: &[u8]) -> String {
        let (seq, body) = match self.dispatch(frame) {
            Ok((seq, body)) => (Some(seq), body),
            Err((seq, e)) => {
                if e.fatal {
                    self.closed = true;
                }
                let mut body = Map::new();
                body.insert("type".into(), "error".into());
                body.insert("code".into(), e.code.into());
                body.insert("detail".into(), e.detail.into());
                body.insert("fatal".into(), e.fatal.into());
                (seq, body)
            }
        };
        let mut out = Map::new();
        out.insert("seq".into(), seq.map_or(Value::Null, Value::from));
        out.extend(body);
        Value::Object(out).to_string()
    }

    fn dispatch(&mut self, frame: &[u8]) -> Result<(u64, Map<String, Value>), (Option<u64>, WireError)> {
        if self.closed {
            return Err((None, WireError::fatal("closed", "session is closed")));
        }
        let text = std::str::from_utf8(frame).map_err(|_| (None, WireError::fatal("malformed", "frame is not UTF-8")))?;
        let msg: Value =
            serde_json::from_str(text).map_err(|e| (None, WireError::fatal("malformed", e.to_string())))?;
        let obj = msg
            .as_object()
            .ok_or_else(|| (None, WireError::fatal("malformed", "frame is not a JSON object")))?;
        let seq = obj
            .get("seq")
            .and_then(Value::as_u64)
            .ok_or_else(|| (None, WireError::fatal("malformed", "missing non-negative integer `seq`")))?;
        if self.last_seq.is_some_and(|last| seq <= last) {
            return Err((Some(seq), WireError::fatal("bad_seq", format!("seq {seq} does not increase"))));
        }
        self.last_seq = Some(seq);
        let kind = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| (Some(seq), WireError::fatal("malformed", "missing string `type`")))?;
        let body = match kind {
            "hello" => Ok(self.hello()),
            "rules" => Ok(rules_body()),
            "reset" => self.reset(obj),
            "step" => self.step(obj),
            "close" => {
                self.closed = true;
                self.env = None;
                let mut m = Map::new();
                m.insert("type".into(), "closed".into());
                Ok(m)
            }
            other => Err(WireError::fatal("unknown_type", format!("unknown request type `{other}`"))),
        };
        body.map(|b| (seq, b)).map_err(|e| (Some(seq), e))
    }

    fn hello(&self) -> Map<String, Value> {
        let v = json!({
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "num_actions": NUM_ACTIONS,
            "feature_dim": self.cfg.env.feature_dim(),
            "queries": self.cfg.queries.keys().collect::<Vec<_>>(),
        });
        v.as_object().cloned().unwrap_or_default()
    }

    fn reset(&mut self, obj: &Map<String, Value>) -> Result<Map<String, Value>, WireError> {
        let query = match (obj.get("query_id"), obj.get("sql")) {
            (Some(id), None) => {
                let id = id.as_str().ok_or_else(|| WireError::new("bad_request", "`query_id` must be a string"))?;
                self.cfg
                    .queries
                    .get(id)
                    .cloned()
                    .ok_or_else(|| WireError::new("unknown_query", format!("no query named `{id}`")))?
            }
            (None, Some(sql)) => {
                let sql = sql.as_str().ok_or_else(|| WireError::new("bad_request", "`sql` must be a string"))?;
                parse_sql(sql, &self.cfg.catalog).map_err(|e| WireError::new("parse_error", e.to_string()))?
            }
            _ => return Err(WireError::new("bad_request", "reset needs exactly one of `query_id` and `sql`")),
        };
        let mut cfg = self.cfg.env.clone();
        let field = |name: &str| -> Result<Option<u64>, WireError> {
            match obj.get(name) {
                None => Ok(None),
                Some(v) => v
                    .as_u64()
                    .map(Some)
                    .ok_or_else(|| WireError::new("bad_request", format!("`{name}` must be a non-negative integer"))),
            }
        };
        if let Some(seed) = field("seed")? {
            cfg.seed = seed;
        }
        if let Some(n) = field("node_limit")? {
            cfg.node_limit = n as usize;
        }
        if let Some(h) = field("horizon")? {
            cfg.horizon = h as usize;
        }
        let env = Env::new(&query, self.cfg.catalog.clone(), cfg).map_err(|e| WireError::new("env_error", e.to_string()))?;
        let obs = env.observe().map_err(|e| WireError::new("env_error", e.to_string()))?;
        let mut m = Map::new();
        m.insert("type".into(), "observation".into());
        m.insert("observation".into(), observation_json(&obs, &env));
        self.env = Some(env);
        Ok(m)
    }

    fn step(&mut self, obj: &Map<String, Value>) -> Result<Map<String, Value>, WireError> {
        let action = obj
            .get("action")
            .and_then(Value::as_u64)
            .ok_or_else(|| WireError::new("bad_request", "step needs a non-negative integer `action`"))?;
        let env = self.env.as_mut().ok_or_else(|| WireError::new("no_episode", "step before reset"))?;
        if action >= NUM_ACTIONS as u64 {
            return Err(WireError::new("invalid_action", format!("action {action} is out of range (0..{NUM_ACTIONS})")));
        }
        if env.is_done() {
            return Err(WireError::new("episode_finished", "the episode reached its horizon"));
        }
        let r = env.step(action as usize).map_err(|e| WireError::new("env_error", e.to_string()))?;
        let mut m = Map::new();
        m.insert("type".into(), "step_result".into());
        m.insert("observation".into(), observation_json(&r.observation, env));
        m.insert("reward".into(), num(r.reward));
        m.insert("done".into(), r.done.into());
        m.insert("info".into(), info_json(&r.info));
        Ok(m)
    }
}

fn rules_body() -> Map<String, Value> {
    let mut rules: Vec<Value> = catalog()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "index": i,
                "name": r.name,
                "category": r.category.name(),
                "lhs": r.lhs.to_string(),
                "rhs": r.rhs_text(),
            })
        })
        .collect();
    rules.push(json!({"index": NUM_ACTIONS - 1, "name": "reset", "category": "control"}));
    let mut m = Map::new();
    m.insert("type".into(), "rules".into());
    m.insert("rules".into(), Value::Array(rules));
    m
}

/// Reads one newline-terminated frame of at most [`MAX_FRAME`] bytes.
/// Returns `None` at end of input; an overlong frame is consumed and
/// reported as `Some(Err(()))`.
fn read_frame<R: BufRead>(r: &mut R, buf: &mut Vec<u8>) -> std::io::Result<Option<Result<(), ()>>> {
    buf.clear();
    let n = r.by_ref().take(MAX_FRAME as u64).read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        return Ok(Some(Ok(())));
    }
    if n < MAX_FRAME {
        // Final line without newline.
        return Ok(Some(Ok(())));
    }
    let mut rest = Vec::new();
    r.read_until(b'\n', &mut rest)?;
    Ok(Some(Err(())))
}

/// Serves one connection until `close`, a fatal error, or end of input.
pub fn serve_stream<R: Read, W: Write>(cfg: Arc<BridgeConfig>, reader: R, mut writer: W) -> std::io::Result<()> {
    let mut reader = BufReader::new(reader);
    let mut session = Session::new(cfg);
    let mut buf = Vec::new();
    while let Some(frame) = read_frame(&mut reader, &mut buf)? {
        let line = match frame {
            Ok(()) if buf.iter().all(u8::is_ascii_whitespace) => continue,
            Ok(()) => session.handle(&buf),
            Err(()) => {
                session.closed = true;
                json!({"seq": null, "type": "error", "code": "frame_too_long",
                       "detail": format!("frames are limited to {MAX_FRAME} bytes"), "fatal": true})
                .to_string()
            }
        };
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

pub fn serve_stdio(cfg: Arc<BridgeConfig>) -> std::io::Result<()> {
    serve_stream(cfg, std::io::stdin().lock(), std::io::stdout().lock())
}

/// Accepts connections on `listener`, one thread and one session each.
/// Runs until the listener fails.
pub fn serve_listener(cfg: Arc<BridgeConfig>, listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let cfg = cfg.clone();
        std::thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            let result = stream.try_clone().and_then(|w| serve_stream(cfg, stream, w));
            if let Err(e) = result {
                log::info!("connection {peer:?} ended: {e}");
            }
        });
    }
    Ok(())
}

/// Binds 127.0.0.1:`port` and serves forever.
pub fn serve_tcp(cfg: Arc<BridgeConfig>, port: u16) -> std::io::Result<()> {
    serve_listener(cfg, TcpListener::bind(("127.0.0.1", port))?)
}

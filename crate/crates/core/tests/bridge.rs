mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use qrewrite::bridge::{decode_observation, serve_listener, BridgeConfig, Session, MAX_FRAME};
use qrewrite::env::{EnvConfig, NUM_ACTIONS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn cfg() -> Arc<BridgeConfig> {
    let (cat, _) = qrewrite::bench::gen_data(200, 0);
    Arc::new(BridgeConfig::with_fixtures(cat, EnvConfig::default()))
}

#[test]
fn scripted_session_matches_golden_transcript() {
    let out = common::scripted_transcript();
    assert_eq!(out, common::scripted_transcript());
    let text = std::str::from_utf8(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 54);
    for (i, line) in lines.iter().enumerate() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["seq"], i as u64 + 1);
        assert_ne!(v["type"], "error", "{line}");
    }
    common::check_golden("bridge_session.jsonl", &out);
}

#[test]
fn stream_transport_replays_the_session() {
    let (reqs, resps) = common::scripted_session();
    let mut out = Vec::new();
    qrewrite::bridge::serve_stream(cfg(), (reqs.join("\n") + "\n").as_bytes(), &mut out).unwrap();
    assert_eq!(out, common::scripted_transcript());
    assert_eq!(std::str::from_utf8(&out).unwrap().lines().count(), resps.len());
}

#[test]
fn observations_decode_from_the_transcript() {
    let out = common::scripted_transcript();
    let mut decoded = 0;
    for line in std::str::from_utf8(&out).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        if let Some(obs) = v.get("observation") {
            let o = decode_observation(obs).unwrap();
            assert_eq!(o.mask.len(), NUM_ACTIONS);
            assert_eq!(o.edges.len(), o.edge_attrs.len());
            assert!(o.features.iter().all(|r| r.len() == 69));
            decoded += 1;
        }
    }
    assert_eq!(decoded, 51);
}

/// Valid frames, their truncations and byte flips, and random bytes.
fn fuzz_frame(rng: &mut ChaCha8Rng, seq: u64) -> Vec<u8> {
    let valid = [
        format!(r#"{{"seq":{seq},"type":"hello"}}"#),
        format!(r#"{{"seq":{seq},"type":"rules"}}"#),
        format!(r#"{{"seq":{seq},"type":"reset","query_id":"join3","node_limit":{}}}"#, rng.gen_range(0..200)),
        format!(r#"{{"seq":{seq},"type":"reset","sql":"select * from orders where o_totalprice > {}"}}"#, rng.gen_range(0..9)),
        format!(r#"{{"seq":{seq},"type":"step","action":{}}}"#, rng.gen_range(0..40)),
        format!(r#"{{"seq":{seq},"type":"step","action":-1}}"#),
        format!(r#"{{"seq":{seq},"type":"reset","query_id":7}}"#),
    ];
    let mut f = valid[rng.gen_range(0..valid.len())].clone().into_bytes();
    match rng.gen_range(0..10) {
        0 => f.truncate(rng.gen_range(0..f.len())),
        1 => {
            let i = rng.gen_range(0..f.len());
            f[i] = rng.gen();
        }
        2 => f = (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect(),
        _ => {}
    }
    f.retain(|&b| b != b'\n');
    f
}

#[test]
fn fuzzed_frames_get_one_json_reply_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = cfg();
    let mut session = Session::new(cfg.clone());
    let mut seq = 0;
    let mut kinds = std::collections::BTreeMap::<String, usize>::new();
    for _ in 0..10_000 {
        if session.is_closed() {
            session = Session::new(cfg.clone());
            seq = 0;
        }
        seq += 1;
        let reply = session.handle(&fuzz_frame(&mut rng, seq));
        assert!(!reply.contains('\n'));
        let v: Value = serde_json::from_str(&reply).unwrap_or_else(|e| panic!("{e}: {reply}"));
        let kind = match v["type"].as_str().unwrap() {
            "error" => format!("error:{}", v["code"].as_str().unwrap()),
            other => other.to_string(),
        };
        *kinds.entry(kind).or_default() += 1;
    }
    for k in ["hello", "observation", "step_result", "error:malformed", "error:invalid_action"] {
        assert!(kinds.get(k).copied().unwrap_or(0) > 10, "{k} rare: {kinds:?}");
    }
}

#[test]
fn overlong_frame_is_rejected_without_reading_it_all() {
    let mut input = vec![b'x'; MAX_FRAME + 10];
    input.extend(b"\n{\"seq\":1,\"type\":\"hello\"}\n");
    let mut out = Vec::new();
    qrewrite::bridge::serve_stream(cfg(), &input[..], &mut out).unwrap();
    let first: Value = serde_json::from_str(std::str::from_utf8(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["code"], "frame_too_long");
}

#[test]
fn tcp_sessions_are_independent() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let cfg = cfg();
    std::thread::spawn(move || serve_listener(cfg, listener));
    let talk = |lines: &[&str]| -> Vec<Value> {
        let stream = TcpStream::connect(addr).unwrap();
        let mut w = stream.try_clone().unwrap();
        let mut r = BufReader::new(stream);
        lines
            .iter()
            .map(|l| {
                writeln!(w, "{l}").unwrap();
                let mut reply = String::new();
                r.read_line(&mut reply).unwrap();
                serde_json::from_str(&reply).unwrap()
            })
            .collect()
    };
    let a = talk(&[
        r#"{"seq":1,"type":"reset","query_id":"nested_filter","seed":3}"#,
        r#"{"seq":2,"type":"step","action":0}"#,
        r#"{"seq":3,"type":"close"}"#,
    ]);
    assert_eq!(a[1]["type"], "step_result");
    assert_eq!(a[2]["type"], "closed");
    // A fresh connection has no episode and its own sequence numbers.
    let b = talk(&[r#"{"seq":1,"type":"step","action":0}"#]);
    assert_eq!(b[0]["code"], "no_episode");
}

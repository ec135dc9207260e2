use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use argus_core::corpus::Feature;
use argus_llmprobe::{
    build_prompt, dry_run, probe_batch, Clock, ProbeConfig, ProbeItem, ProbeMode, SystemClock,
    UreqTransport,
};

const TEXT: &str = "Last winter my car broke down on the highway.";

#[test]
fn golden_prompts() {
    for (feature, mode, file) in [
        (Feature::Story, ProbeMode::Presence, "story_presence.txt"),
        (
            Feature::EventSequencing,
            ProbeMode::Rating,
            "event_sequencing_rating.txt",
        ),
    ] {
        let path = format!("{}/tests/golden/{file}", env!("CARGO_MANIFEST_DIR"));
        let golden = std::fs::read_to_string(path).unwrap();
        let msgs = build_prompt(feature, mode, TEXT);
        assert_eq!(msgs[0].content, "You are a narrative analysis expert.");
        assert_eq!(msgs[1].content, golden, "{file}");
    }
}

/// Serves one canned reply per connection, in order, recording request bodies.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen, handle)
}

fn reply(content: &str) -> (u16, String) {
    (
        200,
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
            .to_string(),
    )
}

/// Real time is too slow for backoff tests; this skips sleeps but keeps the ledger.
struct FastClock(Duration);

impl Clock for FastClock {
    fn now(&self) -> Duration {
        self.0
    }
    fn sleep(&mut self, d: Duration) {
        self.0 += d;
    }
}

#[test]
fn http_round_trip_with_retries() {
    let (url, seen, handle) = serve(vec![
        (429, "{}".into()),
        (500, "{}".into()),
        reply("0.7"),
        reply(" 4 \n"),
        reply("many"),
    ]);
    let mut cfg = ProbeConfig::new(url, "test-model", Feature::Story, ProbeMode::Rating);
    cfg.token = Some("secret".into());
    cfg.timeout = Duration::from_secs(5);
    let items: Vec<ProbeItem> = (0..3)
        .map(|i| ProbeItem {
            item_id: format!("c{i}"),
            text: format!("comment {i}"),
        })
        .collect();
    let mut transport = UreqTransport::new(&cfg);
    let out = probe_batch(&cfg, &items, &mut transport, &mut FastClock(Duration::ZERO)).unwrap();
    handle.join().unwrap();

    assert_eq!(out.rows.len(), 1);
    assert_eq!(out.rows[0].value, 0.7);
    assert_eq!(out.rows[0].retries, 2);
    assert_eq!(out.rows[0].binarized, Some(true));
    // 4 is outside the Story scale, "many" is not a number
    let failed: Vec<&str> = out.failures.iter().map(|f| f.item_id.as_str()).collect();
    assert_eq!(failed, ["c1", "c2"]);
    assert_eq!(out.failures[0].raw.as_deref(), Some(" 4 \n"));

    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 5);
    let first: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(first["model"], "test-model");
    assert_eq!(first["temperature"], 0);
    assert_eq!(first["messages"][0]["role"], "system");
    assert_eq!(
        first["messages"][1]["content"].as_str().unwrap(),
        build_prompt(Feature::Story, ProbeMode::Rating, "comment 0")[1].content
    );
}

#[test]
fn dry_run_sends_nothing() {
    // Nothing listens on this port; any request would fail the batch rows.
    let cfg = ProbeConfig::new(
        "http://127.0.0.1:9/",
        "m",
        Feature::Curiosity,
        ProbeMode::Presence,
    );
    let items = vec![ProbeItem {
        item_id: "a".into(),
        text: "x".into(),
    }];
    let rows = dry_run(&cfg, &items);
    assert_eq!(rows.len(), 1);
    assert_eq!(
        rows[0].request["messages"][1]["content"]
            .as_str()
            .unwrap()
            .lines()
            .last(),
        Some("x")
    );
}

#[test]
fn every_item_accounted_for_under_real_clock() {
    let (url, _, handle) = serve(vec![reply("1"), reply("0"), reply("x"), reply("1")]);
    let mut cfg = ProbeConfig::new(url, "m", Feature::Agency, ProbeMode::Presence);
    cfg.rate_limit = 50.0;
    let items: Vec<ProbeItem> = (0..4)
        .map(|i| ProbeItem {
            item_id: i.to_string(),
            text: "t".into(),
        })
        .collect();
    let mut transport = UreqTransport::new(&cfg);
    let out = probe_batch(&cfg, &items, &mut transport, &mut SystemClock::default()).unwrap();
    handle.join().unwrap();
    assert_eq!(out.rows.len() + out.failures.len(), 4);
    assert!(out
        .request_times
        .windows(2)
        .all(|w| w[1] - w[0] >= Duration::from_millis(20)));
}

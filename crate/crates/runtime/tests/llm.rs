use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use tslagent_runtime::llm::{connect, request_body, request_key, BackendConfig, ChatBackend, HttpChat, Journal, JournalMode, OracleError};

/// A chat-completions endpoint that answers with the reversed prompt and
/// remembers every body it received.
fn serve(status: u16) -> (String, Arc<Mutex<Vec<Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
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
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req: Value = serde_json::from_slice(&body).unwrap();
            let prompt = req["messages"][0]["content"].as_str().unwrap_or("").chars().rev().collect::<String>();
            log.lock().unwrap().push(req);
            let reply = if status == 200 { json!({ "choices": [{ "message": { "role": "assistant", "content": prompt } }] }).to_string() } else { "overloaded".into() };
            let head = format!("HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", reply.len());
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn config(base_url: String, mode: JournalMode) -> BackendConfig {
    BackendConfig { base_url, model: "test-model".into(), seed: 42, mode, api_key_env: "TSLAGENT_TEST_KEY_UNSET".into(), ..BackendConfig::default() }
}

#[test]
fn request_is_deterministic() {
    let (url, seen) = serve(200);
    let mut chat = HttpChat::new(&config(url, JournalMode::Live));
    assert_eq!(chat.complete("abc").unwrap(), "cba");
    let body = seen.lock().unwrap()[0].clone();
    assert_eq!(body, request_body("test-model", 42, "abc"));
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["seed"], 42);
    assert_eq!(request_key(&body), request_key(&request_body("test-model", 42, "abc")));
    assert_ne!(request_key(&body), request_key(&request_body("test-model", 43, "abc")));
}

#[test]
fn http_errors_surface() {
    let (url, _) = serve(503);
    let mut chat = HttpChat::new(&config(url, JournalMode::Live));
    assert_eq!(chat.complete("x"), Err(OracleError::Http { status: 503, body: "overloaded".into() }));
    let mut dead = HttpChat::new(&config("http://127.0.0.1:9".into(), JournalMode::Live));
    assert!(matches!(dead.complete("x"), Err(OracleError::Transport { .. })));
}

#[test]
fn record_then_replay_offline() {
    let dir = std::env::temp_dir().join(format!("tslagent-journal-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("journal.jsonl");
    let _ = std::fs::remove_file(&path);
    let (url, seen) = serve(200);

    let mut rec = config(url, JournalMode::Record);
    rec.journal = Some(path.clone());
    let mut chat = connect(&rec, None, "session-1").unwrap();
    let live: Vec<String> = ["one", "two", "one"].iter().map(|p| chat.complete(p).unwrap()).collect();
    assert_eq!(seen.lock().unwrap().len(), 3);
    drop(chat);

    let lines = std::fs::read_to_string(&path).unwrap();
    assert_eq!(lines.lines().count(), 3);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["session"], "session-1");
    assert_eq!(first["key"], request_key(&request_body("test-model", 42, "one")));

    let mut rep = config("http://127.0.0.1:9".into(), JournalMode::Replay);
    rep.journal = Some(path.clone());
    let mut chat = connect(&rep, None, "session-2").unwrap();
    let replayed: Vec<String> = ["one", "two", "one"].iter().map(|p| chat.complete(p).unwrap()).collect();
    assert_eq!(live, replayed);
    assert!(matches!(chat.complete("three"), Err(OracleError::ReplayMiss { .. })));
    assert_eq!(Journal::open(&path).unwrap().len(), 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shared_journal_across_sessions() {
    let (url, _) = serve(200);
    let journal = Arc::new(Mutex::new(Journal::in_memory()));
    let rec = config(url, JournalMode::Record);
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let (rec, journal) = (rec.clone(), journal.clone());
            thread::spawn(move || connect(&rec, Some(journal), &format!("s{i}")).unwrap().complete(&format!("prompt {i}")).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(journal.lock().unwrap().len(), 4);
    let rep = config(String::new(), JournalMode::Replay);
    let mut chat = connect(&rep, Some(journal), "r").unwrap();
    assert_eq!(chat.complete("prompt 2").unwrap(), "2 tpmorp");
}

//! The HTTP backend against a local fake provider.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use erag_core::llm_gateway::{
    Candidate, EmbeddingRequest, Gateway, GatewayError, PromptTemplates, RemoteBackend, RemoteConfig, RetryPolicy,
    SelectionRequest,
};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves canned `(status, body)` responses in order, one per connection.
fn fake_provider(responses: Vec<(u16, Value)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let payload = body.to_string();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn gateway(url: &str) -> Gateway {
    let cfg = RemoteConfig {
        base_url: url.to_string(),
        api_key: Some("sk-test".into()),
        timeout: Duration::from_secs(5),
        ..RemoteConfig::default()
    };
    Gateway::builder()
        .all_backends(Arc::new(RemoteBackend::new(cfg, PromptTemplates::default())))
        .retry(RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        })
        .build()
}

fn chat(content: &str) -> Value {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] })
}

fn selection() -> SelectionRequest {
    let c = |id: &str, d: &str| Candidate {
        id: id.into(),
        description: d.into(),
    };
    SelectionRequest::new("find a sink", vec![c("C01/00000", "kitchen sink"), c("C01/00001", "sofa")], false).unwrap()
}

#[test]
fn embeddings_are_parsed_and_normalized() {
    let (url, seen) = fake_provider(vec![(200, json!({ "data": [{ "embedding": [3.0, 4.0] }] }))]);
    let v = gateway(&url).embed(&EmbeddingRequest::new("a lamp").unwrap()).unwrap();
    assert_eq!(v, vec![0.6, 0.8]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/embeddings");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["input"], "a lamp");
}

#[test]
fn server_errors_are_retried_then_succeed() {
    let (url, seen) = fake_provider(vec![(503, json!({})), (200, chat("C01/00000"))]);
    let gw = gateway(&url);
    assert_eq!(gw.select(&selection()).unwrap().as_deref(), Some("C01/00000"));
    assert_eq!(gw.stats().selector.provider_calls, 2);
    assert_eq!(seen.lock().unwrap()[1].path, "/chat/completions");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _) = fake_provider(vec![(400, json!({ "error": "bad" }))]);
    let gw = gateway(&url);
    let err = gw.select(&selection()).unwrap_err();
    assert!(matches!(err, GatewayError::Provider { retryable: false, .. }), "{err}");
    assert_eq!(gw.stats().selector.provider_calls, 1);
}

#[test]
fn out_of_set_answer_gets_one_correction() {
    let (url, seen) = fake_provider(vec![(200, chat("the bathroom")), (200, chat("C01/00001"))]);
    let gw = gateway(&url);
    assert_eq!(gw.select(&selection()).unwrap().as_deref(), Some("C01/00001"));
    let seen = seen.lock().unwrap();
    let second = seen[1].body["messages"][0]["content"].as_str().unwrap();
    let first = seen[0].body["messages"][0]["content"].as_str().unwrap();
    assert_ne!(first, second, "retry carries a corrective note");
}

#[test]
fn missing_content_is_malformed() {
    let (url, _) = fake_provider(vec![(200, json!({ "choices": [] }))]);
    let err = gateway(&url).select(&selection()).unwrap_err();
    assert!(matches!(err, GatewayError::MalformedResponse(_)), "{err}");
}

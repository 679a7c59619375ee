//! End-to-end remote-provider flow through the binary, against a local
//! scripted HTTP stub: build with `--provider remote`, then search an
//! index whose model id routes query embedding back to the remote
//! endpoint.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::thread;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Serve canned embedding responses: one vector per input, value keyed
/// off the input count so build (34 docs) and search (1 query) differ.
fn start_embedding_stub(connections: usize) -> (String, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        for _ in 0..connections {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut buffer = Vec::new();
            let mut chunk = [0u8; 1024];
            let header_end = loop {
                match stream.read(&mut chunk) {
                    Ok(0) | Err(_) => return,
                    Ok(n) => buffer.extend_from_slice(&chunk[..n]),
                }
                if let Some(p) = buffer.windows(4).position(|w| w == b"\r\n\r\n") {
                    break p;
                }
            };
            let head = String::from_utf8_lossy(&buffer[..header_end]).into_owned();
            let content_length: usize = head
                .lines()
                .find_map(|line| {
                    let (name, value) = line.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse().ok())?
                })
                .unwrap_or(0);
            while buffer.len() < header_end + 4 + content_length {
                match stream.read(&mut chunk) {
                    Ok(0) | Err(_) => break,
                    Ok(n) => buffer.extend_from_slice(&chunk[..n]),
                }
            }
            let body: serde_json::Value =
                serde_json::from_slice(&buffer[header_end + 4..]).unwrap();
            let inputs = body["input"].as_array().unwrap().len();
            let data: Vec<serde_json::Value> = (0..inputs)
                .map(|i| {
                    // distinct, deterministic 4-dim vectors
                    let x = (i as f32 + 1.0) / (inputs as f32 + 1.0);
                    serde_json::json!({"index": i, "embedding": [x, 1.0 - x, 0.25, -0.5]})
                })
                .collect();
            let reply = serde_json::json!({ "data": data }).to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (url, handle)
}

#[test]
fn remote_provider_round_trips_through_build_and_search() {
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("remote.idx");
    // one connection for the build batch, one for the query embedding
    let (url, handle) = start_embedding_stub(2);

    let run = |args: &[&str]| {
        std::process::Command::new(env!("CARGO_BIN_EXE_rerank-search"))
            .env("RERANK_SEARCH_EMBED_URL", &url)
            .env("RERANK_SEARCH_API_KEY", "stub-key")
            .env_remove("RERANK_SEARCH_CHAT_URL")
            .args(args)
            .output()
            .expect("binary runs")
    };

    let output = run(&[
        "build",
        "--csv",
        fixtures().join("food.csv").to_str().unwrap(),
        "--text-cols",
        "title,description",
        "--provider",
        "remote",
        "--model",
        "stub-embed-model",
        "--out",
        index.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "build failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary = String::from_utf8_lossy(&output.stdout);
    assert!(summary.contains("34 records indexed"));
    assert!(summary.contains("dim=4"));
    assert!(summary.contains("model=stub-embed-model"));

    let output = run(&[
        "search",
        "--index",
        index.to_str().unwrap(),
        "--csv",
        fixtures().join("food.csv").to_str().unwrap(),
        "--text-cols",
        "title,description",
        "--query",
        "anything at all",
        "--mode",
        "raw",
        "--json",
    ]);
    assert!(
        output.status.success(),
        "search failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let result: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("search emits JSON");
    assert_eq!(result["mode"], "raw");
    assert_eq!(result["results"].as_array().unwrap().len(), 3);

    handle.join().unwrap();
}

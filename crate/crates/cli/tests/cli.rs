use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use nalgebra::{Point3, Vector3};
use partkit_core::mesh::primitives::box_mesh;
use partkit_core::metrics::Layout;
use partkit_core::segmentation::RecordFile;
use partkit_core::{Obb, PipelineConfig, ShapeRecord, TriMesh};
use serde_json::Value;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn partkit(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_partkit"));
    cmd.env_remove("CAPTION_MOCK").env_remove("CAPTION_ENDPOINT");
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Relative path to file bytes for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    if dir.exists() {
        walk(dir, dir, &mut out);
    }
    out
}

fn segment_fixture(tmp: &TempDir) -> PathBuf {
    let out = tmp.path().join("seg");
    let o = partkit(&[&"segment", &fixtures().join("segment3"), &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

/// A record of two touching boxes with hand-placed parts.
fn write_record(dir: &Path, parts: Vec<TriMesh>, obbs: Vec<Obb>) -> PathBuf {
    let stats = partkit_core::segmentation::compute_stats(
        &parts,
        &obbs,
        vec![partkit_core::obb::Degeneracy::None; obbs.len()],
        1e-3,
    );
    let record = ShapeRecord {
        parts,
        obbs,
        prompt: None,
        stats,
        provenance: partkit_core::segmentation::Provenance {
            source: "test".into(),
            config_hash: PipelineConfig::default().hash(),
        },
    };
    record.write(dir).unwrap()
}

fn two_boxes() -> (Vec<TriMesh>, Vec<Obb>) {
    let obbs = vec![
        Obb::axis_aligned(Point3::new(-0.2, 0.0, 0.0), Vector3::new(0.2, 0.15, 0.1)),
        Obb::axis_aligned(Point3::new(0.15, 0.0, 0.0), Vector3::new(0.15, 0.1, 0.2)),
    ];
    (obbs.iter().map(Obb::to_mesh).collect(), obbs)
}

#[test]
fn segment_writes_records_and_logs_rejections() {
    let tmp = TempDir::new().unwrap();
    let out = segment_fixture(&tmp);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["inputs"], 3);
    assert_eq!(summary["accepted"].as_array().unwrap().len(), 2);
    assert_eq!(summary["rejected"], 1);
    assert_eq!(summary["errors"], 0);
    let log = std::fs::read_to_string(out.join("rejections.jsonl")).unwrap();
    let lines: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0]["source"].as_str().unwrap().ends_with("c_dominant.obj"));
    assert_eq!(lines[0]["reasons"][0]["criterion"], "ratio");
    for name in ["a_chair", "b_bed"] {
        let record: RecordFile =
            serde_json::from_value(json(&out.join("records").join(name).join("record.json"))).unwrap();
        assert!(record.prompt.is_none());
        for part in &record.parts {
            assert!(out.join("records").join(name).join(part).is_file());
        }
    }
}

#[test]
fn segment_empty_directory_succeeds() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = tmp.path().join("out");
    let o = partkit(&[&"segment", &empty, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["inputs"], 0);
    assert!(!out.join("records").exists());
}

#[test]
fn segment_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = partkit(&[&"segment", &fixtures().join("segment3"), &"--out", out]);
        assert_eq!(code(&o), 0);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert!(sa.len() > 10);
    assert_eq!(sa, sb);
}

#[test]
fn provenance_hash_matches_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = tmp.path().join("config.toml");
    std::fs::write(
        &cfg_path,
        "seed = 42\nparallelism = 2\n[metrics]\nvoxel_resolution = 32\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = partkit(&[
        &"--config",
        &cfg_path,
        &"segment",
        &fixtures().join("segment3"),
        &"--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let config: PipelineConfig = toml::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let expected = config.hash();
    assert_ne!(expected, PipelineConfig::default().hash());
    assert_eq!(json(&out.join("summary.json"))["config_hash"], expected.as_str());
    for name in ["a_chair", "b_bed"] {
        let record = json(&out.join("records").join(name).join("record.json"));
        assert_eq!(record["provenance"]["config_hash"], expected.as_str());
    }
}

#[test]
fn segment_writes_only_into_its_output_directory() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("input");
    std::fs::create_dir(&input).unwrap();
    for e in std::fs::read_dir(fixtures().join("segment3")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, input.join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(
        input.join("..weird name!.obj"),
        std::fs::read(input.join("a_chair.obj")).unwrap(),
    )
    .unwrap();
    let before = snapshot(tmp.path());
    let out = tmp.path().join("out");
    let o = partkit(&[&"segment", &input, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let after = snapshot(tmp.path());
    for (path, bytes) in &after {
        if path.starts_with("out") {
            continue;
        }
        assert_eq!(before.get(path), Some(bytes), "{path:?} changed");
    }
    assert_eq!(after.keys().filter(|p| !p.starts_with("out")).count(), before.len());
    assert!(out.join("records/__weird_name_/record.json").is_file());
}

#[test]
fn segment_reports_unreadable_inputs() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("broken.obj");
    std::fs::write(&bad, "v 0 0 0\nf 1 2 3\n").unwrap();
    let out = tmp.path().join("out");
    let o = partkit(&[
        &"segment",
        &bad,
        &fixtures().join("segment3/a_chair.obj"),
        &"--out",
        &out,
    ]);
    assert_eq!(code(&o), 1);
    let errors = std::fs::read_to_string(out.join("errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), 1);
    assert!(errors.contains("broken.obj"));
    assert_eq!(json(&out.join("summary.json"))["accepted"].as_array().unwrap().len(), 1);
}

#[test]
fn metrics_on_aligned_record() {
    let tmp = TempDir::new().unwrap();
    let (parts, obbs) = two_boxes();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs.clone());
    let layout = tmp.path().join("layout.json");
    std::fs::write(
        &layout,
        serde_json::to_string(&Layout::new("two boxes", obbs).unwrap()).unwrap(),
    )
    .unwrap();
    let out = tmp.path().join("metrics.json");
    let o = partkit(&[&"metrics", &rec, &"--layout", &layout, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&out);
    let keys: Vec<&str> = m.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "mean_part_iou",
            "object_iou",
            "object_iou_stderr",
            "part_iou",
            "voxel_iou"
        ]
    );
    assert!((m["mean_part_iou"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(m["part_iou"].as_array().unwrap().len(), 2);

    let (mut moved, _) = two_boxes();
    moved[1] = moved[1].map_vertices(|p| p + Vector3::new(0.0, 0.2, 0.0));
    let truth = write_record(&tmp.path().join("truth"), moved, two_boxes().1);
    let o = partkit(&[&"metrics", &rec, &"--ground-truth", &truth]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let against_truth: Value = serde_json::from_slice(&o.stdout).unwrap();
    let o = partkit(&[&"metrics", &rec, &"--ground-truth", &rec]);
    let against_self: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(against_self["voxel_iou"], 1.0);
    assert!(against_truth["voxel_iou"].as_f64().unwrap() < 0.9);
    assert_eq!(against_truth["mean_part_iou"], against_self["mean_part_iou"]);
}

#[test]
fn schema_errors_exit_2_with_json_path() {
    let tmp = TempDir::new().unwrap();
    let (parts, obbs) = two_boxes();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let layout = tmp.path().join("layout.json");
    std::fs::write(
        &layout,
        r#"{"prompt": "x", "boxes": [{"center": [0, 0, 0], "half_extents": [1, 1], "rotation": [0, 0, 0, 1]}]}"#,
    )
    .unwrap();
    let o = partkit(&[&"metrics", &rec, &"--layout", &layout]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("boxes[0].half_extents"), "{}", stderr(&o));

    let scenario = tmp.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"field": {"type": "contracting", "rate": 1}, "parts": [{"part_id": 0, "rows": 1, "cols": 1, "sed": 3}]}"#,
    )
    .unwrap();
    let o = partkit(&[&"simulate", &scenario, &"--out", &tmp.path().join("sim")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("parts[0]"), "{}", stderr(&o));

    let cfg = tmp.path().join("config.json");
    std::fs::write(&cfg, r#"{"refine": {"beam": {"beam_width": 0}}}"#).unwrap();
    let o = partkit(&[&"--config", &cfg, &"obb", &fixtures().join("segment3/a_chair.obj")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn optimize_recovers_planted_offset() {
    let tmp = TempDir::new().unwrap();
    let (parts, obbs) = two_boxes();
    let shifted: Vec<Obb> = obbs
        .iter()
        .map(|b| Obb::new(b.center + Vector3::new(0.1, 0.0, 0.0), b.half_extents, b.rotation))
        .collect();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let layout = tmp.path().join("layout.json");
    std::fs::write(
        &layout,
        serde_json::to_string(&Layout::new("", shifted).unwrap()).unwrap(),
    )
    .unwrap();
    let out = tmp.path().join("opt");
    let o = partkit(&[&"optimize", &rec, &"--layout", &layout, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    assert!(report["score"].as_f64().unwrap() >= 0.95, "{report}");
    let t = json(&out.join("transform.json"));
    assert!((t["translation"][0].as_f64().unwrap() - 0.1).abs() < 0.01, "{t}");
    assert!(out.join("parts/part_001.obj").is_file());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let scores: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[1] >= w[0]));

    let inv = tmp.path().join("inv");
    let o = partkit(&[&"optimize", &rec, &"--layout", &layout, &"--inverse", &"--out", &inv]);
    assert_eq!(code(&o), 0);
    let ti = json(&inv.join("transform.json"));
    assert!((ti["translation"][0].as_f64().unwrap() + 0.1).abs() < 0.01, "{ti}");
}

#[test]
fn clean_removes_floaters() {
    let tmp = TempDir::new().unwrap();
    let (mut parts, obbs) = two_boxes();
    let floater = box_mesh(Point3::new(0.4, 0.4, 0.4), Vector3::repeat(0.02));
    parts[0] = TriMesh::concat([&parts[0], &floater]);
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let out = tmp.path().join("clean");
    let o = partkit(&[&"clean", &rec, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&out.join("report.json"));
    assert_eq!(report["faces_before"], 36);
    assert_eq!(report["faces_after"], 24);
    assert_eq!(report["parts"][0]["action"], "cleaned");
    assert_eq!(report["parts"][1]["action"], "untouched");
}

#[test]
fn stats_over_segment_output() {
    let tmp = TempDir::new().unwrap();
    let seg = segment_fixture(&tmp);
    let out = tmp.path().join("stats.json");
    let o = partkit(&[&"stats", &seg, &"--bins", &"5", &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = json(&out);
    assert_eq!(s["sample_count"], 2);
    assert_eq!(s["mean_part_iou"]["edges"].as_array().unwrap().len(), 6);
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&partkit(&[&"stats", &empty])), 2);
    assert_eq!(code(&partkit(&[&"stats", &tmp.path().join("missing")])), 1);
}

#[test]
fn obb_reports_box_and_components() {
    let o = partkit(&[&"obb", &fixtures().join("corpus/s07_single.obj"), &"--components"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["components"].as_array().unwrap().len(), 1);
    assert_eq!(v["object"]["degeneracy"], "none");
    assert!(v["object"]["volume"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_linear_field_reaches_target() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixtures().join("scenarios/linear.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = partkit(&[&"simulate", &scenario, &"--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    let header: Vec<&str> = trace.lines().next().unwrap().split(',').collect();
    assert_eq!(header[..4], ["step", "t", "alpha_c", "lambda_t"]);
    assert_eq!(*header.last().unwrap(), "target_error");
    let last = trace.lines().last().unwrap();
    let err: f64 = last.rsplit(',').next().unwrap().parse().unwrap();
    assert!(err < 1e-6, "{err}");
    assert_eq!(trace.lines().count(), 51);

    let bytes = std::fs::read(a.join("latents.bin")).unwrap();
    assert_eq!(&bytes[..4], b"LATB");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 12 + 3 * 16 + (32 + 32 + 16) * 8);
}

#[test]
fn simulate_frozen_part_matches_reference_run() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = partkit(&[&"simulate", &fixtures().join("scenarios/frozen.json"), &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["frozen"], serde_json::json!([0]));
    assert_eq!(summary["anneal_applications"], 40);

    // The frozen part's norms equal those of an unfrozen run started from the reference seeds.
    let reference = tmp.path().join("reference.json");
    std::fs::write(
        &reference,
        r#"{"field": {"type": "contracting", "rate": 0.8}, "sampler": {"steps": 20, "layers_per_pass": 2},
            "parts": [{"part_id": 0, "rows": 4, "cols": 8, "seed": 1011}, {"part_id": 1, "rows": 4, "cols": 8, "seed": 1012}]}"#,
    )
    .unwrap();
    let ref_out = tmp.path().join("ref");
    assert_eq!(code(&partkit(&[&"simulate", &reference, &"--out", &ref_out])), 0);
    let column = |dir: &Path, name: &str| -> Vec<String> {
        let text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
        let mut lines = text.lines();
        let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
        lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
    };
    assert_eq!(column(&out, "norm_part_0"), column(&ref_out, "norm_part_0"));
    assert_ne!(column(&out, "norm_part_1"), column(&ref_out, "norm_part_1"));
}

#[test]
fn caption_mock_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (parts, obbs) = two_boxes();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let run = |out: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_partkit"))
            .args(["caption".as_ref(), rec.as_os_str(), "--out".as_ref(), out.as_os_str()])
            .env("CAPTION_MOCK", "1")
            .env_remove("CAPTION_ENDPOINT")
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        json(&out.join("caption.json"))["caption"].as_str().unwrap().to_string()
    };
    let (a, b) = (run(&tmp.path().join("a")), run(&tmp.path().join("b")));
    assert_eq!(a, b);
    assert!(!a.is_empty());
    assert_eq!(json(&tmp.path().join("a/record.json"))["prompt"], a.as_str());
}

#[test]
fn caption_without_endpoint_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let (parts, obbs) = two_boxes();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let o = partkit(&[&"caption", &rec, &"--out", &tmp.path().join("out")]);
    assert_eq!(code(&o), 2);
}

struct Request {
    body: Value,
}

/// Serves `responses` in order, one per connection, recording request bodies.
fn fake_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Request>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/caption", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Request {
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
    });
    (url, seen, handle)
}

fn caption_with_server(tmp: &TempDir, url: &str) -> Output {
    let (parts, obbs) = two_boxes();
    let rec = write_record(&tmp.path().join("rec"), parts, obbs);
    let image = tmp.path().join("view.png");
    std::fs::write(&image, [0x89, b'P', b'N', b'G', 1, 2, 3]).unwrap();
    Command::new(env!("CARGO_BIN_EXE_partkit"))
        .args([
            "caption".as_ref(),
            rec.as_os_str(),
            "--image".as_ref(),
            image.as_os_str(),
        ])
        .args(["--backoff-ms", "5", "--timeout-s", "10", "--out"])
        .arg(tmp.path().join("out"))
        .env("CAPTION_ENDPOINT", url)
        .env_remove("CAPTION_MOCK")
        .output()
        .unwrap()
}

#[test]
fn caption_returns_canned_response_verbatim() {
    let tmp = TempDir::new().unwrap();
    let canned = "A stool: a flat round seat on three splayed legs \u{2014} \"quoted\".";
    let body = serde_json::json!({ "caption": canned }).to_string();
    let (url, seen, server) = fake_server(vec![(200, body)]);
    let o = caption_with_server(&tmp, &url);
    server.join().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&tmp.path().join("out/caption.json"))["caption"], canned);
    assert_eq!(json(&tmp.path().join("out/record.json"))["prompt"], canned);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].body["images"], serde_json::json!(["iVBORwECAw=="]));
    assert!(seen[0].body["prompt"].as_str().unwrap().contains("2x2"));
}

#[test]
fn caption_gives_up_after_three_server_errors() {
    let tmp = TempDir::new().unwrap();
    let fail = (500, r#"{"error": "boom"}"#.to_string());
    let (url, seen, server) = fake_server(vec![fail.clone(), fail.clone(), fail]);
    let o = caption_with_server(&tmp, &url);
    server.join().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(seen.lock().unwrap().len(), 3);
    let outcome = json(&tmp.path().join("out/caption.json"));
    assert_eq!(outcome["caption"], Value::Null);
    assert_eq!(outcome["attempts"], 3);
    assert_eq!(json(&tmp.path().join("out/record.json"))["prompt"], Value::Null);
}

#[test]
fn caption_recovers_after_transient_failure() {
    let tmp = TempDir::new().unwrap();
    let (url, seen, server) = fake_server(vec![
        (503, "{}".to_string()),
        (200, r#"{"caption": "a table"}"#.to_string()),
    ]);
    let o = caption_with_server(&tmp, &url);
    server.join().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(seen.lock().unwrap().len(), 2);
    assert_eq!(json(&tmp.path().join("out/caption.json"))["attempts"], 2);
    assert_eq!(json(&tmp.path().join("out/record.json"))["prompt"], "a table");
}

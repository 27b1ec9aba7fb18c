use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bridgecause_core::diagnosis::DiagnosisReport;
use bridgecause_core::ingest::Scene;
use bridgecause_core::neighborhood::{shooting_points, ShootingDocument};
use bridgecause_core::vqa::{generate_qa, Annotation, AnnotationOracle, Vocabulary};
use bridgecause_harness::{field_fixture, StubBehaviour, StubServer};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridgecause"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Fx {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fx {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let o = run(&["fixture", "--out", root.to_str().unwrap()]);
        assert!(o.status.success());
        Fx { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn config(&self) -> String {
        self.path("bridgecause.toml")
    }
}

fn report(text: &str) -> DiagnosisReport {
    serde_json::from_str(text).unwrap()
}

#[test]
fn diagnose_reproduces_the_table() {
    let fx = Fx::new();
    let out = stdout(&run(&[
        "--config",
        &fx.config(),
        "diagnose",
        "--no-timestamp",
    ]));
    let r = report(&out);
    assert_eq!(r.generated_at, None);
    let rows: Vec<(usize, usize, &str)> = r
        .evidence
        .iter()
        .map(|e| (e.n, e.m, e.ratio_display.as_str()))
        .collect();
    assert_eq!(
        rows,
        vec![
            (61, 58, "0.95"),
            (22, 18, "0.82"),
            (0, 0, "N/A"),
            (0, 0, "N/A")
        ]
    );
    assert_eq!(r.analysed_images.len(), 64);
}

#[test]
fn timestamp_is_present_by_default() {
    let fx = Fx::new();
    let r = report(&stdout(&run(&["--config", &fx.config(), "diagnose"])));
    let ts = r.generated_at.expect("timestamp");
    assert!(ts.ends_with('Z') && ts.contains('T'), "{ts}");
}

#[test]
fn table_and_report_files() {
    let fx = Fx::new();
    let (json, table) = (fx.path("out.json"), fx.path("table.txt"));
    let o = run(&[
        "--config",
        &fx.config(),
        "diagnose",
        "-o",
        &json,
        "--table",
        &table,
    ]);
    assert!(o.status.success() && o.stdout.is_empty());
    let table = std::fs::read_to_string(table).unwrap();
    assert!(table.contains("Member:            cross beam"));
    assert!(table
        .lines()
        .any(|l| l.starts_with("leaking from cracking on the slab") && l.ends_with("0.95")));
    report(&std::fs::read_to_string(json).unwrap());
}

#[test]
fn output_is_identical_across_concurrency() {
    let fx = Fx::new();
    let outs: Vec<String> = ["1", "4", "8", "1"]
        .iter()
        .map(|c| {
            stdout(&run(&[
                "--config",
                &fx.config(),
                "diagnose",
                "--no-timestamp",
                "--concurrency",
                c,
            ]))
        })
        .collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn flags_override_the_run_file() {
    let fx = Fx::new();
    let r = report(&stdout(&run(&[
        "--config",
        &fx.config(),
        "diagnose",
        "--no-timestamp",
        "--radius",
        "0",
    ])));
    assert_eq!(r.surrounding_count, 0);
    assert_eq!(r.config.radius, 0.0);
    assert_eq!(r.evidence[0].n, 0);
}

#[test]
fn exit_codes() {
    let fx = Fx::new();
    let fixture = field_fixture();
    let code = |o: Output| o.status.code().unwrap();

    // Unknown interest id: configuration.
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "diagnose",
            "--interest",
            "NOPE"
        ])),
        2
    );
    // Missing input file: io.
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "shoot",
            "--mesh",
            &fx.path("none.obj")
        ])),
        1
    );
    // Malformed mesh: parse.
    std::fs::write(fx.path("bad.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "shoot",
            "--mesh",
            &fx.path("bad.obj")
        ])),
        3
    );
    // Empty mesh: parse.
    std::fs::write(fx.path("empty.obj"), "# nothing\n").unwrap();
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "shoot",
            "--mesh",
            &fx.path("empty.obj")
        ])),
        3
    );
    // Unreachable oracle: identification cannot proceed.
    let o = run(&[
        "--config",
        &fx.config(),
        "diagnose",
        "--oracle-endpoint",
        "http://127.0.0.1:9/",
        "--retries",
        "1",
    ]);
    assert_eq!(code(o), 4);
    // Interest camera looking away from the mesh.
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "neighbors",
            "--interest",
            &fixture.missed_ids[0]
        ])),
        5
    );
    // Two oracle sources on the command line: usage error.
    assert_eq!(
        code(run(&[
            "diagnose",
            "--annotations",
            "a",
            "--oracle-endpoint",
            "b"
        ])),
        2
    );
    // Rule naming an unknown member: configuration.
    std::fs::write(
        fx.path("bad_rules.json"),
        r#"[{"cause_name": "x", "trigger_damage": "corrosion", "related_member": "tower", "events": ["leaking"]}]"#,
    )
    .unwrap();
    assert_eq!(
        code(run(&[
            "--config",
            &fx.config(),
            "diagnose",
            "--rules",
            &fx.path("bad_rules.json")
        ])),
        2
    );
}

#[test]
fn shoot_matches_the_library() {
    let fx = Fx::new();
    let out = stdout(&run(&["--config", &fx.config(), "shoot"]));
    let scene = Scene::load(
        &std::fs::read(fx.path("mesh.obj")).unwrap(),
        &std::fs::read(fx.path("poses.json")).unwrap(),
    )
    .unwrap();
    let expected = serde_json::to_value(ShootingDocument::new(&shooting_points(&scene))).unwrap();
    assert_eq!(serde_json::from_str::<Value>(&out).unwrap(), expected);
    assert_eq!(expected["missed"].as_array().unwrap().len(), 2);
}

#[test]
fn single_camera_scene() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, poses) = (dir.path().join("m.obj"), dir.path().join("p.json"));
    std::fs::write(&mesh, "v -1 -1 3\nv 1 -1 3\nv 0 1 3\nf 1 2 3\n").unwrap();
    std::fs::write(
        &poses,
        r#"[{"image_id": "only", "position": [0, 0, 0], "view_dir": [0, 0, 1]}]"#,
    )
    .unwrap();
    let out = stdout(&run(&[
        "shoot",
        "--mesh",
        mesh.to_str().unwrap(),
        "--poses",
        poses.to_str().unwrap(),
    ]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["hits"][0]["image_id"], "only");
    assert_eq!(v["hits"][0]["point"], serde_json::json!([0.0, 0.0, 3.0]));
}

fn surrounding(fx: &Fx, radius: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(&stdout(&run(&[
        "--config",
        &fx.config(),
        "neighbors",
        "--radius",
        radius,
    ])))
    .unwrap();
    v["cameras"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["class"] == "surrounding")
        .map(|c| c["image_id"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn neighbors_radius_sweep() {
    let fx = Fx::new();
    assert!(surrounding(&fx, "0").is_empty());
    assert_eq!(surrounding(&fx, "1.0").len(), 63);
    let mut previous: Vec<String> = Vec::new();
    for r in ["0", "0.3", "0.6", "0.9", "1.0", "2", "4", "8", "30"] {
        let now = surrounding(&fx, r);
        assert!(previous.iter().all(|id| now.contains(id)), "shrank at {r}");
        previous = now;
    }
    assert_eq!(previous.len(), 75);
}

#[test]
fn genqa_corpus() {
    let fx = Fx::new();
    let out = stdout(&run(&[
        "genqa",
        "--annotations",
        &fx.path("annotations.json"),
    ]));
    let vocab = Vocabulary::default();
    let anns: Vec<Annotation> =
        serde_json::from_str(&std::fs::read_to_string(fx.path("annotations.json")).unwrap())
            .unwrap();
    let expected: usize = anns
        .iter()
        .map(|a| generate_qa(a, &vocab).unwrap().len())
        .sum();
    assert_eq!(out.lines().count(), expected);
    let again = stdout(&run(&[
        "genqa",
        "--annotations",
        &fx.path("annotations.json"),
    ]));
    assert_eq!(out, again);

    // Every record is answered the same way by the annotation oracle.
    let oracle = AnnotationOracle::new(vocab.clone(), &anns).unwrap();
    for line in out.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        let q =
            bridgecause_core::vqa::Question::parse(rec["question_text"].as_str().unwrap(), &vocab)
                .unwrap();
        assert_eq!(q.template_id.as_str(), rec["template_id"].as_str().unwrap());
        use bridgecause_core::vqa::AnswerOracle;
        let a = oracle
            .answer(rec["image_id"].as_str().unwrap(), &q)
            .unwrap();
        assert_eq!(a.value, rec["answer"].as_str().unwrap());
    }

    std::fs::write(fx.path("none.json"), "[]").unwrap();
    assert_eq!(
        stdout(&run(&["genqa", "--annotations", &fx.path("none.json")])),
        ""
    );
}

#[test]
fn remote_oracle_matches_annotations() {
    let fx = Fx::new();
    let anns: Vec<Annotation> =
        serde_json::from_str(&std::fs::read_to_string(fx.path("annotations.json")).unwrap())
            .unwrap();
    let server = StubServer::start(
        AnnotationOracle::new(Vocabulary::default(), &anns).unwrap(),
        StubBehaviour::default(),
    )
    .unwrap();
    let local = report(&stdout(&run(&[
        "--config",
        &fx.config(),
        "diagnose",
        "--no-timestamp",
    ])));
    let remote = run(&[
        "diagnose",
        "--mesh",
        &fx.path("mesh.obj"),
        "--poses",
        &fx.path("poses.json"),
        "--interest",
        &field_fixture().interest_id,
        "--oracle-endpoint",
        &server.url(),
        "--no-timestamp",
        "--concurrency",
        "4",
    ]);
    let mut remote = report(&stdout(&remote));
    assert_eq!(remote.config.oracle, format!("remote {}", server.url()));
    remote.config.oracle = local.config.oracle.clone();
    assert_eq!(remote, local);
}

#[test]
fn config_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "radius = \"wide\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "shoot"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&[
        "--config",
        Path::new("/nonexistent/c.toml").to_str().unwrap(),
        "shoot",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["shoot"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--mesh"));
}

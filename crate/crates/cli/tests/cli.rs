use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use svat_core::dataset::{DatasetManifest, Split};
use svat_core::eval::{self, EvalReport, PredictionRecord};
use svat_core::prompt::label_to_answer;
use svat_core::sampler::DistractorMode;

fn svat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svat"))
        .args(args)
        .env_remove("SVAT_ASSET_ROOT")
        .output()
        .expect("spawn svat")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(root: &Path, family: &str, splits: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "generate", "--family", family, "--splits", splits, "--seed", "7", "--out",
    ];
    let root = root.to_str().unwrap();
    args.push(root);
    args.extend_from_slice(extra);
    svat(&args)
}

#[test]
fn help_documents_every_subcommand_flag() {
    let cases: &[(&str, &[&str])] = &[
        (
            "generate",
            &[
                "--family",
                "--paper-grid",
                "--splits",
                "--seed",
                "--out",
                "--workers",
                "--config",
                "--background-fallback",
                "--object-fallback",
                "--distractor-mode",
                "--min-object-separation",
                "--no-images",
                "--asset-root",
            ],
        ),
        (
            "plan",
            &[
                "--strategy",
                "--target",
                "--epochs",
                "--k",
                "--mix-source",
                "--seed",
                "--build",
            ],
        ),
        ("validate", &["--report"]),
        (
            "evaluate",
            &["--dataset", "--predictions", "--alpha", "--split", "--report"],
        ),
        ("compare", &["--out"]),
        ("correlate", &["--pair", "--file"]),
        ("regenerate", &["--out", "--workers"]),
    ];
    for (cmd, flags) in cases {
        let o = svat(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
    assert_eq!(code(&svat(&["grid", "--bogus"])), 2);
    assert_eq!(
        code(&svat(&["generate", "--family", "bg-i1_obj-easy_m1_text-none"])),
        2,
        "seed is required"
    );
}

#[test]
fn grid_lists_fifty_families() {
    let o = svat(&["grid"]);
    assert_eq!(code(&o), 0);
    let ids: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(ids.len(), 50);
    assert!(ids.contains(&"bg-i5_obj-hard_m3_text-guide".to_string()));
    assert!(!ids.iter().any(|i| i.contains("_m3_text-none")));
}

#[test]
fn bad_family_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = generate(tmp.path(), "bg-i9_obj-easy_m1_text-none", "1,0,1", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bg-i9"));
    let o = generate(
        tmp.path(),
        "bg-i1_obj-hard_m1_text-none",
        "1,0,1",
        &["--object-fallback", "error"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("hard"));
}

#[test]
fn rerunning_generate_changes_no_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let fam = "bg-i4_obj-tool_m3_text-guide";
    assert_eq!(code(&generate(tmp.path(), fam, "3,1,2", &["--workers", "1"])), 0);
    let dir = tmp.path().join("families").join(fam);
    let snapshot = |d: &Path| -> Vec<Vec<u8>> {
        let mut files = vec![fs::read(d.join("family.json")).unwrap()];
        for split in ["train", "val", "test"] {
            files.push(fs::read(d.join(split).join("bundles.jsonl")).unwrap());
            let mut imgs: Vec<_> = fs::read_dir(d.join(split).join("images"))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            imgs.sort();
            files.extend(imgs.iter().map(|p| fs::read(p).unwrap()));
        }
        files
    };
    let before = snapshot(&dir);
    assert_eq!(before.len(), 1 + 3 + 6 * 5);
    assert_eq!(code(&generate(tmp.path(), fam, "3,1,2", &["--workers", "3"])), 0);
    assert_eq!(snapshot(&dir), before);

    let regen = tmp.path().join("regen");
    let o = svat(&[
        "regenerate",
        dir.to_str().unwrap(),
        "--out",
        regen.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(snapshot(&regen), before);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("gen.toml");
    fs::write(
        &cfg,
        "[sampler]\ndistractor_mode = \"unconstrained\"\n\n[render]\nwidth = 96\nheight = 96\n",
    )
    .unwrap();
    let fam = "bg-i1_obj-shape_m3_text-guide";
    let cfg_s = cfg.to_str().unwrap();

    let a = tmp.path().join("a");
    assert_eq!(
        code(&generate(&a, fam, "1,0,1", &["--config", cfg_s, "--no-images"])),
        0
    );
    let m = DatasetManifest::load(a.join("families").join(fam)).unwrap();
    assert_eq!(m.header.config.sampler.distractor_mode, DistractorMode::Unconstrained);
    assert_eq!(m.header.config.render.width, 96);

    let b = tmp.path().join("b");
    let o = generate(
        &b,
        fam,
        "1,0,1",
        &[
            "--config",
            cfg_s,
            "--distractor-mode",
            "algorithm-faithful",
            "--no-images",
        ],
    );
    assert_eq!(code(&o), 0);
    let m = DatasetManifest::load(b.join("families").join(fam)).unwrap();
    assert_eq!(
        m.header.config.sampler.distractor_mode,
        DistractorMode::AlgorithmFaithful
    );
    assert_eq!(m.header.config.render.width, 96);

    fs::write(&cfg, "[sampler]\nmystery = 1\n").unwrap();
    assert_eq!(code(&generate(&b, fam, "1,0,1", &["--config", cfg_s])), 2);
}

#[test]
fn validate_evaluate_compare_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    for fam in ["bg-i1_obj-easy_m1_text-none", "bg-i2_obj-shape_m3_text-guide"] {
        assert_eq!(code(&generate(root, fam, "2,0,20", &["--no-images"])), 0);
    }
    let root_s = root.to_str().unwrap();
    let o = svat(&[
        "validate",
        root_s,
        "--report",
        root.join("audit.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).matches(" ok").count(), 2);

    let mut preds = Vec::new();
    for d in fs::read_dir(root.join("families")).unwrap() {
        let m = DatasetManifest::load(d.unwrap().path()).unwrap();
        for b in m.read_split(Split::Test).unwrap() {
            preds.push(PredictionRecord {
                output: format!("Answer: {}", label_to_answer(b.query.label)),
                bundle_id: b.bundle_id,
            });
        }
    }
    let perfect = root.join("perfect.jsonl");
    eval::write_predictions(&perfect, &preds).unwrap();
    let report_a = root.join("a.json");
    let o = svat(&[
        "evaluate",
        "--dataset",
        root_s,
        "--predictions",
        perfect.to_str().unwrap(),
        "--report",
        report_a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = EvalReport::load(&report_a).unwrap();
    assert_eq!(report.families.len(), 2);
    assert!(report
        .families
        .iter()
        .all(|f| f.accuracy == 1.0 && f.n == 20 && f.significant));

    for p in preds.iter_mut() {
        p.output = "Yes".into();
    }
    let yes = root.join("yes.jsonl");
    eval::write_predictions(&yes, &preds).unwrap();
    let report_b = root.join("b.json");
    let o = svat(&[
        "evaluate",
        "--dataset",
        root_s,
        "--predictions",
        yes.to_str().unwrap(),
        "--report",
        report_b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let o = svat(&[
        "compare",
        &format!("ft={}", report_a.display()),
        &format!("yes={}", report_b.display()),
        "--out",
        root.join("cmp.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1.0000*"));
    assert!(root.join("cmp.json").is_file());

    preds.push(PredictionRecord {
        bundle_id: "bg-i1_obj-easy_m1_text-none-test-9999999".into(),
        output: "Yes".into(),
    });
    let bad = root.join("bad.jsonl");
    eval::write_predictions(&bad, &preds).unwrap();
    let o = svat(&["evaluate", "--dataset", root_s, "--predictions", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("9999999"), "{}", stderr(&o));
}

#[test]
fn validate_fails_on_tampered_data() {
    let tmp = tempfile::tempdir().unwrap();
    let fam = "bg-i1_obj-easy_m1_text-none";
    assert_eq!(code(&generate(tmp.path(), fam, "0,0,3", &["--no-images"])), 0);
    let path = tmp.path().join("families").join(fam).join("test/bundles.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("\"tau\":", "\"tau\":0.5,\"x\":", 1)).unwrap();
    let o = svat(&["validate", tmp.path().join("families").join(fam).to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAILED"));
    assert_eq!(
        code(&svat(&["validate", tmp.path().join("nothing").to_str().unwrap()])),
        1
    );
}

#[test]
fn plan_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let target = "bg-i5_obj-hard_m3_text-guide";
    let o = svat(&["plan", "--strategy", "m", "--target", target, "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("plans").join(format!("m_{target}.json"))).unwrap())
            .unwrap();
    assert_eq!(plan["stages"].as_array().unwrap().len(), 2);
    assert_eq!(plan["stages"][0]["family"], "bg-i5_obj-hard_m1_text-guide");
    assert_eq!(plan["metadata"]["learning_rate"], 1e-4);

    let o = svat(&["plan", "--strategy", "more-epochs", "--target", target, "--out", out]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("epochs 6"));

    let o = svat(&[
        "plan",
        "--strategy",
        "m",
        "--target",
        "bg-i5_obj-hard_m1_text-none",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(
        code(&svat(&["plan", "--strategy", "mix", "--target", target, "--out", out])),
        2,
        "mix needs a seed"
    );
    let o = svat(&[
        "plan",
        "--strategy",
        "mix",
        "--target",
        target,
        "--seed",
        "1",
        "--build",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 1, "sources were never generated");
    assert_eq!(code(&svat(&["plan", "--strategy", "spiral", "--target", target])), 2);
}

#[test]
fn correlate_command() {
    let o = svat(&[
        "correlate",
        "--pair",
        "1,2",
        "--pair",
        "2,4",
        "--pair",
        "3,5",
        "--pair",
        "4,4",
        "--pair",
        "5,5",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("r_squared 0.600000"), "{}", stdout(&o));
    assert_eq!(
        code(&svat(&["correlate", "--pair", "1,1", "--pair", "2,1", "--pair", "3,1"])),
        2
    );
}

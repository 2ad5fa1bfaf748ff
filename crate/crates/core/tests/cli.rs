use std::path::Path;
use std::process::{Command, Output};

use brirkit::dsp::{write_wav, ImpulseResponse, WavFormat};

fn brirkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brirkit")).args(args).current_dir(cwd).output().unwrap()
}

fn dirac_wav(path: &Path) {
    let mut x = vec![0.0; 44100];
    x[100] = 0.5;
    write_wav(path, &ImpulseResponse::stereo(x.clone(), x, 44100).unwrap(), WavFormat::Float32).unwrap();
}

fn decay_wav(path: &Path, t: f64, seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = 44100;
    let mut ch = || -> Vec<f64> {
        (0..n)
            .map(|i| {
                let v = if i < 200 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                v * (-(i as f64) / 44100.0 * 6.9 / t).exp()
            })
            .collect()
    };
    let (mut l, mut r) = (ch(), ch());
    l[200] = 3.0;
    r[200] = 3.0;
    write_wav(path, &ImpulseResponse::stereo(l, r, 44100).unwrap(), WavFormat::Float32).unwrap();
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = brirkit(&["--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["simulate", "analyze", "compare", "package-abx", "abx-analyze"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn analyze_dirac_has_unit_definition() {
    let dir = tempfile::tempdir().unwrap();
    dirac_wav(&dir.path().join("dirac.wav"));
    let out = brirkit(&["analyze", "dirac.wav"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let d50 = headers.iter().position(|h| h == "d50").unwrap();
    let mut n = 0;
    for r in rows.records() {
        assert_eq!(r.unwrap()[d50].parse::<f64>().unwrap(), 1.0);
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn compare_reference_with_itself_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    decay_wav(&dir.path().join("ref.wav"), 0.6, 1);
    decay_wav(&dir.path().join("long.wav"), 0.9, 2);
    let out = brirkit(&["compare", "--reference", "ref.wav", "long.wav", "ref.wav"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,method,score,cells");
    assert!(lines[1].starts_with("1,ref,0.000000"), "{text}");
    assert!(lines[2].starts_with("2,long,"));
}

#[test]
fn src_dir_without_database_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    assert!(brirkit(&["paper-scene", "--out", "scene.json"], dir.path()).status.success());
    let out = brirkit(&["simulate", "--scene", "scene.json", "--method", "src-dir", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("directivity_db_ref"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn io_and_numeric_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = brirkit(&["analyze", "missing.wav"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    // A silent response has no decay to regress.
    write_wav(dir.path().join("zero.wav"), &ImpulseResponse::silent(2, 4410, 44100).unwrap(), WavFormat::Float32).unwrap();
    let out = brirkit(&["analyze", "zero.wav"], dir.path());
    assert!(matches!(out.status.code(), Some(2) | Some(4)), "{:?}", out.status);
}

#[test]
fn abx_analyze_refuses_without_key_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    dirac_wav(&root.join("a.wav"));
    decay_wav(&root.join("b.wav"), 0.4, 3);
    std::fs::write(
        root.join("conditions.json"),
        r#"{"conditions":[{"condition_id":"c1","method":"Omni-Dir","brir_a":"a.wav","brir_b":"b.wav"}]}"#,
    )
    .unwrap();
    assert!(brirkit(&["tokens", "--out", "tok"], root).status.success());
    let out = brirkit(&["package-abx", "--conditions", "conditions.json", "--tokens", "tok", "--out", "s"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("s/session.json").exists() && root.join("s/keys.json").exists());
    assert!(root.join("s/response-log.schema.json").exists());
    assert_eq!(std::fs::read_dir(root.join("s/stimuli")).unwrap().count(), 6);

    std::fs::write(root.join("log.jsonl"), "{\"trial_id\":\"t0001\",\"subject_id\":\"p\",\"answer\":\"A\",\"timestamp\":1}\n").unwrap();
    let ok = brirkit(&["abx-analyze", "--log", "log.jsonl", "--session", "s"], root);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("subject,condition"));

    std::fs::rename(root.join("s/keys.json"), root.join("keys.bak")).unwrap();
    let out = brirkit(&["abx-analyze", "--log", "log.jsonl", "--session", "s"], root);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("key file"));

    // Packaging again into the same directory needs --force.
    let again = brirkit(&["package-abx", "--conditions", "conditions.json", "--tokens", "tok", "--out", "s"], root);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn sweep_commands_write_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = brirkit(&["sweep", "generate", "--duration", "0.5", "--f1", "200", "--f2", "4000", "--rate", "8000", "--out", "s.wav"], dir.path());
    assert!(out.status.success());
    let spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.wav.sweep.json")).unwrap()).unwrap();
    assert_eq!(spec["f1"], 200.0);
    let out = brirkit(&["sweep", "deconvolve", "--recording", "s.wav", "--spec", "s.wav.sweep.json", "--out", "ir.wav"], dir.path());
    // The bare sweep is not longer than itself.
    assert_eq!(out.status.code(), Some(2));
}

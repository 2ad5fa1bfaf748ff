// Builds a complete blind ABX session directory from two BRIR pairs and
// synthetic tokens, answers it perfectly and analyses the log.

use std::path::Path;

use brirkit::abx::{analyze_log, Answer, ResponseRecord, SubjectResult, DEFAULT_LEVEL, DEFAULT_TRIAL_CAP};
use brirkit::dsp::{write_wav, ImpulseResponse, WavFormat};
use brirkit::stimuli::{package_session, synthetic_speech_token};

fn brir(path: &Path, tail: f64) -> brirkit::Result<()> {
    let fs = 44_100;
    let mut x: Vec<f64> = (0..fs as usize / 4).map(|i| tail * ((i as f64) * 0.37).sin() * (-(i as f64) / 2000.0).exp()).collect();
    x[10] = 0.5;
    write_wav(path, &ImpulseResponse::stereo(x.clone(), x, fs)?, WavFormat::Float32)
}

pub fn run_example_in(dir: &Path) -> brirkit::Result<Vec<SubjectResult>> {
    for (name, tail) in [("sim1.wav", 0.05), ("meas1.wav", 0.1), ("sim2.wav", 0.08), ("meas2.wav", 0.12)] {
        brir(&dir.join(name), tail)?;
    }
    std::fs::write(
        dir.join("conditions.json"),
        r#"{"conditions": [
            {"condition_id": "S1-omni", "method": "Omni-Dir", "brir_a": "sim1.wav", "brir_b": "meas1.wav"},
            {"condition_id": "S1-src", "method": "Src-Dir DS", "brir_a": "sim2.wav", "brir_b": "meas2.wav"}
        ]}"#,
    )?;
    let tokens = dir.join("tokens");
    std::fs::create_dir_all(&tokens)?;
    for i in 0..3u64 {
        let t = synthetic_speech_token(i, 0.6, 44_100)?;
        write_wav(tokens.join(format!("token{i}.wav")), &ImpulseResponse::mono(t, 44_100)?, WavFormat::Float32)?;
    }
    let (session, keys) = package_session(dir.join("conditions.json"), &tokens, 5, dir.join("session"), false)?;
    let truth = keys.decode(&session)?;
    let log: Vec<ResponseRecord> = session
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| ResponseRecord {
            trial_id: t.trial_id.clone(),
            subject_id: "p01".into(),
            answer: if truth[&t.trial_id].x_is_a { Answer::A } else { Answer::B },
            timestamp: i as u64,
        })
        .collect();
    analyze_log(&log, &truth, DEFAULT_LEVEL, DEFAULT_TRIAL_CAP)
}

pub fn run_example() -> brirkit::Result<Vec<SubjectResult>> {
    let dir = std::env::temp_dir().join(format!("brirkit-abx-session-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let out = run_example_in(&dir);
    std::fs::remove_dir_all(&dir)?;
    out
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    print!("{}", brirkit::abx::format_results_table(&run_example()?));
    Ok(())
}

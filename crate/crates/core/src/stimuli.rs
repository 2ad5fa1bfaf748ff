//! Listening-test stimuli: speech convolved with BRIRs at equal loudness,
//! and randomized ABX session packages for the browser runner.
//!
//! A session directory holds the interval WAVs under opaque names,
//! `session.json` (what the runner may see), `keys.json` (what it must not)
//! and `response-log.schema.json` describing the log the runner exports.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abx::{stopping_thresholds, Answer, TrialKey, DEFAULT_LEVEL, DEFAULT_TRIAL_CAP};
use crate::dsp::{convolve, lowpass_butter2, read_wav, write_wav, Biquad, ImpulseResponse, WavFormat};
use crate::error::{invalid, Error, Result};
use crate::loudness::{loudness_lufs, normalize_loudness};

pub const DEFAULT_TARGET_LUFS: f64 = -23.0;
pub const PEAK_LIMIT_DBFS: f64 = -0.5;
pub const SCHEMA_VERSION: u32 = 1;
pub const PROMPT: &str = "Which room acoustic environment was in X? Please choose either A or B.";
pub const DEFAULT_GAP_MS: u32 = 500;

/// JSON Schema of one response-log line.
pub const RESPONSE_LOG_SCHEMA: &str = r#"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "ABX response record (one JSON object per line)",
  "type": "object",
  "additionalProperties": false,
  "required": ["trial_id", "subject_id", "answer", "timestamp"],
  "properties": {
    "trial_id": { "type": "string", "minLength": 1 },
    "subject_id": { "type": "string", "minLength": 1 },
    "answer": { "enum": ["A", "B"] },
    "timestamp": { "type": "integer", "minimum": 0, "description": "milliseconds since the Unix epoch" }
  }
}
"#;

/// A normalized interval ready to be written.
#[derive(Debug, Clone)]
pub struct Stimulus {
    pub audio: ImpulseResponse,
    pub gain_db: f64,
    pub loudness_lufs: f64,
    pub peak_dbfs: f64,
}

fn peak_dbfs(x: &ImpulseResponse) -> f64 {
    let p = x.channels().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    20.0 * p.log10()
}

/// Convolves a mono token with each ear of `brir` and scales the result to
/// `target_lufs`. A peak above −0.5 dBFS is an error, never limited.
pub fn render_interval(token: &ImpulseResponse, brir: &ImpulseResponse, target_lufs: f64) -> Result<Stimulus> {
    if token.num_channels() != 1 {
        return invalid("speech token must be mono");
    }
    if token.sample_rate() != brir.sample_rate() {
        return invalid(format!(
            "token rate {} Hz differs from BRIR rate {} Hz",
            token.sample_rate(),
            brir.sample_rate()
        ));
    }
    let wet = convolve(token, brir)?;
    let (audio, gain_db) = normalize_loudness(&wet, target_lufs)?;
    let peak = peak_dbfs(&audio);
    if peak > PEAK_LIMIT_DBFS {
        return Err(Error::Numeric(format!(
            "interval would peak at {peak:.2} dBFS at {target_lufs} LUFS (limit {PEAK_LIMIT_DBFS} dBFS); lower the target"
        )));
    }
    Ok(Stimulus {
        loudness_lufs: loudness_lufs(&audio)?,
        audio,
        gain_db,
        peak_dbfs: peak,
    })
}

/// Speech-shaped noise with a syllabic envelope, for tests and demos where
/// no licensed speech corpus is at hand.
pub fn synthetic_speech_token(seed: u64, duration_s: f64, sample_rate: u32) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = f64::from(sample_rate);
    let n = (duration_s * fs).round() as usize;
    let white: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Long-term speech spectrum: roll off above about 500 Hz, little below 100 Hz.
    let lp = lowpass_butter2(&white, 500.0, sample_rate)?;
    let w = 2.0 * PI * 100.0 / fs;
    let r = 1.0 - w;
    let dc_block = Biquad { b0: 1.0, b1: -1.0, b2: 0.0, a1: -r, a2: 0.0 };
    let mut voiced = dc_block.process(&lp);
    // Some fricative energy so that the highs are not empty.
    for (v, wv) in voiced.iter_mut().zip(&white) {
        *v += 0.05 * wv;
    }
    let mut env = vec![0.0; n];
    let mut t = (0.05 * fs) as usize;
    while t < n {
        let len = (rng.gen_range(0.10..0.28) * fs) as usize;
        let amp = rng.gen_range(0.4..1.0);
        for i in 0..len.min(n - t) {
            env[t + i] += amp * (PI * i as f64 / len as f64).sin().powi(2);
        }
        t += len + (rng.gen_range(0.02..0.12) * fs) as usize;
    }
    let mut x: Vec<f64> = voiced.iter().zip(&env).map(|(a, b)| a * b).collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut x {
            *v *= 0.5 / peak;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chain {
    Simulated,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub condition_id: String,
    /// Method label of the simulated chain, e.g. "Src-Dir DS".
    pub method: String,
    /// Simulated BRIR WAV (always interval A).
    pub brir_a: PathBuf,
    /// Measured BRIR WAV (always interval B).
    pub brir_b: PathBuf,
}

/// Input document of `package-abx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsFile {
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_target")]
    pub target_lufs: f64,
    /// Listening level at the ear; informational only.
    #[serde(default)]
    pub playback_level_note_db_spl: Option<f64>,
}

fn default_target() -> f64 {
    DEFAULT_TARGET_LUFS
}

impl ConditionsFile {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if f.conditions.is_empty() {
            return Err(Error::Validation(vec!["conditions file lists no conditions".into()]));
        }
        let mut ids: Vec<&str> = f.conditions.iter().map(|c| c.condition_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(vec!["condition ids must be unique".into()]));
        }
        Ok(f)
    }
}

/// One rendered interval file and what it contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalInfo {
    pub file: String,
    pub condition_id: String,
    pub chain: Chain,
    pub token: String,
    pub loudness_lufs: f64,
    pub peak_dbfs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusPackage {
    pub conditions: Vec<ConditionSpec>,
    pub tokens: Vec<String>,
    pub target_lufs: f64,
    pub playback_level_note_db_spl: Option<f64>,
    pub seed: u64,
    pub manifest: Vec<IntervalInfo>,
}

fn salt(seed: u64) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"abx-session-salt")
        .chain_update(seed.to_le_bytes())
        .finalize()
        .into()
}

fn opaque_name(salt: &[u8; 32], condition: &str, chain: Chain, token: &str) -> String {
    let tag = match chain {
        Chain::Simulated => "sim",
        Chain::Measured => "meas",
    };
    let d = Sha256::new()
        .chain_update(salt)
        .chain_update(condition.as_bytes())
        .chain_update([0])
        .chain_update(tag)
        .chain_update([0])
        .chain_update(token.as_bytes())
        .finalize();
    format!("{}.wav", &hex::encode(d)[..20])
}

fn obscured_key(salt: &[u8; 32], trial_id: &str, answer: Answer) -> String {
    let tag: &[u8] = match answer {
        Answer::A => b"A",
        Answer::B => b"B",
    };
    hex::encode(
        Sha256::new()
            .chain_update(salt)
            .chain_update(trial_id.as_bytes())
            .chain_update(tag)
            .finalize(),
    )
}

/// Renders every (condition, chain, token) interval. Intervals are
/// returned in manifest order together with their audio.
pub fn render_package(
    conditions: &ConditionsFile,
    brirs: &BTreeMap<String, (ImpulseResponse, ImpulseResponse)>,
    tokens: &[(String, ImpulseResponse)],
    seed: u64,
) -> Result<(StimulusPackage, Vec<ImpulseResponse>)> {
    if tokens.is_empty() {
        return invalid("no speech tokens");
    }
    let salt = salt(seed);
    let mut manifest = Vec::new();
    let mut audio = Vec::new();
    for c in &conditions.conditions {
        let (a, b) = brirs
            .get(&c.condition_id)
            .ok_or_else(|| Error::Validation(vec![format!("no BRIRs loaded for condition '{}'", c.condition_id)]))?;
        for (chain, brir) in [(Chain::Simulated, a), (Chain::Measured, b)] {
            for (name, tok) in tokens {
                let s = render_interval(tok, brir, conditions.target_lufs)?;
                manifest.push(IntervalInfo {
                    file: opaque_name(&salt, &c.condition_id, chain, name),
                    condition_id: c.condition_id.clone(),
                    chain,
                    token: name.clone(),
                    loudness_lufs: s.loudness_lufs,
                    peak_dbfs: s.peak_dbfs,
                });
                audio.push(s.audio);
            }
        }
    }
    Ok((
        StimulusPackage {
            conditions: conditions.conditions.clone(),
            tokens: tokens.iter().map(|t| t.0.clone()).collect(),
            target_lufs: conditions.target_lufs,
            playback_level_note_db_spl: conditions.playback_level_note_db_spl,
            seed,
            manifest,
        },
        audio,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub trial_id: String,
    pub condition_id: String,
    pub interval_a: String,
    pub interval_b: String,
    pub interval_x: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    pub trials: Vec<PlannedTrial>,
    pub x_identity: BTreeMap<String, Answer>,
}

impl SessionPlan {
    pub fn trial_keys(&self) -> BTreeMap<String, TrialKey> {
        self.trials
            .iter()
            .map(|t| {
                (
                    t.trial_id.clone(),
                    TrialKey {
                        condition_id: t.condition_id.clone(),
                        x_is_a: self.x_identity[&t.trial_id] == Answer::A,
                    },
                )
            })
            .collect()
    }
}

/// Plans `trials_per_condition` trials for every condition. Each trial's
/// condition is drawn uniformly from those with trials left; A, B and X use
/// three different tokens; X is the simulated or the measured chain by a
/// fair coin. The runner skips the remaining trials of a finished condition.
pub fn build_session(package: &StimulusPackage, trials_per_condition: u32, seed: u64) -> Result<SessionPlan> {
    if package.tokens.len() < 3 {
        return invalid(format!("need at least 3 speech tokens, got {}", package.tokens.len()));
    }
    let salt = salt(package.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<(String, u32)> = package
        .conditions
        .iter()
        .map(|c| (c.condition_id.clone(), trials_per_condition))
        .collect();
    let total = trials_per_condition as usize * remaining.len();
    let width = total.to_string().len().max(4);
    let mut trials = Vec::with_capacity(total);
    let mut x_identity = BTreeMap::new();
    for i in 0..total {
        let open: Vec<usize> = (0..remaining.len()).filter(|&j| remaining[j].1 > 0).collect();
        let j = open[rng.gen_range(0..open.len())];
        remaining[j].1 -= 1;
        let cond = remaining[j].0.clone();
        let toks: Vec<&String> = package.tokens.choose_multiple(&mut rng, 3).collect();
        let x = if rng.gen_bool(0.5) { Answer::A } else { Answer::B };
        let x_chain = match x {
            Answer::A => Chain::Simulated,
            Answer::B => Chain::Measured,
        };
        let trial_id = format!("t{:0width$}", i + 1);
        trials.push(PlannedTrial {
            trial_id: trial_id.clone(),
            interval_a: opaque_name(&salt, &cond, Chain::Simulated, toks[0]),
            interval_b: opaque_name(&salt, &cond, Chain::Measured, toks[1]),
            interval_x: opaque_name(&salt, &cond, x_chain, toks[2]),
            condition_id: cond,
        });
        x_identity.insert(trial_id, x);
    }
    Ok(SessionPlan { trials, x_identity })
}

/// What the runner loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub schema_version: u32,
    pub prompt: String,
    pub inter_stimulus_gap_ms: u32,
    pub target_lufs: f64,
    pub playback_level_note_db_spl: Option<f64>,
    pub significance_level: f64,
    pub trial_cap: u32,
    /// Entry n − 1: fewest correct answers after n trials that finish a
    /// condition; null where none does.
    pub stopping_thresholds: Vec<Option<u32>>,
    pub conditions: Vec<SessionCondition>,
    pub trials: Vec<PlannedTrial>,
    pub response_log_schema: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCondition {
    pub condition_id: String,
    pub method: String,
}

/// What stays with the experimenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeysDocument {
    pub schema_version: u32,
    pub salt: String,
    /// Per trial: digest of (salt, trial id, X identity).
    pub keys: BTreeMap<String, String>,
    pub package: StimulusPackage,
}

impl KeysDocument {
    /// Recovers the X identity of every trial in `session`.
    pub fn decode(&self, session: &SessionDocument) -> Result<BTreeMap<String, TrialKey>> {
        let salt: [u8; 32] = hex::decode(&self.salt)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| Error::Validation(vec!["malformed salt in key file".into()]))?;
        session
            .trials
            .iter()
            .map(|t| {
                let k = self
                    .keys
                    .get(&t.trial_id)
                    .ok_or_else(|| Error::Validation(vec![format!("key file has no entry for trial '{}'", t.trial_id)]))?;
                let x_is_a = if *k == obscured_key(&salt, &t.trial_id, Answer::A) {
                    true
                } else if *k == obscured_key(&salt, &t.trial_id, Answer::B) {
                    false
                } else {
                    return Err(Error::Validation(vec![format!(
                        "key for trial '{}' does not belong to this session",
                        t.trial_id
                    )]));
                };
                Ok((
                    t.trial_id.clone(),
                    TrialKey {
                        condition_id: t.condition_id.clone(),
                        x_is_a,
                    },
                ))
            })
            .collect()
    }
}

pub fn session_documents(package: &StimulusPackage, plan: &SessionPlan) -> (SessionDocument, KeysDocument) {
    let salt = salt(package.seed);
    let session = SessionDocument {
        schema_version: SCHEMA_VERSION,
        prompt: PROMPT.to_string(),
        inter_stimulus_gap_ms: DEFAULT_GAP_MS,
        target_lufs: package.target_lufs,
        playback_level_note_db_spl: package.playback_level_note_db_spl,
        significance_level: DEFAULT_LEVEL,
        trial_cap: DEFAULT_TRIAL_CAP,
        stopping_thresholds: stopping_thresholds(DEFAULT_TRIAL_CAP, DEFAULT_LEVEL),
        conditions: package
            .conditions
            .iter()
            .map(|c| SessionCondition {
                condition_id: c.condition_id.clone(),
                method: c.method.clone(),
            })
            .collect(),
        trials: plan.trials.clone(),
        response_log_schema: "response-log.schema.json".to_string(),
    };
    let keys = KeysDocument {
        schema_version: SCHEMA_VERSION,
        salt: hex::encode(salt),
        keys: plan
            .x_identity
            .iter()
            .map(|(id, x)| (id.clone(), obscured_key(&salt, id, *x)))
            .collect(),
        package: package.clone(),
    };
    (session, keys)
}

pub const SESSION_FILE: &str = "session.json";
pub const KEYS_FILE: &str = "keys.json";
pub const SCHEMA_FILE: &str = "response-log.schema.json";
pub const STIMULI_DIR: &str = "stimuli";

/// Reads tokens (`*.wav`, sorted by file name) from a directory.
pub fn read_tokens(dir: impl AsRef<Path>) -> Result<Vec<(String, ImpulseResponse)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, read_wav(&p)?))
        })
        .collect()
}

/// Builds a complete session directory. `out_dir` must not contain a
/// session unless `force` is set.
pub fn package_session(
    conditions_path: impl AsRef<Path>,
    tokens_dir: impl AsRef<Path>,
    seed: u64,
    out_dir: impl AsRef<Path>,
    force: bool,
) -> Result<(SessionDocument, KeysDocument)> {
    let conditions_path = conditions_path.as_ref();
    let out = out_dir.as_ref();
    if out.join(SESSION_FILE).exists() && !force {
        return invalid(format!("{} already holds a session (use --force to overwrite)", out.display()));
    }
    let conditions = ConditionsFile::from_json_file(conditions_path)?;
    let base = conditions_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
    let mut brirs = BTreeMap::new();
    for c in &conditions.conditions {
        brirs.insert(c.condition_id.clone(), (read_wav(resolve(&c.brir_a))?, read_wav(resolve(&c.brir_b))?));
    }
    let tokens = read_tokens(tokens_dir)?;
    let (package, audio) = render_package(&conditions, &brirs, &tokens, seed)?;
    let plan = build_session(&package, DEFAULT_TRIAL_CAP, seed)?;
    let (session, keys) = session_documents(&package, &plan);

    std::fs::create_dir_all(out.join(STIMULI_DIR))?;
    for (info, a) in package.manifest.iter().zip(&audio) {
        write_wav(out.join(STIMULI_DIR).join(&info.file), a, WavFormat::Float32)?;
    }
    std::fs::write(out.join(SESSION_FILE), serde_json::to_string_pretty(&session)? + "\n")?;
    std::fs::write(out.join(KEYS_FILE), serde_json::to_string_pretty(&keys)? + "\n")?;
    std::fs::write(out.join(SCHEMA_FILE), RESPONSE_LOG_SCHEMA)?;
    Ok((session, keys))
}

//! Command-line front end. Every subcommand is a pure function of its
//! inputs and seed; outputs are never overwritten without `--force`.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 I/O, 4
//! numeric failure.

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::abx::{analyze_log, format_results_table, read_response_log, write_results_csv, DEFAULT_LEVEL, DEFAULT_TRIAL_CAP};
use crate::dsp::{read_wav, write_wav, ImpulseResponse, WavFormat};
use crate::error::{Error, Result};
use crate::metrics::{analyze_brir, format_table, rank_methods, write_reports_csv, MetricsReport};
use crate::render::{load_hrir, load_source_directivity, render_source, RenderDiagnostics};
use crate::room::{paper_scene, DirectivityMode, SceneConfig};
use crate::stimuli::{package_session, synthetic_speech_token, KeysDocument, SessionDocument, KEYS_FILE, SESSION_FILE};
use crate::sweep::{deconvolve, generate_sweep, SweepSpec};
use crate::synth::{compensate_direct, detect_brir_onset, direct_window, extract_direct, MethodTag};

#[derive(Debug, Parser)]
#[command(name = "brirkit", version, about = "Binaural room impulse response simulation, analysis and ABX tooling")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render BRIRs (composite and stems) for the sources of a scene.
    Simulate(SimulateArgs),
    /// Room-acoustic metrics of BRIR WAVs as CSV.
    Analyze(AnalyzeArgs),
    /// Rank candidate BRIRs by mean absolute relative metric error.
    Compare(CompareArgs),
    /// Render loudness-matched intervals and a randomized ABX session.
    PackageAbx(PackageArgs),
    /// Score a response log against a session's hidden keys.
    AbxAnalyze(AbxAnalyzeArgs),
    /// Write the built-in demonstration scene as JSON.
    PaperScene(PaperSceneArgs),
    /// Write synthetic speech-shaped tokens.
    Tokens(TokensArgs),
    /// Exponential sweep generation and deconvolution.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    SrcDir,
    ModelDir,
    OmniDir,
}

impl MethodArg {
    fn mode(self) -> DirectivityMode {
        match self {
            Self::SrcDir => DirectivityMode::Measured,
            Self::ModelDir => DirectivityMode::HeadShadowModel,
            Self::OmniDir => DirectivityMode::Omni,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene JSON.
    #[arg(long)]
    pub scene: PathBuf,
    /// Directivity method for every source; defaults to each source's own.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Render only this source.
    #[arg(long)]
    pub source: Option<String>,
    /// Reference BRIR for direct-sound compensation: a WAV (with one
    /// source) or a directory of `<source>.wav`.
    #[arg(long, value_name = "PATH")]
    pub ds: Option<PathBuf>,
    /// Override the scene seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// BRIR WAVs; the file stem labels method and source.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also print the fixed-width table.
    #[arg(long)]
    pub table: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(required = true)]
    pub candidates: Vec<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PackageArgs {
    /// Conditions JSON; BRIR paths resolve against its directory.
    #[arg(long)]
    pub conditions: PathBuf,
    /// Directory of mono speech WAVs.
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AbxAnalyzeArgs {
    /// Line-delimited JSON response log.
    #[arg(long)]
    pub log: PathBuf,
    /// Session directory holding session.json and keys.json.
    #[arg(long)]
    pub session: PathBuf,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub table: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PaperSceneArgs {
    #[arg(long, value_enum, default_value = "omni-dir")]
    pub method: MethodArg,
    /// Source directivity set for src-dir, e.g. builtin:monitor.
    #[arg(long)]
    pub db: Option<String>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TokensArgs {
    #[arg(long, default_value_t = 3)]
    pub count: usize,
    #[arg(long, default_value_t = 1.6)]
    pub duration: f64,
    #[arg(long, default_value_t = 44100)]
    pub rate: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum SweepCommand {
    /// Write a sweep WAV and its parameter sidecar.
    Generate {
        #[arg(long, default_value_t = 50.0)]
        f1: f64,
        #[arg(long, default_value_t = 22050.0)]
        f2: f64,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 44100)]
        rate: u32,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Turn a recorded sweep into an impulse response.
    Deconvolve {
        #[arg(long)]
        recording: PathBuf,
        /// Sidecar written by `sweep generate`.
        #[arg(long)]
        spec: PathBuf,
        /// Keep the 20 ms pre-window in the output.
        #[arg(long)]
        keep_pre_window: bool,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Domain(_) | Error::InvalidInput(_) | Error::Json(_) | Error::Csv(_) => 2,
        Error::Io(_) | Error::Wav(_) => 3,
        Error::Numeric(_) => 4,
    }
}

fn check_free(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    let taken: Vec<String> = paths
        .iter()
        .filter(|p| p.exists())
        .map(|p| format!("{} exists (use --force to overwrite)", p.display()))
        .collect();
    if taken.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(taken))
    }
}

fn write_text_or_stdout(out: Option<&Path>, text: &[u8], force: bool) -> Result<()> {
    match out {
        Some(p) => {
            check_free(&[p.to_path_buf()], force)?;
            std::fs::write(p, text)?;
        }
        None => std::io::stdout().write_all(text)?,
    }
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Serialize)]
struct SimulateSidecar {
    source_id: String,
    method: String,
    config_sha256: String,
    seed: u64,
    sample_rate: u32,
    onset_samples: usize,
    diagnostics: RenderDiagnostics,
}

fn method_slug(tag: MethodTag) -> String {
    tag.to_string().to_ascii_lowercase().replace(['.', ' '], "-").trim_end_matches('-').replace("--", "-")
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut scene = SceneConfig::from_json_file(&a.scene)?;
    let base = a.scene.parent().map(Path::to_path_buf);
    if let Some(m) = a.method {
        for s in &mut scene.sources {
            s.directivity_mode = m.mode();
        }
    }
    if let Some(seed) = a.seed {
        scene.seed = seed;
    }
    let ids: Vec<String> = match &a.source {
        Some(id) => {
            if scene.source(id).is_none() {
                return Err(Error::Validation(vec![format!("scene has no source '{id}'")]));
            }
            vec![id.clone()]
        }
        None => scene.sources.iter().map(|s| s.id.clone()).collect(),
    };
    let reference_for = |id: &str| -> Result<Option<PathBuf>> {
        match &a.ds {
            None => Ok(None),
            Some(p) if p.is_dir() => Ok(Some(p.join(format!("{id}.wav")))),
            Some(p) if ids.len() == 1 => Ok(Some(p.clone())),
            Some(_) => Err(Error::Validation(vec![
                "--ds with a single WAV needs --source; pass a directory of <source>.wav for several sources".into(),
            ])),
        }
    };
    let config_sha256 = hex::encode(Sha256::digest(serde_json::to_string(&scene)?.as_bytes()));
    let hrir = load_hrir(&scene, base.as_deref())?;

    // Resolve every input before writing anything.
    let mut jobs = Vec::new();
    for id in &ids {
        let src = scene.source(id).expect("checked above");
        let directivity = load_source_directivity(src, base.as_deref(), scene.sample_rate)?;
        let reference = reference_for(id)?.map(|p| read_wav(&p)).transpose()?;
        let mut tag = MethodTag::new(crate::render::method_for(src.directivity_mode), false);
        if reference.is_some() {
            tag = tag.with_ds();
        }
        let name = format!("{id}_{}", method_slug(tag));
        let files: Vec<PathBuf> = ["", "_direct", "_early", "_late"]
            .iter()
            .map(|s| a.out.join(format!("{name}{s}.wav")))
            .chain(std::iter::once(a.out.join(format!("{name}.json"))))
            .collect();
        check_free(&files, a.force)?;
        jobs.push((id.clone(), directivity, reference, files));
    }
    std::fs::create_dir_all(&a.out)?;
    for (id, directivity, reference, files) in jobs {
        let out = render_source(&scene, &id, &directivity, &hrir)?;
        let mut brir = out.brir;
        if let Some(r) = reference {
            if r.sample_rate() != scene.sample_rate || r.num_channels() != 2 {
                return Err(Error::Validation(vec![format!(
                    "DS reference for {id} must be stereo at {} Hz",
                    scene.sample_rate
                )]));
            }
            let split = extract_direct(&r, detect_brir_onset(&r)?, &direct_window(r.sample_rate())?)?;
            brir = compensate_direct(&brir, &split)?.0;
        }
        let stems = brir.stems()?;
        write_wav(&files[0], &brir.ir, WavFormat::Float32)?;
        write_wav(&files[1], &stems.direct, WavFormat::Float32)?;
        write_wav(&files[2], &stems.early, WavFormat::Float32)?;
        write_wav(&files[3], &stems.late, WavFormat::Float32)?;
        let sidecar = SimulateSidecar {
            source_id: id.clone(),
            method: brir.tag.to_string(),
            config_sha256: config_sha256.clone(),
            seed: scene.seed,
            sample_rate: scene.sample_rate,
            onset_samples: detect_brir_onset(&brir.ir)?,
            diagnostics: out.diagnostics,
        };
        std::fs::write(&files[4], serde_json::to_string_pretty(&sidecar)? + "\n")?;
        log::info!("{id}: wrote {}", files[0].display());
    }
    Ok(())
}

fn analyze_files(paths: &[PathBuf]) -> Result<Vec<MetricsReport>> {
    paths
        .iter()
        .map(|p| {
            let ir = read_wav(p)?;
            let ir = if ir.num_channels() == 1 {
                ImpulseResponse::stereo(ir.channel(0).to_vec(), ir.channel(0).to_vec(), ir.sample_rate())?
            } else {
                ir
            };
            let s = stem(p);
            analyze_brir(&ir, &s, &s)
        })
        .collect()
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let reports = analyze_files(&a.inputs)?;
    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    write_text_or_stdout(a.out.as_deref(), &csv, a.force)?;
    if a.table {
        eprint!("{}", format_table(&reports));
    }
    Ok(())
}

fn compare(a: &CompareArgs) -> Result<()> {
    let reference = analyze_files(std::slice::from_ref(&a.reference))?.remove(0);
    let mut candidates = analyze_files(&a.candidates)?;
    for c in &mut candidates {
        // Cells are keyed by source, so candidates are scored as the reference's source.
        c.source_id = reference.source_id.clone();
    }
    let ranking = rank_methods(&reference, &candidates)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "method", "score", "cells"])?;
    for (i, e) in ranking.entries.iter().enumerate() {
        w.write_record([(i + 1).to_string(), e.method.clone(), format!("{:.6}", e.score), e.cells.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_text_or_stdout(a.out.as_deref(), &bytes, a.force)?;
    for n in &ranking.notices {
        eprintln!("notice: {n}");
    }
    Ok(())
}

fn abx_analyze(a: &AbxAnalyzeArgs) -> Result<()> {
    let keys_path = a.session.join(KEYS_FILE);
    if !keys_path.exists() {
        return Err(Error::Validation(vec![format!(
            "key file {} not found; results cannot be scored without it",
            keys_path.display()
        )]));
    }
    let session: SessionDocument = serde_json::from_str(&std::fs::read_to_string(a.session.join(SESSION_FILE))?)?;
    let keys: KeysDocument = serde_json::from_str(&std::fs::read_to_string(keys_path)?)?;
    let trial_keys = keys.decode(&session)?;
    let records = read_response_log(BufReader::new(std::fs::File::open(&a.log)?))?;
    let level = if session.significance_level > 0.0 { session.significance_level } else { DEFAULT_LEVEL };
    let cap = if session.trial_cap > 0 { session.trial_cap } else { DEFAULT_TRIAL_CAP };
    let results = analyze_log(&records, &trial_keys, level, cap)?;
    let mut csv = Vec::new();
    write_results_csv(&mut csv, &results)?;
    write_text_or_stdout(a.out.as_deref(), &csv, a.force)?;
    if a.table {
        eprint!("{}", format_results_table(&results));
    }
    Ok(())
}

fn write_paper_scene(a: &PaperSceneArgs) -> Result<()> {
    check_free(&[a.out.clone()], a.force)?;
    let scene = paper_scene(a.method.mode(), a.db.clone());
    std::fs::write(&a.out, scene.to_json_string()? + "\n")?;
    Ok(())
}

fn tokens(a: &TokensArgs) -> Result<()> {
    let files: Vec<PathBuf> = (0..a.count).map(|i| a.out.join(format!("token{:02}.wav", i + 1))).collect();
    check_free(&files, a.force)?;
    std::fs::create_dir_all(&a.out)?;
    for (i, f) in files.iter().enumerate() {
        let x = synthetic_speech_token(a.seed.wrapping_add(i as u64), a.duration, a.rate)?;
        write_wav(f, &ImpulseResponse::mono(x, a.rate)?, WavFormat::Float32)?;
    }
    Ok(())
}

fn sweep(c: &SweepCommand) -> Result<()> {
    match c {
        SweepCommand::Generate { f1, f2, duration, rate, out, force } => {
            let spec = SweepSpec::new(*f1, *f2, *duration, *rate)?;
            let mut side = out.as_os_str().to_owned();
            side.push(".sweep.json");
            check_free(&[out.clone(), PathBuf::from(side)], *force)?;
            write_wav(out, &ImpulseResponse::mono(generate_sweep(&spec), *rate)?, WavFormat::Float32)?;
            spec.write_sidecar(out)?;
        }
        SweepCommand::Deconvolve { recording, spec, keep_pre_window, out, force } => {
            let spec: SweepSpec = serde_json::from_str(&std::fs::read_to_string(spec)?)?;
            let mut side = out.as_os_str().to_owned();
            side.push(".sweep.json");
            check_free(&[out.clone(), PathBuf::from(side)], *force)?;
            let d = deconvolve(&read_wav(recording)?, &spec)?;
            let ir = if *keep_pre_window { d.ir.clone() } else { d.linear()? };
            write_wav(out, &ir, WavFormat::Float32)?;
            spec.write_sidecar(out)?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Compare(a) => compare(a),
        Command::PackageAbx(a) => {
            package_session(&a.conditions, &a.tokens, a.seed, &a.out, a.force)?;
            Ok(())
        }
        Command::AbxAnalyze(a) => abx_analyze(a),
        Command::PaperScene(a) => write_paper_scene(a),
        Command::Tokens(a) => tokens(a),
        Command::Sweep(c) => sweep(c),
    }
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation(vec![])), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 3);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 4);
    }

    #[test]
    fn slugs() {
        use crate::synth::Method;
        assert_eq!(method_slug(MethodTag::new(Method::OmniDir, false)), "omni-dir");
        assert_eq!(method_slug(MethodTag::new(Method::SrcDir, true)), "src-dir-ds");
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.json");
        let args = |force: bool| {
            let mut v = vec!["brirkit".to_string(), "paper-scene".into(), "--out".into(), p.display().to_string()];
            if force {
                v.push("--force".into());
            }
            v
        };
        assert_eq!(main_with_args(args(false)), 0);
        assert_eq!(main_with_args(args(false)), 2);
        assert_eq!(main_with_args(args(true)), 0);
        assert_eq!(main_with_args(["brirkit", "no-such-command"]), 2);
    }
}

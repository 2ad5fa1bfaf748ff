//! Acceptance checks, one verdict line each. Runs without the libtest
//! harness so the verdicts always reach the output.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use brirkit::abx::{analyze_log, binomial_p, dprime_differencing, pc_differencing, Answer, ResponseRecord, TrialKey};
use brirkit::dsp::fir::fir_magnitude;
use brirkit::dsp::{convolve_slices, energy, fractional_delay, Biquad, ImpulseResponse};
use brirkit::loudness::loudness_lufs;
use brirkit::metrics::{analyze_brir, c80, d50, edt, itd, t30, REPORT_BANDS_HZ};
use brirkit::render::{load_hrir, load_source_directivity, render_scene, render_source, BUILTIN_MONITOR};
use brirkit::room::{eyring_absorption, paper_room, paper_scene, DirectivityMode, PAPER_ROOM_T30};
use brirkit::stimuli::{render_interval, synthetic_speech_token};
use brirkit::sweep::{deconvolve, generate_sweep, SweepSpec};
use brirkit::synth::{compensate_direct, detect_brir_onset, direct_window, extract_direct, Brir, Method, MethodTag, Stems};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot hold as stated; each still has to reproduce the
/// exact figure that shows why.
const KNOWN_UNATTAINABLE: &[&str] = &["abx_statistics"];

struct Verdict {
    pass: bool,
    detail: String,
    /// For a failing criterion: whether the failure matches its analysis.
    understood: bool,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, understood: false }
    }
}

fn eyring_reproduction() -> Verdict {
    let room = paper_room();
    let (v, s, c) = (room.volume(), room.surface(), room.speed_of_sound());
    let want = [0.16, 0.20, 0.18, 0.17, 0.15, 0.14, 0.15];
    let t0 = Instant::now();
    let got: Vec<f64> = PAPER_ROOM_T30.iter().map(|t| eyring_absorption(v, s, c, *t).unwrap()).collect();
    let dt = t0.elapsed().as_secs_f64();
    let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    Verdict::new(
        worst <= 0.005 && dt < 1e-3,
        format!("max |alpha - table| = {worst:.4}, {:.1} us", dt * 1e6),
    )
}

fn t30_closure() -> Verdict {
    let scene = paper_scene(DirectivityMode::Omni, None);
    let t0 = Instant::now();
    let outs = render_scene(&scene, None).unwrap();
    let mut worst_mean: f64 = 0.0;
    let mut worst_ear: f64 = 0.0;
    for o in &outs {
        let r = analyze_brir(&o.brir.ir, "Omni-Dir", &o.brir.source_id).unwrap();
        for b in 0..REPORT_BANDS_HZ.len() {
            let target = PAPER_ROOM_T30[2 + b];
            let l = r.ears[0][b].t30_s.unwrap();
            let rr = r.ears[1][b].t30_s.unwrap();
            worst_ear = worst_ear.max((l / target - 1.0).abs()).max((rr / target - 1.0).abs());
            worst_mean = worst_mean.max(((l + rr) / 2.0 / target - 1.0).abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    Verdict::new(
        worst_mean <= 0.05 && dt < 30.0,
        format!(
            "6 sources, 500/1k/2k: worst binaural-mean deviation {:.1} % (worst single ear {:.1} %), {dt:.1} s",
            worst_mean * 100.0,
            worst_ear * 100.0
        ),
    )
}

fn itd_consistency() -> Verdict {
    let scene = paper_scene(DirectivityMode::Measured, Some(BUILTIN_MONITOR.into()));
    let hrir = load_hrir(&scene, None).unwrap();
    let src = load_source_directivity(&scene.sources[0], None, scene.sample_rate).unwrap();
    let sim = render_source(&scene, "S1", &src, &hrir).unwrap().brir;
    let itd_of = |ir: &ImpulseResponse| analyze_brir(ir, "x", "S1").unwrap().itd_us;
    let plain = itd_of(&sim.ir);

    // Stand-in measurement: a different source spectrum (omni model), and the
    // right ear arriving 30 us late.
    let omni = load_source_directivity(&paper_scene(DirectivityMode::Omni, None).sources[0], None, scene.sample_rate).unwrap();
    let other = render_source(&scene, "S1", &omni, &hrir).unwrap().brir.ir;
    let shift = 30e-6 * f64::from(scene.sample_rate);
    let k = fractional_delay(16.0 + shift, 33);
    let right: Vec<f64> = convolve_slices(other.channel(1), &k)[16..16 + other.len()].to_vec();
    let reference = ImpulseResponse::stereo(other.channel(0).to_vec(), right, scene.sample_rate).unwrap();
    let ref_itd = itd_of(&reference);

    let split = extract_direct(&reference, detect_brir_onset(&reference).unwrap(), &direct_window(scene.sample_rate).unwrap()).unwrap();
    let (ds, _) = compensate_direct(&sim, &split).unwrap();
    let ds_itd = itd_of(&ds.ir);
    Verdict::new(
        plain.abs() < 10.0 && (ds_itd - ref_itd).abs() <= 5.0,
        format!("S1 without DS {plain:.1} us; reference {ref_itd:.1} us, with DS {ds_itd:.1} us"),
    )
}

fn compensation_fidelity() -> Verdict {
    let fs = 44100;
    let len = 4096;
    let onset = 300;
    let w0 = 2.0 * std::f64::consts::PI * 5000.0 / f64::from(fs);
    let notch = Biquad {
        b0: 1.0,
        b1: -2.0 * 0.9995 * w0.cos(),
        b2: 0.9995 * 0.9995,
        a1: -2.0 * 0.97 * w0.cos(),
        a2: 0.97 * 0.97,
    };
    // High shelf: +6 dB above about 3 kHz.
    let shelf = {
        let a = (-2.0 * std::f64::consts::PI * 3000.0 / f64::from(fs)).exp();
        let h = (2.0 - 1.0) * (1.0 + a) / 2.0;
        Biquad { b0: 1.0 + h, b1: -a - h, b2: 0.0, a1: -a, a2: 0.0 }
    };
    let shaped = |x: &[f64]| notch.process(&shelf.process(x));
    let dirac_at = |at: f64| fractional_delay(at, len);
    let make_brir = |direct: Vec<f64>| {
        let d = ImpulseResponse::stereo(direct.clone(), direct, fs).unwrap();
        let z = ImpulseResponse::silent(2, len, fs).unwrap();
        Brir::from_stems(Stems { direct: d, early: z.clone(), late: z }, "S", MethodTag::new(Method::OmniDir, false)).unwrap()
    };
    let win = direct_window(fs).unwrap();
    let mut worst: f64 = 0.0;
    let notch_hz: f64 = 5000.0;
    // Flat simulation against a shaped reference, then the reverse.
    for (sim_direct, ref_direct, guard) in [
        (dirac_at(onset as f64), shaped(&dirac_at(onset as f64 + 200.0)), false),
        (shaped(&dirac_at(onset as f64)), dirac_at(onset as f64 + 200.0), true),
    ] {
        let reference = ImpulseResponse::stereo(ref_direct.clone(), ref_direct, fs).unwrap();
        let split = extract_direct(&reference, detect_brir_onset(&reference).unwrap(), &win).unwrap();
        let (comp, _) = compensate_direct(&make_brir(sim_direct), &split).unwrap();
        let direct = &comp.stems().unwrap().direct;
        let ex = extract_direct(direct, detect_brir_onset(direct).unwrap(), &win).unwrap();
        let mut f = 500.0;
        while f <= 16000.0 {
            let near_notch = guard && (f / notch_hz).log2().abs() < 1.0 / 3.0;
            if !near_notch {
                let want = 20.0 * fir_magnitude(split.excerpt.channel(0), f, fs).log10();
                let got = 20.0 * fir_magnitude(ex.excerpt.channel(0), f, fs).log10();
                worst = worst.max((want - got).abs());
            }
            f *= 2f64.powf(1.0 / 24.0);
        }
    }
    // Stop band of the inverse relative to its in-band gain.
    let design = brirkit::synth::design_inverse(&shaped(&dirac_at(32.0))[..132], fs).unwrap();
    let in_band = (0..design.inverse_bins.len())
        .filter(|&k| (1000.0..=2000.0).contains(&design.frequency(k)))
        .map(|k| design.inverse_bins[k].norm())
        .fold(0.0, f64::max);
    let out_band = (0..design.inverse_bins.len())
        .filter(|&k| !(20.0..=20000.0).contains(&design.frequency(k)))
        .map(|k| design.inverse_bins[k].norm())
        .fold(0.0, f64::max)
        .max(fir_magnitude(&design.inverse_fir, 21000.0, fs));
    let suppression = 20.0 * (in_band / out_band).log10();
    Verdict::new(
        worst <= 1.0 && suppression > 60.0,
        format!("max magnitude error {worst:.2} dB (500 Hz-16 kHz), stop band {suppression:.0} dB down"),
    )
}

fn metrics_oracles() -> Verdict {
    let fs = 48000;
    let decay = |t: f64, len: usize, gain: f64| -> Vec<f64> {
        (0..len)
            .map(|n| gain * (-(n as f64) / f64::from(fs) * 3.0 * 10f64.ln() / t).exp())
            .collect()
    };
    let x = decay(0.6, 2 * fs as usize, 1.0);
    let t30v = t30(&x, fs).unwrap();
    let edtv = edt(&x, fs).unwrap();
    let mut two = vec![0.0; fs as usize];
    two[100] = 1.0;
    two[100 + (0.1 * f64::from(fs)) as usize] = 1.0;
    let d = d50(&two, 100, fs).unwrap();
    let c = c80(&two, 100, fs).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 8000;
    let env: Vec<f64> = (0..n).map(|i| (-(i as f64) / 900.0).exp() * rng.gen_range(-1.0..1.0)).collect();
    let l = convolve_slices(&fractional_delay(400.0, 600), &env)[..n].to_vec();
    let r = convolve_slices(&fractional_delay(412.3, 600), &env)[..n].to_vec();
    let ir = ImpulseResponse::stereo(l, r, fs).unwrap();
    let win = direct_window(fs).unwrap();
    let onset = detect_brir_onset(&ir).unwrap();
    let a = itd(&ir, onset, &win).unwrap();
    let b = itd(&ir.swapped(), onset, &win).unwrap();

    let mut scaling_exact = true;
    for g in [0.25, 4.0, 2f64.powi(-20)] {
        let y: Vec<f64> = x.iter().map(|v| v * g).collect();
        scaling_exact &= t30(&y, fs).unwrap() == t30v && edt(&y, fs).unwrap() == edtv;
        let tw: Vec<f64> = two.iter().map(|v| v * g).collect();
        scaling_exact &= d50(&tw, 100, fs).unwrap() == d && c80(&tw, 100, fs).unwrap() == c;
        scaling_exact &= itd(&ir.scaled(g), onset, &win).unwrap() == a;
    }
    let pass = (t30v / 0.6 - 1.0).abs() < 0.01
        && (edtv / 0.6 - 1.0).abs() < 0.01
        && d == 0.5
        && c == 0.0
        && a == -b
        && scaling_exact;
    Verdict::new(
        pass,
        format!("T30 {t30v:.4} s, EDT {edtv:.4} s, D50 {d}, C80 {c} dB, ITD {a:.2}/{b:.2} us, scaling exact: {scaling_exact}"),
    )
}

fn sweep_round_trip() -> Verdict {
    let fs = 44100;
    let t0 = Instant::now();
    let spec = SweepSpec::new(50.0, 22050.0, 10.0, fs).unwrap();
    let sweep = generate_sweep(&spec);
    // Random response band-limited by a Blackman-windowed sinc band pass
    // (stop band below about 50 Hz and above about 20 kHz).
    let taps = 4097;
    let m = (taps / 2) as f64;
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
    let (lo, hi) = (110.0 / f64::from(fs), 19900.0 / f64::from(fs));
    let bp: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - m;
            let w = 0.42 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (taps - 1) as f64).cos()
                + 0.08 * (4.0 * std::f64::consts::PI * i as f64 / (taps - 1) as f64).cos();
            (2.0 * hi * sinc(2.0 * hi * t) - 2.0 * lo * sinc(2.0 * lo * t)) * w
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise: Vec<f64> = (0..2048).map(|i| rng.gen_range(-1.0..1.0) * (-(i as f64) / 400.0).exp()).collect();
    let h = convolve_slices(&noise, &bp);
    let mut rec = convolve_slices(&sweep, &h);
    rec.resize(rec.len() + fs as usize / 2, 0.0);
    let d = deconvolve(&ImpulseResponse::mono(rec, fs).unwrap(), &spec).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let got = &d.ir.channel(0)[d.reference_index..d.reference_index + h.len()];
    let err: f64 = got.iter().zip(&h).map(|(a, b)| (a - b).powi(2)).sum();
    let db = 10.0 * (err / energy(&h)).log10();
    Verdict::new(db < -60.0 && dt < 5.0, format!("relative L2 error {db:.1} dB, {dt:.2} s"))
}

fn abx_statistics() -> Verdict {
    let p18 = binomial_p(25, 18).unwrap();
    let p17 = binomial_p(25, 17).unwrap();
    let exact_ok = (p18 - 0.021643).abs() < 1e-5 && (p17 - 0.053876).abs() < 1e-5;
    let mut rt: f64 = 0.0;
    for i in 1..=99 {
        let pc = i as f64 / 100.0;
        let d = dprime_differencing(pc).unwrap();
        let back = if d >= 0.0 { pc_differencing(d) } else { 1.0 - pc_differencing(-d) };
        rt = rt.max((back - pc).abs());
    }

    let conditions = ["c1", "c2", "c3", "c4", "c5"];
    let mut keys = BTreeMap::new();
    let mut trial_ids: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for c in conditions {
        for i in 0..25 {
            let id = format!("{c}-{i:02}");
            keys.insert(id.clone(), TrialKey { condition_id: c.into(), x_is_a: rng.gen_bool(0.5) });
            trial_ids.entry(c).or_default().push(id);
        }
    }
    let log = |subject: &str, answer: &mut dyn FnMut(bool) -> Answer| -> Vec<ResponseRecord> {
        let mut out = Vec::new();
        for i in 0..25 {
            for c in conditions {
                let id = &trial_ids[c][i];
                out.push(ResponseRecord {
                    trial_id: id.clone(),
                    subject_id: subject.into(),
                    answer: answer(keys[id].x_is_a),
                    timestamp: out.len() as u64,
                });
            }
        }
        out
    };
    let oracle = log("oracle", &mut |x_is_a| if x_is_a { Answer::A } else { Answer::B });
    let res = analyze_log(&oracle, &keys, 0.05, 25).unwrap();
    let early = res.iter().all(|r| r.result.finished && r.result.n_trials == 5 && r.result.p_value < 0.05);

    // 200 replications of a guessing subject over five conditions.
    let mut sig = 0usize;
    let mut total = 0usize;
    let mut fixed_sig = 0usize;
    for rep in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1000 + rep);
        let recs = log("guess", &mut |_| if r.gen_bool(0.5) { Answer::A } else { Answer::B });
        for s in analyze_log(&recs, &keys, 0.05, 25).unwrap() {
            total += 1;
            if s.result.p_value < 0.05 {
                sig += 1;
            }
        }
        // The same answers scored once after all 25 trials.
        for c in conditions {
            let k = recs
                .iter()
                .filter(|x| keys[&x.trial_id].condition_id == c)
                .filter(|x| (x.answer == Answer::A) == keys[&x.trial_id].x_is_a)
                .count();
            fixed_sig += usize::from(binomial_p(25, k as u32).unwrap() < 0.05);
        }
    }
    let unfinished = 1.0 - sig as f64 / total as f64;
    let fixed = 1.0 - fixed_sig as f64 / total as f64;
    // Exact chance that a guesser ever crosses the stopping table within 25 trials.
    let theory = 1.0 - sequential_false_positive(25, 0.05);
    let sd = (theory * (1.0 - theory) / total as f64).sqrt();
    let mc_ok = (unfinished - theory).abs() < 4.0 * sd;
    let pass = exact_ok && rt < 1e-6 && early && unfinished >= 0.95;
    let mut v = Verdict::new(
        pass,
        format!(
            "p(25,18)={p18:.6} p(25,17)={p17:.6}; d' round trip {rt:.1e}; oracle subject finishes at 5: {early}; \
             guesser unfinished {:.1} % with stopping (exact {:.1} %), {:.1} % for a fixed 25-trial test",
            unfinished * 100.0,
            theory * 100.0,
            fixed * 100.0
        ),
    );
    v.understood = exact_ok && rt < 1e-6 && early && mc_ok;
    v
}

/// Probability that a guessing subject reaches significance at some n <= cap
/// when the test stops at the first significant count.
fn sequential_false_positive(cap: u32, level: f64) -> f64 {
    let thresholds = brirkit::abx::stopping_thresholds(cap, level);
    let mut dist = vec![1.0];
    let mut hit = 0.0;
    for n in 1..=cap as usize {
        let mut next = vec![0.0; n + 1];
        for (k, p) in dist.iter().enumerate() {
            for c in 0..2 {
                let kk = k + c;
                if thresholds[n - 1].is_some_and(|t| kk as u32 >= t) {
                    hit += p / 2.0;
                } else {
                    next[kk] += p / 2.0;
                }
            }
        }
        dist = next;
    }
    hit
}

fn loudness() -> Verdict {
    let fs = 44100;
    let sine: Vec<f64> = (0..5 * fs as usize)
        .map(|i| (2.0 * std::f64::consts::PI * 997.0 * i as f64 / f64::from(fs)).sin())
        .collect();
    let l = loudness_lufs(&ImpulseResponse::mono(sine, fs).unwrap()).unwrap();
    let scene = paper_scene(DirectivityMode::Omni, None);
    let hrir = load_hrir(&scene, None).unwrap();
    let src = load_source_directivity(&scene.sources[0], None, fs).unwrap();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for id in ["S1", "S4", "S6"] {
        let brir = render_source(&scene, id, &src, &hrir).unwrap().brir.ir;
        for seed in 0..3 {
            let tok = ImpulseResponse::mono(synthetic_speech_token(seed, 1.6, fs).unwrap(), fs).unwrap();
            let s = render_interval(&tok, &brir, -23.0).unwrap();
            worst = worst.max((loudness_lufs(&s.audio).unwrap() + 23.0).abs());
            n += 1;
        }
    }
    Verdict::new(
        (l + 3.01).abs() <= 0.1 && worst <= 0.1,
        format!("997 Hz sine {l:.3} LUFS; {n} intervals within {worst:.2e} LU of -23 LUFS"),
    )
}

fn run_cli(args: &[&str], cwd: &Path) -> (bool, String) {
    match Command::new(env!("CARGO_BIN_EXE_brirkit")).args(args).current_dir(cwd).output() {
        Ok(o) => (o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned()),
        Err(e) => (false, e.to_string()),
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_pipeline(root: &Path) -> bool {
    let steps: Vec<Vec<&str>> = vec![
        vec!["paper-scene", "--out", "scene.json"],
        vec!["paper-scene", "--method", "src-dir", "--db", "builtin:monitor", "--out", "scene_src.json"],
        vec!["simulate", "--scene", "scene.json", "--source", "S1", "--out", "sim"],
        vec!["simulate", "--scene", "scene_src.json", "--source", "S1", "--seed", "3", "--out", "meas"],
        vec!["simulate", "--scene", "scene.json", "--source", "S1", "--ds", "meas/S1_src-dir.wav", "--out", "sim_ds"],
        vec!["analyze", "sim/S1_omni-dir.wav", "sim_ds/S1_omni-dir-ds.wav", "--out", "metrics.csv"],
        vec!["compare", "--reference", "meas/S1_src-dir.wav", "sim/S1_omni-dir.wav", "sim_ds/S1_omni-dir-ds.wav", "--out", "ranking.csv"],
        vec!["tokens", "--out", "tokens"],
        vec!["package-abx", "--conditions", "conditions.json", "--tokens", "tokens", "--seed", "4", "--out", "session"],
        vec!["abx-analyze", "--log", "log.jsonl", "--session", "session", "--out", "results.csv"],
        vec!["sweep", "generate", "--f1", "100", "--f2", "8000", "--duration", "1", "--rate", "16000", "--out", "sweep.wav"],
        vec!["sweep", "deconvolve", "--recording", "sweep_rec.wav", "--spec", "sweep.wav.sweep.json", "--out", "ir.wav"],
    ];
    std::fs::write(
        root.join("conditions.json"),
        r#"{"conditions": [
            {"condition_id": "omni", "method": "Omni-Dir", "brir_a": "sim/S1_omni-dir.wav", "brir_b": "meas/S1_src-dir.wav"},
            {"condition_id": "omni-ds", "method": "Omni-Dir DS", "brir_a": "sim_ds/S1_omni-dir-ds.wav", "brir_b": "meas/S1_src-dir.wav"}
        ]}"#,
    )
    .unwrap();
    for step in steps {
        if step[0] == "abx-analyze" {
            let session: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(root.join("session/session.json")).unwrap()).unwrap();
            let mut log = String::new();
            for (i, t) in session["trials"].as_array().unwrap().iter().enumerate() {
                let ans = if i % 3 == 0 { "B" } else { "A" };
                log += &format!(
                    "{{\"trial_id\":{},\"subject_id\":\"p1\",\"answer\":\"{ans}\",\"timestamp\":{}}}\n",
                    t["trial_id"],
                    1_700_000_000_000u64 + i as u64
                );
            }
            std::fs::write(root.join("log.jsonl"), log).unwrap();
        }
        if step[1] == "deconvolve" {
            let s = brirkit::dsp::read_wav(root.join("sweep.wav")).unwrap();
            let mut x = convolve_slices(s.channel(0), &[0.0, 0.0, 1.0, 0.5, -0.25]);
            x.resize(x.len() + 4000, 0.0);
            brirkit::dsp::write_wav(root.join("sweep_rec.wav"), &ImpulseResponse::mono(x, 16000).unwrap(), brirkit::dsp::WavFormat::Float32)
                .unwrap();
        }
        let (ok, err) = run_cli(&step, root);
        if !ok {
            eprintln!("command failed: {step:?}: {err}");
            return false;
        }
    }
    true
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if !(cli_pipeline(a.path()) && cli_pipeline(b.path())) {
        return Verdict::new(false, "a CLI step failed".into());
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().filter(|k| sb.get(*k) != sa.get(*k)).collect();
    let refuses = !run_cli(&["paper-scene", "--out", "scene.json"], a.path()).0;
    Verdict::new(
        differing.is_empty() && sa.len() == sb.len() && refuses,
        format!(
            "{} files from 12 invocations over 9 subcommands, {} differ; overwrite without --force refused: {refuses}",
            sa.len(),
            differing.len()
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Verdict)> = vec![
        ("eyring_reproduction", eyring_reproduction),
        ("t30_closure", t30_closure),
        ("itd_consistency", itd_consistency),
        ("compensation_fidelity", compensation_fidelity),
        ("metrics_oracles", metrics_oracles),
        ("sweep_round_trip", sweep_round_trip),
        ("abx_statistics", abx_statistics),
        ("loudness", loudness),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("acceptance {name:<22} {status}  {}", v.detail);
        if !v.pass && !(KNOWN_UNATTAINABLE.contains(&name) && v.understood) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed unexpectedly");
        std::process::exit(1);
    }
}

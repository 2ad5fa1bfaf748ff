//! Room-acoustic parameters of BRIRs and method ranking.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dsp::{analysis_fft_size, edc, lowpass_butter2, octave_band_filter, ImpulseResponse};
use crate::error::{invalid, Error, Result};
use crate::synth::{detect_brir_onset, direct_window, extract_direct, MethodTag};

/// Octave bands reported per ear.
pub const REPORT_BANDS_HZ: [f64; 3] = [500.0, 1000.0, 2000.0];
pub const ITD_LOWPASS_HZ: f64 = 1000.0;

/// Least-squares slope (dB/s) of the EDC between the first crossings of
/// `hi_db` and `lo_db`.
fn decay_slope(x: &[f64], sample_rate: u32, hi_db: f64, lo_db: f64) -> Result<f64> {
    let curve = edc(x)?;
    let start = curve
        .iter()
        .position(|v| *v <= hi_db)
        .ok_or_else(|| Error::Domain(format!("decay never reaches {hi_db} dB")))?;
    let end = curve
        .iter()
        .position(|v| *v <= lo_db)
        .ok_or_else(|| Error::Domain(format!("decay never reaches {lo_db} dB")))?;
    // Samples inside the range; the end crossing itself may lie below it.
    let pts: Vec<(f64, f64)> = (start..end)
        .filter(|&i| curve[i].is_finite())
        .map(|i| (i as f64 / f64::from(sample_rate), curve[i]))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Domain(format!(
            "too few samples between {hi_db} and {lo_db} dB for a regression"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let md = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - md)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Numeric("energy decay curve does not decay".into()));
    }
    Ok(slope)
}

/// Reverberation time from the -5 to -35 dB EDC regression.
pub fn t30(x: &[f64], sample_rate: u32) -> Result<f64> {
    Ok(-60.0 / decay_slope(x, sample_rate, -5.0, -35.0)?)
}

/// Early decay time from the -0.1 to -10 dB EDC regression.
pub fn edt(x: &[f64], sample_rate: u32) -> Result<f64> {
    Ok(-60.0 / decay_slope(x, sample_rate, -0.1, -10.0)?)
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

/// Direct-to-reverberant ratio from the windowed direct part and the
/// remainder; `+inf` when nothing remains.
pub fn drr(x: &[f64], onset: usize, window: &[f64], sample_rate: u32) -> Result<f64> {
    let ir = ImpulseResponse::mono(x.to_vec(), sample_rate)?;
    let split = extract_direct(&ir, onset, window)?;
    Ok(ratio_db(split.excerpt.energy(), split.remainder.energy()))
}

fn split_energy(x: &[f64], onset: usize, ms: f64, sample_rate: u32) -> Result<(f64, f64)> {
    if onset >= x.len() {
        return invalid(format!("onset {onset} beyond response of {} samples", x.len()));
    }
    let edge = (onset + (ms * 1e-3 * f64::from(sample_rate)).round() as usize).min(x.len());
    let early: f64 = x[onset..edge].iter().map(|v| v * v).sum();
    let late: f64 = x[edge..].iter().map(|v| v * v).sum();
    Ok((early, late))
}

/// Definition: energy share of the first 50 ms after `onset`.
pub fn d50(x: &[f64], onset: usize, sample_rate: u32) -> Result<f64> {
    let (e, l) = split_energy(x, onset, 50.0, sample_rate)?;
    if e + l == 0.0 {
        return invalid("definition of a silent response");
    }
    Ok(e / (e + l))
}

/// Clarity: early (0-80 ms) to late energy ratio in dB; `+inf` without late
/// energy.
pub fn c80(x: &[f64], onset: usize, sample_rate: u32) -> Result<f64> {
    let (e, l) = split_energy(x, onset, 80.0, sample_rate)?;
    if e == 0.0 {
        return invalid("clarity of a response without early energy");
    }
    Ok(ratio_db(e, l))
}

/// Cross-correlation `r(tau) = sum_n a(n) b(n + tau)` for
/// `tau in -(len-1)..=len-1`, summed in ascending `n`.
fn xcorr(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() as isize;
    (-(n - 1)..n)
        .map(|tau| {
            let lo = 0.max(-tau);
            let hi = n.min(n - tau);
            (lo..hi).map(|i| a[i as usize] * b[(i + tau) as usize]).sum()
        })
        .collect()
}

/// Interaural time difference in microseconds of the low-passed direct
/// sound; positive when the left ear leads.
pub fn itd(ir: &ImpulseResponse, onset: usize, window: &[f64]) -> Result<f64> {
    if ir.num_channels() != 2 {
        return invalid("ITD needs two channels");
    }
    let fs = ir.sample_rate();
    let split = extract_direct(ir, onset, window)?;
    let padded = analysis_fft_size(window.len());
    let prep = |c: &[f64]| -> Result<Vec<f64>> {
        let mut v = c.to_vec();
        v.resize(padded, 0.0);
        lowpass_butter2(&v, ITD_LOWPASS_HZ, fs)
    };
    let l = prep(split.excerpt.channel(0))?;
    let r = prep(split.excerpt.channel(1))?;
    let c = xcorr(&l, &r);
    let (k, peak) = c
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    if !(peak > 0.0) || c.iter().all(|v| *v == peak) {
        return Err(Error::Numeric("flat interaural cross-correlation".into()));
    }
    let mut lag = k as f64 - (l.len() - 1) as f64;
    if k > 0 && k + 1 < c.len() {
        let (cm, c0, cp) = (c[k - 1], c[k], c[k + 1]);
        let denom = (cm + cp) - 2.0 * c0;
        if denom != 0.0 {
            lag += (cm - cp) / (2.0 * denom);
        }
    }
    Ok(lag * 1e6 / f64::from(fs))
}

/// Parameters of one ear in one octave band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    pub band_hz: f64,
    /// `None` when the decay does not cover the regression range.
    pub t30_s: Option<f64>,
    pub edt_s: Option<f64>,
    pub drr_db: f64,
    pub d50: f64,
    pub c80_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub source_id: String,
    /// `[left, right]`, each over `REPORT_BANDS_HZ`.
    pub ears: [Vec<BandMetrics>; 2],
    pub itd_us: f64,
    pub onset: usize,
}

/// Computes every reported parameter of a two-channel BRIR. All time
/// origins derive from one onset of the broadband response.
pub fn analyze_brir(ir: &ImpulseResponse, method: &str, source_id: &str) -> Result<MetricsReport> {
    if ir.num_channels() != 2 {
        return invalid("metrics need a two-channel BRIR");
    }
    let fs = ir.sample_rate();
    let onset = detect_brir_onset(ir)?;
    let window = direct_window(fs)?;
    let mut ears: [Vec<BandMetrics>; 2] = [Vec::new(), Vec::new()];
    for (ear, out) in ears.iter_mut().enumerate() {
        for &band in &REPORT_BANDS_HZ {
            let x = octave_band_filter(ir.channel(ear), band, fs)?;
            out.push(BandMetrics {
                band_hz: band,
                t30_s: t30(&x, fs).ok(),
                edt_s: edt(&x, fs).ok(),
                drr_db: drr(&x, onset, &window, fs)?,
                d50: d50(&x, onset, fs)?,
                c80_db: c80(&x, onset, fs)?,
            });
        }
    }
    Ok(MetricsReport {
        method: method.to_string(),
        source_id: source_id.to_string(),
        ears,
        itd_us: itd(ir, onset, &window)?,
        onset,
    })
}

pub fn analyze_tagged(ir: &ImpulseResponse, tag: MethodTag, source_id: &str) -> Result<MetricsReport> {
    analyze_brir(ir, &tag.to_string(), source_id)
}

const CSV_HEADER: [&str; 10] = [
    "method", "source", "ear", "band_hz", "t30_s", "edt_s", "drr_db", "d50", "c80_db", "itd_us",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6}")
    }
}

/// Writes reports as CSV, one row per method, source, ear and band.
pub fn write_reports_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for (ear, name) in r.ears.iter().zip(["left", "right"]) {
            for b in ear {
                w.write_record([
                    r.method.clone(),
                    r.source_id.clone(),
                    name.to_string(),
                    format!("{}", b.band_hz),
                    fmt_opt(b.t30_s),
                    fmt_opt(b.edt_s),
                    fmt_num(b.drr_db),
                    fmt_num(b.d50),
                    fmt_num(b.c80_db),
                    fmt_num(r.itd_us),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Just-noticeable differences used to annotate reports.
pub const JND_TABLE: [(&str, &str); 5] = [
    ("T30", "5 %"),
    ("EDT", "5 %"),
    ("DRR", "2-3 dB"),
    ("D50", "0.05"),
    ("C80", "1 dB"),
];

/// Plain-text table: one block per parameter, rows per ear and band,
/// one column per report.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<16}", "");
    for r in reports {
        let _ = write!(s, "{:>14}", format!("{} {}", r.method, r.source_id));
    }
    s.push('\n');
    let params: [(&str, fn(&BandMetrics) -> Option<f64>); 5] = [
        ("T30 [s]", |b| b.t30_s),
        ("EDT [s]", |b| b.edt_s),
        ("DRR [dB]", |b| Some(b.drr_db)),
        ("D50", |b| Some(b.d50)),
        ("C80 [dB]", |b| Some(b.c80_db)),
    ];
    for (name, get) in params {
        let jnd = JND_TABLE
            .iter()
            .find(|j| name.starts_with(j.0))
            .map(|j| j.1)
            .unwrap_or("");
        let _ = writeln!(s, "{name} (JND {jnd})");
        for (ear, label) in ["L", "R"].iter().enumerate() {
            for (bi, band) in REPORT_BANDS_HZ.iter().enumerate() {
                let _ = write!(s, "{:<16}", format!("  {label} {band} Hz"));
                for r in reports {
                    let v = r.ears[ear].get(bi).and_then(get);
                    let cell = v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
                    let _ = write!(s, "{cell:>14}");
                }
                s.push('\n');
            }
        }
    }
    let _ = write!(s, "{:<16}", "ITD [us]");
    for r in reports {
        let _ = write!(s, "{:>14}", format!("{:.1}", r.itd_us));
    }
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: String,
    pub source_id: String,
    /// Mean absolute relative error over all usable cells.
    pub score: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
    pub notices: Vec<String>,
}

fn cells(r: &MetricsReport) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for (ear, label) in r.ears.iter().zip(["L", "R"]) {
        for b in ear {
            let vals = [
                ("T30", b.t30_s),
                ("EDT", b.edt_s),
                ("DRR", Some(b.drr_db)),
                ("D50", Some(b.d50)),
                ("C80", Some(b.c80_db)),
            ];
            for (name, v) in vals {
                m.insert(format!("{name} {label} {}", b.band_hz), v.unwrap_or(f64::NAN));
            }
        }
    }
    m
}

/// Ranks candidates by the mean of `|1 - candidate / reference|` over all
/// parameter cells. Cells whose reference is zero or not finite, or whose
/// candidate is not finite, are skipped with a notice. Ties sort by name.
pub fn rank_methods(reference: &MetricsReport, candidates: &[MetricsReport]) -> Result<Ranking> {
    let refc = cells(reference);
    let mut ranking = Ranking::default();
    for cand in candidates {
        let cc = cells(cand);
        if cc.keys().ne(refc.keys()) {
            return invalid(format!("{} does not share the reference metric grid", cand.method));
        }
        let mut sum = 0.0;
        let mut n = 0;
        for (k, m) in &refc {
            let s = cc[k];
            if *m == 0.0 || !m.is_finite() || !s.is_finite() {
                ranking.notices.push(format!("{}: cell {k} excluded (reference {m}, candidate {s})", cand.method));
                continue;
            }
            sum += (1.0 - s / m).abs();
            n += 1;
        }
        if n == 0 {
            return Err(Error::Numeric(format!("{} has no comparable cells", cand.method)));
        }
        ranking.entries.push(RankEntry {
            method: cand.method.clone(),
            source_id: cand.source_id.clone(),
            score: sum / n as f64,
            cells: n,
        });
    }
    ranking
        .entries
        .sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.method.cmp(&b.method)));
    Ok(ranking)
}

//! ABX listening-test statistics: exact binomial p-values, adaptive
//! stopping, bias-corrected proportion correct and differencing-model d′.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_bigint::BigUint;
use num_traits::{Float, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, invalid, Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.05;
pub const DEFAULT_TRIAL_CAP: u32 = 25;

/// Exact upper tail P(X >= k) for X ~ Bin(n, 1/2) as numerator / 2^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactTail {
    pub numerator: BigUint,
    pub n: u32,
}

impl ExactTail {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if k > n {
            return domain(format!("k = {k} exceeds n = {n}"));
        }
        let mut c = BigUint::one();
        let mut sum = BigUint::zero();
        for i in 0..=n {
            if i >= k {
                sum += &c;
            }
            c = c * (n - i) / (i + 1);
        }
        Ok(Self { numerator: sum, n })
    }

    pub fn to_f64(&self) -> f64 {
        // Shift both operands down so that the quotient stays representable.
        let bits = self.numerator.bits();
        let shift = bits.saturating_sub(60);
        let num = (&self.numerator >> shift).to_f64().unwrap_or(f64::INFINITY);
        num * 2f64.powi(shift as i32 - self.n as i32)
    }

    /// Exact comparison with a finite positive level.
    pub fn is_below(&self, level: f64) -> bool {
        if !(level > 0.0) {
            return false;
        }
        if !level.is_finite() {
            return true;
        }
        let (mantissa, exp, _) = level.integer_decode();
        // numerator / 2^n < mantissa * 2^exp  <=>  numerator < mantissa * 2^(exp + n)
        let shift = i64::from(exp) + i64::from(self.n);
        let m = BigUint::from(mantissa);
        if shift >= 0 {
            self.numerator < m << shift as usize
        } else {
            (&self.numerator << (-shift) as usize) < m
        }
    }
}

/// P(X >= k | n, 1/2).
pub fn binomial_p(n: u32, k: u32) -> Result<f64> {
    Ok(ExactTail::new(n, k)?.to_f64())
}

/// Smallest number of correct answers after `n` trials that is significant
/// at `level`, for n = 1..=cap; `None` where no count suffices.
pub fn stopping_thresholds(cap: u32, level: f64) -> Vec<Option<u32>> {
    (1..=cap)
        .map(|n| (0..=n).find(|&k| ExactTail::new(n, k).map(|t| t.is_below(level)).unwrap_or(false)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbxConditionResult {
    pub condition_id: String,
    pub n_trials: u32,
    pub n_correct: u32,
    pub p_value: f64,
    pub pc: f64,
    pub pc_unbiased: f64,
    pub d_prime: f64,
    pub finished: bool,
    pub significance_level: f64,
    pub trial_cap: u32,
    /// Trials with X = A, and how many of those were answered A.
    pub x_a_trials: u32,
    pub hits: u32,
    /// Trials with X = B, and how many of those were answered A.
    pub x_b_trials: u32,
    pub false_alarms: u32,
    /// Answers that arrived after the condition had finished; not scored.
    #[serde(default)]
    pub answers_after_finish: u32,
}

impl AbxConditionResult {
    pub fn new(condition_id: impl Into<String>) -> Self {
        Self::with_rule(condition_id, DEFAULT_LEVEL, DEFAULT_TRIAL_CAP)
    }

    pub fn with_rule(condition_id: impl Into<String>, level: f64, cap: u32) -> Self {
        Self {
            condition_id: condition_id.into(),
            n_trials: 0,
            n_correct: 0,
            p_value: 1.0,
            pc: f64::NAN,
            pc_unbiased: f64::NAN,
            d_prime: f64::NAN,
            finished: cap == 0,
            significance_level: level,
            trial_cap: cap,
            x_a_trials: 0,
            hits: 0,
            x_b_trials: 0,
            false_alarms: 0,
            answers_after_finish: 0,
        }
    }

    /// Scores one trial including the response bias counts.
    pub fn record(&mut self, x_is_a: bool, answered_a: bool) -> Result<()> {
        let next = stopping_decision(self, x_is_a == answered_a)?;
        *self = next;
        if x_is_a {
            self.x_a_trials += 1;
            self.hits += u32::from(answered_a);
        } else {
            self.x_b_trials += 1;
            self.false_alarms += u32::from(answered_a);
        }
        self.refresh_sensitivity();
        Ok(())
    }

    fn refresh_sensitivity(&mut self) {
        let h = corrected_rate(self.hits, self.x_a_trials);
        let f = corrected_rate(self.false_alarms, self.x_b_trials);
        self.pc_unbiased = pc_unbiased(h, f);
        self.d_prime = dprime_differencing(self.pc_unbiased).unwrap_or(f64::NAN);
    }
}

/// Adds one answer, recomputes the exact p-value and the finished flag.
pub fn stopping_decision(result: &AbxConditionResult, correct: bool) -> Result<AbxConditionResult> {
    if result.finished {
        return invalid(format!("condition {} is already finished", result.condition_id));
    }
    let mut r = result.clone();
    r.n_trials += 1;
    r.n_correct += u32::from(correct);
    let tail = ExactTail::new(r.n_trials, r.n_correct)?;
    r.p_value = tail.to_f64();
    r.pc = f64::from(r.n_correct) / f64::from(r.n_trials);
    r.finished = tail.is_below(r.significance_level) || r.n_trials >= r.trial_cap;
    Ok(r)
}

/// (k + 0.5) / (n + 1), which keeps rates away from 0 and 1.
pub fn corrected_rate(k: u32, n: u32) -> f64 {
    (f64::from(k) + 0.5) / (f64::from(n) + 1.0)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Proportion correct of an unbiased observer with hit rate `h` and false
/// alarm rate `f`: Φ((z(H) − z(F)) / 2).
pub fn pc_unbiased(h: f64, f: f64) -> f64 {
    let n = std_normal();
    n.cdf((n.inverse_cdf(h) - n.inverse_cdf(f)) / 2.0)
}

/// Proportion correct predicted by the differencing strategy in ABX.
pub fn pc_differencing(d: f64) -> f64 {
    let n = std_normal();
    let (a, b) = (d / 2f64.sqrt(), d / 6f64.sqrt());
    n.cdf(a) * n.cdf(b) + n.cdf(-a) * n.cdf(-b)
}

/// Inverts [`pc_differencing`] by bisection. Below 0.5 the result is the
/// negated inverse of 1 − pc. Proportions of exactly 0 or 1 map to ∓∞/±∞.
pub fn dprime_differencing(pc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pc) {
        return domain(format!("proportion correct {pc} outside [0, 1]"));
    }
    if pc == 1.0 {
        return Ok(f64::INFINITY);
    }
    if pc == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if pc == 0.5 {
        return Ok(0.0);
    }
    if pc < 0.5 {
        return dprime_differencing(1.0 - pc).map(|d| -d);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while pc_differencing(hi) < pc {
        hi *= 2.0;
        if hi > 80.0 {
            return Err(Error::Numeric(format!("d' for pc = {pc} out of range")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pc_differencing(mid) < pc {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let d = 0.5 * (lo + hi);
    if (pc_differencing(d) - pc).abs() >= 1e-9 {
        return Err(Error::Numeric(format!("d' bisection did not converge for pc = {pc}")));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    A,
    B,
}

/// One line of a response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub trial_id: String,
    pub subject_id: String,
    pub answer: Answer,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn read_response_log(reader: impl BufRead) -> Result<Vec<ResponseRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Validation(vec![format!("response log line {}: {e}", i + 1)]))?,
        );
    }
    Ok(out)
}

pub fn write_response_log(mut w: impl Write, records: &[ResponseRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// Ground truth a log is scored against.
#[derive(Debug, Clone)]
pub struct TrialKey {
    pub condition_id: String,
    pub x_is_a: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject_id: String,
    pub result: AbxConditionResult,
}

/// Scores a log. Answers are taken in log order per subject; answers to a
/// condition that has already finished are counted but not scored, so the
/// stopping rule also holds for logs from runners that present every trial.
pub fn analyze_log(
    records: &[ResponseRecord],
    keys: &BTreeMap<String, TrialKey>,
    level: f64,
    cap: u32,
) -> Result<Vec<SubjectResult>> {
    let mut seen = HashSet::new();
    let mut table: BTreeMap<(String, String), AbxConditionResult> = BTreeMap::new();
    for r in records {
        let key = keys
            .get(&r.trial_id)
            .ok_or_else(|| Error::Validation(vec![format!("unknown trial id '{}'", r.trial_id)]))?;
        if !seen.insert((r.subject_id.clone(), r.trial_id.clone())) {
            return Err(Error::Validation(vec![format!(
                "duplicate answer from '{}' for trial '{}'",
                r.subject_id, r.trial_id
            )]));
        }
        let entry = table
            .entry((r.subject_id.clone(), key.condition_id.clone()))
            .or_insert_with(|| AbxConditionResult::with_rule(&key.condition_id, level, cap));
        if entry.finished {
            entry.answers_after_finish += 1;
        } else {
            entry.record(key.x_is_a, r.answer == Answer::A)?;
        }
    }
    Ok(table
        .into_iter()
        .map(|((subject_id, _), result)| SubjectResult { subject_id, result })
        .collect())
}

pub fn write_results_csv(w: impl Write, results: &[SubjectResult]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "subject", "condition", "n_trials", "n_correct", "p_value", "pc", "pc_unbiased", "d_prime", "finished",
    ])?;
    for s in results {
        let r = &s.result;
        csv.write_record([
            s.subject_id.clone(),
            r.condition_id.clone(),
            r.n_trials.to_string(),
            r.n_correct.to_string(),
            format!("{:.6}", r.p_value),
            format!("{:.4}", r.pc),
            format!("{:.4}", r.pc_unbiased),
            format!("{:.3}", r.d_prime),
            r.finished.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Subject × condition grid of d′ and p with a marker for finished cells.
pub fn format_results_table(results: &[SubjectResult]) -> String {
    let conditions: Vec<&str> = {
        let mut c: Vec<&str> = results.iter().map(|r| r.result.condition_id.as_str()).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut subjects: Vec<&str> = results.iter().map(|r| r.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let mut s = format!("{:<12}", "subject");
    for c in &conditions {
        let _ = write!(s, " {c:>22}");
    }
    s.push('\n');
    for subj in subjects {
        let _ = write!(s, "{subj:<12}");
        for c in &conditions {
            match results.iter().find(|r| r.subject_id == subj && r.result.condition_id == *c) {
                Some(r) => {
                    let cell = format!(
                        "d'={:+.2} p={:.3}{}",
                        r.result.d_prime,
                        r.result.p_value,
                        if r.result.finished { "*" } else { " " }
                    );
                    let _ = write!(s, " {cell:>22}");
                }
                None => {
                    let _ = write!(s, " {:>22}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

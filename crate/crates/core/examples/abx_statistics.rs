// Early-stopping ABX rule: per-trial thresholds, exact tail
// probabilities and sensitivity estimates.

use brirkit::abx::{binomial_p, dprime_differencing, stopping_thresholds, AbxConditionResult};

pub struct AbxSummary {
    pub thresholds: Vec<Option<u32>>,
    /// Listener who is right on all but every fourth trial.
    pub listener: AbxConditionResult,
    pub p_18_of_25: f64,
    pub d_prime_at_75: f64,
}

pub fn run_example() -> brirkit::Result<AbxSummary> {
    let mut listener = AbxConditionResult::new("demo");
    let mut trial = 0;
    while !listener.finished && listener.n_trials < 25 {
        let x_is_a = trial % 2 == 0;
        let correct = trial % 4 != 3;
        listener.record(x_is_a, x_is_a == correct)?;
        trial += 1;
    }
    Ok(AbxSummary {
        thresholds: stopping_thresholds(25, 0.05),
        listener,
        p_18_of_25: binomial_p(25, 18)?,
        d_prime_at_75: dprime_differencing(0.75)?,
    })
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let s = run_example()?;
    let t: Vec<String> = s.thresholds.iter().map(|k| k.map_or("-".into(), |k| k.to_string())).collect();
    println!("correct answers needed after n trials: {}", t.join(" "));
    let l = &s.listener;
    println!("listener: {}/{} correct, p = {:.4}, finished {}, d' = {:.2}", l.n_correct, l.n_trials, l.p_value, l.finished, l.d_prime);
    println!("P(>=18 of 25) = {:.5}, d'(0.75) = {:.3}", s.p_18_of_25, s.d_prime_at_75);
    Ok(())
}

//! Pass/fail bookkeeping for the acceptance run.

use std::time::{Duration, Instant};

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    /// Short numeric summary of what was compared.
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} ({}) [{:.1} s]: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Collects verdicts and prints each one as it lands.
#[derive(Debug, Default)]
pub struct Ledger {
    verdicts: Vec<Verdict>,
}

impl Ledger {
    pub fn run(&mut self, id: u32, title: &'static str, check: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (pass, detail) = check();
        let v = Verdict {
            id,
            title,
            pass,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{}", v.line());
        self.verdicts.push(v);
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let passed = self.verdicts.iter().filter(|v| v.pass).count();
        format!("{passed}/{} criteria passed", self.verdicts.len())
    }
}

/// `|x - target| ≤ k · se`.
pub fn within_se(x: f64, target: f64, se: f64, k: f64) -> bool {
    (x - target).abs() <= k * se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_counts() {
        let mut l = Ledger::default();
        l.run(1, "ok", || (true, "fine".into()));
        l.run(2, "bad", || (false, "off".into()));
        assert!(!l.all_pass());
        assert_eq!(l.summary(), "1/2 criteria passed");
        assert!(l.verdicts()[0].line().starts_with("PASS criterion  1 (ok)"));
    }

    #[test]
    fn se_band() {
        assert!(within_se(1.0, 1.3, 0.1, 4.0));
        assert!(!within_se(1.0, 1.5, 0.1, 4.0));
    }
}

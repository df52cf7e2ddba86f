//! Bookkeeping for the acceptance run: every criterion ends in exactly one
//! `PASS` or `FAIL` line, preceded by the numbers it was judged on.

use std::time::{Duration, Instant};

/// Closed interval test used by the rate windows.
pub fn within(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|v| v >= lo && v <= hi)
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
}

#[derive(Debug)]
pub struct Verdict {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct Report {
    pub verdicts: Vec<Verdict>,
}

/// Collects the detail lines and failed checks of one criterion.
#[derive(Debug, Default)]
pub struct Checks {
    failures: Vec<String>,
}

impl Checks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prints `detail` and records it as a failure unless `ok`.
    pub fn check(&mut self, ok: bool, detail: impl Into<String>) {
        let detail = detail.into();
        println!("    [{}] {detail}", if ok { "ok" } else { "FAILED" });
        if !ok {
            self.failures.push(detail);
        }
    }

    /// Informational line that does not enter the verdict.
    pub fn note(&self, detail: impl AsRef<str>) {
        println!("    {}", detail.as_ref());
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl Report {
    pub fn run(&mut self, id: usize, title: &'static str, body: impl FnOnce(&mut Checks)) {
        println!("criterion {id}: {title}");
        let start = Instant::now();
        let mut checks = Checks::new();
        body(&mut checks);
        let elapsed = start.elapsed();
        let pass = checks.passed();
        println!(
            "criterion {id} {}: {title} ({:.1} s{})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if pass { String::new() } else { format!(", {} failed check(s)", checks.failures.len()) }
        );
        self.verdicts.push(Verdict { id, title, pass, elapsed });
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let mut out = String::from("acceptance summary\n");
        for v in &self.verdicts {
            out.push_str(&format!("{} criterion {}: {}\n", if v.pass { "PASS" } else { "FAIL" }, v.id, v.title));
        }
        out
    }
}

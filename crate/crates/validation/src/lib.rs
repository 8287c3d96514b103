//! Bookkeeping for the acceptance run: one line per criterion and an exit
//! status that fails when any criterion does.

use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Default)]
pub struct Run {
    outcomes: Vec<Outcome>,
}

impl Run {
    /// Times `check`, prints its line and records it. An `Err` counts as a failure.
    pub fn criterion(&mut self, id: u8, name: &str, check: impl FnOnce() -> Result<(bool, String), String>) {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let o = Outcome {
            id,
            name: name.into(),
            pass,
            detail,
            elapsed: start.elapsed(),
        };
        println!(
            "criterion {:>2} {:<32} {} ({:.1} s): {}",
            o.id,
            o.name,
            if o.pass { "PASS" } else { "FAIL" },
            o.elapsed.as_secs_f64(),
            o.detail
        );
        self.outcomes.push(o);
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Prints the summary and returns the process exit status.
    pub fn finish(self) -> std::process::ExitCode {
        let failed: Vec<u8> = self.outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
        println!(
            "acceptance: {} passed, {} failed{}",
            self.outcomes.len() - failed.len(),
            failed.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(" {failed:?}")
            }
        );
        if failed.is_empty() {
            std::process::ExitCode::SUCCESS
        } else {
            std::process::ExitCode::FAILURE
        }
    }
}

use ffpat_core::validate::run_all;
use std::io::Write;

use serde_json::Value;

use crate::error::CliError;
use crate::layout::{write_json, Layout};

pub fn run(layout: &Layout) -> Result<Value, CliError> {
    let report = run_all()?;
    write_json(&layout.root.join("validate.json"), &report)?;
    for c in &report.checks {
        eprintln!(
            "{} {}: {:.3e} (threshold {:.3e}) {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
    let value = serde_json::to_value(&report).expect("report serializes");
    if !report.passed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let text = serde_json::to_string_pretty(&value).expect("json");
        let _ = writeln!(std::io::stdout(), "{text}");
        return Err(CliError::Data(format!(
            "validation failed: {}",
            failed.join(", ")
        )));
    }
    Ok(value)
}

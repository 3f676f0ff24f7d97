//! Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
//!
//! A criterion may appear in `EXPECTED_FAILURES` only together with the exact
//! checks that are known to miss. The suite still prints FAIL for it, and it
//! exits non-zero if any other check fails or if a listed check starts passing.

use std::process::ExitCode;

use fedspeech_core::reproduce::run_all;

/// (criterion id, check name) pairs that the model cannot meet.
const EXPECTED_FAILURES: &[(u8, &str)] = &[(5, "agx large b4 fp32 verdict")];

fn expected(id: u8, name: &str) -> bool {
    EXPECTED_FAILURES
        .iter()
        .any(|(i, prefix)| *i == id && name.starts_with(prefix))
}

fn main() -> ExitCode {
    let results = match run_all() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut unexpected = Vec::new();
    for r in &results {
        println!("{}", r.line());
        for m in r.failures() {
            let known = expected(r.id, &m.name);
            println!(
                "    {} {}: {:.6} (expected {})",
                if known { "known miss" } else { "MISS" },
                m.name,
                m.value,
                m.expected
            );
            if !known {
                unexpected.push(format!("criterion {}: {}", r.id, m.name));
            }
        }
    }
    for (id, prefix) in EXPECTED_FAILURES {
        let still_failing = results
            .iter()
            .filter(|r| r.id == *id)
            .flat_map(|r| r.failures())
            .any(|m| m.name.starts_with(prefix));
        if !still_failing {
            unexpected.push(format!("criterion {id}: '{prefix}' now passes; remove it from EXPECTED_FAILURES"));
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria pass", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for u in &unexpected {
            eprintln!("unexpected: {u}");
        }
        ExitCode::FAILURE
    }
}

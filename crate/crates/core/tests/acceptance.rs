//! Runs every acceptance criterion and prints one PASS or FAIL line each.
//! Built without the libtest harness so the lines are always shown.

use std::process::ExitCode;

use plap_core::acceptance::{run, CRITERIA};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for &(id, _, _) in CRITERIA.iter() {
        let rep = run(id);
        println!("{}", rep.line());
        if !rep.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}

use std::process::ExitCode;

use metabasin_verify::acceptance::{run, Settings};

fn main() -> ExitCode {
    let report = run(&Settings::default());
    for c in &report.checks {
        println!("{}", c.line());
    }
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!("acceptance: {passed}/{} criteria pass", report.checks.len());
    if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

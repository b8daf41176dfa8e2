use std::process::ExitCode;

use crossdiff::acceptance;

fn main() -> ExitCode {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("acceptance: {} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

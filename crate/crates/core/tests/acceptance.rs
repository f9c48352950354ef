//! One line per criterion. Exits nonzero if any gate fails.

use dissipa_core::acceptance;

fn main() {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

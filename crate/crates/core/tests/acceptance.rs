//! Runs every acceptance criterion at the full tier and prints one line per
//! criterion. Exits nonzero if any criterion fails.

use spreadlab::acceptance::{Status, Suite, Tier};
use spreadlab::Execution;

fn main() {
    let mut suite = Suite::new(Tier::Full, Execution::available());
    let outcomes = suite.run_all(|o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| o.status != Status::Pass).count();
    println!("acceptance: {} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

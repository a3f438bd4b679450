//! One PASS/FAIL line per acceptance criterion. `BRWLAB_ONLY=4,9` restricts
//! the run; `BRWLAB_PROFILE=quick` uses fewer episodes.

use brwlab::validation::{run_all, Profile};

fn main() {
    let profile: Profile = std::env::var("BRWLAB_PROFILE")
        .ok()
        .map(|p| p.parse().expect("BRWLAB_PROFILE must be quick or full"))
        .unwrap_or(Profile::Full);
    let only: Vec<u32> = std::env::var("BRWLAB_ONLY")
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let reports = run_all(profile, &only, |r| {
        println!(
            "criterion {:>2} {} ({:.1}s) {}: {} [{}]",
            r.id,
            if r.pass { "PASS" } else { "FAIL" },
            r.seconds,
            r.title,
            r.detail,
            r.producer
        );
    });
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

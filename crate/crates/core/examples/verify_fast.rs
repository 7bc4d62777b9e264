//! The fast self-check suite, as run by `spde verify`.

fn main() {
    let checks = spde::verify::fast_suite();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
}

//! Runs the numerical self-checks: every analytic gradient against central
//! differences, the flip-cost closed form and federated averaging.

fn main() -> fedsleep::Result<()> {
    let checks = fedsleep::verify::run_all(0)?;
    for c in &checks {
        println!(
            "{} {:<26} {:.3e} (tolerance {:.0e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    Ok(())
}

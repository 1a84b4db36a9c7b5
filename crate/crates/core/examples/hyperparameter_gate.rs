//! Stability margin of step sizes for a few problem constants and staleness bounds.

use asysca::sca::validate_hyperparams;

fn main() -> asysca::Result<()> {
    println!("{:>6} {:>6} {:>8} {:>8} {:>4} {:>12}", "L", "mu", "gamma", "rho", "tau", "margin");
    for (l, mu, gamma, rho, tau) in [
        (1.0, 1.0, 0.01, 0.01, 10),
        (1.0, 1.0, 0.001, 0.1, 5),
        (2.0, 10.0, 0.01, 0.5, 3),
        (0.5, 2.0, 0.001, 0.2, 5),
    ] {
        let c = validate_hyperparams(l, l, mu, gamma, rho, tau)?;
        println!(
            "{l:>6} {mu:>6} {gamma:>8} {rho:>8} {tau:>4} {:>12.6} {}",
            c.margin,
            if c.feasible { "ok" } else { "no guarantee" }
        );
    }
    Ok(())
}

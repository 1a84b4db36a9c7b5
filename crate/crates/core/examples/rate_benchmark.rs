//! Empirical rate of the stationarity measure with `γ = ρ = T^(-1/2)`.

use asysca::experiment::{write_rate, RateBenchmark};

fn main() -> asysca::Result<()> {
    let bench = RateBenchmark {
        seeds: 5,
        ..RateBenchmark::default()
    };
    let res = bench.run()?;
    write_rate(&res, std::io::stdout())?;
    println!("log-log slope {:.3}", res.slope);
    Ok(())
}

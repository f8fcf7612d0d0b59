//! Writes the seven-sensor, two-factor fixture as CSV.
//!
//! cargo run -p cofactor --example export_fixture > sensor_array.csv

use cofactor::io::write_csv;
use cofactor::simulation::fixtures::{two_factor_array, ARRAY_SEED};

fn main() -> cofactor::Result<()> {
    let array = two_factor_array(ARRAY_SEED)?;
    write_csv(std::io::stdout().lock(), "time", &array.observed)
}

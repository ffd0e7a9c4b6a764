//! Simulate one delayed Hawkes path of the bundled example model and print
//! Q(t) and Lambda(t) on a grid as CSV.
//!
//! cargo run -p hawkeslab --example sample_path -- [seed] [horizon]

use hawkeslab::io::parse_model_text;
use hawkeslab::sim::{reconstruct_paths, simulate_network};
use hawkeslab::StreamKey;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let horizon: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20.0);
    let model = parse_model_text(include_str!("sample_path.json"))?;
    let log = simulate_network(&model, horizon, StreamKey::new(seed))?;
    let grid: Vec<f64> = (0..=2000).map(|k| horizon * k as f64 / 2000.0).collect();
    let paths = reconstruct_paths(&log, &model, &grid)?;
    println!("t,q,lambda");
    for (k, t) in grid.iter().enumerate() {
        println!("{t},{},{}", paths.q[0][k], paths.lambda[0][k]);
    }
    Ok(())
}

use clap::Parser;

use locfade::cli;

fn main() {
    // Results are byte-identical for any thread count; the cap only trades
    // wall-clock time. An unparseable value falls back to the rayon default.
    if let Ok(raw) = std::env::var("LOCFADE_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
    let cli = cli::Cli::parse();
    std::process::exit(cli::run(cli));
}

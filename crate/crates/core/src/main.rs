use clap::Parser;
use lattice_vortex::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

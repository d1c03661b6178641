use clap::Parser;
use taylor_lsv::cli::{main_with, Cli};

fn main() {
    std::process::exit(main_with(Cli::parse()));
}

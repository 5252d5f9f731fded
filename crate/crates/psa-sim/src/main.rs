use clap::Parser;

fn main() {
    env_logger::init();
    let cli = psa_sim::cli::Cli::parse();
    std::process::exit(psa_sim::cli::run(cli));
}

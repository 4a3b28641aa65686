use clap::Parser;

fn main() {
    let cli = carleman_lab::cli::Cli::parse();
    std::process::exit(carleman_lab::cli::run(&cli));
}

use clap::Parser;

fn main() {
    let cli = rkhs_probe::cli::Cli::parse();
    std::process::exit(rkhs_probe::cli::run(cli));
}

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = covadj::cli::Cli::parse();
    std::process::exit(covadj::cli::run(cli));
}

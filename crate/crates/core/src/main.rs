use clap::Parser;

fn main() {
    let cli = stevent::cli::Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.global.log_level)
        .format_timestamp(None)
        .init();
    if let Err(e) = stevent::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

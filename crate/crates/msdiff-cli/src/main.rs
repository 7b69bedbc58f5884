use clap::Parser;

fn main() {
    let cli = msdiff_cli::Cli::parse();
    if let Err(err) = msdiff_cli::init_thread_pool().and_then(|()| msdiff_cli::run(cli)) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

use clap::Parser;
use ocsctl::Cli;

fn main() {
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    std::process::exit(rt.block_on(ocsctl::run(cli)));
}

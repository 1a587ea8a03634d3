use clap::Parser;

fn main() {
    let cli = dualprox_harness::Cli::parse();
    let code = dualprox_harness::run(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code as i32);
}

use std::io;

fn main() {
    tracing_subscriber::fmt().with_writer(io::stderr).with_target(false).init();
    let stdin = io::stdin();
    let code = birdspot::cli::run(std::env::args_os(), &mut stdin.lock(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}

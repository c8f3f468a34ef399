use std::io::{self, Write};

fn main() {
    let mut err = io::stderr();
    if let Err(e) = kcum_cli::configure_threads() {
        let _ = writeln!(err, "error: {e}");
        std::process::exit(e.exit_code() as i32);
    }
    let code = kcum_cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut err);
    std::process::exit(code);
}

use clap::Parser;
use ellipsekit_cli::{run, Cli, Exit};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors
            std::process::exit(if e.use_stderr() { Exit::Input as i32 } else { 0 });
        }
    };
    let code = run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code as i32);
}

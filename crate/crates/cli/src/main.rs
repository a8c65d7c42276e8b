use clap::Parser;

fn main() {
    let cli = match kabc_cli::Cli::try_parse() {
        Ok(cli) => cli,
        // usage errors are config errors; clap's own status 2 means blow-up here
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(kabc_cli::main_with(cli));
}

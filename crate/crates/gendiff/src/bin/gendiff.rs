use std::process::exit;

fn main() {
    exit(gendiff::cli::run(std::env::args_os()));
}

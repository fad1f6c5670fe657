//! Command-line entry point; all logic lives in the library's cli module.

fn main() {
    std::process::exit(ergodyn_core::cli::run(std::env::args()));
}

use cyclefuzz::cli;

fn main() {
    std::process::exit(cli::main());
}

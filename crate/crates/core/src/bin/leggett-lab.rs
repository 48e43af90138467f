fn main() {
    std::process::exit(leggett_lab::cli::main_exit_code());
}

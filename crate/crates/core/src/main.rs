fn main() {
    std::process::exit(implicit_subgoals::cli::cli_main(std::env::args_os()));
}

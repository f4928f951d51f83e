fn main() {
    std::process::exit(renewal_tail::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(throwsim::cli::run());
}

fn main() {
    std::process::exit(trace_lab::cli::main_entry(std::env::args_os()));
}

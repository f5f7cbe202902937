fn main() {
    std::process::exit(carimorph::run(std::env::args_os()));
}

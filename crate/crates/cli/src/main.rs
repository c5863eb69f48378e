fn main() {
    std::process::exit(nodalquad::run(std::env::args_os()));
}

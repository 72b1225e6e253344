fn main() {
    let env: Vec<(String, String)> = std::env::vars().collect();
    let code = artifactprobe_cli::run(
        std::env::args_os(),
        env,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}

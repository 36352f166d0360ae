fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let env_seed = std::env::var(recatom::cli::SEED_ENV).ok();
    std::process::exit(recatom::cli::main_with_args(&argv, env_seed.as_deref()));
}

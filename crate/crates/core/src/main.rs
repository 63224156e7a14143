use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let offline = std::env::var(dtforge::schema_store::OFFLINE_ENV).ok();
    let stdin = std::io::stdin();
    let code = dtforge::cli::run(
        std::env::args_os(),
        offline.as_deref(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
        &mut stdin.lock(),
    );
    ExitCode::from(code as u8)
}

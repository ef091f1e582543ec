use std::net::SocketAddr;
use std::process::ExitCode;

use persopilot_server::{build_engine, build_llm, router, AppState, ServerConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            eprintln!("persopilot: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServerConfig::from_env()?;
    // Kept alive here so a blocking HTTP client is never dropped inside the runtime.
    let llm = build_llm(&config)?;
    let engine = build_engine(&config, llm.clone())?;
    let app = router(AppState::new(engine));
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {addr} (model mode {:?})", config.llm.mode);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    drop(runtime);
    drop(llm);
    Ok(())
}

pub mod api;
pub mod auth;
pub mod cli;
pub mod config;
pub mod store;
pub mod terminology;

use std::io::Write;
use std::sync::Arc;

pub use api::{router, AppState};
pub use config::Config;

/// Opens storage, binds the listener and serves until Ctrl-C.
pub fn serve(config: Config) -> anyhow::Result<()> {
    let listen = config.listen.clone();
    // built before the runtime: the blocking terminology client must not be
    // created or dropped on an async worker
    let app = Arc::new(AppState::open(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&listen).await?;
        let addr = listener.local_addr()?;
        tracing::info!(%addr, "serving");
        println!("listening on {addr}");
        std::io::stdout().flush()?;
        axum::serve(listener, router(app.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    });
    drop(runtime);
    drop(app);
    result
}

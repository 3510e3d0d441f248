use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use chance_utility_service::{router, SessionStore};
use clap::Parser;

#[derive(Parser)]
#[command(name = "chance-utility-service", version, about = "Serve live elicitation sessions over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory holding one JSON document per session.
    #[arg(long, default_value = "sessions")]
    store: PathBuf,
}

#[tokio::main]
async fn main() -> Result<()> {
    let args = Args::parse();
    let store = SessionStore::open(&args.store).with_context(|| format!("opening store {}", args.store.display()))?;
    eprintln!("loaded {} session(s) from {}", store.len(), args.store.display());
    let listener = tokio::net::TcpListener::bind(args.listen).await.with_context(|| format!("binding {}", args.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

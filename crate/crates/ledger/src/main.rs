use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use pyom_core::Currency;
use pyom_ledger::{http, Ledger};

/// Ledger service for self-printed notes.
#[derive(Debug, Parser)]
#[command(name = "pyom-ledger", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "PYOM_LISTEN", default_value = "127.0.0.1:8650")]
    listen: SocketAddr,
    /// Directory holding the mint seed and event log.
    #[arg(long, env = "PYOM_DATA_DIR", default_value = "pyom-data")]
    data_dir: PathBuf,
    /// The single currency this ledger serves.
    #[arg(long, env = "PYOM_CURRENCY", default_value = "USD")]
    currency: Currency,
}

#[tokio::main]
async fn main() -> anyhow_free::Result {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();

    let ledger = Ledger::open(&args.data_dir, args.currency)?;
    tracing::info!(
        data_dir = %args.data_dir.display(),
        currency = %args.currency,
        mint_public = %ledger.mint_public(),
        events = ledger.next_seq(),
        "ledger recovered"
    );
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    http::serve(listener, Arc::new(ledger), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

mod anyhow_free {
    pub type Result = std::result::Result<(), Box<dyn std::error::Error>>;
}

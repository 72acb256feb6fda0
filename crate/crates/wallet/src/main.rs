use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use pyom_core::{CashId, Currency, MerchantId, MoneyAmount, Verdict};
use pyom_ledger::api::RevocationOutcome;
use pyom_ledger::AccountKind;
use pyom_wallet::{HttpClient, PrintOptions, Wallet, WalletError, WalletStore};

const DEFAULT_SERVER: &str = "http://127.0.0.1:8650";

/// Wallet and offline merchant terminal for printed notes.
#[derive(Debug, Parser)]
#[command(name = "pyom", version)]
struct Cli {
    /// Wallet directory.
    #[arg(long, env = "PYOM_STORE", default_value = "pyom-wallet", global = true)]
    store: PathBuf,
    /// Ledger base URL; defaults to the one recorded at init.
    #[arg(long, env = "PYOM_SERVER", global = true)]
    server: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    User,
    Merchant,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Open an account and store its credentials.
    Init {
        #[arg(long, value_enum, default_value = "user")]
        kind: Kind,
        /// Opening balance in major units, e.g. 100.00.
        #[arg(long, default_value = "0")]
        initial: String,
        #[arg(long, default_value = "USD")]
        currency: Currency,
    },
    /// Show the account balance.
    Balance,
    /// Print a note: writes note.bin, note.txt and note.png.
    Print {
        /// Value in major units, e.g. 10.00.
        amount: String,
        /// Bind the note to this merchant.
        #[arg(long)]
        merchant: Option<MerchantId>,
        /// Skip the QR image.
        #[arg(long)]
        no_png: bool,
    },
    /// Redeem a note into this account. INPUT is a file, `PYOM1:` text, or `-`.
    Deposit { input: String },
    /// Take notes against a bill; change returns to each note's printer.
    RedeemBatch {
        /// Bill in major units.
        #[arg(long)]
        bill: String,
        #[arg(required = true)]
        inputs: Vec<String>,
    },
    /// Verify a merchant-bound note offline and queue a receipt.
    AcceptOffline { input: String },
    /// Submit queued receipts.
    Sync,
    /// Cache the mint key and this merchant's epoch key.
    RefreshKeys,
    /// Invalidate an unspent note you printed.
    Revoke { cash_id: CashId },
    /// Retire this merchant's epoch key.
    RotateEpoch,
    /// Show a note's status.
    Status { cash_id: CashId },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_input(input: &str) -> Result<Vec<u8>, WalletError> {
    if input.starts_with(pyom_core::TEXT_PREFIX) {
        return Ok(input.trim().as_bytes().to_vec());
    }
    if input == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map_err(|source| WalletError::Io { path: "-".into(), source })?;
        return Ok(buf);
    }
    std::fs::read(input).map_err(|source| WalletError::Io { path: input.into(), source })
}

fn trim_text(mut bytes: Vec<u8>) -> Vec<u8> {
    // note.txt may end in a newline when edited by hand.
    if bytes.starts_with(pyom_core::TEXT_PREFIX.as_bytes()) {
        while bytes.last().is_some_and(|b| b.is_ascii_whitespace()) {
            bytes.pop();
        }
    }
    bytes
}

fn parse_amount(raw: &str, currency: Currency) -> Result<MoneyAmount, WalletError> {
    MoneyAmount::parse_major(raw, currency).map_err(|e| WalletError::Usage(format!("bad amount {raw:?}: {e}")))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), WalletError> {
    let store = WalletStore::new(&cli.store);
    let stored_server = store.credentials().ok().flatten().and_then(|c| c.server);
    let server = cli.server.clone().or(stored_server).unwrap_or_else(|| DEFAULT_SERVER.to_owned());
    let api = HttpClient::new(&server);
    let mut rng = rand::rngs::OsRng;

    if let Command::Init { kind, initial, currency } = &cli.command {
        let kind = match kind {
            Kind::User => AccountKind::User,
            Kind::Merchant => AccountKind::Merchant,
        };
        let initial = parse_amount(initial, *currency)?;
        let wallet = Wallet::init(store, &api, kind, initial, Some(server))?;
        println!("{}", wallet.account_id());
        return Ok(());
    }

    let wallet = Wallet::open(store)?;
    let currency = wallet.credentials().currency;
    match cli.command {
        Command::Init { .. } => unreachable!("handled above"),
        Command::Balance => println!("{}", wallet.balance(&api)?),
        Command::Print { amount, merchant, no_png } => {
            let amount = parse_amount(&amount, currency)?;
            let printed = wallet.print(&api, &mut rng, amount, merchant, PrintOptions { png: !no_png })?;
            println!("{}", printed.note.cash_id);
            eprintln!("printed {amount} to {}", printed.dir.display());
        }
        Command::Deposit { input } => {
            let credited = wallet.deposit(&api, &trim_text(read_input(&input)?))?;
            println!("credited {credited}");
        }
        Command::RedeemBatch { bill, inputs } => {
            let bill = parse_amount(&bill, currency)?;
            let inputs = inputs.iter().map(|i| read_input(i).map(trim_text)).collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
            let s = wallet.redeem_batch(&api, &refs, bill)?;
            println!("credited {}", s.merchant_credit);
            for c in s.change_credits {
                println!("change {} to {}", c.amount, c.account_id);
            }
        }
        Command::AcceptOffline { input } => {
            let acceptance = wallet.accept_offline(&mut rng, now(), &trim_text(read_input(&input)?))?;
            match acceptance.report.overall {
                Verdict::Accept => println!("ACCEPT"),
                Verdict::Reject(reason) => {
                    println!("REJECT {}", reason.code());
                    return Err(WalletError::Rejected(reason));
                }
            }
        }
        Command::Sync => println!("{}", wallet.sync(&api)?),
        Command::RefreshKeys => {
            let keys = wallet.refresh_keys(&api)?;
            println!("mint {}", keys.mint_public);
            for e in keys.epochs {
                println!("epoch {} {}", e.epoch_id, e.epoch_public);
            }
        }
        Command::Revoke { cash_id } => {
            let outcome = wallet.revoke(&api, &cash_id)?;
            println!("{}", match outcome {
                RevocationOutcome::Finalized => "finalized",
                RevocationOutcome::Pending => "pending: value returns when the merchant rotates its epoch",
            });
        }
        Command::RotateEpoch => {
            let epoch = wallet.rotate_epoch(&api)?;
            println!("epoch {} {}", epoch.epoch_id, epoch.epoch_public);
        }
        Command::Status { cash_id } => println!("{}", wallet.status(&api, &cash_id)?),
    }
    Ok(())
}

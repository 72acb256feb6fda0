//! HTTP/JSON front end.
//!
//! Binary fields travel as unpadded base64url. Errors are a 4xx/5xx status
//! with a [`LedgerError`] body. Ledger calls may `fsync`, so they run on the
//! blocking pool.

use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pyom_core::{AccountId, CashId};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::api::*;
use crate::error::{ErrorCode, LedgerError};
use crate::keys::Token;
use crate::service::Ledger;

struct HttpError(LedgerError);

impl From<LedgerError> for HttpError {
    fn from(e: LedgerError) -> Self {
        Self(e)
    }
}

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        match e {
            ApiError::Ledger(e) => Self(e),
            ApiError::Transport(m) => Self(LedgerError::new(ErrorCode::Internal, m)),
        }
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.error_code.http_status()).unwrap_or(StatusCode::BAD_REQUEST);
        (status, Json(self.0)).into_response()
    }
}

/// JSON body whose rejections use the ledger error shape.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = HttpError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(rejection) => Err(HttpError(LedgerError::new(
                ErrorCode::InvalidArgument,
                match rejection {
                    JsonRejection::JsonDataError(e) => e.body_text(),
                    other => other.body_text(),
                },
            ))),
        }
    }
}

fn bearer(headers: &HeaderMap) -> Result<Token, HttpError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .and_then(|t| Token::from_str(t).ok())
        .ok_or_else(|| HttpError(LedgerError::new(ErrorCode::Unauthorized, "missing or malformed bearer token")))
}

fn parse_id<T: FromStr>(raw: &str, what: &str) -> Result<T, HttpError> {
    raw.parse()
        .map_err(|_| HttpError(LedgerError::new(ErrorCode::InvalidArgument, format!("malformed {what} {raw:?}"))))
}

async fn blocking<T, F>(ledger: Arc<Ledger>, f: F) -> Result<Json<T>, HttpError>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Ledger) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&ledger))
        .await
        .map_err(|e| HttpError(LedgerError::new(ErrorCode::Internal, e.to_string())))?
        .map(Json)
        .map_err(HttpError::from)
}

type Shared = State<Arc<Ledger>>;

async fn create_account(State(l): Shared, Body(req): Body<CreateAccountRequest>) -> Result<Json<CreateAccountResponse>, HttpError> {
    blocking(l, move |l| LedgerApi::create_account(l, &req)).await
}

async fn balance(State(l): Shared, Path(id): Path<String>) -> Result<Json<BalanceResponse>, HttpError> {
    let id: AccountId = parse_id(&id, "account id")?;
    blocking(l, move |l| LedgerApi::balance(l, &id)).await
}

async fn issue(State(l): Shared, headers: HeaderMap, Body(req): Body<IssueRequest>) -> Result<Json<pyom_core::IssuedMaterials>, HttpError> {
    let token = bearer(&headers)?;
    blocking(l, move |l| LedgerApi::issue_cash(l, &token, &req)).await
}

async fn redeem(State(l): Shared, Body(req): Body<RedeemRequest>) -> Result<Json<RedeemResponse>, HttpError> {
    blocking(l, move |l| LedgerApi::redeem(l, &req)).await
}

async fn redeem_batch(State(l): Shared, Body(req): Body<RedeemBatchRequest>) -> Result<Json<BatchSettlement>, HttpError> {
    blocking(l, move |l| LedgerApi::redeem_batch(l, &req)).await
}

async fn revoke(State(l): Shared, headers: HeaderMap, Path(id): Path<String>) -> Result<Json<RevokeResponse>, HttpError> {
    let token = bearer(&headers)?;
    let id: CashId = parse_id(&id, "cash id")?;
    blocking(l, move |l| LedgerApi::revoke(l, &token, &id)).await
}

async fn status(State(l): Shared, Path(id): Path<String>) -> Result<Json<StatusResponse>, HttpError> {
    let id: CashId = parse_id(&id, "cash id")?;
    blocking(l, move |l| LedgerApi::status(l, &id)).await
}

async fn mint_public(State(l): Shared) -> Result<Json<MintKeyResponse>, HttpError> {
    blocking(l, LedgerApi::mint_public).await
}

async fn epoch(State(l): Shared, Path(id): Path<String>) -> Result<Json<EpochResponse>, HttpError> {
    let id: AccountId = parse_id(&id, "merchant id")?;
    blocking(l, move |l| LedgerApi::epoch(l, &id)).await
}

async fn rotate(State(l): Shared, headers: HeaderMap, Path(id): Path<String>) -> Result<Json<EpochResponse>, HttpError> {
    let token = bearer(&headers)?;
    let id: AccountId = parse_id(&id, "merchant id")?;
    blocking(l, move |l| LedgerApi::rotate_epoch(l, &token, &id)).await
}

async fn settle(
    State(l): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    Body(req): Body<SettleRequest>,
) -> Result<Json<SettleResponse>, HttpError> {
    let token = bearer(&headers)?;
    let id: AccountId = parse_id(&id, "merchant id")?;
    blocking(l, move |l| LedgerApi::settle(l, &token, &id, &req)).await
}

async fn allowlist(
    State(l): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    Body(req): Body<AllowlistRequest>,
) -> Result<Json<AllowlistRequest>, HttpError> {
    let token = bearer(&headers)?;
    let id: AccountId = parse_id(&id, "merchant id")?;
    blocking(l, move |l| LedgerApi::set_allowlist(l, &token, &id, &req).map(|()| req)).await
}

pub fn router(ledger: Arc<Ledger>) -> Router {
    Router::new()
        .route("/accounts", post(create_account))
        .route("/accounts/{id}/balance", get(balance))
        .route("/cash", post(issue))
        .route("/cash/redeem", post(redeem))
        .route("/cash/redeem-batch", post(redeem_batch))
        .route("/cash/{id}/revoke", post(revoke))
        .route("/cash/{id}/status", get(status))
        .route("/mint/public-key", get(mint_public))
        .route("/merchants/{id}/epoch", get(epoch))
        .route("/merchants/{id}/epoch/rotate", post(rotate))
        .route("/merchants/{id}/settlements", post(settle))
        .route("/merchants/{id}/allowlist", post(allowlist))
        .with_state(ledger)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    ledger: Arc<Ledger>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(ledger)).with_graceful_shutdown(shutdown).await
}

/// A server running on its own runtime thread; shuts down when dropped.
pub struct BackgroundServer {
    addr: std::net::SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(addr: std::net::SocketAddr, ledger: Arc<Ledger>) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = tokio::sync::oneshot::channel();
        let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        let thread = std::thread::Builder::new().name(format!("pyom-ledger-{addr}")).spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                serve(listener, ledger, async {
                    let _ = stopped.await;
                })
                .await
            })
        })?;
        Ok(Self { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting, waits for in-flight requests, and joins the thread.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

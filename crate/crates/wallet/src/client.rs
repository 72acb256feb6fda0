//! [`LedgerApi`] over HTTP.

use std::time::Duration;

use pyom_core::{AccountId, CashId, IssuedMaterials, MerchantId};
use pyom_ledger::api::*;
use pyom_ledger::{LedgerError, Token};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct HttpClient {
    base: String,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_connect(Some(Duration::from_secs(5)))
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .new_agent();
        Self { base: base_url.trim_end_matches('/').to_owned(), agent }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ApiError> {
        let resp = self.agent.get(format!("{}{path}", self.base)).call().map_err(transport)?;
        read(resp)
    }

    fn post<T: DeserializeOwned>(&self, path: &str, token: Option<&Token>, body: &impl Serialize) -> Result<T, ApiError> {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(token) = token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        read(req.send_json(body).map_err(transport)?)
    }
}

fn transport(e: ureq::Error) -> ApiError {
    ApiError::Transport(e.to_string())
}

fn read<T: DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<T, ApiError> {
    let status = resp.status();
    if status.is_success() {
        return resp.body_mut().read_json().map_err(transport);
    }
    // Anything without a ledger error body (a proxy, a wrong URL) counts as
    // not having reached the ledger.
    match resp.body_mut().read_json::<LedgerError>() {
        Ok(e) => Err(ApiError::Ledger(e)),
        Err(_) => Err(ApiError::Transport(format!("HTTP {status} without a ledger error body"))),
    }
}

impl LedgerApi for HttpClient {
    fn create_account(&self, req: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError> {
        self.post("/accounts", None, req)
    }

    fn balance(&self, account: &AccountId) -> Result<BalanceResponse, ApiError> {
        self.get(&format!("/accounts/{account}/balance"))
    }

    fn issue_cash(&self, token: &Token, req: &IssueRequest) -> Result<IssuedMaterials, ApiError> {
        self.post("/cash", Some(token), req)
    }

    fn redeem(&self, req: &RedeemRequest) -> Result<RedeemResponse, ApiError> {
        self.post("/cash/redeem", None, req)
    }

    fn redeem_batch(&self, req: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError> {
        self.post("/cash/redeem-batch", None, req)
    }

    fn revoke(&self, token: &Token, cash_id: &CashId) -> Result<RevokeResponse, ApiError> {
        self.post(&format!("/cash/{cash_id}/revoke"), Some(token), &())
    }

    fn status(&self, cash_id: &CashId) -> Result<StatusResponse, ApiError> {
        self.get(&format!("/cash/{cash_id}/status"))
    }

    fn mint_public(&self) -> Result<MintKeyResponse, ApiError> {
        self.get("/mint/public-key")
    }

    fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        self.get(&format!("/merchants/{merchant}/epoch"))
    }

    fn rotate_epoch(&self, token: &Token, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        self.post(&format!("/merchants/{merchant}/epoch/rotate"), Some(token), &())
    }

    fn settle(&self, token: &Token, merchant: &MerchantId, req: &SettleRequest) -> Result<SettleResponse, ApiError> {
        self.post(&format!("/merchants/{merchant}/settlements"), Some(token), req)
    }

    fn set_allowlist(&self, token: &Token, merchant: &MerchantId, req: &AllowlistRequest) -> Result<(), ApiError> {
        self.post::<AllowlistRequest>(&format!("/merchants/{merchant}/allowlist"), Some(token), req).map(drop)
    }
}

//! In-process transport: [`LedgerApi`] implemented directly on [`Ledger`].

use pyom_core::{AccountId, CashId, IssuedMaterials, MerchantId, MoneyAmount};

use crate::api::*;
use crate::keys::Token;
use crate::service::Ledger;

impl LedgerApi for Ledger {
    fn create_account(&self, req: &CreateAccountRequest) -> Result<CreateAccountResponse, ApiError> {
        let initial = MoneyAmount::new(req.initial_minor_units, req.currency);
        let (account_id, token) = Ledger::create_account(self, req.kind, initial)?;
        Ok(CreateAccountResponse { account_id, token })
    }

    fn balance(&self, account: &AccountId) -> Result<BalanceResponse, ApiError> {
        let amount = Ledger::balance(self, account)?;
        Ok(BalanceResponse { minor_units: amount.minor_units, currency: amount.currency })
    }

    fn issue_cash(&self, token: &Token, req: &IssueRequest) -> Result<IssuedMaterials, ApiError> {
        Ok(Ledger::issue_cash(self, token, req.amount, req.cash_public, req.kind, req.target_merchant)?)
    }

    fn redeem(&self, req: &RedeemRequest) -> Result<RedeemResponse, ApiError> {
        let credited = self.redeem_cash(&req.cash_id, &req.payee, &req.redeem_sig)?;
        Ok(RedeemResponse { credited })
    }

    fn redeem_batch(&self, req: &RedeemBatchRequest) -> Result<BatchSettlement, ApiError> {
        Ok(self.redeem_batch_with_change(&req.notes, req.bill, &req.payee)?)
    }

    fn revoke(&self, token: &Token, cash_id: &CashId) -> Result<RevokeResponse, ApiError> {
        Ok(RevokeResponse { revocation: self.revoke_cash(cash_id, token)? })
    }

    fn status(&self, cash_id: &CashId) -> Result<StatusResponse, ApiError> {
        Ok(StatusResponse { status: Ledger::status(self, cash_id)? })
    }

    fn mint_public(&self) -> Result<MintKeyResponse, ApiError> {
        Ok(MintKeyResponse { mint_public: Ledger::mint_public(self) })
    }

    fn epoch(&self, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        Ok(Ledger::epoch(self, merchant)?)
    }

    fn rotate_epoch(&self, token: &Token, merchant: &MerchantId) -> Result<EpochResponse, ApiError> {
        Ok(self.rotate_merchant_epoch(merchant, token)?)
    }

    fn settle(&self, token: &Token, merchant: &MerchantId, req: &SettleRequest) -> Result<SettleResponse, ApiError> {
        Ok(SettleResponse { results: self.settle_offline_receipts(merchant, token, &req.receipts)? })
    }

    fn set_allowlist(&self, token: &Token, merchant: &MerchantId, req: &AllowlistRequest) -> Result<(), ApiError> {
        Ok(Ledger::set_allowlist(self, merchant, token, &req.allowed)?)
    }
}

use pyom_core::*;

struct Fixture {
    mint: CashKeypair,
    epochs: Vec<CashKeypair>,
    merchant: MerchantId,
}

impl Fixture {
    fn new() -> Self {
        Self {
            mint: CashKeypair::from_seed([0xAA; 32]),
            epochs: (1..=3u8).map(|i| CashKeypair::from_seed([0xE0 + i; 32])).collect(),
            merchant: AccountId([0x4D; 16]),
        }
    }

    fn epoch_key(&self, epoch: EpochId) -> &CashKeypair {
        &self.epochs[epoch as usize - 1]
    }

    fn note(&self, seed: u8, minor_units: u64, bind: Option<(MerchantId, EpochId)>) -> CashNote {
        let cash = generate_cash_keypair(&[seed; 32]).unwrap();
        let amount = MoneyAmount::new(minor_units, Currency::USD);
        let cash_id = CashId([seed; 16]);
        let kind = if bind.is_some() { NoteKind::MerchantBound } else { NoteKind::Standard };
        let issuance_sig = sign_issuance(self.mint.secret(), kind, &amount, &cash_id, &cash.public());
        let binding = bind.map(|(m, e)| {
            sign_endorsement(self.epoch_key(e).secret(), &cash_id, &amount, &cash.public(), m, e)
        });
        assemble_note(&cash, amount, IssuedMaterials { cash_id, issuance_sig, binding })
    }

    fn accepted(&self, epoch: EpochId) -> Vec<(EpochId, PublicKey)> {
        vec![(epoch, self.epoch_key(epoch).public())]
    }
}

#[test]
fn genuine_note_verifies_against_its_mint_only() {
    let f = Fixture::new();
    let note = f.note(1, 1000, None);
    assert!(verify_issuance(&note, &f.mint.public()));
    assert!(!verify_issuance(&note, &CashKeypair::from_seed([0xAB; 32]).public()));
}

#[test]
fn tampered_value_fails_issuance() {
    let f = Fixture::new();
    let mut bytes = encode_note(&f.note(1, 1000, None)).unwrap().into_bytes();
    bytes[9..17].copy_from_slice(&100_000u64.to_be_bytes());
    let tampered = decode_note(&bytes).unwrap();
    assert_eq!(tampered.amount.minor_units, 100_000);
    assert!(!verify_issuance(&tampered, &f.mint.public()));
}

#[test]
fn endorsement_is_epoch_and_merchant_specific() {
    let f = Fixture::new();
    let note = f.note(2, 1000, Some((f.merchant, 1)));
    assert_eq!(verify_endorsement(&note, &f.epoch_key(1).public()), Ok(true));
    assert_eq!(verify_endorsement(&note, &f.epoch_key(2).public()), Ok(false));

    let mut swapped = note.clone();
    swapped.binding.as_mut().unwrap().merchant_id = AccountId([0x4E; 16]);
    assert_eq!(verify_endorsement(&swapped, &f.epoch_key(1).public()), Ok(false));

    let standard = f.note(3, 1000, None);
    let err = verify_endorsement(&standard, &f.epoch_key(1).public()).unwrap_err();
    assert_eq!(err.code(), "not-applicable");
}

#[test]
fn endorsement_covers_cash_public() {
    let f = Fixture::new();
    let mut note = f.note(4, 1000, Some((f.merchant, 1)));
    let other = CashKeypair::from_seed([0x99; 32]);
    note.cash_secret = other.secret().clone();
    note.cash_public = other.public();
    assert_eq!(verify_endorsement(&note, &f.epoch_key(1).public()), Ok(false));
    let report = offline_verify(&note, &f.merchant, &f.accepted(1), &f.mint.public());
    assert!(report.key_consistent);
    assert_eq!(report.bound_ok, Some(false));
    assert!(!report.accepted());
}

#[test]
fn offline_accepts_genuine_bound_ten_dollar_note() {
    let f = Fixture::new();
    let note = f.note(5, 1000, Some((f.merchant, 1)));
    let payload = encode_note(&note).unwrap();
    let decoded = decode_note_text(&payload.text()).unwrap();
    let report = offline_verify(&decoded, &f.merchant, &f.accepted(1), &f.mint.public());
    assert_eq!(
        report,
        VerifyReport { authentic: true, key_consistent: true, bound_ok: Some(true), overall: Verdict::Accept }
    );
}

#[test]
fn offline_rejection_reasons() {
    let f = Fixture::new();
    let mint = f.mint.public();

    let note = f.note(6, 1000, Some((f.merchant, 1)));
    let elsewhere = offline_verify(&note, &AccountId([1; 16]), &f.accepted(1), &mint);
    assert_eq!(elsewhere.overall, Verdict::Reject(RejectReason::WrongMerchant));

    let stale = offline_verify(&note, &f.merchant, &f.accepted(2), &mint);
    assert_eq!(stale.overall, Verdict::Reject(RejectReason::StaleEpoch));

    let standard = f.note(7, 1000, None);
    let r = offline_verify(&standard, &f.merchant, &f.accepted(1), &mint);
    assert_eq!(r.overall, Verdict::Reject(RejectReason::NotMerchantBound));
    assert_eq!(r.bound_ok, None);
    assert!(r.authentic);

    // Keep one note's public key and id but carry another note's secret.
    let donor = f.note(8, 1000, Some((f.merchant, 1)));
    let mut spliced = note.clone();
    spliced.cash_secret = donor.cash_secret.clone();
    let r = offline_verify(&spliced, &f.merchant, &f.accepted(1), &mint);
    assert!(r.authentic);
    assert!(!r.key_consistent);
    assert_eq!(r.overall, Verdict::Reject(RejectReason::KeyMismatch));

    // Epoch listed but under the wrong key.
    let wrong_key = vec![(1, f.epoch_key(3).public())];
    let r = offline_verify(&note, &f.merchant, &wrong_key, &mint);
    assert_eq!(r.overall, Verdict::Reject(RejectReason::BadEndorsement));

    let r = offline_verify(&note, &f.merchant, &[], &mint);
    assert_eq!(r.overall, Verdict::Reject(RejectReason::StaleEpoch));
}

#[test]
fn every_single_bit_flip_of_signed_fields_is_detected() {
    let f = Fixture::new();
    let mint = f.mint.public();
    for bound in [false, true] {
        let note = f.note(9, 1000, bound.then_some((f.merchant, 2)));
        let bytes = encode_note(&note).unwrap().into_bytes();
        // kind, currency, minor_units, cash_id, cash_secret (drives cash_public),
        // and the issuance signature itself.
        for bit in (5 * 8)..(129 * 8) {
            let mut flipped = bytes.clone();
            flipped[bit / 8] ^= 1 << (bit % 8);
            match decode_note(&flipped) {
                Err(_) => {}
                Ok(n) => assert!(!verify_issuance(&n, &mint), "bound={bound} bit {bit} undetected"),
            }
        }
        if bound {
            let epoch = f.epoch_key(2).public();
            for bit in (129 * 8)..(213 * 8) {
                let mut flipped = bytes.clone();
                flipped[bit / 8] ^= 1 << (bit % 8);
                let n = decode_note(&flipped).unwrap();
                assert_eq!(verify_endorsement(&n, &epoch), Ok(false), "binding bit {bit}");
            }
        }
    }
}

#[test]
fn signatures_do_not_cross_domains() {
    let f = Fixture::new();
    let note = f.note(10, 1000, Some((f.merchant, 1)));
    let payee = f.merchant;

    // An issuance signature made by a key is never accepted as that key's
    // endorsement or redemption signature, and vice versa.
    let key = CashKeypair::from_seed([0x77; 32]);
    let issue_sig = sign_issuance(key.secret(), note.kind(), &note.amount, &note.cash_id, &note.cash_public);
    let endorse_msg = endorsement_message(&note.cash_id, &note.amount, &note.cash_public, &payee, 1);
    let redeem_msg = redeem_message(&note.cash_id, &payee);
    assert!(!keys::verify(&key.public(), &endorse_msg, &issue_sig));
    assert!(!keys::verify(&key.public(), &redeem_msg, &issue_sig));

    let redeem_sig = key.sign(&redeem_msg);
    assert!(!keys::verify(&key.public(), &note.issuance_message(), &redeem_sig));
    assert!(!keys::verify(&key.public(), &endorse_msg, &redeem_sig));

    let endorse_sig = key.sign(&endorse_msg);
    assert!(!keys::verify(&key.public(), &note.issuance_message(), &endorse_sig));
    assert!(!keys::verify(&key.public(), &redeem_msg, &endorse_sig));

    assert_ne!(&note.issuance_message()[..10], &endorse_msg[..10]);
    assert_ne!(&note.issuance_message()[..10], &redeem_msg[..10]);
}

#[test]
fn redeem_signature_is_payee_specific() {
    let f = Fixture::new();
    let note = f.note(11, 1000, None);
    let alice = AccountId([0xA1; 16]);
    let bob = AccountId([0xB0; 16]);
    let sig = redeem_signature(&note.cash_secret, &note.cash_id, &alice);
    assert!(verify_redeem(&note.cash_public, &note.cash_id, &alice, &sig));
    assert!(!verify_redeem(&note.cash_public, &note.cash_id, &bob, &sig));
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three uppercase ASCII letters, e.g. `USD`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Currency([u8; 3]);

impl Currency {
    pub const USD: Currency = Currency(*b"USD");

    pub fn new(code: [u8; 3]) -> Result<Self, AmountError> {
        if code.iter().all(u8::is_ascii_uppercase) {
            Ok(Self(code))
        } else {
            Err(AmountError::BadCurrency)
        }
    }

    pub fn as_bytes(&self) -> &[u8; 3] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // Constructor guarantees ASCII.
        std::str::from_utf8(&self.0).expect("currency is ASCII")
    }
}

impl FromStr for Currency {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code: [u8; 3] = s.as_bytes().try_into().map_err(|_| AmountError::BadCurrency)?;
        Self::new(code)
    }
}

impl TryFrom<String> for Currency {
    type Error = AmountError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Currency> for String {
    fn from(value: Currency) -> Self {
        value.as_str().to_owned()
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An integer count of minor units (cents) in a single currency.
///
/// Zero is a valid balance but never a valid note value; see
/// [`MoneyAmount::require_positive`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MoneyAmount {
    pub minor_units: u64,
    pub currency: Currency,
}

impl MoneyAmount {
    pub const fn new(minor_units: u64, currency: Currency) -> Self {
        Self { minor_units, currency }
    }

    pub const fn zero(currency: Currency) -> Self {
        Self::new(0, currency)
    }

    pub fn is_zero(&self) -> bool {
        self.minor_units == 0
    }

    pub fn require_positive(self) -> Result<Self, AmountError> {
        if self.is_zero() {
            Err(AmountError::Zero)
        } else {
            Ok(self)
        }
    }

    fn same_currency(&self, other: &Self) -> Result<(), AmountError> {
        if self.currency == other.currency {
            Ok(())
        } else {
            Err(AmountError::CurrencyMismatch { left: self.currency, right: other.currency })
        }
    }

    pub fn checked_add(self, other: Self) -> Result<Self, AmountError> {
        self.same_currency(&other)?;
        let minor_units =
            self.minor_units.checked_add(other.minor_units).ok_or(AmountError::Overflow)?;
        Ok(Self { minor_units, ..self })
    }

    pub fn checked_sub(self, other: Self) -> Result<Self, AmountError> {
        self.same_currency(&other)?;
        let minor_units =
            self.minor_units.checked_sub(other.minor_units).ok_or(AmountError::Underflow)?;
        Ok(Self { minor_units, ..self })
    }

    /// Parses a decimal major-unit string such as `10`, `7.5` or `7.50`.
    /// At most two fractional digits are accepted.
    pub fn parse_major(text: &str, currency: Currency) -> Result<Self, AmountError> {
        let text = text.trim();
        let (whole, frac) = match text.split_once('.') {
            Some((w, f)) => (w, f),
            None => (text, ""),
        };
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || frac.len() > 2 || (!frac.is_empty() && !digits(frac)) {
            return Err(AmountError::Unparseable(text.to_owned()));
        }
        let whole: u64 = whole.parse().map_err(|_| AmountError::Overflow)?;
        let frac: u64 = format!("{frac:0<2}").parse().expect("two ascii digits");
        let minor_units = whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac))
            .ok_or(AmountError::Overflow)?;
        Ok(Self { minor_units, currency })
    }
}

impl fmt::Display for MoneyAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02} {}", self.minor_units / 100, self.minor_units % 100, self.currency)
    }
}

impl fmt::Debug for MoneyAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("currency code must be three uppercase ASCII letters")]
    BadCurrency,
    #[error("amount must be greater than zero")]
    Zero,
    #[error("currency mismatch: {left} vs {right}")]
    CurrencyMismatch { left: Currency, right: Currency },
    #[error("amount overflow")]
    Overflow,
    #[error("amount underflow")]
    Underflow,
    #[error("cannot parse amount {0:?}")]
    Unparseable(String),
}

//! Canonical trade, quote and pool types.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::decimal::Dec;

pub const MAX_DECIMALS: u8 = 36;
pub const WETH_DECIMALS: u8 = 18;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("{field} decimals {decimals} exceed {max}", max = MAX_DECIMALS)]
    TooManyDecimals { field: &'static str, decimals: u8 },
    #[error("{field} must have 18 decimals for direction {direction}")]
    NotWei {
        field: &'static str,
        direction: Direction,
    },
    #[error("gas cost g*(b+f) overflows 128 bits")]
    GasOverflow,
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
    #[error("fee_bps {0} outside [0, 10000)")]
    FeeOutOfRange(u32),
}

/// A token quantity in base units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenAmount {
    pub raw: u128,
    pub decimals: u8,
}

impl TokenAmount {
    pub fn new(raw: u128, decimals: u8) -> Result<Self, ValidationError> {
        if decimals > MAX_DECIMALS {
            return Err(ValidationError::TooManyDecimals {
                field: "amount",
                decimals,
            });
        }
        Ok(TokenAmount { raw, decimals })
    }

    pub fn wei(raw: u128) -> Self {
        TokenAmount {
            raw,
            decimals: WETH_DECIMALS,
        }
    }

    pub fn normalized(&self) -> Dec {
        Dec::from_raw(self.raw, self.decimals)
    }
}

/// EIP-1559 gas terms of a settlement transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasTerms {
    pub gas_used: u128,
    pub base_fee: u128,
    pub priority_fee: u128,
}

impl GasTerms {
    pub fn new(gas_used: u128, base_fee: u128, priority_fee: u128) -> Result<Self, ValidationError> {
        let terms = GasTerms {
            gas_used,
            base_fee,
            priority_fee,
        };
        terms.cost_wei().ok_or(ValidationError::GasOverflow)?;
        Ok(terms)
    }

    /// `g * (b + f)` in wei, `None` on overflow.
    pub fn cost_wei(&self) -> Option<u128> {
        self.base_fee
            .checked_add(self.priority_fee)
            .and_then(|fee| fee.checked_mul(self.gas_used))
    }

    /// Gas cost in ETH.
    pub fn cost_eth(&self) -> Dec {
        Dec::from_raw(self.cost_wei().expect("validated gas terms"), WETH_DECIMALS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Interface {
    OneInch,
    Uniswap,
    Other(String),
}

impl Interface {
    pub fn parse(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "oneinch" | "1inch" => Interface::OneInch,
            "uniswap" => Interface::Uniswap,
            _ => Interface::Other(s.to_string()),
        }
    }
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interface::OneInch => f.write_str("OneInch"),
            Interface::Uniswap => f.write_str("Uniswap"),
            Interface::Other(name) => f.write_str(name),
        }
    }
}

/// Settlement path tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SettlementPath {
    Aggregator,
    Fusion,
    Classic,
    X,
    Other(String),
}

impl SettlementPath {
    pub fn parse(s: &str) -> Self {
        match s.to_ascii_lowercase().as_str() {
            "aggregator" => SettlementPath::Aggregator,
            "fusion" => SettlementPath::Fusion,
            "classic" => SettlementPath::Classic,
            "x" | "uniswapx" => SettlementPath::X,
            _ => SettlementPath::Other(s.to_string()),
        }
    }

    /// The interface a known path belongs to.
    pub fn interface(&self) -> Option<Interface> {
        match self {
            SettlementPath::Aggregator | SettlementPath::Fusion => Some(Interface::OneInch),
            SettlementPath::Classic | SettlementPath::X => Some(Interface::Uniswap),
            SettlementPath::Other(_) => None,
        }
    }
}

impl fmt::Display for SettlementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SettlementPath::Aggregator => f.write_str("Aggregator"),
            SettlementPath::Fusion => f.write_str("Fusion"),
            SettlementPath::Classic => f.write_str("Classic"),
            SettlementPath::X => f.write_str("X"),
            SettlementPath::Other(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    WethIn,
    WethOut,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "WETH_IN" => Some(Direction::WethIn),
            "WETH_OUT" => Some(Direction::WethOut),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::WethIn => f.write_str("WETH_IN"),
            Direction::WethOut => f.write_str("WETH_OUT"),
        }
    }
}

/// One settled swap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub trade_id: String,
    pub interface: Interface,
    pub path: SettlementPath,
    pub block_number: u64,
    pub direction: Direction,
    pub gas_internalized: bool,
    pub amount_in: TokenAmount,
    pub amount_out: TokenAmount,
    pub gas: GasTerms,
    /// USD size; absent values are allowed for per-trade analysis only.
    pub usd_value: Option<Dec>,
    pub timestamp: u64,
}

impl TradeRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        for (field, amount) in [("amount_in", &self.amount_in), ("amount_out", &self.amount_out)] {
            if amount.raw == 0 {
                return Err(ValidationError::NonPositive(field));
            }
            if amount.decimals > MAX_DECIMALS {
                return Err(ValidationError::TooManyDecimals {
                    field,
                    decimals: amount.decimals,
                });
            }
        }
        match self.direction {
            Direction::WethIn if self.amount_in.decimals != WETH_DECIMALS => {
                return Err(ValidationError::NotWei {
                    field: "amount_in",
                    direction: self.direction,
                })
            }
            Direction::WethOut if self.amount_out.decimals != WETH_DECIMALS => {
                return Err(ValidationError::NotWei {
                    field: "amount_out",
                    direction: self.direction,
                })
            }
            _ => {}
        }
        self.gas.cost_wei().ok_or(ValidationError::GasOverflow)?;
        if let Some(usd) = &self.usd_value {
            if usd.is_negative() {
                return Err(ValidationError::Negative("usd_value"));
            }
        }
        Ok(())
    }
}

/// Output of the baseline function at one block offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quote {
    pub trade_id: String,
    /// Blocks relative to settlement; settlement block is 0.
    pub offset: i64,
    pub out_estimate: TokenAmount,
    /// Gas units; fractional once calibrated.
    pub gas_estimate: Dec,
    pub provider_id: String,
    /// Set once the gas calibration has been applied.
    #[serde(default)]
    pub corrected: bool,
}

impl Quote {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.gas_estimate.is_negative() {
            return Err(ValidationError::Negative("gas_estimate"));
        }
        if self.out_estimate.decimals > MAX_DECIMALS {
            return Err(ValidationError::TooManyDecimals {
                field: "out_estimate",
                decimals: self.out_estimate.decimals,
            });
        }
        Ok(())
    }
}

/// A constant-product pool between WETH and the quote token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub pool_id: String,
    pub reserve_weth: TokenAmount,
    pub reserve_token: TokenAmount,
    pub fee_bps: u32,
    pub gas_per_hop: u64,
}

impl Pool {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.reserve_weth.raw == 0 {
            return Err(ValidationError::NonPositive("reserve_weth"));
        }
        if self.reserve_token.raw == 0 {
            return Err(ValidationError::NonPositive("reserve_token"));
        }
        if self.reserve_weth.decimals != WETH_DECIMALS {
            return Err(ValidationError::NotWei {
                field: "reserve_weth",
                direction: Direction::WethIn,
            });
        }
        if self.reserve_token.decimals > MAX_DECIMALS {
            return Err(ValidationError::TooManyDecimals {
                field: "reserve_token",
                decimals: self.reserve_token.decimals,
            });
        }
        if self.fee_bps >= 10_000 {
            return Err(ValidationError::FeeOutOfRange(self.fee_bps));
        }
        Ok(())
    }

    /// `(reserve_in, reserve_out)` for a swap in `direction`.
    pub fn reserves(&self, direction: Direction) -> (&TokenAmount, &TokenAmount) {
        match direction {
            Direction::WethIn => (&self.reserve_weth, &self.reserve_token),
            Direction::WethOut => (&self.reserve_token, &self.reserve_weth),
        }
    }
}

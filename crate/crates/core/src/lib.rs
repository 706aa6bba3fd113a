//! Price-improvement measurement and attribution for order-flow-auction
//! trades against a counterfactual router baseline.

pub mod attribution;
pub mod baseline;
pub mod calibration;
pub mod decimal;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod price;
pub mod scenario;
pub mod stats;

pub use decimal::Dec;
pub use model::{Direction, GasTerms, Interface, Pool, Quote, SettlementPath, TokenAmount, TradeRecord};

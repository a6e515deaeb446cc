//! Talking to a belief engine over HTTP: the request and response schema,
//! a blocking engine client, and an oracle backed by a remote endpoint.

pub mod api;
mod engine;
mod remote;

pub use engine::{ClientError, EngineClient};
pub use remote::{RemoteOracle, RemoteOracleConfig};

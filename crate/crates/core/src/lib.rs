pub mod bench;
pub mod crypto;
pub mod message;
pub mod model;
pub mod overhead;
pub mod set;
pub mod sim;
pub mod stats;

pub mod control;
pub mod dynamics;
pub mod guidance;
pub mod output;
pub mod rotation;
pub mod config;
pub mod sim;

//! Networking for the coordination core: the session server and a
//! scriptable headset client.

pub mod client;
pub mod server;
pub mod sim;

pub mod golden;
pub mod lww;

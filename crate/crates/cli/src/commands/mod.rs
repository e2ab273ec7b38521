pub mod check;
pub mod elliptic;
pub mod evolve;
pub mod init_data;
pub mod picard;
pub mod report;
pub mod transport;

pub mod dot;
pub mod oracle;

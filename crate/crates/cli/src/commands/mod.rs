pub mod calibrate;
pub mod daily;
pub mod intraday;
pub mod simulate;
pub mod validate;

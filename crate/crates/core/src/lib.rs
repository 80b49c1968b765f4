pub mod analytics;
pub mod content;
pub mod error;
pub mod learner;
pub mod service;
pub mod store;
pub mod tutor;

pub use error::{Error, FieldError, Result};

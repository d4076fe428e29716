//! Quasi-isometric embeddings of warped products into hyperbolic-like spaces,
//! with numerical certification of the hypotheses that make a pencil of
//! vertical geodesics quasi-isometric.

pub mod error;
pub mod certifier;
pub mod cli;
pub mod config;
pub mod hyperbolic;
pub mod mesh;
pub mod pencil;
pub mod space;
pub mod surface;
pub mod warped;

pub use error::{Error, Result};

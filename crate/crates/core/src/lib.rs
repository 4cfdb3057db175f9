pub mod diagnostics;
pub mod error;
pub mod forest;
pub mod io;
pub mod gaussian;
pub mod leaf_prior;
pub mod models;
pub mod special;
pub mod tree;

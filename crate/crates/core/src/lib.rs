pub mod error;
pub mod experiments;
pub mod fem;
pub mod fit;
pub mod helmholtz;
pub mod mesh;
pub mod oracle;
pub mod powerseries;
pub mod sparse;
pub mod transmission;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

//! 3D Gaussian splatting with view-dependent uncertainty stored as SH
//! coefficients per gaussian, plus an ensemble baseline and sparsification
//! metrics.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod adam;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod imageio;
pub mod render;
pub mod scene;
pub mod sh;
pub mod sparsify;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use render::{render, RenderBuffer, RenderMode};
pub use scene::{Camera, Gaussian, Scene};
pub use sh::ShCoeffs;

//! Spacetime Gaussian splatting for dynamic 3D objects.
//!
//! A scene is a set of anisotropic 4D Gaussians over (x, y, z, t). Conditioning
//! a Gaussian on a timestamp yields a moving, deforming 3D Gaussian that is
//! projected to screen space (EWA) and composited front-to-back. The rasterizer
//! is differentiable: [`render::render_backward`] produces analytic gradients
//! for every Gaussian parameter, which drive the confidence-weighted
//! reconstruction loop in [`train`].
//!
//! Module map:
//! - [`gaussian`], [`sh`]: the 4D primitive and closed-form Gaussian math
//! - [`camera`], [`projection`]: pinhole model and EWA screen-space projection
//! - [`render`], [`backward`]: forward compositing and the analytic backward pass
//! - [`ssim`], [`confidence`]: SSIM maps, temporal self-consistency confidence, PSNR
//! - [`loss`], [`optim`], [`train`]: confidence-weighted loss, Adam, training loop
//! - [`volsync`]: time-synchronous feature-volume smoothing and frame interpolation
//! - [`dataio`]: image-matrix datasets, orbit rigs, scene/volume/confidence persistence

pub mod backward;
pub mod camera;
pub mod confidence;
pub mod dataio;
pub mod error;
pub mod frame;
pub mod gaussian;
pub mod loss;
pub mod optim;
pub mod projection;
pub mod render;
pub mod sh;
pub mod ssim;
pub mod train;
pub mod volsync;

pub use error::{Error, Result};
pub use frame::{Image, Map};
pub use gaussian::Gaussian4D;

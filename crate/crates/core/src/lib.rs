pub mod camera;
pub mod curvature;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod image;
pub mod lines;
pub mod mesh;
pub mod optimize;
pub mod ranker;
pub mod raster;

pub use camera::Camera;
pub use error::{Error, Result};
pub use filter::{FilterGradient, ThresholdSet};
pub use image::{Drawing, Image, Mask};
pub use mesh::{TriangleMesh, Vec3};

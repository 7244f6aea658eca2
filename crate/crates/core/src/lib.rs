//! Rotation-invariant shape descriptors for galaxy images, with the
//! preprocessing, dataset construction and evaluation around them.

pub mod datasets;
pub mod descriptor;
pub mod error;
pub mod fmt;
pub mod imgcore;
pub mod learn;
pub mod moments;
pub mod preprocess;
pub mod ringfeat;
pub mod zernike;

pub use descriptor::{Descriptor, FeatureVector};
pub use error::{Error, Result};
pub use imgcore::{Centroid, GrayImage, PolarImage};

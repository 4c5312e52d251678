//! Scene-text image synthesis.
//!
//! Text is embedded into background photographs at places that make sense
//! for it: on surfaces whose semantic class can carry text, inside
//! homogeneous low-saliency areas, aligned with nearby structure, and colored
//! after real scene text found over similar-looking backgrounds. Each output
//! image comes with quadrilateral ground truth and a manifest that replays
//! it byte for byte.

pub mod appearance;
pub mod corpus;
pub mod geometry;
pub mod pipeline;
pub mod placement;
pub mod raster;
pub mod rendering;
pub mod saliency;
pub mod semantics;

//! Software rasterizer for head-mounted-display image synthesis.
//!
//! Instead of rasterizing a uniform pinhole image and resampling it, the
//! renderer rasterizes directly into non-standard image formations:
//!
//! * **foveated** — sample density follows a radial falloff around a
//!   gaze point, so the fovea is supersampled and the periphery is not;
//! * **rolling** — each pixel depicts the scene at the moment a
//!   rolling-scan display physically lights it, removing scan-out
//!   latency from animation and camera motion;
//! * **joint** — both at once.
//!
//! The core trick is per-pixel ray casting confined to conservative
//! primitive-pixel bounds ([`bounds`]): a bound guarantees to contain
//! every pixel a moving primitive can touch, and each candidate pixel
//! then runs an exact ray-triangle test at its own time and position.
//! Because the test is exact, the output is bit-identical to a
//! brute-force ray tracer ([`oracle`]) — the bounds only decide how much
//! work is wasted, measured as sample test efficiency ([`metrics`]).

pub mod bounds;
pub mod foveation;
pub mod geometry;
pub mod image;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod raster;
pub mod scene;
pub mod sweep;

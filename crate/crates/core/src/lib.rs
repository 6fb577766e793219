//! Radial analysis of `-Δu = λ|u|^{p-2}u - |u|^{q-2}u`.

pub mod atlas;
pub mod error;
pub mod exponent_plane;
pub mod fibering;
pub mod grid;
pub mod nehari;
pub mod ode;
pub mod parabolic;
pub mod profile;
pub mod radial;
pub mod stability;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};

// The book's Rust blocks run as doc-tests through these modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/exponent-plane.md")]
    mod exponent_plane {}
    #[doc = include_str!("../../../book/src/fibering.md")]
    mod fibering {}
    #[doc = include_str!("../../../book/src/radial-solver.md")]
    mod radial_solver {}
    #[doc = include_str!("../../../book/src/nehari.md")]
    mod nehari {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/parabolic.md")]
    mod parabolic {}
}

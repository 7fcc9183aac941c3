//! Segmentation and restoration of grayscale images with parametric contours.
//!
//! The model is a discrete Mumford-Shah energy: a length penalty on a set of
//! polygonal curves, a masked difference-quotient (Dirichlet) term measuring the
//! smoothness of the approximation `u` away from the curves, and a fidelity term
//! tying `u` to the input image. Curves may be closed, attached to the image
//! boundary, or end in a *free endpoint* — a point strictly inside the image
//! where no other curve continues (a crack tip).
//!
//! Minimization alternates two blocks:
//!
//! * **Denoising** ([`denoiser`]): with the curves fixed, `u` solves a sparse
//!   linear system — a graph Laplacian whose links crossing any curve are cut,
//!   which preserves image edges along the curves.
//! * **Curve evolution** ([`evolver`]): with `u` fixed, curves move by a
//!   semi-implicit step of the gradient flow: normal velocity `σκ + F` in the
//!   interior, and explicit tangential/normal velocities at free endpoints built
//!   from difference quotients of `u` next to the endpoint.
//!
//! [`topology`] detects and executes merging, splitting, closing and deletion of
//! curves; [`energy`] audits the energy; [`pipeline`] orchestrates full runs and
//! backs the command-line interface.

pub mod config;
pub mod denoiser;
pub mod energy;
pub mod evolver;
pub mod geometry;
pub mod imaging;
pub mod linalg;
pub mod pipeline;
pub mod topology;
pub mod vec2;

pub use config::RunConfig;
pub use denoiser::{denoise, LinkMasks};
pub use energy::EnergyBreakdown;
pub use evolver::EvolveParams;
pub use geometry::{CurveNetwork, Domain, EndpointKind, PolygonalCurve};
pub use imaging::GridImage;
pub use linalg::{solve_general, solve_spd, SparseMatrix};
pub use pipeline::{run_segmentation, SegmentationState};
pub use topology::TopologyEvent;
pub use vec2::Vec2;

//! Detection numerics for aerial imagery, built to run and verify on a single
//! desktop core.
//!
//! The crate covers the mathematical components of an aerial object detector
//! without any training machinery:
//!
//! - [`boxgeom`] — axis-aligned box algebra and the IoU / GIoU / CIoU /
//!   smooth-L1 regression losses with analytic gradients
//! - [`clsloss`] — focal loss, class-weighted focal loss, and
//!   histogram-derived class weights
//! - [`activations`] — Mish, Hardswish, and GELU with derivatives
//! - [`lskblock`] — large-kernel depthwise decompositions, spatial kernel
//!   selection attention, and a small FPN, with exact reverse-mode gradients
//! - [`diffhead`] — diffusion-based box corruption and DDIM refinement with a
//!   pluggable denoiser
//! - [`postproc`] — hard/soft NMS and aspect-ratio proposal generation
//! - [`evalmap`] — COCO-style AP evaluation (AP, AP50, AP75, size buckets,
//!   per-class)
//! - [`datapipe`] — patchification, annotation I/O, flips, and split
//!   integrity checks
//!
//! Batch entry points run on rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential iteration otherwise; each one also has
//! an always-sequential `*_seq` twin so the two paths can be compared.

pub mod activations;
pub mod boxgeom;
pub mod clsloss;
pub mod datapipe;
pub mod diffhead;
pub mod evalmap;
pub mod exec;
pub mod lskblock;
pub mod numcheck;
pub mod postproc;
pub mod synth;
